// Rubric form state: selections per answer slot, completeness gating,
// draft autosave, and keyboard handling. Pure functions over a plain state
// object so every transition is unit-testable without a DOM.

import { DIMENSION_KEYS, DimensionKey, RatingPayload, RUBRIC, Slot } from './types.js'

export type SlotSelections = Partial<Record<DimensionKey, string>> & { note?: string }

export interface FormState {
  itemId: string
  activeSlot: Slot
  activeDimension: number // index into RUBRIC
  slots: Record<Slot, SlotSelections>
}

export function emptyForm(itemId: string): FormState {
  return { itemId, activeSlot: 'A', activeDimension: 0, slots: { A: {}, B: {} } }
}

export function select(state: FormState, slot: Slot, key: DimensionKey, value: string): FormState {
  const dimension = RUBRIC.find((d) => d.key === key)
  if (!dimension || !dimension.options.includes(value)) {
    return state
  }
  return {
    ...state,
    slots: { ...state.slots, [slot]: { ...state.slots[slot], [key]: value } },
  }
}

export function setNote(state: FormState, slot: Slot, note: string): FormState {
  return { ...state, slots: { ...state.slots, [slot]: { ...state.slots[slot], note } } }
}

// Submit stays disabled until every one of the five dimensions has a value.
export function slotComplete(state: FormState, slot: Slot): boolean {
  return DIMENSION_KEYS.every((key) => state.slots[slot][key] !== undefined)
}

export function formComplete(state: FormState): boolean {
  return slotComplete(state, 'A') && slotComplete(state, 'B')
}

export function toPayload(state: FormState, slot: Slot): RatingPayload {
  if (!slotComplete(state, slot)) {
    throw new Error(`slot ${slot} is incomplete`)
  }
  const selections = state.slots[slot]
  return {
    item_id: state.itemId,
    slot,
    gold_correctness: selections.gold_correctness!,
    model_correctness: selections.model_correctness!,
    score_fairness: selections.score_fairness!,
    safety: selections.safety!,
    utility: selections.utility!,
    note: selections.note ?? '',
  }
}

// -- draft autosave ---------------------------------------------------------

export function serializeDraft(state: FormState): string {
  return JSON.stringify(state)
}

export function restoreDraft(raw: string | null, itemId: string): FormState {
  if (!raw) return emptyForm(itemId)
  try {
    const parsed = JSON.parse(raw) as FormState
    if (parsed.itemId !== itemId || !parsed.slots) return emptyForm(itemId)
    return { ...emptyForm(itemId), ...parsed }
  } catch {
    return emptyForm(itemId)
  }
}

export function draftKey(sessionId: string, itemId: string): string {
  return `review-draft:${sessionId}:${itemId}`
}

// -- keyboard shortcuts -------------------------------------------------------
// Raters work through 100+ items: Tab/`a`/`b` switch the answer slot, digits
// 1-5 jump to a rubric dimension, letters q/w/e/r pick its 1st..4th option.

const OPTION_KEYS = ['q', 'w', 'e', 'r']

export function handleKey(state: FormState, key: string): FormState {
  if (key === 'a' || key === 'b') {
    return { ...state, activeSlot: key.toUpperCase() as Slot }
  }
  const digit = parseInt(key, 10)
  if (digit >= 1 && digit <= RUBRIC.length) {
    return { ...state, activeDimension: digit - 1 }
  }
  const optionIndex = OPTION_KEYS.indexOf(key)
  if (optionIndex >= 0) {
    const dimension = RUBRIC[state.activeDimension]
    const value = dimension.options[optionIndex]
    if (value === undefined) return state
    return select(state, state.activeSlot, dimension.key, value)
  }
  return state
}

// -- progress ----------------------------------------------------------------

export function progressPercent(progress: { total: number; items_complete: number }): number {
  if (progress.total === 0) return 0
  return Math.round((100 * progress.items_complete) / progress.total)
}
