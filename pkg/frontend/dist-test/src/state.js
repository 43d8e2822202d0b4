"use strict";
// Rubric form state: selections per answer slot, completeness gating,
// draft autosave, and keyboard handling. Pure functions over a plain state
// object so every transition is unit-testable without a DOM.
Object.defineProperty(exports, "__esModule", { value: true });
exports.emptyForm = emptyForm;
exports.select = select;
exports.setNote = setNote;
exports.slotComplete = slotComplete;
exports.formComplete = formComplete;
exports.toPayload = toPayload;
exports.serializeDraft = serializeDraft;
exports.restoreDraft = restoreDraft;
exports.draftKey = draftKey;
exports.handleKey = handleKey;
exports.progressPercent = progressPercent;
const types_js_1 = require("./types.js");
function emptyForm(itemId) {
    return { itemId, activeSlot: 'A', activeDimension: 0, slots: { A: {}, B: {} } };
}
function select(state, slot, key, value) {
    const dimension = types_js_1.RUBRIC.find((d) => d.key === key);
    if (!dimension || !dimension.options.includes(value)) {
        return state;
    }
    return {
        ...state,
        slots: { ...state.slots, [slot]: { ...state.slots[slot], [key]: value } },
    };
}
function setNote(state, slot, note) {
    return { ...state, slots: { ...state.slots, [slot]: { ...state.slots[slot], note } } };
}
// Submit stays disabled until every one of the five dimensions has a value.
function slotComplete(state, slot) {
    return types_js_1.DIMENSION_KEYS.every((key) => state.slots[slot][key] !== undefined);
}
function formComplete(state) {
    return slotComplete(state, 'A') && slotComplete(state, 'B');
}
function toPayload(state, slot) {
    if (!slotComplete(state, slot)) {
        throw new Error(`slot ${slot} is incomplete`);
    }
    const selections = state.slots[slot];
    return {
        item_id: state.itemId,
        slot,
        gold_correctness: selections.gold_correctness,
        model_correctness: selections.model_correctness,
        score_fairness: selections.score_fairness,
        safety: selections.safety,
        utility: selections.utility,
        note: selections.note ?? '',
    };
}
// -- draft autosave ---------------------------------------------------------
function serializeDraft(state) {
    return JSON.stringify(state);
}
function restoreDraft(raw, itemId) {
    if (!raw)
        return emptyForm(itemId);
    try {
        const parsed = JSON.parse(raw);
        if (parsed.itemId !== itemId || !parsed.slots)
            return emptyForm(itemId);
        return { ...emptyForm(itemId), ...parsed };
    }
    catch {
        return emptyForm(itemId);
    }
}
function draftKey(sessionId, itemId) {
    return `review-draft:${sessionId}:${itemId}`;
}
// -- keyboard shortcuts -------------------------------------------------------
// Raters work through 100+ items: Tab/`a`/`b` switch the answer slot, digits
// 1-5 jump to a rubric dimension, letters q/w/e/r pick its 1st..4th option.
const OPTION_KEYS = ['q', 'w', 'e', 'r'];
function handleKey(state, key) {
    if (key === 'a' || key === 'b') {
        return { ...state, activeSlot: key.toUpperCase() };
    }
    const digit = parseInt(key, 10);
    if (digit >= 1 && digit <= types_js_1.RUBRIC.length) {
        return { ...state, activeDimension: digit - 1 };
    }
    const optionIndex = OPTION_KEYS.indexOf(key);
    if (optionIndex >= 0) {
        const dimension = types_js_1.RUBRIC[state.activeDimension];
        const value = dimension.options[optionIndex];
        if (value === undefined)
            return state;
        return select(state, state.activeSlot, dimension.key, value);
    }
    return state;
}
// -- progress ----------------------------------------------------------------
function progressPercent(progress) {
    if (progress.total === 0)
        return 0;
    return Math.round((100 * progress.items_complete) / progress.total);
}
