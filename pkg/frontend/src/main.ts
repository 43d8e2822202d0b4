// Browser bootstrap: wires the pure renderers and state machine to the DOM.
//
// One active session per browser profile (its id lives in localStorage, set
// from the ?session= query parameter). Form drafts autosave per item so a
// network failure or reload never loses in-progress ratings; submits are
// optimistic with rollback on server rejection.

import { ApiClient, NetworkError, ServerValidationError } from './api.js'
import {
  FormState,
  draftKey,
  emptyForm,
  formComplete,
  handleKey,
  restoreDraft,
  select,
  serializeDraft,
  setNote,
  slotComplete,
  toPayload,
} from './state.js'
import { renderDone, renderError, renderProgress, renderReview } from './render.js'
import { BlindedItem, DimensionKey, Slot } from './types.js'

interface AppState {
  item: BlindedItem | null
  position: number
  total: number
  form: FormState | null
  screen: 'review' | 'progress' | 'done'
  error: string | null
}

function sessionConfig(): { sessionId: string; baseUrl: string } {
  const params = new URLSearchParams(window.location.search)
  const fromQuery = params.get('session')
  if (fromQuery) window.localStorage.setItem('review-session', fromQuery)
  const sessionId = fromQuery ?? window.localStorage.getItem('review-session')
  if (!sessionId) {
    throw new Error('no session: open this page with ?session=<session id>')
  }
  return { sessionId, baseUrl: params.get('api') ?? '' }
}

export function startApp(root: HTMLElement): void {
  const { sessionId, baseUrl } = sessionConfig()
  const client = new ApiClient(baseUrl, sessionId, (url, init) => fetch(url, init))
  const state: AppState = { item: null, position: 0, total: 0, form: null, screen: 'review', error: null }

  function saveDraft(): void {
    if (state.form) {
      window.localStorage.setItem(draftKey(sessionId, state.form.itemId), serializeDraft(state.form))
    }
  }

  function render(): void {
    let body = ''
    if (state.screen === 'done') {
      body = renderDone(state.total)
    } else if (state.screen === 'progress') {
      body = '<p>Loading progress…</p>'
    } else if (state.item && state.form) {
      body = renderReview(state.item, state.form, state.position, state.total)
    } else {
      body = '<p>Loading…</p>'
    }
    root.innerHTML = (state.error ? renderError(state.error) : '') + body
  }

  async function loadNext(): Promise<void> {
    try {
      const next = await client.getNext()
      state.total = next.total
      state.error = null
      if (next.done) {
        state.screen = 'done'
        state.item = null
        state.form = null
      } else {
        state.screen = 'review'
        state.item = next.item!
        state.position = next.position!
        state.form = restoreDraft(
          window.localStorage.getItem(draftKey(sessionId, next.item!.item_id)),
          next.item!.item_id,
        )
      }
    } catch (err) {
      state.error = err instanceof NetworkError ? 'Network unreachable — your work is saved locally.' : String(err)
    }
    render()
  }

  async function showProgress(): Promise<void> {
    state.screen = 'progress'
    render()
    try {
      const progress = await client.getProgress()
      root.innerHTML = renderProgress(progress)
    } catch (err) {
      state.error = String(err)
      render()
    }
  }

  async function submitBoth(): Promise<void> {
    if (!state.form || !formComplete(state.form)) return
    const form = state.form
    const previousItem = state.item
    const previousPosition = state.position
    // Optimistic: advance immediately, roll back if the server rejects.
    state.item = null
    state.form = null
    render()
    try {
      for (const slot of ['A', 'B'] as Slot[]) {
        if (slotComplete(form, slot)) {
          await client.submitRating(toPayload(form, slot))
        }
      }
      window.localStorage.removeItem(draftKey(sessionId, form.itemId))
      await loadNext()
    } catch (err) {
      state.item = previousItem
      state.position = previousPosition
      state.form = form
      if (err instanceof ServerValidationError) {
        state.error = `The server rejected the rating: ${err.fields.join(', ')}`
      } else if (err instanceof NetworkError) {
        state.error = 'Offline: rating queued, will retry automatically.'
        window.setTimeout(retryQueue, 4000)
      } else {
        state.error = String(err)
      }
      render()
    }
  }

  async function retryQueue(): Promise<void> {
    try {
      if ((await client.flushQueue()) > 0 && client.pendingCount() === 0) {
        state.error = null
        await loadNext()
        return
      }
    } catch {
      // fall through to reschedule
    }
    if (client.pendingCount() > 0) window.setTimeout(retryQueue, 4000)
  }

  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement
    if (target.matches('button.option') && state.form) {
      const slot = target.dataset.slot as Slot
      const dimension = target.dataset.dimension as DimensionKey
      state.form = select(state.form, slot, dimension, target.dataset.value ?? '')
      state.form = { ...state.form, activeSlot: slot }
      saveDraft()
      render()
    } else if (target.matches('[data-submit]')) {
      void submitBoth()
    } else if (target.matches('[data-retry]')) {
      state.error = null
      void (client.pendingCount() > 0 ? retryQueue() : loadNext())
    } else if (target.matches('[data-resume]')) {
      void loadNext()
    }
  })

  root.addEventListener('input', (event) => {
    const target = event.target as HTMLInputElement
    if (target.matches('input.note') && state.form) {
      state.form = setNote(state.form, target.dataset.note as Slot, target.value)
      saveDraft()
    }
  })

  document.addEventListener('keydown', (event) => {
    if (state.screen !== 'review' || !state.form) return
    if ((event.target as HTMLElement).tagName === 'INPUT') return
    if (event.key === 'Enter' && formComplete(state.form)) {
      void submitBoth()
      return
    }
    const updated = handleKey(state.form, event.key.toLowerCase())
    if (updated !== state.form) {
      state.form = updated
      saveDraft()
      render()
    }
  })

  document.addEventListener('keydown', (event) => {
    if (event.key === 'p' && event.ctrlKey) {
      event.preventDefault()
      void showProgress()
    }
  })

  void loadNext()
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  startApp(document.getElementById('app')!)
}
