"use strict";
// Browser bootstrap: wires the pure renderers and state machine to the DOM.
//
// One active session per browser profile (its id lives in localStorage, set
// from the ?session= query parameter). Form drafts autosave per item so a
// network failure or reload never loses in-progress ratings; submits are
// optimistic with rollback on server rejection.
Object.defineProperty(exports, "__esModule", { value: true });
exports.startApp = startApp;
const api_js_1 = require("./api.js");
const state_js_1 = require("./state.js");
const render_js_1 = require("./render.js");
function sessionConfig() {
    const params = new URLSearchParams(window.location.search);
    const fromQuery = params.get('session');
    if (fromQuery)
        window.localStorage.setItem('review-session', fromQuery);
    const sessionId = fromQuery ?? window.localStorage.getItem('review-session');
    if (!sessionId) {
        throw new Error('no session: open this page with ?session=<session id>');
    }
    return { sessionId, baseUrl: params.get('api') ?? '' };
}
function startApp(root) {
    const { sessionId, baseUrl } = sessionConfig();
    const client = new api_js_1.ApiClient(baseUrl, sessionId, (url, init) => fetch(url, init));
    const state = { item: null, position: 0, total: 0, form: null, screen: 'review', error: null };
    function saveDraft() {
        if (state.form) {
            window.localStorage.setItem((0, state_js_1.draftKey)(sessionId, state.form.itemId), (0, state_js_1.serializeDraft)(state.form));
        }
    }
    function render() {
        let body = '';
        if (state.screen === 'done') {
            body = (0, render_js_1.renderDone)(state.total);
        }
        else if (state.screen === 'progress') {
            body = '<p>Loading progress…</p>';
        }
        else if (state.item && state.form) {
            body = (0, render_js_1.renderReview)(state.item, state.form, state.position, state.total);
        }
        else {
            body = '<p>Loading…</p>';
        }
        root.innerHTML = (state.error ? (0, render_js_1.renderError)(state.error) : '') + body;
    }
    async function loadNext() {
        try {
            const next = await client.getNext();
            state.total = next.total;
            state.error = null;
            if (next.done) {
                state.screen = 'done';
                state.item = null;
                state.form = null;
            }
            else {
                state.screen = 'review';
                state.item = next.item;
                state.position = next.position;
                state.form = (0, state_js_1.restoreDraft)(window.localStorage.getItem((0, state_js_1.draftKey)(sessionId, next.item.item_id)), next.item.item_id);
            }
        }
        catch (err) {
            state.error = err instanceof api_js_1.NetworkError ? 'Network unreachable — your work is saved locally.' : String(err);
        }
        render();
    }
    async function showProgress() {
        state.screen = 'progress';
        render();
        try {
            const progress = await client.getProgress();
            root.innerHTML = (0, render_js_1.renderProgress)(progress);
        }
        catch (err) {
            state.error = String(err);
            render();
        }
    }
    async function submitBoth() {
        if (!state.form || !(0, state_js_1.formComplete)(state.form))
            return;
        const form = state.form;
        const previousItem = state.item;
        const previousPosition = state.position;
        // Optimistic: advance immediately, roll back if the server rejects.
        state.item = null;
        state.form = null;
        render();
        try {
            for (const slot of ['A', 'B']) {
                if ((0, state_js_1.slotComplete)(form, slot)) {
                    await client.submitRating((0, state_js_1.toPayload)(form, slot));
                }
            }
            window.localStorage.removeItem((0, state_js_1.draftKey)(sessionId, form.itemId));
            await loadNext();
        }
        catch (err) {
            state.item = previousItem;
            state.position = previousPosition;
            state.form = form;
            if (err instanceof api_js_1.ServerValidationError) {
                state.error = `The server rejected the rating: ${err.fields.join(', ')}`;
            }
            else if (err instanceof api_js_1.NetworkError) {
                state.error = 'Offline: rating queued, will retry automatically.';
                window.setTimeout(retryQueue, 4000);
            }
            else {
                state.error = String(err);
            }
            render();
        }
    }
    async function retryQueue() {
        try {
            if ((await client.flushQueue()) > 0 && client.pendingCount() === 0) {
                state.error = null;
                await loadNext();
                return;
            }
        }
        catch {
            // fall through to reschedule
        }
        if (client.pendingCount() > 0)
            window.setTimeout(retryQueue, 4000);
    }
    root.addEventListener('click', (event) => {
        const target = event.target;
        if (target.matches('button.option') && state.form) {
            const slot = target.dataset.slot;
            const dimension = target.dataset.dimension;
            state.form = (0, state_js_1.select)(state.form, slot, dimension, target.dataset.value ?? '');
            state.form = { ...state.form, activeSlot: slot };
            saveDraft();
            render();
        }
        else if (target.matches('[data-submit]')) {
            void submitBoth();
        }
        else if (target.matches('[data-retry]')) {
            state.error = null;
            void (client.pendingCount() > 0 ? retryQueue() : loadNext());
        }
        else if (target.matches('[data-resume]')) {
            void loadNext();
        }
    });
    root.addEventListener('input', (event) => {
        const target = event.target;
        if (target.matches('input.note') && state.form) {
            state.form = (0, state_js_1.setNote)(state.form, target.dataset.note, target.value);
            saveDraft();
        }
    });
    document.addEventListener('keydown', (event) => {
        if (state.screen !== 'review' || !state.form)
            return;
        if (event.target.tagName === 'INPUT')
            return;
        if (event.key === 'Enter' && (0, state_js_1.formComplete)(state.form)) {
            void submitBoth();
            return;
        }
        const updated = (0, state_js_1.handleKey)(state.form, event.key.toLowerCase());
        if (updated !== state.form) {
            state.form = updated;
            saveDraft();
            render();
        }
    });
    document.addEventListener('keydown', (event) => {
        if (event.key === 'p' && event.ctrlKey) {
            event.preventDefault();
            void showProgress();
        }
    });
    void loadNext();
}
if (typeof document !== 'undefined' && document.getElementById('app')) {
    startApp(document.getElementById('app'));
}
