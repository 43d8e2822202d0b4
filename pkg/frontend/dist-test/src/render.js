"use strict";
// Pure HTML renderers for the two screens. Everything user-visible flows
// through escapeHtml, and the only inputs are blinded payloads, so the
// rendered DOM cannot contain a condition identifier.
Object.defineProperty(exports, "__esModule", { value: true });
exports.escapeHtml = escapeHtml;
exports.renderReview = renderReview;
exports.renderProgress = renderProgress;
exports.renderDone = renderDone;
exports.renderError = renderError;
const state_js_1 = require("./state.js");
const types_js_1 = require("./types.js");
function escapeHtml(text) {
    return text
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;')
        .replace(/'/g, '&#39;');
}
function rubricControls(slot, form) {
    const rows = types_js_1.RUBRIC.map((dimension, index) => {
        const selected = form.slots[slot][dimension.key];
        const active = form.activeSlot === slot && form.activeDimension === index;
        const buttons = dimension.options
            .map((option) => {
            const pressed = selected === option ? ' aria-pressed="true" data-selected="1"' : ' aria-pressed="false"';
            return (`<button type="button" class="option" data-slot="${slot}" ` +
                `data-dimension="${dimension.key}" data-value="${option}"${pressed}>` +
                `${escapeHtml(option.replace(/_/g, ' '))}</button>`);
        })
            .join('');
        return (`<div class="rubric-row${active ? ' active' : ''}" data-rubric-row="${slot}:${dimension.key}">` +
            `<span class="dimension">${index + 1}. ${escapeHtml(dimension.label)}</span>${buttons}</div>`);
    });
    return rows.join('');
}
function renderReview(item, form, position, total) {
    const submitDisabled = (0, state_js_1.formComplete)(form) ? '' : ' disabled';
    const answers = ['A', 'B']
        .map((slot) => {
        const text = slot === 'A' ? item.answer_a : item.answer_b;
        return (`<section class="answer${form.activeSlot === slot ? ' active' : ''}" data-slot-panel="${slot}">` +
            `<h3>Answer ${slot}</h3>` +
            `<p class="answer-text">${escapeHtml(text)}</p>` +
            `<div class="rubric" data-rubric="${slot}">${rubricControls(slot, form)}</div>` +
            `<label>Note <input type="text" class="note" data-note="${slot}" ` +
            `value="${escapeHtml(form.slots[slot].note ?? '')}"></label>` +
            `</section>`);
    })
        .join('');
    return (`<article class="review" data-item="${escapeHtml(item.item_id)}">` +
        `<header>Item ${position + 1} of ${total}</header>` +
        `<h2 class="question">${escapeHtml(item.question)}</h2>` +
        `<p class="expected"><strong>Reference answer:</strong> ${escapeHtml(item.expected_answer)}</p>` +
        `<details class="source-note"><summary>Source note</summary>` +
        `<pre>${escapeHtml(item.source_note)}</pre></details>` +
        `<div class="answers">${answers}</div>` +
        `<footer>` +
        `<button type="button" id="submit" data-submit${submitDisabled}>Submit both ratings</button>` +
        `<span class="hint">keys: a/b switch answer, 1-5 pick dimension, q/w/e/r pick value</span>` +
        `</footer>` +
        `</article>`);
}
function renderProgress(progress) {
    const percent = (0, state_js_1.progressPercent)(progress);
    const tallies = Object.entries(progress.per_dimension)
        .map(([dimension, counts]) => {
        const cells = Object.entries(counts)
            .map(([value, count]) => `<li>${escapeHtml(value.replace(/_/g, ' '))}: ${count}</li>`)
            .join('');
        return `<section><h4>${escapeHtml(dimension.replace(/_/g, ' '))}</h4><ul>${cells}</ul></section>`;
    })
        .join('');
    return (`<article class="progress">` +
        `<h2>Progress</h2>` +
        `<div class="bar"><div class="fill" style="width: ${percent}%"></div></div>` +
        `<p>${progress.items_complete} of ${progress.total} items complete (${percent}%)</p>` +
        `<div class="tallies">${tallies}</div>` +
        `<button type="button" data-resume>Resume rating</button>` +
        `</article>`);
}
function renderDone(total) {
    return (`<article class="done">` +
        `<h2>All ${total} items rated</h2>` +
        `<p>Thank you. Export the ratings from the command line with the blinding key; ` +
        `the browser never sees which condition produced which answer.</p>` +
        `</article>`);
}
function renderError(message) {
    return (`<div class="error-banner" role="alert">` +
        `<span>${escapeHtml(message)}</span>` +
        `<button type="button" data-retry>Retry</button>` +
        `</div>`);
}
