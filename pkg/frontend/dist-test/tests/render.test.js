"use strict";
var __importDefault = (this && this.__importDefault) || function (mod) {
    return (mod && mod.__esModule) ? mod : { "default": mod };
};
Object.defineProperty(exports, "__esModule", { value: true });
const strict_1 = __importDefault(require("node:assert/strict"));
const node_test_1 = require("node:test");
const render_js_1 = require("../src/render.js");
const state_js_1 = require("../src/state.js");
const types_js_1 = require("../src/types.js");
const fixtures_js_1 = require("./fixtures.js");
function completeForm() {
    let form = (0, state_js_1.emptyForm)(fixtures_js_1.FIXTURE_ITEM.item_id);
    for (const slot of ['A', 'B']) {
        for (const dimension of types_js_1.RUBRIC) {
            form = (0, state_js_1.select)(form, slot, dimension.key, dimension.options[0]);
        }
    }
    return form;
}
(0, node_test_1.test)('review screen shows question, reference, both answers, source note', () => {
    const html = (0, render_js_1.renderReview)(fixtures_js_1.FIXTURE_ITEM, (0, state_js_1.emptyForm)(fixtures_js_1.FIXTURE_ITEM.item_id), 0, 12);
    strict_1.default.ok(html.includes('Does the patient have pneumonia?'));
    strict_1.default.ok(html.includes((0, render_js_1.escapeHtml)(fixtures_js_1.FIXTURE_ITEM.expected_answer)));
    strict_1.default.ok(html.includes('Answer A') && html.includes('Answer B'));
    strict_1.default.ok(html.includes((0, render_js_1.escapeHtml)(fixtures_js_1.FIXTURE_ITEM.answer_a)));
    strict_1.default.ok(html.includes((0, render_js_1.escapeHtml)(fixtures_js_1.FIXTURE_ITEM.answer_b)));
    strict_1.default.ok(html.includes('<details class="source-note">'), 'source note is collapsible');
    strict_1.default.ok(html.includes('Item 1 of 12'));
});
(0, node_test_1.test)('submit is disabled until the rubric is complete', () => {
    const incomplete = (0, render_js_1.renderReview)(fixtures_js_1.FIXTURE_ITEM, (0, state_js_1.emptyForm)(fixtures_js_1.FIXTURE_ITEM.item_id), 0, 12);
    strict_1.default.ok(incomplete.includes('data-submit disabled'));
    const complete = (0, render_js_1.renderReview)(fixtures_js_1.FIXTURE_ITEM, completeForm(), 0, 12);
    strict_1.default.ok(!complete.includes('data-submit disabled'));
});
(0, node_test_1.test)('selected rubric values render as pressed buttons', () => {
    const form = (0, state_js_1.select)((0, state_js_1.emptyForm)(fixtures_js_1.FIXTURE_ITEM.item_id), 'A', 'safety', 'safe');
    const html = (0, render_js_1.renderReview)(fixtures_js_1.FIXTURE_ITEM, form, 0, 12);
    strict_1.default.ok(/data-dimension="safety" data-value="safe" aria-pressed="true"/.test(html));
});
(0, node_test_1.test)('rendered review markup contains no condition identifiers', () => {
    const html = (0, render_js_1.renderReview)(fixtures_js_1.FIXTURE_ITEM, completeForm(), 0, 12);
    for (const forbidden of fixtures_js_1.FORBIDDEN_IDENTIFIERS) {
        strict_1.default.ok(!html.includes(forbidden), `rendered DOM must not contain ${forbidden}`);
    }
});
(0, node_test_1.test)('html is escaped', () => {
    const nasty = { ...fixtures_js_1.FIXTURE_ITEM, question: '<script>alert(1)</script>' };
    const html = (0, render_js_1.renderReview)(nasty, (0, state_js_1.emptyForm)(nasty.item_id), 0, 1);
    strict_1.default.ok(!html.includes('<script>alert(1)</script>'));
    strict_1.default.ok(html.includes('&lt;script&gt;'));
});
(0, node_test_1.test)('progress screen: 10/100 renders a 10% bar and tallies', () => {
    const html = (0, render_js_1.renderProgress)(fixtures_js_1.FIXTURE_PROGRESS);
    strict_1.default.ok(html.includes('width: 10%'));
    strict_1.default.ok(html.includes('10 of 100 items complete'));
    strict_1.default.ok(html.includes('clinical safety') || html.includes('safety'));
    strict_1.default.ok(html.includes('data-resume'), 'resume affordance present');
    for (const forbidden of fixtures_js_1.FORBIDDEN_IDENTIFIERS) {
        strict_1.default.ok(!html.includes(forbidden));
    }
});
(0, node_test_1.test)('finished screen points at keyed export', () => {
    const html = (0, render_js_1.renderDone)(100);
    strict_1.default.ok(html.includes('All 100 items rated'));
    strict_1.default.ok(html.toLowerCase().includes('export'));
});
(0, node_test_1.test)('error banner offers retry without losing context', () => {
    const html = (0, render_js_1.renderError)('Network unreachable — your work is saved locally.');
    strict_1.default.ok(html.includes('data-retry'));
    strict_1.default.ok(html.includes('Network unreachable'));
});
