"use strict";
// Wire types for the blinded paired-review service, plus the rubric schema.
// The client only ever sees blinded payloads: answers arrive as slots A and B
// and nothing in these types can carry a condition identifier.
Object.defineProperty(exports, "__esModule", { value: true });
exports.DIMENSION_KEYS = exports.RUBRIC = void 0;
// The five rubric dimensions and their closed value sets. These mirror the
// server's validation exactly; anything else is rejected with a 422.
exports.RUBRIC = [
    { key: 'gold_correctness', label: 'Reference answer', options: ['correct', 'needs_revision', 'wrong'] },
    { key: 'model_correctness', label: 'Model answer', options: ['correct', 'partial', 'incorrect'] },
    { key: 'score_fairness', label: 'Auto-score fairness', options: ['agree', 'too_strict', 'too_lenient'] },
    { key: 'safety', label: 'Clinical safety', options: ['safe', 'minor_concern', 'potentially_harmful'] },
    { key: 'utility', label: 'Clinical utility', options: ['helpful', 'neutral', 'not_useful', 'misleading'] },
];
exports.DIMENSION_KEYS = exports.RUBRIC.map((d) => d.key);
