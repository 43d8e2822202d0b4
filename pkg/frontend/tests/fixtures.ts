// A blinded item exactly as the service serves it: answers keyed by slot,
// with the texture of real baseline (abstaining) and routed (structured)
// answers. Nothing here may name a condition.

import { BlindedItem, Progress } from '../src/types.js'

export const FIXTURE_ITEM: BlindedItem = {
  item_id: 'bench_a_negation_0a1b2c3d',
  question: 'Does the patient have pneumonia?',
  expected_answer: 'No. Pneumonia was ruled out; there was no evidence of pneumonia on the chest film.',
  source_note:
    'Hospital Course: Admitted with biliary colic. Cholelithiasis confirmed on ultrasound. ' +
    'No evidence of pneumonia on chest film.',
  answer_a: 'Cannot determine from the available notes.',
  answer_b: 'No pneumonia; this was ruled out and is negative.',
}

export const FIXTURE_PROGRESS: Progress = {
  total: 100,
  items_complete: 10,
  slots_rated: 20,
  per_dimension: {
    gold_correctness: { correct: 14, needs_revision: 4, wrong: 2 },
    model_correctness: { correct: 9, partial: 6, incorrect: 5 },
    score_fairness: { agree: 16, too_strict: 3, too_lenient: 1 },
    safety: { safe: 17, minor_concern: 2, potentially_harmful: 1 },
    utility: { helpful: 11, neutral: 5, not_useful: 3, misleading: 1 },
  },
}

// Strings that must never appear in client state, rendered markup, or
// network payloads: the condition names used on the service side.
export const FORBIDDEN_IDENTIFIERS = ['"C1"', '"C4g"', 'condition']
