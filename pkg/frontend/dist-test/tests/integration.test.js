"use strict";
// Live integration against the real review service: starts the Python API,
// drives it through the typed client exactly as the browser would, and
// re-checks the blinding property on real wire traffic. Skips cleanly when
// the Python stack is unavailable.
var __importDefault = (this && this.__importDefault) || function (mod) {
    return (mod && mod.__esModule) ? mod : { "default": mod };
};
Object.defineProperty(exports, "__esModule", { value: true });
const strict_1 = __importDefault(require("node:assert/strict"));
const node_child_process_1 = require("node:child_process");
const node_fs_1 = require("node:fs");
const node_os_1 = require("node:os");
const node_path_1 = require("node:path");
const node_test_1 = require("node:test");
const api_js_1 = require("../src/api.js");
const state_js_1 = require("../src/state.js");
const types_js_1 = require("../src/types.js");
const PORT = 8765;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO = (0, node_path_1.join)(__dirname, '..', '..', '..');
function pythonAvailable() {
    const probe = (0, node_child_process_1.spawnSync)('python3', ['-c', 'import uvicorn, notekg.adjudication']);
    return probe.status === 0;
}
async function waitForServer() {
    for (let attempt = 0; attempt < 50; attempt++) {
        try {
            await fetch(`${BASE}/docs`);
            return;
        }
        catch {
            await new Promise((resolve) => setTimeout(resolve, 200));
        }
    }
    throw new Error('service did not come up');
}
(0, node_test_1.test)('full rating flow against the live service', { skip: !pythonAvailable() }, async () => {
    const dataDir = (0, node_fs_1.mkdtempSync)((0, node_path_1.join)((0, node_os_1.tmpdir)(), 'review-'));
    const server = (0, node_child_process_1.spawn)('python3', ['-m', 'notekg.cli', 'serve', '--data', dataDir, '--port', String(PORT)], {
        stdio: 'ignore',
    });
    try {
        await waitForServer();
        const items = JSON.parse((0, node_fs_1.readFileSync)((0, node_path_1.join)(REPO, 'fixtures', 'adjudication_items.json'), 'utf-8')).slice(0, 3);
        const created = await fetch(`${BASE}/sessions`, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ rater_id: 'ui-tester', blinding_seed: 99, items }),
        });
        strict_1.default.equal(created.status, 201);
        const sessionId = (await created.json()).session_id;
        const wire = [];
        const client = new api_js_1.ApiClient(BASE, sessionId, async (url, init) => {
            const response = await fetch(url, init);
            const text = await response.text();
            wire.push(url + (init?.body ?? '') + text);
            return {
                ok: response.ok,
                status: response.status,
                json: async () => JSON.parse(text),
                text: async () => text,
            };
        });
        for (let i = 0; i < 3; i++) {
            const next = await client.getNext();
            strict_1.default.equal(next.done, false);
            let form = (0, state_js_1.emptyForm)(next.item.item_id);
            for (const slot of ['A', 'B']) {
                for (const dimension of types_js_1.RUBRIC) {
                    form = (0, state_js_1.select)(form, slot, dimension.key, dimension.options[0]);
                }
            }
            strict_1.default.ok((0, state_js_1.formComplete)(form));
            for (const slot of ['A', 'B']) {
                const result = await client.submitRating((0, state_js_1.toPayload)(form, slot));
                strict_1.default.equal(result.accepted, true);
            }
        }
        const finished = await client.getNext();
        strict_1.default.equal(finished.done, true);
        const progress = await client.getProgress();
        strict_1.default.equal(progress.items_complete, 3);
        for (const payload of wire) {
            strict_1.default.ok(!payload.includes('"C1"') && !payload.includes('"C4g"'), 'live wire traffic must stay blinded');
        }
    }
    finally {
        server.kill();
    }
});
