// Live integration against the real review service: starts the Python API,
// drives it through the typed client exactly as the browser would, and
// re-checks the blinding property on real wire traffic. Skips cleanly when
// the Python stack is unavailable.

import assert from 'node:assert/strict'
import { spawn, spawnSync } from 'node:child_process'
import { mkdtempSync, readFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { test } from 'node:test'

import { ApiClient } from '../src/api.js'
import { emptyForm, formComplete, select, toPayload } from '../src/state.js'
import { RUBRIC } from '../src/types.js'

const PORT = 8765
const BASE = `http://127.0.0.1:${PORT}`
const REPO = join(__dirname, '..', '..', '..')

function pythonAvailable(): boolean {
  const probe = spawnSync('python3', ['-c', 'import uvicorn, notekg.adjudication'])
  return probe.status === 0
}

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 50; attempt++) {
    try {
      await fetch(`${BASE}/docs`)
      return
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 200))
    }
  }
  throw new Error('service did not come up')
}

test('full rating flow against the live service', { skip: !pythonAvailable() }, async () => {
  const dataDir = mkdtempSync(join(tmpdir(), 'review-'))
  const server = spawn('python3', ['-m', 'notekg.cli', 'serve', '--data', dataDir, '--port', String(PORT)], {
    stdio: 'ignore',
  })
  try {
    await waitForServer()

    const items = JSON.parse(
      readFileSync(join(REPO, 'fixtures', 'adjudication_items.json'), 'utf-8'),
    ).slice(0, 3)
    const created = await fetch(`${BASE}/sessions`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ rater_id: 'ui-tester', blinding_seed: 99, items }),
    })
    assert.equal(created.status, 201)
    const sessionId = ((await created.json()) as { session_id: string }).session_id

    const wire: string[] = []
    const client = new ApiClient(BASE, sessionId, async (url, init) => {
      const response = await fetch(url, init)
      const text = await response.text()
      wire.push(url + (init?.body ?? '') + text)
      return {
        ok: response.ok,
        status: response.status,
        json: async () => JSON.parse(text),
        text: async () => text,
      }
    })

    for (let i = 0; i < 3; i++) {
      const next = await client.getNext()
      assert.equal(next.done, false)
      let form = emptyForm(next.item!.item_id)
      for (const slot of ['A', 'B'] as const) {
        for (const dimension of RUBRIC) {
          form = select(form, slot, dimension.key, dimension.options[0])
        }
      }
      assert.ok(formComplete(form))
      for (const slot of ['A', 'B'] as const) {
        const result = await client.submitRating(toPayload(form, slot))
        assert.equal(result.accepted, true)
      }
    }
    const finished = await client.getNext()
    assert.equal(finished.done, true)

    const progress = await client.getProgress()
    assert.equal(progress.items_complete, 3)

    for (const payload of wire) {
      assert.ok(!payload.includes('"C1"') && !payload.includes('"C4g"'),
        'live wire traffic must stay blinded')
    }
  } finally {
    server.kill()
  }
})
