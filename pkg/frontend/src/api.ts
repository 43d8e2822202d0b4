// Typed client for the review service with an offline queue.
//
// Failed submits (network down) are queued and retried; server-side
// validation errors are surfaced with the offending field so the form can
// highlight it. The fetch function is injected so tests can run without a
// network or a browser.

import { NextResponse, Progress, RatingPayload, SubmitResponse } from './types.js'

export type FetchLike = (url: string, init?: {
  method?: string
  headers?: Record<string, string>
  body?: string
}) => Promise<{ ok: boolean; status: number; json(): Promise<unknown>; text(): Promise<string> }>

export class ServerValidationError extends Error {
  constructor(message: string, public fields: string[]) {
    super(message)
  }
}

export class NetworkError extends Error {}

function validationFields(detail: unknown): string[] {
  if (!Array.isArray(detail)) return []
  const fields: string[] = []
  for (const entry of detail) {
    const loc = (entry as { loc?: unknown[] }).loc
    if (Array.isArray(loc) && loc.length > 0) {
      fields.push(String(loc[loc.length - 1]))
    }
  }
  return fields
}

export class ApiClient {
  private queue: RatingPayload[] = []

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private fetchFn: FetchLike,
    private raterToken?: string,
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' }
    if (this.raterToken) headers['x-rater-token'] = this.raterToken
    return headers
  }

  private async request<T>(path: string, init?: Parameters<FetchLike>[1]): Promise<T> {
    let response: Awaited<ReturnType<FetchLike>>
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init)
    } catch (err) {
      throw new NetworkError(String(err))
    }
    if (response.status === 422) {
      const body = (await response.json()) as { detail?: unknown }
      const fields = validationFields(body.detail)
      throw new ServerValidationError(`server rejected request: ${fields.join(', ')}`, fields)
    }
    if (!response.ok) {
      const body = (await response.json().catch(() => ({}))) as { detail?: string }
      throw new Error(body.detail ?? `request failed with status ${response.status}`)
    }
    return (await response.json()) as T
  }

  getNext(): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${this.sessionId}/next`, {
      headers: this.headers(),
    })
  }

  getProgress(): Promise<Progress> {
    return this.request<Progress>(`/sessions/${this.sessionId}/progress`, {
      headers: this.headers(),
    })
  }

  async submitRating(payload: RatingPayload): Promise<SubmitResponse> {
    try {
      return await this.request<SubmitResponse>(`/sessions/${this.sessionId}/ratings`, {
        method: 'POST',
        headers: this.headers(),
        body: JSON.stringify(payload),
      })
    } catch (err) {
      if (err instanceof NetworkError) {
        this.queue.push(payload)
      }
      throw err
    }
  }

  pendingCount(): number {
    return this.queue.length
  }

  // Retry queued submissions in order; stops at the first submission that
  // still cannot reach the server so ordering is preserved.
  async flushQueue(): Promise<number> {
    let flushed = 0
    while (this.queue.length > 0) {
      const payload = this.queue[0]
      try {
        await this.request<SubmitResponse>(`/sessions/${this.sessionId}/ratings`, {
          method: 'POST',
          headers: this.headers(),
          body: JSON.stringify(payload),
        })
      } catch (err) {
        if (err instanceof NetworkError) return flushed
        // Validation errors on queued payloads are dropped: the form state
        // that produced them is gone and the server remains authoritative.
        this.queue.shift()
        continue
      }
      this.queue.shift()
      flushed += 1
    }
    return flushed
  }
}
