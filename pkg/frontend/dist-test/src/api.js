"use strict";
// Typed client for the review service with an offline queue.
//
// Failed submits (network down) are queued and retried; server-side
// validation errors are surfaced with the offending field so the form can
// highlight it. The fetch function is injected so tests can run without a
// network or a browser.
Object.defineProperty(exports, "__esModule", { value: true });
exports.ApiClient = exports.NetworkError = exports.ServerValidationError = void 0;
class ServerValidationError extends Error {
    constructor(message, fields) {
        super(message);
        this.fields = fields;
    }
}
exports.ServerValidationError = ServerValidationError;
class NetworkError extends Error {
}
exports.NetworkError = NetworkError;
function validationFields(detail) {
    if (!Array.isArray(detail))
        return [];
    const fields = [];
    for (const entry of detail) {
        const loc = entry.loc;
        if (Array.isArray(loc) && loc.length > 0) {
            fields.push(String(loc[loc.length - 1]));
        }
    }
    return fields;
}
class ApiClient {
    constructor(baseUrl, sessionId, fetchFn, raterToken) {
        this.baseUrl = baseUrl;
        this.sessionId = sessionId;
        this.fetchFn = fetchFn;
        this.raterToken = raterToken;
        this.queue = [];
    }
    headers() {
        const headers = { 'Content-Type': 'application/json' };
        if (this.raterToken)
            headers['x-rater-token'] = this.raterToken;
        return headers;
    }
    async request(path, init) {
        let response;
        try {
            response = await this.fetchFn(`${this.baseUrl}${path}`, init);
        }
        catch (err) {
            throw new NetworkError(String(err));
        }
        if (response.status === 422) {
            const body = (await response.json());
            const fields = validationFields(body.detail);
            throw new ServerValidationError(`server rejected request: ${fields.join(', ')}`, fields);
        }
        if (!response.ok) {
            const body = (await response.json().catch(() => ({})));
            throw new Error(body.detail ?? `request failed with status ${response.status}`);
        }
        return (await response.json());
    }
    getNext() {
        return this.request(`/sessions/${this.sessionId}/next`, {
            headers: this.headers(),
        });
    }
    getProgress() {
        return this.request(`/sessions/${this.sessionId}/progress`, {
            headers: this.headers(),
        });
    }
    async submitRating(payload) {
        try {
            return await this.request(`/sessions/${this.sessionId}/ratings`, {
                method: 'POST',
                headers: this.headers(),
                body: JSON.stringify(payload),
            });
        }
        catch (err) {
            if (err instanceof NetworkError) {
                this.queue.push(payload);
            }
            throw err;
        }
    }
    pendingCount() {
        return this.queue.length;
    }
    // Retry queued submissions in order; stops at the first submission that
    // still cannot reach the server so ordering is preserved.
    async flushQueue() {
        let flushed = 0;
        while (this.queue.length > 0) {
            const payload = this.queue[0];
            try {
                await this.request(`/sessions/${this.sessionId}/ratings`, {
                    method: 'POST',
                    headers: this.headers(),
                    body: JSON.stringify(payload),
                });
            }
            catch (err) {
                if (err instanceof NetworkError)
                    return flushed;
                // Validation errors on queued payloads are dropped: the form state
                // that produced them is gone and the server remains authoritative.
                this.queue.shift();
                continue;
            }
            this.queue.shift();
            flushed += 1;
        }
        return flushed;
    }
}
exports.ApiClient = ApiClient;
