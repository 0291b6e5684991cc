/** Typed REST client for the analysis service. Every mutation the UI makes
 * goes through one of these documented endpoints. */
export class ApiError extends Error {
    constructor(status, serverMessage) {
        super(`HTTP ${status}: ${serverMessage}`);
        this.status = status;
        this.serverMessage = serverMessage;
        this.name = "ApiError";
    }
}
function extractDetail(body) {
    if (body && typeof body === "object" && "detail" in body) {
        const detail = body.detail;
        return typeof detail === "string" ? detail : JSON.stringify(detail);
    }
    return JSON.stringify(body);
}
export class ApiClient {
    constructor(baseUrl, fetchImpl = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
        this.baseUrl = baseUrl.replace(/\/+$/, "");
    }
    async request(method, path, body) {
        const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
            method,
            headers: body === undefined ? undefined : { "content-type": "application/json" },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        const text = await response.text();
        const parsed = text ? JSON.parse(text) : null;
        if (!response.ok) {
            throw new ApiError(response.status, extractDetail(parsed));
        }
        return parsed;
    }
    health() {
        return this.request("GET", "/health");
    }
    submitPaper(title, abstract) {
        return this.request("POST", "/papers", { title, abstract });
    }
    getAnalysis(docId) {
        return this.request("GET", `/papers/${encodeURIComponent(docId)}/analysis`);
    }
    postCorrection(docId, body) {
        return this.request("POST", `/papers/${encodeURIComponent(docId)}/corrections`, body);
    }
    listRules() {
        return this.request("GET", "/rules");
    }
    addRule(target, pattern) {
        return this.request("POST", "/rules", { target, pattern });
    }
    deleteRule(ruleId) {
        return this.request("DELETE", `/rules/${encodeURIComponent(ruleId)}`);
    }
}
