/** Typed REST client for the analysis service. Every mutation the UI makes
 * goes through one of these documented endpoints. */

import type { AnalysisView, CorrectionBody, EntityLabel, Rule } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly serverMessage: string,
  ) {
    super(`HTTP ${status}: ${serverMessage}`);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function extractDetail(body: unknown): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    return typeof detail === "string" ? detail : JSON.stringify(detail);
  }
  return JSON.stringify(body);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
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
    return parsed as T;
  }

  health(): Promise<{ status: string; versions: Record<string, string | null> }> {
    return this.request("GET", "/health");
  }

  submitPaper(title: string, abstract: string): Promise<{ doc_id: string }> {
    return this.request("POST", "/papers", { title, abstract });
  }

  getAnalysis(docId: string): Promise<AnalysisView> {
    return this.request("GET", `/papers/${encodeURIComponent(docId)}/analysis`);
  }

  postCorrection(docId: string, body: CorrectionBody): Promise<{ correction_id: number }> {
    return this.request("POST", `/papers/${encodeURIComponent(docId)}/corrections`, body);
  }

  listRules(): Promise<Rule[]> {
    return this.request("GET", "/rules");
  }

  addRule(target: EntityLabel, pattern: string): Promise<Rule> {
    return this.request("POST", "/rules", { target, pattern });
  }

  deleteRule(ruleId: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/rules/${encodeURIComponent(ruleId)}`);
  }
}
