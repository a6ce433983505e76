/** Typed client for the curation API; the only backend this app talks to. */

import type {
  FrameDetail,
  FrameListResponse,
  GoldAck,
  GoldSubmission,
  Violation,
  VocabResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  /** status 0 means the request never reached the server (retryable). */
  constructor(
    message: string,
    readonly status: number,
    readonly violations: Violation[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isValidation(): boolean {
    return this.status === 422 && this.violations.length > 0;
  }
}

function extractViolations(detail: unknown): Violation[] {
  if (typeof detail !== "object" || detail === null) return [];
  const body = detail as { violations?: unknown };
  if (!Array.isArray(body.violations)) return [];
  return body.violations.filter(
    (v): v is Violation => typeof v === "object" && v !== null && "path" in v,
  );
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(`request failed: ${String(error)}`, 0);
    }
    if (!response.ok) {
      let detail: unknown = null;
      try {
        detail = ((await response.json()) as { detail?: unknown }).detail;
      } catch {
        // non-JSON error body; fall through to the status message
      }
      const message =
        typeof detail === "string" ? detail : `${response.status} ${response.statusText}`;
      throw new ApiError(message, response.status, extractViolations(detail));
    }
    return (await response.json()) as T;
  }

  getVocab(): Promise<VocabResponse> {
    return this.request<VocabResponse>("/vocab");
  }

  getFrames(page = 1, pageSize = 50, verified?: boolean): Promise<FrameListResponse> {
    const params = new URLSearchParams({ page: String(page), page_size: String(pageSize) });
    if (verified !== undefined) params.set("verified", String(verified));
    return this.request<FrameListResponse>(`/frames?${params.toString()}`);
  }

  getFrame(frameId: string): Promise<FrameDetail> {
    return this.request<FrameDetail>(`/frames/${encodeURIComponent(frameId)}`);
  }

  submitGold(frameId: string, submission: GoldSubmission): Promise<GoldAck> {
    return this.request<GoldAck>(`/frames/${encodeURIComponent(frameId)}/gold`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(submission),
    });
  }

  imageUrl(frameId: string, camera: string): string {
    return `${this.baseUrl}/frames/${encodeURIComponent(frameId)}/image/${camera}`;
  }
}
