/**
 * HTTP client for the inference service. Requests mirror the server's
 * invariants (transfer needs a reference, edit carries the painted mask), so
 * an invalid submission never leaves the client.
 */

import { encodeMaskPng, bytesToBase64 } from "./png.js";
import { EditorSession, SynthesisResult, storeResult, taskForSession } from "./session.js";

export const REQUEST_TIMEOUT_MS = 30_000;

export interface SynthesisRequest {
  task: "reconstruct" | "transfer" | "edit";
  source_image: string;
  source_mask: string;
  edited_mask?: string;
  reference_image?: string;
  reference_mask?: string;
  seed?: number;
}

export interface HealthResponse {
  status: string;
  checkpoint_id: string;
  param_count: number;
}

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(`service returned ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Build the request the current session state routes to. */
export function buildRequest(session: EditorSession, seed?: number): SynthesisRequest {
  const task = taskForSession(session);
  const request: SynthesisRequest = {
    task,
    source_image: session.sourceImageBase64,
    source_mask: session.sourceMaskBase64,
  };
  if (task === "edit") {
    request.edited_mask = bytesToBase64(encodeMaskPng(session.mask));
  }
  if (session.reference) {
    request.reference_image = session.reference.imageBase64;
    request.reference_mask = session.reference.maskBase64;
  }
  if (task === "transfer" && !request.reference_image) {
    throw new Error("transfer requires a reference selection");
  }
  if (seed !== undefined) request.seed = seed;
  return request;
}

export class ServiceClient {
  constructor(private readonly baseUrl: string,
              private readonly fetchImpl: FetchLike = fetch,
              private readonly timeoutMs: number = REQUEST_TIMEOUT_MS) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    try {
      const response = await this.fetchImpl(`${this.baseUrl}${path}`,
                                            { ...init, signal: controller.signal });
      const body = await response.json().catch(() => ({}));
      if (!response.ok) {
        const detail = typeof (body as { detail?: unknown }).detail === "string"
          ? (body as { detail: string }).detail : JSON.stringify(body);
        throw new ApiError(response.status, detail);
      }
      return body;
    } finally {
      clearTimeout(timer);
    }
  }

  async health(): Promise<HealthResponse> {
    return await this.request("/v1/health") as HealthResponse;
  }

  async synthesize(request: SynthesisRequest): Promise<SynthesisResult> {
    const body = await this.request("/v1/synthesize", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    }) as { image: string; seed: number; latency_ms: number };
    return { imageBase64: body.image, seed: body.seed, latencyMs: body.latency_ms };
  }
}

/**
 * Submit the session and return it with the stored result. Rejects when a
 * request is already in flight; the stored seed from the response powers the
 * "reproduce" button (pass it back in) and "re-roll" (pass a different seed).
 */
export async function submitSession(
  session: EditorSession, client: ServiceClient, seed?: number,
): Promise<EditorSession> {
  if (session.inFlight) {
    throw new Error("a synthesis request is already in flight for this session");
  }
  const result = await client.synthesize(buildRequest(session, seed));
  return storeResult(session, result);
}
