/** HTTP client for the recognition service. */

import { serializeStrokes } from "./wire.js";
import type { HealthResponse, RecognitionResponse, Stroke } from "./wire.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class RecognizerClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async recognize(strokes: readonly Stroke[], topk: number): Promise<RecognitionResponse> {
    const body = JSON.stringify({ ...serializeStrokes(strokes), topk });
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}/v1/recognize`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body,
      });
    } catch (err) {
      throw new ServiceError(`service unreachable: ${err instanceof Error ? err.message : err}`);
    }
    if (!res.ok) {
      throw new ServiceError(await describeFailure(res), res.status);
    }
    return (await res.json()) as RecognitionResponse;
  }

  async health(): Promise<HealthResponse> {
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}/v1/health`);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${err instanceof Error ? err.message : err}`);
    }
    if (!res.ok) {
      throw new ServiceError(await describeFailure(res), res.status);
    }
    return (await res.json()) as HealthResponse;
  }
}

async function describeFailure(res: Response): Promise<string> {
  let detail = res.statusText || `HTTP ${res.status}`;
  try {
    const blob: unknown = await res.json();
    if (typeof blob === "object" && blob !== null && "detail" in blob) {
      const d = (blob as { detail: unknown }).detail;
      if (typeof d === "string") {
        detail = d;
      }
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return `recognition failed (${res.status}): ${detail}`;
}
