/** Typed client for the shapeforge HTTP API. The transport is injectable so
 * tests (and session replay) can run against a recorded backend. */

export interface GeneratePayload {
  prompt: string;
  n_samples?: number;
  mean?: boolean;
  threshold?: number;
  resolution?: number;
  seed?: number;
  bundle_hash?: string;
}

export interface GenerateResponse {
  grids: string[];
  meshes: string[];
  latency_ms: number;
  resolution: number;
  seed: number;
  mean: boolean;
}

export interface InterpolatePayload {
  prompt_a: string;
  prompt_b: string;
  steps: number;
  mode?: "slerp" | "lerp";
  threshold?: number;
  resolution?: number;
  bundle_hash?: string;
}

export interface InterpolateResponse {
  grids: string[];
  meshes: string[];
  alphas: number[];
  latency_ms: number;
  resolution: number;
  notices: string[];
}

export interface HealthResponse {
  status: string;
  bundle_hash: string;
}

export interface FieldError {
  field: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public fieldError: FieldError | null,
    message: string,
  ) {
    super(message);
  }
}

export type Transport = (
  method: string,
  path: string,
  body?: unknown,
) => Promise<{ status: number; json: unknown }>;

export function fetchTransport(baseUrl: string): Transport {
  return async (method, path, body) => {
    const res = await fetch(baseUrl + path, {
      method,
      headers: body ? { "content-type": "application/json" } : undefined,
      body: body ? JSON.stringify(body) : undefined,
    });
    return { status: res.status, json: await res.json() };
  };
}

function raiseForStatus(status: number, json: unknown): void {
  if (status >= 200 && status < 300) return;
  const err = (json as { error?: { field?: string; message?: string } }).error;
  const fieldError =
    err && err.field ? { field: err.field, message: err.message ?? "" } : null;
  throw new ApiError(status, fieldError, err?.message ?? `HTTP ${status}`);
}

/** Canonical payload serialization: stable key order so identical requests
 * produce identical history entries (replay compares these bytes). */
export function canonicalPayload(obj: Record<string, unknown>): string {
  const keys = Object.keys(obj).sort();
  const parts = keys
    .filter((k) => obj[k] !== undefined)
    .map((k) => JSON.stringify(k) + ":" + JSON.stringify(obj[k]));
  return "{" + parts.join(",") + "}";
}

export class ForgeClient {
  constructor(private transport: Transport) {}

  async health(): Promise<HealthResponse> {
    const { status, json } = await this.transport("GET", "/health");
    raiseForStatus(status, json);
    return json as HealthResponse;
  }

  async generate(payload: GeneratePayload): Promise<GenerateResponse> {
    const { status, json } = await this.transport("POST", "/generate", payload);
    raiseForStatus(status, json);
    return json as GenerateResponse;
  }

  async interpolate(payload: InterpolatePayload): Promise<InterpolateResponse> {
    const { status, json } = await this.transport("POST", "/interpolate", payload);
    raiseForStatus(status, json);
    return json as InterpolateResponse;
  }
}
