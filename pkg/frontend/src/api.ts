/**
 * Typed client for the crest retrieval HTTP API.
 *
 * The console talks to the engine exclusively through this module; every
 * payload shape here mirrors the service's JSON contract.
 */

export const CRITERIA = [
  "impact",
  "condition",
  "frequency",
  "reproducibility",
] as const;

export type Criterion = (typeof CRITERIA)[number];

export interface RetrieveRequest {
  headline?: string;
  observation_raw?: string;
  /** Criterion names to keep active; omitted = every criterion found. */
  active?: string[];
  /** Candidates the first stage hands to the re-ranker. */
  k?: number;
  /** Ranked results returned. */
  max_results?: number;
  rerank?: boolean;
  ir_ensemble?: boolean;
  rr_ensemble?: boolean;
}

export interface ResultRow {
  rank: number;
  tr_id: string;
  headline: string;
  answer_excerpt: string;
  /** Weighted combination of the normalized per-criterion scores. */
  aggregated: number;
  /** Normalized per-criterion scores in [0, 1] (empty in base mode). */
  scores: Record<string, number>;
  /** Unnormalized scorer outputs, for audit. */
  raw_scores: Record<string, number>;
  /** The weights that produced `aggregated`, renormalized to sum to 1. */
  weights_used: Record<string, number>;
}

export interface ParseDiagnostic {
  kind: string;
  criterion: string | null;
  detail: string;
}

export interface RetrieveDiagnostics {
  active_requested: string[];
  active_effective: string[];
  missing_criteria: string[];
  base_mode: boolean;
  parse: ParseDiagnostic[];
}

export interface RetrieveResponse {
  results: ResultRow[];
  diagnostics: RetrieveDiagnostics;
  k: number;
  rerank: boolean;
}

export interface HealthResponse {
  status: string;
  [key: string]: unknown;
}

/** Error payload the service returns: `{"error": category, "message": ...}`. */
export class ApiError extends Error {
  readonly category: string;
  readonly status: number;

  constructor(category: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.category = category;
    this.status = status;
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async retrieve(request: RetrieveRequest): Promise<RetrieveResponse> {
    const response = await this.request("/v1/retrieve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    return (await response.json()) as RetrieveResponse;
  }

  async health(): Promise<HealthResponse> {
    const response = await this.request("/v1/health");
    return (await response.json()) as HealthResponse;
  }

  async troubleReport(trId: string): Promise<Record<string, unknown>> {
    const response = await this.request(`/v1/tr/${encodeURIComponent(trId)}`);
    return (await response.json()) as Record<string, unknown>;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new ApiError(
        "unreachable",
        `service not reachable: ${String(cause)}`,
        0,
      );
    }
    if (!response.ok) {
      throw await toApiError(response);
    }
    return response;
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let category = "http_error";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as {
      error?: string;
      message?: string;
    };
    if (typeof body.error === "string") category = body.error;
    if (typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body: keep the HTTP status text
  }
  return new ApiError(category, message, response.status);
}
