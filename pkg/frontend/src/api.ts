/** Typed client for the scoring service.
 *
 * Every number the UI displays originates in a response recorded in `log`,
 * which is how the tests assert that nothing is ever computed client-side.
 */

export interface CurvePoint {
  y: number;
  density: number;
}

export interface ScoreResponse {
  alpha: number | null;
  beta: number | null;
  mean: number;
  mode: number;
  mode_fallback: boolean;
  curve: CurvePoint[] | null;
}

export interface TokenSpan {
  text: string;
  start: number;
  end: number;
}

export interface Attribution {
  token: string;
  position: number;
  scheme: string;
  objective: string;
  value: number;
  magnitude: number;
}

export interface ExplainResponse {
  tokens: TokenSpan[];
  attributions: Attribution[];
  top: Attribution[];
  scheme: string;
  objective_requested: string;
  objective_used: string;
  mode_fell_back: boolean;
  k: number;
}

export interface HealthResponse {
  status: string;
  kind: string;
  version: string;
}

export interface ModelInfo {
  kind: string;
  format_version: number;
  metadata: Record<string, unknown>;
}

export type Objective = "mean" | "mode";
export type Scheme = "sm" | "dp" | "hb" | "as" | "rc";

export interface LogEntry {
  method: string;
  path: string;
  request: unknown;
  response: unknown;
  status: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail?: string,
  ) {
    super(detail ? `${code}: ${detail}` : code);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  /** Append-only request/response trace. */
  readonly log: LogEntry[] = [];

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (signal !== undefined) {
      init.signal = signal;
    }
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    this.log.push({
      method,
      path,
      request: body ?? null,
      response: payload,
      status: response.status,
    });
    if (!response.ok) {
      const record = (payload ?? {}) as { error?: string; detail?: unknown };
      const detail = typeof record.detail === "string" ? record.detail : undefined;
      throw new ApiError(response.status, record.error ?? `http_${response.status}`, detail);
    }
    return payload as T;
  }

  score(title: string, body: string, signal?: AbortSignal): Promise<ScoreResponse> {
    return this.request<ScoreResponse>("POST", "/score", { title, body }, signal);
  }

  explain(
    title: string,
    body: string,
    scheme: Scheme,
    objective: Objective,
    k?: number,
    signal?: AbortSignal,
  ): Promise<ExplainResponse> {
    const payload: Record<string, unknown> = { title, body, scheme, objective };
    if (k !== undefined) {
      payload.k = k;
    }
    return this.request<ExplainResponse>("POST", "/explain", payload, signal);
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("GET", "/health");
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request<ModelInfo>("GET", "/model/info");
  }
}

/** The service scores title and body joined by a single newline; token
 * offsets in /explain responses index into exactly this string. */
export function joinedDocument(title: string, body: string): string {
  return title + "\n" + body;
}
