/** Session state for the rescoring loop.
 *
 * Invariants enforced here:
 * - any text edit marks the displayed score stale until a rescore completes;
 * - history is append-only within the session;
 * - a failed rescore leaves all displayed state unchanged (banner only);
 * - at most one request is in flight; a newer rescore aborts the older one;
 * - the mean/mode toggle re-reads the stored response, it never re-requests.
 */

import {
  ApiClient,
  ApiError,
  ExplainResponse,
  Objective,
  Scheme,
  ScoreResponse,
} from "./api.js";

export interface HistoryEntry {
  index: number;
  title: string;
  body: string;
  score: ScoreResponse;
  explanation: ExplainResponse;
}

export interface CompareResult {
  left: HistoryEntry;
  right: HistoryEntry;
  /** right minus left under the session's current objective */
  delta: number;
}

export type SessionStatus = "idle" | "loading" | "error";

export interface DisplayedScore {
  value: number;
  label: string;
  fellBack: boolean;
}

/** Project a score response onto the chosen objective. Both numbers come
 * verbatim from the service; no arithmetic happens here. */
export function displayedScore(score: ScoreResponse, objective: Objective): DisplayedScore {
  if (objective === "mode") {
    return {
      value: score.mode,
      label: score.mode_fallback ? "mode (no interior peak; showing mean)" : "mode",
      fellBack: score.mode_fallback,
    };
  }
  return { value: score.mean, label: "mean", fellBack: false };
}

export class DraftSession {
  title = "";
  body = "";
  objective: Objective = "mean";
  scheme: Scheme = "rc";

  score: ScoreResponse | null = null;
  explanation: ExplainResponse | null = null;
  stale = true;
  status: SessionStatus = "idle";
  errorMessage: string | null = null;

  readonly history: HistoryEntry[] = [];

  private inflight: AbortController | null = null;

  constructor(private readonly api: ApiClient) {}

  setTitle(title: string): void {
    if (title !== this.title) {
      this.title = title;
      this.stale = true;
    }
  }

  setBody(body: string): void {
    if (body !== this.body) {
      this.body = body;
      this.stale = true;
    }
  }

  /** Display toggle only: no request leaves the client. */
  setObjective(objective: Objective): void {
    this.objective = objective;
  }

  setScheme(scheme: Scheme): void {
    this.scheme = scheme;
  }

  currentDisplay(): DisplayedScore | null {
    return this.score === null ? null : displayedScore(this.score, this.objective);
  }

  /** Score then explain the current draft. Returns true when this call's
   * results were committed; false when it failed or a newer call won. */
  async rescore(): Promise<boolean> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.status = "loading";
    const title = this.title;
    const body = this.body;
    try {
      const score = await this.api.score(title, body, controller.signal);
      const explanation = await this.api.explain(
        title,
        body,
        this.scheme,
        this.objective,
        undefined,
        controller.signal,
      );
      if (controller.signal.aborted) {
        return false;
      }
      this.score = score;
      this.explanation = explanation;
      this.history.push({ index: this.history.length, title, body, score, explanation });
      // edits made while the request was in flight stay marked stale
      this.stale = this.title !== title || this.body !== body;
      this.status = "idle";
      this.errorMessage = null;
      return true;
    } catch (error) {
      if (controller.signal.aborted) {
        // superseded by a newer rescore, which owns the state now
        return false;
      }
      this.status = "error";
      this.errorMessage =
        error instanceof ApiError ? error.message : `service unreachable: ${String(error)}`;
      return false;
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }

  canCompare(): boolean {
    return this.history.length > 0;
  }

  compare(i: number, j: number): CompareResult {
    const left = this.history[i];
    const right = this.history[j];
    if (left === undefined || right === undefined) {
      throw new RangeError(`history has ${this.history.length} entries; asked for ${i}, ${j}`);
    }
    const delta =
      displayedScore(right.score, this.objective).value -
      displayedScore(left.score, this.objective).value;
    return { left, right, delta };
  }
}
