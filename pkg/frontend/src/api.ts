/** Typed client over the service HTTP/JSON API.
 *
 * The fetch implementation is injectable so tests can stub the server; the
 * client never talks to anything but this API.
 */

import type {
  IdeaView,
  ImprovementView,
  PaperView,
  ReportView,
  RevisionResponse,
  SectionSlug,
  SessionSummary,
  StepView,
  VersionView,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`API error ${status}`);
  }

  get isDenial(): boolean {
    return this.status === 403;
  }

  get isBusy(): boolean {
    return this.status === 409;
  }

  get reason(): string {
    const body = this.body as { reason?: string; detail?: string; error?: string } | null;
    return body?.reason ?? body?.detail ?? body?.error ?? `http ${this.status}`;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, payload);
    }
    return payload as T;
  }

  createSession(keywords: string, level: string): Promise<SessionSummary> {
    return this.request("POST", "/sessions", { keywords, level });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  generateIdeas(sessionId: string, numIdeas?: number): Promise<{ ideas: IdeaView[] }> {
    return this.request("POST", `/sessions/${sessionId}/ideas`, { num_ideas: numIdeas ?? null });
  }

  selectIdea(sessionId: string, ideaId: string): Promise<{ idea: IdeaView }> {
    return this.request("PUT", `/sessions/${sessionId}/idea`, { idea_id: ideaId });
  }

  customizeIdea(sessionId: string, ideaId: string, text: string): Promise<{ idea: IdeaView }> {
    return this.request("PUT", `/sessions/${sessionId}/idea`, { idea_id: ideaId, text });
  }

  search(sessionId: string, query: string, limit?: number): Promise<{ results: PaperView[] }> {
    return this.request("POST", `/sessions/${sessionId}/search`, { query, limit: limit ?? null });
  }

  pinPapers(sessionId: string, citationIds: string[]): Promise<{ pinned: string[] }> {
    return this.request("POST", `/sessions/${sessionId}/search/pin`, { citation_ids: citationIds });
  }

  generateFullProposal(sessionId: string): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sessionId}/proposal`);
  }

  promptSection(sessionId: string, kind: SectionSlug, instruction: string): Promise<RevisionResponse> {
    return this.request("POST", `/sessions/${sessionId}/sections/${kind}/prompt`, { instruction });
  }

  inlineEdit(
    sessionId: string,
    kind: SectionSlug,
    start: number,
    end: number,
    instruction: string,
  ): Promise<RevisionResponse> {
    return this.request("POST", `/sessions/${sessionId}/sections/${kind}/inline-edit`, {
      start,
      end,
      instruction,
    });
  }

  directEdit(sessionId: string, kind: SectionSlug, text: string): Promise<RevisionResponse> {
    return this.request("PUT", `/sessions/${sessionId}/sections/${kind}`, { text });
  }

  addCriterion(
    sessionId: string,
    body: { name?: string; description?: string; generate?: boolean },
  ): Promise<{ criterion: { id: number; name: string; description: string } }> {
    return this.request("POST", `/sessions/${sessionId}/criteria`, body);
  }

  evaluate(sessionId: string): Promise<{ report: ReportView }> {
    return this.request("POST", `/sessions/${sessionId}/evaluate`);
  }

  vote(
    sessionId: string,
    criterionId: number,
    index: number,
    vote: "up" | "down",
  ): Promise<{ reflection: { text: string; vote: string } }> {
    return this.request("POST", `/sessions/${sessionId}/reflections/${criterionId}/${index}/vote`, {
      vote,
    });
  }

  moreCritiques(sessionId: string, criterionId: number): Promise<{ reflections: unknown[] }> {
    return this.request("POST", `/sessions/${sessionId}/reflections/${criterionId}/more`);
  }

  suggestImprovements(sessionId: string): Promise<{ improvements: ImprovementView[] }> {
    return this.request("POST", `/sessions/${sessionId}/improvements/suggest`);
  }

  applyImprovements(
    sessionId: string,
    improvementIds: number[],
    customized?: Record<number, string>,
  ): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sessionId}/improvements/apply`, {
      improvement_ids: improvementIds,
      customized: customized ?? null,
    });
  }

  iterate(sessionId: string, maxRounds: number): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sessionId}/iterate`, { max_rounds: maxRounds });
  }

  history(sessionId: string, kind: SectionSlug): Promise<{ versions: VersionView[] }> {
    return this.request("GET", `/sessions/${sessionId}/sections/${kind}/history`);
  }

  revert(sessionId: string, kind: SectionSlug, seq: number): Promise<RevisionResponse> {
    return this.request("POST", `/sessions/${sessionId}/sections/${kind}/revert`, { seq });
  }

  steps(sessionId: string): Promise<{ steps: StepView[] }> {
    return this.request("GET", `/sessions/${sessionId}/steps`);
  }

  save(sessionId: string): Promise<{ proposal_id: string; status: string }> {
    return this.request("POST", `/sessions/${sessionId}/save`);
  }
}
