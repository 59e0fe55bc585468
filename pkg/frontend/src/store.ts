/** View state and actions for the notebook editor.
 *
 * The store is DOM-free: a renderer subscribes to changes and draws whatever
 * the state says. Gating is presentation-only here — the server remains the
 * authority, and any 403/409 that does slip through surfaces as a toast.
 */

import { ApiClient, ApiError } from "./api.js";
import { assertCompleteGatingMap } from "./gating.js";
import type {
  ImprovementView,
  PaperView,
  ReportView,
  SectionSlug,
  SessionSummary,
  StepView,
  VersionView,
} from "./types.js";
import { SECTION_SLUGS } from "./types.js";

export interface SectionPane {
  kind: SectionSlug;
  content: string;
  seq: number;
  pendingGeneration: boolean;
  dirty: boolean;
}

export interface EditorSelection {
  kind: SectionSlug;
  start: number;
  end: number;
  text: string;
}

export interface Toast {
  kind: "denial" | "retry" | "error" | "info";
  message: string;
}

export interface RevertModalState {
  kind: SectionSlug;
  versions: VersionView[];
}

export interface OverreachNotice {
  kind: SectionSlug;
  seq: number;
  compareTo: number;
}

export interface ViewState {
  session: SessionSummary | null;
  panes: Record<SectionSlug, SectionPane>;
  ideas: SessionSummary["ideas"];
  activeIdeaId: string | null;
  proposalId: string | null;
  proposalStatus: string | null;
  report: ReportView | null;
  improvements: ImprovementView[];
  searchSidebarOpen: boolean;
  evaluationSidebarOpen: boolean;
  searchResults: PaperView[];
  pinned: string[];
  selection: EditorSelection | null;
  seedIdeasModalOpen: boolean;
  revertModal: RevertModalState | null;
  stepsModal: StepView[] | null;
  overreachNotice: OverreachNotice | null;
  historyBadges: Record<SectionSlug, number>;
  toasts: Toast[];
}

function emptyPanes(): Record<SectionSlug, SectionPane> {
  const panes = {} as Record<SectionSlug, SectionPane>;
  for (const slug of SECTION_SLUGS) {
    panes[slug] = { kind: slug, content: "", seq: 0, pendingGeneration: false, dirty: false };
  }
  return panes;
}

export class ViewStore {
  state: ViewState = {
    session: null,
    panes: emptyPanes(),
    ideas: [],
    activeIdeaId: null,
    proposalId: null,
    proposalStatus: null,
    report: null,
    improvements: [],
    searchSidebarOpen: false,
    evaluationSidebarOpen: false,
    searchResults: [],
    pinned: [],
    selection: null,
    seedIdeasModalOpen: false,
    revertModal: null,
    stepsModal: null,
    overreachNotice: null,
    historyBadges: {
      "literature-synthesis": 0,
      "research-goals": 0,
      "study-plan": 0,
    },
    toasts: [],
  };

  private listeners: Array<(state: ViewState) => void> = [];

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: (state: ViewState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private toast(kind: Toast["kind"], message: string): void {
    this.state.toasts.push({ kind, message });
    this.notify();
  }

  /** Shared failure policy: denials and busy become toasts; content stays. */
  private handleFailure(error: unknown): void {
    if (error instanceof ApiError) {
      if (error.isDenial) {
        this.toast("denial", `Not available at this control level (${error.reason})`);
        return;
      }
      if (error.isBusy) {
        this.toast("retry", "A generation is already running; try again shortly");
        return;
      }
      this.toast("error", error.reason);
      return;
    }
    throw error;
  }

  private get sessionId(): string {
    const session = this.state.session;
    if (!session) {
      throw new Error("no session loaded");
    }
    return session.id;
  }

  private applySummary(summary: SessionSummary): void {
    summary.gating = assertCompleteGatingMap(summary.gating);
    this.state.session = summary;
    this.state.ideas = summary.ideas;
    this.state.activeIdeaId = summary.active_idea_id;
    this.state.proposalId = summary.proposal?.id ?? null;
    this.state.proposalStatus = summary.proposal?.status ?? null;
    this.state.report = summary.report;
    this.state.improvements = summary.report?.improvements ?? [];
    this.state.pinned = summary.pinned_papers;
    for (const slug of SECTION_SLUGS) {
      const section = summary.proposal?.sections[slug];
      const pane = this.state.panes[slug];
      if (section) {
        pane.content = section.text;
        pane.seq = section.seq;
        this.state.historyBadges[slug] = section.seq;
      }
      pane.dirty = false;
    }
    this.notify();
  }

  async createSession(keywords: string, level: string): Promise<void> {
    this.applySummary(await this.api.createSession(keywords, level));
  }

  async refresh(): Promise<void> {
    this.applySummary(await this.api.getSession(this.sessionId));
  }

  // -- phase one: seed ideas --

  async generateIdeas(numIdeas?: number): Promise<void> {
    try {
      const { ideas } = await this.api.generateIdeas(this.sessionId, numIdeas);
      this.state.ideas = [...this.state.ideas, ...ideas];
      this.state.seedIdeasModalOpen = true;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async selectIdea(ideaId: string): Promise<void> {
    try {
      await this.api.selectIdea(this.sessionId, ideaId);
      this.state.activeIdeaId = ideaId;
      this.state.seedIdeasModalOpen = false;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async customizeIdea(ideaId: string, text: string): Promise<void> {
    try {
      const { idea } = await this.api.customizeIdea(this.sessionId, ideaId, text);
      this.state.ideas = this.state.ideas.map((i) => (i.id === idea.id ? idea : i));
      this.state.activeIdeaId = idea.id;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  // -- literature sidebar --

  toggleSearchSidebar(): void {
    this.state.searchSidebarOpen = !this.state.searchSidebarOpen;
    this.notify();
  }

  async search(query: string, limit?: number): Promise<void> {
    try {
      const { results } = await this.api.search(this.sessionId, query, limit);
      this.state.searchResults = results;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async pinPapers(citationIds: string[]): Promise<void> {
    try {
      const { pinned } = await this.api.pinPapers(this.sessionId, citationIds);
      this.state.pinned = pinned;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  // -- drafting --

  private setPending(pending: boolean, slugs: readonly SectionSlug[] = SECTION_SLUGS): void {
    for (const slug of slugs) {
      this.state.panes[slug].pendingGeneration = pending;
    }
    this.notify();
  }

  async generateFullProposal(): Promise<void> {
    this.setPending(true);
    try {
      this.applySummary(await this.api.generateFullProposal(this.sessionId));
    } catch (error) {
      this.handleFailure(error);
    } finally {
      this.setPending(false);
    }
  }

  async iterate(maxRounds = 1): Promise<void> {
    this.setPending(true);
    try {
      this.applySummary(await this.api.iterate(this.sessionId, maxRounds));
    } catch (error) {
      this.handleFailure(error);
    } finally {
      this.setPending(false);
    }
  }

  async promptSection(kind: SectionSlug, instruction: string): Promise<void> {
    this.setPending(true, [kind]);
    try {
      const revised = await this.api.promptSection(this.sessionId, kind, instruction);
      this.applyRevision(revised);
    } catch (error) {
      this.handleFailure(error);
    } finally {
      this.setPending(false, [kind]);
    }
  }

  /** Record a highlight. Only meaningful when inline edits are permitted. */
  setSelection(kind: SectionSlug, start: number, end: number): void {
    const pane = this.state.panes[kind];
    if (start < 0 || end > pane.content.length || start >= end) {
      throw new Error("selection out of range");
    }
    this.state.selection = { kind, start, end, text: pane.content.slice(start, end) };
    this.notify();
  }

  clearSelection(): void {
    this.state.selection = null;
    this.notify();
  }

  async submitInlineEdit(instruction: string): Promise<void> {
    const selection = this.state.selection;
    if (!selection) {
      throw new Error("no active selection");
    }
    const pane = this.state.panes[selection.kind];
    if (pane.content.slice(selection.start, selection.end) !== selection.text) {
      throw new Error("selection is stale against the current pane content");
    }
    this.setPending(true, [selection.kind]);
    try {
      const revised = await this.api.inlineEdit(
        this.sessionId,
        selection.kind,
        selection.start,
        selection.end,
        instruction,
      );
      const previousSeq = pane.seq;
      this.applyRevision(revised);
      if (revised.span_overreach) {
        // link the notice to a side-by-side comparison with the prior version
        this.state.overreachNotice = {
          kind: selection.kind,
          seq: revised.seq,
          compareTo: previousSeq,
        };
      }
      this.state.selection = null;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    } finally {
      this.setPending(false, [selection.kind]);
    }
  }

  async directEdit(kind: SectionSlug, text: string): Promise<void> {
    try {
      const revised = await this.api.directEdit(this.sessionId, kind, text);
      this.applyRevision(revised);
    } catch (error) {
      this.handleFailure(error);
    }
  }

  private applyRevision(revised: { section: SectionSlug; seq: number; text: string }): void {
    const pane = this.state.panes[revised.section];
    pane.content = revised.text;
    pane.seq = revised.seq;
    pane.dirty = false;
    this.state.historyBadges[revised.section] = revised.seq;
    this.notify();
  }

  // -- evaluation --

  async addCriterion(body: { name?: string; description?: string; generate?: boolean }): Promise<void> {
    try {
      await this.api.addCriterion(this.sessionId, body);
      await this.refresh();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async evaluate(): Promise<void> {
    try {
      const { report } = await this.api.evaluate(this.sessionId);
      this.state.report = report;
      this.state.improvements = report.improvements;
      this.state.evaluationSidebarOpen = true;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async vote(criterionId: number, index: number, vote: "up" | "down"): Promise<void> {
    try {
      await this.api.vote(this.sessionId, criterionId, index, vote);
      const reflections = this.state.report?.reflections[String(criterionId)];
      const reflection = reflections?.[index];
      if (reflection) {
        reflection.vote = vote;
      }
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async moreCritiques(criterionId: number): Promise<void> {
    try {
      await this.api.moreCritiques(this.sessionId, criterionId);
      await this.refresh();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async suggestImprovements(): Promise<void> {
    try {
      const { improvements } = await this.api.suggestImprovements(this.sessionId);
      this.state.improvements = improvements;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async applyImprovements(ids: number[], customized?: Record<number, string>): Promise<void> {
    this.setPending(true);
    try {
      this.applySummary(await this.api.applyImprovements(this.sessionId, ids, customized));
    } catch (error) {
      this.handleFailure(error);
    } finally {
      this.setPending(false);
    }
  }

  // -- provenance --

  async openRevertModal(kind: SectionSlug): Promise<void> {
    try {
      const { versions } = await this.api.history(this.sessionId, kind);
      this.state.revertModal = { kind, versions };
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async revertTo(kind: SectionSlug, seq: number): Promise<void> {
    try {
      const revised = await this.api.revert(this.sessionId, kind, seq);
      this.applyRevision(revised);
      this.state.revertModal = null;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  async openStepsModal(): Promise<void> {
    try {
      const { steps } = await this.api.steps(this.sessionId);
      this.state.stepsModal = steps;
      this.notify();
    } catch (error) {
      this.handleFailure(error);
    }
  }

  closeStepsModal(): void {
    this.state.stepsModal = null;
    this.notify();
  }

  /** Keep the open steps modal fresh while agents work (polling contract —
   * generations take seconds to minutes, no push channel). */
  startStepsPolling(intervalMs = 2000): () => void {
    const timer = setInterval(() => {
      if (this.state.stepsModal !== null) {
        void this.openStepsModal();
      }
    }, intervalMs);
    return () => clearInterval(timer);
  }

  async save(): Promise<void> {
    try {
      const { status } = await this.api.save(this.sessionId);
      this.state.proposalStatus = status;
      this.toast("info", "Draft saved");
    } catch (error) {
      this.handleFailure(error);
    }
  }
}
