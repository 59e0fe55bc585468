/** Wire types mirroring the service's JSON responses. */

export type ControlLevel = "low" | "medium" | "intensive";

export type SectionSlug = "literature-synthesis" | "research-goals" | "study-plan";

export const SECTION_SLUGS: readonly SectionSlug[] = [
  "literature-synthesis",
  "research-goals",
  "study-plan",
];

export const SECTION_LABELS: Record<SectionSlug, string> = {
  "literature-synthesis": "Literature Synthesis",
  "research-goals": "Research Goals",
  "study-plan": "Study Plan",
};

/** The thirteen gateable actions; the map always comes from the server. */
export type UserAction =
  | "generate_seed_ideas"
  | "customize_seed_idea"
  | "search_select_literature"
  | "prompt_section"
  | "highlight_for_edit"
  | "direct_edit"
  | "customize_criteria"
  | "feedback_on_critiques"
  | "request_more_critiques"
  | "select_improvements"
  | "customize_improvements"
  | "prompt_full_proposal"
  | "revert_version";

export const USER_ACTIONS: readonly UserAction[] = [
  "generate_seed_ideas",
  "customize_seed_idea",
  "search_select_literature",
  "prompt_section",
  "highlight_for_edit",
  "direct_edit",
  "customize_criteria",
  "feedback_on_critiques",
  "request_more_critiques",
  "select_improvements",
  "customize_improvements",
  "prompt_full_proposal",
  "revert_version",
];

export type GatingMap = Record<UserAction, boolean>;

export interface IdeaView {
  id: string;
  text: string;
  source_keywords: string[];
  abstract: string | null;
}

export interface CriterionView {
  id: number;
  name: string;
  description: string;
  is_default?: boolean;
}

export interface ReflectionView {
  text: string;
  vote: "up" | "down" | null;
}

export interface ImprovementView {
  criterion_id: number;
  criterion_name: string;
  suggestions: string[];
  selected: boolean;
  customized_text: string | null;
}

export interface ReportView {
  fingerprint: string;
  criteria: CriterionView[];
  reflections: Record<string, ReflectionView[]>;
  improvements: ImprovementView[];
}

export interface SectionView {
  seq: number;
  text: string;
}

export interface ProposalView {
  id: string;
  status: "draft" | "evaluated" | "saved";
  sections: Partial<Record<SectionSlug, SectionView>>;
}

export interface SessionSummary {
  id: string;
  level: ControlLevel;
  keywords: string;
  created_at: string;
  gating: GatingMap;
  ideas: IdeaView[];
  active_idea_id: string | null;
  criteria: CriterionView[];
  pinned_papers: string[];
  proposal: ProposalView | null;
  report: ReportView | null;
}

export interface PaperView {
  citation_id: string;
  title: string;
  authors: string[];
  year: number;
  venue: string | null;
  abstract: string;
  source: string;
  url: string;
}

export interface StepView {
  seq: number;
  role: string;
  operation: string;
  status: "success" | "failure";
  detail: string;
  started_at: string;
  ended_at: string;
}

export interface VersionView {
  seq: number;
  origin: string;
  parent_seq: number | null;
  created_at: string;
  content: string;
}

export interface RevisionResponse {
  section: SectionSlug;
  seq: number;
  text: string;
  span_overreach?: boolean;
}

export interface DenialBody {
  error: "gating_denied";
  action: UserAction;
  level: ControlLevel;
  reason: string;
}
