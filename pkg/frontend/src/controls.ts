/** Pure derivation of the visible control set from the view state.
 *
 * Controls gated off for the session's level are absent, not disabled. The
 * ids are stable so tests can assert the exact per-level set.
 */

import { allows } from "./gating.js";
import type { ViewState } from "./store.js";
import type { SectionSlug, UserAction } from "./types.js";
import { SECTION_SLUGS } from "./types.js";

export interface Control {
  id: string;
  label: string;
  /** The gated action this control triggers; null for level-independent ones. */
  action: UserAction | null;
  section?: SectionSlug;
}

function sectionReady(view: ViewState, slug: SectionSlug): boolean {
  const pane = view.panes[slug];
  return pane.content.length > 0 && !pane.pendingGeneration;
}

export function visibleControls(view: ViewState): Control[] {
  const session = view.session;
  if (!session) {
    return [];
  }
  const gating = session.gating;
  const controls: Control[] = [];
  const add = (control: Control, contextOk = true) => {
    if (contextOk && allows(gating, control.action)) {
      controls.push(control);
    }
  };

  // Phase one: seed ideas.
  add({ id: "seed-ideas:generate", label: "Generate seed ideas", action: "generate_seed_ideas" });
  add(
    { id: "idea:select", label: "Select seed idea", action: "customize_seed_idea" },
    view.ideas.length > 0,
  );
  add(
    { id: "idea:customize", label: "Customize seed idea", action: "customize_seed_idea" },
    view.ideas.length > 0,
  );

  // Literature search sidebar.
  add({ id: "search:open-sidebar", label: "Search literature", action: "search_select_literature" });
  add(
    { id: "search:query", label: "Run paper search", action: "search_select_literature" },
    view.searchSidebarOpen,
  );
  add(
    { id: "search:pin", label: "Select paper", action: "search_select_literature" },
    view.searchResults.length > 0,
  );

  // Drafting.
  add(
    { id: "proposal:generate-full", label: "Generate full proposal", action: "prompt_full_proposal" },
    view.activeIdeaId !== null,
  );
  if (session.level === "low") {
    add(
      { id: "proposal:iterate", label: "Iterate automatically", action: "select_improvements" },
      view.proposalId !== null,
    );
  }
  for (const slug of SECTION_SLUGS) {
    add(
      { id: `section:prompt:${slug}`, label: "Prompt the writer", action: "prompt_section", section: slug },
      sectionReady(view, slug),
    );
    add(
      {
        id: `section:inline-edit:${slug}`,
        label: "Highlight text for edits",
        action: "highlight_for_edit",
        section: slug,
      },
      sectionReady(view, slug),
    );
    add(
      { id: `section:direct-edit:${slug}`, label: "Edit content", action: "direct_edit", section: slug },
      sectionReady(view, slug),
    );
    // Revision tracking is available at every level.
    add(
      { id: `revert:open:${slug}`, label: "Review versions", action: "revert_version", section: slug },
      view.panes[slug].content.length > 0,
    );
  }

  // Evaluation sidebar.
  add({ id: "criteria:customize", label: "Customize criteria", action: "customize_criteria" });
  if (session.level !== "low") {
    // low control evaluates autonomously inside the iterate loop
    add({ id: "evaluation:run", label: "Evaluate proposal", action: null }, view.proposalId !== null);
    add(
      { id: "improvements:suggest", label: "Suggest improvements", action: null },
      view.report !== null,
    );
  }
  add(
    { id: "reflection:vote", label: "Thumbs up/down", action: "feedback_on_critiques" },
    view.report !== null,
  );
  add(
    { id: "reflection:more", label: "Request more critiques", action: "request_more_critiques" },
    view.report !== null,
  );
  add(
    {
      id: session.level === "low" ? "improvements:accept-revision" : "improvements:apply",
      label: session.level === "low" ? "Accept suggested revision" : "Apply selected improvements",
      action: "select_improvements",
    },
    view.improvements.length > 0,
  );
  add(
    { id: "improvements:customize", label: "Customize improvement", action: "customize_improvements" },
    view.improvements.length > 0,
  );

  // Always-on transparency and lifecycle affordances.
  add({ id: "steps:open", label: "Review agent steps", action: null });
  add(
    { id: "proposal:save", label: "Save draft", action: null },
    view.proposalId !== null && SECTION_SLUGS.every((slug) => view.panes[slug].content.length > 0),
  );

  return controls;
}

export function controlIds(view: ViewState): string[] {
  return visibleControls(view).map((control) => control.id);
}
