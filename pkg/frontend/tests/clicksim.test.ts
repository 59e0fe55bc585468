import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { visibleControls, type Control } from "../src/controls.js";
import { ViewStore } from "../src/store.js";
import type { ControlLevel, SectionSlug } from "../src/types.js";
import { StubServer } from "./stub.js";

/** Invoke a rendered control the way a click handler would. */
async function invoke(store: ViewStore, control: Control): Promise<void> {
  const section = (control.section ?? "study-plan") as SectionSlug;
  switch (true) {
    case control.id === "seed-ideas:generate":
      return store.generateIdeas();
    case control.id === "idea:select":
      return store.selectIdea(store.state.ideas[0]!.id);
    case control.id === "idea:customize":
      return store.customizeIdea(store.state.ideas[0]!.id, "An edited idea line");
    case control.id === "search:open-sidebar":
      store.state.searchSidebarOpen = true;
      return;
    case control.id === "search:query":
      return store.search("open source toxicity");
    case control.id === "search:pin":
      return store.pinPapers(store.state.searchResults.map((p) => p.citation_id));
    case control.id === "proposal:generate-full":
      return store.generateFullProposal();
    case control.id === "proposal:iterate":
      return store.iterate(1);
    case control.id.startsWith("section:prompt:"):
      return store.promptSection(section, "revise this section");
    case control.id.startsWith("section:inline-edit:"): {
      store.setSelection(section, 0, Math.min(4, store.state.panes[section].content.length));
      return store.submitInlineEdit("tighten the highlighted text");
    }
    case control.id.startsWith("section:direct-edit:"):
      return store.directEdit(section, `${store.state.panes[section].content} (edited)`);
    case control.id.startsWith("revert:open:"): {
      await store.openRevertModal(section);
      const first = store.state.revertModal?.versions[0];
      if (first) {
        await store.revertTo(section, first.seq);
      }
      return;
    }
    case control.id === "criteria:customize":
      return store.addCriterion({ name: "Rigor", description: "methodological rigor" });
    case control.id === "evaluation:run":
      return store.evaluate();
    case control.id === "reflection:vote":
      return store.vote(1, 0, "up");
    case control.id === "reflection:more":
      return store.moreCritiques(1);
    case control.id === "improvements:suggest":
      return store.suggestImprovements();
    case control.id === "improvements:apply":
    case control.id === "improvements:accept-revision":
      return store.applyImprovements(store.state.improvements.map((i) => i.criterion_id));
    case control.id === "improvements:customize": {
      const first = store.state.improvements[0]!;
      return store.applyImprovements([first.criterion_id], { [first.criterion_id]: "my wording" });
    }
    case control.id === "steps:open":
      await store.openStepsModal();
      store.closeStepsModal();
      return;
    case control.id === "proposal:save":
      return store.save();
    default:
      throw new Error(`click simulation has no handler for ${control.id}`);
  }
}

async function clickEverything(store: ViewStore): Promise<string[]> {
  const clicked: string[] = [];
  for (const control of visibleControls(store.state)) {
    clicked.push(control.id);
    await invoke(store, control);
  }
  return clicked;
}

async function simulateLevel(level: ControlLevel): Promise<{ server: StubServer; clicked: Set<string> }> {
  const server = new StubServer();
  const store = new ViewStore(new ApiClient("", server.fetch));
  await store.createSession("sentiment, toxicity, security", level);

  const clicked = new Set<string>();
  // Walk the session through its phases; after each phase click every
  // control the UI currently renders.
  const phases: Array<() => Promise<void>> = [
    async () => {
      await store.generateIdeas();
      await store.selectIdea("idea-1");
    },
    async () => {
      if (store.state.session!.gating.search_select_literature) {
        store.toggleSearchSidebar();
        await store.search("toxicity");
        await store.pinPapers(store.state.searchResults.map((p) => p.citation_id));
      }
      await store.generateFullProposal();
    },
    async () => {
      if (level === "low") {
        await store.iterate(1);
      } else {
        await store.evaluate();
        await store.suggestImprovements();
      }
    },
  ];
  for (const phase of phases) {
    await phase();
    for (const id of await clickEverything(store)) {
      clicked.add(id);
    }
  }
  return { server, clicked };
}

describe("exhaustive click-simulation per control level", () => {
  for (const level of ["low", "medium", "intensive"] as const) {
    it(`${level}: the UI never issues a request the gating map forbids`, async () => {
      const { server, clicked } = await simulateLevel(level);
      expect(server.forbidden).toEqual([]);
      expect(server.requests.filter((r) => r.status === 403)).toEqual([]);
      expect(clicked.size).toBeGreaterThan(5);
    });
  }

  it("low never reaches for search, section edits, or critique feedback", async () => {
    const { server } = await simulateLevel("low");
    const paths = server.requests.map((r) => `${r.method} ${r.path}`);
    expect(paths.some((p) => p.includes("/search"))).toBe(false);
    expect(paths.some((p) => p.includes("inline-edit"))).toBe(false);
    expect(paths.some((p) => p.includes("/vote"))).toBe(false);
    expect(paths.some((p) => p.includes("/more"))).toBe(false);
  });

  it("intensive exercises the fine-grained surface end to end", async () => {
    const { server, clicked } = await simulateLevel("intensive");
    expect(clicked.has("section:inline-edit:study-plan")).toBe(true);
    expect(clicked.has("reflection:vote")).toBe(true);
    const paths = server.requests.map((r) => `${r.method} ${r.path}`);
    expect(paths.some((p) => p.includes("inline-edit"))).toBe(true);
    expect(paths.some((p) => p.includes("/vote"))).toBe(true);
    expect(paths.some((p) => p.includes("/revert"))).toBe(true);
  });
});
