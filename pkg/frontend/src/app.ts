/** Browser bootstrap: a minimal notebook layout over the store.
 *
 * Three section panes in the middle, the search sidebar on the left, the
 * evaluation sidebar on the right, and the floating step-trace button. All
 * behavior lives in the store; this file only draws state and forwards
 * clicks.
 */

import { ApiClient } from "./api.js";
import { visibleControls } from "./controls.js";
import { ViewStore } from "./store.js";
import type { SectionSlug } from "./types.js";
import { SECTION_LABELS, SECTION_SLUGS } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function promptText(message: string): string | null {
  const value = window.prompt(message);
  return value && value.trim() ? value : null;
}

export function mount(root: HTMLElement, store: ViewStore): void {
  const render = () => {
    const state = store.state;
    root.replaceChildren();
    if (!state.session) {
      const form = el("form", { class: "start" });
      const input = el("input", { placeholder: "research keywords", size: "48" });
      const level = el("select", {});
      for (const value of ["low", "medium", "intensive"]) {
        level.append(el("option", { value }, value));
      }
      const button = el("button", { type: "submit" }, "Start session");
      form.append(input, level, button);
      form.addEventListener("submit", (event) => {
        event.preventDefault();
        if (input.value.trim()) {
          void store.createSession(input.value, level.value);
        }
      });
      root.append(el("h1", {}, "ideasmith"), form);
      return;
    }

    const controls = visibleControls(state);
    const has = (id: string) => controls.some((c) => c.id === id);
    const toolbar = el("div", { class: "toolbar" });
    const button = (id: string, label: string, onClick: () => void) => {
      if (!has(id)) {
        return; // denied affordances are absent, not disabled
      }
      const node = el("button", { "data-control": id }, label);
      node.addEventListener("click", onClick);
      toolbar.append(node);
    };

    button("seed-ideas:generate", "Generate seed ideas", () => void store.generateIdeas());
    button("search:open-sidebar", "Search papers", () => store.toggleSearchSidebar());
    button("proposal:generate-full", "Generate full proposal", () => void store.generateFullProposal());
    button("proposal:iterate", "Iterate automatically", () => void store.iterate());
    button("criteria:customize", "Add criterion", () => {
      const name = promptText("Criterion name");
      const description = name ? promptText("Criterion description") : null;
      if (name && description) {
        void store.addCriterion({ name, description });
      }
    });
    button("evaluation:run", "Evaluate", () => void store.evaluate());
    button("improvements:suggest", "Suggest improvements", () => void store.suggestImprovements());
    button("improvements:apply", "Apply selected improvements", () => {
      void store.applyImprovements(state.improvements.filter((i) => i.selected).map((i) => i.criterion_id));
    });
    button("improvements:accept-revision", "Accept suggested revision", () => {
      void store.applyImprovements(state.improvements.map((i) => i.criterion_id));
    });
    button("steps:open", "Agent steps", () => void store.openStepsModal());
    button("proposal:save", "Save draft", () => void store.save());

    const panes = el("div", { class: "panes" });
    for (const slug of SECTION_SLUGS) {
      const pane = state.panes[slug];
      const header = el(
        "div",
        { class: "pane-header" },
        el("strong", {}, SECTION_LABELS[slug]),
        el("span", { class: "badge" }, ` v${state.historyBadges[slug]}`),
      );
      const sectionBar = el("div", { class: "pane-toolbar" });
      const sectionButton = (id: string, label: string, onClick: () => void) => {
        if (!has(id)) {
          return;
        }
        const node = el("button", { "data-control": id }, label);
        node.addEventListener("click", onClick);
        sectionBar.append(node);
      };
      sectionButton(`section:prompt:${slug}`, "Prompt writer", () => {
        const instruction = promptText("Instruction for the writer");
        if (instruction) {
          void store.promptSection(slug, instruction);
        }
      });
      sectionButton(`section:inline-edit:${slug}`, "Edit highlighted text", () => {
        const textarea = root.querySelector<HTMLTextAreaElement>(`textarea[data-pane="${slug}"]`);
        if (!textarea || textarea.selectionStart === textarea.selectionEnd) {
          return;
        }
        store.setSelection(slug, textarea.selectionStart, textarea.selectionEnd);
        const instruction = promptText("Instruction for the highlighted text");
        if (instruction) {
          void store.submitInlineEdit(instruction);
        } else {
          store.clearSelection();
        }
      });
      sectionButton(`revert:open:${slug}`, "Versions", () => void store.openRevertModal(slug));

      const textarea = el("textarea", { "data-pane": slug, rows: "10", cols: "80" }) as HTMLTextAreaElement;
      textarea.value = pane.content;
      textarea.readOnly = pane.pendingGeneration || !has(`section:direct-edit:${slug}`);
      if (has(`section:direct-edit:${slug}`)) {
        const save = el("button", { "data-control": `section:direct-edit:${slug}` }, "Save edits");
        save.addEventListener("click", () => void store.directEdit(slug, textarea.value));
        sectionBar.append(save);
      }
      panes.append(el("section", { class: "pane" }, header, sectionBar, textarea));
    }

    const overlays = el("div", { class: "overlays" });
    if (state.overreachNotice) {
      overlays.append(
        el(
          "div",
          { class: "notice" },
          `The model rewrote beyond the highlighted span; compare v${state.overreachNotice.compareTo} `,
          el("button", { "data-control": "overreach:compare" }, "Open comparison"),
        ),
      );
    }
    if (state.stepsModal) {
      const list = el("ol", { class: "steps" });
      for (const step of state.stepsModal) {
        list.append(
          el(
            "li",
            { class: step.status },
            `${step.operation} [${step.status}] ${step.detail ?? ""}`,
          ),
        );
      }
      overlays.append(el("div", { class: "modal" }, el("h3", {}, "Agent steps"), list));
    }
    if (state.revertModal) {
      const list = el("ul", {});
      for (const version of state.revertModal.versions) {
        const restore = el("button", {}, `Revert to v${version.seq}`);
        const modal = state.revertModal;
        restore.addEventListener("click", () => void store.revertTo(modal.kind, version.seq));
        list.append(el("li", {}, `v${version.seq} (${version.origin}) `, restore, el("pre", {}, version.content)));
      }
      overlays.append(el("div", { class: "modal" }, el("h3", {}, "Version history"), list));
    }
    for (const toast of state.toasts.slice(-3)) {
      overlays.append(el("div", { class: `toast ${toast.kind}` }, toast.message));
    }

    root.append(toolbar, panes, overlays);
  };

  store.subscribe(render);
  render();
}

declare global {
  interface Window {
    ideasmith?: { store: ViewStore };
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const store = new ViewStore(new ApiClient(""));
  window.ideasmith = { store };
  mount(document.getElementById("app") as HTMLElement, store);
  store.startStepsPolling();
}
