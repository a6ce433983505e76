/** DOM rendering. Pure functions of the flow state, re-run on every change.

Everything interactive carries a data-testid so the DOM tests read like the
annotator workflow: open a frame, tweak a dropdown, watch the save button.
*/

import { CuratorFlow } from "./flow.js";
import type { FrameDetail, FrameSummary } from "./types.js";

const CAMERA_LABELS: Record<string, string> = {
  front_left: "Front left",
  front_center: "Front center",
  front_right: "Front right",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export function renderApp(root: HTMLElement, flow: CuratorFlow): void {
  root.replaceChildren(renderHeader(flow), renderList(flow), renderDetail(flow));
}

function renderHeader(flow: CuratorFlow): HTMLElement {
  const header = el("header", { class: "bar" });
  header.append(el("h1", {}, "scenemine curator"));
  const verified = flow.frames.filter((f) => f.verified).length;
  header.append(
    el("span", { "data-testid": "progress" }, `${verified}/${flow.frames.length} verified`),
  );
  if (flow.notice) {
    header.append(el("span", { class: "notice", "data-testid": "notice" }, flow.notice));
  }
  if (flow.retryable) {
    const retry = el("button", { "data-testid": "retry" }, "retry");
    retry.addEventListener("click", () => void flow.submit());
    header.append(retry);
  }
  return header;
}

function renderList(flow: CuratorFlow): HTMLElement {
  const panel = el("section", { class: "list", "data-testid": "frame-list" });
  for (const [index, frame] of flow.frames.entries()) {
    panel.append(renderRow(flow, frame, index));
  }
  return panel;
}

function renderRow(flow: CuratorFlow, frame: FrameSummary, index: number): HTMLElement {
  const row = el("button", {
    class: index === flow.currentIndex ? "row current" : "row",
    "data-testid": `row-${frame.frame_id}`,
  });
  row.append(el("span", { class: "mono" }, frame.frame_id));
  row.append(el("span", {}, `risk ${frame.risk_score}`));
  row.append(el("span", { class: "tags" }, frame.tags.join(", ")));
  if (frame.verified) {
    row.append(el("span", { class: "badge verified", "data-testid": "verified-badge" }, "verified"));
  }
  if (frame.flagged) {
    row.append(el("span", { class: "badge flagged" }, "flagged"));
  }
  row.addEventListener("click", () => void flow.open(index));
  return row;
}

function renderDetail(flow: CuratorFlow): HTMLElement {
  const panel = el("section", { class: "detail", "data-testid": "frame-detail" });
  const detail = flow.detail;
  const form = flow.form;
  if (!detail || !form) {
    panel.append(el("p", { class: "placeholder" }, flow.notice || "select a frame"));
    return panel;
  }
  panel.append(el("h2", {}, `${detail.frame_id} (${detail.scene_id})`));
  if (detail.verified) {
    panel.append(
      el("span", { class: "badge verified", "data-testid": "detail-verified" }, "verified"),
    );
  }
  panel.append(renderImages(flow, detail));
  const inventory = el("pre", { class: "inventory", "data-testid": "inventory" });
  inventory.textContent = detail.inventory_text || "[NO DETECTIONS]";
  panel.append(inventory);
  panel.append(renderForm(flow));
  panel.append(renderConsole(detail));
  return panel;
}

function renderImages(flow: CuratorFlow, detail: FrameDetail): HTMLElement {
  const strip = el("div", { class: "images" });
  for (const [camera, label] of Object.entries(CAMERA_LABELS)) {
    if (!detail.images[camera]) continue;
    const img = el("img", {
      src: detail.images[camera],
      alt: `${label} camera`,
      loading: "lazy",
      "data-testid": `image-${camera}`,
    });
    // Click toggles native resolution for small-object inspection.
    img.addEventListener("click", () => img.classList.toggle("native"));
    strip.append(img);
  }
  return strip;
}

function renderForm(flow: CuratorFlow): HTMLElement {
  const form = flow.form!;
  const container = el("form", { class: "dna-form" });
  container.addEventListener("submit", (event) => event.preventDefault());

  for (const { group, field } of form.enumFields()) {
    const path = `${group}.${field}`;
    const label = el("label", { class: "field" });
    label.append(el("span", { class: "name" }, field));
    if (form.isListField(field)) {
      label.append(renderMultiSelect(flow, field));
    } else {
      label.append(renderSelect(flow, field));
    }
    appendError(label, form.errorFor(path), path);
    container.append(label);
  }

  const riskLabel = el("label", { class: "field" });
  riskLabel.append(el("span", { class: "name" }, "risk_score"));
  const risk = el("input", {
    type: "number",
    min: String(flow.vocab.risk_range[0]),
    max: String(flow.vocab.risk_range[1]),
    value: String(form.risk),
    "data-testid": "risk-input",
  });
  risk.addEventListener("input", () => {
    form.setRisk(Number(risk.value));
    renderApp(document.getElementById("app")!, flow);
  });
  riskLabel.append(risk);
  appendError(riskLabel, form.errorFor("scenario_criticality.risk_score"),
    "scenario_criticality.risk_score");
  container.append(riskLabel);

  container.append(renderTags(flow));

  const descLabel = el("label", { class: "field wide" });
  descLabel.append(el("span", { class: "name" }, "description"));
  const desc = el("textarea", { "data-testid": "description-input" });
  desc.value = form.description;
  desc.addEventListener("input", () => form.setDescription(desc.value));
  descLabel.append(desc);
  appendError(descLabel, form.errorFor("description"), "description");
  container.append(descLabel);

  const actions = el("div", { class: "actions" });
  const save = el("button", { type: "button", "data-testid": "save" }, "save and advance");
  save.disabled = !form.canSubmit;
  save.addEventListener("click", () => void flow.submit());
  const accept = el(
    "button",
    { type: "button", "data-testid": "accept", title: "keyboard: a" },
    "accept as-is",
  );
  accept.disabled = !form.canSubmit;
  accept.addEventListener("click", () => void flow.acceptAsIs());
  actions.append(accept, save);
  container.append(actions);
  return container;
}

function renderSelect(flow: CuratorFlow, field: string): HTMLSelectElement {
  const form = flow.form!;
  const select = el("select", { "data-testid": `field-${field}` });
  const current = form.value(field);
  for (const option of form.options(field)) {
    const node = el("option", { value: option }, option);
    if (option === current) node.selected = true;
    select.append(node);
  }
  // A hand-forced out-of-vocabulary value still needs to display somewhere.
  if (!form.options(field).includes(current)) {
    const node = el("option", { value: current }, `${current} (invalid)`);
    node.selected = true;
    select.append(node);
  }
  select.addEventListener("change", () => {
    form.setField(field, select.value);
    renderApp(document.getElementById("app")!, flow);
  });
  return select;
}

function renderMultiSelect(flow: CuratorFlow, field: string): HTMLElement {
  const form = flow.form!;
  const box = el("div", { class: "multi", "data-testid": `field-${field}` });
  const current = new Set(form.listValue(field));
  for (const option of form.options(field)) {
    const label = el("label", { class: "option" });
    const input = el("input", { type: "checkbox", value: option });
    input.checked = current.has(option);
    input.addEventListener("change", () => {
      const next = new Set(form.listValue(field));
      if (input.checked) {
        next.add(option);
      } else {
        next.delete(option);
      }
      form.setListField(field, form.options(field).filter((o) => next.has(o)));
      renderApp(document.getElementById("app")!, flow);
    });
    label.append(input, el("span", {}, option));
    box.append(label);
  }
  return box;
}

function renderTags(flow: CuratorFlow): HTMLElement {
  const form = flow.form!;
  const wrap = el("div", { class: "field wide" });
  wrap.append(el("span", { class: "name" }, "wod_e2e_tags"));
  const box = el("div", { class: "multi", "data-testid": "tags" });
  const current = new Set(form.tags);
  for (const tag of form.options("wod_e2e_tags")) {
    const label = el("label", { class: "option" });
    const input = el("input", { type: "checkbox", value: tag, "data-testid": `tag-${tag}` });
    input.checked = current.has(tag);
    input.addEventListener("change", () => {
      form.toggleTag(tag);
      renderApp(document.getElementById("app")!, flow);
    });
    label.append(input, el("span", {}, tag));
    box.append(label);
  }
  wrap.append(box);
  appendError(wrap, form.errorFor("wod_e2e_tags"), "wod_e2e_tags");
  return wrap;
}

function appendError(parent: HTMLElement, message: string | null, path: string): void {
  if (!message) return;
  parent.append(
    el("span", { class: "violation", "data-testid": `violation-${path}` }, message),
  );
}

function renderConsole(detail: FrameDetail): HTMLElement {
  const panel = el("section", { class: "console", "data-testid": "console" });
  panel.append(el("h3", {}, "reasoning console"));

  const verdicts = el("ul", { class: "verdicts" });
  for (const verdict of detail.winner_score.verdicts) {
    verdicts.append(el("li", { class: "verdict" }, verdict));
  }
  panel.append(verdicts);
  panel.append(
    el(
      "p",
      { class: "score" },
      `winner ${detail.winner_index} of ${detail.candidates.length || 1} ` +
        `(${detail.candidate_source}), reward ${detail.winner_score.reward}`,
    ),
  );

  if (detail.flagged_for_review.length > 0) {
    const flagged = el("div", { class: "flagged", "data-testid": "flagged" });
    flagged.append(el("strong", {}, "needs review: "));
    flagged.append(el("span", {}, detail.flagged_for_review.join(", ")));
    panel.append(flagged);
  }

  for (const trace of detail.scout_traces) {
    const entry = el("details", { class: "trace" });
    const summary = el(
      "summary",
      {},
      `${trace.scout_name}${trace.parse_failed ? " (parse failed)" : ` risk ${trace.risk_score}`}`,
    );
    entry.append(summary);
    const body = el("pre", {});
    body.textContent = trace.reasoning_trace || "(no trace)";
    entry.append(body);
    panel.append(entry);
  }
  return panel;
}

/** True when the event target is a control that legitimately eats keystrokes. */
export function isTypingTarget(target: EventTarget | null): boolean {
  if (!(target instanceof HTMLElement)) return false;
  return ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName);
}

export function bindKeyboard(flow: CuratorFlow, scope: Document): void {
  scope.addEventListener("keydown", (event) => {
    if (isTypingTarget(event.target)) return;
    if (event.key === "a" && flow.form?.canSubmit) {
      event.preventDefault();
      void flow.acceptAsIs();
    }
  });
}
