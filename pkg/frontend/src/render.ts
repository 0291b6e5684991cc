/** Three-panel DOM rendering: raw text (left), sentence labels (middle),
 * P/O entity lists plus the rule manager (right). Pure element builders:
 * all state comes in as arguments, all actions leave through `Handlers`.
 */

import type { AnalysisView, EntityLabel, EntityView, Rule, SentenceLabel, SentenceView } from "./types.js";

export interface Handlers {
  deleteEntity(entityId: string): void;
  relabelEntity(entityId: string, newLabel: EntityLabel): void;
  relabelSentence(sentenceIndex: number, newLabel: SentenceLabel): void;
  addEntity(sentenceIndex: number, start: number, end: number, label: EntityLabel): void;
  submitRule(target: EntityLabel, pattern: string): void;
  deleteRule(ruleId: string): void;
  retry(): void;
}

export interface TokenSelection {
  sentenceIndex: number;
  start: number; // inclusive token index
  end: number;   // exclusive
}

export interface UiState {
  analysis: AnalysisView | null;
  rules: Rule[];
  error: string | null;       // banner error (fetch failures)
  ruleError: string | null;   // inline error next to the rule form
  selection: TokenSelection | null;
  onTokenClick?(sentenceIndex: number, tokenIndex: number): void;
}

const SENTENCE_LABELS: SentenceLabel[] = ["P", "IC", "O", "N"];

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function probsTooltip(probs: number[]): string {
  const parts = SENTENCE_LABELS.map((label, i) => `${label} ${(probs[i] ?? 0).toFixed(3)}`);
  return parts.join(" · ");
}

function scoreTooltip(entity: EntityView): string {
  const fmt = (x: number | null) => (x === null ? "-" : x.toFixed(3));
  const rule = entity.rule_id ? ` · rule ${entity.rule_id}` : "";
  return `score P ${fmt(entity.score_p)} · score O ${fmt(entity.score_o)}${rule}`;
}

function renderTextPanel(doc: Document, analysis: AnalysisView): HTMLElement {
  const panel = el(doc, "section", "panel panel-text");
  panel.appendChild(el(doc, "h2", "panel-heading", "Paper"));
  panel.appendChild(el(doc, "h3", "paper-title", analysis.title));
  panel.appendChild(el(doc, "p", "paper-abstract", analysis.abstract));
  const meta = el(doc, "p", "model-versions",
    `doc ${analysis.doc_id} · models: ` +
    Object.entries(analysis.model_versions)
      .map(([slot, v]) => `${slot}=${v ?? "none"}`)
      .join(" "));
  panel.appendChild(meta);
  return panel;
}

function renderSentence(
  doc: Document,
  sentence: SentenceView,
  state: UiState,
  handlers: Handlers,
): HTMLElement {
  const item = el(doc, "li", `sentence label-${sentence.pico_label}`);
  item.dataset.index = String(sentence.index);
  item.title = probsTooltip(sentence.pico_probs);

  const badge = el(doc, "span", "label-badge", sentence.pico_label);
  if (sentence.corrected) badge.classList.add("corrected");
  item.appendChild(badge);

  const tokens = el(doc, "span", "tokens");
  sentence.tokens.forEach((token, i) => {
    const tok = el(doc, "span", "token", token);
    tok.dataset.token = String(i);
    const sel = state.selection;
    if (sel && sel.sentenceIndex === sentence.index && i >= sel.start && i < sel.end) {
      tok.classList.add("selected");
    }
    tok.addEventListener("click", () => state.onTokenClick?.(sentence.index, i));
    tokens.appendChild(tok);
    tokens.appendChild(doc.createTextNode(" "));
  });
  item.appendChild(tokens);

  const controls = el(doc, "span", "sentence-controls");
  const select = el(doc, "select", "relabel-select");
  for (const label of SENTENCE_LABELS) {
    const option = el(doc, "option", undefined, label);
    option.value = label;
    if (label === sentence.pico_label) option.selected = true;
    select.appendChild(option);
  }
  select.addEventListener("change", () => {
    handlers.relabelSentence(sentence.index, select.value as SentenceLabel);
  });
  controls.appendChild(select);

  const sel = state.selection;
  if (sel && sel.sentenceIndex === sentence.index) {
    for (const label of ["P", "O"] as EntityLabel[]) {
      const btn = el(doc, "button", "add-entity", `add as ${label}`);
      btn.addEventListener("click", () => handlers.addEntity(sentence.index, sel.start, sel.end, label));
      controls.appendChild(btn);
    }
  }
  item.appendChild(controls);
  return item;
}

function renderSentencePanel(doc: Document, state: UiState, handlers: Handlers): HTMLElement {
  const panel = el(doc, "section", "panel panel-sentences");
  panel.appendChild(el(doc, "h2", "panel-heading", "Sentences"));
  const hint = el(doc, "p", "hint",
    "Hover a sentence for class probabilities; click two tokens to select a new entity span.");
  panel.appendChild(hint);
  const list = el(doc, "ul", "sentence-list");
  for (const sentence of state.analysis!.sentences) {
    list.appendChild(renderSentence(doc, sentence, state, handlers));
  }
  panel.appendChild(list);
  return panel;
}

function renderEntity(doc: Document, entity: EntityView, handlers: Handlers): HTMLElement {
  const item = el(doc, "li", "entity");
  item.dataset.entityId = entity.id;
  item.title = scoreTooltip(entity);

  const surface = el(doc, "span", "entity-surface", entity.surface);
  item.appendChild(surface);
  item.appendChild(el(doc, "span", "entity-where", ` (sentence ${entity.sentence_index})`));
  if (entity.stale) item.appendChild(el(doc, "span", "stale-badge", "stale"));
  if (entity.corrected) item.appendChild(el(doc, "span", "corrected-badge", "edited"));

  const other: EntityLabel = entity.label === "P" ? "O" : "P";
  const relabel = el(doc, "button", "entity-relabel", `→ ${other}`);
  relabel.addEventListener("click", () => handlers.relabelEntity(entity.id, other));
  item.appendChild(relabel);

  const del = el(doc, "button", "entity-delete", "delete");
  del.addEventListener("click", () => handlers.deleteEntity(entity.id));
  item.appendChild(del);
  return item;
}

function renderEntityList(
  doc: Document,
  heading: string,
  entities: EntityView[],
  handlers: Handlers,
): HTMLElement {
  const block = el(doc, "div", `entity-block entity-block-${heading}`);
  block.appendChild(el(doc, "h3", "entity-heading", `${heading} entities (${entities.length})`));
  if (entities.length === 0) {
    block.appendChild(el(doc, "p", "placeholder", "none found"));
    return block;
  }
  const list = el(doc, "ul", "entity-list");
  for (const entity of entities) {
    list.appendChild(renderEntity(doc, entity, handlers));
  }
  block.appendChild(list);
  return block;
}

function renderRuleManager(doc: Document, state: UiState, handlers: Handlers): HTMLElement {
  const block = el(doc, "div", "rule-manager");
  block.appendChild(el(doc, "h3", "entity-heading", "Rules"));

  const form = el(doc, "form", "rule-form");
  const target = el(doc, "select", "rule-target");
  for (const label of ["O", "P"]) {
    const option = el(doc, "option", undefined, label);
    option.value = label;
    target.appendChild(option);
  }
  const pattern = el(doc, "input", "rule-pattern");
  pattern.placeholder = "risk of <outcome>";
  const submit = el(doc, "button", "rule-submit", "add rule");
  submit.type = "submit";
  form.append(target, pattern, submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.submitRule(target.value as EntityLabel, pattern.value);
  });
  block.appendChild(form);

  const error = el(doc, "span", "rule-error", state.ruleError ?? "");
  if (!state.ruleError) error.classList.add("hidden");
  block.appendChild(error);

  const list = el(doc, "ul", "rule-list");
  for (const rule of state.rules) {
    const item = el(doc, "li", "rule");
    item.dataset.ruleId = rule.id;
    item.appendChild(el(doc, "span", "rule-text", `${rule.target}: ${rule.pattern}`));
    item.appendChild(el(doc, "span", "rule-origin", ` [${rule.origin}]`));
    const del = el(doc, "button", "rule-delete", "delete");
    del.addEventListener("click", () => handlers.deleteRule(rule.id));
    item.appendChild(del);
    list.appendChild(item);
  }
  block.appendChild(list);
  return block;
}

function renderEntityPanel(doc: Document, state: UiState, handlers: Handlers): HTMLElement {
  const panel = el(doc, "section", "panel panel-entities");
  panel.appendChild(el(doc, "h2", "panel-heading", "Disease entities"));
  panel.appendChild(renderEntityList(doc, "P", state.analysis!.entities_p, handlers));
  panel.appendChild(renderEntityList(doc, "O", state.analysis!.entities_o, handlers));
  panel.appendChild(renderRuleManager(doc, state, handlers));
  return panel;
}

/** Render the whole app into `root`, replacing previous content. */
export function renderApp(root: HTMLElement, state: UiState, handlers: Handlers): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  if (state.error) {
    const banner = el(doc, "div", "error-banner");
    banner.appendChild(el(doc, "span", "error-text", state.error));
    const retry = el(doc, "button", "retry", "retry");
    retry.addEventListener("click", () => handlers.retry());
    banner.appendChild(retry);
    root.appendChild(banner);
  }
  if (!state.analysis) {
    if (!state.error) root.appendChild(el(doc, "p", "placeholder", "loading…"));
    return;
  }
  const panels = el(doc, "div", "panels");
  panels.appendChild(renderTextPanel(doc, state.analysis));
  panels.appendChild(renderSentencePanel(doc, state, handlers));
  panels.appendChild(renderEntityPanel(doc, state, handlers));
  root.appendChild(panels);
}
