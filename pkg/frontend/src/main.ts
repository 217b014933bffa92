// Page wiring. All behavior lives in the imported modules; this file only
// connects DOM events to API calls and pours rendered fragments back into
// the page.

import { ApiClient, ApiFailure, SequenceGate } from "./api.js";
import {
  addBranch,
  astFromGraph,
  cycleRepeat,
  deleteNode,
  forkAtom,
  GraphEditError,
  insertAtomOnEdge,
  setLiteralState,
  toggleOptional,
} from "./graph.js";
import { renderRegex } from "./regex.js";
import { letterFor, stateFor } from "./palette.js";
import {
  forcedPrefixFromPath,
  renderAlignment,
  renderBeamTree,
  renderError,
  renderExampleRow,
  renderGraphSvg,
  renderHeatmap,
  renderHistory,
  renderOverConstraint,
  renderTable,
  renderTokens,
  renderTuples,
} from "./render.js";
import { UiSession } from "./session.js";
import type {
  ForecastTupleJson,
  GenerationJson,
  GraphJson,
  TableJson,
  TreeNode,
} from "./types.js";

const params = new URLSearchParams(location.search);
const apiBase = params.get("api") ?? "";
const client = new ApiClient(apiBase);
const session = new UiSession();

const globalGate = new SequenceGate();
const rangeGate = new SequenceGate();

let selectedNode: number | null = null;
let lastTree: TreeNode | null = null;
let lastGenTable: TableJson | null = null;
let lastGenConstraint: string | null = null;
let globalLetters = new Set<number>();
let rangeLetters = new Set<number>();
let lastRange: ForecastTupleJson[] | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(hostId: string, err: unknown): void {
  const host = el(hostId);
  if (err instanceof ApiFailure && err.overConstraint) {
    host.innerHTML = renderOverConstraint(err.detail);
  } else if (err instanceof ApiFailure) {
    host.innerHTML = renderError(`${err.code}: ${err.detail}`);
  } else if (err instanceof GraphEditError || err instanceof RangeError) {
    host.innerHTML = renderError(err.message);
  } else {
    host.innerHTML = renderError(String(err));
  }
}

// ── Constraint editor ───────────────────────────────────────────────────────

async function setRegex(regex: string, recordHistory: boolean): Promise<boolean> {
  try {
    const parsed = await client.parse(regex);
    session.applyParse(regex, parsed);
    (el<HTMLInputElement>("regex-input")).value = regex;
    el("parse-error").innerHTML = "";
    selectedNode = null;
    redrawGraph();
    if (recordHistory && regex !== "") {
      await client.appendHistory(regex);
      await refreshHistory();
    }
    return true;
  } catch (err) {
    showError("parse-error", err);
    return false;
  }
}

function redrawGraph(): void {
  const host = el("graph-host");
  if (!session.constraint) {
    host.className = "empty";
    host.textContent = "parse a constraint to see its graph";
    return;
  }
  host.className = "";
  host.innerHTML = renderGraphSvg(session.constraint.graph, selectedNode);
}

/** Apply a local graph edit, then push the regenerated regex through the
 * server so text and drawing stay language-equivalent. */
async function editGraph(op: (g: GraphJson) => GraphJson): Promise<void> {
  if (!session.constraint) {
    el("parse-error").innerHTML = renderError("parse a constraint first");
    return;
  }
  try {
    const edited = op(session.constraint.graph);
    const regex = renderRegex(astFromGraph(edited));
    await setRegex(regex, true);
  } catch (err) {
    showError("parse-error", err);
  }
}

function pickedLetter(): string {
  return (el<HTMLSelectElement>("letter-pick")).value;
}

function needSelection(): number | null {
  if (selectedNode === null) {
    el("parse-error").innerHTML = renderError("click a graph node first");
  }
  return selectedNode;
}

async function refreshHistory(): Promise<void> {
  const resp = await client.history();
  session.history = resp.history;
  el("history-host").innerHTML = renderHistory(session.history);
}

el("parse-btn").addEventListener("click", () => {
  void setRegex((el<HTMLInputElement>("regex-input")).value, true);
});
el<HTMLInputElement>("regex-input").addEventListener("change", () => {
  void setRegex((el<HTMLInputElement>("regex-input")).value, true);
});
el("save-history-btn").addEventListener("click", async () => {
  try {
    await client.appendHistory((el<HTMLInputElement>("regex-input")).value);
    await refreshHistory();
  } catch (err) {
    showError("parse-error", err);
  }
});

el("history-host").addEventListener("click", (ev) => {
  const li = (ev.target as HTMLElement).closest<HTMLElement>("li[data-index]");
  if (!li) return;
  const entry = session.history[Number(li.dataset.index)];
  if (entry) void setRegex(entry.regex, false);
});

el("graph-host").addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const nodeEl = target.closest<SVGGElement & HTMLElement>("[data-node-id]");
  if (nodeEl) {
    const id = Number(nodeEl.dataset.nodeId);
    selectedNode = selectedNode === id ? null : id;
    redrawGraph();
    return;
  }
  const edgeEl = target.closest<HTMLElement>("[data-edge-index]");
  if (edgeEl) {
    const pick = pickedLetter();
    const atom = pick === "." ? ("wildcard" as const) : { state: stateFor(pick) };
    void editGraph((g) => insertAtomOnEdge(g, Number(edgeEl.dataset.edgeIndex), atom));
  }
});

el("tool-delete").addEventListener("click", () => {
  const id = needSelection();
  if (id !== null) void editGraph((g) => deleteNode(g, id));
});
el("tool-optional").addEventListener("click", () => {
  const id = needSelection();
  if (id !== null) void editGraph((g) => toggleOptional(g, id));
});
el("tool-repeat").addEventListener("click", () => {
  const id = needSelection();
  if (id !== null) void editGraph((g) => cycleRepeat(g, id));
});
el("tool-state").addEventListener("click", () => {
  const id = needSelection();
  if (id !== null) void editGraph((g) => setLiteralState(g, id, stateFor(pickedLetter())));
});
el("tool-fork").addEventListener("click", () => {
  const id = needSelection();
  if (id !== null) void editGraph((g) => forkAtom(g, id, stateFor(pickedLetter())));
});
el("tool-branch").addEventListener("click", () => {
  const id = needSelection();
  if (id !== null) void editGraph((g) => addBranch(g, id, stateFor(pickedLetter())));
});

// ── Refine by example ───────────────────────────────────────────────────────

function redrawExamples(): void {
  const host = el("examples-host");
  if (!session.examples.length) {
    host.className = "empty";
    host.textContent = "inferred and generated outputs collect here";
    return;
  }
  host.className = "";
  host.innerHTML = session.examples.map(renderExampleRow).join("");
}

el("examples-host").addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const row = target.closest<HTMLElement>(".example-row");
  if (!row) return;
  const key = Number(row.dataset.key);
  const act = target.dataset.act;
  if (act === "select") {
    session.toggleSelected(key);
  } else if (act === "drop") {
    session.dropExample(key);
    redrawExamples();
  } else if (act === "to-editor") {
    const ex = session.examples.find((e) => e.key === key);
    if (ex) void setRegex(ex.states, true);
  } else if (act === "forecast") {
    const ex = session.examples.find((e) => e.key === key);
    if (ex) void runGlobalForecast(ex.states);
  }
});

el("merge-btn").addEventListener("click", async () => {
  const picked = session.selectedStateStrings();
  if (!picked.length) {
    el("merge-error").innerHTML = renderError("select at least one example to merge");
    return;
  }
  try {
    const merged = await client.merge(picked);
    el("merge-error").innerHTML = "";
    await setRegex(merged.regex, true);
  } catch (err) {
    showError("merge-error", err);
  }
});

// ── Example creation ────────────────────────────────────────────────────────

function showReference(): void {
  if (session.reference) {
    el("table-host").innerHTML = renderTable(session.reference.table);
    (el<HTMLInputElement>("example-id")).value = String(session.reference.id);
  }
}

el("load-btn").addEventListener("click", async () => {
  try {
    session.reference = await client.example(Number((el<HTMLInputElement>("example-id")).value));
    showReference();
  } catch (err) {
    showError("table-host", err);
  }
});

el("random-btn").addEventListener("click", async () => {
  try {
    const resp = await client.sample(1, Math.floor(Math.random() * 1e6));
    session.reference = resp.examples[0];
    showReference();
  } catch (err) {
    showError("table-host", err);
  }
});

el("infer-btn").addEventListener("click", async () => {
  if (!session.reference) {
    el("infer-host").innerHTML = renderError("load an input first");
    return;
  }
  const text = (el<HTMLInputElement>("manual-text")).value.trim();
  if (!text) return;
  try {
    const resp = await client.infer(session.reference.table, text);
    const titles = resp.confidence.map((c) => `confidence ${(100 * c).toFixed(1)}%`);
    el("infer-host").innerHTML = renderTokens(resp.tokens, resp.states, titles);
    session.collect(resp.tokens.join(" "), resp.states, "human");
    redrawExamples();
  } catch (err) {
    showError("infer-host", err);
  }
});

function showGeneration(result: GenerationJson): void {
  el("generate-host").innerHTML = renderTokens(result.tokens, result.states);
  lastTree = result.tree ?? null;
  el("tree-host").innerHTML = lastTree ? renderBeamTree(lastTree) : "";
  session.collect(result.tokens.join(" "), result.states, "model");
  redrawExamples();
}

el("generate-btn").addEventListener("click", async () => {
  if (!session.reference) {
    el("generate-host").innerHTML = renderError("load an input first");
    return;
  }
  const useConstraint = (el<HTMLInputElement>("use-constraint")).checked;
  lastGenTable = session.reference.table;
  lastGenConstraint = useConstraint && session.constraint ? session.constraint.regex : null;
  try {
    const result = await client.generate({
      table: lastGenTable,
      constraint: lastGenConstraint,
      tree: (el<HTMLInputElement>("capture-tree")).checked,
    });
    showGeneration(result);
  } catch (err) {
    showError("generate-host", err);
  }
});

el("tree-host").addEventListener("click", async (ev) => {
  const nodeEl = (ev.target as HTMLElement).closest<HTMLElement>("[data-path]");
  if (!nodeEl || !lastTree || !lastGenTable) return;
  const path = nodeEl.dataset.path === "" ? [] : nodeEl.dataset.path!.split(".").map(Number);
  try {
    const prefix = forcedPrefixFromPath(lastTree, path);
    const result = await client.generate({
      table: lastGenTable,
      constraint: lastGenConstraint,
      forced_prefix: prefix,
      tree: true,
    });
    showGeneration(result);
  } catch (err) {
    showError("generate-host", err);
  }
});

// ── Global forecast ─────────────────────────────────────────────────────────

async function runGlobalForecast(constraint: string | null): Promise<void> {
  const n = Number((el<HTMLInputElement>("fc-n")).value) || 20;
  const seed = Number((el<HTMLInputElement>("fc-seed")).value) || 0;
  const seq = globalGate.issue();
  try {
    const resp = await client.forecastGlobal(constraint, n, seed);
    if (!globalGate.accept(seq)) return; // a newer run already landed
    session.forecast = resp;
    globalLetters = new Set();
    el("fc-error").innerHTML = "";
    el("heatmap-host").innerHTML = renderHeatmap(resp.heatmap);
    el("tuples-host").innerHTML = renderTuples(resp.tuples, globalLetters);
  } catch (err) {
    if (globalGate.accept(seq)) showError("fc-error", err);
  }
}

el("fc-run").addEventListener("click", () => {
  const use = (el<HTMLInputElement>("fc-use-constraint")).checked;
  void runGlobalForecast(use && session.constraint ? session.constraint.regex : null);
});

el("tuples-host").addEventListener("click", (ev) => {
  const row = (ev.target as HTMLElement).closest<HTMLElement>("[data-tuple]");
  if (!row || !session.forecast) return;
  const i = Number(row.dataset.tuple);
  if (globalLetters.has(i)) globalLetters.delete(i);
  else globalLetters.add(i);
  el("tuples-host").innerHTML = renderTuples(session.forecast.tuples, globalLetters);
});

// ── Range forecast ──────────────────────────────────────────────────────────

function parseRangeSpec(text: string): Record<string, string[]> {
  const ranges: Record<string, string[]> = {};
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const colon = line.indexOf(":");
    if (colon < 0) throw new RangeError(`expected "field: value | value", got ${JSON.stringify(line)}`);
    const name = line.slice(0, colon).trim();
    const values = line
      .slice(colon + 1)
      .split("|")
      .map((v) => v.trim())
      .filter(Boolean);
    if (!name || !values.length) throw new RangeError(`no values for field ${JSON.stringify(name)}`);
    ranges[name] = values;
  }
  return ranges;
}

el("range-run").addEventListener("click", async () => {
  if (!session.reference) {
    el("range-error").innerHTML = renderError("load an input first");
    return;
  }
  const seq = rangeGate.issue();
  try {
    const ranges = parseRangeSpec((el<HTMLTextAreaElement>("range-spec")).value);
    const constraint = session.constraint ? session.constraint.regex : null;
    const resp = await client.forecastRange(session.reference.table, ranges, constraint);
    if (!rangeGate.accept(seq)) return;
    lastRange = resp.tuples;
    rangeLetters = new Set();
    el("range-error").innerHTML = "";
    el("range-host").innerHTML = renderTuples(resp.tuples, rangeLetters);
  } catch (err) {
    if (rangeGate.accept(seq)) showError("range-error", err);
  }
});

el("range-host").addEventListener("click", (ev) => {
  const row = (ev.target as HTMLElement).closest<HTMLElement>("[data-tuple]");
  if (!row || !lastRange) return;
  const i = Number(row.dataset.tuple);
  if (rangeLetters.has(i)) rangeLetters.delete(i);
  else rangeLetters.add(i);
  el("range-host").innerHTML = renderTuples(lastRange, rangeLetters);
});

// ── Alignment ───────────────────────────────────────────────────────────────

el("align-run").addEventListener("click", async () => {
  try {
    const resp = await client.align(Number((el<HTMLInputElement>("align-n")).value) || 50);
    el("align-host").innerHTML = renderAlignment(resp);
  } catch (err) {
    showError("align-host", err);
  }
});

// ── Boot ────────────────────────────────────────────────────────────────────

function fillLetterPick(): void {
  const pick = el<HTMLSelectElement>("letter-pick");
  const options = [];
  for (let i = 0; i < 26; i++) {
    options.push(`<option value="${letterFor(i)}">${letterFor(i)}</option>`);
  }
  options.push(`<option value=".">· any</option>`);
  pick.innerHTML = options.join("");
}

async function boot(): Promise<void> {
  el("api-base-note").textContent = apiBase ? `api: ${apiBase}` : "";
  fillLetterPick();
  try {
    session.reference = await client.example(0);
    showReference();
  } catch (err) {
    showError("table-host", err);
  }
  try {
    await refreshHistory();
  } catch {
    // history is cosmetic at boot; the panel stays empty on failure
  }
}

void boot();
