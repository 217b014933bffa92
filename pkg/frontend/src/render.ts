// HTML and SVG fragment builders. All pure string functions so the display
// logic can be exercised without a browser; event wiring happens elsewhere
// through data-* attributes these fragments carry.

import { colorFor, letterFor } from "./palette.js";
import { indexGraph } from "./graph.js";
import type {
  AlignmentResponse,
  ForecastTupleJson,
  GraphJson,
  HeatmapJson,
  HistoryEntry,
  TableJson,
  TreeNode,
} from "./types.js";
import type { CollectedExample } from "./session.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const ORIGIN_MARK: Record<string, string> = { human: "✎", model: "⚙" };

// ── Tokens under control states ─────────────────────────────────────────────

/**
 * One span per token, underlined in its state's color with the state letter
 * beneath. The letter is always present; the color is a bonus for the first
 * twenty states.
 */
export function renderTokens(tokens: string[], states: string, titles?: string[]): string {
  const parts = tokens.map((tok, i) => {
    const letter = states[i] ?? "?";
    const color = letter >= "A" && letter <= "Z" ? colorFor(letter.charCodeAt(0) - 65) : null;
    const underline = color ? ` style="border-bottom-color:${color}"` : "";
    const tint = color ? ` style="color:${color}"` : "";
    const title = titles?.[i] ? ` title="${escapeHtml(titles[i])}"` : "";
    return (
      `<span class="tok" data-state="${letter}"${title}>` +
      `<span class="tok-text"${underline}>${escapeHtml(tok)}</span>` +
      `<span class="tok-letter"${tint}>${letter}</span></span>`
    );
  });
  return `<span class="tok-row">${parts.join("")}</span>`;
}

export function renderTable(table: TableJson): string {
  const rows = table.fields
    .map(([name, value]) => `<tr><th>${escapeHtml(name)}</th><td>${escapeHtml(value)}</td></tr>`)
    .join("");
  return `<table class="fields">${rows}</table>`;
}

export function renderError(detail: string): string {
  return `<div class="error">${escapeHtml(detail)}</div>`;
}

export function renderOverConstraint(detail: string): string {
  return `<div class="warn">Over-constrained: no feasible output. ${escapeHtml(detail)}</div>`;
}

// ── Refine-by-example ───────────────────────────────────────────────────────

export function renderExampleRow(ex: CollectedExample): string {
  const tokens = ex.text.split(" ");
  return (
    `<div class="example-row" data-key="${ex.key}">` +
    `<input type="checkbox" data-act="select" ${ex.selected ? "checked" : ""}>` +
    renderTokens(tokens, ex.states) +
    `<span class="origin" title="${ex.origin}">${ORIGIN_MARK[ex.origin]}</span>` +
    `<button data-act="to-editor">to editor</button>` +
    `<button data-act="forecast">forecast</button>` +
    `<button data-act="drop">×</button></div>`
  );
}

export function renderHistory(entries: HistoryEntry[]): string {
  if (!entries.length) return `<div class="empty">no history yet</div>`;
  const items = entries
    .map(
      (e, i) =>
        `<li data-index="${i}"><code>${escapeHtml(e.regex)}</code>` +
        `<span class="stamp">${new Date(e.timestamp * 1000).toLocaleTimeString()}</span></li>`,
    )
    .join("");
  return `<ol class="history">${items}</ol>`;
}

// ── Forecast views ──────────────────────────────────────────────────────────

/** Tuple rows; clicking one toggles the state letters, so each row carries
 * its index and a letters-on/off class. Infeasible tuples become warnings. */
export function renderTuples(tuples: ForecastTupleJson[], lettersOn: Set<number>): string {
  const rows = tuples.map((t, i) => {
    const table = t.table.fields.map(([n, v]) => `${n}=${v}`).join(", ");
    if (!t.feasible) {
      return (
        `<div class="tuple warn" data-tuple="${i}">` +
        `<span class="tuple-table">${escapeHtml(table)}</span>` +
        `<span class="tuple-warn">over-constrained: no feasible output</span></div>`
      );
    }
    const r = t.result!;
    const cls = lettersOn.has(i) ? "tuple letters-on" : "tuple letters-off";
    return (
      `<div class="${cls}" data-tuple="${i}">` +
      `<span class="tuple-table">${escapeHtml(table)}</span>` +
      renderTokens(r.tokens, r.states) +
      `<span class="lp">${r.logprob.toFixed(2)}</span></div>`
    );
  });
  return rows.join("");
}

/** Position-by-state strip; cell opacity scales with count. */
export function renderHeatmap(heat: HeatmapJson): string {
  const k = heat.counts[0]?.length ?? 0;
  const peak = Math.max(1, ...heat.counts.flat());
  let cells = "";
  for (let z = 0; z < k; z++) {
    const letter = letterFor(z);
    const color = colorFor(z) ?? "#555";
    const row = heat.counts
      .map((c, t) => {
        const alpha = c[z] / peak;
        return (
          `<td data-pos="${t}" data-state="${letter}" title="${letter}@${t}: ${c[z]}"` +
          ` style="background:${color};opacity:${alpha.toFixed(2)}"></td>`
        );
      })
      .join("");
    cells += `<tr><th>${letter}</th>${row}</tr>`;
  }
  return `<table class="heatmap">${cells}</table>`;
}

export function renderAlignment(align: AlignmentResponse): string {
  const blocks = align.states.map((s) => {
    const color = colorFor(s.state.charCodeAt(0) - 65) ?? "#555";
    const bars = (pairs: [string, number][]) => {
      const top = Math.max(1, ...pairs.map(([, c]) => c));
      return pairs
        .slice(0, 6)
        .map(
          ([name, c]) =>
            `<div class="bar"><span class="bar-fill" style="width:${((100 * c) / top).toFixed(0)}%;background:${color}"></span>` +
            `<span class="bar-label">${escapeHtml(name)} (${c})</span></div>`,
        )
        .join("");
    };
    return (
      `<div class="align-state"><h4><span class="chip" style="background:${color}"></span>${s.state}</h4>` +
      `<div class="align-col"><h5>fields</h5>${bars(s.fields)}</div>` +
      `<div class="align-col"><h5>tokens</h5>${bars(s.tokens)}</div></div>`
    );
  });
  return blocks.join("");
}

// ── Beam tree ───────────────────────────────────────────────────────────────

/** Nested list of the expansion tree. Every node carries its child-index
 * path from the root so a click can be mapped back to a forced prefix. */
export function renderBeamTree(root: TreeNode): string {
  const walk = (node: TreeNode, path: number[]): string => {
    const beam = node.on_beam ? "on-beam" : "off-beam";
    let label: string;
    if (node.kind === "state") {
      const z = node.sym.charCodeAt(0) - 65;
      const color = colorFor(z);
      label =
        `<span class="tree-state" ${color ? `style="background:${color}"` : ""}>` +
        `${escapeHtml(node.sym)}</span>`;
    } else {
      label = `<span class="tree-word">${escapeHtml(node.sym)}</span>`;
    }
    const kids = node.children
      .map((c, i) => `<li>${walk(c, [...path, i])}</li>`)
      .join("");
    return (
      `<span class="tree-node ${beam}" data-path="${path.join(".")}" ` +
      `title="logprob ${node.lp.toFixed(3)}">${label}</span>` +
      (kids ? `<ul>${kids}</ul>` : "")
    );
  };
  return `<div class="beam-tree"><ul><li>${walk(root, [])}</li></ul></div>`;
}

export function nodeAtPath(root: TreeNode, path: number[]): TreeNode {
  let cur = root;
  for (const i of path) {
    const next = cur.children[i];
    if (!next) throw new RangeError(`no tree node at path ${path.join(".")}`);
    cur = next;
  }
  return cur;
}

/**
 * Forced [letter, token] pairs for the decode steps leading to the clicked
 * tree node. A click on a state node adopts its most likely word child so
 * the pair is complete; the stop marker "$" never forms a pair.
 */
export function forcedPrefixFromPath(root: TreeNode, path: number[]): [string, string][] {
  const pairs: [string, string][] = [];
  let pendingState: string | null = null;
  let cur = root;
  for (const i of path) {
    const next = cur.children[i];
    if (!next) throw new RangeError(`no tree node at path ${path.join(".")}`);
    cur = next;
    if (cur.kind === "state") {
      pendingState = cur.sym;
    } else if (cur.sym !== "$") {
      if (pendingState === null) {
        throw new RangeError("word node without a preceding state node");
      }
      pairs.push([pendingState, cur.sym]);
      pendingState = null;
    }
  }
  if (pendingState !== null) {
    const words = cur.children.filter((c) => c.kind === "word" && c.sym !== "$");
    if (!words.length) {
      throw new RangeError(`state node at ${path.join(".")} has no word alternatives`);
    }
    const best = words.reduce((a, b) => (b.lp > a.lp ? b : a));
    pairs.push([pendingState, best.sym]);
  }
  return pairs;
}

// ── Constraint graph ────────────────────────────────────────────────────────

const NODE_W = 46;
const NODE_H = 30;
const COL_GAP = 104;
const ROW_GAP = 56;

/**
 * Layered drawing of the constraint graph: nodes columned by longest path
 * from start, edges as cubic curves. Interactive surfaces are data-node-id
 * on node groups and data-edge-index on edge paths.
 */
export function renderGraphSvg(graph: GraphJson, selectedId: number | null = null): string {
  const idx = indexGraph(graph);

  const layer = new Map<number, number>();
  const indeg = new Map<number, number>();
  for (const n of graph.nodes) indeg.set(n.id, idx.pred.get(n.id)!.length);
  const queue = [idx.start];
  layer.set(idx.start, 0);
  while (queue.length) {
    const n = queue.shift()!;
    for (const t of idx.succ.get(n)!) {
      layer.set(t, Math.max(layer.get(t) ?? 0, layer.get(n)! + 1));
      const left = indeg.get(t)! - 1;
      indeg.set(t, left);
      if (left === 0) queue.push(t);
    }
  }

  const rowsUsed = new Map<number, number>();
  const pos = new Map<number, { x: number; y: number }>();
  for (const n of graph.nodes) {
    const l = layer.get(n.id) ?? 0;
    const row = rowsUsed.get(l) ?? 0;
    rowsUsed.set(l, row + 1);
    pos.set(n.id, { x: 24 + l * COL_GAP, y: 24 + row * ROW_GAP });
  }

  const edges = graph.edges
    .map((e, i) => {
      const a = pos.get(e.from)!;
      const b = pos.get(e.to)!;
      const x1 = a.x + NODE_W;
      const y1 = a.y + NODE_H / 2;
      const x2 = b.x;
      const y2 = b.y + NODE_H / 2;
      const mid = (x1 + x2) / 2;
      return (
        `<path class="g-edge" data-edge-index="${i}" ` +
        `d="M ${x1} ${y1} C ${mid} ${y1}, ${mid} ${y2}, ${x2} ${y2}"/>`
      );
    })
    .join("");

  const nodes = graph.nodes
    .map((n) => {
      const p = pos.get(n.id)!;
      const sel = n.id === selectedId ? " sel" : "";
      const badge =
        (n.repeat === "star" ? "*" : n.repeat === "plus" ? "+" : "") + (n.optional ? "?" : "");
      const badgeSvg = badge
        ? `<text class="g-badge" x="${NODE_W - 4}" y="2">${badge}</text>`
        : "";
      let body: string;
      if (n.kind === "start") {
        body = `<circle class="g-start" cx="${NODE_W / 2}" cy="${NODE_H / 2}" r="11"/><text x="${NODE_W / 2}" y="${NODE_H / 2 + 4}">▶</text>`;
      } else if (n.kind === "accept") {
        body =
          `<circle class="g-accept" cx="${NODE_W / 2}" cy="${NODE_H / 2}" r="11"/>` +
          `<circle class="g-accept-inner" cx="${NODE_W / 2}" cy="${NODE_H / 2}" r="6"/>`;
      } else if (n.kind === "or-junction") {
        const c = NODE_H / 2;
        body =
          `<polygon class="g-or" points="${NODE_W / 2},0 ${NODE_W},${c} ${NODE_W / 2},${NODE_H} 0,${c}"/>` +
          `<text x="${NODE_W / 2}" y="${c + 4}">or</text>`;
      } else if (n.kind === "wildcard") {
        body =
          `<rect class="g-any" width="${NODE_W}" height="${NODE_H}" rx="6"/>` +
          `<text x="${NODE_W / 2}" y="${NODE_H / 2 + 5}">·</text>`;
      } else {
        const letter = letterFor(n.state!);
        const color = colorFor(n.state!) ?? "#777";
        body =
          `<rect class="g-lit" width="${NODE_W}" height="${NODE_H}" rx="6" style="fill:${color}"/>` +
          `<text x="${NODE_W / 2}" y="${NODE_H / 2 + 5}">${letter}</text>`;
      }
      return (
        `<g class="g-node${sel}" data-node-id="${n.id}" data-kind="${n.kind}" ` +
        `transform="translate(${p.x},${p.y})">${body}${badgeSvg}</g>`
      );
    })
    .join("");

  const width = 48 + (Math.max(0, ...layer.values()) + 1) * COL_GAP;
  const height = 48 + Math.max(1, ...rowsUsed.values()) * ROW_GAP;
  return (
    `<svg class="constraint-graph" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}">${edges}${nodes}</svg>`
  );
}
