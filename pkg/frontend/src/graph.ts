// Node-link constraint graphs, mirroring the server's drawing scheme so a
// locally edited graph can be turned back into regex text. The view is a DAG
// from one start node to one accept node; alternation is a fork or-junction
// whose branches reconverge on whatever node follows the group, and
// repetition is an annotation on the node it applies to, never a back edge.
//
// Every editing operation here produces a graph the server's own reader
// would accept; free-form edits that would not are rejected up front.

import type { GraphEdge, GraphJson, GraphNode, RegexAst } from "./types.js";

export const MAX_STATES = 26;

export class GraphEditError extends Error {}

interface Indexed {
  nodes: Map<number, GraphNode>;
  succ: Map<number, number[]>;
  pred: Map<number, number[]>;
  start: number;
  accept: number;
}

function cloneGraph(g: GraphJson): GraphJson {
  return {
    nodes: g.nodes.map((n) => ({ ...n })),
    edges: g.edges.map((e) => ({ ...e })),
  };
}

// ── Validation ──────────────────────────────────────────────────────────────

export function indexGraph(g: GraphJson): Indexed {
  const nodes = new Map<number, GraphNode>();
  for (const n of g.nodes) {
    if (typeof n.id !== "number" || !n.kind) {
      throw new GraphEditError(`node missing id/kind: ${JSON.stringify(n)}`);
    }
    if (nodes.has(n.id)) {
      throw new GraphEditError(`duplicate node id ${n.id}`);
    }
    if (!["start", "accept", "state-literal", "wildcard", "or-junction"].includes(n.kind)) {
      throw new GraphEditError(`unknown node kind ${JSON.stringify(n.kind)}`);
    }
    if (n.kind === "state-literal") {
      const s = n.state;
      if (!Number.isInteger(s) || (s as number) < 0 || (s as number) >= MAX_STATES) {
        throw new GraphEditError(`state-literal node ${n.id} needs a state below ${MAX_STATES}`);
      }
    }
    if (n.repeat !== undefined && n.repeat !== "star" && n.repeat !== "plus") {
      throw new GraphEditError(`bad repeat annotation on node ${n.id}`);
    }
    nodes.set(n.id, n);
  }

  const starts = [...nodes.values()].filter((n) => n.kind === "start");
  const accepts = [...nodes.values()].filter((n) => n.kind === "accept");
  if (starts.length !== 1 || accepts.length !== 1) {
    throw new GraphEditError("graph needs exactly one start and one accept node");
  }

  const succ = new Map<number, number[]>();
  const pred = new Map<number, number[]>();
  for (const id of nodes.keys()) {
    succ.set(id, []);
    pred.set(id, []);
  }
  for (const e of g.edges) {
    if (!nodes.has(e.from) || !nodes.has(e.to)) {
      throw new GraphEditError(`dangling edge (${e.from}, ${e.to})`);
    }
    succ.get(e.from)!.push(e.to);
    pred.get(e.to)!.push(e.from);
  }

  const idx: Indexed = { nodes, succ, pred, start: starts[0].id, accept: accepts[0].id };
  if (pred.get(idx.start)!.length) {
    throw new GraphEditError("start node must have no incoming edges");
  }
  if (succ.get(idx.accept)!.length) {
    throw new GraphEditError("accept node must have no outgoing edges");
  }
  rejectCycles(idx);
  for (const [id, n] of nodes) {
    const outs = succ.get(id)!;
    if (id !== idx.accept && outs.length === 0) {
      throw new GraphEditError(`node ${id} is a dead end`);
    }
    if ((n.kind === "state-literal" || n.kind === "wildcard") && outs.length !== 1) {
      throw new GraphEditError(`atom node ${id} must have exactly one outgoing edge`);
    }
    if (id !== idx.start && pred.get(id)!.length === 0) {
      throw new GraphEditError(`node ${id} is unreachable from start`);
    }
    if (n.kind === "or-junction" && outs.length === 1 && (n.repeat || n.optional)) {
      throw new GraphEditError(
        `annotated junction ${id} needs at least two branches to mark the extent of the repeated group`,
      );
    }
  }
  return idx;
}

function rejectCycles(g: Indexed): void {
  // Iterative 3-color DFS; a gray-to-gray edge is a cycle.
  const color = new Map<number, number>();
  const stack: [number, number[]][] = [[g.start, [...g.succ.get(g.start)!]]];
  color.set(g.start, 1);
  while (stack.length) {
    const [node, pending] = stack[stack.length - 1];
    const next = pending.shift();
    if (next === undefined) {
      color.set(node, 2);
      stack.pop();
      continue;
    }
    const c = color.get(next) ?? 0;
    if (c === 1) {
      throw new GraphEditError("cycle outside a repeat annotation");
    }
    if (c === 0) {
      color.set(next, 1);
      stack.push([next, [...g.succ.get(next)!]]);
    }
  }
}

function succOne(g: Indexed, id: number): number {
  const outs = g.succ.get(id)!;
  if (outs.length !== 1) {
    throw new GraphEditError(`node ${id} must have exactly one outgoing edge, has ${outs.length}`);
  }
  return outs[0];
}

// ── Graph -> AST ────────────────────────────────────────────────────────────

/** Read the graph back into an AST; throws GraphEditError on malformed input. */
export function astFromGraph(g: GraphJson): RegexAst {
  const idx = indexGraph(g);
  return parseChain(idx, succOne(idx, idx.start), idx.accept);
}

function parseChain(g: Indexed, cur: number, stop: number): RegexAst {
  const parts: RegexAst[] = [];
  while (cur !== stop) {
    const node = g.nodes.get(cur)!;
    if (node.kind === "state-literal" || node.kind === "wildcard") {
      const atom: RegexAst =
        node.kind === "state-literal" ? { kind: "state", state: node.state! } : { kind: "any" };
      parts.push(annotated(atom, node));
      cur = succOne(g, cur);
    } else if (node.kind === "or-junction") {
      const join = joinOf(g, cur);
      const group = parseGroup(g, cur, join);
      if (group.kind !== "epsilon") {
        parts.push(group);
      }
      cur = join;
    } else {
      throw new GraphEditError(`unexpected ${node.kind} node ${cur} inside a chain`);
    }
  }
  if (parts.length === 0) return { kind: "epsilon" };
  if (parts.length === 1) return parts[0];
  return { kind: "concat", children: parts };
}

function parseGroup(g: Indexed, fork: number, join: number): RegexAst {
  const branches: RegexAst[] = g.succ
    .get(fork)!
    .map((head) => (head === join ? { kind: "epsilon" } : parseChain(g, head, join)));
  const solid = branches.filter((b) => b.kind !== "epsilon");
  const hasEps = solid.length !== branches.length;
  let inner: RegexAst;
  if (solid.length === 0) {
    inner = { kind: "epsilon" };
  } else if (solid.length === 1) {
    inner = solid[0];
  } else {
    inner = { kind: "or", children: solid };
  }
  if (hasEps && solid.length) {
    inner = { kind: "optional", child: inner };
  }
  return annotated(inner, g.nodes.get(fork)!);
}

function annotated(inner: RegexAst, node: GraphNode): RegexAst {
  if (inner.kind === "epsilon") return inner;
  if (node.repeat === "star") {
    inner = { kind: "star", child: inner };
  } else if (node.repeat === "plus") {
    inner = { kind: "plus", child: inner };
  }
  // X* already accepts the empty sequence, no point wrapping it again.
  if (node.optional && inner.kind !== "star") {
    inner = { kind: "optional", child: inner };
  }
  return inner;
}

/** Reconvergence point of a fork: the nearest node every path from the fork
 * to accept passes through. */
function joinOf(g: Indexed, fork: number): number {
  const doms = [...g.nodes.keys()].filter((n) => n !== fork && postdominates(g, fork, n));
  if (!doms.length) {
    throw new GraphEditError(`branches of fork junction ${fork} never reconverge`);
  }
  for (const d of doms) {
    if (doms.every((other) => other === d || postdominates(g, d, other))) {
      return d;
    }
  }
  throw new GraphEditError(`cannot find the reconvergence of fork junction ${fork}`);
}

function postdominates(g: Indexed, src: number, via: number): boolean {
  // True if removing `via` makes accept unreachable from `src`.
  if (src === via || src === g.accept) return false;
  const seen = new Set([src]);
  const stack = [src];
  while (stack.length) {
    const n = stack.pop()!;
    if (n === g.accept) return false;
    for (const t of g.succ.get(n)!) {
      if (t !== via && !seen.has(t)) {
        seen.add(t);
        stack.push(t);
      }
    }
  }
  return true;
}

// ── Editing operations ──────────────────────────────────────────────────────
// Every operation validates its input, returns a fresh graph, and leaves the
// argument untouched. Parallel edges are deliberately kept as they are: an
// annotated junction counts branches by outgoing edges, so collapsing
// duplicates could strip a repeat group of its extent marker.

function nextId(g: GraphJson): number {
  return g.nodes.reduce((m, n) => Math.max(m, n.id), -1) + 1;
}

/** Splice a new atom into the middle of an existing edge. */
export function insertAtomOnEdge(
  g: GraphJson,
  edgeIndex: number,
  atom: { state: number } | "wildcard",
): GraphJson {
  indexGraph(g);
  if (edgeIndex < 0 || edgeIndex >= g.edges.length) {
    throw new GraphEditError(`no edge at index ${edgeIndex}`);
  }
  const out = cloneGraph(g);
  const { from, to } = out.edges[edgeIndex];
  const id = nextId(out);
  out.nodes.push(
    atom === "wildcard"
      ? { id, kind: "wildcard" }
      : { id, kind: "state-literal", state: atom.state },
  );
  // Replacing in place keeps the edge's rank, and with it the branch order
  // of any fork this edge leaves from.
  out.edges[edgeIndex] = { from, to: id };
  out.edges.push({ from: id, to });
  indexGraph(out);
  return out;
}

/** Remove a node. Atoms splice out of their chain; deleting an or-junction
 * removes the whole group it opens. Start and accept are not deletable. */
export function deleteNode(g: GraphJson, nodeId: number): GraphJson {
  const idx = indexGraph(g);
  const node = idx.nodes.get(nodeId);
  if (!node) throw new GraphEditError(`no node ${nodeId}`);
  if (node.kind === "start" || node.kind === "accept") {
    throw new GraphEditError(`cannot delete the ${node.kind} node`);
  }

  const out = cloneGraph(g);
  if (node.kind === "or-junction") {
    const join = joinOf(idx, nodeId);
    // Everything reachable from the fork without crossing the join is the
    // group's interior, nested forks included.
    const doomed = new Set([nodeId]);
    const stack = [nodeId];
    while (stack.length) {
      for (const t of idx.succ.get(stack.pop()!)!) {
        if (t !== join && !doomed.has(t)) {
          doomed.add(t);
          stack.push(t);
        }
      }
    }
    out.edges = out.edges
      .map((e) => (e.to === nodeId ? { from: e.from, to: join } : e))
      .filter((e) => !doomed.has(e.from) && !doomed.has(e.to));
    out.nodes = out.nodes.filter((n) => !doomed.has(n.id));
  } else {
    const after = succOne(idx, nodeId);
    out.edges = out.edges
      .filter((e) => e.from !== nodeId)
      .map((e) => (e.to === nodeId ? { from: e.from, to: after } : e));
    out.nodes = out.nodes.filter((n) => n.id !== nodeId);
  }
  indexGraph(out);
  return out;
}

export function setLiteralState(g: GraphJson, nodeId: number, state: number): GraphJson {
  indexGraph(g);
  const out = cloneGraph(g);
  const node = out.nodes.find((n) => n.id === nodeId);
  if (!node || node.kind !== "state-literal") {
    throw new GraphEditError(`node ${nodeId} is not a state-literal`);
  }
  node.state = state;
  indexGraph(out);
  return out;
}

function annotatable(g: GraphJson, nodeId: number): GraphNode {
  const idx = indexGraph(g);
  const node = idx.nodes.get(nodeId);
  if (!node) throw new GraphEditError(`no node ${nodeId}`);
  if (node.kind === "start" || node.kind === "accept") {
    throw new GraphEditError(`${node.kind} node cannot carry annotations`);
  }
  if (node.kind === "or-junction" && idx.succ.get(nodeId)!.length < 2) {
    throw new GraphEditError(
      `junction ${nodeId} needs at least two branches before it can be annotated`,
    );
  }
  return node;
}

export function toggleOptional(g: GraphJson, nodeId: number): GraphJson {
  annotatable(g, nodeId);
  const out = cloneGraph(g);
  const node = out.nodes.find((n) => n.id === nodeId)!;
  if (node.optional) {
    delete node.optional;
  } else {
    node.optional = true;
  }
  indexGraph(out);
  return out;
}

export function setRepeat(g: GraphJson, nodeId: number, repeat: "star" | "plus" | null): GraphJson {
  if (repeat !== null) annotatable(g, nodeId);
  const out = cloneGraph(g);
  const node = out.nodes.find((n) => n.id === nodeId);
  if (!node) throw new GraphEditError(`no node ${nodeId}`);
  if (repeat === null) {
    delete node.repeat;
  } else {
    node.repeat = repeat;
  }
  indexGraph(out);
  return out;
}

export function cycleRepeat(g: GraphJson, nodeId: number): GraphJson {
  const node = annotatable(g, nodeId);
  const next = node.repeat === undefined ? "star" : node.repeat === "star" ? "plus" : null;
  return setRepeat(g, nodeId, next);
}

/** Add one more branch to an existing or-junction, either a fresh literal
 * or an empty branch straight to the reconvergence node. */
export function addBranch(g: GraphJson, forkId: number, state: number | null): GraphJson {
  const idx = indexGraph(g);
  const node = idx.nodes.get(forkId);
  if (!node || node.kind !== "or-junction") {
    throw new GraphEditError(`node ${forkId} is not an or-junction`);
  }
  const join = joinOf(idx, forkId);
  const out = cloneGraph(g);
  if (state === null) {
    out.edges.push({ from: forkId, to: join });
  } else {
    const id = nextId(out);
    out.nodes.push({ id, kind: "state-literal", state });
    out.edges.push({ from: forkId, to: id });
    out.edges.push({ from: id, to: join });
  }
  indexGraph(out);
  return out;
}

/** Replace an atom with a two-branch junction: the atom itself plus an
 * alternative literal. The atom keeps its own annotations; the new fork
 * starts bare. */
export function forkAtom(g: GraphJson, nodeId: number, state: number): GraphJson {
  const idx = indexGraph(g);
  const node = idx.nodes.get(nodeId);
  if (!node || (node.kind !== "state-literal" && node.kind !== "wildcard")) {
    throw new GraphEditError(`node ${nodeId} is not an atom`);
  }
  const after = succOne(idx, nodeId);
  const out = cloneGraph(g);
  const forkId = nextId(out);
  const altId = forkId + 1;
  out.nodes.push({ id: forkId, kind: "or-junction" });
  out.nodes.push({ id: altId, kind: "state-literal", state });
  out.edges = out.edges.map((e) => (e.to === nodeId ? { from: e.from, to: forkId } : e));
  out.edges.push({ from: forkId, to: nodeId });
  out.edges.push({ from: forkId, to: altId });
  out.edges.push({ from: altId, to: after });
  indexGraph(out);
  return out;
}
