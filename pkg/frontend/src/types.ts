// Wire types for the generation server's JSON API. Shapes here mirror the
// server's serializers field for field; anything the client does not
// interpret (dfa_summary, ast) stays opaque and is only compared or
// forwarded verbatim.

export interface TableJson {
  fields: [string, string][];
  schema_id?: string;
}

export interface ExampleJson {
  id: number;
  table: TableJson;
  text: string;
  // Control states as capital letters, one per token ("FFJKECT").
  states?: string;
}

export interface SampleResponse {
  examples: ExampleJson[];
}

// One node of the captured beam-expansion tree. "state" nodes carry a
// letter in sym, "word" nodes a vocabulary token ("$" marks the stop step).
export interface TreeNode {
  sym: string;
  kind: "word" | "state";
  lp: number;
  on_beam: boolean;
  children: TreeNode[];
}

export interface GenerationJson {
  tokens: string[];
  text: string;
  states: string;
  logprob: number;
  step_logprobs: number[];
  truncated: boolean;
  tree?: TreeNode;
}

export interface GenerateRequest {
  table: TableJson;
  constraint?: string | null;
  // [state letter, token] pairs accepted as forced decode steps.
  forced_prefix?: [string, string][] | null;
  beam?: number;
  max_len?: number;
  tree?: boolean;
}

export interface InferResponse {
  tokens: string[];
  states: string;
  confidence: number[];
}

export type NodeKind = "start" | "accept" | "state-literal" | "wildcard" | "or-junction";

export interface GraphNode {
  id: number;
  kind: NodeKind;
  state?: number;
  repeat?: "star" | "plus";
  optional?: boolean;
}

export interface GraphEdge {
  from: number;
  to: number;
}

export interface GraphJson {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export type RegexAst =
  | { kind: "epsilon" }
  | { kind: "state"; state: number; letter?: string }
  | { kind: "any" }
  | { kind: "concat"; children: RegexAst[] }
  | { kind: "or"; children: RegexAst[] }
  | { kind: "star"; child: RegexAst }
  | { kind: "plus"; child: RegexAst }
  | { kind: "optional"; child: RegexAst };

// Canonical minimal automaton; JSON equality is language equality, which is
// the whole reason the client never needs to interpret it.
export interface DfaSummary {
  k: number;
  states: number;
  start: number;
  accepting: number[];
  delta: number[][];
}

export interface ParseResponse {
  ast: RegexAst;
  graph: GraphJson;
  dfa_summary: DfaSummary;
}

export interface MergeResponse {
  regex: string;
  graph: GraphJson;
}

export interface HistoryEntry {
  timestamp: number;
  regex: string;
}

export interface HistoryPostResponse extends HistoryEntry {
  index: number;
}

export interface ForecastTupleJson {
  table: TableJson;
  feasible: boolean;
  result?: GenerationJson;
}

export interface HeatmapJson {
  // counts[t][z]: outputs whose t-th token carries state z.
  counts: number[][];
  max_len: number;
}

export interface GlobalForecastResponse {
  tuples: ForecastTupleJson[];
  heatmap: HeatmapJson;
}

export interface RangeForecastResponse {
  tuples: ForecastTupleJson[];
}

export interface AlignmentStateJson {
  state: string;
  fields: [string, number][];
  tokens: [string, number][];
}

export interface AlignmentResponse {
  states: AlignmentStateJson[];
}

export interface ExportResponse {
  bundle_path: string;
}
