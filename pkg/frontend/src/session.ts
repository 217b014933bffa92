import type {
  ExampleJson,
  GlobalForecastResponse,
  GraphJson,
  HistoryEntry,
  ParseResponse,
} from "./types.js";

export type Origin = "human" | "model";

export interface CollectedExample {
  key: number;
  text: string;
  states: string;
  origin: Origin;
  selected: boolean;
}

export interface CurrentConstraint {
  regex: string;
  graph: GraphJson;
}

/**
 * Client-side state for one editing session. The constraint is only ever
 * stored as a (regex, graph) pair taken from a single parse response, which
 * is what keeps the text and the drawing language-equivalent: every local
 * graph edit goes back through the server before it lands here.
 */
export class UiSession {
  constraint: CurrentConstraint | null = null;
  examples: CollectedExample[] = [];
  reference: ExampleJson | null = null;
  forecast: GlobalForecastResponse | null = null;
  history: HistoryEntry[] = [];
  private nextKey = 0;

  applyParse(regex: string, parsed: ParseResponse): CurrentConstraint {
    this.constraint = { regex, graph: parsed.graph };
    return this.constraint;
  }

  clearConstraint(): void {
    this.constraint = null;
  }

  collect(text: string, states: string, origin: Origin): CollectedExample {
    const ex: CollectedExample = { key: this.nextKey++, text, states, origin, selected: false };
    this.examples.push(ex);
    return ex;
  }

  toggleSelected(key: number): void {
    const ex = this.examples.find((e) => e.key === key);
    if (ex) ex.selected = !ex.selected;
  }

  selectedStateStrings(): string[] {
    return this.examples.filter((e) => e.selected).map((e) => e.states);
  }

  dropExample(key: number): void {
    this.examples = this.examples.filter((e) => e.key !== key);
  }
}
