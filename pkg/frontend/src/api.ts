// Thin typed client over the generation server. Every number and string the
// UI displays comes back from one of these calls; the client itself never
// runs model math.

import type {
  AlignmentResponse,
  ExampleJson,
  ExportResponse,
  GenerateRequest,
  GenerationJson,
  GlobalForecastResponse,
  HistoryEntry,
  HistoryPostResponse,
  InferResponse,
  MergeResponse,
  ParseResponse,
  RangeForecastResponse,
  SampleResponse,
  TableJson,
} from "./types.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiFailure extends Error {
  constructor(
    readonly code: string,
    readonly detail: string,
    readonly status: number,
  ) {
    super(`${code}: ${detail}`);
  }

  /** The decoder proved no output can satisfy the constraint. */
  get overConstraint(): boolean {
    return this.code === "no_feasible_output";
  }
}

/**
 * Orders concurrent requests of one kind. A response is only accepted when
 * no later-issued request has already landed, so a slow stale forecast can
 * never overwrite a newer one.
 */
export class SequenceGate {
  private issued = 0;
  private newest = -1;

  issue(): number {
    return this.issued++;
  }

  accept(seq: number): boolean {
    if (seq <= this.newest) return false;
    this.newest = seq;
    return true;
  }
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const payload = await resp.json();
    if (!resp.ok) {
      throw new ApiFailure(
        String(payload?.error ?? "internal"),
        String(payload?.detail ?? resp.statusText),
        resp.status,
      );
    }
    return payload as T;
  }

  example(id: number): Promise<ExampleJson> {
    return this.request("GET", `/api/example?id=${id}`);
  }

  sample(count: number, seed: number): Promise<SampleResponse> {
    return this.request("GET", `/api/sample?count=${count}&seed=${seed}`);
  }

  generate(req: GenerateRequest): Promise<GenerationJson> {
    return this.request("POST", "/api/generate", req);
  }

  infer(table: TableJson, text: string): Promise<InferResponse> {
    return this.request("POST", "/api/infer", { table, text });
  }

  parse(regex: string): Promise<ParseResponse> {
    return this.request("POST", "/api/constraint/parse", { regex });
  }

  merge(stateStrings: string[]): Promise<MergeResponse> {
    return this.request("POST", "/api/constraint/merge", { state_strings: stateStrings });
  }

  history(): Promise<{ history: HistoryEntry[] }> {
    return this.request("GET", "/api/constraint/history");
  }

  appendHistory(regex: string): Promise<HistoryPostResponse> {
    return this.request("POST", "/api/constraint/history", { regex });
  }

  forecastGlobal(
    constraint: string | null,
    n: number,
    seed: number,
    beam = 5,
    maxLen = 30,
  ): Promise<GlobalForecastResponse> {
    return this.request("POST", "/api/forecast/global", {
      constraint,
      n,
      seed,
      beam,
      max_len: maxLen,
    });
  }

  forecastRange(
    baseTable: TableJson,
    ranges: Record<string, string[]>,
    constraint: string | null,
    beam = 5,
    maxLen = 30,
  ): Promise<RangeForecastResponse> {
    return this.request("POST", "/api/forecast/range", {
      base_table: baseTable,
      ranges,
      constraint,
      beam,
      max_len: maxLen,
    });
  }

  align(n: number): Promise<AlignmentResponse> {
    return this.request("GET", `/api/align?n=${n}`);
  }

  exportBundle(constraint: string): Promise<ExportResponse> {
    return this.request("POST", "/api/export", { constraint });
  }
}
