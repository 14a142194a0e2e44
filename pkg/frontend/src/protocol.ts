/**
 * Debug protocol client (version 1).
 *
 * Mirrors docs/protocol.md on the server side. The client is the ONLY
 * channel through which the UI touches machine state: every request passes
 * through `request()`, which records an audit entry, so tests can verify
 * that no message types beyond the documented ones are ever used.
 *
 * A protocol version mismatch (HTTP 409) is a hard error. Network failures
 * flip the connection state to "disconnected" and notify the owner, which
 * shows a banner and retries.
 */

export const PROTOCOL_VERSION = 1;

// -- wire types -------------------------------------------------------------

export interface FSNode {
  tag?: number;
  type: string;
  feats: Record<string, FSValue>;
}

export interface FSRef {
  ref: number;
}

export type FSValue = FSNode | FSRef;

export function isRef(v: FSValue): v is FSRef {
  return (v as FSRef).ref !== undefined;
}

export interface RegisterRow {
  reg: number;
  ref: number;
  type: string;
  kind: string;
}

export interface ResultRow {
  from: number;
  to: number;
  fs: FSNode;
}

export interface BreakHit {
  kind: "offset" | "rule" | "op";
  offset: number;
  op?: string;
  rule?: number;
}

export interface MachineState {
  initialized: boolean;
  active: boolean;
  ip: number | null;
  op: string | null;
  rule: number | null;
  rule_name: string | null;
  dot: number | null;
  done: boolean;
  steps: number;
  counters: { edges: number; attempts: number; failures: number };
  registers: RegisterRow[];
  results: ResultRow[];
  hit: BreakHit | null;
  error: string | null;
}

export interface ChartEdge {
  id: number;
  kind: "complete" | "active";
  from: number;
  to: number;
  rule: number;
  init?: boolean;
  dot?: number;
  needed?: number;
  fs?: FSNode;
}

export interface ChartSnapshot {
  n: number;
  edges: ChartEdge[];
  counters?: Record<string, number>;
}

export interface HeapCell {
  i: number;
  kind: "node" | "ref" | "unexpanded";
  type: string | null;
  target: number | null;
  arcs: number[] | null;
}

export interface HeapWindow {
  cells: HeapCell[];
  mark: number;
  size: number;
}

export interface DisasmLine {
  offset: number;
  text: string;
  rule: string | null;
}

export type ConnectionState = "connected" | "disconnected";

export type InitRequest =
  | { task: "parse"; words: string[] }
  | { task: "generate"; sem: string };

export type BreakTarget =
  | { offset: number }
  | { rule: string | number }
  | { op: string };

export interface AuditEntry {
  method: string;
  kind: string; // the protocol message type, e.g. "init", "step", "chart"
}

export class ProtocolMismatchError extends Error {
  constructor(server: unknown) {
    super(`debug protocol version mismatch (server: ${JSON.stringify(server)})`);
    this.name = "ProtocolMismatchError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DebugClient {
  readonly base: string;
  readonly audit: AuditEntry[] = [];
  onConnectionChange: (s: ConnectionState) => void = () => {};
  private fetchImpl: FetchLike;
  private connection: ConnectionState = "connected";
  private session: string | null = null;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((u, i) => fetch(u, i));
  }

  get connectionState(): ConnectionState {
    return this.connection;
  }

  get sessionId(): string | null {
    return this.session;
  }

  private setConnection(s: ConnectionState) {
    if (s !== this.connection) {
      this.connection = s;
      this.onConnectionChange(s);
    }
  }

  private async request<T>(
    method: string,
    path: string,
    kind: string,
    body?: unknown,
  ): Promise<T> {
    this.audit.push({ method, kind });
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.base + path, {
        method,
        headers: {
          "Content-Type": "application/json",
          "X-Debug-Protocol": String(PROTOCOL_VERSION),
        },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (e) {
      this.setConnection("disconnected");
      throw e;
    }
    if (resp.status === 409) {
      // wrong protocol: not a connectivity problem, a hard error
      throw new ProtocolMismatchError(await resp.json());
    }
    if (!resp.ok) {
      const err = await resp.json().catch(() => ({}));
      throw new Error(`${kind}: ${(err as { error?: string }).error ?? resp.status}`);
    }
    this.setConnection("connected");
    return (await resp.json()) as T;
  }

  // -- the protocol's message types, and nothing else ------------------------

  async meta(): Promise<{ protocol: number; can_generate: boolean }> {
    return this.request("GET", "/api/v1/meta", "meta");
  }

  async connect(): Promise<string> {
    const r = await this.request<{ protocol: number; session: string }>(
      "POST",
      "/api/v1/session",
      "session",
      {},
    );
    if (r.protocol !== PROTOCOL_VERSION) {
      throw new ProtocolMismatchError(r.protocol);
    }
    this.session = r.session;
    return r.session;
  }

  private sess(): string {
    if (!this.session) throw new Error("not connected");
    return `/api/v1/session/${this.session}`;
  }

  async init(req: InitRequest): Promise<MachineState> {
    return this.request("POST", `${this.sess()}/init`, "init", req);
  }

  async step(count = 1): Promise<MachineState> {
    return this.request("POST", `${this.sess()}/step`, "step", { count });
  }

  async run(): Promise<MachineState> {
    return this.request("POST", `${this.sess()}/run`, "run", {});
  }

  async setBreakpoint(target: BreakTarget): Promise<unknown> {
    return this.request("POST", `${this.sess()}/break`, "break", target);
  }

  async state(): Promise<MachineState> {
    return this.request("GET", `${this.sess()}/state`, "state");
  }

  async chart(): Promise<ChartSnapshot> {
    return this.request("GET", `${this.sess()}/chart`, "chart");
  }

  async heap(from: number, to: number): Promise<HeapWindow> {
    return this.request(
      "GET",
      `${this.sess()}/heap?from=${from}&to=${to}`,
      "heap",
    );
  }

  async disasm(): Promise<{ lines: DisasmLine[] }> {
    return this.request("GET", `${this.sess()}/disasm`, "disasm");
  }
}

/** The message types the UI is allowed to send; audited in tests. */
export const ALLOWED_MESSAGE_KINDS = new Set([
  "meta",
  "session",
  "init",
  "step",
  "run",
  "break",
  "state",
  "chart",
  "heap",
  "disasm",
]);
