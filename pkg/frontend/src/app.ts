/**
 * The debugger page: wires controls to the protocol client and re-renders
 * every pane from the latest server snapshot. The view holds no machine
 * state of its own beyond that snapshot and the breakpoint list.
 */

import {
  BreakTarget,
  ChartEdge,
  DebugClient,
  MachineState,
  ProtocolMismatchError,
} from "./protocol.js";
import {
  renderChart,
  renderDisasm,
  renderEdgeDetail,
  renderHeap,
  renderRegisters,
  renderStatus,
} from "./views.js";

export class SessionView {
  client: DebugClient;
  root: HTMLElement;
  state: MachineState | null = null;
  breakpoints: BreakTarget[] = [];
  private banner: HTMLElement;
  private panes: Record<string, HTMLElement> = {};

  constructor(client: DebugClient, root: HTMLElement) {
    this.client = client;
    this.root = root;
    this.banner = document.createElement("div");
    this.banner.className = "banner hidden";
    root.appendChild(this.banner);
    client.onConnectionChange = (s) => {
      this.banner.textContent =
        s === "disconnected" ? "connection lost - retrying" : "";
      this.banner.className = s === "disconnected" ? "banner" : "banner hidden";
      if (s === "disconnected") this.scheduleReconnect();
    };
    for (const name of ["status", "controls", "chart", "registers", "disasm", "heap", "detail"]) {
      const pane = document.createElement("div");
      pane.id = `pane-${name}`;
      root.appendChild(pane);
      this.panes[name] = pane;
    }
    this.renderControls();
  }

  private scheduleReconnect() {
    setTimeout(async () => {
      try {
        await this.client.meta();
        await this.refresh();
      } catch (e) {
        if (e instanceof ProtocolMismatchError) throw e;
        // still down: the connection-change hook re-schedules
      }
    }, 1000);
  }

  private renderControls() {
    const pane = this.panes["controls"];
    pane.innerHTML = "";
    const mk = (label: string, fn: () => void) => {
      const b = document.createElement("button");
      b.textContent = label;
      b.id = `btn-${label}`;
      b.addEventListener("click", fn);
      pane.appendChild(b);
    };
    mk("step", () => void this.step());
    mk("run", () => void this.run());
    const input = document.createElement("input");
    input.id = "words";
    input.placeholder = "every boy sleeps";
    pane.appendChild(input);
    mk("init", () => void this.initParse(input.value.trim().split(/\s+/)));
  }

  async connect(): Promise<void> {
    const meta = await this.client.meta();
    void meta;
    await this.client.connect();
  }

  async initParse(words: string[]): Promise<void> {
    this.state = await this.client.init({ task: "parse", words });
    await this.refresh();
  }

  async initGenerate(sem: string): Promise<void> {
    this.state = await this.client.init({ task: "generate", sem });
    await this.refresh();
  }

  async step(count = 1): Promise<void> {
    this.state = await this.client.step(count);
    await this.refresh();
  }

  async run(): Promise<void> {
    this.state = await this.client.run();
    await this.refresh();
  }

  async setBreakpoint(target: BreakTarget): Promise<void> {
    this.breakpoints.push(target);
    await this.client.setBreakpoint(target);
  }

  /** Step until the machine is about to execute the given opcode. */
  async stepUntilOp(op: string, cap = 10_000): Promise<boolean> {
    for (let i = 0; i < cap; i++) {
      if (this.state?.active && this.state.op === op) return true;
      if (this.state?.done) return false;
      this.state = await this.client.step(1);
    }
    return false;
  }

  async refresh(): Promise<void> {
    if (this.state === null) this.state = await this.client.state();
    const chart = await this.client.chart();
    const heap = await this.client.heap(0, 64);
    const disasm = await this.client.disasm();
    this.panes["status"].replaceChildren(renderStatus(this.state));
    this.panes["chart"].replaceChildren(
      renderChart(chart, (e) => this.showEdge(e)),
    );
    this.panes["registers"].replaceChildren(
      renderRegisters(this.state.registers),
    );
    this.panes["disasm"].replaceChildren(
      renderDisasm(disasm.lines, this.state.active ? this.state.ip : null),
    );
    this.panes["heap"].replaceChildren(renderHeap(heap));
  }

  showEdge(edge: ChartEdge): void {
    this.panes["detail"].replaceChildren(renderEdgeDetail(edge));
  }
}

export async function mount(rootId: string, serverUrl: string): Promise<SessionView> {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no element #${rootId}`);
  const view = new SessionView(new DebugClient(serverUrl), root);
  await view.connect();
  return view;
}
