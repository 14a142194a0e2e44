/**
 * Pane renderers. Every pane is a pure function of the last server
 * snapshot: there is no client-side simulation of machine semantics.
 */

import { renderNode } from "./avm.js";
import {
  ChartEdge,
  ChartSnapshot,
  DisasmLine,
  HeapWindow,
  MachineState,
  RegisterRow,
} from "./protocol.js";

function el(tag: string, cls: string, text?: string): HTMLElement {
  const e = document.createElement(tag);
  e.className = cls;
  if (text !== undefined) e.textContent = text;
  return e;
}

// -- chart: a triangular matrix of cells --------------------------------------

export function renderChart(
  snap: ChartSnapshot,
  onEdgeClick: (edge: ChartEdge) => void = () => {},
): HTMLElement {
  const root = el("div", "chart-pane");
  const table = el("table", "chart-grid");
  for (let frm = 0; frm < snap.n; frm++) {
    const row = document.createElement("tr");
    for (let to = 1; to <= snap.n; to++) {
      const cell = document.createElement("td");
      if (to <= frm) {
        cell.className = "chart-void";
      } else {
        cell.className = "chart-cell";
        cell.dataset.span = `${frm},${to}`;
        for (const e of snap.edges.filter((e) => e.from === frm && e.to === to)) {
          const badge = el(
            "span",
            `edge-badge edge-${e.kind}`,
            e.kind === "complete"
              ? e.fs?.type ?? "?"
              : `r${e.rule}@${e.dot}`,
          );
          badge.dataset.edge = String(e.id);
          badge.addEventListener("click", () => onEdgeClick(e));
          cell.appendChild(badge);
        }
      }
      row.appendChild(cell);
    }
    table.appendChild(row);
  }
  root.appendChild(table);
  return root;
}

export function renderEdgeDetail(edge: ChartEdge): HTMLElement {
  const root = el("div", "edge-detail");
  root.appendChild(
    el(
      "div",
      "edge-title",
      `${edge.kind} edge #${edge.id} [${edge.from},${edge.to}]` +
        (edge.kind === "active" ? ` rule ${edge.rule}, dot ${edge.dot}` : ""),
    ),
  );
  if (edge.fs) root.appendChild(renderNode(edge.fs));
  return root;
}

// -- registers ------------------------------------------------------------------

export function renderRegisters(regs: RegisterRow[]): HTMLElement {
  const root = el("div", "register-pane");
  const table = el("table", "register-table");
  const head = document.createElement("tr");
  for (const h of ["reg", "cell", "type", "kind"]) {
    head.appendChild(el("th", "reg-h", h));
  }
  table.appendChild(head);
  for (const r of regs) {
    const row = document.createElement("tr");
    row.className = "register-row";
    row.dataset.reg = `R${r.reg}`;
    row.appendChild(el("td", "reg-name", `R${r.reg}`));
    row.appendChild(el("td", "reg-ref", String(r.ref)));
    row.appendChild(el("td", "reg-type", r.type));
    row.appendChild(el("td", "reg-kind", r.kind));
    table.appendChild(row);
  }
  root.appendChild(table);
  return root;
}

// -- heap ------------------------------------------------------------------------

export function renderHeap(win: HeapWindow): HTMLElement {
  const root = el("div", "heap-pane");
  const table = el("table", "heap-table");
  for (const c of win.cells) {
    const row = document.createElement("tr");
    row.className = c.i < win.mark ? "heap-frozen" : "heap-working";
    row.appendChild(el("td", "heap-idx", String(c.i)));
    row.appendChild(el("td", "heap-kind", c.kind));
    row.appendChild(
      el(
        "td",
        "heap-detail",
        c.kind === "ref"
          ? `-> ${c.target}`
          : `${c.type}${c.arcs && c.arcs.length ? " [" + c.arcs.join(", ") + "]" : ""}`,
      ),
    );
    table.appendChild(row);
  }
  root.appendChild(table);
  root.appendChild(
    el("div", "heap-mark", `mark ${win.mark} / size ${win.size}`),
  );
  return root;
}

// -- disassembly -------------------------------------------------------------------

export function renderDisasm(lines: DisasmLine[], currentIp: number | null): HTMLElement {
  const root = el("div", "disasm-pane");
  for (const l of lines) {
    if (l.rule) root.appendChild(el("div", "disasm-rule", `; ${l.rule}`));
    const row = el(
      "div",
      l.offset === currentIp ? "disasm-line current" : "disasm-line",
      `${String(l.offset).padStart(5, "0")}  ${l.text}`,
    );
    row.dataset.offset = String(l.offset);
    root.appendChild(row);
  }
  return root;
}

// -- status line --------------------------------------------------------------------

export function renderStatus(state: MachineState): HTMLElement {
  const root = el("div", "status-pane");
  const parts: string[] = [];
  if (!state.initialized) parts.push("not initialized");
  else if (state.done) parts.push(`done: ${state.results.length} result(s)`);
  else if (state.active) {
    parts.push(`ip ${state.ip} ${state.op}`);
    if (state.rule_name) parts.push(`rule ${state.rule_name} dot ${state.dot}`);
  } else parts.push("between attempts");
  parts.push(`steps ${state.steps}`);
  if (state.hit) parts.push(`break: ${state.hit.kind}@${state.hit.offset}`);
  if (state.error) parts.push(`error: ${state.error}`);
  root.textContent = parts.join(" | ");
  return root;
}
