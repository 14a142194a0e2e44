// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import { renderNode } from "../src/avm.js";
import { renderChart, renderRegisters } from "../src/views.js";
import type { ChartSnapshot, FSNode } from "../src/protocol.js";

/** Tag numbers are presentation-only: normalize before comparing. */
export function normalizeTags(html: string): string {
  const seen = new Map<string, string>();
  return html.replace(/data-tag="(\d+)">(\d+)</g, (_m, id: string) => {
    if (!seen.has(id)) seen.set(id, String(seen.size + 1));
    const n = seen.get(id);
    return `data-tag="${n}">${n}<`;
  });
}

const BOY: FSNode = {
  type: "word",
  feats: {
    syn: { type: "syn", feats: { cat: { type: "n", feats: {} } } },
    sem: {
      type: "lambda",
      feats: {
        var: { tag: 7, type: "sem", feats: {} },
        rst: {
          type: "arg_1",
          feats: { prd: { type: "boy", feats: {} }, a1: { ref: 7 } },
        },
      },
    },
  },
};

describe("attribute-value matrix rendering", () => {
  it("renders a nested structure with boxed tags deterministically", () => {
    const a = renderNode(BOY).outerHTML;
    const b = renderNode(JSON.parse(JSON.stringify(BOY))).outerHTML;
    expect(a).toBe(b);
    expect(a).toContain('class="avm-type"');
    expect(a).toContain('data-tag="7"');
    expect(a).toContain("boy");
  });

  it("matches the golden snapshot after tag normalization", () => {
    const html = normalizeTags(renderNode(BOY).outerHTML);
    const renumbered: FSNode = JSON.parse(
      JSON.stringify(BOY).replace(/"tag":7/, '"tag":12').replace(/"ref":7/, '"ref":12'),
    );
    expect(normalizeTags(renderNode(renumbered).outerHTML)).toBe(html);
    expect(html).toMatchSnapshot();
  });
});

describe("chart matrix rendering", () => {
  const snap: ChartSnapshot = {
    n: 3,
    edges: [
      { id: 0, kind: "complete", from: 0, to: 1, rule: -1, fs: { type: "word", feats: {} } },
      { id: 1, kind: "complete", from: 1, to: 2, rule: -1, fs: { type: "word", feats: {} } },
      { id: 2, kind: "complete", from: 2, to: 3, rule: -1, fs: { type: "word", feats: {} } },
      { id: 3, kind: "active", from: 0, to: 1, rule: 1, dot: 1, needed: 1 },
    ],
  };

  it("is triangular with badges in the right cells", () => {
    const dom = renderChart(snap);
    const cells = dom.querySelectorAll("td.chart-cell");
    expect(cells.length).toBe(6); // n(n+1)/2 for n=3
    const diag = dom.querySelectorAll('[data-span="0,1"] .edge-badge');
    expect(diag.length).toBe(2); // one complete + one active
    expect(dom.querySelectorAll(".edge-complete").length).toBe(3);
    expect(dom.querySelectorAll(".edge-active").length).toBe(1);
  });

  it("click on an edge invokes the detail callback", () => {
    let clicked: number | null = null;
    const dom = renderChart(snap, (e) => (clicked = e.id));
    (dom.querySelector('[data-edge="3"]') as HTMLElement).click();
    expect(clicked).toBe(3);
  });
});

describe("register pane", () => {
  it("labels registers R<n> and shows their heap cells", () => {
    const dom = renderRegisters([
      { reg: 0, ref: 10, type: "phrase", kind: "node" },
      { reg: 5, ref: 22, type: "lambda", kind: "node" },
    ]);
    const row = dom.querySelector('[data-reg="R5"]');
    expect(row).not.toBeNull();
    expect(row!.textContent).toContain("lambda");
  });
});
