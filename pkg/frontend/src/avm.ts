/**
 * Attribute-value matrix rendering of the server's JSON structure schema.
 *
 * The schema is used verbatim: nodes carry a type and informative features,
 * reentrant nodes a numbered tag at first occurrence and {ref: n} after.
 * Tags render as boxed numbers. Rendering is a pure function of the input
 * object, so given one snapshot the DOM is deterministic.
 */

import { FSNode, FSValue, isRef } from "./protocol.js";

function el(tag: string, cls: string, text?: string): HTMLElement {
  const e = document.createElement(tag);
  e.className = cls;
  if (text !== undefined) e.textContent = text;
  return e;
}

function tagBox(n: number): HTMLElement {
  const b = el("span", "avm-tag", String(n));
  b.dataset.tag = String(n);
  return b;
}

export function renderValue(v: FSValue): HTMLElement {
  if (isRef(v)) {
    const wrap = el("span", "avm-ref");
    wrap.appendChild(tagBox(v.ref));
    return wrap;
  }
  return renderNode(v);
}

export function renderNode(node: FSNode): HTMLElement {
  const box = el("div", "avm-node");
  const head = el("div", "avm-head");
  if (node.tag !== undefined) head.appendChild(tagBox(node.tag));
  head.appendChild(el("span", "avm-type", node.type));
  box.appendChild(head);
  const feats = Object.keys(node.feats);
  if (feats.length) {
    const table = el("table", "avm-feats");
    for (const f of feats) {
      const row = document.createElement("tr");
      const name = document.createElement("td");
      name.className = "avm-feat-name";
      name.textContent = f;
      const val = document.createElement("td");
      val.className = "avm-feat-value";
      val.appendChild(renderValue(node.feats[f]));
      row.appendChild(name);
      row.appendChild(val);
      table.appendChild(row);
    }
    box.appendChild(table);
  }
  return box;
}
