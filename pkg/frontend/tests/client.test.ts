// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import {
  ALLOWED_MESSAGE_KINDS,
  DebugClient,
  ProtocolMismatchError,
} from "../src/protocol.js";

function fakeServer(handler: (url: string, init?: RequestInit) => unknown) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const body = handler(url, init);
    return new Response(JSON.stringify(body), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
}

const STATE = {
  initialized: true,
  active: false,
  ip: null,
  op: null,
  rule: null,
  rule_name: null,
  dot: null,
  done: false,
  steps: 0,
  counters: { edges: 0, attempts: 0, failures: 0 },
  registers: [],
  results: [],
  hit: null,
  error: null,
};

describe("protocol client", () => {
  it("sends only documented message types (audited)", async () => {
    const c = new DebugClient(
      "http://x",
      fakeServer((url) => {
        if (url.endsWith("/api/v1/session")) return { protocol: 1, session: "s" };
        if (url.includes("/chart")) return { n: 0, edges: [] };
        if (url.includes("/heap")) return { cells: [], mark: 0, size: 0 };
        if (url.includes("/disasm")) return { lines: [] };
        if (url.includes("/meta")) return { protocol: 1, can_generate: true };
        return STATE;
      }),
    );
    await c.meta();
    await c.connect();
    await c.init({ task: "parse", words: ["a"] });
    await c.step();
    await c.run();
    await c.setBreakpoint({ op: "PROCEED" });
    await c.state();
    await c.chart();
    await c.heap(0, 8);
    await c.disasm();
    expect(c.audit.length).toBe(10);
    for (const entry of c.audit) {
      expect(ALLOWED_MESSAGE_KINDS.has(entry.kind)).toBe(true);
    }
    // mutating requests are exactly the documented control messages
    const mutating = c.audit.filter((a) => a.method === "POST").map((a) => a.kind);
    expect(mutating).toEqual(["session", "init", "step", "run", "break"]);
  });

  it("treats a protocol version mismatch as a hard error", async () => {
    const c = new DebugClient("http://x", async () => {
      return new Response(JSON.stringify({ error: "protocol version mismatch" }), {
        status: 409,
      });
    });
    await expect(c.meta()).rejects.toBeInstanceOf(ProtocolMismatchError);
  });

  it("flips connection state on network failure and back on success", async () => {
    let down = true;
    const c = new DebugClient("http://x", async (url) => {
      if (down) throw new Error("refused");
      return new Response(JSON.stringify({ protocol: 1, can_generate: false }), {
        status: 200,
      });
    });
    const transitions: string[] = [];
    c.onConnectionChange = (s) => transitions.push(s);
    await expect(c.meta()).rejects.toThrow("refused");
    expect(c.connectionState).toBe("disconnected");
    down = false;
    await c.meta();
    expect(c.connectionState).toBe("connected");
    expect(transitions).toEqual(["disconnected", "connected"]);
  });

  it("shows the reconnect banner while the connection is down", async () => {
    const { SessionView } = await import("../src/app.js");
    let down = false;
    const c = new DebugClient("http://x", async () => {
      if (down) throw new Error("refused");
      return new Response(JSON.stringify({ protocol: 1, can_generate: false }), {
        status: 200,
      });
    });
    const root = document.createElement("div");
    document.body.appendChild(root);
    new SessionView(c, root);
    await c.meta();
    const banner = root.querySelector(".banner") as HTMLElement;
    expect(banner.className).toContain("hidden");
    down = true;
    await expect(c.meta()).rejects.toThrow();
    expect(banner.className).not.toContain("hidden");
    expect(banner.textContent).toContain("connection lost");
    down = false;
    await c.meta();
    expect(banner.className).toContain("hidden");
  });
});
