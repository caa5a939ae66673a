import { describe, expect, it } from "vitest";

import { forceLayout, rng } from "../src/layout";
import type { GraphEdge, GraphNode } from "../src/types";

function node(uid: string): GraphNode {
  return { uid, author_role: "never_author", dup_count: 1, component: 0, pagerank: 0, rank_position: 1 };
}

describe("force layout", () => {
  const nodes = ["a", "b", "c", "d"].map(node);
  const edges: GraphEdge[] = [
    { type: "duplication", a: "a", b: "b", weight: 2 },
    { type: "duplication", a: "c", b: "d", weight: 1 },
  ];

  it("is deterministic for a fixed seed", () => {
    const one = forceLayout(nodes, edges, 600, 400, 80, 7);
    const two = forceLayout(nodes, edges, 600, 400, 80, 7);
    for (const uid of one.keys()) {
      expect(one.get(uid)).toEqual(two.get(uid));
    }
  });

  it("keeps every node inside the viewport", () => {
    const positions = forceLayout(nodes, edges, 600, 400);
    for (const p of positions.values()) {
      expect(p.x).toBeGreaterThanOrEqual(24);
      expect(p.x).toBeLessThanOrEqual(576);
      expect(p.y).toBeGreaterThanOrEqual(24);
      expect(p.y).toBeLessThanOrEqual(376);
    }
  });

  it("pulls linked nodes closer than unlinked ones on average", () => {
    const positions = forceLayout(nodes, edges, 600, 400, 200, 3);
    const dist = (a: string, b: string) => {
      const p = positions.get(a)!;
      const q = positions.get(b)!;
      return Math.hypot(p.x - q.x, p.y - q.y);
    };
    const linked = (dist("a", "b") + dist("c", "d")) / 2;
    const unlinked = (dist("a", "c") + dist("a", "d") + dist("b", "c") + dist("b", "d")) / 4;
    expect(linked).toBeLessThan(unlinked);
  });

  it("prng is stable", () => {
    const r = rng(99);
    const values = [r(), r(), r()];
    const r2 = rng(99);
    expect([r2(), r2(), r2()]).toEqual(values);
    for (const v of values) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThan(1);
    }
  });
});
