// Deterministic force-directed layout. Small graphs only (the server
// groups anything bigger into collapsed components before rendering).

import type { GraphEdge, GraphNode } from "./types";

export interface Point {
  x: number;
  y: number;
}

// mulberry32: tiny seeded PRNG so layouts are reproducible
export function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function forceLayout(
  nodes: GraphNode[],
  edges: GraphEdge[],
  width = 900,
  height = 620,
  iterations = 150,
  seed = 42
): Map<string, Point> {
  const random = rng(seed);
  const positions = new Map<string, Point>();
  for (const node of nodes) {
    positions.set(node.uid, {
      x: width * (0.15 + 0.7 * random()),
      y: height * (0.15 + 0.7 * random()),
    });
  }
  const ids = nodes.map((n) => n.uid);
  const springs = edges
    .filter((e) => positions.has(e.a) && positions.has(e.b))
    .map((e) => ({
      a: e.a,
      b: e.b,
      length: e.type === "duplication" ? 90 : 150,
      strength: e.type === "duplication" ? 0.08 : 0.02,
    }));

  for (let step = 0; step < iterations; step++) {
    const cooling = 1 - step / iterations;
    // pairwise repulsion
    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const p = positions.get(ids[i])!;
        const q = positions.get(ids[j])!;
        let dx = p.x - q.x;
        let dy = p.y - q.y;
        const dist2 = Math.max(dx * dx + dy * dy, 1);
        const force = (2600 / dist2) * cooling;
        const dist = Math.sqrt(dist2);
        dx /= dist;
        dy /= dist;
        p.x += dx * force;
        p.y += dy * force;
        q.x -= dx * force;
        q.y -= dy * force;
      }
    }
    // springs along edges
    for (const spring of springs) {
      const p = positions.get(spring.a)!;
      const q = positions.get(spring.b)!;
      const dx = q.x - p.x;
      const dy = q.y - p.y;
      const dist = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const pull = spring.strength * (dist - spring.length) * cooling;
      p.x += (dx / dist) * pull;
      p.y += (dy / dist) * pull;
      q.x -= (dx / dist) * pull;
      q.y -= (dy / dist) * pull;
    }
    // gentle centering, then clamp into the viewport
    for (const id of ids) {
      const p = positions.get(id)!;
      p.x += (width / 2 - p.x) * 0.01 * cooling;
      p.y += (height / 2 - p.y) * 0.01 * cooling;
      p.x = Math.min(Math.max(p.x, 24), width - 24);
      p.y = Math.min(Math.max(p.y, 24), height - 24);
    }
  }
  return positions;
}
