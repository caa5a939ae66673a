import { describe, expect, it } from "vitest";

import {
  COLLAPSE_LIMIT,
  ROLE_COLORS,
  defaultViewState,
  renderGraph,
} from "../src/graphview";
import type { GraphPayload } from "../src/types";

const payload: GraphPayload = {
  nodes: [
    { uid: "uidA", author_role: "never_author", dup_count: 1, component: 0, pagerank: 0.3, rank_position: 2 },
    { uid: "uidB", author_role: "lead_author", dup_count: 9, component: 0, pagerank: 0.5, rank_position: 1 },
    { uid: "uidC", author_role: "co_author", dup_count: 2, component: 1, pagerank: 0.2, rank_position: 3 },
  ],
  edges: [
    { type: "duplication", a: "uidA", b: "uidB", weight: 4, methods: ["search1", "search3"] },
    { type: "reviewed_for", a: "uidA", b: "uidC", weight: 1 },
  ],
  components: [["uidA", "uidB"], ["uidC"]],
  ranking: [],
};

describe("renderGraph", () => {
  it("colors triangles by author role", () => {
    const { svg } = renderGraph(payload);
    expect(svg).toContain(`fill="${ROLE_COLORS.never_author}"`);
    expect(svg).toContain(`fill="${ROLE_COLORS.lead_author}"`);
    expect(svg).toContain(`fill="${ROLE_COLORS.co_author}"`);
    expect(svg).toContain("<polygon");
  });

  it("sizes triangles with dup_count", () => {
    const { svg } = renderGraph(payload);
    const radius = (uid: string) => {
      const match = svg.match(new RegExp(`data-uid="${uid}" points="([^"]+)"`));
      expect(match).toBeTruthy();
      const [top, left] = match![1].split(" ").map((p) => p.split(",").map(Number));
      return left[1] - top[1]; // vertical extent grows with the radius
    };
    expect(radius("uidB")).toBeGreaterThan(radius("uidA"));
  });

  it("draws duplication edges red with weight-scaled thickness", () => {
    const { svg } = renderGraph(payload);
    const dup = svg.match(/<line class="edge duplication"[^>]+/)![0];
    expect(dup).toContain('stroke="#c02020"');
    expect(dup).toContain('stroke-width="5"'); // 1 + weight 4
    const reviewed = svg.match(/<line class="edge reviewed_for"[^>]+/)![0];
    expect(reviewed).toContain('stroke="#b8b8b8"');
  });

  it("filters duplication edges by method without touching nodes", () => {
    const state = defaultViewState();
    state.filters.method = "search2";
    const rendered = renderGraph(payload, state);
    expect(rendered.visibleEdges).toBe(1); // reviewed_for stays, dup filtered
    expect(rendered.visibleNodes).toBe(3);
  });

  it("component filter narrows nodes", () => {
    const state = defaultViewState();
    state.filters.component = 1;
    const rendered = renderGraph(payload, state);
    expect(rendered.visibleNodes).toBe(1);
    expect(rendered.svg).toContain("uidC");
    expect(rendered.svg).not.toContain('data-uid="uidA"');
  });

  it("collapses oversized components until expanded", () => {
    const big: GraphPayload = {
      nodes: Array.from({ length: COLLAPSE_LIMIT + 10 }, (_, i) => ({
        uid: `uid${i}`,
        author_role: "never_author" as const,
        dup_count: 1,
        component: 0,
        pagerank: 0,
        rank_position: i + 1,
      })),
      edges: [],
      components: [Array.from({ length: COLLAPSE_LIMIT + 10 }, (_, i) => `uid${i}`)],
      ranking: [],
    };
    const rendered = renderGraph(big);
    expect(rendered.collapsed).toEqual([{ component: 0, size: COLLAPSE_LIMIT + 10 }]);
    expect(rendered.visibleNodes).toBe(0);
    const state = defaultViewState();
    state.expandedComponents = [0];
    expect(renderGraph(big, state).visibleNodes).toBe(COLLAPSE_LIMIT + 10);
  });

  it("marks the selected node", () => {
    const state = defaultViewState();
    state.selectedNode = "uidB";
    const { svg } = renderGraph(payload, state);
    expect(svg).toMatch(/data-uid="uidB"[^>]+stroke="#ff9900"/);
  });

  it("escapes markup in identifiers", () => {
    const hostile: GraphPayload = {
      nodes: [{ uid: 'uid<script>"x"', author_role: "never_author", dup_count: 1, component: 0, pagerank: 0, rank_position: 1 }],
      edges: [],
      components: [],
      ranking: [],
    };
    const { svg } = renderGraph(hostile);
    expect(svg).not.toContain("<script>");
    expect(svg).toContain("uid&lt;script&gt;");
  });

  it("never throws on fuzzed syntactically-valid payloads", () => {
    let seed = 12345;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const junkValues: unknown[] = [
      null, undefined, 0, -1, 3.5, NaN, "", "x", [], {}, true, false, 1e308,
    ];
    const junk = () => junkValues[Math.floor(rand() * junkValues.length)];
    for (let trial = 0; trial < 300; trial++) {
      const fuzz = {
        nodes: rand() < 0.2 ? junk() : Array.from({ length: Math.floor(rand() * 6) }, () =>
          rand() < 0.3
            ? junk()
            : {
                uid: rand() < 0.2 ? junk() : `uid${Math.floor(rand() * 5)}`,
                author_role: rand() < 0.3 ? junk() : "never_author",
                dup_count: junk(),
                component: junk(),
                pagerank: junk(),
                rank_position: junk(),
              }
        ),
        edges: rand() < 0.2 ? junk() : Array.from({ length: Math.floor(rand() * 6) }, () =>
          rand() < 0.3
            ? junk()
            : {
                type: rand() < 0.5 ? "duplication" : junk(),
                a: rand() < 0.2 ? junk() : `uid${Math.floor(rand() * 5)}`,
                b: rand() < 0.2 ? junk() : `uid${Math.floor(rand() * 5)}`,
                weight: junk(),
                methods: rand() < 0.5 ? junk() : ["search1"],
              }
        ),
        components: rand() < 0.3 ? junk() : [[`uid0`], junk(), [junk()]],
        ranking: junk(),
      } as unknown as GraphPayload;
      expect(() => renderGraph(fuzz)).not.toThrow();
    }
  });
});
