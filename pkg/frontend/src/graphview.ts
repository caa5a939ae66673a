// Pure SVG renderer for the evidence graph. Rendering derives solely
// from the /graph payload plus local view state; it never mutates the
// server. Node/edge semantics: triangles colored by author role (blue
// never-author, black lead author, pink co-author), triangle size scales
// with the account's duplicated-comment count, duplication edges are red
// with thickness proportional to weight, reviewed-for edges are thin and
// gray. Components larger than COLLAPSE_LIMIT render as a single
// expandable cluster node.

import { forceLayout } from "./layout";
import type { GraphEdge, GraphFilters, GraphNode, GraphPayload } from "./types";

export const ROLE_COLORS: Record<string, string> = {
  never_author: "#2c6fbb",
  lead_author: "#111111",
  co_author: "#e86ca4",
};

export const COLLAPSE_LIMIT = 500;

export interface ViewState {
  filters: GraphFilters;
  selectedNode: string | null;
  selectedEdge: [string, string] | null;
  expandedComponents: number[];
}

export function defaultViewState(): ViewState {
  return {
    filters: { method: null, minScore: 0, component: null },
    selectedNode: null,
    selectedEdge: null,
    expandedComponents: [],
  };
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function asArray<T>(value: unknown): T[] {
  return Array.isArray(value) ? (value as T[]) : [];
}

function nodeRadius(dupCount: number): number {
  const count = Number.isFinite(dupCount) && dupCount > 0 ? dupCount : 1;
  return 8 + 3 * Math.sqrt(count);
}

function trianglePoints(x: number, y: number, r: number): string {
  const top = `${x.toFixed(1)},${(y - r).toFixed(1)}`;
  const left = `${(x - 0.87 * r).toFixed(1)},${(y + 0.5 * r).toFixed(1)}`;
  const right = `${(x + 0.87 * r).toFixed(1)},${(y + 0.5 * r).toFixed(1)}`;
  return `${top} ${left} ${right}`;
}

function edgeKeeps(edge: GraphEdge, filters: GraphFilters): boolean {
  if (edge.type !== "duplication") return true;
  if (filters.method && !(edge.methods ?? []).includes(filters.method)) return false;
  return true;
}

export interface RenderedGraph {
  svg: string;
  visibleNodes: number;
  visibleEdges: number;
  collapsed: { component: number; size: number }[];
}

export function renderGraph(
  payload: GraphPayload,
  state: ViewState = defaultViewState(),
  width = 900,
  height = 620
): RenderedGraph {
  const nodes = asArray<GraphNode>(payload?.nodes).filter(
    (n) => n && typeof n.uid === "string"
  );
  const edges = asArray<GraphEdge>(payload?.edges).filter(
    (e) => e && typeof e.a === "string" && typeof e.b === "string"
  );
  const components = asArray<string[]>(payload?.components).map((c) =>
    asArray<string>(c)
  );

  const componentOf = new Map<string, number>();
  components.forEach((members, index) =>
    members.forEach((uid) => componentOf.set(uid, index))
  );

  const collapsed: { component: number; size: number }[] = [];
  const hiddenInCollapsed = new Set<string>();
  components.forEach((members, index) => {
    if (
      members.length > COLLAPSE_LIMIT &&
      !state.expandedComponents.includes(index)
    ) {
      collapsed.push({ component: index, size: members.length });
      members.forEach((uid) => hiddenInCollapsed.add(uid));
    }
  });

  const wantComponent = state.filters.component;
  const visible = nodes.filter((n) => {
    if (hiddenInCollapsed.has(n.uid)) return false;
    if (wantComponent !== null && componentOf.get(n.uid) !== wantComponent) return false;
    return true;
  });
  const visibleIds = new Set(visible.map((n) => n.uid));
  const visibleEdges = edges.filter(
    (e) => visibleIds.has(e.a) && visibleIds.has(e.b) && edgeKeeps(e, state.filters)
  );

  const positions = forceLayout(visible, visibleEdges, width, height);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="10">`,
    `<rect width="${width}" height="${height}" fill="#fcfcfc"/>`,
  ];

  for (const edge of visibleEdges) {
    const p = positions.get(edge.a);
    const q = positions.get(edge.b);
    if (!p || !q) continue;
    const weight = Number.isFinite(edge.weight) && edge.weight > 0 ? edge.weight : 1;
    const isDup = edge.type === "duplication";
    const stroke = isDup ? "#c02020" : "#b8b8b8";
    const strokeWidth = isDup ? Math.min(1 + weight, 10) : 0.8;
    const selected =
      state.selectedEdge &&
      ((state.selectedEdge[0] === edge.a && state.selectedEdge[1] === edge.b) ||
        (state.selectedEdge[0] === edge.b && state.selectedEdge[1] === edge.a));
    parts.push(
      `<line class="edge ${edge.type}" data-a="${escapeXml(edge.a)}" data-b="${escapeXml(
        edge.b
      )}" x1="${p.x.toFixed(1)}" y1="${p.y.toFixed(1)}" x2="${q.x.toFixed(
        1
      )}" y2="${q.y.toFixed(1)}" stroke="${stroke}" stroke-width="${strokeWidth}"${
        selected ? ' stroke-dasharray="4 2"' : ""
      }/>`
    );
  }

  for (const node of visible) {
    const p = positions.get(node.uid);
    if (!p) continue;
    const color = ROLE_COLORS[node.author_role] ?? ROLE_COLORS.never_author;
    const radius = nodeRadius(node.dup_count);
    const selected = state.selectedNode === node.uid;
    parts.push(
      `<polygon class="node" data-uid="${escapeXml(node.uid)}" points="${trianglePoints(
        p.x,
        p.y,
        radius
      )}" fill="${color}"${selected ? ' stroke="#ff9900" stroke-width="3"' : ""}>` +
        `<title>${escapeXml(node.uid)} (${escapeXml(
          String(node.author_role)
        )}, ${node.dup_count} duplicated)</title></polygon>`
    );
    parts.push(
      `<text x="${p.x.toFixed(1)}" y="${(p.y + radius + 11).toFixed(
        1
      )}" text-anchor="middle" fill="#444">${escapeXml(node.uid)}</text>`
    );
  }

  let y = 24;
  for (const entry of collapsed) {
    parts.push(
      `<g class="collapsed" data-component="${entry.component}">` +
        `<rect x="12" y="${y - 14}" width="230" height="20" rx="4" fill="#eee" stroke="#999"/>` +
        `<text x="20" y="${y}">component ${entry.component}: ${entry.size} accounts (click to expand)</text></g>`
    );
    y += 26;
  }

  parts.push("</svg>");
  return {
    svg: parts.join("\n"),
    visibleNodes: visible.length,
    visibleEdges: visibleEdges.length,
    collapsed,
  };
}
