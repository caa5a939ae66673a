// Browser wiring: one page that explores a run's evidence graph, shows
// pair diffs, performs triage actions (suppress / undo / re-run), and the
// audited de-pseudonymisation dialog. Suppressions are never optimistic:
// the UI waits for the server ack, then re-renders.

import { ApiError, DupforgeClient } from "./api";
import { renderDiffHtml } from "./diff";
import { defaultViewState, renderGraph, ViewState } from "./graphview";
import type { GraphPayload } from "./types";

interface AppState {
  client: DupforgeClient;
  runId: string | null;
  graph: GraphPayload | null;
  view: ViewState;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function notice(text: string, kind: "ok" | "err" = "ok"): void {
  const box = el<HTMLDivElement>("notice");
  box.textContent = text;
  box.className = kind;
  setTimeout(() => {
    box.textContent = "";
    box.className = "";
  }, 6000);
}

async function refreshRuns(state: AppState): Promise<void> {
  const { runs } = await state.client.listRuns();
  const select = el<HTMLSelectElement>("run-select");
  select.innerHTML = "";
  for (const runId of runs) {
    const option = document.createElement("option");
    option.value = runId;
    option.textContent = runId;
    select.appendChild(option);
  }
  if (runs.length) {
    select.value = state.runId && runs.includes(state.runId) ? state.runId : runs[runs.length - 1];
    state.runId = select.value;
  }
}

async function loadGraph(state: AppState): Promise<void> {
  if (!state.runId) return;
  const status = await state.client.runStatus(state.runId);
  el<HTMLSpanElement>("run-status").textContent =
    `${status.status}${status.evidence_count !== undefined ? ` · ${status.evidence_count} evidence items` : ""}`;
  if (status.status !== "complete") {
    setTimeout(() => loadGraph(state).catch(reportError), 1500);
    return;
  }
  state.graph = await state.client.graph(state.runId);
  drawGraph(state);
  drawRanking(state);
  drawComponents(state);
}

function drawGraph(state: AppState): void {
  if (!state.graph) return;
  const rendered = renderGraph(state.graph, state.view);
  const host = el<HTMLDivElement>("graph-host");
  host.innerHTML = rendered.svg;
  el<HTMLSpanElement>("graph-stats").textContent =
    `${rendered.visibleNodes} accounts · ${rendered.visibleEdges} edges` +
    (rendered.collapsed.length ? ` · ${rendered.collapsed.length} collapsed` : "");
  host.querySelectorAll<SVGPolygonElement>(".node").forEach((polygon) => {
    polygon.addEventListener("click", () => {
      state.view.selectedNode = polygon.dataset.uid ?? null;
      state.view.selectedEdge = null;
      drawGraph(state);
      showAccountPanel(state).catch(reportError);
    });
  });
  host.querySelectorAll<SVGLineElement>(".edge.duplication").forEach((line) => {
    line.addEventListener("click", () => {
      const a = line.dataset.a ?? "";
      const b = line.dataset.b ?? "";
      state.view.selectedEdge = [a, b];
      state.view.selectedNode = null;
      drawGraph(state);
      showPairPanel(state, a, b).catch(reportError);
    });
  });
  host.querySelectorAll<SVGGElement>(".collapsed").forEach((group) => {
    group.addEventListener("click", () => {
      const component = Number(group.dataset.component);
      if (!state.view.expandedComponents.includes(component)) {
        state.view.expandedComponents.push(component);
        drawGraph(state);
      }
    });
  });
}

function drawRanking(state: AppState): void {
  if (!state.graph) return;
  const rows = state.graph.ranking
    .slice(0, 50)
    .map(
      (r) =>
        `<tr data-uid="${r.uid}"><td>${r.position}</td><td class="uid-link">${r.uid}</td>` +
        `<td>${r.pagerank.toFixed(6)}</td></tr>`
    )
    .join("");
  el<HTMLDivElement>("ranking").innerHTML =
    `<table><tr><th>#</th><th>UID</th><th>PageRank</th></tr>${rows}</table>`;
  el<HTMLDivElement>("ranking")
    .querySelectorAll<HTMLTableRowElement>("tr[data-uid]")
    .forEach((row) => {
      row.addEventListener("click", () => {
        state.view.selectedNode = row.dataset.uid ?? null;
        drawGraph(state);
        showAccountPanel(state).catch(reportError);
      });
    });
}

function drawComponents(state: AppState): void {
  if (!state.graph) return;
  const items = state.graph.components
    .map(
      (members, index) =>
        `<li data-component="${index}">component ${index} · ${members.length} accounts</li>`
    )
    .join("");
  const list = el<HTMLUListElement>("components");
  list.innerHTML = items;
  list.querySelectorAll<HTMLLIElement>("li").forEach((item) => {
    item.addEventListener("click", () => {
      const component = Number(item.dataset.component);
      state.view.filters.component =
        state.view.filters.component === component ? null : component;
      drawGraph(state);
    });
  });
}

async function showAccountPanel(state: AppState): Promise<void> {
  if (!state.graph || !state.view.selectedNode || !state.runId) return;
  const uid = state.view.selectedNode;
  const node = state.graph.nodes.find((n) => n.uid === uid);
  const neighbors = state.graph.edges.filter(
    (e) => e.type === "duplication" && (e.a === uid || e.b === uid)
  );
  el<HTMLDivElement>("detail").innerHTML =
    `<h3>${uid}</h3>` +
    `<p>role: ${node?.author_role ?? "?"} · duplicated comments: ${node?.dup_count ?? 0} · ` +
    `rank #${node?.rank_position ?? "-"} (${(node?.pagerank ?? 0).toFixed(6)}) · ` +
    `component ${node?.component ?? "-"}</p>` +
    `<p>${neighbors.length} duplication link(s)</p>` +
    `<button id="suppress-node">suppress account…</button> ` +
    `<button id="unmask-node">de-pseudonymise…</button>`;
  el<HTMLButtonElement>("suppress-node").addEventListener("click", () =>
    suppressDialog(state, uid).catch(reportError)
  );
  el<HTMLButtonElement>("unmask-node").addEventListener("click", () =>
    unmaskDialog(state, uid).catch(reportError)
  );
}

async function showPairPanel(state: AppState, a: string, b: string): Promise<void> {
  if (!state.runId) return;
  try {
    const detail = await state.client.pairDetail(state.runId, a, b);
    el<HTMLDivElement>("detail").innerHTML =
      `<h3>${detail.account_a} × ${detail.account_b}</h3>` +
      renderDiffHtml(detail) +
      `<button id="suppress-pair">suppress pair…</button>`;
    el<HTMLButtonElement>("suppress-pair").addEventListener("click", () =>
      suppressDialog(state, `${detail.account_a}|${detail.account_b}`).catch(reportError)
    );
  } catch (error) {
    if (error instanceof ApiError && error.body.code === "suppressed") {
      el<HTMLDivElement>("detail").innerHTML = `<p class="err">${error.body.message}</p>`;
      return;
    }
    throw error;
  }
}

async function suppressDialog(state: AppState, entity: string): Promise<void> {
  const category = prompt(
    `suppress ${entity}\ncategory (board_member / practice_document / duplicate_account / other):`,
    "other"
  );
  if (!category) return;
  const reason = prompt("reason:");
  if (!reason) return;
  const result = await state.client.suppress(entity, category, reason);
  notice(`suppressed ${entity} (entry ${result.entry_id}); re-run to apply`);
}

async function unmaskDialog(state: AppState, uid: string): Promise<void> {
  const key = prompt(`de-pseudonymise ${uid}\nsecret key:`);
  if (key === null) return;
  const reason = prompt("investigation reason:");
  if (!reason) return;
  try {
    const result = await state.client.unpseudonymise(uid, key, reason);
    notice(`${uid} -> ${result.identity} (audited)`);
  } catch (error) {
    if (error instanceof ApiError && error.status === 403) {
      notice("de-pseudonymisation denied: invalid key (attempt audited)", "err");
      return;
    }
    throw error;
  }
}

async function rerun(state: AppState): Promise<void> {
  const started = await state.client.startRun(undefined, {}, `rerun-${Date.now()}`);
  notice(`run ${started.run_id} queued (position ${started.queue_position})`);
  const poll = async (): Promise<void> => {
    const status = await state.client.runStatus(started.run_id);
    if (status.status === "running") {
      setTimeout(() => poll().catch(reportError), 1500);
      return;
    }
    if (status.status === "complete") {
      notice(`run ${started.run_id} complete — switching`);
      await refreshRuns(state);
      state.runId = started.run_id;
      el<HTMLSelectElement>("run-select").value = started.run_id;
      state.view = defaultViewState();
      await loadGraph(state);
    } else {
      notice(`run ${started.run_id} failed: ${status.error}`, "err");
    }
  };
  await poll();
}

function reportError(error: unknown): void {
  if (error instanceof ApiError) {
    notice(`${error.status} ${error.body.code}: ${error.body.message}`, "err");
  } else {
    notice(String(error), "err");
  }
}

export function startApp(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  const token = params.get("token");
  const state: AppState = {
    client: new DupforgeClient(base, token),
    runId: params.get("run"),
    graph: null,
    view: defaultViewState(),
  };
  el<HTMLButtonElement>("rerun").addEventListener("click", () =>
    rerun(state).catch(reportError)
  );
  el<HTMLSelectElement>("run-select").addEventListener("change", (event) => {
    state.runId = (event.target as HTMLSelectElement).value;
    state.view = defaultViewState();
    loadGraph(state).catch(reportError);
  });
  el<HTMLSelectElement>("method-filter").addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    state.view.filters.method = value || null;
    drawGraph(state);
  });
  refreshRuns(state)
    .then(() => loadGraph(state))
    .catch(reportError);
}

declare global {
  interface Window {
    dupforgeStart: () => void;
  }
}

if (typeof window !== "undefined") {
  window.dupforgeStart = startApp;
}
