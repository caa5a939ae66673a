// Integration suite against the live primary service: seeds a pseudonym
// map, boots `dupforge` over HTTP, uploads a corpus that yields three
// duplication components, and drives the UI's client + renderer through
// the triage workflow (Figure-2 rendering semantics, suppress/re-run
// round trip, audited de-pseudonymisation).

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, DupforgeClient } from "../src/api";
import { ROLE_COLORS, defaultViewState, renderGraph } from "../src/graphview";
import { renderDiffHtml } from "../src/diff";
import type { GraphPayload } from "../src/types";

const PORT = 20000 + Math.floor(Math.random() * 9000);
const BASE = `http://127.0.0.1:${PORT}`;
const TOKEN = "uitok";
const PSEUDO_KEY = "ui-secret-key";

let server: ChildProcess;
let workdir: string;
let aliceUid: string;
let client: DupforgeClient;
let runId: string;

const sentence = (tag: string) =>
  `The ${tag} section presents a careful and complete treatment of the topic with figures that read well.`;

function longText(...tags: string[]): string {
  return tags.map(sentence).join(" ");
}

interface RawRow {
  comment_id: string;
  article_id: string;
  referee_uid: string;
  journal_id: string;
  audience: string;
  round: number;
  recommendation: string;
  submitted_at: string;
  text: string;
  authors?: { lead: string; co: string[] };
}

function corpusRows(): RawRow[] {
  const rows: RawRow[] = [];
  let seq = 0;
  const add = (uid: string, text: string, authors?: RawRow["authors"]) => {
    seq += 1;
    rows.push({
      comment_id: `c${String(seq).padStart(4, "0")}`,
      article_id: `A${String(seq).padStart(4, "0")}`,
      referee_uid: uid,
      journal_id: "J01",
      audience: "to_authors",
      round: 1,
      recommendation: "minor",
      submitted_at: "2020-03-10",
      text,
      ...(authors ? { authors } : {}),
    });
  };
  const TEXT_Z = longText("methods", "results", "discussion", "appendix");
  const TEXT_X = longText("survey", "analysis", "conclusion", "references");
  const TEXT_Y = longText("theory", "proofs", "lemmas", "corollaries");
  // component of four (uidm1 duplicated twice -> larger triangle)
  add("uidm1", TEXT_Z, { lead: "uidm1", co: [] }); // lead author -> black
  add("uidm1", TEXT_Z);
  add("uidm2", TEXT_Z);
  add("uidm3", TEXT_Z);
  add("uidm4", TEXT_Z);
  // two pair components
  add("uida1", TEXT_X);
  add("uida2", TEXT_X, { lead: "uidq9", co: ["uida2"] }); // co-author -> pink
  add("uidb1", TEXT_Y);
  add("uidb2", TEXT_Y);
  // innocents with unique texts
  add("uidi1", longText("pilot", "ethics", "sampling", "software"));
  add("uidi2", longText("stimuli", "protocol", "archive", "funding"));
  return rows;
}

async function waitForRun(id: string): Promise<void> {
  for (let i = 0; i < 300; i++) {
    const status = await client.runStatus(id);
    if (status.status === "complete") return;
    if (status.status === "failed") throw new Error(`run failed: ${status.error}`);
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("run did not complete in time");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "dupforge-ui-"));
  const mapPath = join(workdir, "pseudonyms.bin");
  aliceUid = execFileSync(
    "python3",
    [
      "-c",
      [
        "from dupforge.corpus import PseudonymMap",
        `pm = PseudonymMap(${JSON.stringify(PSEUDO_KEY)})`,
        "uid = pm.uid_for('alice@example.org')",
        `pm.save(${JSON.stringify(mapPath)})`,
        "print(uid)",
      ].join("; "),
    ],
    { encoding: "utf-8" }
  ).trim();

  server = spawn(
    "python3",
    [
      "-c",
      [
        "from dupforge.service import serve",
        `serve(${JSON.stringify(join(workdir, "store"))}, port=${PORT}, ` +
          `auth_token=${JSON.stringify(TOKEN)}, ` +
          `pseudonym_map_path=${JSON.stringify(mapPath)})`,
      ].join("; "),
    ],
    { stdio: "ignore" }
  );

  client = new DupforgeClient(BASE, TOKEN);
  let healthy = false;
  for (let i = 0; i < 150 && !healthy; i++) {
    try {
      await client.health();
      healthy = true;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 200));
    }
  }
  if (!healthy) throw new Error("service did not come up");

  const upload = await fetch(`${BASE}/corpora`, {
    method: "POST",
    headers: { "Content-Type": "application/json", Authorization: `Bearer ${TOKEN}` },
    body: JSON.stringify({ rows: corpusRows() }),
  });
  expect(upload.status).toBe(201);
  const corpusId = (await upload.json()).corpus_id as string;
  const started = await client.startRun(corpusId, { searches: [1, 2, 3] });
  runId = started.run_id;
  await waitForRun(runId);
}, 120000);

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("live service", () => {
  let graph: GraphPayload;

  it("renders the three-component run with Figure-2 semantics", async () => {
    graph = await client.graph(runId);
    expect(graph.components.map((c) => c.length).sort((x, y) => y - x)).toEqual([4, 2, 2]);

    const rendered = renderGraph(graph);
    expect(rendered.visibleNodes).toBe(8);
    // roles: uidm1 lead (black), uida2 co-author (pink), rest blue
    expect(rendered.svg).toMatch(
      new RegExp(`data-uid="uidm1" points="[^"]+" fill="${ROLE_COLORS.lead_author}"`)
    );
    expect(rendered.svg).toMatch(
      new RegExp(`data-uid="uida2" points="[^"]+" fill="${ROLE_COLORS.co_author}"`)
    );
    expect(rendered.svg).toMatch(
      new RegExp(`data-uid="uidb1" points="[^"]+" fill="${ROLE_COLORS.never_author}"`)
    );
    // every duplication edge is red; uidm1 edges are thicker than pair edges
    const edges = [...rendered.svg.matchAll(/<line class="edge duplication"[^>]+/g)].map(
      (m) => m[0]
    );
    expect(edges.length).toBeGreaterThanOrEqual(7); // C(4,2) + 2 pairs
    for (const edge of edges) expect(edge).toContain('stroke="#c02020"');
    const width = (edge: string) => Number(edge.match(/stroke-width="([\d.]+)"/)![1]);
    const m1m2 = edges.find((e) => e.includes('data-a="uidm1"') && e.includes('data-b="uidm2"'))!;
    const a1a2 = edges.find((e) => e.includes('data-a="uida1"') && e.includes('data-b="uida2"'))!;
    expect(width(m1m2)).toBeGreaterThan(width(a1a2));
    // node size tracks duplicated-comment count
    const m1 = graph.nodes.find((n) => n.uid === "uidm1")!;
    const m2 = graph.nodes.find((n) => n.uid === "uidm2")!;
    expect(m1.dup_count).toBeGreaterThan(m2.dup_count);
  });

  it("serves a pair diff with every sentence shared for exact duplicates", async () => {
    const detail = await client.pairDetail(runId, "uida1", "uida2");
    const html = renderDiffHtml(detail);
    const shared = (html.match(/class="sentence shared"/g) ?? []).length;
    const plain = (html.match(/class="sentence"/g) ?? []).length;
    expect(shared).toBeGreaterThan(0);
    expect(plain).toBe(0);
  });

  it("suppress -> re-run removes the node; undo -> re-run restores it", async () => {
    const suppressed = await client.suppress("uidb1", "board_member", "journal editor");
    const second = await client.startRun(undefined, { searches: [1, 2, 3] });
    await waitForRun(second.run_id);
    const withoutNode = await client.graph(second.run_id);
    expect(withoutNode.nodes.map((n) => n.uid)).not.toContain("uidb1");
    expect(
      renderGraph(withoutNode).svg.includes('data-uid="uidb1"')
    ).toBe(false);
    await expect(client.pairDetail(second.run_id, "uidb1", "uidb2")).rejects.toMatchObject({
      status: 404,
    });

    await client.unsuppress(suppressed.entry_id);
    const third = await client.startRun(undefined, { searches: [1, 2, 3] });
    await waitForRun(third.run_id);
    const restored = await client.graph(third.run_id);
    expect(restored.nodes.map((n) => n.uid)).toContain("uidb1");
  }, 120000);

  it("denies a wrong de-pseudonymisation key and audits the attempt", async () => {
    const before = (await client.audit(1000)).total;
    try {
      await client.unpseudonymise(aliceUid, "not-the-key", "bad attempt");
      expect.unreachable();
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(403);
    }
    const after = await client.audit(1000);
    expect(after.total).toBe(before + 1);
    expect(after.items[after.items.length - 1].outcome).toBe("denied");
  });

  it("grants the right key and returns the identity", async () => {
    const before = (await client.audit(1000)).total;
    const result = await client.unpseudonymise(aliceUid, PSEUDO_KEY, "ui integration");
    expect(result.identity).toBe("alice@example.org");
    expect((await client.audit(1000)).total).toBe(before + 1);
  });

  it("pagerank table rows deep-link to nodes", async () => {
    const ranking = await client.ranking(runId, 10);
    expect(ranking.items.length).toBeGreaterThanOrEqual(8);
    const top = ranking.items[0];
    expect(["uidm1", "uidm2", "uidm3", "uidm4"]).toContain(top.uid);
    const state = defaultViewState();
    state.selectedNode = top.uid;
    const rendered = renderGraph(graph, state);
    expect(rendered.svg).toMatch(new RegExp(`data-uid="${top.uid}"[^>]+stroke="#ff9900"`));
  });
});
