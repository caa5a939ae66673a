import { describe, expect, it } from "vitest";

import { buildDiff, renderDiffHtml } from "../src/diff";
import type { PairDetail } from "../src/types";

const detail: PairDetail = {
  account_a: "uidA",
  account_b: "uidB",
  scores: [
    { method: "search2", metric: "sentence_jaccard", value: 0.5, comment_ids: ["c1", "c2"] },
  ],
  matched_spans: ["The shared sentence."],
  comments: [
    {
      comment_id: "c1",
      referee_uid: "uidA",
      article_id: "A1",
      journal_id: "J01",
      audience: "to_authors",
      submitted_at: "2020-01-01",
      sentences: [
        { text: "The shared sentence.", shared: true },
        { text: "Unique to A.", shared: false },
      ],
    },
    {
      comment_id: "c2",
      referee_uid: "uidB",
      article_id: "A2",
      journal_id: "J01",
      audience: "to_authors",
      submitted_at: "2020-01-02",
      sentences: [
        { text: "The shared sentence.", shared: true },
        { text: "Unique to B & co. <tags>", shared: false },
      ],
    },
  ],
};

describe("pair diff", () => {
  it("assigns comments to the right columns", () => {
    const [left, right] = buildDiff(detail);
    expect(left.uid).toBe("uidA");
    expect(left.comments.map((c) => c.comment_id)).toEqual(["c1"]);
    expect(right.comments.map((c) => c.comment_id)).toEqual(["c2"]);
  });

  it("marks shared sentences and escapes html", () => {
    const html = renderDiffHtml(detail);
    const sharedCount = (html.match(/class="sentence shared"/g) ?? []).length;
    expect(sharedCount).toBe(2);
    expect(html).toContain("Unique to B &amp; co. &lt;tags&gt;");
    expect(html).toContain("sentence_jaccard");
    expect(html).toContain("0.5000");
  });

  it("handles empty payloads", () => {
    const empty: PairDetail = {
      account_a: "uidA",
      account_b: "uidB",
      scores: [],
      matched_spans: [],
      comments: [],
    };
    expect(() => renderDiffHtml(empty)).not.toThrow();
  });
});
