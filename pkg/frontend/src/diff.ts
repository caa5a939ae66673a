// Pair diff rendering: the two accounts' comments with shared sentences
// highlighted. Highlighting is sentence-level (the unit the sentence
// searches work in); character spans only appear for search3/4 matches,
// where the service puts the matched substrings into matched_spans.

import type { PairDetail } from "./types";

export interface DiffColumn {
  uid: string;
  comments: {
    comment_id: string;
    article_id: string;
    submitted_at: string;
    sentences: { text: string; shared: boolean }[];
  }[];
}

export function buildDiff(detail: PairDetail): [DiffColumn, DiffColumn] {
  const columns: [DiffColumn, DiffColumn] = [
    { uid: detail.account_a, comments: [] },
    { uid: detail.account_b, comments: [] },
  ];
  for (const comment of detail.comments ?? []) {
    const column = comment.referee_uid === detail.account_a ? columns[0] : columns[1];
    column.comments.push({
      comment_id: comment.comment_id,
      article_id: comment.article_id,
      submitted_at: comment.submitted_at,
      sentences: (comment.sentences ?? []).map((s) => ({
        text: s.text,
        shared: Boolean(s.shared),
      })),
    });
  }
  return columns;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function renderDiffHtml(detail: PairDetail): string {
  const [left, right] = buildDiff(detail);
  const scoreRows = (detail.scores ?? [])
    .map(
      (s) =>
        `<tr><td>${escapeHtml(s.method)}</td><td>${escapeHtml(s.metric)}</td>` +
        `<td>${Number(s.value).toFixed(4)}</td></tr>`
    )
    .join("");
  const column = (col: DiffColumn) =>
    `<div class="diff-col"><h3>${escapeHtml(col.uid)}</h3>` +
    col.comments
      .map(
        (c) =>
          `<div class="diff-comment"><div class="meta">${escapeHtml(c.comment_id)} · ` +
          `${escapeHtml(c.article_id)} · ${escapeHtml(c.submitted_at)}</div>` +
          c.sentences
            .map(
              (s) =>
                `<span class="sentence${s.shared ? " shared" : ""}">${escapeHtml(s.text)}</span> `
            )
            .join("") +
          `</div>`
      )
      .join("") +
    `</div>`;
  return (
    `<div class="pair-scores"><table><tr><th>method</th><th>metric</th><th>score</th></tr>` +
    `${scoreRows}</table></div>` +
    `<div class="diff-grid">${column(left)}${column(right)}</div>`
  );
}
