from dupforge.corpus import Comment, Corpus, CorpusStats, IngestConfig, normalize_text, split_sentences


def corpus_from(texts_by_uid: dict[str, list[str]],
                authorship: dict | None = None,
                recommendations: dict | None = None) -> Corpus:
    """Small-corpus builder for tests: one article per comment, no filters."""
    comments = {}
    seq = 0
    for uid in sorted(texts_by_uid):
        for text in texts_by_uid[uid]:
            seq += 1
            cid = f"c{seq:04d}"
            norm = normalize_text(text)
            comments[cid] = Comment(
                comment_id=cid,
                article_id=f"A{seq:04d}",
                referee_uid=uid,
                journal_id="J01",
                audience="to_authors",
                round=1,
                recommendation="minor",
                submitted_at="2020-06-15",
                raw_text=text,
                norm_text=norm,
                sentences=tuple(split_sentences(norm)),
            )
    authorship = authorship or {}
    author_uids = {a for a, _ in authorship.values()} | {u for _, co in authorship.values() for u in co}
    accounts = {}
    leads = {a for a, _ in authorship.values()}
    cos = {u for _, co in authorship.values() for u in co}
    for uid in sorted(set(texts_by_uid) | author_uids):
        accounts[uid] = "lead_author" if uid in leads else ("co_author" if uid in cos else "never_author")
    corpus = Corpus(
        comments=comments,
        accounts=accounts,
        authorship=authorship,
        recommendations={k: tuple(v) for k, v in (recommendations or {}).items()},
        journal_blocklist=frozenset(),
        stats=CorpusStats(0, 0, 0, 0, 0),
        ingest_config=IngestConfig(min_chars=0),
    )
    corpus.stats = corpus.recount_stats()
    return corpus
