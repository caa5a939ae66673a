"""Deterministic synthetic review corpus with planted ground truth.

Real review data is confidential, so tests and demos run on generated
corpora: innocent accounts sampled from a combinatorial phrase grammar,
a mill cluster sharing mutated templates, weak-link accounts that copy a
couple of template sentences, planted typo sentences, authorship and
recommendation records, and a monthly date distribution with a mill peak.

The innocent and mill grammars use disjoint content vocabularies, so an
innocent account can never coincidentally produce mill text; ground truth
is unambiguous by construction.  Everything is a pure function of the
spec's seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import Corpus, IngestConfig, ingest

_INNOCENT_SUBJECTS = (
    "The authors", "The manuscript", "This study", "The paper", "The present work",
    "The submission", "The analysis", "The discussion section", "The introduction",
    "The methodology", "The experimental design", "The literature review",
    "The second section", "The final section", "The revised draft", "The theoretical framework",
    "The opening chapter", "The measurement setup", "The supplementary file", "The proof sketch",
    "The simulation study", "The field survey", "The interview protocol", "The coding scheme",
    "The pilot phase", "The robustness check", "The ablation table", "The error analysis",
    "The sampling plan", "The case narrative", "The appendix material", "The rebuttal letter",
    "The replication package", "The derivation chain", "The evaluation harness", "The figure set",
    "The ethics statement", "The power calculation", "The coding manual", "The archival record",
)
_INNOCENT_VERBS = (
    "presents", "describes", "examines", "addresses", "explores", "outlines",
    "evaluates", "summarizes", "clarifies", "motivates", "develops", "extends",
    "documents", "interprets", "revisits", "formalizes", "sharpens", "anticipates",
    "questions", "quantifies", "illustrates", "complicates", "reframes", "bolsters",
    "undermines", "tabulates", "catalogues", "benchmarks", "dissects", "situates",
    "contextualizes", "operationalizes", "foregrounds", "streamlines", "enumerates", "probes",
)
_INNOCENT_OBJECTS = (
    "a novel approach to", "a detailed account of", "an empirical study of",
    "a systematic comparison of", "a thorough treatment of", "an incremental improvement on",
    "a careful replication of", "a persuasive argument about", "a limited perspective on",
    "a comprehensive survey of", "an elegant solution to", "a practical framework for",
    "a rigorous analysis of", "a preliminary investigation of", "a cautious reading of",
    "a provocative hypothesis about", "a measured critique of", "a granular decomposition of",
    "an ambitious synthesis of", "a workable heuristic for", "a falsifiable claim about",
    "a reproducible pipeline for", "a defensible estimate of", "an overdue correction to",
    "a compact formalization of", "a speculative extension of", "a disciplined audit of",
    "a welcome simplification of", "an uneven exploration of", "a convincing demonstration of",
    "a partial answer to", "a scalable recipe for", "a curious counterexample to",
    "a tidy generalization of", "a pragmatic compromise on", "a spirited defense of",
)
_INNOCENT_ADJECTIVES = (
    "longitudinal", "cross-sectional", "asymptotic", "bayesian", "nonparametric",
    "adversarial", "multimodal", "hierarchical", "stochastic", "deterministic",
    "qualitative", "spatial", "temporal", "categorical", "heterogeneous",
    "sparse", "high-dimensional", "low-resource", "federated", "longitudinal-panel",
    "quasi-experimental", "observational", "simulated", "annotated", "crowdsourced",
    "register-based", "multilingual", "continuous-time", "discrete-event", "agent-based",
    "single-cell", "genome-wide",
)
_INNOCENT_TOPICS = (
    "sampling bias", "model calibration", "survey design", "climate adaptation",
    "protein folding", "market dynamics", "network latency", "soil chemistry",
    "wage inequality", "sensor fusion", "language acquisition", "tumor growth",
    "energy storage", "supply chains", "voter behavior", "coral bleaching",
    "gait analysis", "opinion drift", "cache coherence", "drought response",
    "antibody binding", "traffic shaping", "misinformation spread", "glacial retreat",
    "credit scoring", "speech prosody", "crop rotation", "photon detection",
    "habitat loss", "query routing", "insulin signalling", "labor mobility",
    "reef recovery", "particle tracking", "dialect variation", "fault tolerance",
    "memory consolidation", "price discovery", "microbiome shifts", "tectonic stress",
)
_INNOCENT_PLACES = (
    "in section two", "in the abstract", "across all experiments", "throughout the text",
    "in table three", "in the supplement", "at several points", "in the conclusion",
    "in equation four", "in the limitations paragraph", "near the end", "in the cover letter",
    "in the opening pages", "around the midpoint", "in the footnotes", "in the methods part",
    "under the second heading", "in the final figure", "within the proofs", "in the data notes",
    "beside the main result", "in the closing remarks", "in scattered passages", "in the preamble",
)
_INNOCENT_TAILS = (
    "with convincing results", "but the evidence is thin", "and the framing is clear",
    "although the sample is small", "with appropriate caveats", "and merits publication",
    "despite some rough edges", "with strong statistical support", "but key citations are missing",
    "and the conclusions follow", "though the notation is heavy", "with careful controls",
    "and reads well throughout", "but the section order confuses", "yet the scope stays narrow",
    "and the pacing works", "though replication seems hard", "with admirable restraint",
    "but the baselines feel dated", "and the threats are acknowledged", "with minor slippage",
    "though the appendix sprawls", "and the stakes are explicit", "but hedging dilutes it",
    "with unusual candor", "and the figures persuade", "though jargon intrudes",
    "with defensible shortcuts", "but one lemma wobbles", "and the related work convinces",
    "though terminology drifts", "with commendable transparency", "but units go unstated",
    "and the protocol is auditable", "though effect sizes shrink", "with honest null results",
)
# Every innocent sentence carries one or two pseudo-identifiers (study
# names and surname-like tokens from a 160k token space).  They anchor a
# large share of the sentence's idf and shingle mass, so independently
# drawn sentences never look like near-copies to the sentence-, shingle-
# or index-level searches.
_PSEUDO_SYLLABLES = (
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "ne",
    "pa", "qi", "ro", "sa", "tu", "ve", "wa", "xe", "yo", "zu",
)
_CARRIERS = (
    "in the {p} trial", "for the {p} cohort", "within the {p} subset",
    "on the {p} benchmark", "across the {p} replications", "under the {p} protocol",
    "against the {p} corpus", "alongside the {p} panel",
)
_CITERS = (
    "as noted by {s}", "as argued by {s}", "following {s}", "contra {s}",
    "echoing {s}", "per {s}", "pace {s}", "unlike {s}",
)

_MILL_SUBJECTS = (
    "The writing quality", "The novelty claim", "The contribution", "The core algorithm",
    "The validation strategy", "The response plan", "The figure layout", "The reference list",
    "The hypothesis setup", "The reporting standard",
)
_MILL_VERBS = ("meets", "matches", "satisfies", "fulfils", "reaches", "upholds", "maintains", "achieves")
_MILL_LEVELS = (
    "the expected bar", "the journal standard", "the field convention",
    "the submission checklist", "the reviewer guideline", "the editorial rubric",
)
_MILL_TAILS = (
    "after minor polishing", "once typos are fixed", "pending small edits",
    "with light revision", "after formatting fixes", "following proof corrections",
)

_TYPO_SENTENCES = (
    "The statistical analyzes is robust and the conclusion are supported.",
    "This manuscript provide a important contribution to the litterature.",
    "The experiment setup are described with sufficient details to reproduce.",
    "Authors should addressed the minor comments listed bellow.",
    "The english language need a careful polish troughout the paper.",
    "Overall the paper is well writen and the topic is intresting.",
    "The methodology are describe clearly in the method section.",
    "Figures quality should be improve before the final acceptation.",
)

_CONVERGENCE_SENTENCES = (
    "This is an interesting paper.",
    "The paper is well written.",
    "I have no further comments.",
)

_FILLERS = ("really", "quite", "rather", "indeed", "perhaps")
_RECOMMENDATIONS = ("accept", "minor", "major")


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 42
    innocent_accounts: int = 50
    comments_per_account: int = 4
    mill_accounts: int = 0
    mill_templates: int = 3
    mill_comments_per_account: int = 0  # 0 means comments_per_account
    template_mutation_rate: float = 0.2
    weak_link_accounts: int = 0
    typo_sentences: int = 3
    recommending_authors: int = 0
    journals: int = 8
    start_month: str = "2017-01"
    n_months: int = 24
    mill_peak_month: str = "2018-02"
    both_fields_rate: float = 0.03
    convergence_rate: float = 0.08

    def __post_init__(self):
        if not 0.0 <= self.template_mutation_rate <= 1.0:
            raise ValueError("template_mutation_rate must be in [0, 1]")
        for name in ("innocent_accounts", "comments_per_account", "mill_accounts",
                     "mill_templates", "weak_link_accounts", "typo_sentences",
                     "recommending_authors", "journals", "n_months"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.typo_sentences > len(_TYPO_SENTENCES):
            raise ValueError(f"at most {len(_TYPO_SENTENCES)} typo sentences available")
        mill_cpa = self.mill_comments_per_account or self.comments_per_account
        if self.mill_accounts and self.mill_templates > self.mill_accounts * mill_cpa:
            raise ValueError("more mill templates than mill comments")


@dataclass
class GroundTruth:
    mill_accounts: tuple[str, ...] = ()
    weak_link_accounts: tuple[str, ...] = ()
    innocent_accounts: tuple[str, ...] = ()
    typo_sentences: tuple[str, ...] = ()
    templates: tuple[tuple[str, ...], ...] = ()
    mill_recommenders: dict[str, tuple[str, ...]] = field(default_factory=dict)
    peak_month: str = ""

    @property
    def guilty_accounts(self) -> frozenset[str]:
        return frozenset(self.mill_accounts) | frozenset(self.weak_link_accounts)

    @property
    def guilty_pairs(self) -> frozenset[tuple[str, str]]:
        mills = sorted(self.mill_accounts)
        return frozenset(
            (mills[i], mills[j]) for i in range(len(mills)) for j in range(i + 1, len(mills))
        )


def month_range(start: str, n_months: int) -> list[str]:
    year, month = (int(p) for p in start.split("-"))
    out = []
    for _ in range(n_months):
        out.append(f"{year:04d}-{month:02d}")
        month += 1
        if month > 12:
            month = 1
            year += 1
    return out


def _pseudo_word(rng: random.Random) -> str:
    return "".join(rng.choice(_PSEUDO_SYLLABLES) for _ in range(4))


def _innocent_sentence(rng: random.Random) -> str:
    carrier = rng.choice(_CARRIERS).format(p=_pseudo_word(rng))
    citer = rng.choice(_CITERS).format(s=_pseudo_word(rng).capitalize())
    family = rng.randrange(3)
    if family == 0:
        return (
            f"{rng.choice(_INNOCENT_SUBJECTS)} {rng.choice(_INNOCENT_VERBS)} "
            f"{rng.choice(_INNOCENT_OBJECTS)} {rng.choice(_INNOCENT_ADJECTIVES)} "
            f"{rng.choice(_INNOCENT_TOPICS)} {carrier}, {citer}."
        )
    if family == 1:
        return (
            f"{rng.choice(_INNOCENT_SUBJECTS)} {rng.choice(_INNOCENT_VERBS)} "
            f"{rng.choice(_INNOCENT_ADJECTIVES)} {rng.choice(_INNOCENT_TOPICS)} "
            f"{carrier} {rng.choice(_INNOCENT_PLACES)}, {citer}."
        )
    return (
        f"{rng.choice(_INNOCENT_SUBJECTS)} {rng.choice(_INNOCENT_VERBS)} "
        f"{rng.choice(_INNOCENT_OBJECTS)} {rng.choice(_INNOCENT_TOPICS)} "
        f"{carrier} {rng.choice(_INNOCENT_TAILS)}, {citer}."
    )


def _mill_sentence(rng: random.Random) -> str:
    return (
        f"{rng.choice(_MILL_SUBJECTS)} {rng.choice(_MILL_VERBS)} "
        f"{rng.choice(_MILL_LEVELS)} {rng.choice(_MILL_TAILS)}."
    )


def mutate_sentence(sentence: str, rng: random.Random) -> str:
    """Small deterministic edit that keeps the one-sentence shape and
    always changes the string."""
    words = sentence[:-1].split()
    for _ in range(10):
        op = rng.randrange(4)
        out = list(words)
        if len(out) < 3:
            out.insert(1, rng.choice(_FILLERS))
        elif op == 0:
            i = rng.randrange(1, len(out) - 1)
            out.insert(i, out[i])
        elif op == 1:
            i = rng.randrange(1, len(out) - 1)
            del out[i]
        elif op == 2:
            i = rng.randrange(1, len(out) - 1)
            out[i], out[i - 1] = out[i - 1], out[i]
        else:
            i = rng.randrange(1, len(out))
            out.insert(i, rng.choice(_FILLERS))
        candidate = " ".join(out) + "."
        if candidate != sentence:
            return candidate
    return " ".join(words) + " indeed."


def generate_rows(spec: SyntheticSpec) -> tuple[list[dict], GroundTruth]:
    """Raw review rows (all of which pass the ingest filters) plus the
    planted ground truth."""
    rng = random.Random(spec.seed)
    months = month_range(spec.start_month, spec.n_months)
    journals = [f"J{i + 1:02d}" for i in range(max(spec.journals, 1))]
    mill_cpa = spec.mill_comments_per_account or spec.comments_per_account

    rows: list[dict] = []
    seen_texts: set[str] = set()
    comment_seq = 0
    article_seq = 0

    def next_comment_id() -> str:
        nonlocal comment_seq
        comment_seq += 1
        return f"c{comment_seq:07d}"

    def next_article_id() -> str:
        nonlocal article_seq
        article_seq += 1
        return f"A{article_seq:06d}"

    def date_in(month: str) -> str:
        return f"{month}-{rng.randint(1, 28):02d}"

    def emit(uid: str, text: str, month: str, article: str,
             authors: dict | None = None, recommended: list | None = None) -> None:
        row = {
            "comment_id": next_comment_id(),
            "article_id": article,
            "referee_uid": uid,
            "journal_id": rng.choice(journals),
            "audience": "to_authors",
            "round": 1,
            "recommendation": rng.choice(_RECOMMENDATIONS),
            "submitted_at": date_in(month),
            "text": text,
        }
        if authors:
            row["authors"] = authors
        if recommended:
            row["recommended_referees"] = recommended
        rows.append(row)
        if rng.random() < spec.both_fields_rate:
            dup = dict(row)
            dup["comment_id"] = next_comment_id()
            dup["audience"] = "to_editors"
            dup.pop("authors", None)
            dup.pop("recommended_referees", None)
            rows.append(dup)

    innocent_uids = [f"uid{100000 + i}" for i in range(spec.innocent_accounts)]
    mill_uids = [f"uid{500000 + i}" for i in range(spec.mill_accounts)]
    weak_uids = [f"uid{700000 + i}" for i in range(spec.weak_link_accounts)]
    pool_authors = [f"uid{850000 + i}" for i in range(max(1, spec.innocent_accounts // 10))]
    mill_authors = [f"uid{900000 + i}" for i in range(spec.recommending_authors)]

    def innocent_comment(min_sentences: int = 4, max_sentences: int = 9) -> str:
        for _ in range(50):
            n = rng.randint(min_sentences, max_sentences)
            sentences = [_innocent_sentence(rng) for _ in range(n)]
            if rng.random() < spec.convergence_rate:
                sentences.append(rng.choice(_CONVERGENCE_SENTENCES))
            text = " ".join(sentences)
            while len(text) < 150:
                text += " " + _innocent_sentence(rng)
            if text not in seen_texts:
                seen_texts.add(text)
                return text
        raise RuntimeError("could not generate a distinct innocent comment")

    for uid in innocent_uids:
        for _ in range(spec.comments_per_account):
            article = next_article_id()
            lead = rng.choice(innocent_uids) if (innocent_uids and rng.random() < 0.1) else rng.choice(pool_authors)
            co = [rng.choice(pool_authors)] if rng.random() < 0.3 else []
            emit(uid, innocent_comment(), rng.choice(months), article,
                 authors={"lead": lead, "co": co})

    # Mill templates: 5-8 sentences each; planted typo sentences are spliced
    # into round-robin templates so several templates carry each typo.
    typos = list(_TYPO_SENTENCES[: spec.typo_sentences])
    templates: list[list[str]] = []
    if spec.mill_accounts:
        template_sentences: set[str] = set()
        for t in range(spec.mill_templates):
            n = rng.randint(5, 8)
            sentences = []
            while len(sentences) < n:
                s = _mill_sentence(rng)
                if s not in template_sentences:
                    template_sentences.add(s)
                    sentences.append(s)
            templates.append(sentences)
        for i, typo in enumerate(typos):
            for j in range(2):
                target = templates[(i * 2 + j) % len(templates)]
                target[1 + (i + j) % max(1, len(target) - 2)] = typo

    for uid in mill_uids:
        for _ in range(mill_cpa):
            template = templates[rng.randrange(len(templates))]
            sentences = [
                mutate_sentence(s, rng) if rng.random() < spec.template_mutation_rate else s
                for s in template
            ]
            text = " ".join(sentences)
            month = spec.mill_peak_month if rng.random() < 0.5 else rng.choice(months)
            article = next_article_id()
            authors = None
            recommended = None
            if mill_authors:
                author = rng.choice(mill_authors)
                authors = {"lead": author, "co": []}
                recommended = [{"author": author, "referee": uid}]
            emit(uid, text, month, article, authors=authors, recommended=recommended)

    for uid in weak_uids:
        copied_once = False
        for _ in range(spec.comments_per_account):
            if not copied_once and templates:
                template = templates[rng.randrange(len(templates))]
                stolen = rng.sample(template, k=min(2, len(template)))
                base = [_innocent_sentence(rng) for _ in range(rng.randint(4, 7))]
                text = " ".join(base[:2] + stolen + base[2:])
                copied_once = True
            else:
                text = innocent_comment()
            emit(uid, text, rng.choice(months), next_article_id())

    recommenders: dict[str, set[str]] = {}
    for row in rows:
        for rec in row.get("recommended_referees", ()):
            recommenders.setdefault(rec["referee"], set()).add(rec["author"])

    truth = GroundTruth(
        mill_accounts=tuple(mill_uids),
        weak_link_accounts=tuple(weak_uids),
        innocent_accounts=tuple(innocent_uids),
        typo_sentences=tuple(typos) if spec.mill_accounts else (),
        templates=tuple(tuple(t) for t in templates),
        mill_recommenders={k: tuple(sorted(v)) for k, v in sorted(recommenders.items())},
        peak_month=spec.mill_peak_month if spec.mill_accounts else "",
    )
    return rows, truth


def generate_synthetic(spec: SyntheticSpec) -> tuple[Corpus, GroundTruth]:
    """Generate rows and ingest them with default filters."""
    rows, truth = generate_rows(spec)
    corpus = ingest(rows, IngestConfig())
    return corpus, truth


def write_rows_jsonl(rows: Iterable[dict], path: str | Path) -> Path:
    import json

    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    return path
