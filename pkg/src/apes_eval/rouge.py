"""ROUGE-N, ROUGE-L, and ROUGE-SU scoring over token sequences.

Scores are computed on lowercased tokens with no stemming or stopword
removal, so results are reproducible bit-for-bit across platforms.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

TokenSeq = Sequence[str]

MULTI_REF_STRATEGIES = ("max", "average")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


ZERO_SCORE = RougeScore(0.0, 0.0, 0.0)


def _from_counts(overlap: int, n_candidate: int, n_reference: int) -> RougeScore:
    precision = overlap / n_candidate if n_candidate else 0.0
    recall = overlap / n_reference if n_reference else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return RougeScore(precision, recall, f1)


def _lower(tokens: TokenSeq) -> list[str]:
    return [t.lower() for t in tokens]


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _su_unit_counts(tokens: list[str], skip: int) -> Counter:
    """Unigrams plus skip-bigrams (t_i, t_j) with i < j <= i + skip, as one multiset."""
    units: Counter = Counter(tokens)
    for i in range(len(tokens)):
        for j in range(i + 1, min(i + skip, len(tokens) - 1) + 1):
            units[(tokens[i], tokens[j])] += 1
    return units


def _clipped_overlap(a: Counter, b: Counter) -> int:
    return sum((a & b).values())


def _combine(scores: list[RougeScore], multi_ref: str) -> RougeScore:
    if multi_ref not in MULTI_REF_STRATEGIES:
        raise ValueError(f"multi_ref must be one of {MULTI_REF_STRATEGIES}")
    if multi_ref == "max":
        best = scores[0]
        for s in scores[1:]:
            if s.f1 > best.f1:
                best = s
        return best
    return mean_scores(scores)


def mean_scores(scores: Sequence[RougeScore]) -> RougeScore:
    if not scores:
        return ZERO_SCORE
    n = len(scores)
    return RougeScore(
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f1 for s in scores) / n,
    )


def _check_references(references: Sequence[TokenSeq]) -> None:
    if not references:
        raise ValueError("at least one reference is required")


def rouge_n(
    candidate: TokenSeq,
    references: Sequence[TokenSeq],
    n: int = 1,
    multi_ref: str = "max",
) -> RougeScore:
    """Clipped n-gram multiset overlap between candidate and references."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_references(references)
    cand = _ngram_counts(_lower(candidate), n)
    n_cand = sum(cand.values())
    scores = []
    for ref in references:
        refc = _ngram_counts(_lower(ref), n)
        scores.append(_from_counts(_clipped_overlap(cand, refc), n_cand, sum(refc.values())))
    return _combine(scores, multi_ref)


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    """Longest common subsequence length by dynamic programming."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(
    candidate: TokenSeq,
    references: Sequence[TokenSeq],
    multi_ref: str = "max",
) -> RougeScore:
    """LCS-based score: P = lcs/|candidate|, R = lcs/|reference|."""
    _check_references(references)
    cand = _lower(candidate)
    scores = []
    for ref in references:
        ref_l = _lower(ref)
        if not cand or not ref_l:
            scores.append(ZERO_SCORE)
            continue
        ell = lcs_length(cand, ref_l)
        scores.append(_from_counts(ell, len(cand), len(ref_l)))
    return _combine(scores, multi_ref)


def rouge_su(
    candidate: TokenSeq,
    references: Sequence[TokenSeq],
    skip: int = 4,
    multi_ref: str = "max",
) -> RougeScore:
    """Clipped overlap over the union multiset of unigrams and skip-bigrams."""
    if skip < 1:
        raise ValueError("skip must be >= 1")
    _check_references(references)
    cand = _su_unit_counts(_lower(candidate), skip)
    n_cand = sum(cand.values())
    scores = []
    for ref in references:
        refc = _su_unit_counts(_lower(ref), skip)
        scores.append(_from_counts(_clipped_overlap(cand, refc), n_cand, sum(refc.values())))
    return _combine(scores, multi_ref)


@dataclass(frozen=True)
class RougeConfig:
    """One scoring variant: "n" (with n), "l", or "su" (with skip)."""

    variant: str
    n: int = 1
    skip: int = 4
    multi_ref: str = "max"

    def __post_init__(self) -> None:
        if self.variant not in ("n", "l", "su"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n < 1 or self.skip < 1:
            raise ValueError("n and skip must be >= 1")
        if self.multi_ref not in MULTI_REF_STRATEGIES:
            raise ValueError(f"multi_ref must be one of {MULTI_REF_STRATEGIES}")

    def score(self, candidate: TokenSeq, references: Sequence[TokenSeq]) -> RougeScore:
        if self.variant == "n":
            return rouge_n(candidate, references, self.n, self.multi_ref)
        if self.variant == "l":
            return rouge_l(candidate, references, self.multi_ref)
        return rouge_su(candidate, references, self.skip, self.multi_ref)


# Variants reported by the evaluation pipeline, in report order.
REPORT_VARIANTS: dict[str, RougeConfig] = {
    "r1": RougeConfig("n", n=1),
    "r2": RougeConfig("n", n=2),
    "rl": RougeConfig("l"),
    "rsu4": RougeConfig("su", skip=4),
}
