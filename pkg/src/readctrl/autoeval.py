"""Automatic evaluation: readability gap, compliance curves, BLEU, SARI,
and the external-scorer plugin boundary.

BLEU and SARI share one frozen tokenization: lowercase, punctuation
separated into its own tokens, then whitespace split. BLEU is corpus
level (clipped counts summed over segments before the geometric mean)
and unsmoothed; a smoothed per-sentence variant exists for diagnostics
only. SARI follows the n-gram multiset definition with reference counts
averaged across references; a component whose candidate-derived and
target sets are both empty scores 1 for that order, while a lone empty
side scores 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import httpx

from .genclient import GenerationRecord


class EmptyInputError(ValueError):
    """Raised when a metric receives no records or segments."""


class PluginError(RuntimeError):
    """An external scorer failed for one record."""


_TOKEN_RE = re.compile(r"[\w']+|[^\w\s]")

MAX_NGRAM_ORDER = 4


def tokenize(text: str) -> list[str]:
    """Shared metric tokenization: lowercase, punctuation as own tokens."""
    return _TOKEN_RE.findall(text.lower())


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# --- readability gap and compliance curve ------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    requested_grade: int
    mean_achieved: float
    std_achieved: float
    n: int


def readability_gap(records: Sequence[GenerationRecord]) -> float:
    """Mean absolute difference between achieved RGL and requested grade."""
    if not records:
        raise EmptyInputError("no generation records")
    return sum(abs(r.achieved.rgl - r.requested_grade) for r in records) / len(records)


def compliance_curve(records: Sequence[GenerationRecord]) -> list[CurvePoint]:
    """Mean and population std of achieved RGL per requested grade."""
    if not records:
        raise EmptyInputError("no generation records")
    by_grade: dict[int, list[float]] = {}
    for rec in records:
        by_grade.setdefault(rec.requested_grade, []).append(rec.achieved.rgl)
    points = []
    for grade in sorted(by_grade):
        values = by_grade[grade]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        points.append(
            CurvePoint(
                requested_grade=grade,
                mean_achieved=mean,
                std_achieved=math.sqrt(var),
                n=len(values),
            )
        )
    return points


# --- BLEU ---------------------------------------------------------------------


def bleu(
    candidates: Sequence[str],
    reference_sets: Sequence[Sequence[str]],
    max_order: int = MAX_NGRAM_ORDER,
) -> float:
    """Corpus BLEU in [0, 1], n-gram orders 1..4, brevity penalty.

    Clipped counts are summed over all segments before the geometric
    mean. Orders with a zero denominator over the whole corpus (every
    candidate shorter than n) are excluded from the mean; any included
    order with zero matches makes the score 0 (no smoothing).
    """
    _validate_aligned(candidates, reference_sets)
    clipped = [0] * (max_order + 1)
    totals = [0] * (max_order + 1)
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, reference_sets):
        c_tokens = tokenize(cand)
        r_tokens = [tokenize(r) for r in refs]
        cand_len += len(c_tokens)
        ref_len += _closest_length(len(c_tokens), [len(r) for r in r_tokens])
        for n in range(1, max_order + 1):
            c_counts = _ngram_counts(c_tokens, n)
            if not c_counts:
                continue
            max_ref: Counter = Counter()
            for rt in r_tokens:
                for gram, count in _ngram_counts(rt, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            totals[n] += sum(c_counts.values())
            clipped[n] += sum(min(count, max_ref[gram]) for gram, count in c_counts.items())

    log_sum = 0.0
    orders = 0
    for n in range(1, max_order + 1):
        if totals[n] == 0:
            continue
        if clipped[n] == 0:
            return 0.0
        log_sum += math.log(clipped[n] / totals[n])
        orders += 1
    if orders == 0 or cand_len == 0:
        return 0.0
    geo_mean = math.exp(log_sum / orders)
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return geo_mean * bp


def sentence_bleu(candidate: str, references: Sequence[str], max_order: int = MAX_NGRAM_ORDER) -> float:
    """Smoothed single-segment BLEU for per-record diagnostics.

    Higher orders with zero matches receive one phantom match in both
    numerator and denominator; the corpus-level number stays unsmoothed.
    """
    c_tokens = tokenize(candidate)
    if not c_tokens:
        return 0.0
    r_tokens = [tokenize(r) for r in references]
    log_sum = 0.0
    orders = 0
    for n in range(1, max_order + 1):
        c_counts = _ngram_counts(c_tokens, n)
        if not c_counts:
            continue
        max_ref: Counter = Counter()
        for rt in r_tokens:
            for gram, count in _ngram_counts(rt, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        total = sum(c_counts.values())
        matched = sum(min(count, max_ref[gram]) for gram, count in c_counts.items())
        if matched == 0:
            if n == 1:
                return 0.0
            matched, total = 1, total + 1
        log_sum += math.log(matched / total)
        orders += 1
    if orders == 0:
        return 0.0
    geo_mean = math.exp(log_sum / orders)
    ref_len = _closest_length(len(c_tokens), [len(r) for r in r_tokens])
    bp = 1.0 if len(c_tokens) > ref_len else math.exp(1.0 - ref_len / len(c_tokens))
    return geo_mean * bp


def _closest_length(cand_len: int, ref_lens: Sequence[int]) -> int:
    return min(ref_lens, key=lambda rl: (abs(rl - cand_len), rl))


def _validate_aligned(candidates, reference_sets) -> None:
    if not candidates:
        raise EmptyInputError("no candidate segments")
    if len(candidates) != len(reference_sets):
        raise ValueError("candidates and reference sets are not aligned")
    if any(not refs for refs in reference_sets):
        raise ValueError("every segment needs at least one reference")


# --- SARI ---------------------------------------------------------------------


def sari(
    sources: Sequence[str],
    candidates: Sequence[str],
    reference_sets: Sequence[Sequence[str]],
) -> float:
    """Macro-averaged SARI in [0, 100] over aligned segments."""
    if not sources:
        raise EmptyInputError("no source segments")
    if not (len(sources) == len(candidates) == len(reference_sets)):
        raise ValueError("sources, candidates, and references must align")
    total = 0.0
    for src, cand, refs in zip(sources, candidates, reference_sets):
        if not refs:
            raise ValueError("every segment needs at least one reference")
        total += _sari_sentence(src, cand, list(refs))
    return 100.0 * total / len(sources)


def _sari_sentence(source: str, candidate: str, references: list[str]) -> float:
    src = tokenize(source)
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    numref = len(refs)

    keep_total = del_total = add_total = 0.0
    for n in range(1, MAX_NGRAM_ORDER + 1):
        s_rep = Counter({g: c * numref for g, c in _ngram_counts(src, n).items()})
        c_rep = Counter({g: c * numref for g, c in _ngram_counts(cand, n).items()})
        r_sum: Counter = Counter()
        for rt in refs:
            r_sum.update(_ngram_counts(rt, n))

        keep_total += _keep_score(s_rep, c_rep, r_sum)
        del_total += _del_score(s_rep, c_rep, r_sum)
        add_total += _add_score(s_rep, c_rep, r_sum)

    k = MAX_NGRAM_ORDER
    return (keep_total / k + del_total / k + add_total / k) / 3.0


def _component(good: Counter, denom: Counter) -> float:
    return sum(good[g] / denom[g] for g in good) / len(denom)


def _empty_sides(candidate_side: Counter | set, target_side: Counter | set) -> float | None:
    if not candidate_side and not target_side:
        return 1.0
    if not candidate_side or not target_side:
        return 0.0
    return None


def _keep_score(s_rep: Counter, c_rep: Counter, r_sum: Counter) -> float:
    kept = s_rep & c_rep
    should_keep = s_rep & r_sum
    fixed = _empty_sides(kept, should_keep)
    if fixed is not None:
        return fixed
    good = kept & r_sum
    precision = _component(good, kept)
    recall = _component(good, should_keep)
    return _f1(precision, recall)


def _del_score(s_rep: Counter, c_rep: Counter, r_sum: Counter) -> float:
    deleted = s_rep - c_rep
    should_del = s_rep - r_sum
    fixed = _empty_sides(deleted, should_del)
    if fixed is not None:
        return fixed
    good = deleted - r_sum
    return _component(good, deleted)


def _add_score(s_rep: Counter, c_rep: Counter, r_sum: Counter) -> float:
    added = set(c_rep) - set(s_rep)
    addable = set(r_sum) - set(s_rep)
    fixed = _empty_sides(added, addable)
    if fixed is not None:
        return fixed
    good = added & set(r_sum)
    return _f1(len(good) / len(added), len(good) / len(addable))


def _f1(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


# --- external scorer plugin ---------------------------------------------------


@dataclass
class ExternalScores:
    metric: str
    scores: dict[str, float] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


def external_score(
    records: Sequence[GenerationRecord],
    endpoint: str,
    metric: str,
    sources: Mapping[str, str] | None = None,
    timeout: float = 30.0,
    client: httpx.Client | None = None,
) -> ExternalScores:
    """Score each record via an external HTTP scorer.

    Request schema is ``{"id", "source", "output"}``; the response must
    be ``{"id", "score"}`` with score in [0, 1]. A failing or out-of-range
    response marks that record failed without aborting the batch.
    """
    result = ExternalScores(metric=metric)
    own_client = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        for rec in records:
            source = sources.get(rec.record_id, "") if sources else ""
            payload = {"id": rec.record_id, "source": source, "output": rec.output}
            try:
                resp = client.post(endpoint, json=payload)
                resp.raise_for_status()
                score = float(resp.json()["score"])
                if not 0.0 <= score <= 1.0:
                    raise PluginError(f"score {score} outside [0, 1]")
                result.scores[rec.record_id] = score
            except Exception as exc:  # noqa: BLE001 - per-record isolation
                result.failures[rec.record_id] = f"{type(exc).__name__}: {exc}"
    finally:
        if own_client:
            client.close()
    return result


# --- report -------------------------------------------------------------------


@dataclass
class EvalReport:
    readability_gap: float
    bleu: float
    sari: float | None
    curve: list[CurvePoint]
    external_scores: dict[str, float]
    external_failures: dict[str, int]
    per_record: list[dict]
    std_convention: str = "population"

    def to_json_dict(self) -> dict:
        return {
            "readability_gap": self.readability_gap,
            "bleu": self.bleu,
            "sari": self.sari,
            "curve": [
                {
                    "requested": p.requested_grade,
                    "mean": p.mean_achieved,
                    "std": p.std_achieved,
                    "n": p.n,
                }
                for p in self.curve
            ],
            "external_scores": dict(sorted(self.external_scores.items())),
            "external_failures": dict(sorted(self.external_failures.items())),
            "per_record": self.per_record,
            "std_convention": self.std_convention,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def curve_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["requested", "mean", "std", "n"])
        for p in self.curve:
            writer.writerow([p.requested_grade, repr(p.mean_achieved), repr(p.std_achieved), p.n])
        return buf.getvalue()

    def per_record_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "requested", "achieved_rgl", "gap"])
        for row in self.per_record:
            writer.writerow(
                [row["id"], row["requested"], repr(row["achieved_rgl"]), repr(row["gap"])]
            )
        return buf.getvalue()


def report(
    records: Sequence[GenerationRecord],
    reference_sets: Mapping[str, Sequence[str]],
    sources: Mapping[str, str] | None = None,
    external: Iterable[ExternalScores] = (),
) -> EvalReport:
    """Assemble the full evaluation report for a generation run.

    ``reference_sets`` and ``sources`` are keyed by the instruction
    record id; every generation record must have references. SARI is
    only computed when sources are supplied.
    """
    if not records:
        raise EmptyInputError("no generation records")
    missing = [r.record_id for r in records if r.record_id not in reference_sets]
    if missing:
        raise ValueError(f"records without references: {missing[:5]}")

    candidates = [r.output for r in records]
    refs = [list(reference_sets[r.record_id]) for r in records]
    bleu_score = bleu(candidates, refs)
    sari_score = None
    if sources is not None:
        src_list = [sources[r.record_id] for r in records]
        sari_score = sari(src_list, candidates, refs)

    per_record = [
        {
            "id": rec.record_id,
            "requested": rec.requested_grade,
            "achieved_rgl": rec.achieved.rgl,
            "gap": abs(rec.achieved.rgl - rec.requested_grade),
        }
        for rec in records
    ]
    gap = sum(row["gap"] for row in per_record) / len(per_record)

    ext_scores: dict[str, float] = {}
    ext_failures: dict[str, int] = {}
    for ext in external:
        if ext.scores:
            ext_scores[ext.metric] = sum(ext.scores.values()) / len(ext.scores)
        ext_failures[ext.metric] = len(ext.failures)

    return EvalReport(
        readability_gap=gap,
        bleu=bleu_score,
        sari=sari_score,
        curve=compliance_curve(records),
        external_scores=ext_scores,
        external_failures=ext_failures,
        per_record=per_record,
    )
