"""Brute-force SARI reference used only by tests.

Recomputes keep/add/delete directly from n-gram multiset definitions
with exact Fraction arithmetic: reference counts are averaged across
references (realized as integer counts scaled by the reference count),
per-gram ratios are averaged over gram types, and an empty/empty
component scores 1 while a component with exactly one empty side scores
0. Kept deliberately free of Counter set-operation shortcuts so it
cannot share bugs with the production implementation.
"""

from __future__ import annotations

from fractions import Fraction


def ngrams(tokens: list[str], n: int) -> dict[tuple[str, ...], int]:
    out: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        out[gram] = out.get(gram, 0) + 1
    return out


def _f1(p: Fraction, r: Fraction) -> Fraction:
    if p + r == 0:
        return Fraction(0)
    return 2 * p * r / (p + r)


def _ratio_component(numerators: dict, denominators: dict) -> Fraction:
    """Type-averaged sum of per-gram ratios clipped by the denominator set."""
    if not denominators:
        return Fraction(1)
    total = Fraction(0)
    for gram, denom in denominators.items():
        num = numerators.get(gram, 0)
        total += Fraction(min(num, denom), denom)
    return total / len(denominators)


def oracle_sari_sentence(source: str, candidate: str, references: list[str], tokenize) -> Fraction:
    src = tokenize(source)
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    numref = len(refs)

    keep_scores, del_scores, add_scores = [], [], []
    for n in range(1, 5):
        s = {g: c * numref for g, c in ngrams(src, n).items()}
        c = {g: cnt * numref for g, cnt in ngrams(cand, n).items()}
        r: dict[tuple[str, ...], int] = {}
        for rt in refs:
            for g, cnt in ngrams(rt, n).items():
                r[g] = r.get(g, 0) + cnt

        # KEEP: kept = grams in both source and candidate; target = grams
        # in both source and references
        kept = {g: min(cnt, c[g]) for g, cnt in s.items() if g in c}
        should_keep = {g: min(cnt, r[g]) for g, cnt in s.items() if g in r}
        good_keep = {g: min(cnt, r.get(g, 0)) for g, cnt in kept.items() if g in r}
        if not kept and not should_keep:
            keep_scores.append(Fraction(1))
        elif not kept or not should_keep:
            keep_scores.append(Fraction(0))
        else:
            p = _ratio_component(good_keep, kept)
            rr = _ratio_component(good_keep, should_keep)
            keep_scores.append(_f1(p, rr))

        # DELETE (precision only): deleted = source grams missing from the
        # candidate; target = source grams missing from the references
        deleted = {g: cnt - c.get(g, 0) for g, cnt in s.items() if cnt > c.get(g, 0)}
        should_del = {g: cnt - r.get(g, 0) for g, cnt in s.items() if cnt > r.get(g, 0)}
        good_del = {
            g: cnt - r.get(g, 0) for g, cnt in deleted.items() if cnt > r.get(g, 0)
        }
        if not deleted and not should_del:
            del_scores.append(Fraction(1))
        elif not deleted or not should_del:
            del_scores.append(Fraction(0))
        else:
            total = Fraction(0)
            for gram, cnt in good_del.items():
                total += Fraction(min(cnt, deleted[gram]), deleted[gram])
            del_scores.append(total / len(deleted))

        # ADD: added gram types absent from the source; target = reference
        # gram types absent from the source
        added = {g for g in c if g not in s}
        addable = {g for g in r if g not in s}
        good_add = added & set(r)
        if not added and not addable:
            add_scores.append(Fraction(1))
        elif not added or not addable:
            add_scores.append(Fraction(0))
        else:
            p = Fraction(len(good_add), len(added))
            rr = Fraction(len(good_add), len(addable))
            add_scores.append(_f1(p, rr))

    avg = lambda xs: sum(xs) / len(xs)  # noqa: E731
    return (avg(keep_scores) + avg(del_scores) + avg(add_scores)) / 3


def oracle_sari(sources, candidates, reference_sets, tokenize) -> Fraction:
    totals = [
        oracle_sari_sentence(s, c, list(rs), tokenize)
        for s, c, rs in zip(sources, candidates, reference_sets)
    ]
    return 100 * sum(totals) / len(totals)
