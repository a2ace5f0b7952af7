"""Pairwise preference judging with positional-bias verification.

Each item compares two systems' outputs at grades 2/5/8/11. The judge
prompt is rendered in both slot orders; a grade's result only counts as
a preference when the two orders agree on the same underlying system.
Order-dependent answers are flagged inconsistent instead of being
averaged away.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .genclient import Provider

JUDGE_GRADES = (2, 5, 8, 11)

SYSTEM_A = "system_a"
SYSTEM_B = "system_b"
TIE = "tie"
INCONSISTENT = "inconsistent"

JUDGE_PROMPT_TEMPLATE = """You are evaluating two systems, both of which are trying to convert inputs to specific readability requirements to produce output suitable for the user.
I will show you the input and output of the two systems on grade 2/5/8/11, respectively. Tell me which system's output you prefer by specify system 1 or system 2 or tie if the quality is the same. Please explain the reason for your preference.
Input:
{input}
System 1 output:
grade 2:
{system1_2}
grade 5:
{system1_5}
grade 8:
{system1_8}
grade 11:
{system1_11}
System 2 output:
grade2:
{system2_2}
grade 5:
{system2_5}
grade 8:
{system2_8}
grade 11:
{system2_11}

Please use the following json format for your output:
'grade 2 preference': xxxx,
'grade 2 preference reasons': xxxx,
'grade 5 preference': xxxx,
'grade 5 preference reasons': xxxx,
'grade 8 preference': xxxx,
'grade 8 preference reasons': xxxx,
'grade 11 preference': xxxx,
'grade 11 preference reasons': xxxx
Please only output your response following the required format, and do not output any other content. Now tell me your preference and reasons:
"""


class MissingGoldError(ValueError):
    """A gold label is absent for an item/grade under accuracy scoring."""


class EmptyInputError(ValueError):
    """No judgments to aggregate."""


@dataclass(frozen=True)
class PreferenceItem:
    item_id: str
    input: str
    system_a_outputs: dict[int, str]
    system_b_outputs: dict[int, str]
    gold: dict[int, str] | None = None

    def __post_init__(self) -> None:
        for outputs in (self.system_a_outputs, self.system_b_outputs):
            if set(outputs) != set(JUDGE_GRADES):
                raise ValueError(f"outputs must cover exactly grades {JUDGE_GRADES}")


@dataclass(frozen=True)
class JudgeVerdict:
    item_id: str
    per_grade: dict[int, str]
    order: str
    raw: str
    parse_ok: bool


@dataclass(frozen=True)
class Judgment:
    """One individually counted preference (one judge/annotator, one grade)."""

    item_id: str
    source: str
    grade: int
    preference: str  # system_a | system_b | tie | inconsistent


@dataclass
class WinRateReport:
    wins_a: int
    wins_b: int
    ties: int
    inconsistent: int
    n: int
    overall: dict[str, float] | None
    per_grade: dict[int, dict[str, float] | None]


def render_judge_prompt(item: PreferenceItem, order: str) -> str:
    """Fill the judging prompt; ``ab`` puts system A in the first slot."""
    if order == "ab":
        first, second = item.system_a_outputs, item.system_b_outputs
    elif order == "ba":
        first, second = item.system_b_outputs, item.system_a_outputs
    else:
        raise ValueError(f"order must be 'ab' or 'ba', got {order!r}")
    return JUDGE_PROMPT_TEMPLATE.format(
        input=item.input,
        system1_2=first[2], system1_5=first[5], system1_8=first[8], system1_11=first[11],
        system2_2=second[2], system2_5=second[5], system2_8=second[8], system2_11=second[11],
    )


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*$", re.MULTILINE)
_VALUE_PATTERNS = [
    (re.compile(r"^\s*system\s*[_ ]?\s*1\s*$"), "system1"),
    (re.compile(r"^\s*system\s*[_ ]?\s*2\s*$"), "system2"),
    (re.compile(r"^\s*1\s*$"), "system1"),
    (re.compile(r"^\s*2\s*$"), "system2"),
    (re.compile(r"^\s*tie\s*$"), "tie"),
]


def _normalize_preference(raw_value: str) -> str | None:
    value = raw_value.strip().strip("\"'.,").strip().lower()
    for pattern, result in _VALUE_PATTERNS:
        if pattern.match(value):
            return result
    return None


def parse_verdict(raw: str, item_id: str = "", order: str = "ab") -> JudgeVerdict:
    """Extract the four per-grade preferences from a judge reply.

    Tolerates code fences, surrounding prose, and single- or
    double-quoted keys. Never raises: unresolvable grades yield
    ``parse_ok=False``.
    """
    text = _FENCE_RE.sub("", raw)
    per_grade: dict[int, str] = {}
    for grade in JUDGE_GRADES:
        pattern = re.compile(
            rf"[\"']?grade\s*{grade}\s*preference[\"']?\s*[:=]\s*([^,\n}}]*)",
            re.IGNORECASE,
        )
        # take the first occurrence that normalizes: judges sometimes echo
        # the format instructions (value "xxxx") before answering
        for match in pattern.finditer(text):
            normalized = _normalize_preference(match.group(1))
            if normalized is not None:
                per_grade[grade] = normalized
                break
    parse_ok = set(per_grade) == set(JUDGE_GRADES)
    return JudgeVerdict(item_id=item_id, per_grade=per_grade, order=order, raw=raw, parse_ok=parse_ok)


def _to_underlying(positional: str, order: str) -> str:
    if positional == "tie":
        return TIE
    if order == "ab":
        return SYSTEM_A if positional == "system1" else SYSTEM_B
    return SYSTEM_B if positional == "system1" else SYSTEM_A


def combine_orders(
    ab: JudgeVerdict, ba: JudgeVerdict, tie_policy: str = "strict"
) -> dict[int, str]:
    """Reduce the two orders to one outcome per grade.

    Both orders naming the same underlying system yields that system;
    two ties yield a tie; a parse failure is inconsistent everywhere. A
    tie mixed with a preference is inconsistent under the default
    ``strict`` policy (a half-tie aligns with nothing); ``lenient``
    records it as a tie instead.
    """
    if tie_policy not in ("strict", "lenient"):
        raise ValueError(f"unknown tie_policy: {tie_policy!r}")
    if not (ab.parse_ok and ba.parse_ok):
        return {g: INCONSISTENT for g in JUDGE_GRADES}
    combined: dict[int, str] = {}
    for grade in JUDGE_GRADES:
        first = _to_underlying(ab.per_grade[grade], "ab")
        second = _to_underlying(ba.per_grade[grade], "ba")
        if first == TIE and second == TIE:
            combined[grade] = TIE
        elif first == second and first in (SYSTEM_A, SYSTEM_B):
            combined[grade] = first
        elif tie_policy == "lenient" and TIE in (first, second):
            combined[grade] = TIE
        else:
            combined[grade] = INCONSISTENT
    return combined


@dataclass(frozen=True)
class DualVerdict:
    item_id: str
    ab: JudgeVerdict
    ba: JudgeVerdict
    outcome: dict[int, str]


def dual_order_judge(
    item: PreferenceItem, provider: Provider, tie_policy: str = "strict"
) -> DualVerdict:
    """Query the judge in both orders and combine the verdicts."""
    ab_raw = provider.complete(render_judge_prompt(item, "ab")).text
    ba_raw = provider.complete(render_judge_prompt(item, "ba")).text
    ab = parse_verdict(ab_raw, item.item_id, "ab")
    ba = parse_verdict(ba_raw, item.item_id, "ba")
    return DualVerdict(
        item_id=item.item_id, ab=ab, ba=ba, outcome=combine_orders(ab, ba, tie_policy)
    )


def judge_accuracy(
    dual_results: Sequence[DualVerdict],
    gold: Mapping[str, Mapping[int, str]],
) -> float:
    """Dual-order consistency score s in [0, 1].

    A sample counts when the combined outcome is a consistent preference
    (not tie, not inconsistent) matching the gold label; N is the number
    of (item, grade) samples.
    """
    if not dual_results:
        raise EmptyInputError("no dual verdicts")
    hits = 0
    total = 0
    for dual in dual_results:
        if dual.item_id not in gold:
            raise MissingGoldError(f"no gold labels for item {dual.item_id}")
        item_gold = gold[dual.item_id]
        for grade in JUDGE_GRADES:
            if grade not in item_gold:
                raise MissingGoldError(f"no gold label for {dual.item_id} grade {grade}")
            total += 1
            outcome = dual.outcome[grade]
            if outcome in (SYSTEM_A, SYSTEM_B) and outcome == item_gold[grade]:
                hits += 1
    return hits / total


def win_rate(judgments: Sequence[Judgment]) -> WinRateReport:
    """Count each judgment individually and report win rates.

    Every judgment counts once (no per-item aggregation across
    annotators). Inconsistent judgments are excluded from the rate
    denominator and reported separately; an all-inconsistent input
    yields absent rates rather than a division by zero.
    """
    if not judgments:
        raise EmptyInputError("no judgments")
    wins_a = sum(1 for j in judgments if j.preference == SYSTEM_A)
    wins_b = sum(1 for j in judgments if j.preference == SYSTEM_B)
    ties = sum(1 for j in judgments if j.preference == TIE)
    inconsistent = sum(1 for j in judgments if j.preference == INCONSISTENT)
    if wins_a + wins_b + ties + inconsistent != len(judgments):
        raise ValueError("judgment with unknown preference label")

    per_grade: dict[int, dict[str, float] | None] = {}
    for grade in sorted({j.grade for j in judgments}):
        subset = [j for j in judgments if j.grade == grade]
        per_grade[grade] = _rates(subset)

    return WinRateReport(
        wins_a=wins_a,
        wins_b=wins_b,
        ties=ties,
        inconsistent=inconsistent,
        n=len(judgments),
        overall=_rates(judgments),
        per_grade=per_grade,
    )


def _rates(subset: Sequence[Judgment]) -> dict[str, float] | None:
    counted = [j for j in subset if j.preference != INCONSISTENT]
    if not counted:
        return None
    denom = len(counted)
    return {
        SYSTEM_A: sum(1 for j in counted if j.preference == SYSTEM_A) / denom,
        SYSTEM_B: sum(1 for j in counted if j.preference == SYSTEM_B) / denom,
        TIE: sum(1 for j in counted if j.preference == TIE) / denom,
    }


# --- serialization ---------------------------------------------------------------


def load_items(path: str | Path) -> list[PreferenceItem]:
    """Read preference items from JSONL.

    Schema: ``{"item_id", "input", "system_a": {"2","5","8","11"},
    "system_b": {...}, "gold"?: {"2": "system_a" | "system_b" | "tie", ...}}``.
    """
    items: list[PreferenceItem] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            gold = obj.get("gold")
            items.append(
                PreferenceItem(
                    item_id=str(obj["item_id"]),
                    input=obj["input"],
                    system_a_outputs={int(k): v for k, v in obj["system_a"].items()},
                    system_b_outputs={int(k): v for k, v in obj["system_b"].items()},
                    gold={int(k): v for k, v in gold.items()} if gold else None,
                )
            )
    return items


def write_dual_verdicts(verdicts: Sequence[DualVerdict], path: str | Path) -> int:
    with Path(path).open("w", encoding="utf-8") as fh:
        for dv in verdicts:
            fh.write(
                json.dumps(
                    {
                        "item_id": dv.item_id,
                        "ab": {
                            "per_grade": {str(g): p for g, p in dv.ab.per_grade.items()},
                            "raw": dv.ab.raw,
                            "parse_ok": dv.ab.parse_ok,
                        },
                        "ba": {
                            "per_grade": {str(g): p for g, p in dv.ba.per_grade.items()},
                            "raw": dv.ba.raw,
                            "parse_ok": dv.ba.parse_ok,
                        },
                        "outcome": {str(g): o for g, o in dv.outcome.items()},
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(verdicts)


def load_dual_verdicts(path: str | Path) -> list[DualVerdict]:
    verdicts: list[DualVerdict] = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            verdicts.append(
                DualVerdict(
                    item_id=obj["item_id"],
                    ab=JudgeVerdict(
                        item_id=obj["item_id"],
                        per_grade={int(g): p for g, p in obj["ab"]["per_grade"].items()},
                        order="ab",
                        raw=obj["ab"]["raw"],
                        parse_ok=obj["ab"]["parse_ok"],
                    ),
                    ba=JudgeVerdict(
                        item_id=obj["item_id"],
                        per_grade={int(g): p for g, p in obj["ba"]["per_grade"].items()},
                        order="ba",
                        raw=obj["ba"]["raw"],
                        parse_ok=obj["ba"]["parse_ok"],
                    ),
                    outcome={int(g): o for g, o in obj["outcome"].items()},
                )
            )
    return verdicts


def judgments_from_duals(duals: Iterable[DualVerdict], source: str = "judge") -> list[Judgment]:
    """Flatten dual verdicts into individually counted judgments."""
    return [
        Judgment(item_id=dv.item_id, source=source, grade=grade, preference=outcome)
        for dv in duals
        for grade, outcome in sorted(dv.outcome.items())
    ]
