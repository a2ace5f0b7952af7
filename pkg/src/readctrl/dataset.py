"""Parallel-corpus ingestion and instruction-record construction.

Builds grade-targeted instruction records from (source, references)
pairs: every reference becomes one record whose target grade is the
rounded, clamped RGL of that reference. Reference text is copied into
records byte-identically; no normalization is applied to training
targets.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .textstat import DEFAULT_CONFIG, TokenizerConfig, readability_report

TASKS = ("simplification", "paraphrase", "entailment")

MIN_GRADE = 1
MAX_GRADE = 12

ORDINALS = {
    1: "first", 2: "second", 3: "third", 4: "fourth", 5: "fifth",
    6: "sixth", 7: "seventh", 8: "eighth", 9: "ninth", 10: "tenth",
    11: "eleventh", 12: "twelfth",
}

# prompt frame used for both training export and generation requests
PROMPT_FRAME = (
    "Below is an instruction that describes a task. "
    "Write a response that appropriately completes the request.\n"
    "### Instruction:\n"
    "{instruction}\n"
    "### Input:\n"
    "{input}\n"
    "### Response:\n"
)

GRADE_LEVEL_TEMPLATE = "please output an entailment at a {ordinal}-grade reading level."
SCORE_TEMPLATE = (
    "Given an input text, please output an entailment with a readability "
    "score around {grade}."
)

RECORD_FIELDS = (
    "id", "task", "instruction", "input", "output",
    "target_grade", "source_rgl", "reference_rgl",
)


class ParseError(ValueError):
    """A corpus line could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyCorpusError(ValueError):
    """The corpus file contained no usable example."""


class GradeOutOfRangeError(ValueError):
    """Requested grade outside the supported 1..12 range."""


@dataclass(frozen=True)
class ParallelExample:
    id: str
    task: str
    input: str
    references: tuple[str, ...]


@dataclass(frozen=True)
class InstructionRecord:
    id: str
    task: str
    instruction: str
    input: str
    output: str
    target_grade: int
    source_rgl: float
    reference_rgl: float


@dataclass(frozen=True)
class GradeHistogram:
    bins: dict[int, int]
    total: int


def load_parallel(path: str | Path, format: str, task: str) -> list[ParallelExample]:
    """Load a parallel corpus file into examples.

    ``jsonl`` lines carry ``{"id"?, "input" | "source", "references": [...]}``;
    ``tsv`` rows are source followed by one or more reference columns.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task: {task!r}")
    path = Path(path)
    stem = path.stem
    examples: list[ParallelExample] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if format == "jsonl":
                examples.append(_parse_jsonl_line(line, lineno, stem, task))
            elif format == "tsv":
                examples.append(_parse_tsv_line(line, lineno, stem, task))
            else:
                raise ValueError(f"unknown corpus format: {format!r}")
    if not examples:
        raise EmptyCorpusError(f"no examples in {path}")
    return examples


def _parse_jsonl_line(line: str, lineno: int, stem: str, task: str) -> ParallelExample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", lineno)
    source = obj.get("input", obj.get("source"))
    refs = obj.get("references")
    if not isinstance(source, str) or not source.strip():
        raise ParseError("missing or empty input", lineno)
    if not isinstance(refs, list) or not refs:
        raise ParseError("missing or empty references", lineno)
    if not all(isinstance(r, str) and r.strip() for r in refs):
        raise ParseError("references must be nonempty strings", lineno)
    ex_id = str(obj.get("id", f"{stem}-{lineno}"))
    return ParallelExample(id=ex_id, task=task, input=source, references=tuple(refs))


def _parse_tsv_line(line: str, lineno: int, stem: str, task: str) -> ParallelExample:
    cols = line.split("\t")
    if len(cols) < 2:
        raise ParseError("expected source<TAB>reference columns", lineno)
    source, refs = cols[0], [c for c in cols[1:] if c.strip()]
    if not source.strip():
        raise ParseError("empty source column", lineno)
    if not refs:
        raise ParseError("no nonempty reference column", lineno)
    return ParallelExample(id=f"{stem}-{lineno}", task=task, input=source, references=tuple(refs))


def target_grade(reference: str, config: TokenizerConfig = DEFAULT_CONFIG) -> int:
    """Round-half-up the reference RGL and clamp into 1..12."""
    value = readability_report(reference, config).rgl
    rounded = int(value + 0.5) if value >= 0 else 0
    return max(MIN_GRADE, min(MAX_GRADE, rounded))


def render_instruction(grade: int, template: str = "grade_level") -> str:
    """Render the instruction line for one target grade.

    ``grade_level`` uses the ordinal word form ("second-grade reading
    level"); ``score`` substitutes the integer readability score.
    """
    if not MIN_GRADE <= grade <= MAX_GRADE:
        raise GradeOutOfRangeError(f"grade {grade} outside {MIN_GRADE}..{MAX_GRADE}")
    if template == "grade_level":
        return GRADE_LEVEL_TEMPLATE.format(ordinal=ORDINALS[grade])
    if template == "score":
        return SCORE_TEMPLATE.format(grade=grade)
    raise ValueError(f"unknown template: {template!r}")


def build_records(
    examples: Iterable[ParallelExample],
    template: str = "grade_level",
    config: TokenizerConfig = DEFAULT_CONFIG,
) -> list[InstructionRecord]:
    """Expand examples into one record per (example, reference) pair."""
    records: list[InstructionRecord] = []
    for ex in examples:
        try:
            source_rgl = readability_report(ex.input, config).rgl
        except ValueError as exc:
            raise ValueError(f"example {ex.id}: unanalyzable input: {exc}") from exc
        for i, ref in enumerate(ex.references):
            try:
                ref_rgl = readability_report(ref, config).rgl
            except ValueError as exc:
                raise ValueError(f"example {ex.id} reference {i}: {exc}") from exc
            grade = target_grade(ref, config)
            records.append(
                InstructionRecord(
                    id=f"{ex.id}#{i}",
                    task=ex.task,
                    instruction=render_instruction(grade, template),
                    input=ex.input,
                    output=ref,
                    target_grade=grade,
                    source_rgl=source_rgl,
                    reference_rgl=ref_rgl,
                )
            )
    return records


def histogram(records: Sequence[InstructionRecord]) -> GradeHistogram:
    """Bin records by target grade; all 12 bins are always present."""
    bins = {g: 0 for g in range(MIN_GRADE, MAX_GRADE + 1)}
    for rec in records:
        bins[rec.target_grade] += 1
    return GradeHistogram(bins=bins, total=len(records))


def balance(
    records: Sequence[InstructionRecord], cap_per_bin: int, seed: int
) -> list[InstructionRecord]:
    """Downsample overfull grade bins to the cap, uniformly and seeded.

    Bins at or under the cap are returned untouched; the input order of
    kept records is preserved.
    """
    if cap_per_bin < 1:
        raise ValueError("cap_per_bin must be >= 1")
    by_grade: dict[int, list[int]] = {}
    for idx, rec in enumerate(records):
        by_grade.setdefault(rec.target_grade, []).append(idx)
    rng = random.Random(seed)
    keep: set[int] = set()
    for grade in sorted(by_grade):
        indices = by_grade[grade]
        if len(indices) > cap_per_bin:
            keep.update(rng.sample(indices, cap_per_bin))
        else:
            keep.update(indices)
    return [rec for idx, rec in enumerate(records) if idx in keep]


def export_records(
    records: Sequence[InstructionRecord], path: str | Path, format: str = "jsonl"
) -> int:
    """Write records to disk; returns the number written.

    ``jsonl`` round-trips losslessly through :func:`load_records`;
    ``alpaca_prompt`` writes ``{"id", "prompt", "response"}`` lines where
    the prompt is the full instruction/input frame ending with the
    response header.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            if format == "jsonl":
                obj = asdict(rec)
            elif format == "alpaca_prompt":
                obj = {
                    "id": rec.id,
                    "prompt": PROMPT_FRAME.format(instruction=rec.instruction, input=rec.input),
                    "response": rec.output,
                }
            else:
                raise ValueError(f"unknown export format: {format!r}")
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return len(records)


def load_records(path: str | Path) -> list[InstructionRecord]:
    """Read back records exported in the canonical jsonl format."""
    records: list[InstructionRecord] = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(InstructionRecord(**{k: obj[k] for k in RECORD_FIELDS}))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad record ({exc})", lineno) from exc
    return records
