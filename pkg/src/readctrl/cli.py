"""Command-line entry point wiring the toolkit end to end.

Subcommands: score, build-dataset, generate, eval, judge, winrate,
curve, serve. File outputs are written atomically (temp file + rename)
so a failing run never leaves a partial artifact; resolved settings are
echoed next to each artifact in a ``.meta.json`` sidecar for
provenance.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import SCHEMA_VERSION, __version__, autoeval, dataset, genclient, judge
from .textstat import DEFAULT_CONFIG, TokenizerConfig, analyze, ari, coleman_liau, fkgl, gunning_fog


@contextlib.contextmanager
def atomic_output(path: str | Path):
    """Yield a temp path that is renamed onto ``path`` only on success."""
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def write_text_atomic(path: str | Path, content: str) -> None:
    with atomic_output(path) as tmp:
        tmp.write_text(content, encoding="utf-8")


def write_sidecar(path: str | Path, settings: dict) -> None:
    meta = {
        "tool": "readctrl",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "settings": settings,
    }
    write_text_atomic(str(path) + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _tokenizer_config(args) -> TokenizerConfig:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh).get("tokenizer", {})
        return TokenizerConfig(
            abbreviation_list=frozenset(raw.get("abbreviations", DEFAULT_CONFIG.abbreviation_list)),
            long_word_min_chars=raw.get("long_word_min_chars", 8),
            complex_word_min_syllables=raw.get("complex_word_min_syllables", 3),
        )
    return DEFAULT_CONFIG


# --- score -----------------------------------------------------------------------


def cmd_score(args) -> int:
    if args.stdin:
        text = sys.stdin.read()
    else:
        text = Path(args.file).read_text(encoding="utf-8")
    config = _tokenizer_config(args)
    stats = analyze(text, config)
    variant = "complex_word" if args.gfi_variant == "complex" else "long_word"
    f, g = fkgl(stats), gunning_fog(stats, variant)
    a, c = ari(stats), coleman_liau(stats)
    rgl = (f + g + a + c) / 4.0
    values = {"fkgl": f, "gfi": g, "ari": a, "cli": c, "rgl": rgl}
    if args.format == "json":
        print(json.dumps(values, sort_keys=True))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["fkgl", "gfi", "ari", "cli", "rgl"])
        writer.writerow([repr(values[k]) for k in ("fkgl", "gfi", "ari", "cli", "rgl")])
        print(buf.getvalue(), end="")
    else:
        for key in ("fkgl", "gfi", "ari", "cli", "rgl"):
            print(f"{key:>5}  {values[key]:8.3f}")
    return 0


# --- build-dataset -----------------------------------------------------------------


def cmd_build_dataset(args) -> int:
    template = "grade_level" if args.template == "grade" else "score"
    config = _tokenizer_config(args)
    examples = dataset.load_parallel(args.infile, args.format, args.task)
    records = dataset.build_records(examples, template=template, config=config)
    if args.balance is not None:
        records = dataset.balance(records, args.balance, args.seed)
    with atomic_output(args.out) as tmp:
        written = dataset.export_records(records, tmp, args.export_format)
    write_sidecar(
        args.out,
        {
            "in": str(args.infile), "format": args.format, "task": args.task,
            "template": args.template, "balance": args.balance, "seed": args.seed,
            "export_format": args.export_format,
        },
    )
    if args.histogram:
        hist = dataset.histogram(records)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["grade", "count"])
        for grade in range(1, 13):
            writer.writerow([grade, hist.bins[grade]])
        write_text_atomic(args.histogram, buf.getvalue())
    print(f"wrote {written} records to {args.out}")
    return 0


# --- generate -----------------------------------------------------------------------


def parse_grades(spec: str) -> list[int]:
    grades: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            grades.extend(range(int(lo), int(hi) + 1))
        elif part:
            grades.append(int(part))
    if not grades:
        raise ValueError(f"no grades in {spec!r}")
    return grades


def cmd_generate(args) -> int:
    records = dataset.load_records(args.dataset)
    grades = parse_grades(args.grades)
    config = genclient.ProviderConfig.from_file(args.provider)
    exemplars = Path(args.exemplars).read_text(encoding="utf-8") if args.exemplars else ""
    template = "grade_level" if args.template == "grade" else "score"
    result = genclient.run_batch(
        records, grades, config, args.cache,
        template=template, tokenizer_config=_tokenizer_config(args), exemplars=exemplars,
    )
    with atomic_output(args.out) as tmp:
        genclient.write_generations(result.records, tmp)
    write_sidecar(
        args.out,
        {
            "dataset": str(args.dataset), "grades": grades, "provider": str(args.provider),
            "cache": str(args.cache), "template": args.template,
            "model": config.model_name, "sampling": config.sampling_params(),
        },
    )
    print(f"wrote {len(result.records)} generations to {args.out}")
    if result.failures:
        print(f"{len(result.failures)} requests failed:", file=sys.stderr)
        for failure in result.failures:
            print(f"  {failure['record_id']} grade {failure['grade']}: {failure['error']}", file=sys.stderr)
        return 1
    return 0


# --- eval ---------------------------------------------------------------------------


def load_reference_sets(path: str | Path) -> tuple[dict[str, list[str]], dict[str, str]]:
    """Accept either dataset records (id/input/output) or explicit
    ``{id, references, source?}`` lines; returns (references, sources)."""
    refs: dict[str, list[str]] = {}
    sources: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            rid = str(obj["id"])
            if "references" in obj:
                refs[rid] = list(obj["references"])
                if "source" in obj:
                    sources[rid] = obj["source"]
            else:
                refs[rid] = [obj["output"]]
                sources[rid] = obj["input"]
    return refs, sources


def cmd_eval(args) -> int:
    generations = genclient.load_generations(args.generations)
    refs, sources = load_reference_sets(args.references)
    external = []
    for spec in args.external or []:
        name, _, url = spec.partition("=")
        if not url:
            raise ValueError(f"--external expects NAME=URL, got {spec!r}")
        external.append(autoeval.external_score(generations, url, name, sources=sources))
    rep = autoeval.report(
        generations, refs,
        sources=sources if (sources and not args.no_sari) else None,
        external=external,
    )
    payload = rep.to_json_dict()
    payload["settings"] = {
        "generations": str(args.generations), "references": str(args.references),
        "schema_version": SCHEMA_VERSION, "version": __version__,
    }
    write_text_atomic(
        args.out_report, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    )
    if args.out_curve:
        write_text_atomic(args.out_curve, rep.curve_csv())
    if args.out_records:
        write_text_atomic(args.out_records, rep.per_record_csv())
    sari_text = f"{rep.sari:.4f}" if rep.sari is not None else "n/a"
    print(f"gap {rep.readability_gap:.4f}  bleu {rep.bleu:.4f}  sari {sari_text}")
    return 0


def cmd_curve(args) -> int:
    generations = genclient.load_generations(args.generations)
    points = autoeval.compliance_curve(generations)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["requested", "mean", "std", "n"])
    for p in points:
        writer.writerow([p.requested_grade, repr(p.mean_achieved), repr(p.std_achieved), p.n])
    if args.out:
        write_text_atomic(args.out, buf.getvalue())
    else:
        print(buf.getvalue(), end="")
    return 0


# --- judge / winrate -----------------------------------------------------------------


def cmd_judge(args) -> int:
    items = judge.load_items(args.items)
    config = genclient.ProviderConfig.from_file(args.provider)
    provider = genclient.make_provider(config)
    duals = [judge.dual_order_judge(item, provider) for item in items]
    with atomic_output(args.out) as tmp:
        judge.write_dual_verdicts(duals, tmp)
    write_sidecar(args.out, {"items": str(args.items), "provider": str(args.provider)})
    inconsistent = sum(1 for d in duals for o in d.outcome.values() if o == judge.INCONSISTENT)
    print(f"judged {len(duals)} items; {inconsistent} inconsistent grade-verdicts")
    return 0


def cmd_winrate(args) -> int:
    duals = judge.load_dual_verdicts(args.verdicts)
    report = judge.win_rate(judge.judgments_from_duals(duals))
    payload = {
        "wins_a": report.wins_a, "wins_b": report.wins_b, "ties": report.ties,
        "inconsistent": report.inconsistent, "n": report.n,
        "overall": report.overall,
        "per_grade": {str(g): r for g, r in report.per_grade.items()},
    }
    if args.gold:
        with open(args.gold, encoding="utf-8") as fh:
            raw = json.load(fh)
        gold = {iid: {int(g): label for g, label in grades.items()} for iid, grades in raw.items()}
        payload["accuracy_s"] = judge.judge_accuracy(duals, gold)
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        write_text_atomic(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


# --- serve ---------------------------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    from .annoserve import create_app

    app = create_app(
        args.tasks, args.annotators, seed=args.seed, log_path=args.log, ui_dir=args.ui
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# --- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readctrl",
        description="Readability-controlled generation toolkit",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"readctrl {__version__} (schema v{SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="readability report for one text")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--file", help="read text from a file")
    group.add_argument("--stdin", action="store_true", help="read text from stdin")
    p.add_argument("--gfi-variant", choices=["complex", "long"], default="complex")
    p.add_argument("--format", choices=["json", "csv", "table"], default="json")
    p.add_argument("--config", help="JSON run config (tokenizer section)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("build-dataset", help="build instruction records from a parallel corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["jsonl", "tsv"], required=True)
    p.add_argument("--task", choices=list(dataset.TASKS), required=True)
    p.add_argument("--template", choices=["grade", "score"], default="grade")
    p.add_argument("--out", required=True)
    p.add_argument("--export-format", choices=["jsonl", "alpaca_prompt"], default="jsonl")
    p.add_argument("--balance", type=int, default=None, help="cap per grade bin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--histogram", help="write grade histogram CSV here")
    p.add_argument("--config")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("generate", help="run a provider over dataset records")
    p.add_argument("--dataset", required=True)
    p.add_argument("--grades", required=True, help="e.g. 1-12 or 2,5,8,11")
    p.add_argument("--provider", required=True, help="provider config JSON")
    p.add_argument("--cache", required=True, help="append-only completion cache")
    p.add_argument("--out", required=True)
    p.add_argument("--template", choices=["grade", "score"], default="grade")
    p.add_argument("--exemplars", help="few-shot exemplar block file")
    p.add_argument("--config")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="compute metrics over generations")
    p.add_argument("--generations", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--external", action="append", metavar="NAME=URL")
    p.add_argument("--no-sari", action="store_true", help="skip SARI even when sources exist")
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-curve")
    p.add_argument("--out-records")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="compliance curve CSV from generations")
    p.add_argument("--generations", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("judge", help="dual-order pairwise judging")
    p.add_argument("--items", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("winrate", help="win-rate report from verdicts")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--gold", help="gold labels JSON for accuracy s")
    p.add_argument("--out")
    p.set_defaults(func=cmd_winrate)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--tasks", required=True)
    p.add_argument("--annotators", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log", required=True)
    p.add_argument("--ui", help="directory of built UI assets to mount at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"readctrl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
