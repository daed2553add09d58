"""Command-line interface.

Five subcommands: validate (check a task document and optionally a dataset),
run (evaluate a dataset under one or more conditions), report (aggregate trace
files into tables), query (run a SELECT query over the ABox snapshots stored
in a trace file), and export (print a task document).

Exit codes: 0 success, 2 validation problem, 3 backend problem, 4 data problem.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .backends import Backend, HttpBackend, RecordingBackend, ScriptedBackend
from .errors import (
    BackendError,
    ConfigError,
    DatasetError,
    MalformedResponseError,
    NotExtractable,
    OntologyError,
    QuerySyntaxError,
    RuleSyntaxError,
    RuleweaveError,
    StatsError,
    TaskDocumentError,
)
from .evaluation import (
    aggregate,
    builtin_dataset,
    cell_from_counts,
    compare,
    fold_counts,
    load_dataset,
    report_csv,
    report_markdown,
    run_condition,
    sample_dataset,
)
from .ontology import ABox, Iri
from .pipeline import CLASS_PREDICATE, Condition, load_traces, parse_condition
from .query import execute, format_tsv, parse_query
from .tasklib import (
    BUILTIN_TASK_IDS,
    TaskDefinition,
    builtin_task,
    builtin_task_document,
    load_task,
    serialize_task,
)

_CONFIG_KEYS = ("endpoint", "model", "max_concurrency", "rpm", "temperature", "timeout")

_COMP_ON = {Condition.SD: Condition.SD_COMP, Condition.SD_DIRECT: Condition.SD_DIRECT_COMP}
_COMP_OFF = {after: before for before, after in _COMP_ON.items()}


def _resolve_task(value: str) -> TaskDefinition:
    """A --task argument is a built-in id or a path to a task document."""
    if value in BUILTIN_TASK_IDS:
        return builtin_task(value)
    path = Path(value)
    if not path.exists():
        raise ConfigError(
            f"--task {value!r} is neither a built-in id ({', '.join(BUILTIN_TASK_IDS)}) "
            "nor an existing file"
        )
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TaskDocumentError(f"{path}: invalid JSON ({exc.msg})") from exc
    return load_task(document)


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown config key {unknown[0]!r}")
    return raw


def _bundled_replay(task_id: str) -> str:
    from importlib import resources

    return str(resources.files("ruleweave").joinpath(f"data/replay/{task_id}.replay.json"))


def _build_backend(args, task: TaskDefinition, config: dict) -> tuple[Backend, str]:
    """Returns the backend plus the model name used in output paths."""
    if args.backend == "scripted":
        replay = args.replay
        if replay is None:
            if task.id not in BUILTIN_TASK_IDS:
                raise ConfigError("scripted backend needs --replay for a custom task")
            replay = _bundled_replay(task.id)
        backend: Backend = ScriptedBackend.from_file(replay)
        model = args.model or "scripted"
    else:
        model = args.model or config.get("model")
        if not model:
            raise ConfigError("http backend needs a model (--model or config file)")
        endpoint = args.endpoint or config.get("endpoint")
        if not endpoint:
            raise ConfigError("http backend needs an endpoint (--endpoint or config file)")
        backend = HttpBackend(
            endpoint=endpoint,
            model=model,
            timeout=float(config.get("timeout", 120.0)),
            max_concurrency=int(config.get("max_concurrency", 4)),
            rpm=config.get("rpm"),
        )
    return backend, model


def _run_conditions(args) -> list[Condition]:
    if not args.condition:
        conditions = [Condition.SD]
    else:
        conditions = [parse_condition(value) for value in args.condition]
    if args.complementary == "on":
        conditions = [_COMP_ON.get(c, c) for c in conditions]
    elif args.complementary == "off":
        conditions = [_COMP_OFF.get(c, c) for c in conditions]
    unique: list[Condition] = []
    for condition in conditions:
        if condition not in unique:
            unique.append(condition)
    return unique


def cmd_validate(args) -> int:
    task = _resolve_task(args.task)
    print(
        f"task {task.id}: ok ({len(task.tbox.classes)} classes, "
        f"{len(task.tbox.rules)} rules, {len(task.assertion_specs)} assertion specs)"
    )
    if args.dataset:
        dataset = load_dataset(args.dataset)
        print(
            f"dataset {dataset.task_id}: ok ({len(dataset.train_records)} train, "
            f"{len(dataset.test_records)} test)"
        )
    return 0


def cmd_run(args) -> int:
    task = _resolve_task(args.task)
    if args.dataset:
        dataset = load_dataset(args.dataset)
    else:
        dataset = builtin_dataset(task.id)
    if args.sample is not None:
        dataset = sample_dataset(dataset, args.sample, args.seed)
    config = _load_config(args.config)
    backend, model = _build_backend(args, task, config)
    recorder = None
    if args.record:
        recorder = RecordingBackend(backend)
        backend = recorder
    temperature = float(args.temperature if args.temperature is not None else config.get("temperature", 0.0))

    for condition in _run_conditions(args):
        run = run_condition(
            task,
            dataset,
            condition,
            backend,
            model=model,
            temperature=temperature,
            workers=args.workers,
            out_dir=args.out,
            timestamp=args.timestamp,
        )
        if args.verbose:
            for trace in run.traces:
                print(
                    f"  {trace.instance_id}: {trace.label} -> {trace.prediction} ({trace.outcome})"
                )
        cell = run.cell
        accuracy = "-" if cell.accuracy is None else f"{cell.accuracy:.4f}"
        print(
            f"{task.id} {condition.value} model={model}: f1={cell.f1:.4f} "
            f"acc={accuracy} scored={cell.scored} errors={cell.excluded_errors} "
            f"-> {run.trace_path}"
        )
    if recorder is not None:
        recorder.save(args.record)
        print(f"recorded replay -> {args.record}")
    return 0


def _collect_trace_files(paths: Sequence[str]) -> list[Path]:
    found: list[Path] = []
    for value in paths:
        path = Path(value)
        if path.is_dir():
            found.extend(sorted(path.rglob("traces.jsonl")))
        elif path.exists():
            found.append(path)
        else:
            raise DatasetError(f"no such trace file or directory: {path}")
    if not found:
        raise DatasetError(f"no traces.jsonl files found under: {', '.join(paths)}")
    return found


def cmd_report(args) -> int:
    cells = []
    for path in _collect_trace_files(args.traces):
        header, records = load_traces(path)
        counts = fold_counts(records)
        cells.append(
            cell_from_counts(header["model"], header["task"], header["condition"], counts)
        )
    report = aggregate(cells)
    comparisons = [
        compare(cells, first, second, metric=args.metric)
        for first, second in (args.compare or [])
    ]
    rendered = report_markdown(report, comparisons)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report_csv(cells), encoding="utf-8")
        (out / "report.md").write_text(rendered, encoding="utf-8")
        print(f"wrote {out / 'report.csv'} and {out / 'report.md'}")
    else:
        print(rendered)
    return 0


def cmd_query(args) -> int:
    if args.query_file:
        query_text = Path(args.query_file).read_text(encoding="utf-8")
    else:
        query_text = args.query
    query = parse_query(query_text)

    header, records = load_traces(args.trace)
    if args.task:
        task = _resolve_task(args.task)
    elif header.get("task") in BUILTIN_TASK_IDS:
        task = builtin_task(header["task"])
    else:
        raise ConfigError(
            f"trace file is for task {header.get('task')!r}; pass --task with its document"
        )
    wanted = set(args.instance or [])
    unknown = wanted - {r["instance_id"] for r in records}
    if unknown:
        raise DatasetError(f"instance {sorted(unknown)[0]!r} not present in {args.trace}")

    abox = ABox(task.tbox)
    merged = 0
    for record in records:
        if wanted and record["instance_id"] not in wanted:
            continue
        snapshot = record.get("abox_snapshot")
        if not snapshot:
            continue
        merged += 1
        for triple in snapshot:
            subject = Iri.parse(triple["subject"])
            if triple["predicate"] == CLASS_PREDICATE:
                abox.assert_class(subject, Iri.parse(triple["object"]), triple["origin"])
            else:
                abox.assert_property(
                    subject,
                    Iri.parse(triple["predicate"]),
                    Iri.parse(triple["object"]),
                    triple["origin"],
                )
    if merged == 0:
        raise DatasetError(
            f"{args.trace} holds no ABox snapshots; query needs traces from a "
            "reasoner-backed condition (SD or SD-Comp)"
        )
    rows = execute(query, task.tbox, abox)
    sys.stdout.write(format_tsv(query, rows))
    return 0


def cmd_export(args) -> int:
    if args.task in BUILTIN_TASK_IDS:
        document = builtin_task_document(args.task)
    else:
        document = serialize_task(_resolve_task(args.task))
    print(json.dumps(document, indent=2, ensure_ascii=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ruleweave",
        description="Populate task ontologies from text with an LLM and verify the "
        "result with a deterministic rule reasoner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a task document (and optionally a dataset)")
    p_validate.add_argument("--task", required=True, help="built-in task id or path to a task JSON")
    p_validate.add_argument("--dataset", help="path to a JSONL dataset to validate")
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="evaluate a dataset under one or more conditions")
    p_run.add_argument("--task", required=True, help="built-in task id or path to a task JSON")
    p_run.add_argument("--dataset", help="JSONL dataset path (default: the bundled corpus)")
    p_run.add_argument(
        "--condition",
        action="append",
        metavar="NAME",
        help="condition to run; repeatable (FS, CoT, SD, SD-Comp, SD-Direct, "
        "SD-Direct-Comp; default SD)",
    )
    p_run.add_argument("--backend", choices=("scripted", "http"), default="scripted")
    p_run.add_argument("--replay", help="scripted backend: replay file (default: bundled)")
    p_run.add_argument("--record", help="write every exchange to this replay file")
    p_run.add_argument("--model", help="model name (http: sent to the API; also names output dirs)")
    p_run.add_argument("--endpoint", help="http backend: chat-completions URL")
    p_run.add_argument("--config", help="JSON config file (endpoint, model, max_concurrency, rpm, ...)")
    p_run.add_argument("--out", default="out", help="output directory root (default: out)")
    p_run.add_argument("--sample", type=int, help="evaluate a random sample of N test instances")
    p_run.add_argument("--seed", type=int, default=0, help="seed for --sample (default 0)")
    p_run.add_argument("--workers", type=int, default=1, help="concurrent instances (default 1)")
    p_run.add_argument(
        "--complementary",
        choices=("on", "off"),
        help="force SD and SD-Direct to their with/without-complement variants",
    )
    p_run.add_argument("--temperature", type=float, help="sampling temperature (default 0)")
    p_run.add_argument("--timestamp", help="fix the trace header timestamp (for exact diffs)")
    p_run.add_argument("-v", "--verbose", action="store_true", help="print one line per instance")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="aggregate trace files into tables")
    p_report.add_argument("traces", nargs="+", help="trace files or directories to search")
    p_report.add_argument(
        "--compare",
        nargs=2,
        action="append",
        metavar=("A", "B"),
        help="paired comparison of two conditions; repeatable",
    )
    p_report.add_argument(
        "--paired",
        action="store_true",
        help="use the paired t-test for --compare (the default and only method)",
    )
    p_report.add_argument(
        "--metric",
        choices=("f1", "accuracy", "precision", "recall"),
        default="f1",
        help="metric for --compare (default f1)",
    )
    p_report.add_argument("--out", help="write report.csv and report.md here instead of stdout")
    p_report.set_defaults(func=cmd_report)

    p_query = sub.add_parser("query", help="run a SELECT query over trace ABox snapshots")
    p_query.add_argument("--trace", required=True, help="traces.jsonl file to query")
    source = p_query.add_mutually_exclusive_group(required=True)
    source.add_argument("--query", help="query text")
    source.add_argument("--query-file", help="file containing the query")
    p_query.add_argument("--task", help="task document if the trace is not for a built-in task")
    p_query.add_argument("--instance", action="append", help="restrict to an instance; repeatable")
    p_query.set_defaults(func=cmd_query)

    p_export = sub.add_parser("export", help="print a task document as JSON")
    p_export.add_argument("task", help="built-in task id or path to a task JSON")
    p_export.set_defaults(func=cmd_export)

    return parser


_EXIT_VALIDATION = 2
_EXIT_BACKEND = 3
_EXIT_DATA = 4

_ERROR_KINDS = (
    (DatasetError, "dataset", _EXIT_DATA),
    (TaskDocumentError, "task", _EXIT_VALIDATION),
    (RuleSyntaxError, "rule", _EXIT_VALIDATION),
    (QuerySyntaxError, "query", _EXIT_VALIDATION),
    (OntologyError, "ontology", _EXIT_VALIDATION),
    (StatsError, "stats", _EXIT_VALIDATION),
    (ConfigError, "config", _EXIT_VALIDATION),
    (NotExtractable, "backend", _EXIT_BACKEND),
    (MalformedResponseError, "backend", _EXIT_BACKEND),
    (BackendError, "backend", _EXIT_BACKEND),
    (RuleweaveError, "ruleweave", _EXIT_VALIDATION),
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RuleweaveError as exc:
        for kind, label, code in _ERROR_KINDS:
            if isinstance(exc, kind):
                print(f"{label} error: {exc}", file=sys.stderr)
                return code
        raise  # unreachable: RuleweaveError is the last entry
    except ValueError as exc:
        # malformed trace files surface as ValueError from load_traces
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
