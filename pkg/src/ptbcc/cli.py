"""Command-line runner: infer / eval / synth / bench / compare.

Every command writes a ``summary.json`` echoing its full effective
configuration (defaults included) into the output directory, alongside its
result files. Output files are written atomically (temp file + rename).
Module errors exit nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import dawid_skene, majority_vote
from .data import dump_answers, dump_truths, load_dataset
from .engine import Hyperparams, export_posteriors, fit, posterior_csv_documents
from .errors import HyperparameterError, InputError, PtbccError
from .evaluation import (
    MethodRun,
    accuracy,
    benchmark,
    compare_methods,
    format_comparison,
    load_external_predictions,
)
from .synthesis import (
    SyntheticConfig,
    confusion_prior,
    dump_ground_truth,
    generate_synthetic,
)

# config-file / flag key -> Hyperparams field
HYPER_KEYS = {
    "s": "num_prototypes",
    "e": "e",
    "f": "f",
    "m": "m",
    "xi": "xi",
    "max_iter": "max_iterations",
    "seed": "seed",
    "beta_scale": "beta_scale",
    "a_scale": "a_scale",
    "extra_prototype_mode": "extra_prototype_mode",
}


def _load_hyper_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise HyperparameterError("config file must hold a flat JSON object")
    unknown = sorted(set(doc) - set(HYPER_KEYS))
    if unknown:
        raise HyperparameterError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def _effective_hyperparams(args) -> Hyperparams:
    values = {}
    if getattr(args, "config", None):
        values.update(_load_hyper_config(args.config))
    for key in HYPER_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    hp = Hyperparams(**{HYPER_KEYS[k]: v for k, v in values.items()})
    hp.validate()
    return hp


def _hyper_dict(hp: Hyperparams) -> dict:
    return {key: getattr(hp, field) for key, field in HYPER_KEYS.items()}


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, doc: dict) -> None:
    _write_atomic(out / "summary.json", json.dumps(doc, indent=2) + "\n")


def _add_hyper_flags(sub) -> None:
    sub.add_argument("--config", help="flat JSON file with hyperparameter keys")
    sub.add_argument("--s", type=int, help="number of prototype confusion matrices")
    sub.add_argument("--e", type=float, help="seed-prototype belief weight e")
    sub.add_argument("--f", type=float, help="diagonal belief weight of prototype 1")
    sub.add_argument("--m", type=float, help="off-diagonal belief weight of prototype 2")
    sub.add_argument("--xi", type=float, help="convergence threshold on phi changes")
    sub.add_argument("--max-iter", dest="max_iter", type=int, help="sweep cap")
    sub.add_argument("--seed", type=int, help="seed for any randomized initialization")
    sub.add_argument("--beta-scale", dest="beta_scale", type=float)
    sub.add_argument("--a-scale", dest="a_scale", type=float)
    sub.add_argument(
        "--extra-prototype-mode",
        dest="extra_prototype_mode",
        choices=["uniform_dirichlet", "flat_ran"],
    )


def _predictions_csv(dataset, predictions) -> str:
    lines = ["question,predicted"]
    for i, k in enumerate(np.asarray(predictions).tolist()):
        lines.append(f"{dataset.task_ids[i]},{dataset.class_labels[k]}")
    return "\n".join(lines) + "\n"


def cmd_infer(args) -> None:
    out = _out_dir(args)
    hp = _effective_hyperparams(args)
    dataset = load_dataset(
        args.answers, args.truths, duplicate_policy=args.duplicates
    )
    summary = {
        "command": "infer",
        "answers": args.answers,
        "truths": args.truths,
        "method": args.method,
        "duplicate_policy": args.duplicates,
        "export_posteriors": args.export_posteriors,
        "hyperparams": _hyper_dict(hp),
        "num_tasks": dataset.num_tasks,
        "num_workers": dataset.num_workers,
        "num_classes": dataset.num_classes,
        "num_annotations": dataset.num_annotations,
    }

    if args.method == "ptbcc":
        result = fit(dataset, hp)
        predictions = result.predictions
        posterior_doc = export_posteriors(result)
        summary.update(
            iterations=result.iterations,
            converged=result.converged,
            elbo_trace=result.elbo_trace,
            wall_time_s=result.wall_time_s,
        )
        if args.export_posteriors:
            _write_atomic(
                out / "posteriors.json", json.dumps(posterior_doc, indent=2) + "\n"
            )
            for name, text in posterior_csv_documents(result).items():
                _write_atomic(out / name, text)
    else:
        runner = majority_vote if args.method == "mv" else dawid_skene
        result = runner(dataset)
        predictions = result.predictions
        summary.update(iterations=result.iterations, converged=True)
        if args.export_posteriors:
            doc = {"phi": result.posterior.tolist(), "iterations": result.iterations}
            _write_atomic(out / "posteriors.json", json.dumps(doc, indent=2) + "\n")

    if dataset.truths:
        summary["accuracy"] = accuracy(predictions, dataset.evaluable_truths())

    _write_atomic(out / "predictions.csv", _predictions_csv(dataset, predictions))
    _write_summary(out, summary)


def cmd_eval(args) -> None:
    out = _out_dir(args)
    dataset = load_dataset(args.answers, args.truths)
    with open(args.predictions, "r", encoding="utf-8", newline="") as fh:
        predictions = load_external_predictions(fh, dataset)
    evaluable = dataset.evaluable_truths()
    acc = accuracy(predictions, evaluable)
    doc = {
        "command": "eval",
        "answers": args.answers,
        "truths": args.truths,
        "predictions": args.predictions,
        "accuracy": acc,
        "num_evaluated": sum(1 for i in evaluable if i in predictions),
        "num_truths": len(dataset.truths),
    }
    _write_atomic(out / "eval.json", json.dumps(doc, indent=2) + "\n")
    _write_summary(out, doc)


def _per_prototype(raw: str, n: int, what: str) -> list[float]:
    parts = [float(p) for p in raw.split(",")]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise InputError(f"{what} needs 1 or {n} comma-separated values")
    return parts


def cmd_synth(args) -> None:
    out = _out_dir(args)
    diag = _per_prototype(args.a_diag, args.prototypes, "--a-diag")
    off = _per_prototype(args.a_off, args.prototypes, "--a-off")
    cfg = SyntheticConfig(
        num_tasks=args.tasks,
        num_workers=args.workers,
        num_classes=args.classes,
        num_prototypes=args.prototypes,
        labels_per_task=args.labels_per_task,
        u=np.full(args.classes, args.u),
        beta=np.full(args.prototypes, args.beta),
        a=np.stack(
            [confusion_prior(args.classes, d, o) for d, o in zip(diag, off)]
        ),
    )
    dataset, truth = generate_synthetic(cfg, args.seed)
    _write_atomic(out / "answers.csv", dump_answers(dataset))
    _write_atomic(out / "truth.csv", dump_truths(dataset))
    _write_atomic(out / "ground_truth.json", dump_ground_truth(truth, cfg, args.seed))
    _write_summary(
        out,
        {
            "command": "synth",
            "tasks": args.tasks,
            "workers": args.workers,
            "classes": args.classes,
            "prototypes": args.prototypes,
            "labels_per_task": args.labels_per_task,
            "u": args.u,
            "beta": args.beta,
            "a_diag": diag,
            "a_off": off,
            "seed": args.seed,
            "num_annotations": dataset.num_annotations,
        },
    )


def cmd_bench(args) -> None:
    out = _out_dir(args)
    hp = _effective_hyperparams(args)
    dataset = load_dataset(args.answers, args.truths)
    runners = {
        "mv": majority_vote,
        "ds": dawid_skene,
        "ptbcc": lambda ds: fit(ds, hp),
    }
    seconds = benchmark(runners[args.method], dataset, args.repetitions)
    name = Path(args.answers).stem
    _write_atomic(
        out / "bench.csv", f"dataset,method,seconds\n{name},{args.method},{seconds!r}\n"
    )
    _write_summary(
        out,
        {
            "command": "bench",
            "answers": args.answers,
            "truths": args.truths,
            "method": args.method,
            "repetitions": args.repetitions,
            "hyperparams": _hyper_dict(hp),
            "seconds": seconds,
        },
    )


def cmd_compare(args) -> None:
    out = _out_dir(args)
    with open(args.runs, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    runs = [
        MethodRun(
            method_name=entry["method_name"],
            per_dataset_accuracy=entry["per_dataset_accuracy"],
            per_dataset_runtime=entry.get("per_dataset_runtime", {}),
        )
        for entry in doc
    ]
    report = compare_methods(runs, args.reference)
    _write_atomic(out / "compare.json", json.dumps(report, indent=2) + "\n")
    _write_atomic(out / "compare.txt", format_comparison(report) + "\n")
    _write_summary(
        out, {"command": "compare", "runs": args.runs, "reference": args.reference}
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptbcc",
        description="Aggregate multi-class crowd annotations into per-task truths.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default=".", help="directory for emitted files")
        p.add_argument("--verbose", action="store_true", help="per-sweep progress lines")

    p = sub.add_parser("infer", help="aggregate an answers file into predictions")
    p.add_argument("--answers", required=True)
    p.add_argument("--truths")
    p.add_argument("--method", choices=["ptbcc", "mv", "ds"], default="ptbcc")
    p.add_argument("--duplicates", choices=["reject", "keep_last"], default="reject")
    p.add_argument("--export-posteriors", action="store_true")
    _add_hyper_flags(p)
    common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a predictions file against truths")
    p.add_argument("--answers", required=True)
    p.add_argument("--truths", required=True)
    p.add_argument("--predictions", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="sample a synthetic dataset")
    p.add_argument("--tasks", type=int, required=True)
    p.add_argument("--workers", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--prototypes", type=int, default=2)
    p.add_argument("--labels-per-task", dest="labels_per_task", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--u", type=float, default=1.0, help="symmetric truth prior")
    p.add_argument("--beta", type=float, default=1.0, help="symmetric prototype prior")
    p.add_argument("--a-diag", dest="a_diag", default="8,1", help="per-prototype diagonal prior")
    p.add_argument("--a-off", dest="a_off", default="1", help="per-prototype off-diagonal prior")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time one method on one dataset")
    p.add_argument("--answers", required=True)
    p.add_argument("--truths")
    p.add_argument("--method", choices=["ptbcc", "mv", "ds"], default="ptbcc")
    p.add_argument("--repetitions", type=int, default=1)
    _add_hyper_flags(p)
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="cross-method report from accuracy runs")
    p.add_argument("--runs", required=True, help="JSON list of method runs")
    p.add_argument("--reference", default="MV")
    common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
    )
    try:
        args.func(args)
    except PtbccError as exc:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        line = getattr(exc, "line", None)
        if line is not None:
            payload["error"]["line"] = line
        print(json.dumps(payload), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
