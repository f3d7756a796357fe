"""``meetg`` command line: train, crossval, sweep, compare-elm.

Every option can also come from an environment variable ``MEETG_<OPTION>``
(e.g. ``MEETG_SEED=3``) or from a JSON ``--config`` file whose keys are the
option names with underscores. Precedence: flag, then environment, then
config file, then built-in default.

Exit statuses: 0 success, 2 usage/validation, 3 data parse, 4 numeric failure.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .data import CsvSchema, DataParseError, generate_twonorm, load_csv, load_schemas, normalize_apply, normalize_fit
from .eval import cost_estimate, evaluate, timed
from .experiment import (
    RECORDS_VERSION,
    TIMING_FIELDS,
    MeetgRunner,
    compare_elm,
    crossval,
    fold_record,
    summary_record,
    sweep,
)
from .linalg import NumericError
from .mixture import MeetgConfig, ModelFormatError, predict_meetg, save_model, train_meetg

log = logging.getLogger("meetg")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3, 4
ENV_PREFIX = "MEETG_"


class UsageError(Exception):
    pass


def int_list(text):
    """``"3,5,7"`` or inclusive range ``"10:60:10"`` -> list of ints."""
    text = str(text).strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError(f"bad range {text!r}, use start:stop[:step]")
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) == 3 else 1
        if step < 1:
            raise ValueError(f"range step must be positive in {text!r}")
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",") if p.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _opt_int(text):
    return None if text in (None, "", "none", "default") else int(text)


def _opt_float(text):
    return None if text in (None, "", "none", "default") else float(text)


# name: (converter, default)
OPTIONS = {
    "data": (str, None),
    "schema": (str, None),
    "dataset": (str, None),
    "label_column": (str, "-1"),
    "header": (_bool, False),
    "delimiter": (str, ","),
    "synthetic": (str, None),
    "samples": (int, 7400),
    "dim": (int, 20),
    "data_seed": (int, 0),
    "experts": (int_list, [7]),
    "hidden": (int_list, [40]),
    "gate_hidden": (_opt_int, None),
    "gamma": (float, 0.5),
    "folds": (int, 10),
    "repeats": (int, 1),
    "seed": (int, 0),
    "sv_cutoff": (_opt_float, None),
    "normalize": (str, "minmax"),
    "gating_cost": (str, "symmetric"),
    "out": (str, None),
    "format": (str, "table"),
    "threads": (int, 1),
    "omit_timing": (_bool, False),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("data")
    g.add_argument("--data", help="CSV file (label in the last column unless --label-column/--schema say otherwise)")
    g.add_argument("--schema", help="INI schema file describing one or more datasets")
    g.add_argument("--dataset", help="entry of --schema to use (optional if it has a single entry)")
    g.add_argument("--label-column", help="label column index (negative counts from end) or header name")
    g.add_argument("--header", action="store_const", const="true", help="first row is a header")
    g.add_argument("--delimiter", help="field delimiter; 'space' splits on whitespace")
    g.add_argument("--synthetic", choices=["twonorm"], help="generate a synthetic dataset instead of --data")
    g.add_argument("--samples", help="synthetic sample count (default 7400)")
    g.add_argument("--dim", help="synthetic dimension (default 20)")
    g.add_argument("--data-seed", help="synthetic generator seed (default 0)")

    m = common.add_argument_group("model")
    m.add_argument("--experts", help="expert count k; sweep accepts a list '3,5,7' (default 7)")
    m.add_argument("--hidden", help="expert hidden neurons L; sweep accepts '10:60:10' (default 40)")
    m.add_argument("--gate-hidden", help="gate hidden neurons (default: same as --hidden)")
    m.add_argument("--gamma", help="error scale in the gate target softmax (default 0.5)")
    m.add_argument("--sv-cutoff", help="relative singular value cutoff (default eps*max(N, L))")

    r = common.add_argument_group("run")
    r.add_argument("--folds", help="cross-validation folds (default 10)")
    r.add_argument("--repeats", help="repeats with seeds seed, seed+1, ... (default 1)")
    r.add_argument("--seed", help="base seed (default 0)")
    r.add_argument("--normalize", choices=["minmax", "none"])
    r.add_argument("--gating-cost", choices=["symmetric", "per-output"], help="gate operation-count formula")
    r.add_argument("--out", help="output file (model file for train, records otherwise)")
    r.add_argument("--format", choices=["table", "records"])
    r.add_argument("--threads", help="worker threads over folds (default 1)")
    r.add_argument("--omit-timing", action="store_const", const="true", help="drop timing fields from output")
    r.add_argument("--config", help="JSON file mirroring the options above")
    r.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="meetg", description="Mixture of ELM experts with a trainable gate.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train on the full dataset and write a model file")
    sub.add_parser("crossval", parents=[common], help="k-fold cross-validated MEETG")
    sub.add_parser("sweep", parents=[common], help="grid over expert counts and hidden sizes")
    sub.add_parser("compare-elm", parents=[common], help="MEETG against a single ELM on identical folds")
    return parser


def resolve_options(args, environ=None):
    """Merge flags, environment and config file into a plain namespace."""
    environ = os.environ if environ is None else environ
    file_cfg = {}
    config_path = args.config or environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as f:
                file_cfg = json.load(f)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        unknown = set(file_cfg) - set(OPTIONS)
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")

    opts = {}
    for name, (convert, default) in OPTIONS.items():
        raw = getattr(args, name, None)
        source = "--" + name.replace("_", "-")
        if raw is None and ENV_PREFIX + name.upper() in environ:
            raw, source = environ[ENV_PREFIX + name.upper()], ENV_PREFIX + name.upper()
        if raw is None and name in file_cfg:
            raw, source = file_cfg[name], f"config key {name!r}"
            if isinstance(raw, list):
                raw = ",".join(str(v) for v in raw)
        if raw is None:
            opts[name] = default
            continue
        try:
            opts[name] = convert(raw)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value {raw!r} for {source}: {exc}") from None
    ns = argparse.Namespace(**opts)
    ns.command = args.command
    ns.verbose = args.verbose
    if ns.threads < 1:
        raise UsageError("--threads must be >= 1")
    if ns.folds < 2:
        raise UsageError(f"--folds must be >= 2, got {ns.folds}")
    if ns.repeats < 1:
        raise UsageError(f"--repeats must be >= 1, got {ns.repeats}")
    if not ns.experts or not ns.hidden:
        raise UsageError("--experts and --hidden need at least one value")
    return ns


def load_dataset(opts):
    if opts.synthetic == "twonorm":
        return generate_twonorm(opts.samples, opts.dim, opts.data_seed)
    if opts.schema:
        schemas = load_schemas(opts.schema)
        if opts.dataset:
            if opts.dataset not in schemas:
                raise UsageError(f"dataset {opts.dataset!r} not in schema file (have {sorted(schemas)})")
            schema = schemas[opts.dataset]
        elif len(schemas) == 1:
            schema = next(iter(schemas.values()))
        else:
            raise UsageError(f"schema file lists several datasets, pick one with --dataset: {sorted(schemas)}")
        path = opts.data or schema.path
    else:
        label = opts.label_column
        schema = CsvSchema(label_column=int(label) if label.lstrip("-").isdigit() else label,
                           header=opts.header, delimiter=" " if opts.delimiter == "space" else opts.delimiter)
        path = opts.data
    if not path:
        raise UsageError("no dataset: give --data, --schema or --synthetic")
    if not os.path.isfile(path):
        raise UsageError(f"dataset file not found: {path}")
    return load_csv(path, schema)


def single(values, flag):
    if len(values) != 1:
        raise UsageError(f"{flag} takes a single value for this command, got {values}")
    return values[0]


def meetg_config(opts, k=None, hidden=None):
    hidden = hidden or single(opts.hidden, "--hidden")
    return MeetgConfig(
        n_experts=k or single(opts.experts, "--experts"),
        expert_hidden=hidden,
        gate_hidden=opts.gate_hidden or hidden,
        error_scale=opts.gamma,
        base_seed=opts.seed,
        sv_cutoff_factor=opts.sv_cutoff,
    )


@dataclass
class Emitter:
    """Writes records as JSON lines or as an aligned table."""

    fmt: str
    stream: object
    omit_timing: bool = False

    def emit(self, records, title=None):
        rows = [self._clean(r) for r in records]
        if self.fmt == "records":
            for r in rows:
                self.stream.write(json.dumps({"records_version": RECORDS_VERSION, **r}) + "\n")
            return
        if title:
            self.stream.write(title + "\n")
        if not rows:
            return
        cols = list(rows[0])
        cells = [[self._fmt(r.get(c)) for c in cols] for r in rows]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
        self.stream.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
        for row in cells:
            self.stream.write("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() + "\n")
        self.stream.write("\n")

    def _clean(self, rec):
        if not self.omit_timing:
            return rec
        return {k: v for k, v in rec.items() if k not in TIMING_FIELDS}

    @staticmethod
    def _fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)


def cmd_train(opts, out):
    dataset = load_dataset(opts)
    config = meetg_config(opts)
    x = dataset.features
    normalizer = None
    if opts.normalize == "minmax":
        normalizer = normalize_fit(x)
        x = normalize_apply(normalizer, x)
    model, train_s = timed("train", train_meetg, config, x, dataset.targets, list(dataset.class_names),
                           threads=opts.threads)
    model.normalizer = normalizer
    (_, labels), test_s = timed("predict", predict_meetg, model, x)
    report = evaluate(dataset.labels, labels, dataset.n_classes, train_s, test_s)
    model_path = opts.out or "meetg-model.json"
    save_model(model, model_path)
    cost = cost_estimate(config, dataset.n_samples, dataset.n_features, dataset.n_classes, opts.gating_cost)
    out.emit([{
        "record": "train",
        "dataset": dataset.name,
        "model_file": model_path,
        "k": config.n_experts,
        "L": config.expert_hidden,
        "L_gate": config.gate_hidden,
        "n_train": dataset.n_samples,
        "train_accuracy": report.accuracy,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "total_ops": cost.total_ops,
        "train_seconds": train_s,
    }])


def cmd_crossval(opts, out):
    dataset = load_dataset(opts)
    runner = MeetgRunner(meetg_config(opts))
    results = crossval(runner, dataset, opts.folds, opts.repeats, opts.seed, opts.normalize, opts.threads)
    summary = summary_record(dataset, runner, results, opts.folds, opts.repeats)
    if opts.gating_cost != "symmetric":
        n_train = int(round(np.mean([r.n_train for r in results])))
        cost = cost_estimate(runner.config, n_train, dataset.n_features, dataset.n_classes, opts.gating_cost)
        summary.update(gating_ops=cost.gating_ops, total_ops=cost.total_ops)
    out.emit([fold_record(dataset, runner, r) for r in results], title=f"# {dataset.name}: per-fold results")
    out.emit([summary], title="# summary")


def cmd_sweep(opts, out):
    dataset = load_dataset(opts)
    base = meetg_config(opts, k=opts.experts[0], hidden=opts.hidden[0])
    rows = sweep(dataset, base, opts.experts, opts.hidden, opts.folds, opts.repeats, opts.seed,
                 opts.normalize, opts.threads, opts.gate_hidden)
    out.emit(rows, title=f"# {dataset.name}: sweep")


def cmd_compare_elm(opts, out):
    dataset = load_dataset(opts)
    records, _ = compare_elm(dataset, meetg_config(opts), opts.folds, opts.repeats, opts.seed,
                             opts.normalize, opts.threads)
    out.emit(records, title=f"# {dataset.name}: MEETG vs single ELM")


COMMANDS = {
    "train": cmd_train,
    "crossval": cmd_crossval,
    "sweep": cmd_sweep,
    "compare-elm": cmd_compare_elm,
}


def main(argv=None, environ=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(args, environ)
        # records go to --out for every command except train, whose --out is the model file
        if opts.out and opts.command != "train":
            stream = open(opts.out, "w", encoding="utf-8")
        else:
            stream = sys.stdout
        try:
            with threadpool_limits(limits=1):
                COMMANDS[opts.command](opts, Emitter(opts.format, stream, opts.omit_timing))
        finally:
            if stream is not sys.stdout:
                stream.close()
    except (DataParseError, ModelFormatError) as exc:
        print(f"meetg: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericError as exc:
        print(f"meetg: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, OSError) as exc:
        print(f"meetg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
