"""Cross-validated experiments over MEETG and single-ELM models.

Repeat ``r`` uses seed ``base_seed + r`` for its fold plan; fold ``f`` of that
repeat trains its model with ``derive_seed(base_seed + r, f)``. Every model
compared on the same (repeat, fold) therefore sees the same split and the
same seed, and results do not depend on execution order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import normalize_apply, normalize_fit, stratified_folds
from .elm import ElmConfig, init_random
from .eval import cost_estimate, evaluate, timed
from .mixture import MeetgConfig, derive_seed, predict_meetg, train_meetg

RECORDS_VERSION = 1
TIMING_FIELDS = ("train_seconds", "test_seconds", "seconds")


@dataclass(frozen=True)
class MeetgRunner:
    config: MeetgConfig
    expert_threads: int = 1

    name = "meetg"

    def fit_predict(self, x_train, y_train, x_test, seed):
        cfg = replace(self.config, base_seed=seed)
        model, train_s = timed("meetg train", train_meetg, cfg, x_train, y_train, threads=self.expert_threads)
        (_, labels), test_s = timed("meetg test", predict_meetg, model, x_test)
        return labels, train_s, test_s

    def describe(self):
        c = self.config
        return {"model": self.name, "k": c.n_experts, "L": c.expert_hidden, "L_gate": c.gate_hidden}


@dataclass(frozen=True)
class ElmRunner:
    hidden: int
    sv_cutoff_factor: float | None = None
    weight_range: tuple = (-1.0, 1.0)
    label: str = "elm"

    @property
    def name(self):
        return self.label

    def fit_predict(self, x_train, y_train, x_test, seed):
        # same seed derivation as MEETG expert 0, so the pairing is tight
        cfg = ElmConfig(self.hidden, x_train.shape[1], y_train.shape[1], self.weight_range, derive_seed(seed, 0))
        model, train_s = timed("elm train", lambda: init_random(cfg).train(x_train, y_train, self.sv_cutoff_factor))
        scores, test_s = timed("elm test", model.predict, x_test)
        return np.argmax(scores, axis=1), train_s, test_s

    def describe(self):
        return {"model": self.name, "k": 1, "L": self.hidden, "L_gate": 0}


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    seed: int
    n_train: int
    n_test: int
    accuracy: float
    macro_precision: float
    macro_recall: float
    train_seconds: float
    test_seconds: float


def _run_fold(runner, dataset, train_idx, test_idx, seed, normalize):
    x_train, x_test = dataset.features[train_idx], dataset.features[test_idx]
    if normalize == "minmax":
        params = normalize_fit(x_train)
        x_train, x_test = normalize_apply(params, x_train), normalize_apply(params, x_test)
    elif normalize != "none":
        raise ValueError(f"unknown normalization {normalize!r}")
    y_train = dataset.targets[train_idx]
    labels, train_s, test_s = runner.fit_predict(x_train, y_train, x_test, seed)
    return evaluate(dataset.labels[test_idx], labels, dataset.n_classes, train_s, test_s)


def fold_jobs(dataset, n_folds, repeats, base_seed):
    """``(repeat, fold, model_seed, train_idx, test_idx)`` in deterministic order."""
    jobs = []
    for r in range(repeats):
        plan = stratified_folds(dataset, n_folds, base_seed + r)
        for f, train_idx, test_idx in plan.splits():
            jobs.append((r, f, derive_seed(base_seed + r, f), train_idx, test_idx))
    return jobs


def crossval(runner, dataset, n_folds=10, repeats=1, base_seed=0, normalize="minmax", threads=1):
    """Run every (repeat, fold) and return the FoldResults ordered by (repeat, fold)."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    jobs = fold_jobs(dataset, n_folds, repeats, base_seed)

    def work(job):
        r, f, seed, train_idx, test_idx = job
        rep = _run_fold(runner, dataset, train_idx, test_idx, seed, normalize)
        return FoldResult(
            r, f, seed, len(train_idx), len(test_idx), rep.accuracy,
            rep.macro_precision, rep.macro_recall, rep.train_seconds, rep.test_seconds,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, jobs))
    return [work(j) for j in jobs]


def _nan_to_none(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def fold_record(dataset, runner, res):
    return {
        "record": "fold",
        "dataset": dataset.name,
        **runner.describe(),
        "repeat": res.repeat,
        "fold": res.fold,
        "seed": res.seed,
        "n_train": res.n_train,
        "n_test": res.n_test,
        "accuracy": res.accuracy,
        "macro_precision": _nan_to_none(res.macro_precision),
        "macro_recall": _nan_to_none(res.macro_recall),
        "train_seconds": res.train_seconds,
        "test_seconds": res.test_seconds,
    }


def _defined_mean(values):
    v = np.array(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else None


def summarize(results):
    acc = np.array([r.accuracy for r in results])
    repeats = sorted({r.repeat for r in results})
    per_repeat = np.array([np.mean([r.accuracy for r in results if r.repeat == k]) for k in repeats])
    return {
        "accuracy_mean": float(acc.mean()),
        "accuracy_std": float(acc.std()),
        "repeat_std": float(per_repeat.std()),
        "error_pct": float(100.0 * (1.0 - acc.mean())),
        "macro_precision_mean": _defined_mean([r.macro_precision for r in results]),
        "macro_recall_mean": _defined_mean([r.macro_recall for r in results]),
        "train_seconds": float(np.mean([r.train_seconds for r in results])),
        "test_seconds": float(np.mean([r.test_seconds for r in results])),
    }


def summary_record(dataset, runner, results, n_folds, repeats):
    rec = {
        "record": "summary",
        "dataset": dataset.name,
        **runner.describe(),
        "folds": n_folds,
        "repeats": repeats,
    }
    rec.update(summarize(results))
    if isinstance(runner, MeetgRunner):
        n_train = int(round(np.mean([r.n_train for r in results])))
        cost = cost_estimate(runner.config, n_train, dataset.n_features, dataset.n_classes)
        rec.update(
            per_expert_ops=cost.per_expert_ops[0],
            gating_ops=cost.gating_ops,
            combine_ops=cost.combine_ops,
            total_ops=cost.total_ops,
        )
    # keep timing fields at the end of the record
    for key in ("train_seconds", "test_seconds"):
        rec[key] = rec.pop(key)
    return rec


def sweep(dataset, base_config, expert_counts, hidden_sizes, n_folds=10, repeats=1, base_seed=0,
          normalize="minmax", threads=1, gate_hidden=None):
    """Full factorial grid of cross-validated MEETG accuracies, one row per (k, L)."""
    rows = []
    for k in expert_counts:
        for L in hidden_sizes:
            cfg = replace(base_config, n_experts=k, expert_hidden=L, gate_hidden=gate_hidden or L)
            runner = MeetgRunner(cfg)
            results, seconds = timed(f"sweep k={k} L={L}", crossval, runner, dataset, n_folds, repeats,
                                     base_seed, normalize, threads)
            s = summarize(results)
            rows.append({
                "record": "sweep",
                "dataset": dataset.name,
                "k": k,
                "L": L,
                "accuracy_mean": s["accuracy_mean"],
                "accuracy_std": s["accuracy_std"],
                "seconds": seconds,
            })
    return rows


def compare_elm(dataset, config, n_folds=10, repeats=1, base_seed=0, normalize="minmax", threads=1):
    """MEETG against a single ELM of the same width and of the same total hidden budget.

    Returns ``(records, results)`` where `results` maps model name to its
    FoldResults. All three models run on identical folds and seeds.
    """
    budget = config.n_experts * config.expert_hidden + config.gate_hidden
    runners = [
        MeetgRunner(config),
        ElmRunner(config.expert_hidden, config.sv_cutoff_factor, config.weight_range, "elm-same-L"),
        ElmRunner(budget, config.sv_cutoff_factor, config.weight_range, "elm-budget"),
    ]
    results = {r.name: crossval(r, dataset, n_folds, repeats, base_seed, normalize, threads) for r in runners}
    meetg_acc = np.array([r.accuracy for r in results["meetg"]])
    records = []
    for runner in runners:
        res = results[runner.name]
        acc = np.array([r.accuracy for r in res])
        s = summarize(res)
        records.append({
            "record": "compare",
            "dataset": dataset.name,
            **runner.describe(),
            "accuracy_mean": s["accuracy_mean"],
            "accuracy_std": s["accuracy_std"],
            "meetg_delta_pp": float(100.0 * (meetg_acc.mean() - acc.mean())),
            "folds_meetg_better": int(np.sum(meetg_acc > acc)),
            "folds_meetg_worse": int(np.sum(meetg_acc < acc)),
            "train_seconds": s["train_seconds"],
            "test_seconds": s["test_seconds"],
        })
    return records, results
