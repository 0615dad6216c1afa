"""Desk-scale experiment runners.

Each runner takes an :class:`ExperimentConfig`, produces one row per
measurement and a summary with medians, Mann-Whitney p-values and boolean
checks. :func:`run_experiment` writes ``results.csv`` (config header,
content hash, rows) and ``summary.json``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .cimodel import CiStatement, IndependenceModel, Status, all_triples, tree_test_triples
from .citest import DataOracle, GraphOracle, mann_whitney_u
from .discovery import dag_from_order, intersection_marginals, mmd_tree, tree_pc, undirected_full_conditional
from .graphoid import closure
from .graphs import shd, skeleton, topological_order
from .redundancy import graphoid_redundant_dependences, iterated_candidates
from .synth import (
    binary_bn_sample,
    er_dag,
    factor_gibbs_sample,
    linear_gaussian,
    make_rng,
    random_oriented_tree,
    random_spanning_tree,
    sample,
    two_dataset_dag,
    two_dataset_ug,
)


@dataclass
class ExperimentConfig:
    experiment: str
    trials: int
    n: int
    samples: int
    alpha: float = 0.01
    seed: int = 0
    flags: dict = field(default_factory=dict)
    out: str | None = None

    def header(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d["version"] = __version__
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.header(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: list[str]
    rows: list[dict]
    summary: dict
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("# config " + json.dumps(self.config.header(), sort_keys=True) + "\n")
        buf.write("# sha256 " + self.config.content_hash() + "\n")
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r.get(k)) for k in self.columns})
        return buf.getvalue()

    def summary_dict(self) -> dict:
        return {
            "config": self.config.header(),
            "sha256": self.config.content_hash(),
            "summary": self.summary,
            "checks": self.checks,
            "passed": self.passed,
        }


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return "" if v is None else v


def _median(xs) -> float:
    return float(np.median(xs)) if len(xs) else float("nan")


def _mw(a, b, alternative: str) -> float:
    return mann_whitney_u(a, b, alternative) if len(a) and len(b) else float("nan")


def _tested_errors(oracle, candidates) -> tuple[int, int]:
    """Test each predicted dependence; count how many come out independent."""
    count = errors = 0
    for st in candidates:
        verdict = oracle.query(st.triple).verdict
        count += 1
        errors += verdict is Status.INDEPENDENT
        if hasattr(candidates, "report"):
            candidates.report(verdict)
    return count, errors


# --- p-values of Graphoid-implied statements ---------------------------------------


def exp_graphoid_pvalues(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    for trial in range(cfg.trials):
        rng = make_rng(cfg.seed, trial)
        dag = er_dag(cfg.n, cfg.flags.get("edge_prob", 0.5), rng)
        data = sample(linear_gaussian(dag, rng), cfg.samples, rng)
        oracle = DataOracle(data, "fisher_z", cfg.alpha)
        triples = list(all_triples(data.universe))
        order = rng.permutation(len(triples))
        prior: list[CiStatement] = []
        for step, k in enumerate(order):
            t = triples[k]
            implied = "none"
            if prior:
                cl = closure(prior, cfg.flags.get("use_intersection", True), data.universe, complete=True)
                if cl.contradiction is not None:
                    implied = "inconsistent"
                elif cl.status(t) is not Status.UNKNOWN:
                    implied = cl.status(t).value
            r = oracle.test(t)
            prior.append(r.statement)
            rows.append(
                {"trial": trial, "step": step, "triple": str(t), "p_value": r.p_value, "verdict": r.verdict.value, "implied": implied}
            )
    p_ind = [r["p_value"] for r in rows if r["implied"] == Status.INDEPENDENT.value]
    p_dep = [r["p_value"] for r in rows if r["implied"] == Status.DEPENDENT.value]
    frac_above = float(np.mean(np.array(p_ind) > cfg.alpha)) if p_ind else float("nan")
    summary = {
        "alpha": cfg.alpha,
        "implied_independent_p": p_ind,
        "implied_dependent_p": p_dep,
        "n_implied_independent": len(p_ind),
        "n_implied_dependent": len(p_dep),
        "n_inconsistent": sum(r["implied"] == "inconsistent" for r in rows),
        "fraction_independent_above_alpha": frac_above,
        "first_step_implied": sum(r["implied"] != "none" for r in rows if r["step"] == 0),
    }
    checks = {
        "implied_independent_mostly_above_alpha": bool(p_ind) and frac_above >= 0.8,
        "nothing_implied_on_first_test": summary["first_step_implied"] == 0,
    }
    cols = ["trial", "step", "triple", "p_value", "verdict", "implied"]
    return ExperimentResult(cfg, cols, rows, summary, checks)


# --- two data-generating families, two model kinds ----------------------------------


def exp_two_datasets(cfg: ExperimentConfig) -> ExperimentResult:
    burn_in = cfg.flags.get("burn_in", 1000)
    thinning = cfg.flags.get("thinning", 2)
    rows = []
    for trial in range(cfg.trials):
        rng = make_rng(cfg.seed, trial)
        datasets = {
            "dag": binary_bn_sample(two_dataset_dag(), rng, cfg.samples),
            "ug": factor_gibbs_sample(two_dataset_ug(), rng, cfg.samples, burn_in, thinning),
        }
        for data_kind, data in datasets.items():
            for model_kind in ("dag", "ug"):
                oracle = DataOracle(data, "chi_square", cfg.alpha)
                rep = dag_from_order(oracle) if model_kind == "dag" else undirected_full_conditional(oracle)
                count, errors = _tested_errors(oracle, iterated_candidates(rep.graph, rep.statements))
                rows.append(
                    {
                        "trial": trial,
                        "data": data_kind,
                        "model": model_kind,
                        "n_candidates": count,
                        "n_errors": errors,
                        "error_fraction": errors / count if count else float("nan"),
                    }
                )

    def fr(d, m):
        return [r["error_fraction"] for r in rows if r["data"] == d and r["model"] == m and r["n_candidates"]]

    summary, checks = {}, {}
    for d in ("dag", "ug"):
        other = "ug" if d == "dag" else "dag"
        matched, mismatched = fr(d, d), fr(d, other)
        p = _mw(matched, mismatched, "less")
        summary[f"{d}_data"] = {
            "median_matched": _median(matched),
            "median_mismatched": _median(mismatched),
            "n_matched": len(matched),
            "n_mismatched": len(mismatched),
            "mann_whitney_p": p,
        }
        checks[f"{d}_data_matched_median_lower"] = _median(matched) < _median(mismatched)
        checks[f"{d}_data_matched_less_p<0.01"] = p < 0.01
    pooled_m = fr("dag", "dag") + fr("ug", "ug")
    pooled_x = fr("dag", "ug") + fr("ug", "dag")
    summary["pooled"] = {
        "median_matched": _median(pooled_m),
        "median_mismatched": _median(pooled_x),
        "mann_whitney_p": _mw(pooled_m, pooled_x, "less"),
    }
    cols = ["trial", "data", "model", "n_candidates", "n_errors", "error_fraction"]
    return ExperimentResult(cfg, cols, rows, summary, checks)


# --- purely graphical versus Graphoid-redundant predictions -------------------------


def exp_graphoid_vs_graphical(cfg: ExperimentConfig) -> ExperimentResult:
    sizes = cfg.flags.get("sample_sizes", [20, 2000])
    rows = []
    for size_idx, m in enumerate(sizes):
        for trial in range(cfg.trials):
            rng = make_rng(cfg.seed, size_idx, trial)
            truth = er_dag(cfg.n, cfg.flags.get("edge_prob", 0.3), rng)
            data = sample(linear_gaussian(truth, rng), m, rng)
            oracle = DataOracle(data, "fisher_z", cfg.alpha)
            rep = dag_from_order(oracle, topological_order(truth))
            singles = list(all_triples(data.universe))
            n_g, e_g = _tested_errors(oracle, iterated_candidates(rep.graph, rep.statements, singles))
            gr = sorted(graphoid_redundant_dependences(rep.graph, rep.statements, singles), key=lambda s: s.triple.sort_key())
            n_r, e_r = _tested_errors(oracle, gr)
            rows.append(
                {
                    "samples": m,
                    "trial": trial,
                    "recovered": rep.graph == truth,
                    "n_graphical": n_g,
                    "errors_graphical": e_g,
                    "fraction_graphical": e_g / n_g if n_g else float("nan"),
                    "n_graphoid": n_r,
                    "errors_graphoid": e_r,
                    "fraction_graphoid": e_r / n_r if n_r else float("nan"),
                }
            )
    summary, gaps = {}, {}
    for m in sizes:
        rs = [r for r in rows if r["samples"] == m]
        g = [r["fraction_graphical"] for r in rs if r["n_graphical"]]
        c = [r["fraction_graphoid"] for r in rs if r["n_graphoid"]]
        gaps[m] = _median(g) - _median(c)
        summary[str(m)] = {
            "median_graphical": _median(g),
            "median_graphoid": _median(c),
            "mean_graphical": float(np.mean(g)) if g else float("nan"),
            "mean_graphoid": float(np.mean(c)) if c else float("nan"),
            "n_graphical": len(g),
            "n_graphoid": len(c),
            "mann_whitney_p": _mw(g, c, "greater"),
            "recovery_rate": float(np.mean([r["recovered"] for r in rs])) if rs else float("nan"),
        }
    small, large = min(sizes), max(sizes)
    checks = {
        "small_sample_graphical_larger_p<0.05": summary[str(small)]["mann_whitney_p"] < 0.05,
        "large_sample_gap_smaller": gaps[large] < gaps[small],
        "large_sample_recovery>=0.9": summary[str(large)]["recovery_rate"] >= 0.9,
    }
    summary["median_gap"] = {str(k): v for k, v in gaps.items()}
    cols = list(rows[0]) if rows else []
    return ExperimentResult(cfg, cols, rows, summary, checks)


# --- tree recovery: MMD versus TreePC, plus statement-set arms -----------------------


def _model_from(oracle, triples) -> IndependenceModel:
    return IndependenceModel(oracle.universe, {t: oracle.query(t).verdict for t in triples})


def exp_tree_correction(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    for trial in range(cfg.trials):
        rng = make_rng(cfg.seed, trial)
        truth = random_oriented_tree(cfg.n, rng)
        data = sample(linear_gaussian(truth, rng), cfg.samples, rng)
        oracle = DataOracle(data, "fisher_z", cfg.alpha)
        true_tree = skeleton(truth)
        s = list(tree_test_triples(data.universe))
        model = _model_from(oracle, s)
        mmd = mmd_tree(model, s)
        tpc = tree_pc(DataOracle(data, "fisher_z", cfg.alpha))
        row = {
            "trial": trial,
            "shd_mmd": shd(mmd.graph, true_tree),
            "shd_tree_pc": shd(tpc.graph, true_tree),
            "mmd_tie": mmd.tie,
            "truth_among_minimizers": any(g == true_tree for g in mmd.graphs),
        }
        if cfg.flags.get("arms", True):
            s_prime = [st.triple for st in tpc.statements]
            u_stmts, w_stmts = intersection_marginals(model)
            w = [st.triple for st in w_stmts]
            arm_model = IndependenceModel(
                data.universe, {**dict(model.status), **{st.triple: st.verdict for st in u_stmts}}
            )
            a1 = list(dict.fromkeys(s_prime + w))
            a2 = list(dict.fromkeys(a1 + [st.triple for st in u_stmts]))
            row["shd_a1"] = shd(mmd_tree(arm_model, a1).graph, true_tree)
            row["shd_a2"] = shd(mmd_tree(arm_model, a2).graph, true_tree)
            row["shd_a3"] = row["shd_mmd"]
            row["n_graphoid_redundant"] = len(u_stmts)
            row["graphoid_fraction"] = len(u_stmts) / len(a2) if a2 else 0.0
        rows.append(row)
    col = lambda k: [r[k] for r in rows]  # noqa: E731
    summary = {
        "median_shd_mmd": _median(col("shd_mmd")),
        "median_shd_tree_pc": _median(col("shd_tree_pc")),
        "mann_whitney_p": _mw(col("shd_mmd"), col("shd_tree_pc"), "less"),
        "recovery_mmd": float(np.mean([v == 0 for v in col("shd_mmd")])),
        "recovery_tree_pc": float(np.mean([v == 0 for v in col("shd_tree_pc")])),
        "mmd_tie_rate": float(np.mean(col("mmd_tie"))),
        "mmd_truth_among_minimizers": float(np.mean(col("truth_among_minimizers"))),
    }
    checks = {
        "mmd_median_not_worse": summary["median_shd_mmd"] <= summary["median_shd_tree_pc"],
        "mmd_less_p<0.01": summary["mann_whitney_p"] < 0.01,
    }
    if cfg.flags.get("arms", True):
        summary.update(
            {
                "median_shd_a1": _median(col("shd_a1")),
                "median_shd_a2": _median(col("shd_a2")),
                "median_shd_a3": _median(col("shd_a3")),
                "a1_equals_a2": col("shd_a1") == col("shd_a2"),
                "a3_vs_a1_p": _mw(col("shd_a3"), col("shd_a1"), "less"),
                "mean_graphoid_fraction": float(np.mean(col("graphoid_fraction"))),
            }
        )
        checks["a1_identical_to_a2"] = summary["a1_equals_a2"]
        checks["a3_less_than_a1_p<0.05"] = summary["a3_vs_a1_p"] < 0.05
    cols = list(rows[0]) if rows else []
    return ExperimentResult(cfg, cols, rows, summary, checks)


# --- exact flip injection against the correction radius -----------------------------


def exp_flip_injection(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg.n
    radius = (n - 1) // 2
    rows = []
    for k in range(n):
        for trial in range(cfg.trials):
            rng = make_rng(cfg.seed, k, trial)
            tree = random_spanning_tree(n, rng)
            s = list(tree_test_triples(tree.universe))
            flips = [s[i] for i in sorted(rng.choice(len(s), size=k, replace=False))]
            model = _model_from(GraphOracle(tree, flips), s)
            rep = mmd_tree(model, s)
            rows.append(
                {
                    "flips": k,
                    "trial": trial,
                    "recovered": (not rep.tie) and rep.graph == tree,
                    "among_minimizers": tree in rep.graphs,
                    "n_minimizers": len(rep.graphs),
                    "distance": rep.details["distance"],
                }
            )

    def rate(key, k):
        return float(np.mean([r[key] for r in rows if r["flips"] == k]))

    rates = {str(k): rate("recovered", k) for k in range(n)}
    summary = {
        "radius": radius,
        "recovery_rate": rates,
        "among_minimizers_rate": {str(k): rate("among_minimizers", k) for k in range(n)},
    }
    checks = {"full_recovery_within_radius": all(rates[str(k)] == 1.0 for k in range(radius + 1))}
    cols = ["flips", "trial", "recovered", "among_minimizers", "n_minimizers", "distance"]
    return ExperimentResult(cfg, cols, rows, summary, checks)


EXPERIMENTS: dict[str, tuple[Callable[[ExperimentConfig], ExperimentResult], dict]] = {
    "graphoid_pvalues": (exp_graphoid_pvalues, {"trials": 16, "n": 4, "samples": 300}),
    "two_datasets": (exp_two_datasets, {"trials": 200, "n": 4, "samples": 300}),
    "graphoid_vs_graphical": (exp_graphoid_vs_graphical, {"trials": 200, "n": 5, "samples": 0}),
    "tree_correction": (exp_tree_correction, {"trials": 200, "n": 5, "samples": 1000}),
    "flip_injection": (exp_flip_injection, {"trials": 200, "n": 5, "samples": 0}),
}


def make_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}")
    base = dict(EXPERIMENTS[experiment][1])
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **base)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    res = EXPERIMENTS[cfg.experiment][0](cfg)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(res.csv_text())
        (out / "summary.json").write_text(json.dumps(res.summary_dict(), indent=2, sort_keys=True, default=_json_default) + "\n")
    return res


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)
