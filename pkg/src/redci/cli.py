"""Command-line entry point ``redci``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cimodel import CiStatement, CiTriple, IndependenceModel, Status, all_triples, load_statements, tree_test_triples
from .citest import DataOracle, Dataset, GraphOracle
from .discovery import dag_from_order, mmd_dag, mmd_tree, pc_lite, sp, tree_pc, undirected_full_conditional
from .exceptions import RedciError
from .experiments import EXPERIMENTS, make_config, run_experiment
from .graphoid import closure
from .graphs import GraphClass, load_graph, save_graph
from .redundancy import explain
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


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=str)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cmd_closure(a) -> int:
    stmts = load_statements(a.inp)
    res = closure(stmts, use_intersection=not a.no_intersection, complete=not a.no_complete)
    out: dict = {"contradiction": None if res.contradiction is None else str(res.contradiction)}
    if res.contradiction is not None:
        out["derivations"] = [
            res.derivation(res.contradiction, Status.INDEPENDENT),
            res.derivation(res.contradiction, Status.DEPENDENT),
        ]
    if a.query:
        t = CiTriple.parse(a.query)
        out["query"] = str(t)
        out["status"] = res.status(t).value
        out["trace"] = res.derivation(t)
    else:
        out["statements"] = [st.to_record() for st in res.model.statements()]
    _emit(out, a.out)
    return 0


def _cmd_classify(a) -> int:
    stmts = load_statements(a.statements)
    g = load_graph(a.graph) if a.graph else None
    target = CiStatement(CiTriple.parse(a.target), Status(a.verdict))
    cls = explain(stmts, target, GraphClass(a.kind), g=g, use_intersection=not a.no_intersection)
    _emit({"target": target.to_record(), **cls.to_dict()}, a.out)
    return 0


def _oracle(spec: str, alpha: float, kind: str):
    first, *rest = spec.split(",")
    if first.endswith(".json"):
        flips = _load_triples(rest[0]) if rest else []
        return GraphOracle(load_graph(first), flips)
    return DataOracle(Dataset.from_csv(first, kind), None, alpha)


def _load_triples(path: str) -> list[CiTriple]:
    """JSON array of {"x", "y", "z"} records; a verdict field, if present, is ignored."""
    recs = json.loads(Path(path).read_text())
    return [CiTriple.from_record(r) for r in recs]


def _cmd_discover(a) -> int:
    oracle = _oracle(a.oracle, a.alpha, a.data_kind)
    algo = a.algo
    if algo == "order":
        rep = dag_from_order(oracle, a.order.split(",") if a.order else None)
    elif algo == "fullcond":
        rep = undirected_full_conditional(oracle)
    elif algo == "sp":
        rep = sp(oracle)
    elif algo == "tree-pc":
        rep = tree_pc(oracle)
    elif algo == "pc-lite":
        rep = pc_lite(oracle)
    else:
        triples = list(tree_test_triples(oracle.universe) if algo == "mmd-tree" else all_triples(oracle.universe))
        model = IndependenceModel(oracle.universe, {t: oracle.query(t).verdict for t in triples})
        rep = mmd_tree(model, triples) if algo == "mmd-tree" else mmd_dag(model, triples)
        rep.statements = oracle.statements
    _emit({"algo": algo, **rep.to_dict()}, a.out)
    return 0


def _cmd_synth(a) -> int:
    rng = make_rng(a.seed)
    outs = a.out.split(",") if a.out else []
    data_out = next((p for p in outs if p.endswith(".csv")), None)
    graph_out = next((p for p in outs if p.endswith(".json")), None)
    data = None
    if a.kind == "tree":
        g = random_spanning_tree(a.n, rng)
    elif a.kind == "er-dag":
        g = er_dag(a.n, a.p, rng)
    elif a.kind == "lingauss":
        g = random_oriented_tree(a.n, rng) if a.structure == "tree" else er_dag(a.n, a.p, rng)
        data = sample(linear_gaussian(g, rng), a.samples, rng)
    elif a.kind == "binary-bn":
        g = two_dataset_dag()
        data = binary_bn_sample(g, rng, a.samples)
    else:
        g = two_dataset_ug()
        data = factor_gibbs_sample(g, rng, a.samples, a.burn_in, a.thinning)
    if graph_out:
        save_graph(graph_out, g)
    else:
        print(g.to_json())
    if data is not None:
        if data_out:
            Path(data_out).write_text(data.to_csv())
        else:
            sys.stdout.write(data.to_csv())
    return 0


def _cmd_experiment(a) -> int:
    flags = json.loads(a.flags) if a.flags else {}
    cfg = make_config(a.id, trials=a.trials, seed=a.seed, n=a.n, samples=a.samples, alpha=a.alpha, out=a.out)
    cfg.flags.update(flags)
    res = run_experiment(cfg)
    if not a.out:
        print(json.dumps(res.summary_dict(), indent=2, default=str))
    for name, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
    return 2 if a.check and not res.passed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="redci", description="Redundant CI statements: closure, classification, discovery.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("closure", help="Graphoid closure of a statement list")
    c.add_argument("--in", dest="inp", required=True, help="statements file (.json or .csv)")
    c.add_argument("--query", help="triple as 'x;y;z' with '|'-separated members")
    c.add_argument("--no-intersection", action="store_true")
    c.add_argument("--no-complete", action="store_true", help="skip the refutation pass")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_closure)

    k = sub.add_parser("classify", help="redundancy class of a target statement")
    k.add_argument("--statements", required=True)
    k.add_argument("--target", required=True, help="triple as 'x;y;z'")
    k.add_argument("--verdict", choices=["dep", "indep"], default="dep")
    k.add_argument("--graph", help="graph file enabling the sufficient criterion")
    k.add_argument("--class", dest="kind", choices=[c.value for c in GraphClass], default="dags")
    k.add_argument("--no-intersection", action="store_true")
    k.add_argument("--out")
    k.set_defaults(func=_cmd_classify)

    d = sub.add_parser("discover", help="run a discovery algorithm")
    d.add_argument("--algo", required=True, choices=["order", "fullcond", "sp", "mmd-tree", "mmd-dag", "tree-pc", "pc-lite"])
    d.add_argument("--oracle", required=True, help="graph.json[,flips.json] or data.csv")
    d.add_argument("--data-kind", choices=["continuous", "discrete"], default="continuous")
    d.add_argument("--order", help="comma-separated variable order")
    d.add_argument("--alpha", type=float, default=0.01)
    d.add_argument("--out")
    d.set_defaults(func=_cmd_discover)

    s = sub.add_parser("synth", help="generate a ground truth and data")
    s.add_argument("--kind", required=True, choices=["tree", "er-dag", "lingauss", "binary-bn", "factor"])
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--p", type=float, default=0.3, help="edge probability for er-dag")
    s.add_argument("--structure", choices=["tree", "er-dag"], default="tree", help="graph family for lingauss")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--burn-in", type=int, default=1000)
    s.add_argument("--thinning", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="data.csv,graph.json (either or both)")
    s.set_defaults(func=_cmd_synth)

    e = sub.add_parser("experiment", help="run a desk-scale experiment")
    e.add_argument("id", choices=sorted(EXPERIMENTS))
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--n", type=int)
    e.add_argument("--samples", type=int)
    e.add_argument("--alpha", type=float)
    e.add_argument("--flags", help="JSON object of experiment flags")
    e.add_argument("--out", help="output directory")
    e.add_argument("--check", action="store_true", help="exit 2 if any check fails")
    e.set_defaults(func=_cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RedciError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"redci: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
