"""Command-line front end.

Every output starts with ``#`` comment lines holding the package version, the
fully resolved configuration and the seed. Exit codes: 0 success, 1 internal
error, 2 domain or usage error (any package error), 3 audit failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__, engine, fission, lab, line, shearer
from .errors import DomainError, PercolationError
from .trees import TreeSpec, build_tree, k_fuzz, path_graph, complete_graph

DEFAULT_SEED = 42
EXIT_OK, EXIT_INTERNAL, EXIT_DOMAIN, EXIT_AUDIT = 0, 1, 2, 3


def resolve_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("PERC_SEED")
    return int(env) if env not in (None, "") else DEFAULT_SEED


def fmt(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int,)) or isinstance(x, str):
        return str(x)
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return str(x)
    # shortest round-trip form; integral values without a trailing .0
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


class Output:
    """Collects header, table rows or a JSON document and writes them once."""

    def __init__(self, args, config: dict):
        self.args = args
        self.config = config
        self.lines = []

    def header(self):
        return [f"# treeperc {__version__}",
                "# config: " + json.dumps(self.config, sort_keys=True, default=str),
                f"# seed: {self.config.get('seed')}"]

    def table(self, columns, rows):
        if self.args.format == "json":
            self.document({"columns": list(columns),
                           "rows": [[_jsonable(v) for v in r] for r in rows]})
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        self.lines.append(buf.getvalue().rstrip("\n"))

    def document(self, doc):
        self.lines.append(json.dumps(_jsonable(doc), indent=2, sort_keys=True))

    def write(self):
        text = "\n".join(self.header() + self.lines) + "\n"
        if self.args.output:
            with open(self.args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
        return str(x)
    return x


# -- argument groups ----------------------------------------------------------------
def _common(p):
    p.add_argument("--output", "-o", help="write here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, help="default: $PERC_SEED, else 42")


def _model_args(p, depth=10):
    p.add_argument("--model", choices=fission.MODEL_KINDS, default="iid")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--p", type=float)
    p.add_argument("--N", type=int, help="block length of the cutup model")
    p.add_argument("--tree", default="d_ary:2", help="e.g. d_ary:2, periodic:3, single_ray")
    p.add_argument("--depth", type=int, default=depth)


def _build_model(args, depth=None):
    spec = TreeSpec.from_text(args.tree)
    tree = build_tree(spec, args.depth if depth is None else depth)
    if args.model in ("canonical", "minimal", "multiplex", "iid") and args.p is None:
        raise DomainError(f"--p is required for the {args.model} model", threshold="--p")
    return fission.make_model(args.model, tree, k=args.k, p=args.p, N=args.N)


def _model_config(args, model):
    d = model.describe()
    d.update(subcommand=args.cmd, seed=args.seed)
    return d


# -- subcommands ----------------------------------------------------------------------
def cmd_critical_values(args):
    cfg = dict(subcommand=args.cmd, k=args.k, br=args.br, seed=args.seed)
    out = Output(args, cfg)
    cv = lab.critical_values(args.k, args.br)
    out.table(("k", "br", "p_min", "p_max", "regime"), [cv.row()])
    out.write()
    return EXIT_OK


def cmd_shearer(args):
    cfg = {key: getattr(args, key) for key in ("k", "line", "p", "n", "graph", "seed")}
    cfg["subcommand"] = args.cmd
    out = Output(args, cfg)
    k = args.k
    if args.graph:
        G = _parse_graph(args.graph, k)
        if args.p_sh or args.p is None:
            out.table(("graph", "k", "p_sh"), [(args.graph, k, shearer.p_shearer_graph(G))])
        else:
            out.table(("graph", "k", "p", "critical_function"),
                      [(args.graph, k, args.p, shearer.critical_function(G, args.p))])
    elif args.b_sequence:
        if args.p is None or args.n is None:
            raise DomainError("--b-sequence needs --p and --n", threshold="--p, --n")
        cs = shearer.b_sequence(k, args.p, args.n)
        rows = [(i + 1, cs.b[i], cs.beta[i]) for i in range(len(cs.b))]
        out.table(("n", "b", "beta"), rows)
    elif args.xi:
        if args.p is None:
            raise DomainError("--xi needs --p", threshold="--p")
        out.table(("k", "p", "xi"), [(k, args.p, shearer.xi(k, args.p).xi)])
    elif args.line is not None:
        out.table(("k", "N", "p_sh"), [(k, args.line, shearer.p_shearer_line(k, args.line))])
    else:
        out.table(("k", "p_sh"), [(k, shearer.p_shearer_kfuzz(k))])
    out.write()
    return EXIT_OK


def _parse_graph(text, k):
    kind, _, n = text.partition(":")
    n = int(n)
    if kind == "path":
        return k_fuzz(path_graph(n), k)
    if kind == "complete":
        return complete_graph(n)
    raise DomainError(f"unknown graph {text!r}; use path:N or complete:N")


def cmd_line(args):
    law = line.make_law(args.law, k=args.k, p=args.p, N=args.N)
    cfg = dict(subcommand=args.cmd, law=args.law, k=law.k, p=law.p, N=args.N, n=args.n,
               query=args.query, seed=args.seed)
    out = Output(args, cfg)
    if args.query == "allones":
        a = line.allones_series(law, args.n)
        out.table(("n", "allones"), [(j, a[j]) for j in range(args.n + 1)])
    elif args.query == "next":
        hist = [int(c) for c in (args.history or "")]
        out.table(("history", "next_bit_prob"),
                  [(args.history or "", line.next_bit_prob(law, hist))])
    elif args.query == "distribution":
        dist = line.prefix_distribution(law, args.n)
        rows = [("".join(str((i >> j) & 1) for j in range(args.n)), dist[i])
                for i in range(len(dist))]
        out.table(("prefix", "probability"), rows)
    else:
        rows = []
        for r in range(args.count):
            rows.append((r, str(line.sample_prefix(law, args.n, args.seed, r))))
        out.table(("sample", "bits"), rows)
    out.write()
    return EXIT_OK


def cmd_simulate(args):
    model = _build_model(args)
    cfg = _model_config(args, model)
    cfg.update(replicas=args.replicas)
    out = Output(args, cfg)
    curve = engine.reach_curve(model, args.depth, args.replicas, args.seed, args.workers)
    out.table(("depth", "estimate", "ci_lo", "ci_hi"),
              [(r.depth, r.estimate, r.ci_lo, r.ci_hi) for r in curve])
    out.write()
    if args.export_sample:
        sample = fission.fission_sample(model, args.seed)
        exp = Output(argparse.Namespace(format="csv", output=args.export_sample), cfg)
        exp.table(("vertex_id", "level", "bit"), list(sample.rows()))
        exp.write()
    return EXIT_OK


def cmd_diameters(args):
    model = _build_model(args)
    cfg = _model_config(args, model)
    cfg.update(replicas=args.replicas, policy=args.policy)
    st = engine.cluster_diameter_stats(model, args.depth, args.replicas, args.seed,
                                       policy=args.policy, workers=args.workers)
    cfg["policy"] = st.policy
    out = Output(args, cfg)
    bound = 4 * model.law.N - 4 if model.kind == "cutup" else None
    if args.format == "json":
        doc = dict(max_diameter=st.max, replicas=st.replicas, policy=st.policy,
                   histogram=st.histogram.tolist())
        if bound is not None:
            doc.update(bound=bound, violations=st.violations(bound),
                       passed=st.violations(bound) == 0)
        out.document(doc)
    else:
        out.lines.append(f"# max_diameter: {st.max}")
        if bound is not None:
            out.lines.append(f"# bound_4N_minus_4: {bound}; violations: {st.violations(bound)}")
        out.table(("diameter", "replicas"), list(enumerate(st.histogram.tolist())))
    out.write()
    if bound is not None and st.violations(bound):
        return EXIT_AUDIT
    return EXIT_OK


def cmd_bounds(args):
    model = _build_model(args)
    cfg = _model_config(args, model)
    cfg["lam"] = args.lam
    levels = range(args.min_level, args.depth + 1)
    rep = lab.bounds_report(model, levels, lam=args.lam, with_exact_reach=args.exact)
    cfg["lam"] = rep.lam
    out = Output(args, cfg)
    if args.format == "json":
        out.document(rep.to_dict())
    else:
        cols = ["level", "first_moment", "class_bound", "second_moment"]
        rows = [list(r) for r in zip(rep.levels, rep.first_moment, rep.class_bound,
                                     rep.second_moment)]
        if args.exact:
            cols.append("exact_reach")
            for r, x in zip(rows, rep.exact_reach):
                r.append(x)
        if rep.alpha is not None:
            out.lines.append(f"# kernel certificate: alpha={fmt(rep.alpha)} C={fmt(rep.C)} "
                             f"br={fmt(rep.br)} alpha<br={fmt(rep.certificate)}")
        out.table(cols, rows)
    out.write()
    return EXIT_OK


def cmd_kernel_audit(args):
    model = _build_model(args)
    cfg = _model_config(args, model)
    cfg.update(budget=args.budget, quasi_independence=args.quasi_independence)
    qi = {"auto": "auto", "on": True, "off": False}[args.quasi_independence]
    rep = lab.kernel_bound_audit(model, args.depth, args.budget, args.seed, qi)
    out = Output(args, cfg)
    doc = rep.to_dict()
    if not args.pairs:
        doc.pop("pairs")
    out.document(doc)
    out.write()
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_minimality_audit(args):
    law = line.make_law(args.law, k=args.k, p=args.p, N=args.N)
    k = args.fuzz if args.fuzz is not None else max(law.k, args.k)
    rep = lab.minimality_audit(law, args.n, k=k)
    cfg = dict(subcommand=args.cmd, law=args.law, k=law.k, fuzz=k, p=law.p, n=args.n,
               seed=args.seed)
    out = Output(args, cfg)
    out.document(rep.to_dict())
    out.write()
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_figure1(args):
    ks = tuple(int(x) for x in args.ks.split(","))
    cfg = dict(subcommand=args.cmd, ks=list(ks), br_min=1.0, br_max=2.5, br_step=0.01,
               seed=args.seed)
    out = Output(args, cfg)
    out.table(("k", "br", "p_min", "p_max", "regime"), lab.figure_data(ks))
    out.write()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treeperc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"treeperc {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("critical-values", help="p_min and p_max for given k and br")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--br", type=float, required=True)
    _common(p)
    p.set_defaults(func=cmd_critical_values)

    p = sub.add_parser("shearer", help="critical values and sequences of the Shearer measure")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--line", type=int, metavar="N", help="use the k-fuzz of N consecutive integers")
    p.add_argument("--p-sh", action="store_true", help="report the critical value (default)")
    p.add_argument("--b-sequence", action="store_true", help="emit b_n and beta_n")
    p.add_argument("--xi", action="store_true", help="emit xi(k, p)")
    p.add_argument("--graph", help="path:N (k-fuzzed) or complete:N")
    p.add_argument("--p", type=float)
    p.add_argument("--n", type=int)
    _common(p)
    p.set_defaults(func=cmd_shearer)

    p = sub.add_parser("line", help="queries on line laws")
    p.add_argument("--law", choices=line.LAW_KINDS, required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--p", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--query", choices=("allones", "next", "distribution", "sample"),
                   default="allones")
    p.add_argument("--history", help="bit string for --query next")
    p.add_argument("--count", type=int, default=1, help="samples for --query sample")
    _common(p)
    p.set_defaults(func=cmd_line)

    p = sub.add_parser("simulate", help="Monte Carlo reach curve")
    _model_args(p)
    p.add_argument("--replicas", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--export-sample", metavar="PATH",
                   help="also write one full configuration as vertex_id,level,bit")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diameters", help="largest open-cluster diameters")
    _model_args(p)
    p.add_argument("--replicas", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--policy", choices=engine.POLICIES)
    _common(p)
    p.set_defaults(func=cmd_diameters)

    p = sub.add_parser("bounds", help="first and second moment bounds per level")
    _model_args(p)
    p.add_argument("--min-level", type=int, default=0)
    p.add_argument("--lam", type=float, help="flow parameter (default br * (1 - 1e-3))")
    p.add_argument("--exact", action="store_true", help="add the exact reach probability")
    _common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("kernel-audit", help="check kernel bounds on stratified pairs")
    _model_args(p, depth=12)
    p.add_argument("--budget", type=int)
    p.add_argument("--quasi-independence", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--pairs", action="store_true", help="include every audited pair")
    _common(p)
    p.set_defaults(func=cmd_kernel_audit, format="json")

    p = sub.add_parser("minimality-audit", help="compare a law with the Shearer bound")
    p.add_argument("--law", choices=line.LAW_KINDS, required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--fuzz", type=int, help="dependency range of the graph (default max(k, law k))")
    p.add_argument("--p", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--n", type=int, default=10)
    _common(p)
    p.set_defaults(func=cmd_minimality_audit, format="json")

    p = sub.add_parser("figure1", help="phase diagram table")
    p.add_argument("--ks", default="0,1,2,3")
    _common(p)
    p.set_defaults(func=cmd_figure1)
    return ap


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.seed = resolve_seed(args.seed)
    try:
        return args.func(args)
    except DomainError as exc:
        msg = f"treeperc: domain error: {exc}"
        if exc.threshold:
            msg += f" [threshold: {exc.threshold}]"
        print(msg, file=sys.stderr)
        return EXIT_DOMAIN
    except PercolationError as exc:
        # conditioning, construction and size-cap errors all stem from the request
        print(f"treeperc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except Exception as exc:  # noqa: BLE001
        print(f"treeperc: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
