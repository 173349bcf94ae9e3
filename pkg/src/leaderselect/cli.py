"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 infeasible or flagged result,
1 unexpected failure.  Errors go to stderr as one JSON object per line.
Every run writes a manifest (subcommand, parameters, seed, input digests,
version) next to ``--out``, or embeds it in JSON printed to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InfeasibleError, LeaderSelectError, ValidationError

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        code = "unknown_subcommand" if "invalid choice" in message else "usage"
        _report(code, message)
        raise SystemExit(EXIT_INVALID)


def _report(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, (set, tuple)):
        return list(obj)
    return str(obj)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable)


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    seed: int
    inputs: dict
    version: str = __version__

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- input helpers --------------------------------------------------------------

def _read(path):
    from .graph import read_graph

    try:
        return read_graph(path)
    except OSError as exc:
        raise ValidationError(f"cannot read graph {path}: {exc.strerror or exc}") from exc


def _ids(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"bad node list {text!r}") from exc


def _graph_files(items: list[str]) -> list[Path]:
    files: list[Path] = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            files += sorted(q for q in p.iterdir() if q.is_file() and not q.name.startswith("."))
        else:
            files.append(p)
    if not files:
        raise ValidationError("no graph files given")
    return files


def _need_one(args, a: str, b: str) -> None:
    if (getattr(args, a) is None) == (getattr(args, b) is None):
        raise ValidationError(f"give exactly one of --{a} or --{b}")


# -- subcommands ----------------------------------------------------------------
# Each returns (payload, format, flagged, inputs); payload is a dict for JSON or a
# string for CSV.

def _cmd_select_static(args):
    from .static import select_static_alpha, select_static_k

    _need_one(args, "k", "alpha")
    g = _read(args.graph)
    if args.k is not None:
        res = select_static_k(g, args.k, lazy=args.lazy)
    else:
        res = select_static_alpha(g, args.alpha, lazy=args.lazy)
    return _selection_out(args, res, {"graph": args.graph})


def _selection_out(args, res, inputs, flagged=False):
    if args.format == "csv":
        return res.to_csv(), "csv", flagged, inputs
    return res.to_dict(), "json", flagged, inputs


def _cmd_select_failures(args):
    from .dynamic import FailureModel, select_alpha_random_failures, select_k_random_failures

    _need_one(args, "k", "alpha")
    g = _read(args.graph)
    fm = FailureModel.independent(args.p, args.samples, seed=args.seed, disconnected=args.disconnected)
    if args.k is not None:
        res = select_k_random_failures(fm, g, args.k, exact=args.exact_enum, lazy=args.lazy)
    else:
        res = select_alpha_random_failures(fm, g, args.alpha, exact=args.exact_enum, lazy=args.lazy)
    return _selection_out(args, res, {"graph": args.graph})


def _cmd_select_switching(args):
    from .dynamic import TopologyEnsemble, select_alpha_switching, select_switching_k
    from .errors import InfeasibleBudget

    _need_one(args, "k", "alpha")
    files = _graph_files(args.ensemble)
    ens = TopologyEnsemble(tuple(_read(f) for f in files))
    inputs = {str(f): str(f) for f in files}
    if args.k is not None:
        try:
            res = select_switching_k(ens, args.k, beta=args.beta, delta=args.delta)
        except InfeasibleBudget as exc:
            if exc.result is None:
                raise
            return _selection_out(args, exc.result, inputs, flagged=True)
    else:
        res = select_alpha_switching(ens, args.alpha)
    return _selection_out(args, res, inputs)


def _cmd_online(args):
    from .bench import DeploymentSpec, MobilitySpec, mobility_trace
    from .online import regret_report, run_online

    if args.trace:
        files = _graph_files([args.trace])
        graphs = [_read(f) for f in files]
        inputs = {str(f): str(f) for f in files}
    else:
        dspec = DeploymentSpec(n=args.n, seed=args.seed)
        graphs = mobility_trace(MobilitySpec(frames=args.steps or 200, seed=args.seed), dspec)
        inputs = {}
    if args.steps is not None:
        graphs = graphs[: args.steps]
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        from .errors import DimensionMismatch

        raise DimensionMismatch("trace graphs differ in node count")
    _, history = run_online(graphs, args.k, args.beta, args.seed)
    rep = regret_report(history, graphs, args.k, hindsight=args.hindsight)
    return rep.to_csv(), "csv", not rep.exact, inputs


def _cmd_simulate(args):
    from .sim import DynamicsConfig, integrate

    g = _read(args.graph)
    cfg = DynamicsConfig(
        graph=g,
        leaders=_ids(args.leaders),
        dt=args.dt,
        horizon=args.horizon,
        burn_in=args.burn_in,
        seed=args.seed,
        replicates=args.replicates,
        noise=args.noise,
    )
    summary = integrate(cfg, keep_every=args.keep_every if args.trajectory else 0)
    if args.trajectory:
        traj = summary.trajectory
        lines = ["sample," + ",".join(f"x{v}" for v in summary.per_node_mse)]
        lines += [f"{i}," + ",".join(repr(float(x)) for x in row) for i, row in enumerate(traj)]
        Path(args.trajectory).write_text("\n".join(lines) + "\n")
    return summary.to_dict(), "json", False, {"graph": args.graph}


def _cmd_verify_commute(args):
    from .metric import system_error
    from .walks import commute_time_exact, commute_time_sampled

    g = _read(args.graph)
    leaders = _ids(args.leaders)
    report = system_error(g, leaders)
    nodes = _ids(args.nodes) if args.nodes else sorted(report.per_node)
    rows = []
    for u in nodes:
        exact = commute_time_exact(g, leaders, u)
        est = commute_time_sampled(g, leaders, u, args.walks, args.seed, threads=args.threads)
        z = (est.mean - exact) / est.stderr if est.stderr > 0 else 0.0
        rows.append(
            {
                "node": u,
                "error": report.per_node[u],
                "commute_exact": exact,
                "commute_sampled": est.mean,
                "stderr": est.stderr,
                "z": z,
                "error_from_commute": exact / (4.0 * g.total_weight),
            }
        )
    flagged = any(abs(r["z"]) > 4 for r in rows)
    return {"leaders": leaders, "walks": args.walks, "nodes": rows}, "json", flagged, {"graph": args.graph}


def _cmd_bench(args):
    from .bench import run_experiment

    overrides = json.loads(args.overrides) if args.overrides else {}
    res = run_experiment(
        args.experiment, trials=args.trials, n=args.n, seed=args.seed, threads=args.threads, **overrides
    )
    return res.to_csv(), "csv", False, {}


def _cmd_gen_graph(args):
    from .bench import DeploymentSpec, gen_geometric
    from .graph import format_graph

    spec = json.loads(Path(args.spec).read_text()) if args.spec else {}
    spec.setdefault("seed", args.seed)
    if args.n is not None:
        spec["n"] = args.n
    try:
        dspec = DeploymentSpec(**spec)
    except TypeError as exc:
        raise ValidationError(f"bad deployment spec: {exc}") from exc
    g = gen_geometric(dspec)
    inputs = {"spec": args.spec} if args.spec else {}
    if args.out and args.out.endswith(".json"):
        return g.to_dict(), "json", False, inputs
    return format_graph(g), "text", False, inputs


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .graph import GRAPH_GRAMMAR

    parser = _Parser(
        prog="leaderselect",
        description="Leader selection for noisy linear multi-agent systems.",
        epilog=GRAPH_GRAMMAR,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(
            name, help=help_text, description=help_text, epilog=GRAPH_GRAMMAR,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", help="write the primary output here instead of stdout")
        p.add_argument("--threads", type=int, default=1, help="worker thread cap")
        return p

    def selection_args(p):
        p.add_argument("--k", type=int, help="number of leaders")
        p.add_argument("--alpha", type=float, help="error bound")
        p.add_argument("--lazy", action="store_true", help="lazy greedy evaluation")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = add("select-static", _cmd_select_static, "Greedy leader selection on a fixed graph.")
    p.add_argument("--graph", required=True)
    selection_args(p)

    p = add("select-failures", _cmd_select_failures, "Leader selection under independent link failures.")
    p.add_argument("--graph", required=True)
    p.add_argument("--p", type=float, required=True, help="link failure probability")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--exact-enum", action="store_true", help="enumerate every failure pattern")
    p.add_argument("--disconnected", choices=("exclude", "condition"), default="exclude")
    selection_args(p)

    p = add("select-switching", _cmd_select_switching, "Worst-case selection over switching topologies.")
    p.add_argument("--ensemble", nargs="+", required=True, help="graph files or a directory")
    p.add_argument("--beta", type=float, help="leader budget inflation (default from the ensemble)")
    p.add_argument("--delta", type=float, help="bisection threshold (default 1/M)")
    selection_args(p)

    p = add("online", _cmd_online, "Online selection on a topology trace; emits per-step regret CSV.")
    p.add_argument("--trace", help="directory with one graph file per step (sorted by name)")
    p.add_argument("--n", type=int, default=30, help="agents for a generated mobility trace")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--steps", type=int, help="number of steps (default: whole trace, or 200 generated)")
    p.add_argument("--hindsight", choices=("auto", "brute", "greedy"), default="auto")

    p = add("simulate", _cmd_simulate, "Euler-Maruyama simulation of the noisy dynamics.")
    p.add_argument("--graph", required=True)
    p.add_argument("--leaders", required=True, help="comma-separated leader ids")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=2000.0)
    p.add_argument("--burn-in", type=float, default=0.5)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--noise", choices=("aggregated", "per-link", "none"), default="aggregated")
    p.add_argument("--trajectory", help="write a decimated trajectory CSV here")
    p.add_argument("--keep-every", type=int, default=1000)

    p = add("verify-commute", _cmd_verify_commute, "Compare the error with random-walk commute times.")
    p.add_argument("--graph", required=True)
    p.add_argument("--leaders", required=True)
    p.add_argument("--nodes", help="followers to check (default: all)")
    p.add_argument("--walks", type=int, default=100_000)

    p = add("bench", _cmd_bench, "Run an experiment sweep and emit long-format CSV.")
    p.add_argument("--experiment", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--n", type=int)
    p.add_argument("--overrides", help="JSON object of sweep parameter overrides")

    p = add("gen-graph", _cmd_gen_graph, "Generate a connected random geometric graph.")
    p.add_argument("--spec", help="JSON deployment spec (n, width, height, range, c, seed, max_retries)")
    p.add_argument("--n", type=int)
    return parser


def _emit(args, manifest: RunManifest, payload, fmt: str) -> None:
    if fmt == "json":
        body = dict(payload)
        body["manifest"] = manifest.to_dict()
        text = _dumps(body) + "\n"
    else:
        text = payload
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".manifest.json").write_text(_dumps(manifest.to_dict()) + "\n")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        payload, fmt, flagged, inputs = args.func(args)
        digests = {}
        for key, path in inputs.items():
            try:
                digests[key] = _digest(path)
            except OSError:
                pass
        manifest = RunManifest(args.command, params, args.seed, digests)
        _emit(args, manifest, payload, fmt)
    except ValidationError as exc:
        _report(exc.code, str(exc))
        return EXIT_INVALID
    except InfeasibleError as exc:
        _report(exc.code, str(exc))
        return EXIT_INFEASIBLE
    except LeaderSelectError as exc:
        _report(exc.code, str(exc))
        return EXIT_INFEASIBLE
    except (OSError, json.JSONDecodeError) as exc:
        _report("io", str(exc))
        return EXIT_INVALID
    return EXIT_INFEASIBLE if flagged else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
