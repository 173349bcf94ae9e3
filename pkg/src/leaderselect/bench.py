"""Random geometric deployments, mobility traces, baselines and sweep runners.

Every sweep writes long-format rows ``(experiment, method, x, param, trial,
metric, value)``.  Trial ``t`` draws from ``SeedSequence(seed, spawn_key=(t,))``
so trials can run in any order.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .dynamic import (
    FailureModel,
    TopologyEnsemble,
    draw_sample,
    evaluate_sample,
    select_alpha_switching,
    select_k_random_failures,
    switching_with_failures,
)
from .errors import AllSamplesDisconnected, CannotConnect, InvalidK, UnknownExperiment, ValidationError
from .graph import LeaderSet, NoisyGraph, build_graph, count_components, laplacian
from .metric import error_from_laplacian, max_singleton_error
from .online import init_online, online_step
from .static import select_static_alpha, select_static_k

METHODS = ("supermodular", "random", "max-degree", "avg-degree")
EXPERIMENTS = ("fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig4")
COLUMNS = ("experiment", "method", "x", "param", "trial", "metric", "value")


@dataclass(frozen=True)
class DeploymentSpec:
    n: int = 100
    width: float = 1000.0
    height: float = 1000.0
    range: float = 300.0
    c: float = 1.0 / 300.0
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("need at least one agent")
        if self.range < 0 or self.c <= 0 or self.width <= 0 or self.height <= 0:
            raise ValidationError("range must be nonnegative; c and the area must be positive")


@dataclass(frozen=True)
class MobilitySpec:
    speed: float = 30.0
    step_interval: float = 1.0
    reselect_interval: float = 10.0
    jitter: float = 30.0
    frames: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.speed < 0 or self.jitter < 0:
            raise ValidationError("speed and jitter must be nonnegative")
        if self.step_interval <= 0 or self.reselect_interval <= 0 or self.frames < 1:
            raise ValidationError("intervals and frame count must be positive")


def geometric_graph(pos: np.ndarray, radius: float, c: float) -> NoisyGraph | None:
    """Unit-disk graph with ``nu = c * distance``; ``None`` if disconnected."""
    n = len(pos)
    if n == 1:
        return build_graph(1, [])
    d = squareform(pdist(pos))
    i, j = np.nonzero(np.triu((d <= radius) & (d > 0), 1))
    if count_components(n, i, j)[0] != 1:
        return None
    return build_graph(n, zip(i.tolist(), j.tolist(), (c * d[i, j]).tolist()))


def _place(spec: DeploymentSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform((0.0, 0.0), (spec.width, spec.height), size=(spec.n, 2))


def deploy(spec: DeploymentSpec, rng: np.random.Generator | None = None) -> tuple[np.ndarray, NoisyGraph]:
    """Uniform placement redrawn until connected; returns positions and graph."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    for _ in range(spec.max_retries + 1):
        pos = _place(spec, rng)
        g = geometric_graph(pos, spec.range, spec.c)
        if g is not None:
            return pos, g
    raise CannotConnect(f"no connected placement of {spec.n} agents in {spec.max_retries + 1} draws")


def gen_geometric(spec: DeploymentSpec) -> NoisyGraph:
    return deploy(spec)[1]


def degrees(g: NoisyGraph) -> np.ndarray:
    return np.asarray(g.degrees, dtype=float)


def baseline_order(deg: np.ndarray, mode: str, rng: np.random.Generator | None = None) -> list[int]:
    """Full node ranking for a heuristic; the first ``k`` entries are its ``k`` leaders."""
    n = len(deg)
    ids = np.arange(n)
    if mode == "random":
        if rng is None:
            raise ValidationError("random mode needs an RNG")
        return [int(v) for v in rng.permutation(n)]
    if mode == "max-degree":
        return [int(v) for v in np.lexsort((ids, -deg))]
    if mode == "avg-degree":
        return [int(v) for v in np.lexsort((ids, np.abs(deg - deg.mean())))]
    raise ValidationError(f"unknown baseline {mode!r}")


def baseline_select(g: NoisyGraph, k: int, mode: str, seed: int = 0) -> LeaderSet:
    if not 1 <= k <= g.n:
        raise InvalidK(f"k must lie in 1..{g.n}, got {k}")
    order = baseline_order(degrees(g), mode, np.random.default_rng(seed))
    return LeaderSet(tuple(order[:k]))


@dataclass
class MobilityTrace:
    graphs: list[NoisyGraph]
    references: np.ndarray
    rejitters: int
    edge_changes: list[int] = field(default_factory=list)


def mobility_trace(spec: MobilitySpec, dspec: DeploymentSpec, *, details: bool = False):
    """Group mobility: a rigid formation around a reflected random-walk reference.

    Each frame spans ``reselect_interval`` seconds of reference motion in
    ``step_interval`` chunks with a fresh uniform heading per chunk.  Node
    positions are formation offsets plus jitter uniform in a disk.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    form, g0 = deploy(dspec, np.random.default_rng(dspec.seed))
    ref = np.array([dspec.width / 2, dspec.height / 2])
    offsets = form - ref
    box = np.array([dspec.width, dspec.height])
    chunks = max(1, int(round(spec.reselect_interval / spec.step_interval)))
    graphs, refs, changes = [], [], []
    rejitters = 0
    prev = None
    for _ in range(spec.frames):
        for _ in range(chunks):
            theta = rng.uniform(0, 2 * np.pi)
            ref = ref + spec.speed * spec.step_interval * np.array([np.cos(theta), np.sin(theta)])
            ref = np.abs(ref)
            ref = box - np.abs(box - ref)
        for attempt in range(dspec.max_retries + 1):
            r = spec.jitter * np.sqrt(rng.uniform(size=dspec.n))
            phi = rng.uniform(0, 2 * np.pi, size=dspec.n)
            pos = ref + offsets + np.column_stack((r * np.cos(phi), r * np.sin(phi)))
            g = geometric_graph(pos, dspec.range, dspec.c)
            if g is not None:
                break
            rejitters += 1
        else:
            raise CannotConnect("mobility frame stayed disconnected after re-jittering")
        pairs = {(i, j) for i, j, _ in g.edges}
        if prev is not None:
            changes.append(len(pairs ^ prev))
        prev = pairs
        graphs.append(g)
        refs.append(ref.copy())
    if details:
        return MobilityTrace(graphs, np.array(refs), rejitters, changes)
    return graphs


# ---------------------------------------------------------------- sweeps


@dataclass
class ExperimentResult:
    name: str
    rows: list[tuple]
    info: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        return buf.getvalue()

    def table(self, metric: str | None = None) -> dict:
        """``{(method, x, param): [values by trial]}`` for quick aggregation."""
        out: dict = {}
        for _, method, x, param, _, m, v in self.rows:
            if metric is None or m == metric:
                out.setdefault((method, x, param), []).append(v)
        return out


def _error(g: NoisyGraph, s) -> float:
    mask = np.zeros(g.n, dtype=bool)
    mask[list(s)] = True
    return error_from_laplacian(laplacian(g), mask)


def _prefix_needed(errors_of_prefix, order, target: float) -> int:
    """Smallest prefix length of ``order`` whose error meets ``target``."""
    for k in range(1, len(order) + 1):
        if errors_of_prefix(order[:k]) <= target:
            return k
    return len(order)


def _trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, stream)))


def _trial_spec(n: int, seed: int, trial: int, **kw) -> DeploymentSpec:
    return DeploymentSpec(n=n, seed=int(np.random.SeedSequence(seed, spawn_key=(trial, 99)).generate_state(1)[0]), **kw)


def _fig1a(trial, n, seed, cfg):
    g = gen_geometric(_trial_spec(n, seed, trial))
    rng = _trial_rng(seed, trial)
    deg = degrees(g)
    orders = {m: baseline_order(deg, m, rng) for m in METHODS[1:]}
    greedy = select_static_k(g, max(cfg["ks"]), lazy=True)
    rows = []
    for k in cfg["ks"]:
        rows.append(("supermodular", k, None, trial, "error", greedy.error_trace[k - 1]))
        for m, order in orders.items():
            rows.append((m, k, None, trial, "error", _error(g, order[:k])))
        rows.append(("convex", k, None, trial, "error", None))
    return rows


def _fig1b(trial, n, seed, cfg):
    g = gen_geometric(_trial_spec(n, seed, trial))
    r_max = max_singleton_error(g)
    rng = _trial_rng(seed, trial)
    deg = degrees(g)
    greedy = select_static_alpha(g, min(cfg["alphas"]) * r_max, lazy=True)
    trace = np.asarray(greedy.error_trace) / r_max
    rows = []
    for a in cfg["alphas"]:
        hit = np.flatnonzero(trace <= a)
        rows.append(("supermodular", a, None, trial, "leaders_needed", int(hit[0]) + 1 if hit.size else g.n))
    for m in METHODS[1:]:
        order = baseline_order(deg, m, rng)
        prefix = [_error(g, order[:k]) / r_max for k in range(1, g.n + 1)]
        for a in cfg["alphas"]:
            hit = [k for k, e in enumerate(prefix, 1) if e <= a]
            rows.append((m, a, None, trial, "leaders_needed", hit[0] if hit else g.n))
    return rows


def _fig2a(trial, n, seed, cfg):
    rows = []
    for size in cfg["sizes"]:
        g = gen_geometric(_trial_spec(size, seed, trial * 1000 + size))
        k = max(1, int(round(cfg["leader_fraction"] * size)))
        rng = _trial_rng(seed, trial, size)
        deg = degrees(g)
        rows.append(("supermodular", size, k, trial, "error", select_static_k(g, k, lazy=True).error))
        for m in METHODS[1:]:
            rows.append((m, size, k, trial, "error", _error(g, baseline_order(deg, m, rng)[:k])))
    return rows


def _expected(sample, s) -> float:
    try:
        return evaluate_sample(sample, s).mean
    except AllSamplesDisconnected:
        return math.inf


def _fig2b(trial, n, seed, cfg):
    g = gen_geometric(_trial_spec(n, seed, trial))
    k = min(cfg["k"], g.n)
    rng = _trial_rng(seed, trial)
    deg = degrees(g)
    base = {m: baseline_order(deg, m, rng)[:k] for m in METHODS[1:]}
    rows = []
    for i, p in enumerate(cfg["ps"]):
        sel_fm = FailureModel.independent(p, cfg["samples"], seed=int(rng.integers(2**63)))
        eval_fm = FailureModel.independent(p, cfg["eval_samples"], seed=int(rng.integers(2**63)))
        chosen = select_k_random_failures(sel_fm, g, k, lazy=True).leaders
        sample = draw_sample(eval_fm, g)
        rows.append(("supermodular", p, k, trial, "error", _expected(sample, chosen)))
        for m, s in base.items():
            rows.append((m, p, k, trial, "error", _expected(sample, s)))
    return rows


def _normalized(graphs):
    return [g.scaled(1.0 / max_singleton_error(g)) for g in graphs]


def _fig3a(trial, n, seed, cfg):
    rows = []
    specs = [_trial_spec(n, seed, trial * 1000 + i) for i in range(max(cfg["ms"]))]
    pool = _normalized([gen_geometric(s) for s in specs])
    rng = _trial_rng(seed, trial)
    for M in cfg["ms"]:
        ens = TopologyEnsemble(tuple(pool[:M]))
        deg = np.mean([degrees(g) for g in ens], axis=0)
        orders = {m: baseline_order(deg, m, rng) for m in METHODS[1:]}
        for a in cfg["alphas"]:
            res = select_alpha_switching(ens, a, lazy=True)
            rows.append(("supermodular", M, a, trial, "leaders_needed", len(res.leaders)))
            for m, order in orders.items():
                worst = lambda s: max(_error(g, s) for g in ens)
                rows.append((m, M, a, trial, "leaders_needed", _prefix_needed(worst, order, a)))
    return rows


def _fig3b(trial, n, seed, cfg):
    rows = []
    specs = [_trial_spec(n, seed, trial * 1000 + i) for i in range(max(cfg["ms"]))]
    pool = _normalized([gen_geometric(s) for s in specs])
    rng = _trial_rng(seed, trial)
    p = cfg["p"]
    for M in cfg["ms"]:
        ens = TopologyEnsemble(tuple(pool[:M]))
        fms = [FailureModel.independent(p, cfg["samples"], seed=int(rng.integers(2**63))) for _ in range(M)]
        samples = [draw_sample(fm, g) for fm, g in zip(fms, ens)]
        deg = np.mean([degrees(g) for g in ens], axis=0)
        orders = {m: baseline_order(deg, m, rng) for m in METHODS[1:]}
        for a in cfg["alphas"]:
            res = switching_with_failures(ens, fms, "worst", alpha=a)
            rows.append(("supermodular", M, a, trial, "leaders_needed", len(res.leaders)))
            for m, order in orders.items():
                worst = lambda s: max(_expected(smp, s) for smp in samples)
                rows.append((m, M, a, trial, "leaders_needed", _prefix_needed(worst, order, a)))
    return rows


def _fig4(trial, n, seed, cfg):
    dspec = _trial_spec(n, seed, trial)
    mspec = replace(cfg["mobility"], seed=int(_trial_rng(seed, trial, 1).integers(2**63)))
    graphs = mobility_trace(mspec, dspec)
    k = min(cfg["k"], n)
    rng = _trial_rng(seed, trial, 2)
    st = init_online(n, k, cfg["beta"], int(rng.integers(2**63)))
    rows = []
    prev = graphs[0]
    for t, g in enumerate(graphs, 1):
        # Offline methods see the previous frame; the current one is unknown at selection time.
        deg = degrees(prev)
        picks = {
            "supermodular": select_static_k(prev, k, lazy=True).leaders,
            **{m: baseline_order(deg, m, rng)[:k] for m in METHODS[1:]},
        }
        st, out = online_step(st, g)
        rows.append(("online-k", t, k, trial, "error", out.error))
        for m, s in picks.items():
            rows.append((m, t, k, trial, "error", _error(g, s)))
        prev = g
    return rows


_RUNNERS = {
    "fig1a": (_fig1a, {"n": 25, "ks": [1, 2, 3, 4, 5, 6]}),
    "fig1b": (_fig1b, {"n": 100, "alphas": [0.05, 0.1, 0.15, 0.2, 0.25]}),
    "fig2a": (_fig2a, {"n": 100, "sizes": [40, 60, 80, 100, 120], "leader_fraction": 0.1}),
    "fig2b": (_fig2b, {"n": 100, "k": 10, "ps": [0.0, 0.05, 0.1, 0.15, 0.2], "samples": 100, "eval_samples": 200}),
    "fig3a": (_fig3a, {"n": 100, "ms": list(range(1, 11)), "alphas": [0.15, 0.2, 0.25]}),
    "fig3b": (_fig3b, {"n": 100, "ms": [1, 2, 4, 6, 8, 10], "alphas": [0.5], "p": 0.05, "samples": 50}),
    "fig4": (_fig4, {"n": 100, "k": 10, "beta": 0.5, "mobility": MobilitySpec(frames=60)}),
}


def experiment_defaults(name: str) -> dict:
    if name not in _RUNNERS:
        raise UnknownExperiment(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    return dict(_RUNNERS[name][1])


def run_experiment(
    name: str,
    *,
    trials: int = 10,
    n: int | None = None,
    seed: int = 0,
    threads: int = 1,
    **overrides,
) -> ExperimentResult:
    """Run one sweep and return its long-format rows sorted by method, x, param, trial."""
    cfg = experiment_defaults(name)
    unknown = set(overrides) - set(cfg)
    if unknown:
        raise ValidationError(f"unknown overrides for {name}: {sorted(unknown)}")
    cfg.update(overrides)
    default_n = cfg.pop("n")
    n = default_n if n is None else n
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    runner = _RUNNERS[name][0]

    def job(trial: int):
        return [(name,) + row for row in runner(trial, n, seed, cfg)]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, range(trials)))
    else:
        parts = [job(t) for t in range(trials)]
    rows = sorted(
        (row for part in parts for row in part),
        key=lambda r: (r[1], r[2], -math.inf if r[3] is None else r[3], r[4]),
    )
    return ExperimentResult(name, rows, info={"n": n, "trials": trials, "seed": seed, **cfg})
