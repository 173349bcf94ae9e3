"""Leader selection when the topology changes.

Three settings are covered:

* random link failures, where the objective is the expected error over a
  distribution of Laplacians (estimated by Monte Carlo or exact enumeration);
* switching among a known ensemble of topologies, optimizing the average or
  the worst case (the latter through the truncated objective
  ``F_c(S) = mean_i max(R(S|L_i), c)`` and bisection on ``c``);
* switching combined with per-topology random failures.

A failure sample in which some follower cannot reach any leader has unbounded
error.  Under the default ``disconnected="exclude"`` policy such samples are
dropped from the mean for that leader set and the dropped probability mass is
reported as ``disconnected_fraction``.  The ``"condition"`` policy instead
drops every sample whose failed graph is disconnected, independently of the
leader set; the objective is then a fixed convex combination of per-topology
errors and stays supermodular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import AllSamplesDisconnected, InfeasibleBudget, InvalidK, ValidationError
from .graph import NoisyGraph, as_leaders, count_components, laplacian_from_edges
from .greedy import SelectionResult, greedy_select
from .metric import GAIN_TOL, singleton_errors
from .static import select_static_k, static_objective

MAX_ENUM_EDGES = 20
POLICIES = ("exclude", "condition")


# -- failure models -------------------------------------------------------------

@dataclass(frozen=True)
class FailureModel:
    """Distribution over Laplacians.

    Either independent link failures with probability ``p`` on the links of the
    graph passed at evaluation time, or an explicit list of ``scenarios`` with
    probabilities ``weights``.  ``samples`` and ``seed`` drive Monte Carlo.
    """

    p: float | None = None
    scenarios: tuple[NoisyGraph, ...] | None = None
    weights: tuple[float, ...] | None = None
    samples: int = 1000
    seed: int = 0
    disconnected: str = "exclude"

    def __post_init__(self):
        if self.disconnected not in POLICIES:
            raise ValidationError(f"disconnected policy must be one of {POLICIES}")
        if (self.p is None) == (self.scenarios is None):
            raise ValidationError("give exactly one of p or scenarios")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"p must lie in [0, 1], got {self.p}")
        if self.scenarios is not None:
            object.__setattr__(self, "scenarios", tuple(self.scenarios))
            w = self.weights
            if w is None:
                w = (1.0 / len(self.scenarios),) * len(self.scenarios)
            w = tuple(float(x) for x in w)
            if len(w) != len(self.scenarios) or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
                raise ValidationError("scenario weights must be nonnegative and sum to 1")
            if len({gr.n for gr in self.scenarios}) != 1:
                raise ValidationError("scenarios must share a node count")
            object.__setattr__(self, "weights", w)
        if self.samples < 1:
            raise ValidationError("samples must be at least 1")

    @classmethod
    def independent(cls, p: float, samples: int = 1000, seed: int = 0, **kw) -> "FailureModel":
        return cls(p=p, samples=samples, seed=seed, **kw)

    @classmethod
    def scenario_list(cls, graphs, weights=None, samples: int = 1000, seed: int = 0, **kw) -> "FailureModel":
        return cls(scenarios=tuple(graphs), weights=weights, samples=samples, seed=seed, **kw)


@dataclass
class LaplacianSample:
    """Weighted collection of Laplacians with their component labels."""

    n: int
    laps: np.ndarray          # (K, n, n)
    labels: np.ndarray        # (K, n) connected-component ids
    probs: np.ndarray         # (K,) probability mass of each distinct Laplacian
    counts: np.ndarray | None = None   # (K,) Monte Carlo multiplicities, None if exact
    policy: str = "exclude"

    @property
    def graph_connected(self) -> np.ndarray:
        return (self.labels == self.labels[:, :1]).all(axis=1)

    @property
    def total_draws(self) -> int | None:
        return None if self.counts is None else int(self.counts.sum())


def _sample_from_masks(g: NoisyGraph, masks: np.ndarray, probs: np.ndarray, counts, policy) -> LaplacianSample:
    K = len(masks)
    laps = np.empty((K, g.n, g.n))
    labels = np.empty((K, g.n), dtype=np.intp)
    for k, m in enumerate(masks):
        h, t, w = g.heads[m], g.tails[m], g.weights[m]
        laps[k] = laplacian_from_edges(g.n, h, t, w)
        labels[k] = count_components(g.n, h, t)[1]
    return LaplacianSample(g.n, laps, labels, probs, counts, policy)


def _sample_from_graphs(graphs: Sequence[NoisyGraph], probs, counts, policy) -> LaplacianSample:
    n = graphs[0].n
    laps = np.stack([laplacian_from_edges(n, gr.heads, gr.tails, gr.weights) for gr in graphs])
    labels = np.stack([count_components(n, gr.heads, gr.tails)[1] for gr in graphs])
    return LaplacianSample(n, laps, labels, np.asarray(probs, float), counts, policy)


def draw_sample(fm: FailureModel, g: NoisyGraph | None, rng: np.random.Generator | None = None) -> LaplacianSample:
    """Draw ``fm.samples`` Laplacians; identical draws are merged with counts.

    Link survival uses ``uniform >= p`` so that, for a fixed stream, the failed
    links at a smaller ``p`` are a subset of those at a larger ``p``.
    """
    rng = np.random.default_rng(fm.seed) if rng is None else rng
    M = fm.samples
    if fm.scenarios is not None:
        idx = rng.choice(len(fm.scenarios), size=M, p=np.asarray(fm.weights))
        uniq, counts = np.unique(idx, return_counts=True)
        return _sample_from_graphs([fm.scenarios[i] for i in uniq], counts / M, counts, fm.disconnected)
    masks = rng.random((M, g.num_edges)) >= fm.p
    uniq, counts = np.unique(masks, axis=0, return_counts=True)
    return _sample_from_masks(g, uniq, counts / M, counts, fm.disconnected)


def enumerate_sample(fm: FailureModel, g: NoisyGraph | None) -> LaplacianSample:
    """Exact distribution: every failure pattern (or scenario) with its probability."""
    if fm.scenarios is not None:
        return _sample_from_graphs(fm.scenarios, fm.weights, None, fm.disconnected)
    E = g.num_edges
    if E > MAX_ENUM_EDGES:
        raise ValidationError(f"{E} links is too many to enumerate (limit {MAX_ENUM_EDGES})")
    ints = np.arange(2**E)
    masks = ((ints[:, None] >> np.arange(E)) & 1).astype(bool)
    alive = masks.sum(axis=1)
    probs = (1.0 - fm.p) ** alive * fm.p ** (E - alive)
    keep = probs > 0
    return _sample_from_masks(g, masks[keep], probs[keep], None, fm.disconnected)


@dataclass(frozen=True)
class ExpectedError:
    mean: float
    stderr: float
    disconnected_fraction: float


def _sample_errors(sample: LaplacianSample, members: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ``R(S|L_k)`` (NaN where a follower is cut off) and coverage flags."""
    K, n = sample.labels.shape
    lead = np.asarray(members, dtype=np.intp)
    rows = np.arange(K)[:, None]
    has = np.zeros((K, n), dtype=bool)
    has[rows, sample.labels[:, lead]] = True
    covered = has[rows, sample.labels].all(axis=1)
    if sample.policy == "condition":
        covered &= sample.graph_connected
    out = np.full(K, np.nan)
    f = np.setdiff1d(np.arange(n), lead)
    if len(f) == 0:
        out[covered] = 0.0
    elif covered.any():
        idx = np.flatnonzero(covered)
        blocks = sample.laps[np.ix_(idx, f, f)]
        out[idx] = [0.5 * _trace_inverse(b) for b in blocks]
    return out, covered


def _trace_inverse(block: np.ndarray) -> float:
    # tr(A^-1) = ||C^-1||_F^2 for the Cholesky factor A = C C^T.
    c, info = lapack.dpotrf(block, lower=1, clean=1)
    if info != 0:
        raise np.linalg.LinAlgError("grounded block is not positive definite")
    ci, info = lapack.dtrtri(c, lower=1)
    return float(np.einsum("ij,ij->", ci, ci))


def evaluate_sample(sample: LaplacianSample, s) -> ExpectedError:
    members = list(as_leaders(s))
    r, covered = _sample_errors(sample, members)
    mass = float(sample.probs[covered].sum())
    if not covered.any():
        raise AllSamplesDisconnected("every sampled topology leaves a follower without a leader")
    w = sample.probs[covered] / mass
    mean = float(np.dot(w, r[covered]))
    if sample.counts is None:
        stderr = 0.0
    else:
        c = sample.counts[covered]
        m = int(c.sum())
        var = float(np.dot(c, (r[covered] - mean) ** 2)) / (m - 1) if m > 1 else 0.0
        stderr = math.sqrt(var / m)
    return ExpectedError(mean=mean, stderr=stderr, disconnected_fraction=1.0 - mass)


def expected_error_mc(fm: FailureModel, g: NoisyGraph | None, s) -> ExpectedError:
    """Monte Carlo estimate of the expected error with ``fm.samples`` draws."""
    s = as_leaders(s)
    if len(s) == 0:
        from .errors import EmptyLeaderSet

        raise EmptyLeaderSet("at least one leader is required")
    return evaluate_sample(draw_sample(fm, g), s)


def expected_error_exact(fm: FailureModel, g: NoisyGraph | None, s) -> ExpectedError:
    """Exact expectation by enumerating every failure pattern."""
    return evaluate_sample(enumerate_sample(fm, g), s)


def sample_objective(sample: LaplacianSample) -> Callable[[tuple[int, ...]], float]:
    """Expected error over a fixed sample; ``inf`` when every sample is cut off."""

    def value(members: tuple[int, ...]) -> float:
        r, covered = _sample_errors(sample, members)
        if not covered.any():
            return math.inf
        w = sample.probs[covered]
        return float(np.dot(w, r[covered]) / w.sum())

    return value


def _failure_sample(fm: FailureModel, g, exact: bool) -> LaplacianSample:
    return enumerate_sample(fm, g) if exact else draw_sample(fm, g)


def _n_of(fm: FailureModel, g) -> int:
    return fm.scenarios[0].n if fm.scenarios is not None else g.n


def _finish_failure_result(res: SelectionResult, sample: LaplacianSample) -> SelectionResult:
    if not math.isfinite(res.error_trace[0]):
        raise AllSamplesDisconnected("no leader set of the explored sizes reaches every follower")
    est = evaluate_sample(sample, res.leaders)
    res.info.update(
        stderr=est.stderr,
        disconnected_fraction=est.disconnected_fraction,
        samples=sample.total_draws,
        exact=sample.counts is None,
    )
    return res


def select_k_random_failures(fm: FailureModel, g, k: int, *, exact: bool = False, lazy: bool = False) -> SelectionResult:
    """Greedy size-k selection on the expected error.

    All candidates within a run are scored on the same sample (common random
    numbers).  ``exact=True`` scores on the full enumeration instead.
    """
    n = _n_of(fm, g)
    if not 1 <= k <= n:
        raise InvalidK(f"k must lie in 1..{n}, got {k}")
    sample = _failure_sample(fm, g, exact)
    res = greedy_select(sample_objective(sample), n, max_size=k, lazy=lazy)
    res.info.update(k=k)
    return _finish_failure_result(res, sample)


def select_alpha_random_failures(fm: FailureModel, g, alpha: float, *, exact: bool = False, lazy: bool = False) -> SelectionResult:
    n = _n_of(fm, g)
    alpha = max(float(alpha), 0.0)
    sample = _failure_sample(fm, g, exact)
    res = greedy_select(sample_objective(sample), n, target=alpha, lazy=lazy)
    res.info.update(alpha=alpha)
    return _finish_failure_result(res, sample)


# -- switching topologies -------------------------------------------------------

@dataclass(frozen=True)
class TopologyEnsemble:
    topologies: tuple[NoisyGraph, ...]

    def __post_init__(self):
        tops = tuple(self.topologies)
        if not tops:
            raise ValidationError("an ensemble needs at least one topology")
        if len({t.n for t in tops}) != 1:
            raise ValidationError("topologies must share a node count")
        object.__setattr__(self, "topologies", tops)

    @property
    def n(self) -> int:
        return self.topologies[0].n

    @property
    def M(self) -> int:
        return len(self.topologies)

    def __iter__(self):
        return iter(self.topologies)

    def __len__(self) -> int:
        return len(self.topologies)


def _errors(objectives, members) -> np.ndarray:
    return np.array([f(members) for f in objectives])


def per_topology_errors(ens: TopologyEnsemble, s) -> np.ndarray:
    members = tuple(as_leaders(s))
    return _errors([static_objective(t) for t in ens], members)


def avg_error(ens: TopologyEnsemble, s) -> float:
    return float(per_topology_errors(ens, s).mean())


def worst_error(ens: TopologyEnsemble, s) -> tuple[float, int]:
    """Largest per-topology error and the (lowest) index attaining it."""
    r = per_topology_errors(ens, s)
    i = int(np.argmax(r))
    return float(r[i]), i


def truncated_objective(ens: TopologyEnsemble, c: float, s) -> float:
    """``F_c(S) = mean_i max(R(S|L_i), c)``."""
    return float(np.maximum(per_topology_errors(ens, s), c).mean())


def ensemble_max_singleton(ens: TopologyEnsemble) -> float:
    return float(max(singleton_errors(t).max() for t in ens))


def default_beta(singleton_table: np.ndarray) -> float:
    """``1 + log(max_v sum_i R({v}|L_i))``, clamped below at 1."""
    return max(1.0, 1.0 + math.log(float(singleton_table.sum(axis=0).max())))


def _truncated(objectives, c: float):
    def value(members: tuple[int, ...]) -> float:
        return float(np.maximum(_errors(objectives, members), c).mean())

    return value


def _traced(res: SelectionResult, objectives) -> SelectionResult:
    """Replace the surrogate trace with the worst per-topology error after each pick."""
    members = list(res.leaders)
    res.info["surrogate_trace"] = res.error_trace
    res.error_trace = [float(_errors(objectives, tuple(members[: i + 1])).max()) for i in range(len(members))]
    return res


def _switching_alpha(objectives, n: int, alpha: float, lazy: bool = False) -> SelectionResult:
    res = greedy_select(_truncated(objectives, alpha), n, target=alpha, lazy=lazy)
    res.info.update(alpha=alpha)
    return _traced(res, objectives)


def _switching_k(objectives, n: int, k: int, beta: float, delta: float, r_max: float) -> SelectionResult:
    budget = beta * k
    # Values are resolved to integer multiples of the greedy tolerance quantum.
    quantum = GAIN_TOL * r_max
    lo, hi = 0.0, r_max
    # At alpha = r_max every singleton is admissible, so this always succeeds.
    accepted = _switching_alpha(objectives, n, hi)
    hi = accepted_alpha = accepted.error_trace[-1]
    iterations = 0
    while hi - lo >= delta * quantum:
        alpha = 0.5 * (hi + lo)
        res = _switching_alpha(objectives, n, alpha)
        iterations += 1
        ok = len(res.leaders) <= budget and res.error_trace[-1] <= alpha
        if ok:
            # The accepted set stays admissible down to its own worst error.
            hi = accepted_alpha = res.error_trace[-1]
            accepted = res
        else:
            lo = alpha
    feasible = len(accepted.leaders) <= budget
    accepted.info.update(
        alpha=accepted_alpha, beta=beta, delta=delta, quantum=quantum, k=k, budget=budget,
        iterations=iterations, feasible=feasible, r_max=r_max,
    )
    if not feasible:
        raise InfeasibleBudget(f"no threshold admits at most {budget:g} leaders", accepted)
    return accepted


def select_switching_k(
    ens: TopologyEnsemble, k: int, beta: float | None = None, delta: float | None = None
) -> SelectionResult:
    """Bisection on the error level with greedy covering of ``F_alpha``.

    Defaults: ``delta = 1/M`` and ``beta = 1 + log(max_v sum_i R({v}|L_i))``.
    ``delta`` is measured in units of ``GAIN_TOL * R_max``, the resolution at
    which greedy gains count as zero, so errors behave as integer-valued.
    The returned set satisfies ``max_i R(S|L_i) <= info['alpha']`` and
    ``|S| <= beta * k``.
    """
    if not 1 <= k <= ens.n:
        raise InvalidK(f"k must lie in 1..{ens.n}, got {k}")
    table = np.array([singleton_errors(t) for t in ens])
    beta = default_beta(table) if beta is None else float(beta)
    delta = 1.0 / ens.M if delta is None else float(delta)
    if beta < 1 or delta <= 0:
        raise ValidationError("need beta >= 1 and delta > 0")
    objectives = [static_objective(t) for t in ens]
    return _switching_k(objectives, ens.n, k, beta, delta, float(table.max()))


def select_alpha_switching(ens: TopologyEnsemble, alpha: float, *, lazy: bool = False) -> SelectionResult:
    """Smallest greedy set with ``R(S|L_i) <= alpha`` for every topology."""
    alpha = max(float(alpha), 0.0)
    return _switching_alpha([static_objective(t) for t in ens], ens.n, alpha, lazy=lazy)


def select_avg_k(ens: TopologyEnsemble, k: int, *, lazy: bool = False) -> SelectionResult:
    objectives = [static_objective(t) for t in ens]
    res = greedy_select(lambda m: float(_errors(objectives, m).mean()), ens.n, max_size=k, lazy=lazy)
    res.info.update(k=k)
    return res


def select_avg_alpha(ens: TopologyEnsemble, alpha: float, *, lazy: bool = False) -> SelectionResult:
    objectives = [static_objective(t) for t in ens]
    res = greedy_select(lambda m: float(_errors(objectives, m).mean()), ens.n, target=alpha, lazy=lazy)
    res.info.update(alpha=alpha)
    return res


def select_per_topology(ens: TopologyEnsemble, k: int) -> list[SelectionResult]:
    """Independent size-k selections, one per topology."""
    return [select_static_k(t, k) for t in ens]


def switching_with_failures(
    ens: TopologyEnsemble,
    fms: Sequence[FailureModel],
    mode: str = "avg",
    *,
    k: int | None = None,
    alpha: float | None = None,
    beta: float | None = None,
    delta: float | None = None,
    exact: bool = False,
) -> SelectionResult:
    """Selection on per-topology expected errors.

    ``mode='avg'`` minimizes the mean of the expected errors; ``mode='worst'``
    targets the largest expected error through the truncated surrogate.  Each
    topology's failures are sampled independently.
    """
    if len(fms) != ens.M:
        raise ValidationError("need one failure model per topology")
    if (k is None) == (alpha is None):
        raise ValidationError("give exactly one of k or alpha")
    samples = [_failure_sample(fm, t, exact) for fm, t in zip(fms, ens)]
    objectives = [sample_objective(sm) for sm in samples]
    n = ens.n
    if mode == "avg":
        f = lambda m: float(_errors(objectives, m).mean())  # noqa: E731
        if k is not None:
            res = greedy_select(f, n, max_size=k)
        else:
            res = greedy_select(f, n, target=max(alpha, 0.0))
        res.info.update(mode=mode)
        return res
    if mode != "worst":
        raise ValidationError(f"mode must be 'avg' or 'worst', got {mode!r}")
    if alpha is not None:
        res = _switching_alpha(objectives, n, max(alpha, 0.0))
    else:
        table = np.array([[obj((v,)) for v in range(n)] for obj in objectives])
        finite = table[np.isfinite(table)]
        if finite.size == 0:
            raise AllSamplesDisconnected("no single leader reaches every follower in any sample")
        beta = default_beta(np.where(np.isfinite(table), table, 0.0)) if beta is None else beta
        delta = 1.0 / ens.M if delta is None else delta
        res = _switching_k(objectives, n, k, beta, delta, float(finite.max()))
    res.info.update(mode=mode)
    return res
