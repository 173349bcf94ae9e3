"""Online leader selection for arbitrarily time-varying topologies.

Each leader position ``i`` keeps a weight vector over nodes.  After the
topology of step ``t`` is revealed, position ``i`` is charged the normalized
shortfall of every candidate's marginal gain against the best gain, given the
prefix already drawn for step ``t+1``.  Weights shrink as ``beta ** loss`` and
the next pick is drawn from the normalized weights.

The empty prefix uses ``R(empty) := R_max(G_t)``, the largest singleton error,
so the first position is scored by singleton errors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BruteForceTooLarge, DimensionMismatch, InvalidK, ValidationError
from .graph import LeaderSet, NoisyGraph, laplacian
from .metric import GAIN_TOL, error_from_laplacian
from .static import select_static_k
from .dynamic import TopologyEnsemble, select_avg_k

MAX_HINDSIGHT_SETS = 20_000
# Weights are rescaled by their maximum once it falls below this; pi is unchanged.
_RESCALE_BELOW = 1e-150


@dataclass
class OnlineState:
    n: int
    k: int
    beta: float
    weights: np.ndarray
    leaders: LeaderSet
    rng: np.random.Generator
    t: int = 0

    @property
    def distributions(self) -> np.ndarray:
        """Row ``i`` is the sampling distribution of position ``i``."""
        return self.weights / self.weights.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class StepOutcome:
    t: int
    selected: LeaderSet
    error: float
    losses: np.ndarray
    optima: tuple[int, ...]


def _draw(pi: np.ndarray, taken: Sequence[int], rng: np.random.Generator) -> int:
    # Duplicates are resampled without replacement: taken nodes get zero mass.
    p = pi.copy()
    p[list(taken)] = 0.0
    total = p.sum()
    if not total > 0:
        p = np.ones_like(pi)
        p[list(taken)] = 0.0
        total = p.sum()
    return int(rng.choice(len(p), p=p / total))


def _draw_set(weights: np.ndarray, rng: np.random.Generator) -> LeaderSet:
    picks: list[int] = []
    for w in weights:
        picks.append(_draw(w / w.sum(), picks, rng))
    return LeaderSet(tuple(picks))


def init_online(n: int, k: int, beta: float, seed: int) -> OnlineState:
    """Uniform weights; the first leader set is drawn from them."""
    if not 1 <= k <= n:
        raise InvalidK(f"k must lie in 1..{n}, got {k}")
    if not 0 < beta <= 1:
        raise ValidationError(f"beta must lie in (0, 1], got {beta}")
    rng = np.random.default_rng(seed)
    weights = np.ones((k, n))
    return OnlineState(n=n, k=k, beta=float(beta), weights=weights, leaders=_draw_set(weights, rng), rng=rng)


def position_losses(lap: np.ndarray, prefix: Sequence[int], r_empty: float) -> tuple[np.ndarray, int]:
    """Losses ``1 - gain(j) / gain(opt)`` of every node given ``prefix``.

    Returns the loss vector and the best node.  Nodes already in the prefix
    gain nothing.  When no node gains, every loss is zero.
    """
    n = lap.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[list(prefix)] = True
    base = error_from_laplacian(lap, mask) if prefix else r_empty
    gains = np.zeros(n)
    for j in np.flatnonzero(~mask):
        mask[j] = True
        gains[j] = base - error_from_laplacian(lap, mask)
        mask[j] = False
    gains = np.maximum(gains, 0.0)
    best = float(gains.max())
    tol = GAIN_TOL * max(r_empty, np.finfo(float).tiny)
    opt = int(np.flatnonzero(gains >= best - tol)[0])
    if not best > 0:
        return np.zeros(n), opt
    losses = np.clip(1.0 - gains / gains[opt], 0.0, 1.0)
    losses[opt] = 0.0
    return losses, opt


def online_step(st: OnlineState, g: NoisyGraph) -> tuple[OnlineState, StepOutcome]:
    """Score the current set on the revealed ``g`` and draw the next set."""
    if g.n != st.n:
        raise DimensionMismatch(f"topology has {g.n} nodes, state expects {st.n}")
    lap = laplacian(g)
    realized = error_from_laplacian(lap, st.leaders.mask(st.n))
    r_empty = max(
        error_from_laplacian(lap, np.eye(st.n, dtype=bool)[v]) for v in range(st.n)
    )

    weights = st.weights.copy()
    losses = np.zeros((st.k, st.n))
    optima: list[int] = []
    picks: list[int] = []
    for i in range(st.k):
        losses[i], opt = position_losses(lap, picks, r_empty)
        optima.append(opt)
        weights[i] *= st.beta ** losses[i]
        if weights[i].max() < _RESCALE_BELOW:
            weights[i] /= weights[i].max()
        picks.append(_draw(weights[i] / weights[i].sum(), picks, st.rng))

    outcome = StepOutcome(
        t=st.t + 1, selected=st.leaders, error=realized, losses=losses, optima=tuple(optima)
    )
    nxt = replace(st, weights=weights, leaders=LeaderSet(tuple(picks)), t=st.t + 1)
    return nxt, outcome


def run_online(
    topologies: Sequence[NoisyGraph], k: int, beta: float, seed: int
) -> tuple[OnlineState, list[StepOutcome]]:
    st = init_online(topologies[0].n, k, beta, seed)
    history = []
    for g in topologies:
        st, out = online_step(st, g)
        history.append(out)
    return st, history


def set_errors(g: NoisyGraph, sets: np.ndarray) -> np.ndarray:
    """``R(S|L)`` for every row of the ``(m, k)`` leader index array ``sets``."""
    lap = laplacian(g)
    n = g.n
    sets = np.asarray(sets, dtype=np.intp)
    m, k = sets.shape
    if k == n:
        return np.zeros(m)
    keep = np.ones((m, n), dtype=bool)
    np.put_along_axis(keep, sets, False, axis=1)
    fol = np.nonzero(keep)[1].reshape(m, n - k)
    blocks = lap[fol[:, :, None], fol[:, None, :]]
    chol = np.linalg.cholesky(blocks)
    eye = np.broadcast_to(np.eye(n - k), blocks.shape)
    inv_chol = np.linalg.solve(chol, eye)
    return 0.5 * np.einsum("mij,mij->m", inv_chol, inv_chol)


@dataclass
class RegretReport:
    """Cumulative regret series for ``t = 1..T``.

    ``regret`` is ``(1 - 1/e) * sum R(S_t) - min_S sum R(S|L_t)`` with ``S``
    ranging over size-``k`` sets.  ``plain_regret`` drops the ``1 - 1/e``.
    """

    online: np.ndarray
    hindsight: np.ndarray
    regret: np.ndarray
    plain_regret: np.ndarray
    reference: np.ndarray
    hindsight_set: tuple[int, ...]
    exact: bool
    r_max: float
    info: dict = field(default_factory=dict)

    @property
    def slope(self) -> float:
        return regret_slope(self.regret)

    @property
    def sublinear(self) -> bool:
        return self.regret[-1] <= 0 or self.slope < 1.0

    def to_csv(self) -> str:
        rows = ["t,error,cumulative_error,hindsight,K,plain_regret,reference"]
        steps = np.diff(self.online, prepend=0.0)
        cols = (steps, self.online, self.hindsight, self.regret, self.plain_regret, self.reference)
        for t in range(len(self.online)):
            rows.append(",".join([str(t + 1)] + [repr(float(c[t])) for c in cols]))
        return "\n".join(rows) + "\n"


def regret_slope(regret: np.ndarray, start: int = 1) -> float:
    """Least-squares slope of ``log K_t`` against ``log t`` over positive ``K_t``.

    Returns ``-inf`` when fewer than two points are positive (regret bounded
    above by zero is sublinear).
    """
    regret = np.asarray(regret, dtype=float)
    t = np.arange(1, len(regret) + 1)
    keep = (regret > 0) & (t >= start)
    if keep.sum() < 2:
        return -math.inf
    return float(np.polyfit(np.log(t[keep]), np.log(regret[keep]), 1)[0])


def regret_report(
    history: Sequence[StepOutcome],
    topologies: Sequence[NoisyGraph],
    k: int,
    *,
    hindsight: str = "auto",
) -> RegretReport:
    """Compare realized errors with the best fixed size-``k`` set in hindsight.

    ``hindsight`` is ``"brute"`` (raise :class:`BruteForceTooLarge` beyond
    :data:`MAX_HINDSIGHT_SETS` candidate sets), ``"greedy"`` (greedy on the summed
    error, an upper bound on the minimum), or ``"auto"`` (brute when it fits).
    The minimum is taken per prefix, so ``hindsight[t]`` may use a different set
    for each ``t``.
    """
    if len(history) != len(topologies):
        raise DimensionMismatch("history and topology trace differ in length")
    if hindsight not in ("auto", "brute", "greedy"):
        raise ValidationError(f"unknown hindsight mode {hindsight!r}")
    n = topologies[0].n
    T = len(topologies)
    online = np.cumsum([h.error for h in history])
    count = math.comb(n, k)
    exact = hindsight == "brute" or (hindsight == "auto" and count <= MAX_HINDSIGHT_SETS)
    if exact and count > MAX_HINDSIGHT_SETS:
        raise BruteForceTooLarge(f"{count} candidate sets exceed {MAX_HINDSIGHT_SETS}")

    if exact:
        sets = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
        table = np.cumsum(np.array([set_errors(g, sets) for g in topologies]), axis=0)
        best = table.argmin(axis=1)
        hind = table[np.arange(T), best]
        final_set = tuple(int(v) for v in sets[best[-1]])
    else:
        hind = np.empty(T)
        final_set = ()
        for t in range(T):
            res = select_avg_k(TopologyEnsemble(tuple(topologies[: t + 1])), k)
            hind[t] = res.error * (t + 1)
            final_set = tuple(res.leaders)

    r_max = max(
        float(error_from_laplacian(laplacian(g), np.eye(n, dtype=bool)[v]))
        for g in topologies
        for v in range(n)
    )
    steps = np.arange(1, T + 1)
    return RegretReport(
        online=online,
        hindsight=hind,
        regret=(1 - 1 / math.e) * online - hind,
        plain_regret=online - hind,
        reference=np.sqrt(r_max * k * steps * math.log(n)),
        hindsight_set=final_set,
        exact=exact,
        r_max=r_max,
        info={"candidate_sets": count, "k": k},
    )


def static_reference(g: NoisyGraph, k: int) -> tuple[int, ...]:
    """Static greedy picks on a fixed graph, for convergence checks."""
    return tuple(select_static_k(g, k).leaders)
