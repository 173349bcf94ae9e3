"""Random-walk view of the follower error.

A walk moves from ``i`` to neighbor ``j`` with probability ``(1/nu_ij) / D_i``.
Its commute time from follower ``u`` to the leader set and back equals
``2 * W * inv(L_ff)[u, u]`` where ``W`` is the total inverse variance, which
gives an estimate of ``R(S, u)`` that does not touch any matrix inverse.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import LeaderTarget, ValidationError, WalkTimeout
from .graph import LeaderSet, NoisyGraph, as_leaders, ground, laplacian

MAX_WALK_STEPS = 10**8
BATCH_SIZE = 8192


@dataclass(frozen=True)
class WalkEstimate:
    mean: float
    stderr: float
    walks: int
    u: int
    leaders: LeaderSet


@dataclass(frozen=True)
class HittingProbabilities:
    """Probability of reaching ``target`` before any node of ``absorbing``."""

    v_star: dict[int, float]
    target: int
    absorbing: LeaderSet

    def as_array(self, n: int) -> np.ndarray:
        return np.array([self.v_star[i] for i in range(n)])


def transition_matrix(g: NoisyGraph) -> np.ndarray:
    lap = laplacian(g)
    P = -lap / g.strengths[:, None]
    np.fill_diagonal(P, 0.0)
    return P


def _check_target(g: NoisyGraph, s: LeaderSet, u: int) -> None:
    s.validate(g.n)
    if not 0 <= u < g.n:
        raise ValidationError(f"node {u} outside 0..{g.n - 1}")
    if u in s:
        raise LeaderTarget(f"node {u} is a leader")


def hitting_probabilities(g: NoisyGraph, s, u: int) -> HittingProbabilities:
    """Solve the harmonic boundary problem ``v(u)=1``, ``v(S)=0``."""
    s = as_leaders(s)
    _check_target(g, s, u)
    lap = laplacian(g)
    v = np.zeros(g.n)
    v[u] = 1.0
    interior = np.array([i for i in range(g.n) if i != u and i not in s], dtype=np.intp)
    if len(interior):
        A = lap[np.ix_(interior, interior)]
        rhs = -lap[interior, u]
        v[interior] = np.linalg.solve(A, rhs)
    return HittingProbabilities({i: float(v[i]) for i in range(g.n)}, int(u), s)


def harmonic_residual(g: NoisyGraph, hp: HittingProbabilities) -> float:
    """Max-norm residual of ``v_i = sum_j P(i,j) v_j`` over interior nodes."""
    P = transition_matrix(g)
    v = hp.as_array(g.n)
    interior = [i for i in range(g.n) if i != hp.target and i not in hp.absorbing]
    if not interior:
        return 0.0
    return float(np.abs(v[interior] - P[interior] @ v).max())


def commute_time_exact(g: NoisyGraph, s, u: int) -> float:
    """``2 * sum(1/nu) * inv(L_ff)[u, u]``."""
    s = as_leaders(s)
    _check_target(g, s, u)
    gs = ground(g, s)
    return 2.0 * g.total_weight * float(gs.inverse_diagonal[gs.follower_index[u]])


def commute_time_from_hitting(g: NoisyGraph, s, u: int) -> float:
    """Commute time via escape probability: ``2W / (D_u * (1 - sum_t P(u,t) v_t))``."""
    hp = hitting_probabilities(g, s, u)
    P = transition_matrix(g)
    v = hp.as_array(g.n)
    escape = 1.0 - float(P[u] @ v)
    return 2.0 * g.total_weight / (g.strengths[u] * escape)


def _walk_tables(g: NoisyGraph) -> tuple[np.ndarray, np.ndarray]:
    dmax = int(g.degrees.max())
    nbr = np.zeros((g.n, dmax), dtype=np.intp)
    cum = np.full((g.n, dmax), 2.0)
    P = transition_matrix(g)
    for i, adj in enumerate(g.neighbors):
        nbr[i, : len(adj)] = adj
        c = np.cumsum(P[i, list(adj)])
        c[-1] = 1.0
        cum[i, : len(adj)] = c
    return nbr, cum


def _run_batch(nbr, cum, is_leader, u, count, rng, max_steps) -> np.ndarray:
    pos = np.full(count, u, dtype=np.intp)
    returning = np.zeros(count, dtype=bool)
    steps = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    t = 0
    while active.size:
        if t >= max_steps:
            raise WalkTimeout(f"{active.size} walks exceeded {max_steps} steps")
        t += 1
        p = pos[active]
        r = rng.random(active.size)
        nxt = nbr[p, (cum[p] <= r[:, None]).sum(axis=1)]
        pos[active] = nxt
        steps[active] += 1
        ret = returning[active]
        returning[active] = ret | is_leader[nxt]
        done = ret & (nxt == u)
        active = active[~done]
    return steps


def commute_time_sampled(
    g: NoisyGraph,
    s,
    u: int,
    walks: int,
    seed: int,
    *,
    threads: int = 1,
    max_steps: int = MAX_WALK_STEPS,
) -> WalkEstimate:
    """Monte Carlo round trip ``u -> S -> u``.

    Walks are simulated in fixed batches of :data:`BATCH_SIZE`; batch ``b``
    draws from the substream ``SeedSequence(seed, spawn_key=(b,))`` so the
    estimate does not depend on ``threads``.
    """
    s = as_leaders(s)
    _check_target(g, s, u)
    if walks < 1:
        raise ValidationError("walks must be at least 1")
    nbr, cum = _walk_tables(g)
    is_leader = s.mask(g.n)
    sizes = [min(BATCH_SIZE, walks - b0) for b0 in range(0, walks, BATCH_SIZE)]

    def job(b: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        return _run_batch(nbr, cum, is_leader, u, sizes[b], rng, max_steps)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]
    lengths = np.concatenate(parts).astype(float)
    mean = float(np.mean(lengths))
    stderr = float(np.std(lengths, ddof=1) / np.sqrt(walks)) if walks > 1 else 0.0
    return WalkEstimate(mean=mean, stderr=stderr, walks=walks, u=int(u), leaders=s)
