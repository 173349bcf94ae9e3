"""Steady-state follower error as a function of the leader set.

With leaders ``S`` and grounded Laplacian ``L_ff`` the total mean-square
deviation of the followers is ``R(S) = 0.5 * trace(inv(L_ff))`` and node ``u``
contributes ``R(S, u) = 0.5 * inv(L_ff)[u, u]``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import AlreadyLeader, EmptyLeaderSet, ValidationError
from .graph import LeaderSet, NoisyGraph, as_leaders, ground, laplacian

# Gains below GAIN_TOL * R_max count as zero (greedy termination and ties).
GAIN_TOL = 1e-12


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


def inverse_diagonal(block: np.ndarray) -> np.ndarray:
    """Diagonal of ``inv(block)`` for a symmetric positive-definite block.

    Uses a Cholesky factorization followed by the LAPACK inverse-from-factor
    routine.  Raises :class:`NotPositiveDefinite` when the factorization fails.
    """
    if block.shape[0] == 0:
        return np.zeros(0)
    c, info = lapack.dpotrf(block, lower=0, clean=0)
    if info != 0:
        raise NotPositiveDefinite(f"potrf failed with info={info}")
    inv, info = lapack.dpotri(c, lower=0)
    if info != 0:
        raise NotPositiveDefinite(f"potri failed with info={info}")
    return np.diag(inv).copy()


def follower_block(lap: np.ndarray, leader_mask: np.ndarray) -> np.ndarray:
    f = np.flatnonzero(~leader_mask)
    return lap[np.ix_(f, f)]


def error_from_laplacian(lap: np.ndarray, leader_mask: np.ndarray) -> float:
    """``0.5 * trace(inv(L_ff))`` straight from a dense Laplacian."""
    return 0.5 * float(inverse_diagonal(follower_block(lap, leader_mask)).sum())


@dataclass(frozen=True)
class ErrorReport:
    total: float
    per_node: dict[int, float]
    leaders: LeaderSet

    def to_json(self) -> str:
        return json.dumps(
            {
                "total": self.total,
                "leaders": list(self.leaders),
                "per_node": {str(k): v for k, v in self.per_node.items()},
            }
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "error"])
        for node, err in sorted(self.per_node.items()):
            w.writerow([node, repr(err)])
        w.writerow(["total", repr(self.total)])
        return buf.getvalue()


def system_error(g: NoisyGraph, s) -> ErrorReport:
    """Total and per-follower steady-state error for leader set ``s``."""
    gs = ground(g, s)
    diag = 0.5 * gs.inverse_diagonal
    per_node = {int(v): float(x) for v, x in zip(gs.followers, diag)}
    return ErrorReport(total=float(diag.sum()), per_node=per_node, leaders=gs.leaders)


def error_value(g: NoisyGraph, s) -> float:
    """Scalar ``R(S)``; skips building the full report."""
    s = as_leaders(s)
    if len(s) == 0:
        raise EmptyLeaderSet("at least one leader is required")
    s.validate(g.n)
    return error_from_laplacian(laplacian(g), s.mask(g.n))


def marginal_gain(g: NoisyGraph, s, v: int) -> float:
    """``R(S) - R(S + {v})``; nonnegative for any nonempty ``S``."""
    s = as_leaders(s)
    if v in s:
        raise AlreadyLeader(f"node {v} is already a leader")
    return error_value(g, s) - error_value(g, s.add(v))


def singleton_errors(g: NoisyGraph) -> np.ndarray:
    """``R({v})`` for every node ``v``."""
    lap = laplacian(g)
    out = np.empty(g.n)
    for v in range(g.n):
        mask = np.zeros(g.n, dtype=bool)
        mask[v] = True
        out[v] = error_from_laplacian(lap, mask)
    return out


def max_singleton_error(g: NoisyGraph) -> float:
    """Worst error over all single-leader choices."""
    return float(singleton_errors(g).max())


@dataclass(frozen=True)
class GradientBound:
    """First-order bound on the grounded trace after random link failures.

    ``trace_bound`` is in trace units (no factor 0.5); ``error_bound`` is the
    same quantity halved so it compares directly with ``R(S)``.
    """

    trace_bound: float
    exact_trace: float
    delta: float
    lambda_min: float

    @property
    def error_bound(self) -> float:
        return 0.5 * self.trace_bound


def gradient_bound(g: NoisyGraph, s, p: float) -> GradientBound:
    """``trace(inv(L_ff)) + (n - |S|) * delta / lambda_min(L_ff)**2``.

    ``delta = 2 p d X`` with ``d`` the maximum degree and ``X`` the largest
    inverse variance in ``g``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"failure probability must lie in [0, 1], got {p}")
    gs = ground(g, s)
    if gs.all_leaders:
        return GradientBound(0.0, 0.0, 0.0, float("inf"))
    trace = float(gs.inverse_diagonal.sum())
    delta = 2.0 * p * float(g.degrees.max()) * float(g.weights.max())
    lam = float(np.linalg.eigvalsh(gs.L_ff)[0])
    bound = trace + gs.num_followers * delta / lam**2
    return GradientBound(trace_bound=bound, exact_trace=trace, delta=delta, lambda_min=lam)
