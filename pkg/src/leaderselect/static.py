"""Leader selection on a fixed topology.

``select_static_k`` picks at most ``k`` leaders to minimize ``R(S)``;
``select_static_alpha`` picks leaders until ``R(S) <= alpha``.  Both return the
greedy pick order together with the error after each pick and the matching
approximation guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidK
from .graph import NoisyGraph, laplacian
from .greedy import SelectionResult, greedy_select
from .metric import error_from_laplacian, max_singleton_error


def static_objective(g: NoisyGraph):
    lap = laplacian(g)

    def value(members: tuple[int, ...]) -> float:
        mask = np.zeros(g.n, dtype=bool)
        mask[list(members)] = True
        return error_from_laplacian(lap, mask)

    return value


@dataclass(frozen=True)
class GreedyBoundK:
    """Right-hand side ``coefficient * R_opt + offset`` of the size-k guarantee."""

    k: int
    coefficient: float
    offset: float

    def __call__(self, r_opt: float) -> float:
        return self.coefficient * r_opt + self.offset


def bound_coefficient(k: int) -> float:
    """``1 - ((k-1)/k)**k``; equals 1 at k=1 and tends to ``1 - 1/e``."""
    return 1.0 - ((k - 1) / k) ** k


def greedy_bound_k(result: SelectionResult | None, g: NoisyGraph, k: int, r_opt: float | None = None):
    """Guarantee for a size-k greedy run.

    Returns the numeric bound when ``r_opt`` (the true optimum) is supplied,
    otherwise a :class:`GreedyBoundK` closure over candidate optima.
    """
    if k < 1:
        raise InvalidK(f"k must be at least 1, got {k}")
    r_max = (result.info.get("singleton_max") if result is not None else None) or max_singleton_error(g)
    b = GreedyBoundK(k=k, coefficient=bound_coefficient(k), offset=r_max / math.e)
    return b if r_opt is None else b(r_opt)


def alpha_ratio_bound(result: SelectionResult, r_max: float) -> float:
    """``1 + log(R_max / R(S_{k-1}))`` for a result of size ``k``.

    ``R`` of the empty prefix is taken as ``R_max``, so a single pick gives 1.
    """
    k = len(result.leaders)
    prev = r_max if k <= 1 else result.error_trace[k - 2]
    return 1.0 + math.log(r_max / prev)


def select_static_k(g: NoisyGraph, k: int, *, lazy: bool = False) -> SelectionResult:
    if not 1 <= k <= g.n:
        raise InvalidK(f"k must lie in 1..{g.n}, got {k}")
    res = greedy_select(static_objective(g), g.n, max_size=k, lazy=lazy)
    b = greedy_bound_k(res, g, k)
    res.info.update(k=k, bound_coefficient=b.coefficient, bound_offset=b.offset)
    return res


def select_static_alpha(g: NoisyGraph, alpha: float, *, lazy: bool = False) -> SelectionResult:
    alpha = max(float(alpha), 0.0)
    res = greedy_select(static_objective(g), g.n, target=alpha, lazy=lazy)
    res.bound = alpha_ratio_bound(res, res.info["singleton_max"])
    res.info.update(alpha=alpha)
    return res
