"""Greedy minimization of nonincreasing set functions over leader sets.

The engine is shared by every selector: the static error, Monte Carlo failure
averages, ensemble averages and truncated objectives all plug in as a callable
mapping an ordered tuple of leader ids to a float.

The first pick is the best singleton (the objective is undefined on the empty
set).  Later picks maximize the marginal decrease.  Gains within ``tol`` of the
best are ties and go to the lowest node id; a best gain at or below ``tol``
stops the run early (with a value target, only a gain at or below zero does).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph import LeaderSet
from .metric import GAIN_TOL

Objective = Callable[[tuple[int, ...]], float]


@dataclass
class SelectionResult:
    leaders: LeaderSet
    error_trace: list[float]
    bound: float | None = None
    terminated_early: bool = False
    info: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return self.error_trace[-1] if self.error_trace else float("nan")

    def to_dict(self) -> dict:
        return {
            "leaders": list(self.leaders),
            "error_trace": list(self.error_trace),
            "error": self.error,
            "bound": self.bound,
            "terminated_early": self.terminated_early,
            "info": self.info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "leader", "error"])
        for step, (v, err) in enumerate(zip(self.leaders, self.error_trace), 1):
            w.writerow([step, v, repr(err)])
        return buf.getvalue()


def _pick(gains: dict[int, float], tol: float) -> tuple[int, float]:
    # inf - inf gains (both sets infeasible) carry no information.
    gains = {j: (-np.inf if np.isnan(g) else g) for j, g in gains.items()}
    best = max(gains.values())
    pick = min(j for j, g in gains.items() if g >= best - tol)
    return pick, gains[pick]


def greedy_select(
    objective: Objective,
    n: int,
    *,
    max_size: int | None = None,
    target: float | None = None,
    lazy: bool = False,
    candidates: Sequence[int] | None = None,
) -> SelectionResult:
    """Grow a leader set greedily until a size cap or value target is met.

    ``lazy=True`` reuses stale gains as upper bounds, which is exact for
    supermodular objectives and yields the same picks as the naive scan.
    """
    pool = list(range(n)) if candidates is None else sorted(int(c) for c in candidates)
    max_size = len(pool) if max_size is None else min(max_size, len(pool))

    singles = {v: objective((v,)) for v in pool}
    finite = [x for x in singles.values() if np.isfinite(x)]
    scale = max(finite) if finite else 1.0
    tol = GAIN_TOL * max(abs(scale), np.finfo(float).tiny)

    low = min(singles.values())
    first = min(v for v, x in singles.items() if x <= low + tol)
    chosen = [first]
    current = singles[first]
    trace = [current]
    evaluations = len(pool)
    early = False
    bounds = {v: np.inf for v in pool if v != first}

    while len(chosen) < max_size and not (target is not None and current <= target):
        remaining = [v for v in pool if v not in chosen]
        if lazy:
            fresh: dict[int, float] = {}
            values: dict[int, float] = {}
            while True:
                best = max(fresh.values(), default=-np.inf)
                todo = [v for v in remaining if v not in fresh and bounds[v] >= best - 2 * tol]
                if not todo:
                    break
                v = max(todo, key=lambda u: (bounds[u], -u))
                values[v] = objective(tuple(chosen) + (v,))
                gain = current - values[v]
                fresh[v] = bounds[v] = -np.inf if np.isnan(gain) else gain
                evaluations += 1
            gains = fresh
        else:
            values = {v: objective(tuple(chosen) + (v,)) for v in remaining}
            gains = {v: current - x for v, x in values.items()}
            evaluations += len(remaining)
        pick, gain = _pick(gains, tol)
        # A target run keeps going on any real progress so it can honor the target.
        if not gain > tol and not (target is not None and gain > 0):
            early = True
            break
        chosen.append(pick)
        current = values[pick]
        trace.append(current)
        del bounds[pick]

    return SelectionResult(
        leaders=LeaderSet(tuple(chosen)),
        error_trace=trace,
        terminated_early=early,
        info={"evaluations": evaluations, "tolerance": tol, "singleton_max": scale},
    )
