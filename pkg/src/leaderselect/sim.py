"""Stochastic simulation of the noisy leader-follower dynamics.

Followers integrate

    dx_f = -D_f^{-1} (L_ff x_f + L_fl x_l + B r) dt + dW,   Cov(dW) = D_f^{-1} dt

with Euler-Maruyama.  The stationary covariance solves a Lyapunov equation
whose solution is ``inv(L_ff) / 2``, so the empirical mean-square deviation
from the equilibrium ``x_f*`` should approach ``R(S)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import eigvalsh, solve_continuous_lyapunov
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .errors import InconsistentOffsets, UnstableStep, ValidationError
from .graph import LeaderSet, NoisyGraph, as_leaders, ground
from .metric import ErrorReport, system_error

OFFSET_TOL = 1e-9
CHUNK_STEPS = 4096


@dataclass
class DynamicsConfig:
    """Simulation inputs.

    ``offsets`` maps an ordered pair ``(i, j)`` to ``r_ij``; the reverse pair is
    implied as ``-r_ij``.  Missing edges default to zero.  ``leader_states``
    defaults to zeros.  ``x0`` defaults to zeros.
    """

    graph: NoisyGraph
    leaders: LeaderSet
    offsets: Mapping[tuple[int, int], float] = field(default_factory=dict)
    leader_states: np.ndarray | None = None
    dt: float = 1e-3
    horizon: float = 2000.0
    burn_in: float = 0.5
    seed: int = 0
    replicates: int = 1
    noise: str = "aggregated"
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.leaders = as_leaders(self.leaders)
        self.leaders.validate(self.graph.n)
        if self.dt <= 0 or self.horizon <= 0:
            raise ValidationError("dt and horizon must be positive")
        if not 0 <= self.burn_in < 1:
            raise ValidationError("burn_in must lie in [0, 1)")
        if self.replicates < 1:
            raise ValidationError("replicates must be at least 1")
        if self.noise not in ("aggregated", "per-link", "none"):
            raise ValidationError(f"unknown noise mode {self.noise!r}")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(self.burn_in * self.steps)


@dataclass
class SimulationSummary:
    empirical_mse: float
    mse_stderr: float
    per_node_variance: dict[int, float]
    per_node_mse: dict[int, float]
    mean_offset: dict[int, float]
    mean_stderr: dict[int, float]
    analytic: ErrorReport
    relative_gap: float
    samples: int
    trajectory: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "empirical_mse": self.empirical_mse,
            "mse_stderr": self.mse_stderr,
            "analytic": self.analytic.total,
            "relative_gap": self.relative_gap,
            "samples": self.samples,
            "per_node_variance": {str(k): v for k, v in self.per_node_variance.items()},
            "per_node_mse": {str(k): v for k, v in self.per_node_mse.items()},
            "mean_offset": {str(k): v for k, v in self.mean_offset.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _edge_offsets(g: NoisyGraph, offsets: Mapping[tuple[int, int], float]) -> np.ndarray:
    """Offsets aligned with ``g.edges`` in the stored ``i < j`` orientation."""
    r = np.zeros(len(g.edges))
    idx = g.edge_index()
    for (i, j), val in offsets.items():
        try:
            if i < j:
                r[idx[(i, j)]] = val
            else:
                r[idx[(j, i)]] = -val
        except KeyError as exc:
            raise ValidationError(f"offset given for non-edge ({i}, {j})") from exc
    return r


def offset_potentials(g: NoisyGraph, offsets: Mapping[tuple[int, int], float]) -> np.ndarray:
    """A state ``x`` with ``x_i - x_j = r_ij`` on every edge.

    Potentials are assigned along a BFS spanning tree from node 0; every edge
    is then checked, and a residual above ``OFFSET_TOL`` (relative to the
    largest offset) raises :class:`InconsistentOffsets`.
    """
    r = _edge_offsets(g, offsets)
    heads, tails = g.heads, g.tails
    adj = coo_matrix((np.ones(len(r)), (heads, tails)), shape=(g.n, g.n)).tocsr()
    order, pred = breadth_first_order(adj, 0, directed=False)
    x = np.zeros(g.n)
    idx = g.edge_index()
    for v in order[1:]:
        p = pred[v]
        # x_p - x_v = r_pv
        x[v] = x[p] - (r[idx[(p, v)]] if p < v else -r[idx[(v, p)]])
    residual = np.abs(x[heads] - x[tails] - r)
    scale = max(1.0, float(np.abs(r).max(initial=0.0)))
    if residual.max(initial=0.0) > OFFSET_TOL * scale:
        raise InconsistentOffsets(f"offsets violate cycle consistency by {residual.max():.3g}")
    return x


def _drive(cfg: DynamicsConfig):
    g = cfg.graph
    gs = ground(g, cfg.leaders)
    r = _edge_offsets(g, cfg.offsets)
    # (B r)_i = sum_j L_ij r_ij = -sum_j r_ij / nu_ij, with r_ji = -r_ij.
    br = np.zeros(g.n)
    np.add.at(br, g.heads, -g.weights * r)
    np.add.at(br, g.tails, g.weights * r)
    xl = np.zeros(len(gs.leaders)) if cfg.leader_states is None else np.asarray(cfg.leader_states, float)
    if xl.shape != (len(gs.leaders),):
        raise ValidationError(f"need {len(gs.leaders)} leader states, got shape {xl.shape}")
    return gs, gs.L_fl @ xl + br[list(gs.followers)]


def desired_state(cfg: DynamicsConfig) -> np.ndarray:
    """Equilibrium ``x_f* = -inv(L_ff) (L_fl x_l* + B r)`` in follower order."""
    offset_potentials(cfg.graph, cfg.offsets)
    gs, c = _drive(cfg)
    return -gs.solve(c)


def stability_limit(g: NoisyGraph, s) -> float:
    """Largest stable Euler step ``2 / lambda_max(D_f^{-1} L_ff)``."""
    gs = ground(g, s)
    if gs.all_leaders:
        return np.inf
    lam = eigvalsh(gs.L_ff, np.diag(gs.D_f))[-1]
    return 2.0 / float(lam)


def lyapunov_residual(g: NoisyGraph, s) -> float:
    """Max-entry residual of the stationary Lyapunov equation at ``X = inv(L_ff)/2``."""
    gs = ground(g, s)
    X = 0.5 * gs.inverse
    dinv = np.diag(1.0 / gs.D_f)
    A = dinv @ gs.L_ff
    return float(np.abs(-A @ X - X @ A.T + dinv).max(initial=0.0))


def lyapunov_solution(g: NoisyGraph, s) -> np.ndarray:
    """Stationary covariance from a generic Lyapunov solver (independent check)."""
    gs = ground(g, s)
    dinv = np.diag(1.0 / gs.D_f)
    return solve_continuous_lyapunov(-dinv @ gs.L_ff, -dinv)


def _noise_map(cfg: DynamicsConfig, gs):
    """Matrix mapping independent unit normals to one step of follower noise."""
    g = cfg.graph
    nf = len(gs.followers)
    if cfg.noise == "aggregated":
        return np.diag(np.sqrt(cfg.dt / gs.D_f))
    # Per-link: follower i sees -D_i^{-1} sum_j eps_ij / nu_ij, eps_ij of intensity nu_ij,
    # independent per directed measurement.
    pos = gs.follower_index
    rows, vals = [], []
    for i, j, nu in g.edges:
        for a in (i, j):
            if a in pos:
                rows.append(pos[a])
                vals.append(-np.sqrt(cfg.dt * nu) / nu / g.strengths[a])
    M = np.zeros((nf, len(rows)))
    M[rows, np.arange(len(rows))] = vals
    return M


def integrate(cfg: DynamicsConfig, *, keep_every: int = 0) -> SimulationSummary:
    """Euler-Maruyama run; statistics use post-burn-in samples of all replicates.

    ``keep_every > 0`` also returns replicate 0's trajectory decimated by that
    factor as an array of shape ``(samples, followers)``.
    """
    g = cfg.graph
    offset_potentials(g, cfg.offsets)
    gs, c = _drive(cfg)
    x_star = -gs.solve(c)
    limit = stability_limit(g, cfg.leaders)
    if not cfg.dt < limit:
        raise UnstableStep(f"dt={cfg.dt} must be below {limit:.6g}")
    nf = len(gs.followers)
    analytic = system_error(g, cfg.leaders)
    if nf == 0:
        return SimulationSummary(0.0, 0.0, {}, {}, {}, {}, analytic, 0.0, 0)

    rng = np.random.default_rng(cfg.seed)
    R = cfg.replicates
    dinv = 1.0 / gs.D_f
    A = np.eye(nf) - cfg.dt * dinv[:, None] * gs.L_ff
    drift = (-cfg.dt * dinv * c)[:, None]
    noise = None if cfg.noise == "none" else _noise_map(cfg, gs)
    x = np.zeros((nf, R)) if cfg.x0 is None else np.repeat(np.asarray(cfg.x0, float)[:, None], R, axis=1)

    steps, burn = cfg.steps, cfg.burn_steps
    s1 = np.zeros((nf, R))
    s2 = np.zeros((nf, R))
    kept = []
    for start in range(0, steps, CHUNK_STEPS):
        m = min(CHUNK_STEPS, steps - start)
        if noise is not None:
            z = rng.standard_normal((m, noise.shape[1], R))
            if cfg.noise == "aggregated":
                kicks = noise.diagonal()[None, :, None] * z
            else:
                kicks = np.einsum("fk,mkr->mfr", noise, z)
        for t in range(m):
            x = A @ x + drift
            if noise is not None:
                x += kicks[t]
            step = start + t + 1
            if step > burn:
                d = x - x_star[:, None]
                s1 += d
                s2 += d * d
                if keep_every and step % keep_every == 0:
                    kept.append(x[:, 0].copy())

    count = steps - burn
    mean_dev = s1 / count
    msq = s2 / count
    per_rep_mse = msq.sum(axis=0)
    mse = float(per_rep_mse.mean())
    mse_se = float(per_rep_mse.std(ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
    var = (msq - mean_dev**2).mean(axis=1)
    node_mse = msq.mean(axis=1)
    mu = mean_dev.mean(axis=1)
    mu_se = mean_dev.std(axis=1, ddof=1) / np.sqrt(R) if R > 1 else np.full(nf, np.nan)
    fol = [int(v) for v in gs.followers]
    gap = abs(mse - analytic.total) / analytic.total if analytic.total > 0 else abs(mse)
    return SimulationSummary(
        empirical_mse=mse,
        mse_stderr=mse_se,
        per_node_variance=dict(zip(fol, map(float, var))),
        per_node_mse=dict(zip(fol, map(float, node_mse))),
        mean_offset=dict(zip(fol, map(float, mu))),
        mean_stderr=dict(zip(fol, map(float, mu_se))),
        analytic=analytic,
        relative_gap=float(gap),
        samples=count * R,
        trajectory=np.array(kept) if keep_every else None,
    )
