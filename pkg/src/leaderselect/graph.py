"""Noisy communication graphs, weighted Laplacians and leader/follower partitions.

A :class:`NoisyGraph` stores an undirected connected graph on nodes ``0..n-1``
where every link carries a measurement-noise variance ``nu > 0``.  Link weights
are the inverse variances, so the weighted Laplacian has off-diagonal entries
``-1/nu_ij`` and diagonal entries ``D_i = sum_j 1/nu_ij``.

Graph files use a line format::

    # comment
    n 3
    e 0 1 1.0
    e 1 2 0.5

or the JSON object ``{"n": 3, "edges": [[0, 1, 1.0], [1, 2, 0.5]]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    Disconnected,
    DuplicateEdge,
    DuplicateLeader,
    EmptyLeaderSet,
    GraphFormatError,
    NodeOutOfRange,
    NonPositiveVariance,
    SelfLoop,
)

Edge = tuple[int, int, float]

GRAPH_GRAMMAR = """\
graph file grammar (line format):
  file    := line*
  line    := header | edge | comment | blank
  header  := "n" INT                 exactly once; nodes are 0..n-1
  edge    := "e" INT INT FLOAT       endpoints i != j, noise variance nu > 0
  comment := "#" any text to end of line
Each undirected pair appears at most once; the graph must be connected.
A file whose first non-blank character is "{" is read as JSON instead:
  {"n": INT, "edges": [[i, j, nu], ...]}
"""


@dataclass(frozen=True)
class NoisyGraph:
    """Undirected, connected graph with per-link noise variances.

    Build instances with :func:`build_graph`; the constructor assumes its input
    is already canonical (``i < j``, sorted, validated).
    """

    n: int
    edges: tuple[Edge, ...]

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.intp)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.intp)

    @cached_property
    def variances(self) -> np.ndarray:
        return np.array([e[2] for e in self.edges], dtype=float)

    @cached_property
    def weights(self) -> np.ndarray:
        """Inverse variances ``1/nu_ij``, aligned with :attr:`edges`."""
        return 1.0 / self.variances

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.heads, self.tails]), minlength=self.n)

    @cached_property
    def strengths(self) -> np.ndarray:
        """``D_i``: the sum of inverse variances on links incident to ``i``."""
        return np.bincount(
            np.concatenate([self.heads, self.tails]),
            weights=np.concatenate([self.weights, self.weights]),
            minlength=self.n,
        )

    @cached_property
    def total_weight(self) -> float:
        """Sum of ``1/nu`` over undirected edges."""
        return float(self.weights.sum())

    @cached_property
    def _laplacian(self) -> np.ndarray:
        lap = laplacian_from_edges(self.n, self.heads, self.tails, self.weights)
        lap.setflags(write=False)
        return lap

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(i, j): k for k, (i, j, _) in enumerate(self.edges)}

    def scaled(self, factor: float) -> "NoisyGraph":
        """Copy with every variance multiplied by ``factor``."""
        if factor <= 0:
            raise NonPositiveVariance(f"scale factor must be positive, got {factor}")
        return NoisyGraph(self.n, tuple((i, j, nu * factor) for i, j, nu in self.edges))

    def relabeled(self, perm: Sequence[int]) -> "NoisyGraph":
        """Graph with node ``v`` renamed to ``perm[v]``."""
        return build_graph(self.n, [(perm[i], perm[j], nu) for i, j, nu in self.edges])

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [[i, j, nu] for i, j, nu in self.edges]}


def laplacian_from_edges(
    n: int, heads: np.ndarray, tails: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Dense weighted Laplacian from parallel edge arrays (no validation)."""
    lap = np.zeros((n, n))
    np.add.at(lap, (heads, tails), -weights)
    np.add.at(lap, (tails, heads), -weights)
    deg = np.bincount(heads, weights=weights, minlength=n) + np.bincount(
        tails, weights=weights, minlength=n
    )
    lap[np.diag_indices(n)] = deg
    return lap


def count_components(n: int, heads: np.ndarray, tails: np.ndarray) -> tuple[int, np.ndarray]:
    adj = coo_matrix((np.ones(len(heads)), (heads, tails)), shape=(n, n))
    return connected_components(adj, directed=False)


def build_graph(n: int, edges: Iterable[Sequence[float]]) -> NoisyGraph:
    """Validate an edge list and return a canonical :class:`NoisyGraph`.

    Edges are ``(i, j, nu)`` triples.  Raises :class:`SelfLoop`,
    :class:`DuplicateEdge`, :class:`NonPositiveVariance`,
    :class:`NodeOutOfRange` or :class:`Disconnected`.
    """
    n = int(n)
    if n < 1:
        raise GraphFormatError(f"node count must be positive, got {n}")
    seen: dict[tuple[int, int], float] = {}
    for raw in edges:
        if len(raw) != 3:
            raise GraphFormatError(f"edge must be (i, j, nu), got {raw!r}")
        i, j, nu = int(raw[0]), int(raw[1]), float(raw[2])
        if not (0 <= i < n and 0 <= j < n):
            raise NodeOutOfRange(f"edge ({i}, {j}) outside 0..{n - 1}")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        if not nu > 0 or not np.isfinite(nu):
            raise NonPositiveVariance(f"edge ({i}, {j}) has variance {nu}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {key}")
        seen[key] = nu
    canon = tuple((i, j, nu) for (i, j), nu in sorted(seen.items()))
    g = NoisyGraph(n, canon)
    if n > 1:
        ncomp, _ = count_components(n, g.heads, g.tails)
        if ncomp != 1:
            raise Disconnected(f"graph has {ncomp} connected components")
    return g


@dataclass(frozen=True)
class LeaderSet:
    """Ordered collection of distinct leader ids; order records pick order."""

    members: tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if len(set(members)) != len(members):
            raise DuplicateLeader(f"leader ids must be distinct: {members}")
        object.__setattr__(self, "members", members)

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v) -> bool:
        return int(v) in self.members

    def add(self, v: int) -> "LeaderSet":
        return LeaderSet(self.members + (int(v),))

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.members)] = True
        return m

    def validate(self, n: int) -> None:
        for m in self.members:
            if not 0 <= m < n:
                raise NodeOutOfRange(f"leader {m} outside 0..{n - 1}")


def as_leaders(s) -> LeaderSet:
    return s if isinstance(s, LeaderSet) else LeaderSet(tuple(s))


def laplacian(g: NoisyGraph) -> np.ndarray:
    """Weighted Laplacian of ``g`` as a read-only dense array."""
    return g._laplacian


@dataclass(frozen=True, eq=False)
class GroundedSystem:
    """Follower/leader partition of the Laplacian for a fixed leader set.

    Followers are indexed in increasing node-id order; leader columns of
    ``L_fl`` follow the order of ``leaders``.  ``L_ff`` is factorized once by
    Cholesky at construction.
    """

    graph: NoisyGraph
    leaders: LeaderSet
    followers: np.ndarray
    L_ff: np.ndarray
    L_fl: np.ndarray
    L_ll: np.ndarray
    D_f: np.ndarray
    _chol: tuple | None = field(default=None, repr=False)

    @property
    def num_followers(self) -> int:
        return len(self.followers)

    @property
    def all_leaders(self) -> bool:
        """True when every node is a leader (``L_ff`` is 0x0)."""
        return self.num_followers == 0

    @cached_property
    def follower_index(self) -> dict[int, int]:
        return {int(v): r for r, v in enumerate(self.followers)}

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``L_ff x = rhs`` using the cached factorization."""
        if self.all_leaders:
            return np.zeros_like(np.asarray(rhs, dtype=float))
        return scipy.linalg.cho_solve(self._chol, rhs)

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = self.solve(np.eye(self.num_followers))
        return 0.5 * (inv + inv.T)

    @cached_property
    def inverse_diagonal(self) -> np.ndarray:
        return np.diag(self.inverse).copy()

    def reassemble(self) -> np.ndarray:
        """Full Laplacian rebuilt from the blocks, in original node order."""
        n = self.graph.n
        lead = np.array(self.leaders.members, dtype=np.intp)
        out = np.zeros((n, n))
        out[np.ix_(self.followers, self.followers)] = self.L_ff
        out[np.ix_(self.followers, lead)] = self.L_fl
        out[np.ix_(lead, self.followers)] = self.L_fl.T
        out[np.ix_(lead, lead)] = self.L_ll
        return out


def ground(g: NoisyGraph, s) -> GroundedSystem:
    """Partition ``laplacian(g)`` by the leader set ``s``.

    Raises :class:`EmptyLeaderSet` for an empty set.  ``s`` equal to all nodes
    is allowed; the result then has a 0x0 follower block (see
    :attr:`GroundedSystem.all_leaders`).
    """
    s = as_leaders(s)
    if len(s) == 0:
        raise EmptyLeaderSet("at least one leader is required")
    s.validate(g.n)
    lap = laplacian(g)
    lead = np.array(s.members, dtype=np.intp)
    followers = np.flatnonzero(~s.mask(g.n))
    L_ff = lap[np.ix_(followers, followers)].copy()
    chol = scipy.linalg.cho_factor(L_ff, lower=True) if len(followers) else None
    return GroundedSystem(
        graph=g,
        leaders=s,
        followers=followers,
        L_ff=L_ff,
        L_fl=lap[np.ix_(followers, lead)].copy(),
        L_ll=lap[np.ix_(lead, lead)].copy(),
        D_f=g.strengths[followers].copy(),
        _chol=chol,
    )


# -- file formats ---------------------------------------------------------------

def parse_graph(text: str) -> NoisyGraph:
    """Parse either the line format or the JSON format."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
            return build_graph(obj["n"], obj["edges"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GraphFormatError(f"bad JSON graph: {exc}") from exc
    n = None
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "n" and len(parts) == 2:
                if n is not None:
                    raise GraphFormatError(f"line {lineno}: repeated header")
                n = int(parts[1])
            elif parts[0] == "e" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise GraphFormatError(f"line {lineno}: cannot parse {line!r}")
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from exc
    if n is None:
        raise GraphFormatError("missing 'n <count>' header")
    return build_graph(n, edges)


def read_graph(path) -> NoisyGraph:
    return parse_graph(Path(path).read_text())


def format_graph(g: NoisyGraph) -> str:
    lines = [f"n {g.n}"]
    lines += [f"e {i} {j} {nu!r}" for i, j, nu in g.edges]
    return "\n".join(lines) + "\n"


def write_graph(g: NoisyGraph, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(g.to_dict()) + "\n")
    else:
        path.write_text(format_graph(g))


# -- small constructors used throughout tests and examples ----------------------

def path_graph(n: int, nu: float = 1.0) -> NoisyGraph:
    return build_graph(n, [(i, i + 1, nu) for i in range(n - 1)])


def cycle_graph(n: int, nu: float = 1.0) -> NoisyGraph:
    return build_graph(n, [(i, (i + 1) % n, nu) for i in range(n)])


def star_graph(leaves: int, nu: float = 1.0) -> NoisyGraph:
    return build_graph(leaves + 1, [(0, i, nu) for i in range(1, leaves + 1)])


def complete_graph(n: int, nu: float = 1.0) -> NoisyGraph:
    return build_graph(n, [(i, j, nu) for i in range(n) for j in range(i + 1, n)])


def random_connected_graph(
    n: int, rng: np.random.Generator, edge_prob: float = 0.4, nu_range=(0.5, 2.0)
) -> NoisyGraph:
    """Random spanning tree plus independent extra edges, random variances."""
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        parent = order[rng.integers(k)]
        a, b = int(order[k]), int(parent)
        pairs.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < edge_prob:
                pairs.add((i, j))
    lo, hi = nu_range
    return build_graph(n, [(i, j, float(rng.uniform(lo, hi))) for i, j in sorted(pairs)])
