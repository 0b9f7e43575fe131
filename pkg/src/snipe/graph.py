"""Directed causal interference graphs.

Nodes are labeled 0..n-1. An edge (j, i) means unit j's treatment can
affect unit i's outcome, so the in-neighborhood N_i collects exactly the
units whose assignment matters for i. Self-loops (i, i) express direct
effects and are expected in most models.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CausalGraph",
    "DependencyIndex",
    "gen_erdos_renyi",
    "in_neighborhood",
    "dependency_index",
    "save_graph",
    "load_graph",
]


class CausalGraph:
    """Immutable directed graph stored as per-node sorted in-neighbor lists.

    Args:
        in_neighbors: one sorted, duplicate-free array of in-neighbor
            indices per node (may include the node itself).
        self_loops: generator intent flag, recorded in the file format;
            derived from the edge set when omitted.
    """

    def __init__(self, in_neighbors: list[np.ndarray], self_loops: bool | None = None):
        self.n = len(in_neighbors)
        nbrs = []
        for i, nb in enumerate(in_neighbors):
            nb = np.asarray(nb, dtype=np.int64)
            if nb.size:
                if nb.min() < 0 or nb.max() >= self.n:
                    raise ValueError(f"neighbor index out of range for node {i}")
                if np.any(np.diff(nb) <= 0):
                    raise ValueError(f"in-neighbor list of node {i} must be sorted and duplicate-free")
            nbrs.append(nb)
        self.in_neighbors = nbrs

        self.nb_off = np.zeros(self.n + 1, dtype=np.int64)
        self.nb_off[1:] = np.cumsum([nb.size for nb in nbrs])
        self.nb_flat = np.concatenate(nbrs) if self.n else np.empty(0, dtype=np.int64)

        self.in_degrees = np.diff(self.nb_off)
        self.out_degrees = np.bincount(self.nb_flat, minlength=self.n)
        self.d_in = int(self.in_degrees.max()) if self.n else 0
        self.d_out = int(self.out_degrees.max()) if self.n else 0
        self.d_max = max(self.d_in, self.d_out)

        self.has_self_loop = np.zeros(self.n, dtype=bool)
        for i, nb in enumerate(nbrs):
            self.has_self_loop[i] = np.searchsorted(nb, i) < nb.size and nb[np.searchsorted(nb, i)] == i
        self.self_loops = bool(self.has_self_loop.all()) if self_loops is None else bool(self_loops)

        # padded neighbor-index matrix for vectorized per-node reductions;
        # the sentinel column index n maps to a zero slot appended by callers
        self.nb_pad = np.full((self.n, max(self.d_in, 1)), self.n, dtype=np.int64)
        for i, nb in enumerate(nbrs):
            self.nb_pad[i, : nb.size] = nb
        self._csr = None

    def in_csr(self):
        """0/1 in-adjacency as a scipy CSR matrix (row i = N_i), cached;
        (in_csr() @ z) counts treated in-neighbors per node."""
        if self._csr is None:
            from scipy.sparse import csr_matrix

            self._csr = csr_matrix(
                (np.ones(self.nb_flat.size), self.nb_flat, self.nb_off), shape=(self.n, self.n)
            )
        return self._csr

    def in_neighborhood(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise IndexError(f"node {i} out of range [0, {self.n})")
        return self.in_neighbors[i]

    def edges(self) -> list[tuple[int, int]]:
        """Edge list [(src, dst), ...] sorted lexicographically."""
        dst = np.repeat(np.arange(self.n), self.in_degrees)
        order = np.lexsort((dst, self.nb_flat))
        return list(zip(self.nb_flat[order].tolist(), dst[order].tolist()))

    def __repr__(self):
        return f"CausalGraph(n={self.n}, d_in={self.d_in}, d_out={self.d_out})"


@dataclass
class DependencyIndex:
    """Per-node list M_i of units sharing at least one in-neighbor with i."""

    members: list[np.ndarray]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.members[i]


def gen_erdos_renyi(n: int, p_edge: float, self_loops: bool = True, seed=0) -> CausalGraph:
    """Directed Erdos-Renyi graph: each ordered pair (j, i), j != i, is an
    edge independently with probability p_edge.

    Self-loops, when enabled, are inserted deterministically so that every
    unit's own treatment can affect its outcome. Deterministic for a fixed
    seed: destination rows are sampled in index order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p_edge <= 1.0:
        raise ValueError("p_edge must be in [0, 1]")
    rng = np.random.default_rng(seed)
    nbrs = []
    for i in range(n):
        u = rng.random(n)
        nb = np.flatnonzero(u < p_edge)
        if self_loops:
            if np.searchsorted(nb, i) >= nb.size or nb[np.searchsorted(nb, i)] != i:
                nb = np.insert(nb, np.searchsorted(nb, i), i)
        else:
            pos = np.searchsorted(nb, i)
            if pos < nb.size and nb[pos] == i:
                nb = np.delete(nb, pos)
        nbrs.append(nb)
    return CausalGraph(nbrs, self_loops=self_loops)


def in_neighborhood(g: CausalGraph, i: int) -> np.ndarray:
    return g.in_neighborhood(i)


def _out_adjacency(g: CausalGraph) -> tuple[np.ndarray, np.ndarray]:
    """CSR-style (flat, offsets) of out-neighbor lists: out(k) = {i: k in N_i}."""
    dst = np.repeat(np.arange(g.n), g.in_degrees)
    order = np.argsort(g.nb_flat, kind="stable")
    out_flat = dst[order]
    out_off = np.zeros(g.n + 1, dtype=np.int64)
    out_off[1:] = np.cumsum(np.bincount(g.nb_flat, minlength=g.n))
    return out_flat, out_off


def dependency_index(g: CausalGraph) -> DependencyIndex:
    """Exact M_i = {i': N_i intersects N_i'} for every node."""
    out_flat, out_off = _out_adjacency(g)
    members = []
    cap = g.d_in * g.d_out
    for i in range(g.n):
        nb = g.in_neighbors[i]
        if nb.size == 0:
            members.append(np.empty(0, dtype=np.int64))
            continue
        parts = [out_flat[out_off[k] : out_off[k + 1]] for k in nb]
        m = np.unique(np.concatenate(parts))
        if m.size > cap:
            raise AssertionError(f"|M_{i}| = {m.size} exceeds d_in*d_out = {cap}")
        members.append(m)
    return DependencyIndex(members)


def save_graph(g: CausalGraph, path) -> None:
    obj = {"n": g.n, "self_loops": g.self_loops, "edges": [list(e) for e in g.edges()]}
    Path(path).write_text(json.dumps(obj))


def load_graph(path) -> CausalGraph:
    obj = json.loads(Path(path).read_text())
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise ValueError("graph file: n must be a positive integer")
    nbrs: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for src, dst in obj["edges"]:
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"graph file: edge ({src}, {dst}) out of range")
        if (src, dst) in seen:
            raise ValueError(f"graph file: duplicate edge ({src}, {dst})")
        seen.add((src, dst))
        nbrs[dst].append(src)
    return CausalGraph(
        [np.array(sorted(nb), dtype=np.int64) for nb in nbrs],
        self_loops=bool(obj.get("self_loops", False)),
    )
