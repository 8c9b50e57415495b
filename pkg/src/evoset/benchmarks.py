"""Generators for the example and counterexample chains.

Graph walks are built as "hold with probability 1/2, otherwise move along a
uniformly chosen incident edge", which makes them reversible with pi
proportional to degree.  Every generator is a pure function of its
parameters and seed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .chain import ChainKernel, build_chain
from .errors import BadDegree, Disconnected, NoGiantComponent, TooLarge

LAMPLIGHTER_MAX = 12
HYPERCUBE_MAX = 20
EXPANDERS_MAX = 4096


@dataclass
class Benchmark:
    """A generated chain, an optional canonical set family, and metadata."""

    chain: ChainKernel
    family: list[list[int]] | None = None
    meta: dict = field(default_factory=dict)


def _lazy_graph_walk(n: int, edges) -> ChainKernel:
    """Lazy walk on an undirected multigraph given as (u, v) pairs; loops add holding."""
    rows, cols = [], []
    for u, v in edges:
        rows += [u, v]
        cols += [v, u]
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    deg = np.asarray(A.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise Disconnected("isolated vertex")
    ncomp, _ = connected_components(A, directed=False)
    if ncomp > 1:
        raise Disconnected(f"graph has {ncomp} components")
    P = 0.5 * sp.identity(n, format="csr") + 0.5 * sp.diags(1.0 / deg) @ A
    pi = deg / deg.sum()
    return build_chain(sp.csr_matrix(P), pi=pi)


def cycle(n: int, laziness: float = 0.5) -> ChainKernel:
    """Walk on the n-cycle holding with probability ``laziness``."""
    P = np.zeros((n, n))
    for x in range(n):
        P[x, x] += laziness
        P[x, (x + 1) % n] += (1 - laziness) / 2
        P[x, (x - 1) % n] += (1 - laziness) / 2
    return build_chain(P, pi=np.full(n, 1.0 / n))


def c2() -> ChainKernel:
    return build_chain([[0.5, 0.5], [0.5, 0.5]], pi=[0.5, 0.5])


def c3() -> ChainKernel:
    return cycle(3)


def _grid_edges(side: int, alive: np.ndarray):
    for i in range(side):
        for j in range(side):
            c = i * side + j
            if not alive[c]:
                continue
            if j + 1 < side and alive[c + 1]:
                yield c, c + 1
            if i + 1 < side and alive[c + side]:
                yield c, c + side


def _relabel(side, keep, edges):
    ids = -np.ones(side * side, dtype=int)
    ids[keep] = np.arange(len(keep))
    return [(ids[u], ids[v]) for u, v in edges], ids


def lazy_box(side: int, holes=()) -> Benchmark:
    """Lazy walk on the side x side grid with the given cells removed.

    Cells are (row, col) pairs or flat ids row*side+col.  The family holds the
    left rectangles {columns 0..k}, k = 0..side-2.
    """
    if side < 2:
        raise ValueError("side must be at least 2")
    alive = np.ones(side * side, dtype=bool)
    for h in holes:
        c = h[0] * side + h[1] if isinstance(h, (tuple, list)) else int(h)
        alive[c] = False
    keep = np.flatnonzero(alive)
    if keep.size < 2:
        raise Disconnected("fewer than two cells remain")
    edges, ids = _relabel(side, keep, _grid_edges(side, alive))
    chain = _lazy_graph_walk(len(keep), edges)
    family = []
    for k in range(side - 1):
        S = [int(ids[i * side + j]) for i in range(side) for j in range(k + 1) if alive[i * side + j]]
        if 0 < len(S) < len(keep):
            family.append(S)
    return Benchmark(chain, family, {"name": "box", "side": side, "holes": int((~alive).sum()),
                                     "cells": keep.tolist()})


def random_holes(side: int, fraction: float, seed: int) -> list[int]:
    """Remove ~fraction of cells in random order, skipping any that disconnect the grid."""
    rng = np.random.default_rng(seed)
    target = int(round(fraction * side * side))
    alive = np.ones(side * side, dtype=bool)
    removed = []
    for c in rng.permutation(side * side):
        if len(removed) >= target:
            break
        alive[c] = False
        keep = np.flatnonzero(alive)
        edges, _ = _relabel(side, keep, _grid_edges(side, alive))
        r = [u for u, v in edges] + [v for u, v in edges]
        s = [v for u, v in edges] + [u for u, v in edges]
        A = sp.csr_matrix((np.ones(len(r)), (r, s)), shape=(len(keep), len(keep)))
        if connected_components(A, directed=False)[0] == 1:
            removed.append(int(c))
        else:
            alive[c] = True
    return sorted(removed)


def percolation_box(side: int, p_keep: float, seed: int) -> Benchmark:
    """Lazy walk on the largest cluster of bond percolation on the grid."""
    if not 0.5 < p_keep <= 1:
        raise ValueError("p_keep must lie in (1/2, 1]")
    rng = np.random.default_rng(seed)
    alive = np.ones(side * side, dtype=bool)
    all_edges = list(_grid_edges(side, alive))
    kept = [e for e, r in zip(all_edges, rng.random(len(all_edges))) if r < p_keep]
    n = side * side
    r = [u for u, v in kept] + [v for u, v in kept]
    s = [v for u, v in kept] + [u for u, v in kept]
    A = sp.csr_matrix((np.ones(len(r)), (r, s)), shape=(n, n))
    _, labels = connected_components(A, directed=False)
    sizes = np.bincount(labels)
    # ties go to the component containing the smallest cell id
    best = max(range(sizes.size), key=lambda c: (sizes[c], -np.flatnonzero(labels == c)[0]))
    if sizes[best] < 2:
        raise NoGiantComponent("largest cluster has fewer than two vertices")
    keep = np.flatnonzero(labels == best)
    cell_alive = np.zeros(n, dtype=bool)
    cell_alive[keep] = True
    ids = -np.ones(n, dtype=int)
    ids[keep] = np.arange(keep.size)
    edges = [(ids[u], ids[v]) for u, v in kept if cell_alive[u] and cell_alive[v]]
    chain = _lazy_graph_walk(keep.size, edges)
    return Benchmark(chain, None, {"name": "percolation", "side": side, "p_keep": p_keep,
                                   "seed": seed, "component": int(keep.size), "cells": keep.tolist()})


def lamplighter_cycle(lamps: int) -> Benchmark:
    """Lazy lamplighter walk on the n-cycle.

    State index = config * n + position.  With probability 1/2 hold; else
    toggle the current lamp, step left or step right, each with
    probability 1/3.
    """
    n = lamps
    if n < 3:
        raise ValueError("need at least three lamps")
    if n > LAMPLIGHTER_MAX:
        raise TooLarge(f"lamplighter limited to {LAMPLIGHTER_MAX} lamps")
    N = n << n
    idx = np.arange(N)
    conf, pos = idx // n, idx % n
    rows = np.concatenate([idx, idx, idx, idx])
    cols = np.concatenate([
        idx,
        (conf ^ (1 << pos)) * n + pos,
        conf * n + (pos + 1) % n,
        conf * n + (pos - 1) % n,
    ])
    vals = np.concatenate([np.full(N, 0.5), np.full(3 * N, 1.0 / 6.0)])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    chain = build_chain(P, pi=np.full(N, 1.0 / N))
    return Benchmark(chain, None, {"name": "lamplighter", "lamps": n,
                                   "active_step": "uniform over {toggle, left, right}"})


def hamming_order(dim: int) -> list[int]:
    """Vertices by Hamming weight, lexicographic (by coordinate set) within each sphere."""
    order = []
    for r in range(dim + 1):
        for coords in itertools.combinations(range(dim), r):
            order.append(sum(1 << c for c in coords))
    return order


def hypercube(dim: int) -> Benchmark:
    """Lazy walk on {0,1}^dim: hold 1/2, else flip a uniform coordinate.

    Family: Hamming balls about 0 of radius 0..dim-1, plus every prefix of the
    lexicographic fill of the next sphere up to mass 1/2.
    """
    if not 2 <= dim <= HYPERCUBE_MAX:
        if dim > HYPERCUBE_MAX:
            raise TooLarge(f"hypercube limited to dimension {HYPERCUBE_MAX}")
        raise ValueError("dimension must be at least 2")
    N = 1 << dim
    idx = np.arange(N)
    rows = np.concatenate([idx] + [idx] * dim)
    cols = np.concatenate([idx] + [idx ^ (1 << c) for c in range(dim)])
    vals = np.concatenate([np.full(N, 0.5), np.full(dim * N, 0.5 / dim)])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    chain = build_chain(P, pi=np.full(N, 1.0 / N))
    order = hamming_order(dim)
    ball_ends = np.cumsum([len(list(itertools.combinations(range(dim), r))) for r in range(dim)])
    sizes = sorted(set(range(1, N // 2 + 1)) | set(int(b) for b in ball_ends))
    family = [order[:k] for k in sizes if k < N]
    return Benchmark(chain, family, {"name": "hypercube", "dim": dim})


def clique(n: int) -> ChainKernel:
    """Hold 1/2, else jump to a uniform other vertex."""
    if n < 2:
        raise ValueError("clique needs n >= 2")
    P = np.full((n, n), 0.5 / (n - 1))
    np.fill_diagonal(P, 0.5)
    return build_chain(P, pi=np.full(n, 1.0 / n))


def _configuration_model(n: int, degree: int, rng: np.random.Generator, tries: int = 1000):
    for _ in range(tries):
        stubs = rng.permutation(np.repeat(np.arange(n), degree))
        pairs = stubs.reshape(-1, 2)
        r = np.concatenate([pairs[:, 0], pairs[:, 1]])
        s = np.concatenate([pairs[:, 1], pairs[:, 0]])
        A = sp.csr_matrix((np.ones(r.size), (r, s)), shape=(n, n))
        A.setdiag(0)
        A.eliminate_zeros()
        if connected_components(A, directed=False)[0] == 1:
            return [tuple(map(int, p)) for p in pairs]
    raise Disconnected("configuration model kept producing disconnected graphs")


def two_expanders(n1: int, n2: int, degree: int, seed: int) -> Benchmark:
    """Two random regular multigraphs joined by one edge between their vertex 0s.

    Self-pairings become holding mass; the walk is lazified with 1/2.
    """
    if degree < 3:
        raise BadDegree("degree must be at least 3")
    if n1 < degree + 1 or n2 < degree + 1 or (n1 * degree) % 2 or (n2 * degree) % 2:
        raise BadDegree("need n >= degree + 1 and n * degree even on both sides")
    if n1 + n2 > EXPANDERS_MAX:
        raise TooLarge(f"expanders limited to {EXPANDERS_MAX} vertices in total")
    rng = np.random.default_rng(seed)
    left = _configuration_model(n1, degree, rng)
    right = [(u + n1, v + n1) for u, v in _configuration_model(n2, degree, rng)]
    edges = left + right + [(0, n1)]
    chain = _lazy_graph_walk(n1 + n2, edges)
    return Benchmark(chain, [list(range(n1))], {"name": "two_expanders", "n1": n1, "n2": n2,
                                                "degree": degree, "seed": seed, "bridge": (0, n1)})


def random_chain(n: int, seed: int, reversible: bool = False, laziness: float = 0.0,
                 density: float = 0.6) -> ChainKernel:
    """Random irreducible chain for property tests.

    A directed (or symmetric, when reversible) random weight pattern is laid
    over a Hamiltonian cycle so the support is strongly connected; the result
    is lazified with ``laziness``.
    """
    rng = np.random.default_rng(seed)
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    perm = rng.permutation(n)
    for a, b in zip(perm, np.roll(perm, -1)):
        W[a, b] += 0.1 + rng.random()
    if reversible:
        W = W + W.T
    P = W / W.sum(axis=1, keepdims=True)
    P = (1 - laziness) * P + laziness * np.eye(n)
    return build_chain(P)


# name -> factory for the CLI and comparison tables
def make(name: str, **params) -> Benchmark:
    name = name.lower()
    if name == "c2":
        return Benchmark(c2(), None, {"name": "C2"})
    if name == "c3":
        return Benchmark(c3(), None, {"name": "C3"})
    if name == "cycle":
        return Benchmark(cycle(int(params["n"]), float(params.get("laziness", 0.5))), None,
                         {"name": "cycle", **params})
    if name == "box":
        holes = params.get("holes", ())
        if "hole_fraction" in params:
            holes = random_holes(int(params["side"]), float(params["hole_fraction"]),
                                 int(params["seed"]))
        return lazy_box(int(params["side"]), holes)
    if name == "percolation":
        return percolation_box(int(params["side"]), float(params["p_keep"]), int(params["seed"]))
    if name == "lamplighter":
        return lamplighter_cycle(int(params["lamps"]))
    if name == "hypercube":
        return hypercube(int(params["dim"]))
    if name == "clique":
        return Benchmark(clique(int(params["n"])), None, {"name": "clique", "n": int(params["n"])})
    if name in ("expanders", "two_expanders"):
        return two_expanders(int(params["n1"]), int(params["n2"]), int(params["degree"]),
                             int(params["seed"]))
    if name == "random":
        return Benchmark(random_chain(int(params["n"]), int(params["seed"]),
                                      bool(int(params.get("reversible", 0))),
                                      float(params.get("laziness", 0.0))), None,
                         {"name": "random", **params})
    raise ValueError(f"unknown benchmark {name!r}")


_SHORT = {"box": ("box", "side"), "hypercube": ("hypercube", "dim"), "clique": ("clique", "n"),
          "lamplighter": ("lamplighter", "lamps"), "cycle": ("cycle", "n")}


def parse_benchmark(text: str, **extra) -> Benchmark:
    """Build from ``C2``, ``box4``, ``hypercube3`` or ``name:key=val,...``.

    Keyword arguments are merged into the parsed parameters.
    """
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        params[k.strip()] = v.strip()
    params.update(extra)
    if not params:
        for prefix, (full, key) in _SHORT.items():
            if name.lower().startswith(prefix) and name[len(prefix):].isdigit():
                return make(full, **{key: name[len(prefix):]})
    return make(name, **params)
