"""Graph combinatorics of time-ordered products.

A graph has ``n`` vertices and a symmetric multiplicity table ``l[i][j]`` with
no self-loops.  The expansion of an ``n``-fold product over graphs assigns
each edge one contraction kernel and divides by the number of line
permutations ``prod l_ij!``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .functional import FormalSeries, PolyFunctional, assemble


@dataclass(frozen=True, order=True)
class Graph:
    """Vertex count and edge multiplicities keyed by ordered pairs ``i < j``."""

    n: int
    edges: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a graph needs at least one vertex")
        clean = {}
        for (i, j), k in self.edges:
            if i == j:
                raise ValueError("self-loops are excluded")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError("edge endpoint out of range")
            if k < 0:
                raise ValueError("edge multiplicity must be non-negative")
            a, b = min(i, j), max(i, j)
            if k:
                clean[(a, b)] = clean.get((a, b), 0) + k
        object.__setattr__(self, "edges", tuple(sorted(clean.items())))

    @classmethod
    def from_multiplicities(cls, n: int, table: dict):
        return cls(n, tuple(table.items()))

    @property
    def multiplicity(self) -> dict:
        return dict(self.edges)

    @property
    def edge_count(self) -> int:
        return sum(k for _, k in self.edges)

    def degree(self, v: int) -> int:
        return sum(k for (i, j), k in self.edges if v in (i, j))

    def relabel(self, perm) -> "Graph":
        return Graph(self.n, tuple(((perm[i], perm[j]), k) for (i, j), k in self.edges))

    def disjoint_union(self, other: "Graph") -> "Graph":
        shifted = tuple(((i + self.n, j + self.n), k) for (i, j), k in other.edges)
        return Graph(self.n + other.n, self.edges + shifted)

    def adjacency(self) -> dict:
        adj = {v: {} for v in range(self.n)}
        for (i, j), k in self.edges:
            adj[i][j] = k
            adj[j][i] = k
        return adj


def enumerate_graphs(n: int, max_total_edges: int) -> list[Graph]:
    """All loop-free multigraphs on ``n`` labelled vertices with at most ``cap`` edges."""
    if n < 1 or max_total_edges < 0:
        raise ValueError("need n >= 1 and a non-negative edge cap")
    pairs = list(itertools.combinations(range(n), 2))
    out = []

    def walk(i, left, chosen):
        if i == len(pairs):
            out.append(Graph(n, tuple(chosen)))
            return
        for k in range(left + 1):
            walk(i + 1, left - k, chosen + [(pairs[i], k)] if k else chosen)

    walk(0, max_total_edges, [])
    return sorted(out, key=lambda g: (g.edge_count, g.edges))


def symmetry_factor(g: Graph) -> int:
    return math.prod(math.factorial(k) for _, k in g.edges)


def divergence_degree(g: Graph, d: int) -> int:
    """``(d - 2)|E| - d(|V| - 1)``."""
    if d < 1:
        raise ValueError("dimension must be positive")
    return (d - 2) * g.edge_count - d * (g.n - 1)


# ---------------------------------------------------------------------------
# classification


class GraphClass(str, Enum):
    DISCONNECTED = "disconnected"
    ONE_PARTICLE_REDUCIBLE = "connected-1PR"
    VERTEX_REDUCIBLE = "1PI-one-vertex-reducible"
    NONPRIMITIVE = "EG-irreducible-nonprimitive"
    PRIMITIVE = "EG-primitive"


def _components(n: int, adj: dict, vertices=None) -> list[set]:
    vertices = set(range(n)) if vertices is None else set(vertices)
    seen, comps = set(), []
    for s in sorted(vertices):
        if s in seen:
            continue
        comp, stack = set(), [s]
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(u for u in adj[v] if u in vertices and u not in comp)
        seen |= comp
        comps.append(comp)
    return comps


def is_connected(g: Graph) -> bool:
    return len(_components(g.n, g.adjacency())) == 1


def bridges(g: Graph) -> list[tuple]:
    """Edges whose removal disconnects; a multi-edge is never a bridge."""
    adj = g.adjacency()
    disc, low, out = {}, {}, []
    counter = itertools.count()

    def dfs(v, parent):
        disc[v] = low[v] = next(counter)
        for u, k in adj[v].items():
            if u not in disc:
                dfs(u, v)
                low[v] = min(low[v], low[u])
                if low[u] > disc[v] and k == 1:
                    out.append((min(u, v), max(u, v)))
            elif u != parent or k > 1:
                low[v] = min(low[v], disc[u])

    for v in range(g.n):
        if v not in disc:
            dfs(v, None)
    return sorted(out)


def articulation_vertices(g: Graph) -> list[int]:
    adj = g.adjacency()
    disc, low, cut = {}, {}, set()
    counter = itertools.count()

    def dfs(v, parent):
        disc[v] = low[v] = next(counter)
        children = 0
        for u in adj[v]:
            if u not in disc:
                children += 1
                dfs(u, v)
                low[v] = min(low[v], low[u])
                if parent is not None and low[u] >= disc[v]:
                    cut.add(v)
            elif u != parent:
                low[v] = min(low[v], disc[u])
        if parent is None and children > 1:
            cut.add(v)

    for v in range(g.n):
        if v not in disc:
            dfs(v, None)
    return sorted(cut)


def is_irreducible(g: Graph) -> bool:
    """Connected on at least two vertices with no cut vertex."""
    return g.n >= 2 and is_connected(g) and not articulation_vertices(g)


def is_primitive(g: Graph) -> bool:
    """Irreducible, and no proper vertex subset of size >= 2 spans an irreducible subgraph.

    An edge subset is irreducible only if the induced subgraph on its
    vertices is, so scanning induced subgraphs covers every edge subset.
    """
    if not is_irreducible(g):
        return False
    full = g.multiplicity
    for size in range(2, g.n):
        for verts in itertools.combinations(range(g.n), size):
            index = {v: i for i, v in enumerate(verts)}
            sub = Graph(size, tuple(((index[i], index[j]), k) for (i, j), k in full.items()
                                    if i in index and j in index))
            if is_irreducible(sub):
                return False
    return True


def classify(g: Graph) -> GraphClass:
    if not is_connected(g):
        return GraphClass.DISCONNECTED
    if bridges(g):
        return GraphClass.ONE_PARTICLE_REDUCIBLE
    if articulation_vertices(g):
        return GraphClass.VERTEX_REDUCIBLE
    if is_primitive(g):
        return GraphClass.PRIMITIVE
    return GraphClass.NONPRIMITIVE


# ---------------------------------------------------------------------------
# expansion of n-fold products


def _count_matrices(rows: int, cols: int, total: int):
    """Non-negative integer ``rows x cols`` matrices with entry sum ``total``."""
    cells = rows * cols
    for bars in itertools.combinations(range(total + cells - 1), cells - 1):
        prev, counts = -1, []
        for b in bars + (total + cells - 1,):
            counts.append(b - prev - 1)
            prev = b
        yield counts


def graph_term(g: Graph, functionals, kernel) -> PolyFunctional:
    """``(1/Sym) <prod_edges P, delta_G (F_1 x ... x F_n)>`` for one graph.

    The lines of edge ``(i, j)`` are spread over the vertex terms of ``F_i``
    and ``F_j`` by count matrices ``c``; each spread carries
    ``prod 1/c_ab!`` and every term vertex the leg factor ``n!/(n-k)!``.
    """
    if len(functionals) != g.n:
        raise ValueError("one functional per graph vertex is required")
    spec = functionals[0].spec
    kernel = np.asarray(kernel)
    out = PolyFunctional(spec)
    need = [g.degree(v) for v in range(g.n)]
    for combo in itertools.product(*(F.terms.items() for F in functionals)):
        if any(sum(m) < k for (m, _), k in zip(combo, need)):
            continue
        blocks = list(combo)
        options = []
        for (i, j), l in g.edges:
            ri, rj = len(blocks[i][0]), len(blocks[j][0])
            options.append([((i, j), c) for c in _count_matrices(ri, rj, l)])
        for choice in itertools.product(*options):
            used = [[0] * len(m) for m, _ in blocks]
            weight = 1.0
            lines = []
            for (i, j), counts in choice:
                rj = len(blocks[j][0])
                for idx, cnt in enumerate(counts):
                    if not cnt:
                        continue
                    a, b = divmod(idx, rj)
                    used[i][a] += cnt
                    used[j][b] += cnt
                    weight /= math.factorial(cnt)
                    lines.append(((i, a), (j, b), cnt))
            if any(u > m for (mult, _), us in zip(blocks, used) for u, m in zip(us, mult)):
                continue
            for (mult, _), us in zip(blocks, used):
                for m, u in zip(mult, us):
                    weight *= math.factorial(m) // math.factorial(m - u)
            mult, coeff = assemble(spec, blocks, lines, kernel)
            out._accumulate(mult, weight * coeff)
    return out


def graph_expansion(functionals, kernel, caps=None) -> FormalSeries:
    """Sum of graph terms, graded by edge count (one hbar per line).

    Equals ``m_n exp(sum_{i<j} D_ij)`` applied to ``F_1 x ... x F_n``.
    """
    functionals = list(functionals)
    if not functionals:
        raise ValueError("need at least one functional")
    bound = sum(F.degree for F in functionals) // 2
    if caps is None:
        caps = (bound, 0)
    if caps[0] < 0:
        raise ValueError("hbar cap must be non-negative")
    out = FormalSeries(None, caps)
    for g in enumerate_graphs(len(functionals), min(bound, caps[0])):
        term = graph_term(g, functionals, kernel)
        if not term.is_zero():
            out._put((g.edge_count, 0), term)
    return out
