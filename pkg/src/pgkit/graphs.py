"""Depth-graded bipartite multigraphs with a basepoint.

A graph is stored as a list of depth sizes (depth 0 is the basepoint, size
1) together with one multiplicity matrix per consecutive pair of depths.
Vertices are addressed as (depth, index) pairs.  Optional dual data is a
permutation (an involution) of the vertices at each even depth.

All values are immutable after construction and all operations are pure
functions, so everything here is safe to share across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

from .errors import DomainError, ResourceError, ValidationError

_CANON_DEPTH_LIMIT = 8  # per-depth vertex cap for brute-force canonicalization


def _as_matrix(rows):
    return tuple(tuple(int(x) for x in row) for row in rows)


@dataclass(frozen=True)
class BipartiteGraph:
    """Immutable depth-graded multigraph with basepoint at depth 0."""

    depth_sizes: tuple
    adjacency: tuple  # adjacency[d] has shape depth_sizes[d] x depth_sizes[d+1]
    duals: tuple | None = None  # one involution per even depth, or None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.depth_sizes)
        object.__setattr__(self, "depth_sizes", sizes)
        object.__setattr__(self, "adjacency", tuple(_as_matrix(m) for m in self.adjacency))
        if not sizes or sizes[0] != 1:
            raise ValidationError("depth 0 must hold exactly the basepoint")
        if any(s <= 0 for s in sizes):
            raise ValidationError("depth sizes must be positive")
        if len(self.adjacency) != len(sizes) - 1:
            raise ValidationError("need one adjacency matrix per consecutive depth pair")
        for d, mat in enumerate(self.adjacency):
            if len(mat) != sizes[d] or any(len(row) != sizes[d + 1] for row in mat):
                raise ValidationError(f"adjacency[{d}] shape mismatch")
            if any(x < 0 for row in mat for x in row):
                raise ValidationError("multiplicities must be nonnegative")
            for j in range(sizes[d + 1]):
                if sum(mat[i][j] for i in range(sizes[d])) == 0:
                    raise ValidationError(
                        f"vertex ({d + 1},{j}) has no edge to depth {d}: graph not graded"
                    )
        if self.duals is not None:
            duals = tuple(tuple(int(x) for x in p) for p in self.duals)
            object.__setattr__(self, "duals", duals)
            evens = [d for d in range(len(sizes)) if d % 2 == 0]
            if len(duals) != len(evens):
                raise ValidationError("need one dual involution per even depth")
            for blk, d in zip(duals, evens):
                n = sizes[d]
                if sorted(blk) != list(range(n)):
                    raise ValidationError(f"dual data at depth {d} is not a permutation")
                if any(blk[blk[i]] != i for i in range(n)):
                    raise ValidationError(f"dual data at depth {d} is not an involution")

    # -- basic accessors -------------------------------------------------

    @property
    def max_depth(self):
        return len(self.depth_sizes) - 1

    def num_vertices(self):
        return sum(self.depth_sizes)

    def num_edges(self):
        return sum(x for mat in self.adjacency for row in mat for x in row)

    def vertices(self):
        for d, s in enumerate(self.depth_sizes):
            for i in range(s):
                yield (d, i)

    def vertex_offset(self, depth, index):
        """Flat index of vertex (depth, index) in depth-major order."""
        return sum(self.depth_sizes[:depth]) + index

    def full_adjacency(self):
        """Symmetric multiplicity matrix over all vertices (list of lists)."""
        n = self.num_vertices()
        a = [[0] * n for _ in range(n)]
        for d, mat in enumerate(self.adjacency):
            for i, row in enumerate(mat):
                u = self.vertex_offset(d, i)
                for j, m in enumerate(row):
                    if m:
                        v = self.vertex_offset(d + 1, j)
                        a[u][v] = m
                        a[v][u] = m
        return a

    def simple_degree(self, depth, index):
        """Number of distinct neighbours (multiplicities ignored)."""
        deg = 0
        if depth > 0:
            deg += sum(1 for i in range(self.depth_sizes[depth - 1]) if self.adjacency[depth - 1][i][index])
        if depth < self.max_depth:
            deg += sum(1 for j in range(self.depth_sizes[depth + 1]) if self.adjacency[depth][index][j])
        return deg

    def degree(self, depth, index):
        """Degree counting multiplicities."""
        deg = 0
        if depth > 0:
            deg += sum(self.adjacency[depth - 1][i][index] for i in range(self.depth_sizes[depth - 1]))
        if depth < self.max_depth:
            deg += sum(self.adjacency[depth][index])
        return deg

    def without_duals(self):
        return BipartiteGraph(self.depth_sizes, self.adjacency) if self.duals is not None else self

    def __repr__(self):
        from .codec import serialize  # local import avoids a cycle

        try:
            return f"BipartiteGraph({serialize(self)!r})"
        except Exception:
            return f"BipartiteGraph(depths={self.depth_sizes})"


@dataclass(frozen=True)
class GraphPair:
    """A principal/dual principal graph pair sharing the basepoint convention."""

    principal: BipartiteGraph
    dual: BipartiteGraph

    def odd_depth_counts_match(self):
        """Diagnostic only: equal odd-depth vertex counts on both graphs."""
        top = max(self.principal.max_depth, self.dual.max_depth)
        for d in range(1, top + 1, 2):
            a = self.principal.depth_sizes[d] if d <= self.principal.max_depth else 0
            b = self.dual.depth_sizes[d] if d <= self.dual.max_depth else 0
            if a != b:
                return False
        return True


# -- constructors --------------------------------------------------------


def a_chain(m):
    """A_m: the path with m vertices (m-1 edges) starting at the basepoint."""
    if m < 1:
        raise DomainError("A_m needs m >= 1")
    return BipartiteGraph((1,) * m, tuple(((1,),) for _ in range(m - 1)))


# -- core operations ------------------------------------------------------


def truncate(g: BipartiteGraph, k: int) -> BipartiteGraph:
    """All vertices of depth <= k and the edges connecting them."""
    if k < 0 or k > g.max_depth:
        raise DomainError(f"truncation depth {k} outside [0, {g.max_depth}]")
    duals = None
    if g.duals is not None:
        duals = g.duals[: k // 2 + 1]
    return BipartiteGraph(g.depth_sizes[: k + 1], g.adjacency[:k], duals)


def loop_count(g: BipartiteGraph, n: int) -> int:
    """Closed walks of length 2n based at the basepoint, multiplicities counted.

    Equals the (star, star) entry of the 2n-th power of the full adjacency
    matrix, computed here with exact integer arithmetic.
    """
    if n < 0:
        raise DomainError("half-length must be nonnegative")
    if n == 0:
        return 1
    a = g.full_adjacency()
    size = len(a)
    vec = [0] * size
    vec[0] = 1
    for _ in range(2 * n):
        vec = [sum(a[i][j] * vec[j] for j in range(size) if vec[j]) for i in range(size)]
    return vec[0]


def is_path_graph(g: BipartiteGraph) -> bool:
    return all(s == 1 for s in g.depth_sizes) and all(m[0][0] == 1 for m in g.adjacency)


def supertransitivity(g: BipartiteGraph) -> int:
    """Largest k with truncate(g, k) a simple path of k edges."""
    k = 0
    while k < g.max_depth and g.depth_sizes[k + 1] == 1 and g.adjacency[k][0][0] == 1:
        k += 1
    return k


def translate(g: BipartiteGraph, k: int) -> BipartiteGraph:
    """Attach an A_k path to the left of the basepoint (k even)."""
    if k < 0 or k % 2 != 0:
        raise DomainError("translation must be by an even nonnegative shift")
    if k == 0:
        return g
    sizes = (1,) * k + g.depth_sizes
    adjacency = tuple(((1,),) for _ in range(k)) + g.adjacency
    duals = None
    if g.duals is not None:
        duals = tuple(((0,),) * (k // 2)) + g.duals
    return BipartiteGraph(sizes, adjacency, duals)


def _append_path(g: BipartiteGraph, vertex, length):
    """Internal: hang a simple path of `length` edges on any vertex.

    New vertices are appended to existing depths (or create new depths).
    Dual data is dropped: it is not determined by the graph alone.
    """
    sizes = list(g.depth_sizes)
    adjacency = [list(list(row) for row in m) for m in g.adjacency]
    d, i = vertex
    for _ in range(length):
        target = d + 1
        if target > len(sizes) - 1:
            sizes.append(1)
            adjacency.append([[0] for _ in range(sizes[target - 1])])
            adjacency[target - 1][i][0] = 1
            j = 0
        else:
            sizes[target] += 1
            for row in adjacency[target - 1]:
                row.append(0)
            adjacency[target - 1][i][-1] = 1
            j = sizes[target] - 1
            if target < len(sizes) - 1:
                adjacency[target].append([0] * sizes[target + 1])
        d, i = target, j
    return BipartiteGraph(tuple(sizes), tuple(_as_matrix(m) for m in adjacency))


def attach_tail(g: BipartiteGraph, vertex, length: int) -> BipartiteGraph:
    """Attach an A_finite tail at a frontier vertex (no existing descendants)."""
    d, i = vertex
    if d < 0 or d > g.max_depth or i < 0 or i >= g.depth_sizes[d]:
        raise DomainError(f"no vertex {vertex}")
    if length < 1:
        raise DomainError("tail length must be positive")
    if d < g.max_depth and any(g.adjacency[d][i]):
        raise DomainError(f"vertex {vertex} has descendants; tails attach only at the frontier")
    return _append_path(g.without_duals(), vertex, length)


# -- canonical form and isomorphism ---------------------------------------


def _canonical_perms(g: BipartiteGraph):
    """Depth-by-depth backtracking for the lexicographically maximal labeling.

    At each depth we keep every prefix labeling achieving the maximal
    adjacency block read in canonical coordinates; dual blocks break the
    remaining ties at the end.
    """
    for s in g.depth_sizes:
        if s > _CANON_DEPTH_LIMIT and factorial(s) > 50000:
            raise ResourceError(f"canonicalization limit exceeded (depth size {s})")
    candidates = [((0,),)]  # each candidate: tuple of per-depth index tuples
    for d in range(g.max_depth):
        mat = g.adjacency[d]
        best_key = None
        new_candidates = []
        for prefix in candidates:
            rows = prefix[d]
            for perm in itertools.permutations(range(g.depth_sizes[d + 1])):
                key = tuple(mat[r][c] for r in rows for c in perm)
                if best_key is None or key > best_key:
                    best_key = key
                    new_candidates = [prefix + (perm,)]
                elif key == best_key:
                    new_candidates.append(prefix + (perm,))
        candidates = new_candidates
    if g.duals is not None:
        best_key = None
        best = []
        for prefix in candidates:
            key = []
            for bi, d in enumerate(range(0, g.max_depth + 1, 2)):
                perm = prefix[d]
                inv = {v: idx for idx, v in enumerate(perm)}
                key.append(tuple(inv[g.duals[bi][perm[idx]]] for idx in range(len(perm))))
            key = tuple(key)
            if best_key is None or key > best_key:
                best_key, best = key, [prefix]
            elif key == best_key:
                best.append(prefix)
        candidates = best
    return candidates[0]


def canonicalize(g: BipartiteGraph) -> BipartiteGraph:
    """Relabel vertices within each depth into the canonical order."""
    perms = _canonical_perms(g)
    adjacency = []
    for d, mat in enumerate(g.adjacency):
        rows, cols = perms[d], perms[d + 1]
        adjacency.append(tuple(tuple(mat[r][c] for c in cols) for r in rows))
    duals = None
    if g.duals is not None:
        duals = []
        for bi, d in enumerate(range(0, g.max_depth + 1, 2)):
            perm = perms[d]
            inv = {v: idx for idx, v in enumerate(perm)}
            duals.append(tuple(inv[g.duals[bi][perm[idx]]] for idx in range(len(perm))))
        duals = tuple(duals)
    return BipartiteGraph(g.depth_sizes, tuple(adjacency), duals)


def canonical_key(g: BipartiteGraph):
    c = canonicalize(g)
    return (c.depth_sizes, c.adjacency, c.duals)


def is_isomorphic(a: BipartiteGraph, b: BipartiteGraph) -> bool:
    """Depth-preserving isomorphism (dual data compared strictly when present)."""
    if a.depth_sizes != b.depth_sizes:
        return False
    return canonical_key(a) == canonical_key(b)


def extend_one_depth(g: BipartiteGraph, max_new_vertices: int, max_multiplicity: int):
    """All non-isomorphic one-depth extensions, including the unextended graph.

    Each new vertex is a column of multiplicities to the current last depth
    (at least one edge, entries <= max_multiplicity).  Dual data is dropped:
    an extension does not determine it.
    """
    if max_new_vertices < 0 or max_multiplicity < 0:
        raise DomainError("bounds must be nonnegative")
    if max_multiplicity > 9:
        raise DomainError("multiplicities above 9 cannot be serialized")
    base = g.without_duals()
    last = g.depth_sizes[-1]
    columns = [
        col
        for col in itertools.product(range(max_multiplicity + 1), repeat=last)
        if any(col)
    ]
    out = [base]
    seen = {canonical_key(base)}
    for m in range(1, max_new_vertices + 1):
        for combo in itertools.combinations_with_replacement(columns, m):
            block = tuple(tuple(col[i] for col in combo) for i in range(last))
            cand = BipartiteGraph(
                base.depth_sizes + (m,), base.adjacency + (block,)
            )
            key = canonical_key(cand)
            if key not in seen:
                seen.add(key)
                out.append(canonicalize(cand))
    return out
