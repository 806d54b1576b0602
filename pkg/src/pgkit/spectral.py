"""Graph norms, Frobenius-Perron weights, and infinite ray families.

The norm of a finite connected bipartite graph is the largest eigenvalue of
its full symmetric adjacency matrix.  Power iteration runs on the square of
the matrix (primitive on each parity class) from the all-ones vector, so
runs are deterministic.  An exact characteristic-polynomial cross-check is
available for graphs with at most 12 vertices.

Infinite graphs are supported only in the shape of a ``RayFamily``: a finite
core with infinite simple rays attached.  Their norms come from a geometric
eigenvector ansatz: weights decay like t^-k along each ray, the eigenvalue
is t + 1/t, and the core equations close up for exactly one t, found by
bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericError
from .graphs import BipartiteGraph, _append_path

_ITERATION_CAP = 10**6


@dataclass(frozen=True)
class WeightVector:
    """Positive weight per vertex, normalized so the basepoint gets 1."""

    weights: dict  # (depth, index) -> positive number (float or sympy expr)
    eigenvalue: object

    def __getitem__(self, vertex):
        return self.weights[vertex]


def _leading_eig(mat, tol, cap=_ITERATION_CAP):
    """Largest eigenvalue of a symmetric nonnegative matrix, power iteration."""
    n = mat.shape[0]
    if n == 1:
        return float(mat[0, 0]), np.ones(1)
    x = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(cap):
        y = mat @ x
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0, x
        x = y / norm
        new_lam = float(x @ (mat @ x))
        if abs(new_lam - lam) <= 0.1 * tol * max(1.0, abs(new_lam)):
            resid = float(np.max(np.abs(mat @ x - new_lam * x)))
            if resid <= tol * max(1.0, abs(new_lam)):
                return new_lam, x
        lam = new_lam
    resid = float(np.max(np.abs(mat @ x - lam * x)))
    raise NumericError(f"power iteration did not converge (cap {cap})", residual=resid)


def graph_norm(g: BipartiteGraph, tol: float = 1e-10) -> float:
    """Operator norm of the adjacency matrix, via power iteration on its square."""
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    a = np.array(g.full_adjacency(), dtype=float)
    if a.shape[0] == 1:
        return 0.0
    # the square is primitive on each parity class; sqrt halves the error
    lam2, _ = _leading_eig(a @ a, max(tol, 1e-14))
    return float(np.sqrt(max(lam2, 0.0)))


def _char_poly(matrix):
    """Characteristic polynomial coefficients (Fraction), Faddeev-LeVerrier."""
    n = len(matrix)
    a = [[Fraction(x) for x in row] for row in matrix]
    coeffs = [Fraction(1)]  # leading coefficient of lambda^n
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        m = [
            [sum(a[i][r] * m[r][j] for r in range(n)) for j in range(n)]
            for i in range(n)
        ]
        for i in range(n):
            m[i][i] += coeffs[-1]
        am = [
            [sum(a[i][r] * m[r][j] for r in range(n)) for j in range(n)]
            for i in range(n)
        ]
        c = -sum(am[i][i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs  # p(x) = sum coeffs[i] * x^(n-i)


def _sturm_chain(coeffs):
    """Sturm chain for a polynomial given by descending coefficients."""
    from .laurent import DeltaPoly

    p0 = DeltaPoly(list(reversed(coeffs)))
    p1 = DeltaPoly([coeffs[-(i + 1)] * i for i in range(1, len(coeffs))])
    chain = [p0, p1]
    while not chain[-1].is_zero() and chain[-1].degree() > 0:
        _, r = chain[-2].divmod(chain[-1])
        if r.is_zero():
            break
        chain.append(-r)
    return chain


def _sign_changes(chain, x):
    signs = []
    for p in chain:
        v = p.evaluate(x)
        if v != 0:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def graph_norm_exact(g: BipartiteGraph, precision: float = 1e-12) -> float:
    """Largest adjacency eigenvalue via Sturm bisection on the exact char poly.

    Provided only for graphs with <= 12 vertices; every acceptance fixture
    needing an exact oracle fits.
    """
    n = g.num_vertices()
    if n > 12:
        raise DomainError("exact norm is provided only for graphs with <= 12 vertices")
    if n == 1:
        return 0.0
    coeffs = _char_poly(g.full_adjacency())
    chain = _sturm_chain(coeffs)
    hi = Fraction(max(g.degree(*v) for v in g.vertices()) + 1)
    lo = Fraction(0)
    # number of roots in (x, hi] stays >= 1 while x is below the largest root
    changes_hi = _sign_changes(chain, hi)
    while hi - lo > precision:
        mid = (lo + hi) / 2
        if _sign_changes(chain, mid) - changes_hi >= 1:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def fp_weights(g: BipartiteGraph, tol: float = 1e-10) -> WeightVector:
    """Frobenius-Perron eigenvector, normalized to 1 at the basepoint."""
    a = np.array(g.full_adjacency(), dtype=float)
    n = a.shape[0]
    if n == 1:
        return WeightVector({(0, 0): 1.0}, 0.0)
    delta = graph_norm(g, tol)
    # shifted matrix is primitive; the eigenvector converges fast
    lam, vec = _leading_eig(a + delta * np.eye(n), tol)
    vec = np.abs(vec)
    vec /= vec[0]
    weights = {}
    for v in g.vertices():
        weights[v] = float(vec[g.vertex_offset(*v)])
    wv = WeightVector(weights, delta)
    # normalizing at the basepoint scales everything by 1/vec[0], so judge
    # residuals against the largest weight
    scale = max(weights.values())
    resid = max(abs(r) for r in eigen_residuals(g, wv, delta).values())
    if resid > max(tol * 100, 1e-8) * scale:
        raise NumericError("eigenvector residual too large", residual=resid)
    return wv


def eigen_residuals(g: BipartiteGraph, w, eigenvalue):
    """Per-vertex residuals  eigenvalue*w(v) - sum of neighbour weights."""
    weights = w.weights if isinstance(w, WeightVector) else dict(w)
    for v in g.vertices():
        if v not in weights:
            raise DomainError(f"weight missing for vertex {v}")
    out = {}
    for d, i in g.vertices():
        s = 0
        if d > 0:
            col = [g.adjacency[d - 1][r][i] for r in range(g.depth_sizes[d - 1])]
            s = sum(m * weights[(d - 1, r)] for r, m in enumerate(col) if m)
        if d < g.max_depth:
            s = s + sum(
                m * weights[(d + 1, j)] for j, m in enumerate(g.adjacency[d][i]) if m
            )
        out[(d, i)] = eigenvalue * weights[(d, i)] - s
    return out


def verify_eigenvector(g: BipartiteGraph, w, eigenvalue, tol=1e-9) -> bool:
    """True iff every vertex equation holds within tol and all weights > 0.

    With tol=0 the check is symbolic: residuals must simplify to exactly
    zero (weights may be sympy expressions).
    """
    weights = w.weights if isinstance(w, WeightVector) else dict(w)
    residuals = eigen_residuals(g, w, eigenvalue)
    if tol == 0:
        import sympy

        for v, r in residuals.items():
            if sympy.simplify(r) != 0:
                return False
        return all(sympy.simplify(x) > 0 for x in weights.values())
    if any(not (x > 0) for x in weights.values()):
        return False
    return all(abs(r) <= tol for r in residuals.values())


# -- infinite ray families -------------------------------------------------


@dataclass(frozen=True)
class RayFamily:
    """A finite core graph with `count` infinite simple rays at chosen vertices."""

    core: BipartiteGraph
    ray_attachments: tuple  # ((depth, index), count) pairs

    def __post_init__(self):
        object.__setattr__(
            self,
            "ray_attachments",
            tuple((tuple(v), int(c)) for v, c in self.ray_attachments),
        )
        if not self.ray_attachments:
            raise DomainError("a ray family needs at least one ray")
        for v, c in self.ray_attachments:
            if c < 1:
                raise DomainError("ray counts must be >= 1")
            d, i = v
            if d > self.core.max_depth or i >= self.core.depth_sizes[d]:
                raise DomainError(f"no core vertex {v}")

    def total_rays(self):
        return sum(c for _, c in self.ray_attachments)

    def truncate(self, length: int) -> BipartiteGraph:
        """Finite truncation with every ray cut to `length` edges."""
        if length < 1:
            raise DomainError("truncation length must be >= 1")
        g = self.core.without_duals()
        for v, count in self.ray_attachments:
            for _ in range(count):
                g = _append_path(g, v, length)
        return g


@dataclass(frozen=True)
class RayNorm:
    norm: float
    t: float
    ell2: bool
    message: str = ""


def ray_family_norm(fam: RayFamily, tol: float = 1e-10) -> RayNorm:
    """Norm of the infinite graph and the geometric decay rate t.

    Solves perron(A_core + diag(rays)/t) = t + 1/t by bisection in the
    eigenvalue; the boundary response is monotone, so the bracket is safe.
    Reports norm 2 (not ell-2) when no t > 1 exists.
    """
    core = fam.core
    n = core.num_vertices()
    a = np.array(core.full_adjacency(), dtype=float)
    rays = np.zeros(n)
    for v, c in fam.ray_attachments:
        rays[core.vertex_offset(*v)] += c

    def perron(lam):
        t = (lam + np.sqrt(lam * lam - 4.0)) / 2.0
        m = a + np.diag(rays / t)
        val, _ = _leading_eig(m + np.eye(n), tol)  # shift keeps it primitive
        return val - 1.0

    hi = float(_leading_eig(a + np.diag(rays) + np.eye(n), tol)[0] - 1.0)
    if hi <= 2.0 + 1e-13:
        return RayNorm(2.0, 1.0, False, "norm = 2, not ell-2")
    lo = 2.0
    # g(lam) = perron(M(lam)) - lam is strictly decreasing; g(hi) <= 0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if perron(mid) - mid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    lam = (lo + hi) / 2.0
    if lam <= 2.0 + 10 * tol:
        return RayNorm(2.0, 1.0, False, "norm = 2, not ell-2")
    t = (lam + np.sqrt(lam * lam - 4.0)) / 2.0

    # self-check: truncation norms increase monotonically toward the answer
    prev = 0.0
    for length in (4, 8, 16, 32):
        trunc_norm = graph_norm(fam.truncate(length), tol)
        if trunc_norm < prev - 1e-9 or trunc_norm > lam + 1e-6:
            raise NumericError(
                "truncation norms fail to increase toward the family norm",
                residual=trunc_norm - prev,
            )
        prev = trunc_norm
    return RayNorm(float(lam), float(t), True)


def single_center_family(ray_count: int) -> RayFamily:
    """One basepoint vertex carrying `ray_count` infinite rays."""
    core = BipartiteGraph((1,), ())
    return RayFamily(core, (((0, 0), ray_count),))


def two_triple_point_family(bridge_subdivision: int = 0) -> RayFamily:
    """Two degree-3 vertices joined by a (possibly subdivided) bridge, 2 rays each."""
    from .graphs import a_chain

    core = a_chain(2 + bridge_subdivision)
    end = core.max_depth
    return RayFamily(core, (((0, 0), 2), ((end, 0), 2)))
