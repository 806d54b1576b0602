"""Graph-level predicates and pruning rules.

Covers: stability at a depth, spoke detection, reconstruction of finite
tails behind a stable region, the stability theorems as elimination rules,
quantum integers, and the quadratic-tangles obstruction for graph pairs
whose annular multiplicities are *10.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field

from .errors import DomainError, PrecisionError
from .graphs import (
    BipartiteGraph,
    GraphPair,
    attach_tail,
    canonical_key,
    is_path_graph,
    supertransitivity,
    truncate,
)
from .laurent import (
    LaurentQ,
    quantum_integer_q,
    quantum_integer_value,
)
from .spectral import fp_weights, graph_norm


@dataclass(frozen=True)
class ObstructionVerdict:
    status: str  # "eliminated" | "survives" | "needs_external"
    rule: str = ""
    note: str = ""
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("eliminated", "survives", "needs_external"):
            raise DomainError(f"bad verdict status {self.status!r}")
        if self.status == "eliminated" and not self.rule:
            raise DomainError("eliminated verdicts must name the rule that fired")


# -- stability and spokes ---------------------------------------------------


def is_stable_at(g: BipartiteGraph, n: int) -> bool:
    """No splitting, no merging, and only simple edges between depths n, n+1.

    Vacuously true at or beyond the maximal depth.
    """
    if n < 0:
        raise DomainError("depth must be nonnegative")
    if n >= g.max_depth:
        return True
    mat = g.adjacency[n]
    for row in mat:
        if sum(row) > 1:
            return False
    for j in range(g.depth_sizes[n + 1]):
        if sum(mat[i][j] for i in range(g.depth_sizes[n])) > 1:
            return False
    return True


def pair_stable_at(pair: GraphPair, n: int) -> bool:
    return is_stable_at(pair.principal, n) and is_stable_at(pair.dual, n)


def is_spoke(g: BipartiteGraph):
    """(is_spoke, center_depth): tree, basepoint valence 1, one branch vertex.

    Multiple edges are allowed only at the center c and never on the edge
    from c toward the basepoint.  For paths (no branch vertex) the center is
    the nearest multi-edge endpoint to the basepoint, or None.
    """
    simple_edges = sum(
        1 for mat in g.adjacency for row in mat for x in row if x >= 1
    )
    if simple_edges != g.num_vertices() - 1:
        return False, None  # underlying simple graph has a cycle
    if g.num_vertices() > 1 and g.simple_degree(0, 0) != 1:
        return False, None
    branch = [v for v in g.vertices() if g.simple_degree(*v) > 2]
    if len(branch) > 1:
        return False, None
    multi = []
    for d, mat in enumerate(g.adjacency):
        for i, row in enumerate(mat):
            for j, x in enumerate(row):
                if x >= 2:
                    multi.append((d, i, j))
    if branch:
        c = branch[0]
    elif multi:
        # path with a doubled edge: the center must be the endpoint nearer
        # the basepoint, else the multi-edge would point star-ward
        d, i, j = min(multi)
        c = (d, i)
    else:
        return True, None  # a path is trivially a spoke
    cd, ci = c
    for d, i, j in multi:
        if (d, i) != c:
            return False, None  # multi-edge not incident to c (or star-ward of it)
    return True, cd


# -- finite tails ------------------------------------------------------------


def tail_solve(delta: float, lam1, lam2, tol: float = 1e-9, max_k: int = 64):
    """Tail length k >= 2 with lam2/lam1 = [k-1]/[k] at q + 1/q = delta.

    The ratios increase strictly to 1/q, so the scan is exhaustive; None
    when the ratio is not attained.  Exact inputs (DeltaPoly/DeltaRat in
    the loop parameter) are compared as polynomial identities, which keeps
    deep tails distinguishable where floating ratios have merged.
    """
    from .laurent import DeltaPoly, DeltaRat, quantum_integer_delta

    if isinstance(lam1, (DeltaPoly, DeltaRat)) or isinstance(lam2, (DeltaPoly, DeltaRat)):
        l1 = lam1 if isinstance(lam1, DeltaRat) else DeltaRat(lam1)
        l2 = lam2 if isinstance(lam2, DeltaRat) else DeltaRat(lam2)
        for k in range(2, max_k + 1):
            lhs = l2 * DeltaRat(quantum_integer_delta(k))
            rhs = l1 * DeltaRat(quantum_integer_delta(k - 1))
            if lhs == rhs:
                return k
        return None
    if delta <= 2:
        raise DomainError("tail reconstruction needs delta > 2")
    if lam1 <= 0 or lam2 <= 0:
        raise DomainError("weights must be positive")
    q = (delta + math.sqrt(delta * delta - 4)) / 2
    target = lam2 / lam1
    if target >= 1 / q - tol:
        return None  # at or past the supremum of the ratio sequence
    k = 2
    while k <= max_k:
        ratio = quantum_integer_value(k - 1, q) / quantum_integer_value(k, q)
        if abs(ratio - target) <= tol:
            return k
        if ratio > target:
            return None
        k += 1
    return None


def _tail_tuples(bound, slots):
    return itertools.product(range(bound + 1), repeat=slots)


def complete_with_tails(g: BipartiteGraph, lengths):
    """Attach a tail of lengths[i] edges at the i-th last-depth vertex."""
    out = g.without_duals()
    last = g.max_depth
    for i, ln in enumerate(lengths):
        if ln:
            out = attach_tail(out, (last, i), ln)
    return out


def stable_completion(
    g: BipartiteGraph, delta: float, max_tail: int, tol: float = 1e-9
):
    """The unique tail completion of g whose graph norm equals delta.

    Searches tail-length tuples on the last-depth vertices; the stability
    theorem guarantees at most one match, so two matches within tol mean
    the tolerance is too loose.  Returns None when nothing matches.
    """
    if delta <= 2:
        raise DomainError("stable completion needs delta > 2")
    if is_path_graph(g):
        raise DomainError(
            "the truncation is an A path: the uniqueness theorem does not apply"
        )
    frontier = g.depth_sizes[-1]
    matches = {}
    for lengths in _tail_tuples(max_tail, frontier):
        cand = complete_with_tails(g, lengths)
        if abs(graph_norm(cand, tol * 1e-2) - delta) <= tol:
            matches[canonical_key(cand)] = cand
    if not matches:
        return None
    if len(matches) > 1:
        raise PrecisionError(
            f"{len(matches)} distinct completions matched delta={delta}; tighten tol"
        )
    return next(iter(matches.values()))


# -- the stability theorems as pruning rules ---------------------------------


def _first_instability(g: BipartiteGraph, lo: int, hi: int):
    for k in range(lo, min(hi, g.max_depth)):
        if not is_stable_at(g, k):
            return k
    return None


def _not_a_path_at(g: BipartiteGraph, k: int) -> bool:
    return not is_path_graph(truncate(g, min(k, g.max_depth)))


def popa_prune(
    pair: GraphPair, current_depth: int, delta_bound: float, tail_check: bool = True
) -> ObstructionVerdict:
    """Eliminate pairs contradicting the stability theorems.

    (a) both graphs stable at n with a non-path truncation at n+1 forces
        stability at every later depth; (b) the principal graph alone stable
        at two consecutive depths forces the same from n+1 on; (c) a stable
        region whose finite tail completions can never reach a common norm
        in (2, delta_bound] would need infinite tails, which only A-infinity
        shapes support.  Callers that run their own completion search can
        skip (c) with tail_check=False.
    """
    if delta_bound <= 2:
        raise DomainError("the stability theorems need delta > 2")
    gp, gd = pair.principal, pair.dual
    top = min(current_depth, max(gp.max_depth, gd.max_depth))
    # rules apply only when the eventual modulus exceeds 2
    if graph_norm(gp) <= 2 + 1e-12 and graph_norm(gd) <= 2 + 1e-12:
        return ObstructionVerdict("survives", note="norm <= 2: stability theorems silent")

    for n in range(0, top):
        both_stable = pair_stable_at(pair, n)
        if both_stable and _not_a_path_at(gp, n + 1) and _not_a_path_at(gd, n + 1):
            bad = _first_instability(gp, n + 1, top)
            if bad is None:
                bad = _first_instability(gd, n + 1, top)
                side = "dual"
            else:
                side = "principal"
            if bad is not None:
                return ObstructionVerdict(
                    "eliminated",
                    rule="stability-a",
                    note=f"pair stable at depth {n} but {side} graph unstable at {bad}",
                )
        if (
            is_stable_at(gp, n)
            and is_stable_at(gp, n + 1)
            and n + 1 < gp.max_depth
            and _not_a_path_at(gp, n + 1)
        ):
            for g, side in ((gp, "principal"), (gd, "dual")):
                bad = _first_instability(g, n + 2, top)
                if bad is not None:
                    return ObstructionVerdict(
                        "eliminated",
                        rule="stability-b",
                        note=(
                            f"principal graph stable at depths {n},{n + 1} but "
                            f"{side} graph unstable at {bad}"
                        ),
                    )

    if tail_check:
        verdict = _infinite_tail_check(pair, delta_bound)
        if verdict is not None:
            return verdict
    return ObstructionVerdict("survives", note="no stability contradiction")


def _completion_norms(g: BipartiteGraph, max_tail: int, tol: float, lo=2.0, hi=None):
    """Norms of tail completions intersected with (lo, hi], bounded search.

    Tail norms grow monotonically in every tail length, so the all-zero and
    all-max completions bracket the achievable set; outside the window the
    whole family is dismissed without enumeration.  The tuple space is
    capped to keep the check at desk scale.
    """
    frontier = g.depth_sizes[-1]
    if hi is not None and graph_norm(g, tol * 1e-2) > hi + tol:
        return set()
    top = complete_with_tails(g, (max_tail,) * frontier)
    if graph_norm(top, tol * 1e-2) <= lo + tol:
        return set()
    while (max_tail + 1) ** frontier > 20000 and max_tail > 1:
        max_tail -= 1
    norms = set()
    seen = set()
    for lengths in _tail_tuples(max_tail, frontier):
        cand = complete_with_tails(g, lengths)
        key = canonical_key(cand)
        if key in seen:
            continue
        seen.add(key)
        norms.add(round(graph_norm(cand, tol * 1e-2), 10))
    return norms


def _infinite_tail_check(pair: GraphPair, delta_bound: float, max_tail: int = 14, tol: float = 1e-8):
    """Rule (c): no finite tail completion of a forced-stable pair can work.

    When the pair is stable from some depth on (non-path truncation), the
    completion must be finite tails with one common norm in (2, bound];
    infinite tails are excluded for norms above 2.  If the two graphs'
    completion norm sets cannot meet there, the pair dies.
    """
    gp, gd = pair.principal, pair.dual
    trigger = None
    for n in range(0, max(gp.max_depth, gd.max_depth) + 1):
        if (
            pair_stable_at(pair, n)
            and _not_a_path_at(gp, n + 1)
            and _not_a_path_at(gd, n + 1)
            and all(is_stable_at(gp, k) for k in range(n, gp.max_depth))
            and all(is_stable_at(gd, k) for k in range(n, gd.max_depth))
        ):
            trigger = n
            break
    if trigger is None:
        return None
    norms_p = {
        x
        for x in _completion_norms(gp, max_tail, tol, lo=2.0, hi=delta_bound)
        if 2 < x <= delta_bound + tol
    }
    norms_d = {
        x
        for x in _completion_norms(gd, max_tail, tol, lo=2.0, hi=delta_bound)
        if 2 < x <= delta_bound + tol
    }
    for a in norms_p:
        for b in norms_d:
            if abs(a - b) <= tol * 10:
                return None  # a common finite completion exists
    return ObstructionVerdict(
        "eliminated",
        rule="stability-c",
        note=(
            f"stable from depth {trigger} but no finite tail completion gives a "
            f"common norm in (2, {delta_bound}]; infinite tails excluded"
        ),
    )


# -- jellyfish existence ------------------------------------------------------


@dataclass(frozen=True)
class JellyfishVerdict:
    one_strand: bool
    two_strand_plus: bool
    two_strand_minus: bool
    n: int


def jellyfish_verdict(pair: GraphPair) -> JellyfishVerdict:
    """Spoke checks at depths n+1 and n+2, n-1 = supertransitivity of the pair."""
    gp, gd = pair.principal, pair.dual
    st = supertransitivity(gp)
    n = st + 1

    def spoke_trunc(g, k):
        return is_spoke(truncate(g, min(k, g.max_depth)))[0]

    one = spoke_trunc(gp, n + 1) and spoke_trunc(gd, n + 1)
    two_plus = spoke_trunc(gp, n + 2)
    two_minus = spoke_trunc(gd, n + 2)
    return JellyfishVerdict(one, two_plus, two_minus, n)


def spoke_pair_equality_diagnostic(pair: GraphPair):
    """Diagnostic only: simply laced spoke pairs should coincide.

    Dual projections share traces, so the weights at odd depths match and
    the two graphs end up equal.  Returns None when the hypothesis (both
    graphs simply laced spokes) fails, else whether the graphs agree; never
    used as an eliminating rule since the duality data is not modeled.
    """
    from .graphs import is_isomorphic

    gp, gd = pair.principal, pair.dual
    for g in (gp, gd):
        ok, _ = is_spoke(g)
        simply_laced = all(x <= 1 for m in g.adjacency for row in m for x in row)
        if not (ok and simply_laced):
            return None
    return is_isomorphic(gp.without_duals(), gd.without_duals())


# -- quantum integers and the quadratic tangles obstruction -------------------


def quantum_integer(k: int, q=None):
    """[k]: exact Laurent polynomial when q is None, else the value at q > 1."""
    if k < 0:
        raise DomainError("quantum integer needs k >= 0")
    if q is None:
        return quantum_integer_q(k)
    if isinstance(q, complex):
        return quantum_integer_value(k, q)
    if q <= 1:
        raise DomainError("numeric quantum integers need q > 1")
    return quantum_integer_value(k, q)


def qt_identity_check(n: int) -> bool:
    """Exact check of [2n+2]^2 - [n+1]^2 ([n+2]^2 + [n]^2 - 2[n+2][n]) = 0."""
    if n < 1:
        raise DomainError("identity is stated for n >= 1")
    a = quantum_integer_q(2 * n + 2)
    b = quantum_integer_q(n + 1)
    c = quantum_integer_q(n + 2)
    d = quantum_integer_q(n)
    lhs = a * a - b * b * (c * c + d * d - 2 * (c * d))
    return lhs.is_zero()


def qt_residual(n, q, omega, tr_s3, tr_s_check3, sigma=None) -> complex:
    """Pairing of the squared generator against the (n+1)-st dual annular element.

    sigma is a chosen square root of omega (principal root by default;
    both roots are legitimate, see qt_residuals_both).  Raises at the pole
    q^(2n+2) + q^(-2n-2) = omega + 1/omega.
    """
    if q <= 1:
        raise DomainError("needs q > 1")
    omega = complex(omega)
    if abs(abs(omega) - 1.0) > 1e-9:
        raise DomainError("omega must lie on the unit circle")
    if sigma is None:
        sigma = cmath.sqrt(omega)
    w = q ** (2 * n + 2) + q ** (-(2 * n + 2)) - omega - 1 / omega
    if abs(w) < 1e-12:
        raise DomainError("pole: W_{2n+2, omega} vanishes")
    q2n2 = quantum_integer_value(2 * n + 2, q)
    qn1 = quantum_integer_value(n + 1, q)
    term1 = sigma**n * (q2n2 / w) * tr_s3
    term2 = (qn1 / w) * ((-sigma) ** (n + 1) + (-sigma) ** (-(n + 1))) * tr_s_check3
    return term1 + term2


def qt_residuals_both(n, q, omega, tr_s3, tr_s_check3):
    """Residuals for both square roots of omega."""
    s = cmath.sqrt(complex(omega))
    return (
        qt_residual(n, q, omega, tr_s3, tr_s_check3, sigma=s),
        qt_residual(n, q, omega, tr_s3, tr_s_check3, sigma=-s),
    )


def qt_obstruction(
    n: int, delta: float, r: float, enforce_root_of_unity: bool = False, tol: float = 1e-9
):
    """Quadratic tangles elimination for *10 pairs.

    n odd is impossible outright.  For n even, solve
        r + 1/r = 2 + (2 + omega + 1/omega) / ([n+2][n])
    for omega + 1/omega; no unit-circle omega exists outside [-2, 2].
    Returns (verdict, omega_plus_inverse or None).
    """
    if delta <= 2:
        raise DomainError("the obstruction applies for delta > 2")
    if r < 1 - tol:
        raise DomainError("convention requires r >= 1")
    r = max(r, 1.0)
    if n % 2 == 1:
        return (
            ObstructionVerdict(
                "eliminated",
                rule="qt-odd",
                note=f"n = {n} odd: the chirality equation forces q <= 1",
            ),
            None,
        )
    q = (delta + math.sqrt(delta * delta - 4)) / 2
    bracket = quantum_integer_value(n + 2, q) * quantum_integer_value(n, q)
    omega_sum = (r + 1 / r - 2) * bracket - 2
    if omega_sum > 2 + tol or omega_sum < -2 - tol:
        return (
            ObstructionVerdict(
                "eliminated",
                rule="qt-omega",
                note=f"omega + 1/omega = {omega_sum:.6g} has no unit-circle solution",
            ),
            omega_sum,
        )
    if enforce_root_of_unity:
        # rotation has period n on n-boxes, so omega^n = 1; optional because
        # the source results never state it
        theta = math.acos(max(-1.0, min(1.0, omega_sum / 2)))
        ks = theta * n / (2 * math.pi)
        if abs(ks - round(ks)) > 1e-6:
            return (
                ObstructionVerdict(
                    "eliminated",
                    rule="qt-root-of-unity",
                    note=f"omega is not an n-th root of unity (omega+1/omega = {omega_sum:.6g})",
                ),
                omega_sum,
            )
    return (
        ObstructionVerdict("survives", note=f"omega + 1/omega = {omega_sum:.6g}"),
        omega_sum,
    )


def qt_ratio_from_pair(pair: GraphPair, tol: float = 1e-10):
    """(n, delta, r) for the quadratic tangles obstruction, from the graphs.

    r is the Frobenius-Perron weight ratio (>= 1) of the two depth-n
    vertices of the principal graph.
    """
    gp = pair.principal
    n = supertransitivity(gp) + 1
    if n > gp.max_depth or gp.depth_sizes[n] != 2:
        raise DomainError("principal graph does not have exactly two depth-n vertices")
    delta = graph_norm(gp, tol)
    w = fp_weights(gp, tol)
    a, b = w[(n, 0)], w[(n, 1)]
    r = max(a, b) / min(a, b)
    return n, delta, r
