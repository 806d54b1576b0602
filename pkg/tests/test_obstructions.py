import cmath
import math

import pytest

from pgkit.codec import parse
from pgkit.errors import DomainError, PrecisionError
from pgkit.graphs import GraphPair, a_chain, is_isomorphic, truncate
from pgkit.laurent import quantum_integer_value
from pgkit.obstructions import (
    is_spoke,
    is_stable_at,
    jellyfish_verdict,
    popa_prune,
    qt_identity_check,
    qt_obstruction,
    qt_ratio_from_pair,
    qt_residual,
    qt_residuals_both,
    quantum_integer,
    stable_completion,
    tail_solve,
)
from pgkit.spectral import fp_weights, graph_norm
from tests.conftest import PAPER_STRINGS


# -- stability ----------------------------------------------------------------


def test_stability_on_paths_and_parsed_graphs():
    for n in range(5):
        assert is_stable_at(a_chain(5), n)
    g2221 = parse(PAPER_STRINGS["g2221"][0])
    assert is_stable_at(g2221, 1)
    assert not is_stable_at(g2221, 2)  # the branch splits here
    assert is_stable_at(g2221, 3)
    h = parse(PAPER_STRINGS["H_plus"][0])
    assert is_stable_at(h, 4)
    hd = parse(PAPER_STRINGS["H_minus"][0])
    assert not is_stable_at(hd, 3)


def test_stability_truncation_compatibility():
    g = parse(PAPER_STRINGS["AH_plus"][0])
    for n in range(g.max_depth):
        assert is_stable_at(g, n) == is_stable_at(truncate(g, n + 1), n)


# -- spokes -------------------------------------------------------------------


def test_spoke_detection():
    ok, c = is_spoke(parse(PAPER_STRINGS["g2221"][0]))
    assert ok and c == 2
    for key, depth in (("g3311", 3), ("g3333", 3), ("g4442", 4)):
        ok, c = is_spoke(parse(PAPER_STRINGS[key][0]))
        assert ok and c == depth, key
    assert is_spoke(parse(PAPER_STRINGS["AH_plus"][0]))[0] is False
    assert is_spoke(a_chain(5)) == (True, None)


def test_spoke_multi_edges_at_center_only():
    s3 = parse("gbg1v2p1")  # the symmetric-group fixed-point shape
    ok, c = is_spoke(s3)
    assert ok and c == 1
    # doubled edge on the star-ward side of the center is forbidden
    bad = parse("gbg2v1p1")
    assert is_spoke(bad)[0] is False
    # doubled edge away from the center vertex is also forbidden
    bad2 = parse("gbg1v1p1v2x0")
    assert is_spoke(bad2)[0] is False


def test_simply_laced_spoke_is_stable_beyond_center():
    for key in ("g2221", "g3311", "g3333", "g4442"):
        g = parse(PAPER_STRINGS[key][0])
        ok, c = is_spoke(g)
        assert ok
        for k in range(c + 1, g.max_depth):
            assert is_stable_at(g, k), (key, k)


# -- tails ---------------------------------------------------------------------


def test_tail_solve_small_cases():
    assert tail_solve(3.0, 1.0, 1.0 / 3.0) == 2
    assert tail_solve(3.0, 1.0, 3.0 / 8.0) == 3
    assert tail_solve(3.0, 1.0, 0.5) is None
    with pytest.raises(DomainError):
        tail_solve(2.0, 1.0, 0.5)


@pytest.mark.parametrize("delta", [2.1, 3.0, 4.303])
def test_tail_solve_quantum_ratios_exact(delta):
    # exact quantum-integer inputs keep deep tails distinguishable where
    # floating ratios merge below machine precision
    from pgkit.laurent import quantum_integer_delta

    for k in range(2, 41):
        lam1 = quantum_integer_delta(k)
        lam2 = quantum_integer_delta(k - 1)
        assert tail_solve(delta, lam1, lam2) == k


@pytest.mark.parametrize("delta", [2.1, 3.0, 4.303])
def test_tail_solve_quantum_ratios_numeric(delta):
    # floating ratios merge into the supremum 1/q geometrically fast; only
    # assert where the gap stays clear of the tolerance
    q = (delta + math.sqrt(delta * delta - 4)) / 2
    for k in range(2, 13):
        lam1 = quantum_integer_value(k, q)
        lam2 = quantum_integer_value(k - 1, q)
        if 1 / q - lam2 / lam1 <= 3e-9:
            break
        assert tail_solve(delta, lam1, lam2) == k


def test_stable_completion_recovers_h_and_2221(h_pair):
    h = h_pair.principal.without_duals()
    delta = graph_norm(h)
    rec = stable_completion(truncate(h, 5), delta, max_tail=4)
    assert rec is not None and is_isomorphic(rec, h)

    g2221 = parse(PAPER_STRINGS["g2221"][0])
    rec2 = stable_completion(truncate(g2221, 3), graph_norm(g2221), max_tail=4)
    assert rec2 is not None and is_isomorphic(rec2, g2221)


def test_stable_completion_no_match_and_path_rejection():
    g = parse(PAPER_STRINGS["star10_plus"][0])
    assert stable_completion(g, 2.01, max_tail=6) is None
    with pytest.raises(DomainError):
        stable_completion(a_chain(4), 2.5, max_tail=3)


def test_tail_inequality_along_completions(h_pair):
    # delta * weight(child) < 2 * weight(parent) along every reconstructed tail
    h = h_pair.principal.without_duals()
    w = fp_weights(h)
    delta = w.eigenvalue
    for (d, i) in h.vertices():
        if d + 1 > h.max_depth or d < 4:
            continue
        for j, m in enumerate(h.adjacency[d][i]):
            if m:
                assert delta * w[(d + 1, j)] < 2 * w[(d, i)]


# -- the stability theorems as rules -------------------------------------------


def test_popa_prune_h_pair_survives(h_pair):
    v = popa_prune(h_pair, 6, 2.2)
    assert v.status == "survives"


def test_popa_prune_rule_b_branch_after_stability(h_pair):
    from pgkit.graphs import attach_tail, extend_one_depth

    h = h_pair.principal.without_duals()
    # extend both depth-6 vertices, then branch one of them at depth 7
    bad = h
    for idx in (0, 1):
        bad = attach_tail(bad, (6, idx), 1)
    block = ((1, 1), (0, 0))  # depth-7 vertex 0 gains two children
    from pgkit.graphs import BipartiteGraph

    bad = BipartiteGraph(bad.depth_sizes + (2,), bad.adjacency + (block,))
    v = popa_prune(GraphPair(bad, h_pair.dual.without_duals()), 8, 2.2)
    assert v.status == "eliminated"
    assert v.rule == "stability-b"


def test_popa_prune_rule_a_double_edge_on_dual():
    # both sides stable at depth 3 (branch is earlier), then a double edge
    # violates forced stability on the dual side
    gp = parse(PAPER_STRINGS["g2221"][0])
    gd = parse("gbg1v1v1p1p1v1x0x0p0x1x0v1x0p1x0")
    assert not is_stable_at(gd, 4)
    v = popa_prune(GraphPair(gp, gd), 5, 2.5)
    assert v.status == "eliminated"
    assert v.rule == "stability-a"


def test_popa_prune_rule_c_completion_infeasible():
    # principal side: every completion of the 5-star exceeds the bound;
    # dual side: fork completions never exceed norm 2; no common value in
    # (2, bound] exists, and infinite tails are excluded above norm 2
    gp = parse("gbg1v1p1p1p1p1")
    gd = parse("gbg1v1p1")
    v = popa_prune(GraphPair(gp, gd), 4, 2.4)
    assert v.status == "eliminated"
    assert v.rule == "stability-c"


# -- jellyfish verdicts ---------------------------------------------------------


def test_verdicts_for_the_three_pairs(g2221_pair, h_pair, ah_pair):
    v = jellyfish_verdict(g2221_pair)
    assert v.n == 3 and v.one_strand
    v = jellyfish_verdict(h_pair)
    assert v.n == 4 and v.two_strand_plus and not v.one_strand
    v = jellyfish_verdict(ah_pair)
    assert v.n == 6
    assert not (v.one_strand or v.two_strand_plus or v.two_strand_minus)


# -- quantum integers and quadratic tangles --------------------------------------


def test_quantum_integer_modes():
    assert quantum_integer(0).is_zero()
    assert quantum_integer(1) == 1
    two = quantum_integer(2)
    assert two.evaluate(1.5) == pytest.approx(1.5 + 1 / 1.5)
    assert quantum_integer(4, q=1.5) == pytest.approx(quantum_integer_value(4, 1.5))
    with pytest.raises(DomainError):
        quantum_integer(3, q=0.9)


def test_qt_identity_exact_range():
    for n in range(1, 31):
        assert qt_identity_check(n)


def test_qt_identity_perturbed_control():
    from pgkit.laurent import quantum_integer_q

    n = 4
    a = quantum_integer_q(2 * n + 1)  # perturbed leading square
    b = quantum_integer_q(n + 1)
    c = quantum_integer_q(n + 2)
    d = quantum_integer_q(n)
    lhs = a * a - b * b * (c * c + d * d - 2 * (c * d))
    assert not lhs.is_zero()


def _consistent_residual_inputs(n, q, omega):
    bracket_top = quantum_integer_value(n + 2, q)
    bracket_bot = quantum_integer_value(n, q)
    r_check = bracket_top / bracket_bot
    rhs = 2 + (2 + (omega + 1 / omega).real) / (bracket_top * bracket_bot)
    r = (rhs + math.sqrt(rhs * rhs - 4)) / 2
    tr_s3 = (math.sqrt(r) - 1 / math.sqrt(r)) / math.sqrt(quantum_integer_value(n + 1, q))
    tr_sc3 = (math.sqrt(r_check) - 1 / math.sqrt(r_check)) / math.sqrt(
        quantum_integer_value(n + 1, q)
    )
    return tr_s3, tr_sc3


@pytest.mark.parametrize("n", [2, 4, 6])
@pytest.mark.parametrize("q", [1.3, 1.6, 2.0])
def test_qt_residual_vanishes_under_substitutions(n, q):
    for m in range(n):
        omega = cmath.exp(2j * cmath.pi * m / n)
        tr_s3, tr_sc3 = _consistent_residual_inputs(n, q, omega)
        res = qt_residual(n, q, omega, tr_s3, tr_sc3)
        assert abs(res) <= 1e-9, (n, q, m)


def test_qt_residual_odd_n_impossible():
    # with equal cubic traces the residual cannot vanish for q > 1
    n, q = 3, 1.4
    for m in range(n):
        omega = cmath.exp(2j * cmath.pi * m / n)
        r1, r2 = qt_residuals_both(n, q, omega, 0.3, 0.3)
        floor = quantum_integer_value(n + 1, q) * 0.3 * (
            q ** (n + 1) + q ** (-n - 1) - 2
        )
        w = q ** (2 * n + 2) + q ** (-2 * n - 2) - (omega + 1 / omega).real
        assert min(abs(r1), abs(r2)) >= floor / abs(w) - 1e-12
        assert min(abs(r1), abs(r2)) > 0


def test_qt_residual_trivial_and_pole():
    assert qt_residual(2, 1.5, 1.0, 0.0, 0.0) == 0
    with pytest.raises(DomainError):
        qt_residual(2, 1.0, 1.0, 1.0, 1.0)


def test_qt_obstruction_cases(h_pair):
    v, _ = qt_obstruction(3, 2.5, 1.2)
    assert v.status == "eliminated" and v.rule == "qt-odd"
    v, omega = qt_obstruction(2, 2.5, 1.0)
    assert v.status == "survives" and omega == pytest.approx(-2.0)
    # a huge ratio has no unit-circle omega
    v, omega = qt_obstruction(2, 2.2, 4.0)
    assert v.status == "eliminated" and v.rule == "qt-omega"
    with pytest.raises(DomainError):
        qt_obstruction(2, 2.5, 0.5)
    n, delta, r = qt_ratio_from_pair(h_pair)
    assert n == 4
    assert delta**2 == pytest.approx((5 + math.sqrt(13)) / 2, abs=1e-8)
    v, omega = qt_obstruction(n, delta, r)
    assert v.status == "survives"
    assert -2 - 1e-9 <= omega <= 2 + 1e-9


def test_spoke_pair_equality_diagnostic(g2221_pair, h_pair):
    from pgkit.obstructions import spoke_pair_equality_diagnostic

    assert spoke_pair_equality_diagnostic(g2221_pair) is True
    # the H dual is not a spoke, so the diagnostic gives no verdict
    assert spoke_pair_equality_diagnostic(h_pair) is None
