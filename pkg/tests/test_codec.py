import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgkit.codec import parse, serialize
from pgkit.errors import EncodingError, GraphParseError
from pgkit.graphs import BipartiteGraph, a_chain, is_isomorphic
from tests.conftest import PAPER_STRINGS


def test_every_paper_string_parses_with_recorded_counts():
    assert len(PAPER_STRINGS) >= 15
    for name, (s, vertices, edges) in PAPER_STRINGS.items():
        g = parse(s)
        assert g.num_vertices() == vertices, name
        assert g.num_edges() == edges, name


def test_round_trip_is_canonicalization():
    for name, (s, _, _) in PAPER_STRINGS.items():
        g = parse(s)
        canon = serialize(g)
        assert serialize(parse(canon)) == canon, name
        assert is_isomorphic(parse(canon), g), name


def test_fork_and_simple_examples():
    fork = parse("gbg1v1p1")
    assert fork.depth_sizes == (1, 1, 2)
    assert serialize(a_chain(3)) == "gbg1v1"
    g2221 = parse("gbg1v1v1p1p1v1x0x0p0x1x0")
    # degree-4 vertex at depth 2, three arms, two reaching depth 4
    assert g2221.depth_sizes == (1, 1, 1, 3, 2)
    assert g2221.simple_degree(2, 0) == 4


def test_arity_violation_reports_position():
    with pytest.raises(GraphParseError) as e:
        parse("gbg1v1x1")
    assert e.value.position is not None


def test_duals_validation():
    with pytest.raises(GraphParseError):
        parse("gbg1v1duals1v1")  # duals need the bwd prefix
    with pytest.raises(GraphParseError):
        parse("bwd1v1v1p1duals1v2x3")  # not a permutation of 2 elements
    with pytest.raises(GraphParseError):
        parse("bwd1v1v1p1p1duals1v2x3x1")  # a 3-cycle is not an involution


def test_unknown_prefix_and_junk():
    with pytest.raises(GraphParseError):
        parse("xyz1v1")
    with pytest.raises(GraphParseError):
        parse("gbg1v 1")


def test_multiplicity_overflow():
    ten = BipartiteGraph((1, 1), (((10,),),))
    with pytest.raises(EncodingError):
        serialize(ten)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=4), st.randoms())
def test_random_graphs_round_trip(sizes, rnd):
    sizes = [1] + sizes
    adjacency = []
    ok = True
    for d in range(len(sizes) - 1):
        rows = [[0] * sizes[d + 1] for _ in range(sizes[d])]
        for j in range(sizes[d + 1]):
            rows[rnd.randrange(sizes[d])][j] = rnd.randint(1, 3)
        adjacency.append(tuple(tuple(r) for r in rows))
    g = BipartiteGraph(tuple(sizes), tuple(adjacency))
    s = serialize(g)
    assert serialize(parse(s)) == s
    assert is_isomorphic(parse(s), g)
