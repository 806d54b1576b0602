"""Shared fixtures: the graph-string corpus with hand-recorded shape data."""

import pytest

from pgkit.codec import parse
from pgkit.graphs import GraphPair

# every graph string from the source corpus, with vertex/edge counts read
# off the drawn figures by hand
PAPER_STRINGS = {
    "EH_plus": ("bwd1v1v1v1v1v1v1v1p1v1x0p0x1v1x0p0x1duals1v1v1v1v1x2v2x1", 14, 13),
    "EH_minus": ("bwd1v1v1v1v1v1v1v1p1v1x0p1x0duals1v1v1v1v1x2", 12, 11),
    "g2221_bwd": ("bwd1v1v1p1p1v1x0x0p0x1x0duals1v1v2x1", 8, 7),
    "conjecture_small": ("bwd1v1p1v1x1p0x1duals1v1x2", 6, 6),
    "conjecture_big": ("bwd1v1v1p1v1x0p0x1p0x1v0x1x0p1x0x1duals1v1v2x1x3", 10, 10),
    "star10_plus": ("gbg1v1p1v1x0p0x1", 6, 5),
    "star10_minus": ("gbg1v1p1v1x0p1x0", 6, 5),
    "g2221": ("gbg1v1v1p1p1v1x0x0p0x1x0", 8, 7),
    "g3311": ("gbg1v1v1v1p1p1v1x0x0v1", 9, 8),
    "g3333": ("gbg1v1v1v1p1p1v1x0x0p0x1x0p0x0x1v1x0x0p0x1x0p0x0x1", 13, 12),
    "g4442": ("gbg1v1v1v1v1p1p1v1x0x0p0x1x0p0x0x1v0x1x0p0x0x1v1x0p0x1", 15, 14),
    "AH_plus": (
        "bwd1v1v1v1v1v1p1v1x0p0x1v1x0p0x1p0x1v1x0x0v1duals1v1v1v1x2v2x1x3v1",
        15,
        14,
    ),
    "AH_minus": ("bwd1v1v1v1v1v1p1v0x1p0x1v0x1v1duals1v1v1v1x2v1", 12, 11),
    "H_plus": ("bwd1v1v1v1p1v1x0p0x1v1x0p0x1duals1v1v1x2v2x1", 10, 9),
    "H_minus": ("bwd1v1v1v1p1v1x0p1x0duals1v1v1x2", 8, 7),
}


@pytest.fixture(scope="session")
def paper_graphs():
    return {name: parse(s) for name, (s, _, _) in PAPER_STRINGS.items()}


@pytest.fixture(scope="session")
def h_pair(paper_graphs):
    return GraphPair(paper_graphs["H_plus"], paper_graphs["H_minus"])


@pytest.fixture(scope="session")
def eh_pair(paper_graphs):
    return GraphPair(paper_graphs["EH_plus"], paper_graphs["EH_minus"])


@pytest.fixture(scope="session")
def ah_pair(paper_graphs):
    return GraphPair(paper_graphs["AH_plus"], paper_graphs["AH_minus"])


@pytest.fixture(scope="session")
def g2221_pair(paper_graphs):
    g = paper_graphs["g2221"]
    return GraphPair(g, g)
