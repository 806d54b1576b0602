"""Parse and serialize the compact graph-string notation.

Grammar (strict, no whitespace):

    graph   := prefix block ("v" block)* [ "duals" dualblk ("v" dualblk)* ]
    prefix  := "gbg" | "bwd"
    block   := vertex ("p" vertex)*
    vertex  := DIGIT ("x" DIGIT)*
    dualblk := NUM ("x" NUM)*          (NUM = positive decimal, 1-indexed)

Depth block d (1-indexed) lists the depth-d vertices separated by 'p'; each
vertex is a run of single digits separated by 'x' giving edge multiplicities
to the depth-(d-1) vertices in order.  Depth 0 is the implicit basepoint.
The i-th dual block is an involution of the vertices at even depth 2(i-1).
A "duals" section is permitted only with the "bwd" prefix.
"""

from __future__ import annotations

from .errors import EncodingError, GraphParseError
from .graphs import BipartiteGraph, canonicalize

_ALPHABET = set("gbwduals vpx0123456789".replace(" ", ""))


def parse(s: str) -> BipartiteGraph:
    """Parse a graph string into a BipartiteGraph."""
    if not isinstance(s, str) or not s:
        raise GraphParseError("empty graph string")
    if s.startswith("gbg"):
        prefix = "gbg"
    elif s.startswith("bwd"):
        prefix = "bwd"
    else:
        raise GraphParseError(f"unknown prefix in {s[:3]!r}", 0)
    body = s[len(prefix):]
    bad = set(body) - _ALPHABET
    if bad:
        raise GraphParseError(f"illegal characters {sorted(bad)}", len(prefix))
    if "duals" in body:
        main, _, dualpart = body.partition("duals")
        if prefix != "bwd":
            raise GraphParseError("'duals' section requires the 'bwd' prefix", s.index("duals"))
    else:
        main, dualpart = body, None
    if not main:
        raise GraphParseError("graph has no depth blocks", len(prefix))

    sizes = [1]
    adjacency = []
    pos = len(prefix)
    for block in main.split("v"):
        if not block:
            raise GraphParseError("empty depth block", pos)
        prev = sizes[-1]
        rows = []  # one row per previous-depth vertex, built by transposing columns
        cols = []
        for vstr in block.split("p"):
            digits = vstr.split("x")
            if any(len(tok) != 1 or not tok.isdigit() for tok in digits):
                raise GraphParseError(f"bad vertex spec {vstr!r}", pos)
            if len(digits) != prev:
                raise GraphParseError(
                    f"vertex lists {len(digits)} multiplicities but depth "
                    f"{len(sizes) - 1} has {prev} vertices",
                    pos,
                )
            col = [int(t) for t in digits]
            if not any(col):
                raise GraphParseError("vertex with no edge to the previous depth", pos)
            cols.append(col)
        rows = tuple(tuple(col[i] for col in cols) for i in range(prev))
        adjacency.append(rows)
        sizes.append(len(cols))
        pos += len(block) + 1

    duals = None
    if dualpart is not None:
        evens = [d for d in range(len(sizes)) if d % 2 == 0]
        blocks = dualpart.split("v")
        if len(blocks) != len(evens):
            raise GraphParseError(
                f"duals section has {len(blocks)} blocks but the graph has "
                f"{len(evens)} even depths",
                pos,
            )
        duals = []
        for blk, d in zip(blocks, evens):
            toks = blk.split("x")
            if any(not t.isdigit() or int(t) < 1 for t in toks):
                raise GraphParseError(f"bad dual block {blk!r}", pos)
            perm = tuple(int(t) - 1 for t in toks)
            if sorted(perm) != list(range(sizes[d])):
                raise GraphParseError(
                    f"dual block at depth {d} is not a permutation of its "
                    f"{sizes[d]} vertices",
                    pos,
                )
            if any(perm[perm[i]] != i for i in range(len(perm))):
                raise GraphParseError(f"dual block at depth {d} is not an involution", pos)
            duals.append(perm)
        duals = tuple(duals)

    return BipartiteGraph(tuple(sizes), tuple(adjacency), duals)


def serialize(g: BipartiteGraph) -> str:
    """Serialize (canonical form); 'bwd...duals...' iff dual data is present."""
    g = canonicalize(g)
    if any(x > 9 for mat in g.adjacency for row in mat for x in row):
        raise EncodingError("edge multiplicity above 9 cannot be encoded")
    blocks = []
    for d, mat in enumerate(g.adjacency):
        cols = []
        for j in range(g.depth_sizes[d + 1]):
            cols.append("x".join(str(mat[i][j]) for i in range(g.depth_sizes[d])))
        blocks.append("p".join(cols))
    body = "v".join(blocks)
    if g.duals is None:
        return "gbg" + body
    dual_blocks = ["x".join(str(x + 1) for x in blk) for blk in g.duals]
    return "bwd" + body + "duals" + "v".join(dual_blocks)
