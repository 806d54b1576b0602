"""pgkit: principal graph combinatorics and diagram algebra at desk scale.

Modules by task: graphs (depth-graded multigraphs), codec (the compact
graph-string format), spectral (norms and Frobenius-Perron data),
obstructions (stability, spokes, quantum integers, quadratic tangles),
tl (Temperley-Lieb diagram algebra and train factorization), jellyfish
(closed-diagram evaluation), classify (weed enumeration), cli.
"""

__version__ = "0.1.0"

from .codec import parse, serialize
from .graphs import BipartiteGraph, GraphPair, a_chain, translate, truncate
from .obstructions import (
    is_spoke,
    is_stable_at,
    jellyfish_verdict,
    popa_prune,
    qt_identity_check,
    qt_obstruction,
    qt_residual,
    quantum_integer,
    stable_completion,
    tail_solve,
)
from .spectral import fp_weights, graph_norm, ray_family_norm, verify_eigenvector

__all__ = [
    "BipartiteGraph",
    "GraphPair",
    "a_chain",
    "parse",
    "serialize",
    "translate",
    "truncate",
    "graph_norm",
    "fp_weights",
    "verify_eigenvector",
    "ray_family_norm",
    "is_stable_at",
    "is_spoke",
    "tail_solve",
    "stable_completion",
    "popa_prune",
    "jellyfish_verdict",
    "quantum_integer",
    "qt_identity_check",
    "qt_residual",
    "qt_obstruction",
]
