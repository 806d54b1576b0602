"""Weed enumeration with spectral and stability pruning.

A weed is a fixed graph pair generating candidates by translation
(prepending an even path) and depth-by-depth extension.  The enumerator
walks candidates breadth-first and applies, in order: the norm bound
(monotone under extension, so it prunes whole subtrees), the stability
theorems, the spoke consequences for pairs whose annular multiplicities
are *10, and finally the quadratic-tangles obstruction on completed
candidates.  Once the principal graph is stable at two consecutive depths,
blind extension stops: the only legal continuations are finite tails, so
completions are generated directly by the tail search at a common norm.

External classification results are never used to eliminate: candidates
passing every internal rule are tagged needs_external unless they appear
in the classification's concluding pair list.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

from .codec import parse, serialize
from .errors import DomainError, ResourceError
from .graphs import (
    BipartiteGraph,
    GraphPair,
    canonical_key,
    extend_one_depth,
    is_isomorphic,
    is_path_graph,
    supertransitivity,
    translate,
    truncate,
)
from .obstructions import (
    ObstructionVerdict,
    complete_with_tails,
    is_spoke,
    is_stable_at,
    popa_prune,
    qt_obstruction,
    qt_ratio_from_pair,
)
from .spectral import graph_norm

DEFAULT_NODE_BUDGET = 10**6

# the *10 seeds: the quadruple-point-free pair and its reverse
ANNULAR_STAR10_PLUS = "gbg1v1p1v1x0p0x1"
ANNULAR_STAR10_MINUS = "gbg1v1p1v1x0p1x0"

# concluding pairs of the translated-extension classification
CONCLUSION_PAIRS = (
    (
        "bwd1v1v1v1p1v1x0p0x1v1x0p0x1duals1v1v1x2v2x1",
        "bwd1v1v1v1p1v1x0p1x0duals1v1v1x2",
    ),
    (
        "bwd1v1v1v1v1v1v1v1p1v1x0p0x1v1x0p0x1duals1v1v1v1v1x2v2x1",
        "bwd1v1v1v1v1v1v1v1p1v1x0p1x0duals1v1v1v1v1x2",
    ),
)


@dataclass(frozen=True)
class Weed:
    """A fixed subgraph pair plus enumeration bounds."""

    pair: GraphPair
    max_index: float
    max_depth: int
    max_new_vertices: int = 2
    max_mult: int = 1

    def __post_init__(self):
        if self.max_index <= 0 or self.max_depth <= 0 or self.max_new_vertices < 0:
            raise DomainError("weed bounds must be positive")
        if self.max_mult < 0 or self.max_mult > 9:
            raise DomainError("max multiplicity must be in 0..9")

    @classmethod
    def from_dict(cls, d):
        gp = GraphPair(parse(d["pair"][0]), parse(d["pair"][1]))
        return cls(
            gp,
            float(d["max_index"]),
            int(d["max_depth"]),
            int(d.get("max_new_vertices", 2)),
            int(d.get("max_mult", 1)),
        )


@dataclass
class SurvivorReport:
    pair: tuple  # (principal string, dual string)
    rules: list = field(default_factory=list)  # {"name", "status", "detail"}
    status: str = "survives"

    def add(self, name, status, detail=""):
        self.rules.append({"name": name, "status": status, "detail": detail})
        if status == "eliminated":
            self.status = "eliminated"

    def to_dict(self):
        return {"pair": list(self.pair), "rules": self.rules, "status": self.status}


def _pair_key(pair: GraphPair):
    return (serialize(pair.principal.without_duals()), serialize(pair.dual.without_duals()))


def is_star10_shaped(pair: GraphPair) -> bool:
    """Translated extension of the quadruple-point-free *10 seed pair."""
    gp, gd = pair.principal, pair.dual
    st = supertransitivity(gp)
    t = st - 1
    if t < 0 or t % 2:
        return False
    depth = t + 3
    if gp.max_depth < depth or gd.max_depth < depth:
        return False
    for sp, sd in (
        (ANNULAR_STAR10_PLUS, ANNULAR_STAR10_MINUS),
        (ANNULAR_STAR10_MINUS, ANNULAR_STAR10_PLUS),
    ):
        ref_p = translate(parse(sp), t)
        ref_d = translate(parse(sd), t)
        if is_isomorphic(truncate(gp, depth).without_duals(), ref_p) and is_isomorphic(
            truncate(gd, depth).without_duals(), ref_d
        ):
            return True
    return False


def _stability_trigger(gp: BipartiteGraph):
    """Smallest m with the principal graph stable at depths m and m+1.

    Both adjacency blocks must actually exist: stability into unknown
    territory is no evidence.  Returns None without a trigger.
    """
    for m in range(gp.max_depth - 1):
        if (
            is_stable_at(gp, m)
            and is_stable_at(gp, m + 1)
            and not is_path_graph(truncate(gp, m + 1))
        ):
            return m
    return None


def _norm_matched_completions(pair: GraphPair, weed: Weed, tol):
    """All tail completions of both graphs sharing one norm within bounds."""
    gp, gd = pair.principal.without_duals(), pair.dual.without_duals()
    room_p = weed.max_depth - gp.max_depth
    room_d = weed.max_depth - gd.max_depth
    if room_p < 0 or room_d < 0:
        return []
    outs = []
    seen = set()
    p_completions = {}
    for lengths in itertools.product(range(room_p + 1), repeat=gp.depth_sizes[-1]):
        cand = complete_with_tails(gp, lengths)
        key = canonical_key(cand)
        if key in p_completions:
            continue
        p_completions[key] = (cand, graph_norm(cand, tol * 1e-2))
    d_completions = {}
    for lengths in itertools.product(range(room_d + 1), repeat=gd.depth_sizes[-1]):
        cand = complete_with_tails(gd, lengths)
        key = canonical_key(cand)
        if key in d_completions:
            continue
        d_completions[key] = (cand, graph_norm(cand, tol * 1e-2))
    for cp, np_ in p_completions.values():
        if np_ * np_ > weed.max_index + tol:
            continue
        for cd, nd in d_completions.values():
            if abs(np_ - nd) <= tol * 10:
                newpair = GraphPair(cp, cd)
                key = _pair_key(newpair)
                if key not in seen:
                    seen.add(key)
                    outs.append(newpair)
    return outs


def _final_battery(pair: GraphPair, weed: Weed, star10: bool, tol) -> SurvivorReport:
    """Full rule battery for a completed candidate pair."""
    report = SurvivorReport(_pair_key(pair))
    gp, gd = pair.principal, pair.dual
    np_ = graph_norm(gp, tol * 1e-2)
    nd = graph_norm(gd, tol * 1e-2)
    if np_ * np_ > weed.max_index + tol or nd * nd > weed.max_index + tol:
        report.add(
            "norm-bound",
            "eliminated",
            f"norm^2 = {max(np_, nd) ** 2:.6f} exceeds {weed.max_index}",
        )
        return report
    report.add("norm-bound", "passed", f"norm^2 = {np_ ** 2:.6f}")
    if abs(np_ - nd) > tol * 10:
        report.add(
            "norm-pair-match",
            "eliminated",
            f"principal and dual norms differ: {np_:.8f} vs {nd:.8f}",
        )
        return report
    report.add("norm-pair-match", "passed", "")
    verdict = popa_prune(pair, max(gp.max_depth, gd.max_depth), max(np_, 2.0 + 1e-9), tail_check=False)
    if verdict.status == "eliminated":
        report.add(verdict.rule, "eliminated", verdict.note)
        return report
    report.add("stability", "passed", verdict.note)
    if star10:
        spoke_ok, _ = is_spoke(gp.without_duals())
        if not spoke_ok:
            report.add(
                "spoke-two-strand",
                "eliminated",
                "principal graph of a *10 pair must be a finite spoke",
            )
            return report
        report.add("spoke-two-strand", "passed", "")
        if np_ > 2 + 1e-9:
            n, delta, r = qt_ratio_from_pair(pair)
            qv, omega = qt_obstruction(n, delta, r, tol=tol)
            if qv.status == "eliminated":
                report.add("qt", "eliminated", qv.note)
                return report
            report.add("qt", "passed", qv.note)
    key = _pair_key(pair)
    for sp, sd in CONCLUSION_PAIRS:
        ref = (
            serialize(parse(sp).without_duals()),
            serialize(parse(sd).without_duals()),
        )
        if key == ref:
            report.status = "survives"
            report.add("conclusion", "survives", "appears in the concluding pair list")
            return report
    report.status = "needs_external"
    report.add(
        "conclusion",
        "needs_external",
        "eliminating this pair needs classification results beyond these obstructions",
    )
    return report


def classify_weed(weed: Weed, tol: float = 1e-9, node_budget: int | None = None):
    """Enumerate and prune every candidate generated by a weed.

    Returns a deterministic list of SurvivorReport, one per enumerated
    candidate (eliminated frontier states included).  Raises ResourceError
    carrying the partial report list when the node budget is exhausted.
    """
    if node_budget is None:
        node_budget = int(os.environ.get("PGKIT_NODE_BUDGET", DEFAULT_NODE_BUDGET))
    star10 = is_star10_shaped(weed.pair)
    weed_depth = max(weed.pair.principal.max_depth, weed.pair.dual.max_depth)
    reports = {}
    nodes = 0

    def emit(key, report):
        if key not in reports:
            reports[key] = report

    def overflow():
        raise ResourceError(
            "node budget exhausted; partial report attached",
            partial=sorted(reports.values(), key=lambda r: r.pair),
        )

    t = 0
    while weed_depth + t <= weed.max_depth:
        root = GraphPair(
            translate(weed.pair.principal, t), translate(weed.pair.dual, t)
        )
        if graph_norm(root.principal) ** 2 > weed.max_index + tol:
            break  # translation only deepens; the norm bound already fails
        frontier = [root]
        seen = {_pair_key(root)}
        while frontier:
            new_frontier = []
            for pair in frontier:
                nodes += 1
                if nodes > node_budget:
                    overflow()
                key = _pair_key(pair)
                gp, gd = pair.principal, pair.dual
                np_ = graph_norm(gp, tol * 1e-2)
                nd = graph_norm(gd, tol * 1e-2)
                if np_ * np_ > weed.max_index + tol or nd * nd > weed.max_index + tol:
                    rep = SurvivorReport(key)
                    rep.add(
                        "norm-bound",
                        "eliminated",
                        f"norm^2 = {max(np_, nd) ** 2:.6f} exceeds {weed.max_index}"
                        " (prunes all extensions)",
                    )
                    emit(key, rep)
                    continue
                verdict = popa_prune(
                    pair,
                    max(gp.max_depth, gd.max_depth),
                    max(np_, 2.0 + 1e-9),
                    tail_check=False,
                )
                if verdict.status == "eliminated":
                    rep = SurvivorReport(key)
                    rep.add(verdict.rule, "eliminated", verdict.note)
                    emit(key, rep)
                    continue
                if star10:
                    spoke_ok, _ = is_spoke(gp.without_duals())
                    if not spoke_ok:
                        rep = SurvivorReport(key)
                        rep.add(
                            "spoke-two-strand",
                            "eliminated",
                            "non-spoke principal extension of a *10 weed",
                        )
                        emit(key, rep)
                        continue
                    st = supertransitivity(gp)
                    bad = None
                    for kdep in range(st + 2, gd.max_depth):
                        if not is_stable_at(gd, kdep):
                            bad = kdep
                            break
                    if bad is not None:
                        rep = SurvivorReport(key)
                        rep.add(
                            "spoke-two-strand",
                            "eliminated",
                            f"dual graph of a *10 pair must be stable from depth"
                            f" {st + 2}; unstable at {bad}",
                        )
                        emit(key, rep)
                        continue
                trigger = _stability_trigger(gp)
                if trigger is not None:
                    # stability locks in: only tail completions continue
                    for comp in _norm_matched_completions(pair, weed, tol):
                        nodes += 1
                        if nodes > node_budget:
                            overflow()
                        emit(_pair_key(comp), _final_battery(comp, weed, star10, tol))
                    # show one depth of forbidden continuations explicitly
                    for ext in extend_one_depth(
                        gp.without_duals(), weed.max_new_vertices, weed.max_mult
                    ):
                        if ext.max_depth == gp.max_depth or is_stable_at(
                            ext, gp.max_depth
                        ):
                            continue
                        bad_pair_key = (
                            serialize(ext),
                            serialize(gd.without_duals()),
                        )
                        rep = SurvivorReport(bad_pair_key)
                        rep.add(
                            "stability-b",
                            "eliminated",
                            "stability at two consecutive depths forces finite"
                            " tails; this extension branches or doubles",
                        )
                        emit(bad_pair_key, rep)
                    continue
                emit(key, _final_battery(pair, weed, star10, tol))
                if gp.max_depth < weed.max_depth or gd.max_depth < weed.max_depth:
                    exts_p = (
                        extend_one_depth(
                            gp.without_duals(), weed.max_new_vertices, weed.max_mult
                        )
                        if gp.max_depth < weed.max_depth
                        else [gp.without_duals()]
                    )
                    exts_d = (
                        extend_one_depth(
                            gd.without_duals(), weed.max_new_vertices, weed.max_mult
                        )
                        if gd.max_depth < weed.max_depth
                        else [gd.without_duals()]
                    )
                    for ep in exts_p:
                        for ed in exts_d:
                            if ep.max_depth == gp.max_depth and ed.max_depth == gd.max_depth:
                                continue  # the unextended pair is this node
                            cand = GraphPair(ep, ed)
                            ck = _pair_key(cand)
                            if ck not in seen:
                                seen.add(ck)
                                new_frontier.append(cand)
            frontier = new_frontier
        t += 2
    return sorted(reports.values(), key=lambda r: r.pair)
