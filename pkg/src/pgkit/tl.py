"""Temperley-Lieb diagram algebra and the constructive train factorization.

Conventions
-----------
A diagram with b bottom and t top boundary points uses rectangle labels:
bottom 0..b-1 left to right, top b..b+t-1 left to right.  The disk
(cyclic) position of a label counts counterclockwise from the marked
interval at the top-left corner: bottom j -> j, top j -> b + (t-1-j).
Gap g sits between disk positions g-1 and g; gap 0 is the marked interval.

A pairing is planar when its chords are non-crossing in disk order.  Closed
loops formed during composition each contribute a factor of the loop
parameter delta.  Exact scalars are rational functions of delta
(``DeltaRat``); numeric mode fixes delta as a float carried by the element.

Trains live on a single "virtual circle": the external disk positions
0..2k-1 first, then one contiguous block of 2n points per car.  A block
lists the car's legs in reverse of the car's own counterclockwise order (an
inner boundary is traversed clockwise from outside), so block position j
glues to car disk position 2n-1-j, and the car's distinguished interval
faces the gap just after its block.  Factorization cuts the disk along
paths with prescribed crossing counts; a cut is executed one strand
crossing at a time by slitting from the current tip gap, which realizes
switch-backs without any global isotopy bookkeeping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, ValidationError
from .laurent import DeltaPoly, DeltaRat

# ---------------------------------------------------------------------------
# scalars


def scalar_one(delta):
    return 1.0 if delta is not None else DeltaRat.const(1)


def scalar_delta_power(delta, m):
    if delta is not None:
        return float(delta) ** m
    return DeltaRat(DeltaPoly([0] * m + [1]))


def scalar_is_zero(x, tol=0.0):
    if isinstance(x, DeltaRat):
        return x.is_zero()
    return abs(x) <= tol


def coerce_scalar(x, delta):
    if delta is None:
        if isinstance(x, DeltaRat):
            return x
        if isinstance(x, DeltaPoly):
            return DeltaRat(x)
        if isinstance(x, (int, Fraction)):
            return DeltaRat.const(x)
        raise DomainError(f"exact mode needs exact scalars, got {type(x).__name__}")
    if isinstance(x, DeltaRat):
        return x.evaluate(float(delta))
    if isinstance(x, complex):
        return x
    return float(x)


# ---------------------------------------------------------------------------
# diagrams


def _noncrossing_in_cyclic_order(chords):
    """Stack test; chords are (i, j) pairs with i < j in a linear order."""
    events = {}
    for i, j in chords:
        events.setdefault(i, []).append((j, "open"))
        events.setdefault(j, []).append((i, "close"))
    stack = []
    for pos in sorted(events):
        for other, kind in sorted(events[pos]):
            if kind == "close":
                if not stack or stack[-1] != pos:
                    return False
                stack.pop()
            else:
                stack.append(other)
    return not stack


def _label_at_disk(bottom, top, pos):
    if pos < bottom:
        return pos
    return bottom + (top - 1 - (pos - bottom))


@dataclass(frozen=True)
class TLDiagram:
    """Non-crossing perfect matching on b bottom and t top points."""

    bottom: int
    top: int
    pairs: frozenset  # frozenset of (i, j) tuples, i < j, rectangle labels
    shading: int = 1

    def __post_init__(self):
        pairs = frozenset(tuple(sorted(p)) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        n = self.bottom + self.top
        if n % 2:
            raise ValidationError("bottom + top must be even")
        seen = [False] * n
        for i, j in pairs:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(f"bad pair ({i},{j})")
            if seen[i] or seen[j]:
                raise ValidationError("pairing is not a perfect matching")
            seen[i] = seen[j] = True
        if not all(seen):
            raise ValidationError("pairing misses some boundary points")
        if self.shading not in (1, -1):
            raise ValidationError("shading must be +1 or -1")
        disk = [
            tuple(sorted((self.disk_position(i), self.disk_position(j))))
            for i, j in pairs
        ]
        if not _noncrossing_in_cyclic_order(disk):
            raise ValidationError("pairing is not planar")

    def disk_position(self, label):
        if label < self.bottom:
            return label
        return self.bottom + (self.top - 1 - (label - self.bottom))

    def label_at_disk(self, pos):
        return _label_at_disk(self.bottom, self.top, pos)

    def partner(self):
        out = {}
        for i, j in self.pairs:
            out[i] = j
            out[j] = i
        return out

    @classmethod
    def identity(cls, k, shading=1):
        return cls(k, k, frozenset((i, k + i) for i in range(k)), shading)

    @classmethod
    def from_disk_pairs(cls, bottom, top, disk_pairs, shading=1):
        pairs = frozenset(
            tuple(
                sorted(
                    (
                        _label_at_disk(bottom, top, a),
                        _label_at_disk(bottom, top, b),
                    )
                )
            )
            for a, b in disk_pairs
        )
        return cls(bottom, top, pairs, shading)

    def __repr__(self):
        ps = sorted(self.pairs)
        return f"TL({self.bottom},{self.top};{ps})"


def _noncrossing_matchings(points):
    """All non-crossing perfect matchings of a list of positions."""
    if not points:
        yield []
        return
    first = points[0]
    for idx in range(1, len(points), 2):
        inner = points[1:idx]
        outer = points[idx + 1 :]
        for mi in _noncrossing_matchings(inner):
            for mo in _noncrossing_matchings(outer):
                yield [(first, points[idx])] + mi + mo


def enumerate_diagrams(k, shading=1):
    """Basis of TL_k: all Catalan(k) planar pairings on k bottom, k top points."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    return [
        TLDiagram.from_disk_pairs(k, k, match, shading)
        for match in _noncrossing_matchings(list(range(2 * k)))
    ]


def catalan(k):
    out = 1
    for i in range(k):
        out = out * 2 * (2 * i + 1) // (i + 2)
    return out


# ---------------------------------------------------------------------------
# gluing: the one primitive behind composition, traces, caps and plugging


def contract(arcs, identifications):
    """Glue arcs along identification pairs.

    arcs: 2-tuples over hashable labels (a perfect matching of its support).
    identifications: 2-tuples gluing label to label.  Returns
    (remaining_pairs, loops): the induced matching on unglued labels plus
    the number of closed loops formed.
    """
    arc_partner = {}
    for a, b in arcs:
        arc_partner[a] = b
        arc_partner[b] = a
    glue = {}
    for a, b in identifications:
        glue[a] = b
        glue[b] = a
    visited = set()
    out = []
    for start in arc_partner:
        if start in glue or start in visited:
            continue
        visited.add(start)
        cur = arc_partner[start]
        while cur in glue:
            visited.add(cur)
            cur = glue[cur]
            visited.add(cur)
            cur = arc_partner[cur]
        visited.add(cur)
        out.append((start, cur))
    # out records each open strand twice (once per endpoint); dedupe
    seen = set()
    dedup = []
    for a, b in out:
        key = frozenset((a, b))
        if key not in seen:
            seen.add(key)
            dedup.append((a, b))
    loops = 0
    for x in glue:
        if x in visited:
            continue
        loops += 1
        cur = x
        while cur not in visited:
            visited.add(cur)
            nxt = glue[cur]
            visited.add(nxt)
            cur = arc_partner[nxt]
    return dedup, loops


# ---------------------------------------------------------------------------
# elements


class TLElement:
    """Formal linear combination of diagrams sharing (bottom, top, shading).

    delta=None means exact mode (DeltaRat scalars); a float delta fixes the
    loop parameter numerically.
    """

    __slots__ = ("bottom", "top", "shading", "delta", "terms")

    def __init__(self, bottom, top, terms=None, delta=None, shading=1):
        self.bottom = bottom
        self.top = top
        self.shading = shading
        self.delta = delta
        self.terms = {}
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for d, c in items:
                self._accumulate(d, coerce_scalar(c, delta))

    def _accumulate(self, diagram, coeff):
        if diagram.bottom != self.bottom or diagram.top != self.top:
            raise DomainError("diagram shape mismatch")
        cur = self.terms.get(diagram)
        new = coeff if cur is None else cur + coeff
        if scalar_is_zero(new):
            self.terms.pop(diagram, None)
        else:
            self.terms[diagram] = new

    @classmethod
    def from_diagram(cls, d, delta=None, coeff=1):
        return cls(d.bottom, d.top, [(d, coeff)], delta, d.shading)

    @classmethod
    def zero(cls, bottom, top, delta=None, shading=1):
        return cls(bottom, top, None, delta, shading)

    @classmethod
    def identity(cls, k, delta=None, shading=1):
        return cls.from_diagram(TLDiagram.identity(k, shading), delta)

    def copy(self):
        out = TLElement.zero(self.bottom, self.top, self.delta, self.shading)
        out.terms = dict(self.terms)
        return out

    def label_at_disk(self, pos):
        return _label_at_disk(self.bottom, self.top, pos)

    def __add__(self, other):
        self._check_compatible(other)
        out = self.copy()
        for d, c in other.terms.items():
            out._accumulate(d, c)
        return out

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        c = coerce_scalar(c, self.delta)
        out = TLElement.zero(self.bottom, self.top, self.delta, self.shading)
        for d, x in self.terms.items():
            v = x * c
            if not scalar_is_zero(v):
                out.terms[d] = v
        return out

    def with_shading(self, shading):
        out = TLElement.zero(self.bottom, self.top, self.delta, shading)
        for d, c in self.terms.items():
            out.terms[TLDiagram(d.bottom, d.top, d.pairs, shading)] = c
        return out

    def _check_compatible(self, other):
        if (self.bottom, self.top, self.shading) != (
            other.bottom,
            other.top,
            other.shading,
        ):
            raise DomainError("element shape/shading mismatch")
        if not _same_delta(self.delta, other.delta):
            raise DomainError("mixed scalar modes")

    def is_zero(self, tol=0.0):
        return all(scalar_is_zero(c, tol) for c in self.terms.values())

    def equals(self, other, tol=0.0):
        self._check_compatible(other)
        return (self - other).is_zero(tol)

    def __repr__(self):
        if not self.terms:
            return f"TLElement(0; {self.bottom}->{self.top})"
        bits = [
            f"({c!r})*{d!r}"
            for d, c in sorted(self.terms.items(), key=lambda t: sorted(t[0].pairs))
        ]
        return " + ".join(bits)


def _same_delta(a, b):
    if a is None or b is None:
        return a is None and b is None
    return float(a) == float(b)


def _compose_diagrams(a: TLDiagram, b: TLDiagram):
    """Stack b on top of a (a.top glued to b.bottom); returns (diagram, loops)."""
    arcs = [(("a", i), ("a", j)) for i, j in a.pairs]
    arcs += [(("b", i), ("b", j)) for i, j in b.pairs]
    ident = [(("a", a.bottom + i), ("b", i)) for i in range(a.top)]
    glued, loops = contract(arcs, ident)
    relabel = {}
    for i in range(a.bottom):
        relabel[("a", i)] = i
    for j in range(b.top):
        relabel[("b", b.bottom + j)] = a.bottom + j
    pairs = frozenset(tuple(sorted((relabel[x], relabel[y]))) for x, y in glued)
    return TLDiagram(a.bottom, b.top, pairs, a.shading), loops


def multiply(a: TLElement, b: TLElement) -> TLElement:
    """Vertical stacking of b atop a; closed loops contribute delta each."""
    if a.top != b.bottom:
        raise DomainError(f"cannot stack: a.top={a.top} != b.bottom={b.bottom}")
    if a.shading != b.shading:
        raise DomainError("shading mismatch")
    if not _same_delta(a.delta, b.delta):
        raise DomainError("mixed scalar modes")
    out = TLElement.zero(a.bottom, b.top, a.delta, a.shading)
    for da, ca in a.terms.items():
        for db, cb in b.terms.items():
            d, loops = _compose_diagrams(da, db)
            coeff = ca * cb
            if loops:
                coeff = coeff * scalar_delta_power(a.delta, loops)
            out._accumulate(d, coeff)
    return out


def tensor(a: TLElement, b: TLElement) -> TLElement:
    """Horizontal juxtaposition (a left, b right)."""
    if not _same_delta(a.delta, b.delta):
        raise DomainError("mixed scalar modes")
    bottom, top = a.bottom + b.bottom, a.top + b.top
    out = TLElement.zero(bottom, top, a.delta, a.shading)
    for da, ca in a.terms.items():

        def mv_a(x):
            return x if x < da.bottom else x + b.bottom

        base = [tuple(sorted((mv_a(i), mv_a(j)))) for i, j in da.pairs]
        for db, cb in b.terms.items():

            def mv_b(x):
                return a.bottom + x if x < db.bottom else a.bottom + a.top + x

            pairs = frozenset(
                base + [tuple(sorted((mv_b(i), mv_b(j)))) for i, j in db.pairs]
            )
            out._accumulate(TLDiagram(bottom, top, pairs, a.shading), ca * cb)
    return out


def _cup_cap_diagram(k, i, shading=1):
    """The unnormalized diagram E_i = delta * e_i (cap and cup at strands i, i+1)."""
    pairs = set()
    for j in range(k):
        if j not in (i - 1, i):
            pairs.add((j, k + j))
    pairs.add((i - 1, i))
    pairs.add((k + i - 1, k + i))
    return TLDiagram(k, k, frozenset(pairs), shading)


def jones_projection(k, i, delta=None, shading=1) -> TLElement:
    """e_i = delta^-1 E_i, 1 <= i <= k-1; idempotent."""
    if not (1 <= i <= k - 1):
        raise DomainError(f"e_{i} undefined in TL_{k}")
    d = _cup_cap_diagram(k, i, shading)
    if delta is None:
        coeff = DeltaRat(DeltaPoly.const(1), DeltaPoly.x())
    else:
        if abs(delta) < 1e-12:
            raise DomainError("delta = 0 has no Jones projection")
        coeff = 1.0 / float(delta)
    return TLElement.from_diagram(d, delta, coeff)


_JW_CACHE = {}


def jones_wenzl(k, delta=None, shading=1) -> TLElement:
    """f^(k) by the Wenzl recursion f^(k) = f' - ([k-1]/[k]) f' e_{k-1} f'.

    f' is f^(k-1) with one strand added on the right.  Numeric mode raises
    on a vanishing quantum integer (possible only when delta <= 2).
    """
    key = (k, None if delta is None else float(delta), shading)
    if key in _JW_CACHE:
        return _JW_CACHE[key]
    if k < 1:
        raise DomainError("jones_wenzl needs k >= 1")
    if k == 1:
        out = TLElement.identity(1, delta, shading)
    else:
        from .laurent import quantum_integer_delta, quantum_integer_value

        prev = jones_wenzl(k - 1, delta, shading)
        fp = tensor(prev, TLElement.identity(1, delta, shading))
        # recursion against the unnormalized cup-cap E = delta * e:
        # f^(k) = f' - ([k-1]/[k]) f' E_{k-1} f'
        if delta is None:
            coeff = DeltaRat(quantum_integer_delta(k - 1)) / DeltaRat(
                quantum_integer_delta(k)
            )
        else:
            import cmath

            d = float(delta)
            qc = (d + cmath.sqrt(complex(d * d - 4))) / 2
            val = quantum_integer_value(k, qc)
            if abs(val) < 1e-9:
                raise DomainError(f"[{k}] vanishes at delta={d}: Jones-Wenzl pole")
            coeff = (quantum_integer_value(k - 1, qc) / val).real
        mid = multiply(
            fp, TLElement.from_diagram(_cup_cap_diagram(k, k - 1, shading), delta)
        )
        mid = multiply(mid, fp)
        out = fp - mid.scale(coeff)
    _JW_CACHE[key] = out
    return out


def clear_denominators(x: TLElement):
    """Scale an exact element by the lcm of its coefficient denominators.

    Returns (scaled element, lcm as DeltaRat); the scaled coefficients are
    integer polynomials, which keeps large products cheap.
    """
    if x.delta is not None:
        raise DomainError("clear_denominators applies to exact elements")
    from .laurent import _poly_gcd

    lcm = DeltaPoly.const(1)
    for c in x.terms.values():
        g = _poly_gcd(lcm, c.den)
        quo, rem = c.den.divmod(g)
        assert rem.is_zero()
        lcm = lcm * quo
    scale = DeltaRat(lcm)
    return x.scale(scale), scale


def conditional_expectation(x: TLElement) -> TLElement:
    """Close the rightmost strand (partial trace); one fewer strand each side."""
    if x.bottom < 1 or x.top < 1:
        raise DomainError("nothing to close")
    out = TLElement.zero(x.bottom - 1, x.top - 1, x.delta, x.shading)
    for d, c in x.terms.items():
        arcs = [((0, i), (0, j)) for i, j in d.pairs]
        glued, loops = contract(
            arcs, [((0, d.bottom - 1), (0, d.bottom + d.top - 1))]
        )
        relabel = {}
        for i in range(d.bottom - 1):
            relabel[(0, i)] = i
        for j in range(d.top - 1):
            relabel[(0, d.bottom + j)] = (d.bottom - 1) + j
        pairs = frozenset(tuple(sorted((relabel[a], relabel[b]))) for a, b in glued)
        coeff = c if not loops else c * scalar_delta_power(x.delta, loops)
        out._accumulate(TLDiagram(d.bottom - 1, d.top - 1, pairs, d.shading), coeff)
    return out


def rotate(x: TLElement) -> TLElement:
    """One-click rotation: disk positions shift by +1; shading flips."""
    if x.bottom != x.top:
        raise DomainError("rotation needs equal top and bottom arity")
    k = x.bottom
    out = TLElement.zero(k, k, x.delta, -x.shading)
    m = 2 * k
    for d, c in x.terms.items():
        disk_pairs = [
            ((d.disk_position(i) - 1) % m, (d.disk_position(j) - 1) % m)
            for i, j in d.pairs
        ]
        out._accumulate(TLDiagram.from_disk_pairs(k, k, disk_pairs, -d.shading), c)
    return out


def trace_close(x: TLElement):
    """Close top i to bottom i around the right; returns a scalar."""
    if x.bottom != x.top:
        raise DomainError("closure needs equal top and bottom arity")
    total = DeltaRat.const(0) if x.delta is None else 0.0
    for d, c in x.terms.items():
        arcs = [((0, i), (0, j)) for i, j in d.pairs]
        ident = [((0, i), (0, d.bottom + i)) for i in range(d.bottom)]
        _, loops = contract(arcs, ident)
        total = total + c * scalar_delta_power(x.delta, loops)
    return total


def cap_at_disk(x: TLElement, pos: int) -> TLElement:
    """Cap the adjacent boundary points at disk positions pos and pos+1.

    The wrap position (the pair flanking the marked interval) is excluded;
    reach it by rotating first.
    """
    m = x.bottom + x.top
    if not (0 <= pos < m - 1):
        raise DomainError(f"cap position {pos} out of range (wrap cap not allowed)")
    la = x.label_at_disk(pos)
    lb = x.label_at_disk(pos + 1)
    if pos <= x.bottom - 2:
        new_bottom = x.bottom - 2
    elif pos >= x.bottom:
        new_bottom = x.bottom
    else:
        new_bottom = x.bottom - 1
    new_top = m - 2 - new_bottom
    keep = [p for p in range(m) if p not in (pos, pos + 1)]
    out = TLElement.zero(new_bottom, new_top, x.delta, x.shading)
    for d, c in x.terms.items():
        arcs = [((0, i), (0, j)) for i, j in d.pairs]
        glued, loops = contract(arcs, [((0, la), (0, lb))])
        relabel = {}
        for newpos, p in enumerate(keep):
            relabel[(0, d.label_at_disk(p))] = _label_at_disk(
                new_bottom, new_top, newpos
            )
        pairs = frozenset(tuple(sorted((relabel[a], relabel[b]))) for a, b in glued)
        coeff = c if not loops else c * scalar_delta_power(x.delta, loops)
        out._accumulate(TLDiagram(new_bottom, new_top, pairs, d.shading), coeff)
    return out


# ---------------------------------------------------------------------------
# dual-tree metric on the regions of a diagram


def _gap_inside(chord, gap):
    a, b = chord
    return a < gap <= b


def dual_tree_distance(T: TLDiagram, gap_x: int, gap_y: int) -> int:
    """Minimal strand crossings of a path between two boundary gaps.

    Gaps are numbered like disk positions: gap g precedes disk position g;
    gap 0 is the marked interval.  A chord separates two gaps exactly when
    one of them lies in its span, and the separating count equals the graph
    metric on the dual tree.
    """
    m = T.bottom + T.top
    for g in (gap_x, gap_y):
        if not (0 <= g < max(m, 1)):
            raise DomainError(f"gap {g} does not exist")
    chords = [
        tuple(sorted((T.disk_position(i), T.disk_position(j)))) for i, j in T.pairs
    ]
    return sum(1 for c in chords if _gap_inside(c, gap_x) != _gap_inside(c, gap_y))


def tree_lemma_holds(tree_adj, x_points, p, n, k):
    """Audit of the tree-metric fact behind the train factorization.

    tree_adj: adjacency list/dict of a tree.  Returns True when the
    conclusion (d(x_0, x_last) <= 2n, or some interior d(x_i, p) <= k)
    holds, and None (no verdict) when the hypotheses fail.
    """
    import collections

    def bfs(src):
        dist = {src: 0}
        dq = collections.deque([src])
        while dq:
            u = dq.popleft()
            for v in tree_adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    dq.append(v)
        return dist

    dists = {v: bfs(v) for v in set(x_points) | {p}}
    ell = len(x_points) - 1
    if ell < 1:
        return True
    for i in range(ell):
        if dists[x_points[i]][x_points[i + 1]] > 2 * n:
            return None
    if dists[x_points[0]][p] > k or dists[x_points[-1]][p] > k:
        return None
    if dists[x_points[0]][x_points[-1]] <= 2 * n:
        return True
    return any(dists[x_points[i]][p] <= k for i in range(1, ell))


# ---------------------------------------------------------------------------
# the slit cutter


class _CutState:
    """A disk being slit open along a path, one strand crossing at a time.

    boundary: labels in ccw order.  partner: current strand matching.
    tip: gap index (gap g sits before boundary[g]).  Slitting a strand that
    borders the tip region severs it, inserts the two cut walls at the tip,
    and moves the tip just past the severed strand.
    """

    def __init__(self, boundary, partner, tip_gap=0):
        self.boundary = list(boundary)
        self.partner = dict(partner)
        self.tip = tip_gap
        self.steps = 0

    def clone(self):
        c = _CutState(self.boundary, self.partner, self.tip)
        c.steps = self.steps
        return c

    def _chords(self):
        pos = {lbl: i for i, lbl in enumerate(self.boundary)}
        seen = set()
        out = []
        for a, b in self.partner.items():
            key = frozenset((a, b))
            if key in seen:
                continue
            seen.add(key)
            out.append((tuple(sorted((pos[a], pos[b]))), (a, b)))
        return out

    def sep(self, g1, g2):
        return sum(
            1 for c, _ in self._chords() if _gap_inside(c, g1) != _gap_inside(c, g2)
        )

    def gap_before(self, label):
        return self.boundary.index(label)

    def incident_strands(self, gap):
        """Strands bordering the region of `gap`, deterministic order."""
        n = len(self.boundary)
        out = []
        for c, ab in self._chords():
            a, b = c
            if self.sep(gap, a + 1) == 0 or self.sep(gap, (b + 1) % n) == 0:
                out.append((c, ab))
        out.sort(key=lambda t: t[0])
        return [ab for _, ab in out]

    def slit(self, strand):
        """Cross one strand from the tip region."""
        p, q = strand
        if self.partner.get(p) != q:
            raise ValidationError("slit target is not a current strand")
        n = len(self.boundary)
        # first endpoint reached counterclockwise from the tip gap
        p_tilde = None
        for off in range(n):
            lbl = self.boundary[(self.tip + off) % n]
            if lbl == p or lbl == q:
                p_tilde = lbl
                break
        q_tilde = q if p_tilde == p else p
        self.steps += 1
        u_p = ("cut", self.steps, "P")
        u_q = ("cut", self.steps, "Q")
        self.boundary[self.tip : self.tip] = [u_q, u_p]
        del self.partner[p_tilde], self.partner[q_tilde]
        self.partner[u_p] = p_tilde
        self.partner[p_tilde] = u_p
        self.partner[u_q] = q_tilde
        self.partner[q_tilde] = u_q
        self.tip += 1

    def separate(self, end_label):
        """Split at the tip gap and the gap before end_label.

        Returns two (boundary_list, partner) pieces, boundaries read ccw
        from the cut seam.
        """
        end_idx = self.boundary.index(end_label)
        if self.sep(self.tip, end_idx) != 0:
            raise ValidationError("tip and target gap are in different regions")
        if self.tip <= end_idx:
            items1 = self.boundary[self.tip : end_idx]
            items2 = self.boundary[end_idx:] + self.boundary[: self.tip]
        else:
            items1 = self.boundary[self.tip :] + self.boundary[:end_idx]
            items2 = self.boundary[end_idx : self.tip]
        set1 = set(items1)
        pieces = []
        for items in (items1, items2):
            part = {}
            for lbl in items:
                mate = self.partner[lbl]
                if (lbl in set1) != (mate in set1):
                    raise ValidationError("a strand crosses the separation line")
                part[lbl] = mate
            pieces.append((items, part))
        return pieces


def _cut_search(state: _CutState, end_label, remaining, continuation=None):
    """Drive the tip to the target region in exactly `remaining` crossings.

    On arrival the optional continuation runs on the mutated state; a False
    return backtracks into other routings (the factorization needs this:
    later cuts constrain earlier ones, like the simultaneously drawn legs
    of the tree-metric argument).
    """
    target = state.gap_before(end_label)
    s = state.sep(state.tip, target)
    if remaining == 0:
        if s != 0:
            return False
        return True if continuation is None else continuation(state)
    if s > remaining or (remaining - s) % 2:
        return False
    trials = []
    for strand in state.incident_strands(state.tip):
        trial = state.clone()
        trial.slit(strand)
        s2 = trial.sep(trial.tip, trial.gap_before(end_label))
        if s2 > remaining - 1 or (remaining - 1 - s2) % 2:
            continue
        trials.append((s2, trial))
    trials.sort(key=lambda t: t[0])  # geodesic moves first
    for _, trial in trials:
        if _cut_search(trial, end_label, remaining - 1, continuation):
            state.boundary = trial.boundary
            state.partner = trial.partner
            state.tip = trial.tip
            state.steps = trial.steps
            return True
    return False


def cut_exactly(state: _CutState, start_gap, end_label, length):
    """Cut from start_gap to the gap before end_label with `length` crossings."""
    state.tip = start_gap
    if not _cut_search(state, end_label, length):
        raise ValidationError(
            f"no cut of length {length} from gap {start_gap} to the target gap"
        )
    return state.separate(end_label)


def _cut_search_then(state: _CutState, via_label, remaining, continuation):
    """Spend exactly `remaining` crossings reaching the region of the gap
    before via_label, then run the continuation search on the mutated state."""
    return _cut_search(state, via_label, remaining, continuation)


def _unique_pairs(partner_dict):
    seen = set()
    for a, b in partner_dict.items():
        key = frozenset((a, b))
        if key in seen:
            continue
        seen.add(key)
        yield a, b


# ---------------------------------------------------------------------------
# trains (instantiated cars) and the factorization


@dataclass(frozen=True)
class Train:
    """A k-box train: virtual-circle pairing plus TL-instantiated n-box cars.

    Labels 0..2k-1 are the external disk positions; car i (0-based) occupies
    labels 2k + 2n*i .. 2k + 2n*(i+1) - 1.  Block position j holds the
    car's disk position 2n-1-j, and each car's distinguished interval faces
    the gap just after its block (the gap after the last block is the
    marked interval itself).
    """

    k: int
    n: int
    pairing: frozenset
    cars: tuple

    def __post_init__(self):
        pairs = frozenset(tuple(sorted(p)) for p in self.pairing)
        object.__setattr__(self, "pairing", pairs)
        object.__setattr__(self, "cars", tuple(self.cars))
        m = 2 * self.k + 2 * self.n * len(self.cars)
        support = sorted(x for p in pairs for x in p)
        if support != list(range(m)):
            raise ValidationError("train pairing must cover the virtual circle exactly")
        if not _noncrossing_in_cyclic_order(sorted(pairs)):
            raise ValidationError("train pairing is not planar")
        for c in self.cars:
            if c.bottom != self.n or c.top != self.n:
                raise ValidationError("cars must be n-boxes")

    @property
    def num_cars(self):
        return len(self.cars)

    def block_range(self, i):
        start = 2 * self.k + 2 * self.n * i
        return range(start, start + 2 * self.n)

    def instantiate(self) -> TLElement:
        """Glue every car into the virtual circle; a k-box element results."""
        delta = self.cars[0].delta if self.cars else None
        out = TLElement.zero(self.k, self.k, delta)
        combos = [list(c.terms.items()) for c in self.cars]
        for choice in itertools.product(*combos) if combos else [()]:
            arcs = [(("t", a), ("t", b)) for a, b in self.pairing]
            ident = []
            coeff = scalar_one(delta)
            for i, (d, c) in enumerate(choice):
                coeff = coeff * c
                for j, lbl in enumerate(self.block_range(i)):
                    carpos = 2 * self.n - 1 - j
                    ident.append((("t", lbl), ("car", i, d.label_at_disk(carpos))))
                arcs += [(("car", i, a), ("car", i, b)) for a, b in d.pairs]
            glued, loops = contract(arcs, ident)
            if loops:
                coeff = coeff * scalar_delta_power(delta, loops)
            disk_pairs = [(a[1], b[1]) for a, b in glued]
            out._accumulate(
                TLDiagram.from_disk_pairs(self.k, self.k, disk_pairs), coeff
            )
        return out


def identity_train(element: TLElement) -> Train:
    """The 1-car train wiring the car straight to the boundary (k = n)."""
    n = element.bottom
    pairing = frozenset((d, 2 * n + (2 * n - 1 - d)) for d in range(2 * n))
    return Train(n, n, pairing, (element,))


def multiply_word(factors):
    """Multiply a factor word bottom-to-top.

    Factors are ('tl', TLElement) or ('box', TLElement, k): an n-box
    included into TL_k by adding k - n strands on the right.
    """
    out = None
    for f in factors:
        if f[0] == "tl":
            elem = f[1]
        else:
            _, box, k = f
            elem = tensor(
                box, TLElement.identity(k - box.bottom, box.delta, box.shading)
            )
        out = elem if out is None else multiply(out, elem)
    return out


def _train_state(train: Train):
    boundary = list(range(2 * train.k + 2 * train.n * train.num_cars))
    partner = {}
    for a, b in train.pairing:
        partner[a] = b
        partner[b] = a
    return _CutState(boundary, partner, 0)


def _walls_by_step(items):
    return sorted(
        (l for l in items if isinstance(l, tuple) and l[0] == "cut"),
        key=lambda t: t[1],
    )


def factor_train(train: Train, n=None, k=None, validate=True):
    """Factor a train into a word alternating TL_k elements and n-boxes.

    The base case cuts the disk twice: once from the bottom-left corner
    through a Y-point to the right edge (k crossings), once more to shave
    the car down to an n-box over the first n strands (n crossings).
    Multi-car trains split by whichever tree-lemma case applies and recurse.
    The product of the returned word equals the instantiated train exactly
    (checked when validate is set).
    """
    n = train.n if n is None else n
    k = train.k if k is None else k
    if k <= n:
        raise DomainError("factorization needs k > n")
    if (train.n, train.k) != (n, k):
        raise DomainError("train shape disagrees with n, k")
    word = _factor_rec(train, train.cars[0].delta if train.cars else None)
    if validate:
        direct = train.instantiate()
        prod = multiply_word(word)
        tol = 0.0 if direct.delta is None else 1e-9
        if prod is None or not prod.equals(direct, tol):
            raise ValidationError("factorization failed to reproduce the train")
    return word


def _factor_rec(train: Train, delta):
    if train.num_cars == 0:
        d = TLDiagram.from_disk_pairs(train.k, train.k, list(train.pairing))
        return [("tl", TLElement.from_diagram(d, delta))]
    if train.num_cars == 1:
        return _factor_base(train)
    return _factor_multi(train)


def _is_wall(label):
    return isinstance(label, tuple) and label[0] == "cut"


def _rotate_to(items, predicate):
    """Rotate a cyclic list so the first item satisfying predicate leads."""
    for i, l in enumerate(items):
        if predicate(l):
            return items[i:] + items[:i]
    raise ValidationError("rotation anchor not found in piece")


def _rotate_to_wall_run(items):
    """Rotate so the contiguous run of cut walls starts the list."""
    m = len(items)
    for i in range(m):
        if _is_wall(items[i]) and not _is_wall(items[(i - 1) % m]):
            return items[i:] + items[:i]
    raise ValidationError("piece has no cut walls")


def _piece_to_tl_bottom(piece, k, delta):
    """The A piece: bottom externals 0..k-1 plus the k cut walls as its top.

    The piece's boundary list is its ccw disk order; rotating it to start
    at external 0 must read [0..k-1, wall run], and disk position = index.
    """
    items, part = piece
    rotated = _rotate_to(items, lambda l: l == 0)
    if rotated[:k] != list(range(k)) or not all(_is_wall(l) for l in rotated[k:]):
        raise ValidationError("A piece has unexpected boundary structure")
    disk = {lbl: i for i, lbl in enumerate(rotated)}
    disk_pairs = [(disk[a], disk[b]) for a, b in _unique_pairs(part)]
    return TLElement.from_diagram(TLDiagram.from_disk_pairs(k, k, disk_pairs), delta)


def _piece_to_train(piece, train, bottom_side):
    """Rebuild a cut piece as a train; the cut walls become external points.

    bottom_side pieces read [ext bottom 0..k-1, walls as the top, blocks];
    top-side pieces read [walls as the bottom, ext top, blocks] after
    rotating to the wall run.  Cars are renumbered in order of appearance.
    """
    k, n = train.k, train.n
    items, part = piece
    if bottom_side:
        rotated = _rotate_to(items, lambda l: l == 0)
    else:
        rotated = _rotate_to_wall_run(items)
    # external positions: the first 2k items; blocks trail
    relabel = {}
    walls = 0
    for idx, lbl in enumerate(rotated[: 2 * k]):
        if _is_wall(lbl):
            walls += 1
        else:
            if not (isinstance(lbl, int) and lbl < 2 * k and idx == lbl):
                raise ValidationError("externals out of position in cut piece")
        relabel[lbl] = idx
    if walls != k:
        raise ValidationError(f"expected {k} cut walls, found {walls}")
    tail = rotated[2 * k :]
    if len(tail) % (2 * n):
        raise ValidationError("car legs are not contiguous in the cut piece")
    old_blocks = []
    for pos, lbl in enumerate(tail):
        relabel[lbl] = 2 * k + pos
        if pos % (2 * n) == 0:
            if not (isinstance(lbl, int) and lbl >= 2 * k):
                raise ValidationError("block boundary misaligned in cut piece")
            old_i = (lbl - 2 * k) // (2 * n)
            old_blocks.append(old_i)
            expected = list(train.block_range(old_i))
            if tail[pos : pos + 2 * n] != expected:
                raise ValidationError("car legs reordered by the cut")
    pairing = frozenset(
        tuple(sorted((relabel[a], relabel[b]))) for a, b in _unique_pairs(part)
    )
    cars = tuple(train.cars[i] for i in old_blocks)
    return Train(k, n, pairing, cars)


def _instantiate_piece_as_box(piece, train, n, delta):
    """Glue every car inside a cut piece; the surviving points become an n-box.

    The box's disk order is the piece's list order, rotated to start at the
    smallest external strand if any survive, else at the wall run.
    """
    items, part = piece
    ints = sorted(l for l in items if isinstance(l, int))
    if ints:
        rotated = _rotate_to(items, lambda l: l == ints[0])
    else:
        rotated = _rotate_to_wall_run(items)
    kept = [l for l in rotated if _is_wall(l) or isinstance(l, int) and l < 2 * train.k]
    boundary_order = [l for l in rotated if not (isinstance(l, int) and l >= 2 * train.k)]
    if len(boundary_order) != 2 * n:
        raise ValidationError("piece does not close up to an n-box")
    car_indices = sorted(
        {(l - 2 * train.k) // (2 * train.n) for l in items if isinstance(l, int) and l >= 2 * train.k}
    )
    combos = [list(train.cars[i].terms.items()) for i in car_indices]
    out = TLElement.zero(n, n, delta)
    for choice in itertools.product(*combos) if combos else [()]:
        arcs = [(("t", a), ("t", b)) for a, b in _unique_pairs(part)]
        ident = []
        coeff = scalar_one(delta)
        for idx, (d, c) in zip(car_indices, choice):
            coeff = coeff * c
            for jj, lbl in enumerate(train.block_range(idx)):
                carpos = 2 * train.n - 1 - jj
                ident.append((("t", lbl), ("car", idx, d.label_at_disk(carpos))))
            arcs += [(("car", idx, a), ("car", idx, b)) for a, b in d.pairs]
        glued, loops = contract(arcs, ident)
        if loops:
            coeff = coeff * scalar_delta_power(delta, loops)
        disk = {("t", lbl): i for i, lbl in enumerate(boundary_order)}
        disk_pairs = [(disk[a], disk[b]) for a, b in glued]
        out._accumulate(TLDiagram.from_disk_pairs(n, n, disk_pairs), coeff)
    return out


def _factor_multi(train: Train):
    k, n = train.k, train.n
    ell = train.num_cars
    delta = train.cars[0].delta
    state = _train_state(train)

    def x_gap(j):
        # proof coordinate: cars count bottom-to-top = reverse block order
        return 0 if j == 0 else 2 * k + 2 * n * (ell - j)

    if state.sep(x_gap(0), x_gap(ell)) <= 2 * n:
        return _factor_case1(train, state)
    for j in range(1, ell):
        if state.sep(x_gap(j), k) <= k:
            return _factor_case2(train, state, j)
    raise ValidationError("tree lemma violated: no factorization case applies")


def _factor_case1(train: Train, state):
    """All cars merge into one composite n-box car (d(x_0, x_ell) <= 2n)."""
    k, n = train.k, train.n
    delta = train.cars[0].delta
    end_label = state.boundary[2 * k]  # first leg of block 0; gap before it is x_ell
    piece_tip, piece_far = cut_exactly(state, 0, end_label, 2 * n)
    if any(isinstance(l, int) and l >= 2 * k for l in piece_tip[0]):
        piece_cars, piece_ext = piece_tip, piece_far
    else:
        piece_cars, piece_ext = piece_far, piece_tip
    new_car = _instantiate_piece_as_box(piece_cars, train, n, delta)
    items, part = piece_ext
    rotated = _rotate_to(items, lambda l: l == 0)
    if rotated[: 2 * k] != list(range(2 * k)):
        raise ValidationError("externals scattered by the case-1 cut")
    relabel = {lbl: i for i, lbl in enumerate(rotated)}
    pairing = frozenset(
        tuple(sorted((relabel[a], relabel[b]))) for a, b in _unique_pairs(part)
    )
    return _factor_base(Train(k, n, pairing, (new_car,)))


def _factor_case2(train: Train, state, j):
    """Split at interior gap x_j into a lower and an upper train (k crossings)."""
    k, n = train.k, train.n
    ell = train.num_cars
    g_from = 2 * k + 2 * n * (ell - j)
    end_label = state.boundary[k]
    piece_tip, piece_far = cut_exactly(state, g_from, end_label, k)
    if 0 in piece_tip[0]:
        lower_piece, upper_piece = piece_tip, piece_far
    else:
        lower_piece, upper_piece = piece_far, piece_tip
    delta = train.cars[0].delta
    lower = _piece_to_train(lower_piece, train, bottom_side=True)
    upper = _piece_to_train(upper_piece, train, bottom_side=False)
    return _factor_rec(lower, delta) + _factor_rec(upper, delta)


def _factor_base(train: Train):
    """One car: X = A then (B tensor id_{k-n}) then C, reading bottom-up.

    The two cuts are searched jointly with backtracking over the Y-point
    and over routings, mirroring the simultaneously drawn tripod of the
    tree-metric argument: a first-cut routing is kept only if the leftover
    piece still admits the n-crossing cut that shaves the car to an n-box.
    """
    k, n = train.k, train.n
    delta = train.cars[0].delta
    base_state = _train_state(train)
    x_gap, z_gap, p_gap = 0, 2 * k, k
    m = len(base_state.boundary)
    candidates = []
    for g in range(m):
        dx = base_state.sep(g, x_gap)
        dz = base_state.sep(g, z_gap)
        dp = base_state.sep(g, p_gap)
        if (
            dx <= n
            and dz <= n
            and dp <= k - n
            and (n - dx) % 2 == 0
            and (n - dz) % 2 == 0
            and (k - n - dp) % 2 == 0
        ):
            candidates.append((dx + dz + dp, g))
    if not candidates:
        raise ValidationError("no Y-point found; tree-metric argument violated")
    candidates.sort()

    end_label = base_state.boundary[p_gap]
    result = {}

    def finish(st):
        piece_tip, piece_far = st.separate(end_label)
        if 0 in piece_tip[0]:
            piece_a, piece_up = piece_tip, piece_far
        else:
            piece_a, piece_up = piece_far, piece_tip
        upper = _piece_to_train(piece_up, train, bottom_side=False)
        state2 = _train_state(upper)
        end2 = state2.boundary[2 * k]  # first block leg; the gap before it is z
        state2.tip = n  # between strands n-1 and n of the upper train
        if not _cut_search(state2, end2, n):
            return False
        piece_tip2, piece_far2 = state2.separate(end2)
        if any(isinstance(l, int) and l >= 2 * k for l in piece_tip2[0]):
            piece_b, piece_c = piece_tip2, piece_far2
        else:
            piece_b, piece_c = piece_far2, piece_tip2
        result["a"] = _piece_to_tl_bottom(piece_a, k, delta)
        result["b"] = _instantiate_piece_as_box(piece_b, upper, n, delta)
        result["c"] = _piece_to_tl_c(piece_c, k, n, delta)
        return True

    for _, g in candidates:
        st = base_state.clone()
        via_label = st.boundary[g % m]
        st.tip = x_gap
        if _cut_search(
            st, via_label, n, lambda s1: _cut_search(s1, end_label, k - n, finish)
        ):
            return [
                ("tl", result["a"]),
                ("box", result["b"], k),
                ("tl", result["c"]),
            ]
    raise ValidationError("no factorization tripod found; tree-metric argument violated")


def _piece_to_tl_c(piece, k, n, delta):
    """The C piece: bottom = [second-cut walls, strands n..k-1], top = externals.

    Rotating the piece list to the wall run must read
    [walls (n), strands n..k-1, external tops k..2k-1]; disk = index + 0 with
    the walls occupying disk positions 0..n-1.
    """
    items, part = piece
    rotated = _rotate_to_wall_run(items)
    if not all(_is_wall(l) for l in rotated[:n]):
        raise ValidationError("C piece walls are not contiguous")
    expected = list(range(n, 2 * k))
    if rotated[n:] != expected:
        raise ValidationError("C piece externals out of position")
    disk = {lbl: i for i, lbl in enumerate(rotated)}
    disk_pairs = [(disk[a], disk[b]) for a, b in _unique_pairs(part)]
    return TLElement.from_diagram(TLDiagram.from_disk_pairs(k, k, disk_pairs), delta)
