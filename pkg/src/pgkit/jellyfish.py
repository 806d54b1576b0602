"""Two-step evaluation of closed diagrams with abstract generators.

A ``GeneratorSystem`` packages everything the rewriting engine may use:
structure constants for products of generators, single-cap expansions,
rotation expansions, and the jellyfish expansions of a generator with one
or two strands passed over it.  All tables are derived here from
Temperley-Lieb instantiations by exact linear algebra, which makes every
rewrite checkable against direct diagrammatic evaluation.

Evaluation follows the two-step scheme: (1) pull every generator to the
boundary, rewriting each rotation's wrapping strand into jellyfish
expansions, so the value becomes a combination of trains; (2) reduce each
closed train by capping generators (single caps land in Temperley-Lieb),
multiplying adjacent generators joined by n parallel strands through the
structure algebra, and realigning stars with the rotation table, until
only loops remain.

Working nets carry an explicit boundary layout: a cyclic list of items,
each an external point ('x', disk_position) or a car leg ('c', car_id, j)
with j counterclockwise from the car's distinguished interval.  The
invariant for train normal form is that the gap following each car's last
leg (its distinguished interval) meets the region of the marked gap, which
sits before the first layout item.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import (
    DomainError,
    StuckTrainError,
    UnsupportedInputError,
    ValidationError,
)
from .laurent import DeltaRat
from .tl import (
    TLDiagram,
    TLElement,
    cap_at_disk,
    coerce_scalar,
    contract,
    enumerate_diagrams,
    jones_wenzl,
    multiply,
    rotate,
    scalar_delta_power,
    scalar_is_zero,
    scalar_one,
    trace_close,
    _noncrossing_matchings,
    _noncrossing_in_cyclic_order,
)

# ---------------------------------------------------------------------------
# diagram expressions


@dataclass(frozen=True)
class DiagramExpr:
    """Expression tree: gen | tl | rot | mult | cap | close."""

    kind: str
    payload: tuple = ()

    @staticmethod
    def gen(label, side=1):
        return DiagramExpr("gen", (side, label))

    @staticmethod
    def tl(diagram: TLDiagram):
        return DiagramExpr("tl", (diagram,))

    @staticmethod
    def rot(e):
        return DiagramExpr("rot", (e,))

    @staticmethod
    def mult(a, b):
        return DiagramExpr("mult", (a, b))

    @staticmethod
    def cap(e, pos):
        return DiagramExpr("cap", (e, int(pos)))

    @staticmethod
    def close(e):
        return DiagramExpr("close", (e,))

    def count_cars(self):
        if self.kind == "gen":
            return 1
        return sum(p.count_cars() for p in self.payload if isinstance(p, DiagramExpr))


def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse_sexp(text: str) -> DiagramExpr:
    """Parse the s-expression form of a closed diagram.

    Syntax: (close E), (mult E E), (rot E), (cap E POS), (gen NAME),
    (tl "p1-p2,p3-p4") with boundary points numbered counterclockwise from
    the marked interval, 1-based; a tl leaf with 2k points is a k-box.
    """
    toks = _tokenize(text)
    pos = 0

    def walk():
        nonlocal pos
        if toks[pos] != "(":
            raise DomainError(f"expected '(' at token {pos}")
        pos += 1
        head = toks[pos]
        pos += 1
        if head == "gen":
            label = toks[pos]
            pos += 1
            side = 1
            if toks[pos] != ")":
                side = int(toks[pos])
                pos += 1
            out = DiagramExpr.gen(label, side)
        elif head == "tl":
            spec = toks[pos].strip('"')
            pos += 1
            pairs = []
            for bit in spec.split(","):
                a, b = bit.split("-")
                pairs.append((int(a) - 1, int(b) - 1))
            npts = 2 * len(pairs)
            if npts % 4:
                raise DomainError("tl leaf must have an even number of strands")
            k = npts // 2
            out = DiagramExpr.tl(TLDiagram.from_disk_pairs(k, k, pairs))
        elif head == "rot":
            out = DiagramExpr.rot(walk())
        elif head == "mult":
            a = walk()
            b = walk()
            out = DiagramExpr.mult(a, b)
        elif head == "cap":
            e = walk()
            out = DiagramExpr.cap(e, int(toks[pos]))
            pos += 1
        elif head == "close":
            out = DiagramExpr.close(walk())
        else:
            raise DomainError(f"unknown constructor {head!r}")
        if toks[pos] != ")":
            raise DomainError(f"expected ')' after {head}")
        pos += 1
        return out

    out = walk()
    if pos != len(toks):
        raise DomainError("trailing tokens after expression")
    return out


# ---------------------------------------------------------------------------
# working nets


class _Net:
    """A train with explicit boundary layout and strand matching.

    items: cyclic list, ('x', disk_pos) or ('c', car_id, leg); the marked
    gap precedes items[0].  partner: matching on items.  cars: car_id ->
    (side, label).  Pure data; rewriting copies before mutating.
    """

    __slots__ = ("n", "bot", "top", "items", "partner", "cars", "shading")

    def __init__(self, n, bot, top, items, partner, cars, shading=1):
        self.n = n
        self.bot = bot
        self.top = top
        self.items = list(items)
        self.partner = dict(partner)
        self.cars = dict(cars)
        self.shading = shading

    def copy(self):
        return _Net(self.n, self.bot, self.top, self.items, self.partner, self.cars, self.shading)

    def index(self):
        return {it: i for i, it in enumerate(self.items)}

    def chords(self):
        pos = self.index()
        seen = set()
        out = []
        for a, b in self.partner.items():
            key = frozenset((a, b))
            if key in seen:
                continue
            seen.add(key)
            out.append(tuple(sorted((pos[a], pos[b]))))
        return out

    def sep(self, g1, g2):
        cnt = 0
        for a, b in self.chords():
            if (a < g1 <= b) != (a < g2 <= b):
                cnt += 1
        return cnt

    def car_ids_in_order(self):
        seen = []
        for it in self.items:
            if it[0] == "c" and (not seen or seen[-1] != it[1]):
                if it[1] not in seen:
                    seen.append(it[1])
        return seen

    def star_gap(self, car_id):
        """Gap index just after the car's leg-0 point (its marked interval).

        For a block in descending order this is the gap after the block;
        for a phase-rotated block it falls between two legs.
        """
        pos = self.index()
        return (pos[("c", car_id, 0)] + 1) % len(self.items)

    def check(self):
        support = sorted(self.partner)
        if support != sorted(self.items) or len(self.items) != len(set(self.items)):
            raise ValidationError("net matching must cover the layout exactly")
        pos = self.index()
        if not _noncrossing_in_cyclic_order(self.chords()):
            raise ValidationError("net pairing is not planar")
        for cid in self.cars:
            legs = [pos[("c", cid, j)] for j in range(2 * self.n)]
            lo = min(legs)
            if sorted(legs) != list(range(lo, lo + 2 * self.n)):
                raise ValidationError("car legs must be contiguous")
            # legs run clockwise from the car's view: a cyclic rotation of
            # descending order (a non-trivial rotation = a realigned star)
            seq = [self.items[p][2] for p in range(lo, lo + 2 * self.n)]
            dbl = seq + seq
            desc = list(range(2 * self.n - 1, -1, -1))
            if not any(dbl[s : s + 2 * self.n] == desc for s in range(2 * self.n)):
                raise ValidationError("car legs out of orientation")
        return self


def _gen_net(n, side, label, delta=None, shading=1):
    """Identity train of a single generator: its legs wired straight out."""
    items = [("x", d) for d in range(2 * n)] + [
        ("c", 0, j) for j in range(2 * n - 1, -1, -1)
    ]
    partner = {}
    for d in range(2 * n):
        a, b = ("x", d), ("c", 0, d)
        partner[a] = b
        partner[b] = a
    return _Net(n, n, n, items, partner, {0: (side, label)}, shading)


def _tl_net(n, diagram: TLDiagram, shading=1):
    items = [("x", d) for d in range(diagram.bottom + diagram.top)]
    partner = {}
    for i, j in diagram.pairs:
        a = ("x", diagram.disk_position(i))
        b = ("x", diagram.disk_position(j))
        partner[a] = b
        partner[b] = a
    return _Net(n, diagram.bottom, diagram.top, items, partner, {}, shading)


# a combination of nets with a pending-rotation counter

class TrainCombo:
    __slots__ = ("n", "bot", "top", "delta", "shading", "terms", "pending")

    def __init__(self, n, bot, top, delta, shading=1, terms=None, pending=0):
        self.n = n
        self.bot = bot
        self.top = top
        self.delta = delta
        self.shading = shading
        self.terms = list(terms or [])  # (coeff, _Net)
        self.pending = pending


@dataclass(frozen=True)
class TrainWord:
    """Frozen train: external arity, virtual-circle pairing, car labels.

    The tl part is a planar matching on bot+top external disk positions
    followed by one 2n-point block per car (legs reversed, star at the gap
    after each block).
    """

    n: int
    bot: int
    top: int
    pairing: frozenset
    cars: tuple  # ((side, label), ...)
    shading: int = 1

    def block_range(self, i):
        start = self.bot + self.top + 2 * self.n * i
        return range(start, start + 2 * self.n)


def _freeze_net(net: _Net) -> tuple:
    """Slide the cars to the canonical tail position and freeze.

    Every car's distinguished interval meets the marked region, so cars can
    be carried along that region to sit after the external run; planarity
    of the result is checked, trying both carrying orders.
    """
    ext_items = [it for it in net.items if it[0] == "x"]
    ext_sorted = sorted(ext_items, key=lambda t: t[1])
    if ext_sorted != [("x", d) for d in range(net.bot + net.top)]:
        raise ValidationError("external points lost their disk numbering")
    order = net.car_ids_in_order()
    for cars_order in (order, list(reversed(order))):
        layout = list(ext_sorted)
        for cid in cars_order:
            layout += [("c", cid, j) for j in range(2 * net.n - 1, -1, -1)]
        pos = {it: i for i, it in enumerate(layout)}
        chords = []
        ok = True
        for a, b in net.partner.items():
            if pos[a] < pos[b]:
                chords.append((pos[a], pos[b]))
        if _noncrossing_in_cyclic_order(chords):
            pairing = frozenset(chords)
            cars = tuple(net.cars[c] for c in cars_order)
            return TrainWord(net.n, net.bot, net.top, pairing, cars, net.shading)
    raise ValidationError("could not slide cars to the canonical position")


def _thaw_word(word: TrainWord, n) -> _Net:
    items = [("x", d) for d in range(word.bot + word.top)]
    for i, _ in enumerate(word.cars):
        items += [("c", i, j) for j in range(2 * n - 1, -1, -1)]
    idx = {p: it for p, it in enumerate(items)}
    partner = {}
    for a, b in word.pairing:
        partner[idx[a]] = idx[b]
        partner[idx[b]] = idx[a]
    cars = {i: sl for i, sl in enumerate(word.cars)}
    return _Net(n, word.bot, word.top, items, partner, cars, word.shading)


# ---------------------------------------------------------------------------
# generator systems


@dataclass
class GeneratorSystem:
    """Abstract generator data for one strand count n.

    All tables are total over the listed labels.  delta is None for exact
    scalars.  jelly1 may be absent (2-strand-only systems); jelly2 is
    derived for both.
    """

    n: int
    delta: object
    elements: dict  # (side, label) -> TLElement (n-box instantiation)
    mult_table: dict = field(default_factory=dict)  # (side, lb, lt) -> (gen coeffs, TLElement)
    cap_table: dict = field(default_factory=dict)  # (side, label, pos) -> TLElement 2n-2
    rot_table: dict = field(default_factory=dict)  # (side, label) -> (gen coeffs opp side, TLElement)
    jelly1: dict = field(default_factory=dict)  # (side, label) -> [(coeff, TrainWord arity n+1)]
    jelly2: dict = field(default_factory=dict)  # (side, label) -> [(coeff, TrainWord arity n+2)]
    traces: dict = field(default_factory=dict)  # (side, label, power) -> scalar
    self_dual: bool = False  # both sides carry the same instantiation

    def labels(self, side):
        return [lbl for s, lbl in self.elements if s == side]

    def element(self, side, label):
        return self.elements[(side, label)]

    def has_jelly1(self):
        return bool(self.jelly1)


def _cap_cyclic(x: TLElement, p: int) -> TLElement:
    """Cap disk positions (p, p+1 mod m); the wrap cap re-bases the marked
    interval at the old position p+2."""
    m = x.bottom + x.top
    if p < m - 1:
        return cap_at_disk(x, p)
    # wrap: cap (m-1, 0); remaining old positions 1..m-2, new 0 = old 1
    la, lb = x.label_at_disk(m - 1), x.label_at_disk(0)
    nb = x.bottom - 1
    nt = m - 2 - nb
    out = TLElement.zero(nb, nt, x.delta, x.shading)
    for d, c in x.terms.items():
        arcs = [((0, i), (0, j)) for i, j in d.pairs]
        glued, loops = contract(arcs, [((0, la), (0, lb))])
        relabel = {}
        for old in range(1, m - 1):
            newpos = old - 1
            lbl = d.label_at_disk(old)
            relabel[(0, lbl)] = newpos
        disk_pairs = [(relabel[a], relabel[b]) for a, b in glued]
        coeff = c if not loops else c * scalar_delta_power(x.delta, loops)
        out._accumulate(TLDiagram.from_disk_pairs(nb, nt, disk_pairs), coeff)
    return out


def j_expand(x: TLElement) -> TLElement:
    """One strand passed over the marked interval: an (n+1)-box.

    Disk pairs shift by one and the new positions 0, 2n+1 join: the arc
    over the star.
    """
    n = x.bottom
    m = 2 * n
    out = TLElement.zero(n + 1, n + 1, x.delta, -x.shading)
    for d, c in x.terms.items():
        pairs = [(d.disk_position(i) + 1, d.disk_position(j) + 1) for i, j in d.pairs]
        pairs.append((0, m + 1))
        out._accumulate(
            TLDiagram.from_disk_pairs(n + 1, n + 1, pairs, -d.shading), c
        )
    return out


def _solve_expansion_dense(target: TLElement, columns, delta):
    """Straightforward exact/numeric solve preferring earlier columns."""
    space = {}
    for _, elem in columns:
        for d in elem.terms:
            space.setdefault(d, len(space))
    for d in target.terms:
        space.setdefault(d, len(space))
    dim = len(space)
    exact = delta is None
    zero = DeltaRat.const(0) if exact else 0.0

    def vec(elem):
        v = [zero] * dim
        for d, c in elem.terms.items():
            v[space[d]] = c
        return v

    cols = [vec(e) for _, e in columns]
    rhs = vec(target)
    ncols = len(cols)
    # row-reduce the augmented [cols | rhs] system over column pivoting order
    aug = [[cols[c][r] for c in range(ncols)] + [rhs[r]] for r in range(dim)]
    tol = 0.0 if exact else 1e-10
    pivot_of_col = {}
    r_used = []
    for c in range(ncols):
        piv = None
        for r in range(dim):
            if r in r_used:
                continue
            if not scalar_is_zero(aug[r][c], tol):
                piv = r
                break
        if piv is None:
            continue
        pv = aug[piv][c]
        inv = (DeltaRat.const(1) / pv) if exact else (1.0 / pv)
        aug[piv] = [x * inv for x in aug[piv]]
        for r in range(dim):
            if r != piv and not scalar_is_zero(aug[r][c], tol):
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[piv])]
        pivot_of_col[c] = piv
        r_used.append(piv)
    for r in range(dim):
        if r not in r_used and not scalar_is_zero(aug[r][ncols], 1e-9 if not exact else 0.0):
            return None
    out = {}
    for c, piv in pivot_of_col.items():
        val = aug[piv][ncols]
        if not scalar_is_zero(val, 1e-12 if not exact else 0.0):
            out[columns[c][0]] = val
    return out


def _one_car_train_words(n, arity_bot, arity_top, side, label):
    """All normal 1-car train words of the given external arity.

    Normal means the car's distinguished interval meets the marked region;
    wirings that wall the car off are not trains and are excluded from the
    expansion basis.
    """
    ext = arity_bot + arity_top
    total = ext + 2 * n
    out = []
    for match in _noncrossing_matchings(list(range(total))):
        w = TrainWord(n, arity_bot, arity_top, frozenset(match), ((side, label),))
        if not _wrapped_cars(_thaw_word(w, n)):
            out.append(w)
    return out


def _instantiate_word(word: TrainWord, sys: "GeneratorSystem") -> TLElement:
    """Direct diagrammatic value of a train word (the oracle semantics)."""
    net = _thaw_word(word, sys.n)
    return _instantiate_net(net, sys)


def _instantiate_net(net: _Net, sys: "GeneratorSystem") -> TLElement:
    delta = sys.delta
    out = TLElement.zero(net.bot, net.top, delta, net.shading)
    car_ids = sorted(net.cars)
    combos = [list(sys.element(*net.cars[c]).terms.items()) for c in car_ids]
    for choice in itertools.product(*combos) if combos else [()]:
        arcs = list(_net_arcs(net))
        ident = []
        coeff = scalar_one(delta)
        for cid, (d, c) in zip(car_ids, choice):
            coeff = coeff * c
            for j in range(2 * net.n):
                ident.append((("n", ("c", cid, j)), ("d", cid, d.label_at_disk(j))))
            arcs += [(("d", cid, a), ("d", cid, b)) for a, b in d.pairs]
        glued, loops = contract(arcs, ident)
        if loops:
            coeff = coeff * scalar_delta_power(delta, loops)
        disk_pairs = []
        for a, b in glued:
            disk_pairs.append((a[1][1], b[1][1]))
        out._accumulate(
            TLDiagram.from_disk_pairs(net.bot, net.top, disk_pairs, net.shading),
            coeff,
        )
    return out


def _net_arcs(net: _Net):
    seen = set()
    for a, b in net.partner.items():
        key = frozenset((a, b))
        if key in seen:
            continue
        seen.add(key)
        yield (("n", a), ("n", b))


def _coerce_element(e: TLElement, delta) -> TLElement:
    """Re-key an element's scalars into the target delta mode."""
    if (e.delta is None) == (delta is None) and (
        delta is None or float(e.delta) == float(delta)
    ):
        return e
    out = TLElement.zero(e.bottom, e.top, delta, e.shading)
    for d, c in e.terms.items():
        out._accumulate(d, coerce_scalar(c, delta))
    return out


def derive_generator_system(elements, delta=None, labels=None, want_jelly1=True, n=None):
    """Build every table for TL-instantiated generators by exact linear solves.

    elements: list of TLElement n-boxes (the plus-side generators; the
    minus side mirrors them).  An empty list with an explicit n gives the
    pure Temperley-Lieb system, where evaluation reduces to loop counting.
    Validates that span(elements + f^(n)) is closed under multiplication,
    reporting the offending product.
    """
    elements = [_coerce_element(e, delta) for e in elements]
    if elements:
        n = elements[0].bottom
    if n is None:
        raise DomainError("an empty system needs an explicit strand count n")
    if labels is None:
        labels = [f"S{i + 1}" for i in range(len(elements))]
    f = jones_wenzl(n, delta)
    sysd = {}
    for side in (1, -1):
        for lbl, el in zip(labels, elements):
            sysd[(side, lbl)] = el if side == 1 else el.with_shading(1)
    sys = GeneratorSystem(n=n, delta=delta, elements=sysd, self_dual=True)

    # span closure of {S} u {f}
    for side in (1, -1):
        cols = [(("gen", lbl), sysd[(side, lbl)]) for lbl in labels]
        cols.append((("f",), f))
        for la in labels:
            for lb in labels:
                prod = multiply(sysd[(side, la)], sysd[(side, lb)])
                sol = _solve_expansion_dense(prod, cols, delta)
                if sol is None:
                    raise ValidationError(
                        f"span not closed under multiplication: {la} * {lb}"
                    )
                gen_part = {key[1]: v for key, v in sol.items() if key[0] == "gen"}
                tlpart = TLElement.zero(n, n, delta)
                for key, v in sol.items():
                    if key[0] == "f":
                        tlpart = tlpart + f.scale(v)
                sys.mult_table[(side, la, lb)] = (gen_part, tlpart)

    # caps, rotations, traces
    for (side, lbl), el in sysd.items():
        for p in range(2 * n):
            sys.cap_table[(side, lbl, p)] = _cap_cyclic(el, p)
        rot_el = rotate(el).with_shading(1)
        cols = [(("gen", l2), sysd[(-side, l2)]) for l2 in labels]
        cols += [(("tl", i), TLElement.from_diagram(d, delta)) for i, d in enumerate(enumerate_diagrams(n))]
        sol = _solve_expansion_dense(rot_el, cols, delta)
        if sol is None:
            raise ValidationError("rotation left the TL span; impossible")
        gen_part = {}
        tlpart = TLElement.zero(n, n, delta)
        basis = enumerate_diagrams(n)
        for key, v in sol.items():
            if key[0] == "gen":
                gen_part[key[1]] = v
            else:
                tlpart = tlpart + TLElement.from_diagram(basis[key[1]], delta).scale(v)
        sys.rot_table[(side, lbl)] = (gen_part, tlpart)
        power = el
        for p in (1, 2, 3):
            sys.traces[(side, lbl, p)] = trace_close(power)
            power = multiply(power, el)

    # jellyfish tables
    for (side, lbl), el in sysd.items():
        j1 = j_expand(el).with_shading(1)
        words = []
        for l2 in labels:
            words += _one_car_train_words(n, n + 1, n + 1, -side, l2)
        cols = [(("w", w), _instantiate_word(w, sys)) for w in words]
        cols += [
            (("tl", i), TLElement.from_diagram(d, delta))
            for i, d in enumerate(enumerate_diagrams(n + 1))
        ]
        sol = _solve_expansion_dense(j1, cols, delta)
        if sol is None:
            raise ValidationError(f"one-strand jellyfish expansion failed for {lbl}")
        if want_jelly1:
            sys.jelly1[(side, lbl)] = _expansion_to_words(sol, n, n + 1, delta)
        j2 = j_expand(j_expand(el)).with_shading(1)
        words = []
        for l2 in labels:
            words += _one_car_train_words(n, n + 2, n + 2, side, l2)
        cols = [(("w", w), _instantiate_word(w, sys)) for w in words]
        cols += [
            (("tl", i), TLElement.from_diagram(d, delta))
            for i, d in enumerate(enumerate_diagrams(n + 2))
        ]
        sol = _solve_expansion_dense(j2, cols, delta)
        if sol is None:
            raise ValidationError(f"two-strand jellyfish expansion failed for {lbl}")
        sys.jelly2[(side, lbl)] = _expansion_to_words(sol, n, n + 2, delta)
    return sys


def _expansion_to_words(sol, n, arity, delta):
    out = []
    basis = enumerate_diagrams(arity)
    for key, coeff in sol.items():
        if key[0] == "w":
            out.append((coeff, key[1]))
        else:
            d = basis[key[1]]
            disk_pairs = frozenset(
                tuple(sorted((d.disk_position(i), d.disk_position(j))))
                for i, j in d.pairs
            )
            out.append((coeff, TrainWord(n, arity, arity, disk_pairs, ())))
    return out

# ---------------------------------------------------------------------------
# the rewriting engine


def _plug_word_into_slot(net: _Net, slot_items, word: TrainWord, sys):
    """Replace a slot (consecutive layout items, read ccw) by a train word.

    Slot item t glues to the word's external disk position (len-1-t): an
    inner boundary is traversed oppositely, and the slot's trailing gap
    (where the star faced) receives the word's marked interval.  The word's
    cars enter the layout at the slot position with fresh ids.  Returns
    (new_net, loops).
    """
    m = len(slot_items)
    if m != word.bot + word.top:
        raise ValidationError("slot size disagrees with the plugged word")
    wnet = _thaw_word(word, sys.n)
    fresh = {}
    next_id = (max(net.cars) + 1) if net.cars else 0
    for cid in sorted(wnet.cars):
        fresh[cid] = next_id
        next_id += 1

    arcs = [(("h", a), ("h", b)) for a, b in _net_arcs_raw(net)]
    arcs += [(("w", a), ("w", b)) for a, b in _net_arcs_raw(wnet)]
    ident = []
    for t, it in enumerate(slot_items):
        ident.append((("h", it), ("w", ("x", m - 1 - t))))
    glued, loops = contract(arcs, ident)

    slot_set = set(slot_items)
    pos_of = net.index()
    slot_positions = sorted(pos_of[it] for it in slot_items)
    insert_at = slot_positions[0]
    new_items = [it for it in net.items if it not in slot_set]
    inserted = []
    for cid in sorted(wnet.cars):
        inserted += [("c", fresh[cid], j) for j in range(2 * sys.n - 1, -1, -1)]
    new_items[insert_at:insert_at] = inserted

    def conv(tagged):
        tag, item = tagged
        if tag == "h":
            return item
        if item[0] == "c":
            return ("c", fresh[item[1]], item[2])
        raise ValidationError("unexpected leftover word-external point")

    partner = {}
    for a, b in glued:
        ca, cb = conv(a), conv(b)
        partner[ca] = cb
        partner[cb] = ca
    cars = {cid: sl for cid, sl in net.cars.items()}
    for cid, sl in wnet.cars.items():
        cars[fresh[cid]] = sl
    out = _Net(net.n, net.bot, net.top, new_items, partner, cars, net.shading)
    # drop car ids for cars no longer present (they were inside the slot)
    present = {it[1] for it in new_items if it[0] == "c"}
    out.cars = {cid: sl for cid, sl in out.cars.items() if cid in present}
    out.check()
    return out, loops


def _net_arcs_raw(net: _Net):
    seen = set()
    for a, b in net.partner.items():
        key = frozenset((a, b))
        if key in seen:
            continue
        seen.add(key)
        yield (a, b)


def _plug_box(net: _Net, car_id, element: TLElement, sys, combo_terms, coeff):
    """Dissolve one car into a pure TL element glued leg-for-leg.

    Car leg item ('c', cid, j) means the car's disk position j, so the
    element's disk position j attaches there, whatever the block's phase.
    """
    present = sorted(
        it[2] for it in net.items if it[0] == "c" and it[1] == car_id
    )
    m = element.bottom + element.top
    if present != list(range(m)):
        raise ValidationError("slot legs disagree with the plugged element")
    for d, c in element.terms.items():
        base = net.copy()
        arcs = [(a, b) for a, b in _net_arcs_raw(base)]
        # element arcs in disk coordinates, glued to the legs
        arcs += [
            (("e", d.disk_position(i)), ("e", d.disk_position(j)))
            for i, j in d.pairs
        ]
        ident = [(("c", car_id, p), ("e", p)) for p in range(m)]
        glued, loops = contract(arcs, ident)
        partner = {}
        for a, b in glued:
            if a[0] == "e" or b[0] == "e":
                raise ValidationError("dangling element leg")
            partner[a] = b
            partner[b] = a
        items = [it for it in base.items if not (it[0] == "c" and it[1] == car_id)]
        cars = {k: v for k, v in base.cars.items() if k != car_id}
        nt = _Net(net.n, net.bot, net.top, items, partner, cars, net.shading)
        nt.check()
        cc = coeff * c
        if loops:
            cc = cc * scalar_delta_power(sys.delta, loops)
        combo_terms.append((cc, nt))


def _rotation_relabel(net: _Net) -> _Net:
    """One click: external disk position d becomes d-1 mod 2k; shading flips.

    The marked interval advances past one boundary point, so the layout
    list is rotated to start at the new external 0; cars left behind the
    wrapping strand are dealt with by the normalizer.
    """
    if net.bot != net.top:
        raise DomainError("rotation needs a square train")
    m = 2 * net.bot
    out = net.copy()
    out.items = [
        ("x", (it[1] - 1) % m) if it[0] == "x" else it for it in net.items
    ]
    remap = {}
    for old, new in zip(net.items, out.items):
        remap[old] = new
    out.partner = {remap[a]: remap[b] for a, b in net.partner.items()}
    idx = out.items.index(("x", 0))
    out.items = out.items[idx:] + out.items[:idx]
    out.shading = -net.shading
    return out


def _wrapped_cars(net: _Net):
    """Cars whose star gap is separated from the marked gap, with counts."""
    out = {}
    for cid in net.cars:
        s = net.sep(0, net.star_gap(cid))
        if s:
            out[cid] = s
    return out


def _absorb_strands(net: _Net, wrapped):
    """Enlarge each wrapped car by one pair of flanking legs per covering
    strand and reroute the wrap strands through them; returns
    (net, enlarged) with enlarged mapping car_id -> absorbed strand count."""
    out = net.copy()
    pos = out.index()
    strands = []
    seenpairs = set()
    for a, b in out.partner.items():
        key = frozenset((a, b))
        if key in seenpairs:
            continue
        seenpairs.add(key)
        pa, pb = sorted((pos[a], pos[b]))
        strands.append((pa, pb, tuple(sorted((a, b), key=lambda t: pos[t]))))

    # a strand wraps car cid iff it separates gap 0 from the car's star gap
    def separates(pa, pb, g1, g2):
        return (pa < g1 <= pb) != (pa < g2 <= pb)

    wraps = {}
    for pa, pb, (a, b) in strands:
        covered = [
            cid for cid in wrapped if separates(pa, pb, 0, out.star_gap(cid))
        ]
        if covered:
            wraps[(a, b)] = (pa, pb, covered)
    # outermost strands first: flank insertion hugs the legs, so strands
    # processed later land inside the earlier flanks
    order = sorted(wraps.items(), key=lambda t: -(t[1][1] - t[1][0]))
    enlarged = {cid: 0 for cid in wrapped}
    for (a, b), (pa, pb, covered) in order:
        # insert one new leg on each flank of every covered car, splice the
        # strand: a -> first car's outer flank, ..., last car's outer -> b
        pos = out.index()
        first, second = (a, b) if pos[a] < pos[b] else (b, a)
        chain = [first]
        covered_sorted = sorted(covered, key=lambda cid: pos[("c", cid, 0)])
        for cid in covered_sorted:
            depth = enlarged[cid]
            legs = [it for it in out.items if it[0] == "c" and it[1] == cid]
            lo = min(pos[g] for g in legs)
            hi = max(pos[g] for g in legs)
            new_in = ("cx", cid, depth, "in")
            new_out = ("cx", cid, depth, "out")
            # insert before the block and after the block
            out.items.insert(hi + 1, new_out)
            out.items.insert(lo, new_in)
            chain += [new_in, new_out]
            enlarged[cid] += 1
            pos = out.index()
        chain.append(second)
        del out.partner[a], out.partner[b]
        for t in range(0, len(chain), 2):
            u, v = chain[t], chain[t + 1]
            out.partner[u] = v
            out.partner[v] = u
    return out, enlarged


def _enlarged_slot(net: _Net, cid):
    """The layout items of an enlarged car, in ccw order."""
    pos = net.index()
    items = [
        it
        for it in net.items
        if (it[0] == "c" and it[1] == cid) or (it[0] == "cx" and it[1] == cid)
    ]
    items.sort(key=lambda it: pos[it])
    return items


def _pigtail(net: _Net):
    """A wrap strand ending on the leg-0 point of a car whose star it covers."""
    for cid in net.cars:
        g = net.star_gap(cid)
        if net.sep(0, g) == 0:
            continue
        leg0 = ("c", cid, 0)
        z = net.partner.get(leg0)
        if z is None:
            continue
        pos = net.index()
        pa, pb = sorted((pos[leg0], pos[z]))
        # the strand is the pigtail iff it separates the marked gap (never
        # inside a chord span, since positions start at 0) from the star gap
        if pa < g <= pb:
            return cid, leg0, z
    return None


def _apply_pigtail(net: _Net, sys, out_terms, coeff, cid, leg0, z):
    """Resolve a car with one leg wrapped over its star: the one-click
    rotation in disguise.  The wrapped leg becomes the rotated car's last
    leg, the others renumber down, and the rotation table replaces the car.
    """
    n = net.n
    side, label = net.cars[cid]
    gen_part, tlpart = sys.rot_table[(side, label)]
    base = net.copy()
    del base.partner[leg0], base.partner[z]
    # the bent leg exits where leg 0 sat, so the new last leg replaces it in
    # place; the block comes out phase-rotated, star between legs 0 and 2n-1
    new_leg = ("c", cid, "pig")  # placeholder to dodge the renumber clash
    base.items[base.items.index(leg0)] = new_leg
    base.partner[new_leg] = z
    base.partner[z] = new_leg
    remap = {("c", cid, j): ("c", cid, j - 1) for j in range(1, 2 * n)}
    remap[new_leg] = ("c", cid, 2 * n - 1)
    base.items = [remap.get(it, it) for it in base.items]
    base.partner = {
        remap.get(x, x): remap.get(y, y) for x, y in base.partner.items()
    }
    for lbl, c in gen_part.items():
        nt = base.copy()
        nt.cars[cid] = (-side, lbl)
        nt.check()
        out_terms.append((coeff * c, nt))
    if not tlpart.is_zero():
        nt = base.copy()
        nt.cars[cid] = (-side, None)
        _plug_box(nt, cid, tlpart, sys, out_terms, coeff)


def _normalize_net(out_terms, sys, coeff, net, allow_jelly1=True):
    """Restore all cars' stars to the marked region, fanning out terms.

    Rules, in order: dissolve a wrapped car with a self-cap through the cap
    table; undo a pigtail through the rotation table; absorb the remaining
    over-passing strands into jellyfish expansions.
    """
    work = [(coeff, net)]
    guard = 0
    while work:
        guard += 1
        if guard > 10000:
            raise StuckTrainError("normalization did not terminate", None)
        c, nt = work.pop()
        wrapped = _wrapped_cars(nt)
        if not wrapped:
            out_terms.append((c, nt))
            continue
        cap = _self_cap(nt)
        if cap is not None and cap[0][1] in wrapped:
            _apply_self_cap(nt, cap, sys, work, c)
            continue
        pig = _pigtail(nt)
        if pig is not None:
            _apply_pigtail(nt, sys, work, c, *pig)
            continue
        if any(s > 2 for s in wrapped.values()):
            raise ValidationError("triply wrapped car; normalization lost")
        if any(s == 1 for s in wrapped.values()) and not (
            allow_jelly1 and sys.has_jelly1()
        ):
            raise UnsupportedInputError(
                "a singly wrapped generator needs one-strand jellyfish relations"
            )
        if any(s == 2 for s in wrapped.values()) and not sys.jelly2:
            raise UnsupportedInputError("no two-strand jellyfish relations")
        nt2, enlarged = _absorb_strands(nt, wrapped)
        _substitute_jellies(work, sys, c, nt2, enlarged, strands=max(wrapped.values()))


def _resolve(combo: TrainCombo, sys) -> TrainCombo:
    """Apply pending rotations, preferring one-strand expansions."""
    if combo.pending == 0:
        return combo
    if combo.bot != combo.top:
        raise DomainError("rotation pending on a non-square combo")
    r = combo.pending % (2 * combo.bot) if combo.bot else 0
    terms = combo.terms
    shading = combo.shading
    while r:
        new_terms = []
        if sys.has_jelly1():
            for coeff, net in terms:
                _normalize_net(new_terms, sys, coeff, _rotation_relabel(net))
            r -= 1
            shading = -shading
        else:
            if r == 1:
                raise UnsupportedInputError(
                    "odd rotation count with only two-strand relations"
                )
            for coeff, net in terms:
                _normalize_net(
                    new_terms,
                    sys,
                    coeff,
                    _rotation_relabel(_rotation_relabel(net)),
                    allow_jelly1=False,
                )
            r -= 2
        terms = new_terms
    return TrainCombo(combo.n, combo.bot, combo.top, combo.delta, shading, terms, 0)


def _eval_expr(expr: DiagramExpr, sys) -> TrainCombo:
    n, delta = sys.n, sys.delta
    if expr.kind == "gen":
        side, label = expr.payload
        if (side, label) not in sys.elements:
            raise DomainError(f"unknown generator {label!r}")
        net = _gen_net(n, side, label)
        return TrainCombo(n, n, n, delta, 1, [(scalar_one(delta), net)])
    if expr.kind == "tl":
        (d,) = expr.payload
        net = _tl_net(n, d)
        return TrainCombo(n, d.bottom, d.top, delta, 1, [(scalar_one(delta), net)])
    if expr.kind == "rot":
        sub = _eval_expr(expr.payload[0], sys)
        sub.pending += 1
        return sub
    if expr.kind == "mult":
        a = _resolve(_eval_expr(expr.payload[0], sys), sys)
        b = _resolve(_eval_expr(expr.payload[1], sys), sys)
        if a.top != b.bot:
            raise DomainError("stacking arity mismatch")
        out = TrainCombo(n, a.bot, b.top, delta, a.shading, [])
        for ca, na in a.terms:
            for cb, nb in b.terms:
                net, loops = _stack_nets(na, nb, sys)
                coeff = ca * cb
                if loops:
                    coeff = coeff * scalar_delta_power(delta, loops)
                out.terms.append((coeff, net))
        return out
    if expr.kind == "cap":
        sub = _resolve(_eval_expr(expr.payload[0], sys), sys)
        pos = expr.payload[1]
        ext = sub.bot + sub.top
        if not (0 <= pos < ext - 1):
            raise DomainError(f"cap position {pos} out of range")
        nb = sub.bot - 2 if pos <= sub.bot - 2 else (sub.bot if pos >= sub.bot else sub.bot - 1)
        nt = ext - 2 - nb
        out = TrainCombo(n, nb, nt, delta, sub.shading, [])
        for c, net in sub.terms:
            net2, loops = _cap_net(net, pos, nb, nt)
            cc = c if not loops else c * scalar_delta_power(delta, loops)
            out.terms.append((cc, net2))
        return out
    if expr.kind == "close":
        raise DomainError("close may appear only at the root; use evaluate()")
    raise DomainError(f"unknown expression kind {expr.kind!r}")


def _stack_nets(a: _Net, b: _Net, sys):
    """Glue b on top of a; b's cars come first in the result layout."""
    arcs = [(("a", x), ("a", y)) for x, y in _net_arcs_raw(a)]
    arcs += [(("b", x), ("b", y)) for x, y in _net_arcs_raw(b)]
    ident = []
    for j in range(a.top):
        ident.append(
            ((("a", ("x", a.bot + (a.top - 1 - j)))), ("b", ("x", j)))
        )
    glued, loops = contract(arcs, ident)
    ext = a.bot + b.top
    fresh = {}
    cars = {}
    for cid in sorted(b.cars):
        fresh[("b", cid)] = len(fresh)
        cars[fresh[("b", cid)]] = b.cars[cid]
    for cid in sorted(a.cars):
        fresh[("a", cid)] = len(fresh)
        cars[fresh[("a", cid)]] = a.cars[cid]

    def conv(tagged):
        tag, item = tagged
        if item[0] == "x":
            d = item[1]
            if tag == "a":
                assert d < a.bot
                return ("x", d)
            assert d >= b.bot
            j = b.bot + b.top - 1 - d  # top index
            return ("x", a.bot + (b.top - 1 - j))
        return ("c", fresh[(tag, item[1])], item[2])

    partner = {}
    for x, y in glued:
        cx, cy = conv(x), conv(y)
        partner[cx] = cy
        partner[cy] = cx
    items = [("x", d) for d in range(ext)]
    # cars: b's first (they sit above), then a's, all at the tail; each
    # block is re-cut at its star, which always reads legs descending
    for tag, net in (("b", b), ("a", a)):
        pos = net.index()
        runs = []
        for cid in sorted(net.cars):
            start = min(
                pos[it] for it in net.items if it[0] == "c" and it[1] == cid
            )
            runs.append((start, cid))
        for _, cid in sorted(runs):
            items += [
                ("c", fresh[(tag, cid)], j) for j in range(2 * net.n - 1, -1, -1)
            ]
    out = _Net(a.n, a.bot, b.top, items, partner, cars, a.shading)
    out.check()
    return out, loops


def _cap_net(net: _Net, pos, nb, nt):
    ia, ib = ("x", pos), ("x", pos + 1)
    pa, pb = net.partner[ia], net.partner[ib]
    out = net.copy()
    loops = 0
    del out.partner[ia], out.partner[ib]
    if pa == ib:
        loops = 1
    else:
        del out.partner[pa], out.partner[pb]
        out.partner[pa] = pb
        out.partner[pb] = pa
    out.items = [it for it in out.items if it not in (ia, ib)]
    remap = {}
    for it in out.items:
        if it[0] == "x":
            d = it[1]
            remap[it] = ("x", d - 2 if d > pos else d)
    out.items = [remap.get(it, it) for it in out.items]
    out.partner = {
        remap.get(x, x): remap.get(y, y) for x, y in out.partner.items()
    }
    out.bot, out.top = nb, nt
    return out, loops


def pull_to_trains(expr: DiagramExpr, sys: GeneratorSystem):
    """Rewrite an expression into a linear combination of train words."""
    combo = _resolve(_eval_expr(expr, sys), sys)
    out = []
    for coeff, net in combo.terms:
        out.append((coeff, _freeze_net(net)))
    return out


# ---------------------------------------------------------------------------
# closed-train reduction


def _self_cap(net: _Net):
    """An innermost pair of same-car legs joined directly, if any.

    Returned in cyclic layout order (earlier item first); a pair spanning
    the list seam is ordered with the seam crossing respected.
    """
    pos = net.index()
    m = len(net.items)
    for a, b in _net_arcs_raw(net):
        if a[0] == "c" and b[0] == "c" and a[1] == b[1]:
            pa, pb = sorted((pos[a], pos[b]))
            if pb - pa == 1:
                return (a, b) if pos[a] < pos[b] else (b, a)
            if pa == 0 and pb == m - 1:
                return (a, b) if pos[a] == m - 1 else (b, a)
    return None


def _product_bundle(net: _Net):
    """An adjacent car pair joined by exactly n nested parallel strands.

    Returns (upper_cid, lower_cid) where lower is the later block and the
    bundle joins upper legs 0..n-1 to lower legs 2n-1..n (car disk order).
    """
    n = net.n
    pos = net.index()
    order = net.car_ids_in_order()
    if len(order) < 2:
        return None
    m = len(net.items)
    for t, cid in enumerate(order):
        nxt = order[(t + 1) % len(order)]
        if nxt == cid:
            continue
        # adjacency: no other item between cid's run end and nxt's run start
        end = max(pos[("c", cid, j)] for j in range(2 * n))
        start = min(pos[("c", nxt, j)] for j in range(2 * n))
        if (end + 1) % m != start % m:
            continue
        ok = True
        for j in range(n):
            a = ("c", cid, j)  # upper car's late layout legs = its legs n-1..0
            if net.partner.get(a) != ("c", nxt, 2 * n - 1 - j):
                ok = False
                break
        if ok:
            return (cid, nxt)
    return None


def _apply_product(net: _Net, pair, sys, combo_terms, coeff):
    """Merge two adjacent cars joined by the n product strands.

    The bundle joins the upper car's legs 0..n-1 (its bottom) to the lower
    car's legs 2n-1..n (its top); surviving legs keep their numbers, which
    are exactly the composite's disk positions.
    """
    upper, lower = pair
    n = sys.n
    side_u, lbl_u = net.cars[upper]
    side_l, lbl_l = net.cars[lower]
    if side_u != side_l and not sys.self_dual:
        raise StuckTrainError(
            "adjacent cars of opposite shading", snapshot=repr(net.items)
        )
    gen_part, tlpart = sys.mult_table[(side_l, lbl_l, lbl_u)]
    base = net.copy()
    for j in range(n):
        a, b = ("c", upper, j), ("c", lower, 2 * n - 1 - j)
        del base.partner[a], base.partner[b]
    base.items = [
        it
        for it in base.items
        if not (it[0] == "c" and it[1] == upper and it[2] < n)
        and not (it[0] == "c" and it[1] == lower and it[2] >= n)
    ]
    del base.cars[upper], base.cars[lower]
    new_id = (max(base.cars) + 1) if base.cars else 0
    remap = {}
    for j in range(n, 2 * n):
        remap[("c", upper, j)] = ("c", new_id, j)
    for j in range(n):
        remap[("c", lower, j)] = ("c", new_id, j)
    base.items = [remap.get(it, it) for it in base.items]
    base.partner = {
        remap.get(x, x): remap.get(y, y) for x, y in base.partner.items()
    }
    for lbl, c in gen_part.items():
        nt = base.copy()
        nt.cars[new_id] = (side_l, lbl)
        nt.check()
        combo_terms.append((coeff * c, nt))
    if not tlpart.is_zero():
        nt = base.copy()
        nt.cars[new_id] = (side_l, None)
        _plug_box(nt, new_id, tlpart, sys, combo_terms, coeff)


def _apply_self_cap(net: _Net, cap, sys, combo_terms, coeff):
    """Cap a car at two of its cyclically adjacent legs via the cap table."""
    a, b = cap  # (earlier, later) in cyclic layout order
    cid = a[1]
    side, label = net.cars[cid]
    ja, jb = a[2], b[2]
    n = net.n
    if (jb + 1) % (2 * n) != ja:
        raise ValidationError("self-cap legs out of order")
    capped = sys.cap_table[(side, label, jb)]  # cap at car positions (jb, jb+1)
    base = net.copy()
    del base.partner[a], base.partner[b]
    base.items = [it for it in base.items if it not in (a, b)]
    # renumber the surviving legs to the capped element's disk positions:
    # non-wrap cap keeps 0 and compresses; the wrap cap shifts down by one
    if jb <= 2 * n - 2:
        renum = {
            old: (old if old < jb else old - 2)
            for old in range(2 * n)
            if old not in (jb, ja)
        }
    else:
        renum = {old: old - 1 for old in range(1, 2 * n - 1)}
    remap = {("c", cid, old): ("c", cid, new) for old, new in renum.items()}
    base.items = [remap.get(it, it) for it in base.items]
    base.partner = {
        remap.get(x, x): remap.get(y, y) for x, y in base.partner.items()
    }
    _plug_box(base, cid, capped, sys, combo_terms, coeff)


def _apply_rot_realign(net: _Net, sys, combo_terms, coeff, cid):
    """Move one car's star a click by trading the car for its rotation.

    Renumbering leg j to j+1 re-reads the slot one click further around, so
    plugging the expansion of the rotated element leaves the value fixed.
    """
    side, label = net.cars[cid]
    gen_part, tlpart = sys.rot_table[(side, label)]
    n = net.n
    base = net.copy()
    remap = {
        ("c", cid, j): ("c", cid, (j + 1) % (2 * n)) for j in range(2 * n)
    }
    base.items = [remap.get(it, it) for it in base.items]
    base.partner = {
        remap.get(x, x): remap.get(y, y) for x, y in base.partner.items()
    }
    for lbl, c in gen_part.items():
        nt = base.copy()
        nt.cars[cid] = (-side, lbl)
        nt.check()
        combo_terms.append((coeff * c, nt))
    if not tlpart.is_zero():
        nt = base.copy()
        nt.cars[cid] = (-side, None)
        _plug_box(nt, cid, tlpart, sys, combo_terms, coeff)


def reduce_closed_train(word, sys: GeneratorSystem, rng=None, budget=10000):
    """Evaluate a closed train to a scalar by capping, multiplying and
    realigning until no generators remain.

    Accepts a TrainWord of arity zero or a raw (coeff, net) seed.  A state
    where no rule fires raises StuckTrainError with a snapshot.
    """
    if isinstance(word, TrainWord):
        if word.bot or word.top:
            raise DomainError("reduce_closed_train needs a closed train")
        seeds = [(scalar_one(sys.delta), _thaw_word(word, sys.n))]
    else:
        seeds = [word]
    total = DeltaRat.const(0) if sys.delta is None else 0.0
    work = list(seeds)
    steps = 0
    while work:
        steps += 1
        if steps > budget:
            raise StuckTrainError("reduction budget exhausted", None)
        coeff, net = work.pop()
        if not net.cars:
            if net.items:
                raise ValidationError("carless net with leftover boundary")
            total = total + coeff
            continue
        rules = []
        cap = _self_cap(net)
        if cap is not None:
            rules.append(("cap", cap))
        pair = _product_bundle(net)
        if pair is not None:
            rules.append(("mult", pair))
        if not rules:
            for cid in net.car_ids_in_order():
                rules.append(("rot", cid))
        if not rules:
            raise StuckTrainError("no applicable rule", repr(net.items))
        if rng is not None:
            rule = rules[rng.randrange(len(rules))]
        else:
            rule = rules[0]
        new_terms = []
        if rule[0] == "cap":
            _apply_self_cap(net, rule[1], sys, new_terms, coeff)
        elif rule[0] == "mult":
            _apply_product(net, rule[1], sys, new_terms, coeff)
        else:
            _apply_rot_realign(net, sys, new_terms, coeff, rule[1])
        work.extend(new_terms)
    return total


def evaluate(expr: DiagramExpr, sys: GeneratorSystem, rng=None):
    """Two-step evaluation of a closed expression."""
    if expr.kind != "close":
        raise DomainError("evaluate needs a closed expression")
    sub = _resolve(_eval_expr(expr.payload[0], sys), sys)
    if sub.bot != sub.top:
        raise DomainError("cannot close a non-square element")
    total = DeltaRat.const(0) if sys.delta is None else 0.0
    for coeff, net in sub.terms:
        closed, loops = _close_net(net)
        cc = coeff if not loops else coeff * scalar_delta_power(sys.delta, loops)
        total = total + reduce_closed_train((cc, closed), sys, rng=rng)
    return total


def _close_net(net: _Net):
    out = net.copy()
    loops = 0
    for i in range(net.bot):
        a, b = ("x", i), ("x", 2 * net.bot - 1 - i)
        pa, pb = out.partner[a], out.partner[b]
        del out.partner[a]
        del out.partner[b]
        if pa == b:
            loops += 1
            continue
        del out.partner[pa], out.partner[pb]
        out.partner[pa] = pb
        out.partner[pb] = pa
    out.items = [it for it in out.items if it[0] != "x"]
    out.bot = out.top = 0
    return out, loops


# ---------------------------------------------------------------------------
# direct oracle semantics (no trains, no tables)


def tl_semantics(expr: DiagramExpr, sys: GeneratorSystem):
    """Direct diagrammatic meaning of an expression over the instantiation.

    Entirely independent of the train machinery: generators are substituted
    by their TL elements and the expression is evaluated with plain diagram
    algebra.  evaluate() must agree with this on every closed expression.
    """
    def walk(e):
        if e.kind == "gen":
            side, label = e.payload
            return sys.element(side, label)
        if e.kind == "tl":
            return TLElement.from_diagram(e.payload[0], sys.delta)
        if e.kind == "rot":
            return rotate(walk(e.payload[0])).with_shading(1)
        if e.kind == "mult":
            a, b = walk(e.payload[0]), walk(e.payload[1])
            return multiply(a, b)
        if e.kind == "cap":
            return cap_at_disk(walk(e.payload[0]), e.payload[1])
        if e.kind == "close":
            return trace_close(walk(e.payload[0]))
        raise DomainError(e.kind)

    return walk(expr)
