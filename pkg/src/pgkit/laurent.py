"""Exact scalar arithmetic.

Two interchangeable exact representations are used:

* ``LaurentQ`` -- Laurent polynomials in q with Fraction coefficients,
  stored sparsely as {exponent: coefficient}.  This is the form quantum
  integers are usually written in: [k] = q^(k-1) + q^(k-3) + ... + q^(1-k).
* ``DeltaPoly`` / ``DeltaRat`` -- polynomials and rational functions in the
  loop parameter delta = q + q^(-1).  Quantum integers are integer
  polynomials in delta (Chebyshev recursion [k+1] = delta[k] - [k-1]), and
  the degrees are half those of the q picture, which keeps diagram algebra
  fast.  ``DeltaRat`` is the scalar field for exact Temperley-Lieb work.

Substituting delta = q + 1/q maps DeltaPoly into LaurentQ; equalities proved
in one picture hold in the other.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import DomainError


def _coerce_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


class LaurentQ:
    """Laurent polynomial in q over the rationals."""

    __slots__ = ("c",)

    def __init__(self, coeffs=None):
        c = {}
        if coeffs:
            for k, v in coeffs.items():
                v = _coerce_fraction(v)
                if v != 0:
                    c[int(k)] = v
        self.c = c

    @classmethod
    def term(cls, coeff, power=0):
        return cls({power: coeff})

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def one(cls):
        return cls({0: 1})

    def is_zero(self):
        return not self.c

    def degree(self):
        return max(self.c) if self.c else None

    def valuation(self):
        return min(self.c) if self.c else None

    def bar(self):
        """The involution q -> q^(-1)."""
        return LaurentQ({-k: v for k, v in self.c.items()})

    def __add__(self, other):
        if isinstance(other, int):
            other = LaurentQ.term(other)
        out = dict(self.c)
        for k, v in other.c.items():
            out[k] = out.get(k, 0) + v
        return LaurentQ(out)

    __radd__ = __add__

    def __neg__(self):
        return LaurentQ({k: -v for k, v in self.c.items()})

    def __sub__(self, other):
        if isinstance(other, int):
            other = LaurentQ.term(other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return LaurentQ({k: v * other for k, v in self.c.items()})
        out = {}
        for k1, v1 in self.c.items():
            for k2, v2 in other.c.items():
                k = k1 + k2
                out[k] = out.get(k, 0) + v1 * v2
        return LaurentQ(out)

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            raise DomainError("LaurentQ supports nonnegative powers only")
        out = LaurentQ.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, int):
            other = LaurentQ.term(other)
        if not isinstance(other, LaurentQ):
            return NotImplemented
        return self.c == other.c

    def __hash__(self):
        return hash(frozenset(self.c.items()))

    def evaluate(self, q):
        """Numeric (or complex) value at a given q != 0."""
        return sum(v * q**k for k, v in self.c.items())

    def __repr__(self):
        if not self.c:
            return "0"
        parts = []
        for k in sorted(self.c, reverse=True):
            v = self.c[k]
            if k == 0:
                parts.append(f"{v}")
            elif k == 1:
                parts.append(f"{v}*q" if v != 1 else "q")
            else:
                parts.append(f"{v}*q^{k}" if v != 1 else f"q^{k}")
        return " + ".join(parts)


def quantum_integer_q(k):
    """[k] as a Laurent polynomial: q^(k-1) + q^(k-3) + ... + q^(1-k)."""
    if k < 0:
        raise DomainError("quantum integer needs k >= 0")
    return LaurentQ({k - 1 - 2 * i: 1 for i in range(k)})


class DeltaPoly:
    """Dense polynomial in delta with Fraction coefficients."""

    __slots__ = ("a",)

    def __init__(self, coeffs=()):
        a = [_coerce_fraction(x) for x in coeffs]
        while a and a[-1] == 0:
            a.pop()
        self.a = tuple(a)

    @classmethod
    def const(cls, x):
        return cls((x,))

    @classmethod
    def x(cls):
        return cls((0, 1))

    def is_zero(self):
        return not self.a

    def degree(self):
        return len(self.a) - 1

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DeltaPoly.const(other)
        n = max(len(self.a), len(other.a))
        return DeltaPoly(
            [
                (self.a[i] if i < len(self.a) else 0)
                + (other.a[i] if i < len(other.a) else 0)
                for i in range(n)
            ]
        )

    __radd__ = __add__

    def __neg__(self):
        return DeltaPoly([-x for x in self.a])

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DeltaPoly.const(other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return DeltaPoly([x * other for x in self.a])
        if not self.a or not other.a:
            return DeltaPoly()
        out = [Fraction(0)] * (len(self.a) + len(other.a) - 1)
        for i, x in enumerate(self.a):
            if x == 0:
                continue
            for j, y in enumerate(other.a):
                out[i + j] += x * y
        return DeltaPoly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DeltaPoly.const(other)
        if not isinstance(other, DeltaPoly):
            return NotImplemented
        return self.a == other.a

    def __hash__(self):
        return hash(self.a)

    def divmod(self, other):
        """Exact polynomial division with remainder."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.a)
        dn, dd = len(rem) - 1, other.degree()
        lead = other.a[-1]
        quot = [Fraction(0)] * max(dn - dd + 1, 0)
        while len(rem) - 1 >= dd and any(x != 0 for x in rem):
            while rem and rem[-1] == 0:
                rem.pop()
            if len(rem) - 1 < dd:
                break
            k = len(rem) - 1 - dd
            c = rem[-1] / lead
            quot[k] = c
            for j in range(dd + 1):
                rem[k + j] -= c * other.a[j]
            rem.pop()
        return DeltaPoly(quot), DeltaPoly(rem)

    def monic(self):
        if self.is_zero():
            return self
        lead = self.a[-1]
        return DeltaPoly([x / lead for x in self.a])

    def evaluate(self, delta):
        out = 0
        for x in reversed(self.a):
            out = out * delta + x
        return out

    def to_laurent_q(self):
        """Substitute delta = q + q^(-1)."""
        d = LaurentQ({1: 1, -1: 1})
        out = LaurentQ.zero()
        for x in reversed(self.a):
            out = out * d + LaurentQ.term(x)
        return out

    def __repr__(self):
        if not self.a:
            return "0"
        parts = []
        for i in range(len(self.a) - 1, -1, -1):
            x = self.a[i]
            if x == 0:
                continue
            if i == 0:
                parts.append(f"{x}")
            elif i == 1:
                parts.append(f"{x}*d" if x != 1 else "d")
            else:
                parts.append(f"{x}*d^{i}" if x != 1 else f"d^{i}")
        return " + ".join(parts)


def _poly_gcd(p, q):
    while not q.is_zero():
        _, r = p.divmod(q)
        p, q = q, r
    return p.monic() if not p.is_zero() else p


class DeltaRat:
    """Rational function in delta, kept in lowest terms with a monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if isinstance(num, (int, Fraction)):
            num = DeltaPoly.const(num)
        if den is None:
            den = DeltaPoly.const(1)
        elif isinstance(den, (int, Fraction)):
            den = DeltaPoly.const(den)
        if den.is_zero():
            raise ZeroDivisionError("DeltaRat with zero denominator")
        if num.is_zero():
            self.num, self.den = DeltaPoly(), DeltaPoly.const(1)
            return
        g = _poly_gcd(num, den)
        if g.degree() > 0:
            num, _ = num.divmod(g)
            den, _ = den.divmod(g)
        lead = den.a[-1]
        if lead != 1:
            num = num * (1 / lead)
            den = den * (1 / lead)
        self.num, self.den = num, den

    @classmethod
    def const(cls, x):
        return cls(DeltaPoly.const(x))

    @classmethod
    def delta_power(cls, n):
        return cls(DeltaPoly([0] * n + [1]))

    def is_zero(self):
        return self.num.is_zero()

    def _coerced(self, other):
        if isinstance(other, (int, Fraction)):
            return DeltaRat.const(other)
        if isinstance(other, DeltaPoly):
            return DeltaRat(other)
        if isinstance(other, DeltaRat):
            return other
        return None

    def __add__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return DeltaRat(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return DeltaRat(-self.num, self.den)

    def __sub__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return DeltaRat(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        if o.is_zero():
            raise ZeroDivisionError("division by zero DeltaRat")
        return DeltaRat(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return o / self

    def __eq__(self, other):
        o = self._coerced(other)
        if o is None:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        return hash((self.num, self.den))

    def evaluate(self, delta):
        d = self.den.evaluate(delta)
        if d == 0:
            raise ZeroDivisionError("denominator vanishes at this delta")
        return self.num.evaluate(delta) / d

    def __repr__(self):
        if self.den == DeltaPoly.const(1):
            return repr(self.num)
        return f"({self.num!r})/({self.den!r})"


def quantum_integer_delta(k):
    """[k] as an integer polynomial in delta, via [k+1] = delta*[k] - [k-1]."""
    if k < 0:
        raise DomainError("quantum integer needs k >= 0")
    prev, cur = DeltaPoly(), DeltaPoly.const(1)  # [0], [1]
    if k == 0:
        return prev
    x = DeltaPoly.x()
    for _ in range(k - 1):
        prev, cur = cur, x * cur - prev
    return cur


def quantum_integer_value(k, q):
    """[k] evaluated at a numeric q > 0, q != 1 (complex q allowed)."""
    if k == 0:
        return 0.0
    return (q**k - q ** (-k)) / (q - 1.0 / q)
