"""Pseudo-differential operators with differential-polynomial coefficients.

Two representations:

* :class:`LaurentPDO` is a series ``sum_d c_d D^d`` known exactly at every
  degree ``>= min_deg``.  ``min_deg=None`` means the stored terms are the
  whole operator.  Composition propagates cutoffs and refuses to guess.
* :class:`NonlocalPDO` is a differential operator plus a finite sum of
  ``P D^-1 Q`` terms.  Its tails are kept in a canonical form so that two
  equal operators print identically.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Mapping

from .diffpoly import ONE, DiffPoly, dx, integrate_exact, mono_key, substitute
from .errors import InsufficientCutoff, NegativeJ, NotExact, TooNonlocal


@lru_cache(maxsize=None)
def binom(k: int, j: int) -> Fraction:
    """Falling-factorial binomial ``k(k-1)...(k-j+1)/j!``; ``k`` may be negative."""
    if j < 0:
        raise NegativeJ(f"binomial lower index must be >= 0, got {j}")
    num = 1
    den = 1
    for i in range(j):
        num *= k - i
        den *= i + 1
    return Fraction(num, den)


def _poly(x) -> DiffPoly:
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Rational)):
        return DiffPoly.const(x)
    raise TypeError(f"expected a DiffPoly coefficient, got {type(x).__name__}")


class _Derivs:
    """Lazily extended list ``[g, g', g'', ...]``."""

    __slots__ = ("seq",)

    def __init__(self, g: DiffPoly):
        self.seq = [g]

    def __getitem__(self, k: int) -> DiffPoly:
        while len(self.seq) <= k:
            self.seq.append(dx(self.seq[-1]))
        return self.seq[k]


class LaurentPDO:
    """Degree-indexed coefficients, exact at every degree ``>= min_deg``."""

    __slots__ = ("_coeffs", "min_deg")

    def __init__(self, coeffs: Mapping[int, DiffPoly] | Iterable = (), min_deg: int | None = None):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[int, DiffPoly] = {}
        for d, c in items:
            c = _poly(c)
            if min_deg is not None and d < min_deg:
                continue
            acc[d] = acc[d] + c if d in acc else c
        self._coeffs = {d: acc[d] for d in sorted(acc, reverse=True) if acc[d]}
        self.min_deg = min_deg

    # construction

    @classmethod
    def d(cls, k: int = 1, coeff=1) -> "LaurentPDO":
        """``coeff * D^k`` as a complete operator."""
        return cls({k: _poly(coeff)})

    @classmethod
    def mult(cls, p) -> "LaurentPDO":
        """Multiplication by ``p``."""
        return cls({0: _poly(p)})

    @classmethod
    def zero(cls, min_deg: int | None = None) -> "LaurentPDO":
        return cls({}, min_deg)

    # inspection

    def items(self):
        return self._coeffs.items()

    def degrees(self) -> list[int]:
        return list(self._coeffs)

    def coeff(self, d: int) -> DiffPoly:
        if self.min_deg is not None and d < self.min_deg:
            raise InsufficientCutoff(f"coefficient of D^{d} is below the known cutoff {self.min_deg}")
        return self._coeffs.get(d, DiffPoly())

    @property
    def max_deg(self) -> int | None:
        return next(iter(self._coeffs), None)

    @property
    def low_deg(self) -> int | None:
        """Lowest stored degree."""
        return min(self._coeffs) if self._coeffs else None

    @property
    def complete(self) -> bool:
        return self.min_deg is None

    def is_zero(self) -> bool:
        return not self._coeffs

    def is_local(self) -> bool:
        return self.complete and all(d >= 0 for d in self._coeffs)

    def truncate(self, want_min: int) -> "LaurentPDO":
        _require(self, want_min, "operand")
        return LaurentPDO(self._coeffs, want_min)

    def map_coeffs(self, fn) -> "LaurentPDO":
        return LaurentPDO({d: fn(c) for d, c in self._coeffs.items()}, self.min_deg)

    def subs(self, bindings) -> "LaurentPDO":
        return self.map_coeffs(lambda c: substitute(c, bindings))

    # linear structure

    def _combine(self, other: "LaurentPDO", sign: int) -> "LaurentPDO":
        other = as_laurent(other)
        mins = [m for m in (self.min_deg, other.min_deg) if m is not None]
        acc = dict(self._coeffs)
        for d, c in other._coeffs.items():
            c = c if sign > 0 else -c
            acc[d] = acc[d] + c if d in acc else c
        return LaurentPDO(acc, max(mins) if mins else None)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return LaurentPDO({d: -c for d, c in self._coeffs.items()}, self.min_deg)

    def scale(self, c) -> "LaurentPDO":
        return LaurentPDO({d: v.scale(c) for d, v in self._coeffs.items()}, self.min_deg)

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, LaurentPDO):
            return NotImplemented
        return self.min_deg == other.min_deg and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.min_deg, tuple(self._coeffs.items())))

    def __repr__(self):
        return f"LaurentPDO({str(self)!r})"

    def __str__(self):
        from .textio import format_operator

        return format_operator(self)


def as_laurent(x) -> LaurentPDO:
    if isinstance(x, LaurentPDO):
        return x
    if isinstance(x, (DiffPoly, int, Rational)):
        return LaurentPDO.mult(x)
    raise TypeError(f"cannot treat {type(x).__name__} as an operator")


def _top(op: LaurentPDO) -> int | None:
    if op._coeffs:
        return op.max_deg
    if op.min_deg is not None:
        return op.min_deg - 1
    return None


def _require(op: LaurentPDO, depth: int, name: str) -> None:
    if op.min_deg is not None and op.min_deg > depth:
        raise InsufficientCutoff(f"{name} is exact only down to D^{op.min_deg}; D^{depth} is required")


def compose(a, b, want_min: int | None = None) -> LaurentPDO:
    """Product ``a o b`` by the generalised Leibniz rule.

    With ``want_min=None`` both operands must be complete and the expansion
    finite (``a`` differential); otherwise the result is exact at degrees
    ``>= want_min`` and operands must be known to ``want_min - max_deg`` of
    the other factor.
    """
    a, b = as_laurent(a), as_laurent(b)
    if want_min is None:
        if not (a.complete and b.complete):
            raise InsufficientCutoff("truncated operands need an explicit want_min")
        if not b.is_zero() and any(d < 0 for d in a._coeffs):
            raise InsufficientCutoff("left factor has negative degrees; the expansion is infinite")
    else:
        tb, ta = _top(b), _top(a)
        if tb is not None:
            _require(a, want_min - tb, "left operand")
        if ta is not None:
            _require(b, want_min - ta, "right operand")
    acc: dict[int, DiffPoly] = {}
    bders = [(j, _Derivs(g)) for j, g in b._coeffs.items()]
    for i, f in a._coeffs.items():
        for j, gd in bders:
            k = 0
            while True:
                deg = i + j - k
                if want_min is not None and deg < want_min:
                    break
                if i >= 0 and k > i:
                    break
                term = (f * gd[k]).scale(binom(i, k))
                acc[deg] = acc[deg] + term if deg in acc else term
                k += 1
    return LaurentPDO(acc, want_min)


leibniz_compose = compose


def adjoint(a, want_min: int | None = None) -> LaurentPDO:
    """Formal adjoint: ``(f D^d)* = (-1)^d D^d o f``."""
    a = as_laurent(a)
    if want_min is None:
        if not a.is_local():
            raise InsufficientCutoff("adjoint of a non-differential operator needs want_min")
    else:
        _require(a, want_min, "operand")
    acc: dict[int, DiffPoly] = {}
    for d, f in a._coeffs.items():
        if want_min is not None and d < want_min:
            continue
        fd = _Derivs(f)
        sign = -1 if d % 2 else 1
        k = 0
        while True:
            deg = d - k
            if want_min is not None and deg < want_min:
                break
            if d >= 0 and k > d:
                break
            term = fd[k].scale(sign * binom(d, k))
            acc[deg] = acc[deg] + term if deg in acc else term
            k += 1
    return LaurentPDO(acc, want_min)


def project(a, part: str) -> LaurentPDO:
    """``plus`` keeps degrees >= 0, ``minus`` keeps degrees < 0."""
    a = as_laurent(a)
    if part == "plus":
        if a.min_deg is not None and a.min_deg > 0:
            raise InsufficientCutoff("differential part is not fully known")
        return LaurentPDO({d: c for d, c in a.items() if d >= 0})
    if part == "minus":
        return LaurentPDO({d: c for d, c in a.items() if d < 0}, a.min_deg)
    raise ValueError(f"part must be 'plus' or 'minus', not {part!r}")


def power(l, m: int, want_min: int | None = None) -> LaurentPDO:
    """``l^m`` exact at degrees ``>= want_min`` by repeated composition."""
    l = as_laurent(l)
    if m < 1:
        raise ValueError("power needs m >= 1")
    if want_min is None:
        out = l
        for _ in range(m - 1):
            out = compose(out, l)
        return out
    top = _top(l)
    top = 0 if top is None else top
    out = l.truncate(want_min - (m - 1) * top)
    for i in range(2, m + 1):
        out = compose(out, l, want_min - (m - i) * top)
    return out


def apply_to_poly(op, p: DiffPoly) -> DiffPoly:
    """Action of an operator on a differential polynomial.

    ``D^-1`` acts through :func:`~bckp.diffpoly.integrate_exact`; anything
    more nonlocal than that has no exact action and is refused.
    """
    if isinstance(op, NonlocalPDO):
        out = apply_to_poly(op.local, p)
        for P, Q in op.tails:
            out = out + P * integrate_exact(Q * p)
        return out
    op = as_laurent(op)
    if not op.complete:
        raise InsufficientCutoff("a truncated series has unknown low-order terms and cannot be applied")
    out = DiffPoly()
    pd = _Derivs(p)
    for d, c in op.items():
        if d <= -2:
            raise TooNonlocal(f"term of degree {d} cannot act exactly")
        if d == -1:
            out = out + c * integrate_exact(p)
        else:
            out = out + c * pd[d]
    return out


def substitute_op(op, bindings):
    if isinstance(op, NonlocalPDO):
        return op.subs(bindings)
    return as_laurent(op).subs(bindings)


# --------------------------------------------------------------------------
# nonlocal operators


def _canonical_tails(pairs: Iterable[tuple[DiffPoly, DiffPoly]]) -> tuple:
    """Canonical ``((P1, Q1), ...)`` for the tensor ``sum P_i (x) Q_i``.

    The ``Q`` side is put in reduced row-echelon form (monomials ordered
    descending, pivots normalised to 1); each ``P`` is the matching column.
    """
    tensor: dict = {}
    for P, Q in pairs:
        for mp, cp in P.terms():
            for mq, cq in Q.terms():
                key = (mp, mq)
                tensor[key] = tensor.get(key, 0) + cp * cq
    tensor = {k: v for k, v in tensor.items() if v}
    if not tensor:
        return ()
    pmonos = sorted({k[0] for k in tensor}, key=mono_key, reverse=True)
    qmonos = sorted({k[1] for k in tensor}, key=mono_key, reverse=True)
    qidx = {m: i for i, m in enumerate(qmonos)}
    rows = []
    for mp in pmonos:
        row = [Fraction(0)] * len(qmonos)
        for (a, b), v in tensor.items():
            if a == mp:
                row[qidx[b]] = v
        rows.append(row)
    # row space of the P-by-Q coefficient matrix
    basis = [r[:] for r in rows]
    pivots = []
    r = 0
    for col in range(len(qmonos)):
        piv = next((i for i in range(r, len(basis)) if basis[i][col]), None)
        if piv is None:
            continue
        basis[r], basis[piv] = basis[piv], basis[r]
        lead = basis[r][col]
        basis[r] = [x / lead for x in basis[r]]
        for i in range(len(basis)):
            if i != r and basis[i][col]:
                f = basis[i][col]
                basis[i] = [x - f * y for x, y in zip(basis[i], basis[r])]
        pivots.append(col)
        r += 1
    out = []
    for k, col in enumerate(pivots):
        Q = DiffPoly({qmonos[j]: basis[k][j] for j in range(len(qmonos)) if basis[k][j]})
        P = DiffPoly({pmonos[i]: rows[i][col] for i in range(len(pmonos)) if rows[i][col]})
        out.append((P, Q))
    return tuple(out)


class NonlocalPDO:
    """Differential operator plus a finite sum of ``P D^-1 Q`` terms."""

    __slots__ = ("local", "tails")

    def __init__(self, local=None, tails: Iterable[tuple[DiffPoly, DiffPoly]] = ()):
        local = LaurentPDO() if local is None else as_laurent(local)
        extra = []
        if not local.complete:
            raise InsufficientCutoff("local part of a nonlocal operator must be complete")
        if any(d < 0 for d in local.degrees()):
            c = local.coeff(-1)
            if any(d < -1 for d in local.degrees()):
                raise TooNonlocal("only D^-1 terms can be carried as tails")
            extra.append((c, ONE))
            local = LaurentPDO({d: v for d, v in local.items() if d >= 0})
        self.local = local
        self.tails = _canonical_tails(list(tails) + extra)

    @classmethod
    def inv_d(cls, c=1) -> "NonlocalPDO":
        """``(c D)^-1 = (1/c) D^-1``."""
        return cls(None, [(DiffPoly.const(Fraction(1) / Fraction(c)), ONE)])

    @classmethod
    def tail(cls, P, Q) -> "NonlocalPDO":
        return cls(None, [(_poly(P), _poly(Q))])

    def is_local(self) -> bool:
        return not self.tails

    def is_zero(self) -> bool:
        return self.local.is_zero() and not self.tails

    def subs(self, bindings) -> "NonlocalPDO":
        return NonlocalPDO(self.local.subs(bindings), [(substitute(P, bindings), substitute(Q, bindings)) for P, Q in self.tails])

    def map_coeffs(self, fn) -> "NonlocalPDO":
        return NonlocalPDO(self.local.map_coeffs(fn), [(fn(P), fn(Q)) for P, Q in self.tails])

    def __add__(self, other):
        other = as_nonlocal(other)
        return NonlocalPDO(self.local + other.local, self.tails + other.tails)

    __radd__ = __add__

    def __neg__(self):
        return NonlocalPDO(-self.local, [(-P, Q) for P, Q in self.tails])

    def __sub__(self, other):
        return self + (-as_nonlocal(other))

    def scale(self, c) -> "NonlocalPDO":
        return NonlocalPDO(self.local.scale(c), [(P.scale(c), Q) for P, Q in self.tails])

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose_nonlocal(self, other)

    def __eq__(self, other):
        if isinstance(other, LaurentPDO):
            try:
                other = as_nonlocal(other)
            except (TooNonlocal, InsufficientCutoff):
                return False
        if not isinstance(other, NonlocalPDO):
            return NotImplemented
        return self.local == other.local and self.tails == other.tails

    def __hash__(self):
        return hash((self.local, self.tails))

    def laurent(self, want_min: int) -> LaurentPDO:
        """Series expansion ``P D^-1 Q = sum_k (-1)^k P Q^(k) D^(-1-k)``."""
        out = LaurentPDO(dict(self.local.items()), want_min)
        acc: dict[int, DiffPoly] = {}
        for P, Q in self.tails:
            qd = _Derivs(Q)
            for k in range(0, -want_min):
                term = (P * qd[k]).scale(-1 if k % 2 else 1)
                acc[-1 - k] = acc[-1 - k] + term if -1 - k in acc else term
        return out + LaurentPDO(acc, want_min)

    def __repr__(self):
        return f"NonlocalPDO({str(self)!r})"

    def __str__(self):
        from .textio import format_operator

        return format_operator(self)


def as_nonlocal(x) -> NonlocalPDO:
    if isinstance(x, NonlocalPDO):
        return x
    return NonlocalPDO(as_laurent(x))


def _local_times_tail(f: DiffPoly, j: int, P: DiffPoly, Q: DiffPoly) -> NonlocalPDO:
    # f D^j o P D^-1 Q: expand D^j o P; D^(j-i) D^-1 = D^(j-i-1) for i < j
    local = LaurentPDO()
    pd = _Derivs(P)
    for i in range(j):
        c = (f * pd[i]).scale(binom(j, i))
        local = local + compose(LaurentPDO.d(j - i - 1, c), LaurentPDO.mult(Q))
    return NonlocalPDO(local, [(f * pd[j], Q)])


def _tail_times_local(P: DiffPoly, Q: DiffPoly, g: DiffPoly, j: int) -> NonlocalPDO:
    # D^-1 h D^j = sum_{i<j} (-1)^i h^(i) D^(j-1-i) + (-1)^j D^-1 h^(j)
    h = _Derivs(Q * g)
    local = {}
    for i in range(j):
        local[j - 1 - i] = (P * h[i]).scale(-1 if i % 2 else 1)
    return NonlocalPDO(LaurentPDO(local), [(P.scale(-1 if j % 2 else 1), h[j])])


def _tail_times_tail(P1, Q1, P2, Q2) -> NonlocalPDO:
    # D^-1 W' D^-1 = W D^-1 - D^-1 W
    try:
        W = integrate_exact(Q1 * P2)
    except NotExact as exc:
        raise NotExact(f"nested inverse derivative: {Q1 * P2} is not exact", where="compose_nonlocal") from exc
    return NonlocalPDO(None, [(P1 * W, Q2), (-P1, W * Q2)])


def compose_nonlocal(a, b) -> NonlocalPDO:
    """Exact product of nonlocal operators (raises :class:`NotExact` when not closed)."""
    a, b = as_nonlocal(a), as_nonlocal(b)
    out_local = compose(a.local, b.local)
    parts = []
    for P, Q in b.tails:
        for j, f in a.local.items():
            parts.append(_local_times_tail(f, j, P, Q))
    for P, Q in a.tails:
        for j, g in b.local.items():
            parts.append(_tail_times_local(P, Q, g, j))
        for P2, Q2 in b.tails:
            parts.append(_tail_times_tail(P, Q, P2, Q2))
    local = out_local
    tails = []
    for part in parts:
        local = local + part.local
        tails.extend(part.tails)
    return NonlocalPDO(local, tails)


def operator_weight_shift(op) -> set[int]:
    """Weight change ``wt(coeff) + degree`` of every term (tails counted as degree -1)."""
    op = as_nonlocal(op)
    out = set()
    for d, c in op.local.items():
        out |= {w + d for w in c.weights()}
    for P, Q in op.tails:
        out |= {wp + wq - 1 for wp in P.weights() for wq in Q.weights()}
    return out
