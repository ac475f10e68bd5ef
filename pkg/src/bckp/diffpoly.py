"""Differential polynomials in the Lax coordinates ``u_j`` over the rationals.

A monomial is a tuple of ``(index, order, exponent)`` triples sorted by
``(index, order)``; ``(2, 3, 1)`` is the factor ``u_{2,xxx}``.  The empty
tuple is the constant monomial.  Weights follow the grading
``wt(u_j) = j``, ``wt(d/dx) = 1``.

Values are immutable.  ``u(0)`` is the constant 1 and ``u(1)`` is zero, so
the normalisation of the Lax operator is applied wherever a coordinate is
constructed.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Iterator, Mapping

from .errors import MissingFlow, NotExact, SelfReferential, ZeroPolynomial

Monomial = tuple  # tuple[tuple[int, int, int], ...]

ONE_MONO: Monomial = ()


@lru_cache(maxsize=None)
def mono_weight(m: Monomial) -> int:
    return sum(e * (i + o) for i, o, e in m)


def mono_key(m: Monomial):
    """Graded order: weight first, then the sorted factor sequence."""
    return (mono_weight(m), m)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    out = []
    ia = ib = 0
    na, nb = len(a), len(b)
    while ia < na and ib < nb:
        fa, fb = a[ia], b[ib]
        ka, kb = fa[:2], fb[:2]
        if ka == kb:
            out.append((fa[0], fa[1], fa[2] + fb[2]))
            ia += 1
            ib += 1
        elif ka < kb:
            out.append(fa)
            ia += 1
        else:
            out.append(fb)
            ib += 1
    out.extend(a[ia:])
    out.extend(b[ib:])
    return tuple(out)


def _mono_with(m: Monomial, index: int, order: int, delta: int) -> Monomial:
    """Change the exponent of one atom by ``delta`` (dropping it at zero)."""
    out = []
    placed = False
    for f in m:
        if (f[0], f[1]) == (index, order):
            e = f[2] + delta
            if e:
                out.append((index, order, e))
            placed = True
        else:
            if not placed and (f[0], f[1]) > (index, order):
                out.append((index, order, delta))
                placed = True
            out.append(f)
    if not placed:
        out.append((index, order, delta))
    return tuple(out)


@lru_cache(maxsize=None)
def _mono_dx(m: Monomial) -> tuple:
    """Total derivative of a monomial as ``((monomial, int_coeff), ...)``."""
    acc: dict = {}
    for i, o, e in m:
        lowered = _mono_with(m, i, o, -1)
        raised = _mono_with(lowered, i, o + 1, 1)
        acc[raised] = acc.get(raised, 0) + e
    return tuple(acc.items())


def _coerce(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as a rational coefficient")


class DiffPoly:
    """Immutable differential polynomial with :class:`~fractions.Fraction` coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, object] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for m, c in items:
            c = _coerce(c)
            if c:
                m = tuple(m)
                acc[m] = acc.get(m, 0) + c
        self._set(acc)

    def _set(self, acc: dict) -> None:
        # Stored in canonical order so equal values have identical layouts.
        self._terms = {m: acc[m] for m in sorted((m for m, c in acc.items() if c), key=mono_key)}
        self._hash = None

    @classmethod
    def _from_dict(cls, acc: dict) -> "DiffPoly":
        obj = cls.__new__(cls)
        obj._set(acc)
        return obj

    # construction helpers

    @classmethod
    def const(cls, c) -> "DiffPoly":
        return cls({ONE_MONO: c})

    @classmethod
    def zero(cls) -> "DiffPoly":
        return cls()

    @classmethod
    def var(cls, index: int, order: int = 0) -> "DiffPoly":
        if index < 0 or order < 0:
            raise ValueError("variable index and derivative order must be non-negative")
        if index == 0:
            return cls.const(1) if order == 0 else cls()
        if index == 1:
            return cls()
        return cls({((index, order, 1),): 1})

    # inspection

    def terms(self) -> Iterator[tuple[Monomial, Fraction]]:
        return iter(self._terms.items())

    def monomials(self) -> list:
        return list(self._terms)

    def coeff(self, m: Monomial) -> Fraction:
        return self._terms.get(tuple(m), Fraction(0))

    def constant_term(self) -> Fraction:
        return self._terms.get(ONE_MONO, Fraction(0))

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def variables(self) -> set[int]:
        return {f[0] for m in self._terms for f in m}

    def atoms(self) -> set[tuple[int, int]]:
        return {(f[0], f[1]) for m in self._terms for f in m}

    def degree(self) -> int:
        """Polynomial degree (number of factors counted with multiplicity)."""
        return max((sum(f[2] for f in m) for m in self._terms), default=0)

    def weights(self) -> set[int]:
        return {mono_weight(m) for m in self._terms}

    def weight_parts(self) -> dict[int, "DiffPoly"]:
        parts: dict[int, dict] = {}
        for m, c in self._terms.items():
            parts.setdefault(mono_weight(m), {})[m] = c
        return {w: DiffPoly._from_dict(d) for w, d in sorted(parts.items())}

    # arithmetic

    def __add__(self, other):
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, 0) + c
        return DiffPoly._from_dict(acc)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._from_dict({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, 0) - c
        return DiffPoly._from_dict(acc)

    def __rsub__(self, other):
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        return other - self

    def scale(self, c) -> "DiffPoly":
        c = _coerce(c)
        if not c:
            return DiffPoly()
        return DiffPoly._from_dict({m: v * c for m, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            return self.scale(other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        if not self._terms or not other._terms:
            return DiffPoly()
        acc: dict = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = mono_mul(ma, mb)
                acc[m] = acc.get(m, 0) + ca * cb
        return DiffPoly._from_dict(acc)

    def __rmul__(self, other):
        if isinstance(other, (int, Rational)):
            return self.scale(other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, Rational)):
            return self.scale(Fraction(1) / _coerce(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = DiffPoly.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __eq__(self, other):
        other = _as_poly(other)
        if other is NotImplemented:
            return other
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self):
        return f"DiffPoly({str(self)!r})"

    def __str__(self):
        from .textio import format_poly

        return format_poly(self)

    # calculus (thin wrappers over the module functions)

    def dx(self, times: int = 1) -> "DiffPoly":
        return dx(self, times)

    def subs(self, bindings: Mapping[int, "DiffPoly"]) -> "DiffPoly":
        return substitute(self, bindings)


def _as_poly(x):
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Rational)):
        return DiffPoly.const(x)
    return NotImplemented


def u(index: int, order: int = 0) -> DiffPoly:
    """The coordinate ``u_index`` differentiated ``order`` times."""
    return DiffPoly.var(index, order)


def const(c) -> DiffPoly:
    return DiffPoly.const(c)


ZERO = DiffPoly()
ONE = DiffPoly.const(1)


def ring_arith(a: DiffPoly, b: DiffPoly, op: str) -> DiffPoly:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown ring operation {op!r}")


def dx(p: DiffPoly, times: int = 1) -> DiffPoly:
    """Total x-derivative, applied ``times`` times."""
    if times < 0:
        raise ValueError("derivative order must be non-negative")
    for _ in range(times):
        if not p._terms:
            return p
        acc: dict = {}
        for m, c in p._terms.items():
            for mm, k in _mono_dx(m):
                acc[mm] = acc.get(mm, 0) + c * k
        p = DiffPoly._from_dict(acc)
    return p


def partial(p: DiffPoly, index: int, order: int) -> DiffPoly:
    """Partial derivative with respect to the jet coordinate ``u_index^(order)``."""
    acc: dict = {}
    for m, c in p._terms.items():
        for i, o, e in m:
            if i == index and o == order:
                mm = _mono_with(m, i, o, -1)
                acc[mm] = acc.get(mm, 0) + c * e
    return DiffPoly._from_dict(acc)


def variational_derivative(p: DiffPoly, j: int) -> DiffPoly:
    """Euler operator ``sum_d (-D)^d dp/du_j^(d)``."""
    if j < 2:
        raise ValueError("variational derivative needs a coordinate index >= 2")
    orders = sorted({o for i, o in p.atoms() if i == j})
    out = DiffPoly()
    for d in orders:
        term = dx(partial(p, j, d), d)
        out = out - term if d % 2 else out + term
    return out


def integrate_exact(p: DiffPoly) -> DiffPoly:
    """Return the constant-free ``q`` with ``dx(q) == p``.

    Peels off one derivative order per round.  If ``o`` is the highest
    order present, an exact ``p`` is linear in the order-``o`` atoms
    ``u_i^(o)`` and their coefficients ``A_i`` form a gradient in the
    variables ``w_i = u_i^(o-1)``.  The potential of a term homogeneous of
    degree ``d`` in the ``w`` is ``w_i A_i / (d + 1)``; subtracting its
    derivative clears order ``o``.  Anything left at order ``o`` (or a
    remainder with no derivatives at all) proves ``p`` is not exact.
    """
    if p.constant_term():
        raise NotExact("a nonzero constant has no differential-polynomial antiderivative")
    rem = DiffPoly._from_dict(dict(p._terms))
    out = DiffPoly()
    while not rem.is_zero():
        o = max(f[1] for m, _ in rem.terms() for f in m)
        if o == 0:
            raise NotExact(f"{rem} has no x-derivative left to integrate")
        step: dict = {}
        for m, c in rem.terms():
            top = [f for f in m if f[1] == o]
            if not top:
                continue
            if len(top) > 1 or top[0][2] > 1:
                raise NotExact(f"{DiffPoly({m: 1})} is nonlinear in the top derivatives")
            i = top[0][0]
            d = sum(f[2] for f in m if f[1] == o - 1)
            lowered = _mono_with(_mono_with(m, i, o, -1), i, o - 1, 1)
            step[lowered] = step.get(lowered, 0) + c / (d + 1)
        q = DiffPoly._from_dict({k: v for k, v in step.items() if v})
        out = out + q
        rem = rem - dx(q)
        if any(f[1] >= o for m, _ in rem.terms() for f in m):
            raise NotExact("top-order coefficients are not a gradient")
    return out


def is_exact(p: DiffPoly) -> bool:
    try:
        integrate_exact(p)
    except NotExact:
        return False
    return True


def substitute(p: DiffPoly, bindings: Mapping[int, DiffPoly]) -> DiffPoly:
    """Replace every ``u_j^(d)`` with ``dx^d(bindings[j])``."""
    if not bindings:
        return p
    bound = set(bindings)
    for j, b in bindings.items():
        if b.variables() & bound:
            raise SelfReferential(f"binding for u{j} mentions a bound variable")
    cache: dict = {}

    def image(i: int, o: int) -> DiffPoly:
        key = (i, o)
        if key not in cache:
            cache[key] = dx(bindings[i], o)
        return cache[key]

    acc: dict = {}
    pending = DiffPoly()
    for m, c in p._terms.items():
        if not any(f[0] in bound for f in m):
            acc[m] = acc.get(m, 0) + c
            continue
        free = tuple(f for f in m if f[0] not in bound)
        term = DiffPoly({free: c})
        for i, o, e in m:
            if i in bound:
                term = term * image(i, o) ** e
        pending = pending + term
    return DiffPoly._from_dict(acc) + pending


def evolve(p: DiffPoly, flows: Mapping[int, DiffPoly]) -> DiffPoly:
    """Time derivative of ``p`` given ``u_{j,t} = flows[j]`` (chain rule)."""
    missing = p.variables() - set(flows)
    if missing:
        raise MissingFlow(f"no flow given for u{min(missing)}")
    out = DiffPoly()
    for i, o in sorted(p.atoms()):
        out = out + partial(p, i, o) * dx(flows[i], o)
    return out


def weight(p: DiffPoly) -> int | None:
    """Common weight of all monomials, or ``None`` when ``p`` is inhomogeneous."""
    if p.is_zero():
        raise ZeroPolynomial("the zero polynomial has no weight")
    ws = p.weights()
    return ws.pop() if len(ws) == 1 else None
