"""Lax operators of the BKP/CKP hierarchies, their flows and reductions.

The Lax operator is ``L = D + u2 D^-1 + u3 D^-2 + ...``; ``p_j(m)`` is
the coefficient of ``D^j`` in ``L^m``.  The constraint
``L* = -D^k L D^-k`` (``k=1`` BKP, ``k=0`` CKP) fixes every odd
coordinate as a constant-coefficient combination of x-derivatives of even
ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .diffpoly import DiffPoly, substitute, u
from .errors import BadIndex, InsufficientCutoff, NonlinearPivot
from .pdo import LaurentPDO, adjoint, apply_to_poly, binom, compose, power


@dataclass(frozen=True)
class HierarchyKind:
    tag: str

    def __post_init__(self):
        if self.tag not in ("BKP", "CKP", "KP"):
            raise ValueError(f"unknown hierarchy {self.tag!r}")

    @property
    def k(self) -> int | None:
        return {"BKP": 1, "CKP": 0}.get(self.tag)

    @property
    def constrained(self) -> bool:
        return self.tag != "KP"

    def __str__(self):
        return self.tag


BKP = HierarchyKind("BKP")
CKP = HierarchyKind("CKP")
KP = HierarchyKind("KP")


def kind_from_name(name) -> HierarchyKind:
    if isinstance(name, HierarchyKind):
        return name
    return HierarchyKind(str(name).upper())


def _constrained(kind) -> HierarchyKind:
    kind = kind_from_name(kind)
    if not kind.constrained:
        raise BadIndex("the KP hierarchy has no odd-variable constraint")
    return kind


@dataclass(frozen=True)
class LaxSpec:
    """Which Lax operator to build and how much of it to keep."""

    kind: HierarchyKind
    var_cutoff: int
    deg_cutoff: int | None = None
    eliminate_odd: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", kind_from_name(self.kind))
        if self.var_cutoff < 2:
            raise ValueError("var_cutoff must be at least 2")
        if self.deg_cutoff is None:
            object.__setattr__(self, "deg_cutoff", 1 - self.var_cutoff)
        if self.deg_cutoff > 1 - self.var_cutoff:
            raise ValueError("deg_cutoff must reach the leading term of every retained variable")
        if self.eliminate_odd and not self.kind.constrained:
            raise ValueError("odd variables can only be eliminated under the BKP/CKP constraint")


# ---------------------------------------------------------------- B operators


def _a_scalar(j: int, mu: int, k: int) -> Fraction:
    """Scalar of ``A_{j,mu} = -1/2 C(-j+k-1, mu) D^mu``."""
    return -Fraction(1, 2) * binom(-j + k - 1, mu)


@lru_cache(maxsize=None)
def b_scalar(l: int, mu: int, k: int) -> Fraction:
    """Scalar ``c`` of ``B_{-2l,-2mu+1} = c D^(2l-2mu+1)``, by recursion on ``l``."""
    out = _a_scalar(-2 * l, 2 * l - 2 * mu + 1, k)
    for g in range(1, l - mu + 1):
        out += _a_scalar(-2 * l, 2 * g, k) * b_scalar(l - g, mu, k)
    return out


def b_operator(l: int, mu: int, kind) -> LaurentPDO:
    kind = _constrained(kind)
    if l < 1 or not 1 <= mu <= l:
        raise BadIndex(f"B_(-{2 * l},{-2 * mu + 1}) needs 1 <= mu <= l")
    return LaurentPDO.d(2 * l - 2 * mu + 1, b_scalar(l, mu, kind.k))


def eliminate_odd(l: int, kind) -> DiffPoly:
    """``u_{2l+1}`` in terms of ``u_2, u_4, ..., u_{2l}``."""
    kind = _constrained(kind)
    if l < 1:
        raise BadIndex("odd elimination starts at u3 (l >= 1)")
    return sum(
        (u(2 * mu, 2 * l - 2 * mu + 1).scale(b_scalar(l, mu, kind.k)) for mu in range(1, l + 1)),
        DiffPoly(),
    )


def elimination_table(kind, var_cutoff: int) -> dict[int, DiffPoly]:
    kind = _constrained(kind)
    return {2 * l + 1: eliminate_odd(l, kind) for l in range(1, (var_cutoff - 1) // 2 + 1)}


# ------------------------------------------------------------------ Lax side


def make_lax(spec: LaxSpec) -> LaurentPDO:
    """``D + sum_{l=2..V} u_l D^(1-l)``, known down to ``D^(1-V)``."""
    coeffs = {1: DiffPoly.const(1)}
    for l in range(2, spec.var_cutoff + 1):
        coeffs[1 - l] = u(l)
    lax = LaurentPDO(coeffs, 1 - spec.var_cutoff)
    if spec.eliminate_odd:
        lax = lax.subs(elimination_table(spec.kind, spec.var_cutoff))
    return lax


def constraint_residual(spec: LaxSpec, want_min: int, k: int | None = None) -> LaurentPDO:
    """``L* + D^k L D^-k``, exact at degrees ``>= want_min``."""
    if k is None:
        k = spec.kind.k
        if k is None:
            raise ValueError("KP carries no constraint; pass k explicitly")
    lax = make_lax(spec)
    if lax.min_deg > want_min:
        raise InsufficientCutoff(f"Lax operator known to D^{lax.min_deg}, residual wanted to D^{want_min}")
    star = adjoint(lax, want_min)
    if k == 0:
        return star + lax.truncate(want_min)
    conj = compose(compose(LaurentPDO.d(k), lax, want_min + k), LaurentPDO.d(-k), want_min)
    return star + conj


def o_operator(j: int, h: int) -> LaurentPDO:
    """``O_{j,h}`` in KP coordinates (odd variables not eliminated)."""
    if j < 2 or not 1 <= h <= j:
        raise BadIndex(f"O_({j},{h}) needs j >= 2 and 1 <= h <= j")
    terms = []
    for r in range(0, j - h + 1):
        s = j - h - r
        terms.append((s, u(r).scale(binom(1 - r, s))))
        terms.append((0, -u(r, s).scale(binom(-h, s))))
    return LaurentPDO(terms)


def q_operator(j: int, h: int, kind, eliminate: bool = True) -> LaurentPDO:
    """``Q_{jh} = O_{2j,2h-1} + sum_{mu=h..j} O_{2j,2mu} o B_{-2mu,-2h+1}``."""
    kind = _constrained(kind)
    if j < 1 or not 1 <= h <= j:
        raise BadIndex(f"Q_({j},{h}) needs 1 <= h <= j")
    out = o_operator(2 * j, 2 * h - 1)
    for mu in range(h, j + 1):
        out = out + compose(o_operator(2 * j, 2 * mu), b_operator(mu, h, kind))
    if eliminate:
        out = out.subs(elimination_table(kind, 2 * j))
    return out


@lru_cache(maxsize=None)
def _lax_power(kind: HierarchyKind, m: int, want_min: int, n_red: int | None) -> LaurentPDO:
    """``L^m`` exact at ``>= want_min``; reduced to ``u2..u_{2n}`` if ``n_red`` is set."""
    var_cutoff = m - want_min
    lax = make_lax(LaxSpec(kind, max(var_cutoff, 2)))
    if n_red is not None:
        lax = lax.subs(reduction_map(kind, n_red, var_cutoff))
    return power(lax, m, want_min)


def lax_power(kind, m: int, want_min: int, n_red: int | None = None) -> LaurentPDO:
    """Constrained (and optionally reduced) ``L^m`` exact down to ``D^want_min``."""
    return _lax_power(_constrained(kind), m, want_min, n_red)


def _needed_vars(j: int, m: int) -> int:
    return 2 * (j + m)


def flow(kind, j: int, m: int, var_cutoff: int | None = None) -> DiffPoly:
    """Right-hand side of ``u_{2j, t_{2m+1}}`` in even variables."""
    kind = _constrained(kind)
    if j < 1 or m < 0:
        raise BadIndex("flow needs j >= 1 and m >= 0")
    need = _needed_vars(j, m)
    if var_cutoff is not None and var_cutoff < need:
        raise InsufficientCutoff(f"u{2 * j} t{2 * m + 1}-flow needs variables up to u{need}, got u{var_cutoff}")
    return _flow(kind, j, m, None)


@lru_cache(maxsize=None)
def _flow(kind: HierarchyKind, j: int, m: int, n_red: int | None) -> DiffPoly:
    lm = lax_power(kind, 2 * m + 1, -(2 * j - 1), n_red)
    out = DiffPoly()
    for h in range(1, j + 1):
        q = q_operator(j, h, kind)
        if n_red is not None:
            q = q.subs(reduction_map(kind, n_red, 2 * j))
        out = out + apply_to_poly(q, lm.coeff(-(2 * h - 1)))
    return out


def flow_via_o(kind, j: int, m: int) -> DiffPoly:
    """Same flow as :func:`flow` from ``sum_h O_{2j,h} p_{-h}`` over all ``h``."""
    kind = _constrained(kind)
    lm = lax_power(kind, 2 * m + 1, -2 * j)
    table = elimination_table(kind, 2 * j + 1)
    out = DiffPoly()
    for h in range(1, 2 * j + 1):
        out = out + apply_to_poly(o_operator(2 * j, h).subs(table), lm.coeff(-h))
    return out


# ---------------------------------------------------------------- reductions


@lru_cache(maxsize=None)
def _reduce(kind: HierarchyKind, n: int, upto: int) -> tuple:
    if upto < 2 * n + 2:
        return ()
    prev = dict(_reduce(kind, n, upto - 2))
    top = upto
    h = (top - 2 * n) // 2
    deg = -(2 * h - 1)
    lax = make_lax(LaxSpec(kind, top)).subs(prev)
    p = power(lax, 2 * n + 1, deg).coeff(deg)
    pivot = ((top, 0, 1),)
    c = p.coeff(pivot)
    others = [m for m, _ in p.terms() if m != pivot and any(f[0] == top for f in m)]
    if not c or others:
        raise NonlinearPivot(f"u{top} does not occur linearly in p_{deg}({2 * n + 1})")
    rest = p - DiffPoly({pivot: c})
    prev[top] = rest.scale(-1 / c)
    return tuple(sorted(prev.items()))


def reduce(kind, n: int, upto: int) -> dict[int, DiffPoly]:
    """Bindings ``u_{2n+2}, ..., u_upto`` in ``u_2..u_{2n}`` under ``L^{2n+1} = (L^{2n+1})_+``."""
    kind = _constrained(kind)
    if n < 1:
        raise BadIndex("reduction needs n >= 1")
    if upto % 2 or upto < 2 * n + 2:
        raise BadIndex(f"upto must be even and >= {2 * n + 2}")
    return dict(_reduce(kind, n, upto))


@lru_cache(maxsize=None)
def _reduction_map(kind: HierarchyKind, n: int, var_cutoff: int) -> tuple:
    top_even = var_cutoff - (var_cutoff % 2)
    bindings = dict(_reduce(kind, n, top_even)) if top_even >= 2 * n + 2 else {}
    out = dict(bindings)
    for j in range(3, var_cutoff + 1, 2):
        out[j] = substitute(eliminate_odd((j - 1) // 2, kind), bindings)
    return tuple(sorted(out.items()))


def reduction_map(kind, n: int, var_cutoff: int) -> dict[int, DiffPoly]:
    """Every ``u_j`` (``j <= var_cutoff``) other than ``u2..u_{2n}`` as a polynomial in them."""
    return dict(_reduction_map(_constrained(kind), n, var_cutoff))


def even_residual_check(kind, n: int, h: int) -> DiffPoly:
    """``p_{-2h}(2n+1)`` on the reduced manifold (vanishes identically)."""
    kind = _constrained(kind)
    return lax_power(kind, 2 * n + 1, -2 * h, n).coeff(-2 * h)


def reduced_flow(kind, n: int, j: int, m: int, literal: bool = False) -> DiffPoly:
    """``u_{2j,t_{2m+1}}`` restricted to the ``(2n+1)``-reduction, in ``u2..u_{2n}``.

    The default path builds the reduced Lax operator first; ``literal=True``
    substitutes the reduction into the unreduced flow instead.
    """
    kind = _constrained(kind)
    if not 1 <= j <= n:
        raise BadIndex("reduced flows exist for 1 <= j <= n")
    if literal:
        need = _needed_vars(j, m)
        return substitute(flow(kind, j, m), reduction_map(kind, n, need))
    return _flow(kind, j, m, n)
