"""Recursion operators for the (2n+1)-reduced BKP/CKP hierarchies.

With ``N = 2n+1`` and ``Lambda = L^N = sum_l p_l D^l``, the KP recursion
``P(m+N) = R P(m)`` holds for ``P(m) = (p_-1(m), ..., p_-(N-1)(m))`` with
``R = S - T M^-1 N``.  Conjugating by the KP flow matrix ``W``
(``U_t = W P``) gives ``Phi = W R W^-1`` on the flow vector
``U = (u2, ..., u_N)``, and ``Phi_hat`` folds ``Phi^2`` back onto the even
coordinates using the B operators.

Two routes are offered: closed operator matrices (nonlocal operators, may
fail with :class:`NotExact` when a product leaves the ``P D^-1 Q`` class)
and the action on concrete flow vectors, which only ever integrates
polynomials that are known to be exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .diffpoly import DiffPoly, integrate_exact
from .errors import BadIndex, NotExact
from .hierarchy import HierarchyKind, b_scalar, kind_from_name, lax_power, o_operator, reduction_map
from .pdo import LaurentPDO, NonlocalPDO, apply_to_poly, as_nonlocal, binom, compose_nonlocal


@dataclass(frozen=True)
class RecursionContext:
    kind: HierarchyKind
    n: int
    coeff_table: tuple  # p_0(N) .. p_N(N) of the reduced Lax

    @property
    def order(self) -> int:
        return 2 * self.n + 1

    def p(self, l: int) -> DiffPoly:
        return self.coeff_table[l] if 0 <= l <= self.order else DiffPoly()

    def substitutions(self) -> dict[int, DiffPoly]:
        """Odd and dependent variables below ``u_N`` in terms of ``u2..u_2n``."""
        return reduction_map(self.kind, self.n, self.order)


@lru_cache(maxsize=None)
def _context(kind: HierarchyKind, n: int) -> RecursionContext:
    big = 2 * n + 1
    lam = lax_power(kind, big, 0, n)
    return RecursionContext(kind, n, tuple(lam.coeff(l) for l in range(big + 1)))


def make_context(kind, n: int) -> RecursionContext:
    kind = kind_from_name(kind)
    if n < 1:
        raise BadIndex("recursion context needs n >= 1")
    if not kind.constrained:
        raise BadIndex("recursion operators are built for BKP/CKP reductions")
    return _context(kind, n)


@dataclass(frozen=True)
class OpMatrix:
    rows: int
    cols: int
    entries: tuple

    @classmethod
    def build(cls, rows: int, cols: int, fn) -> "OpMatrix":
        return cls(rows, cols, tuple(tuple(fn(a, b) for b in range(1, cols + 1)) for a in range(1, rows + 1)))

    def __getitem__(self, ab):
        """1-based ``(row, col)`` access, matching the displayed matrices."""
        a, b = ab
        return self.entries[a - 1][b - 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def map(self, fn) -> "OpMatrix":
        return OpMatrix(self.rows, self.cols, tuple(tuple(fn(e) for e in row) for row in self.entries))

    def nonlocal_form(self) -> "OpMatrix":
        return self.map(as_nonlocal)

    def is_lower_triangular(self) -> bool:
        return all(self[a, b].is_zero() for a in range(1, self.rows + 1) for b in range(a + 1, self.cols + 1))

    def apply(self, vec: Sequence[DiffPoly]) -> list[DiffPoly]:
        if len(vec) != self.cols:
            raise ValueError(f"vector of length {len(vec)} for a {self.rows}x{self.cols} matrix")
        return [sum((apply_to_poly(e, v) for e, v in zip(row, vec)), DiffPoly()) for row in self.entries]

    def __matmul__(self, other: "OpMatrix") -> "OpMatrix":
        if self.cols != other.rows:
            raise ValueError("matrix shapes do not chain")

        def entry(a, b):
            out = NonlocalPDO()
            for c in range(1, self.cols + 1):
                left, right = self[a, c], other[c, b]
                if not left.is_zero() and not right.is_zero():
                    out = out + compose_nonlocal(left, right)
            return out

        return OpMatrix.build(self.rows, other.cols, entry)

    def __add__(self, other: "OpMatrix") -> "OpMatrix":
        return OpMatrix.build(self.rows, self.cols, lambda a, b: as_nonlocal(self[a, b]) + as_nonlocal(other[a, b]))

    def __sub__(self, other: "OpMatrix") -> "OpMatrix":
        return OpMatrix.build(self.rows, self.cols, lambda a, b: as_nonlocal(self[a, b]) - as_nonlocal(other[a, b]))


# ------------------------------------------------------------ building blocks


def c_entry(ctx: RecursionContext, j: int, mu: int) -> LaurentPDO:
    """Multiplication operator ``C_{j,mu} = sum_l C(j-mu, l-mu) p_l^(l-mu)``."""
    out = DiffPoly()
    for l in range(max(0, mu), ctx.order + 1):
        out = out + ctx.p(l).dx(l - mu).scale(binom(j - mu, l - mu))
    return LaurentPDO.mult(out)


def ctilde_entry(ctx: RecursionContext, s: int) -> LaurentPDO:
    """``sum_{mu=0}^{N-s} C(s+mu, s) p_{s+mu} D^mu``."""
    return LaurentPDO({mu: ctx.p(s + mu).scale(binom(s + mu, s)) for mu in range(0, ctx.order - s + 1)})


def d_entry(ctx: RecursionContext, j: int, s: int) -> LaurentPDO:
    return c_entry(ctx, j, s) - ctilde_entry(ctx, s)


def build_matrices(ctx: RecursionContext):
    """``(S, T, M, N)`` laid out as in the KP recursion formula with ``n -> 2n+1``."""
    big = ctx.order
    S = OpMatrix.build(big - 1, big - 1, lambda a, b: c_entry(ctx, -a, b - a))
    T = OpMatrix.build(big - 1, big, lambda a, c: c_entry(ctx, -a, big - a + c - 1))
    M = OpMatrix.build(big, big, lambda a, c: d_entry(ctx, -a, big - a + c - 1))
    N = OpMatrix.build(
        big, big - 1, lambda a, b: d_entry(ctx, -a, b - a) if b >= a else c_entry(ctx, -a, b - a)
    )
    return S, T, M, N


def kp_flow_matrix(ctx: RecursionContext) -> OpMatrix:
    """``W_ab = O_{a+1,b}`` with the context's substitutions; ``U_t = W P``."""
    subs = ctx.substitutions()
    size = ctx.order - 1
    return OpMatrix.build(size, size, lambda a, b: o_operator(a + 1, b).subs(subs) if b <= a + 1 else LaurentPDO())


# ------------------------------------------------------------------ actions


def _diagonal_scalar(op) -> Fraction:
    op = as_nonlocal(op)
    items = list(op.local.items())
    if op.tails or len(items) != 1 or items[0][0] != 1 or not items[0][1].is_constant():
        raise ValueError("diagonal entries must be c*D with c a nonzero constant")
    return items[0][1].constant_term()


def solve_lower_triangular(mat: OpMatrix, rhs: Sequence[DiffPoly], label: str = "") -> list[DiffPoly]:
    """Forward substitution for ``mat * sol = rhs`` with ``c*D`` on the diagonal."""
    if mat.rows != mat.cols or len(rhs) != mat.rows:
        raise ValueError("square system with matching right-hand side required")
    sol: list[DiffPoly] = []
    for i in range(1, mat.rows + 1):
        c = _diagonal_scalar(mat[i, i])
        acc = rhs[i - 1]
        for b in range(1, i):
            acc = acc - apply_to_poly(mat[i, b], sol[b - 1])
        try:
            sol.append(integrate_exact(acc.scale(1 / c)))
        except NotExact as exc:
            where = f"{label} row {i}".strip()
            raise NotExact(str(exc), where=where) from exc
    return sol


@lru_cache(maxsize=None)
def _matrices(ctx: RecursionContext):
    return build_matrices(ctx), kp_flow_matrix(ctx)


def r_action(ctx: RecursionContext, P: Sequence[DiffPoly]) -> list[DiffPoly]:
    """``R P = S P - T M^-1 N P``."""
    (S, T, M, N), _ = _matrices(ctx)
    z = solve_lower_triangular(M, N.apply(P), "M")
    return [a - b for a, b in zip(S.apply(P), T.apply(z))]


def phi_action(ctx: RecursionContext, v: Sequence[DiffPoly], reps: int = 1) -> list[DiffPoly]:
    """``Phi^reps`` on a KP flow vector ``(u2_t, ..., u_N_t)``."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    _, W = _matrices(ctx)
    v = list(v)
    if len(v) != ctx.order - 1:
        raise ValueError(f"flow vector must have {ctx.order - 1} entries")
    for _ in range(reps):
        P = solve_lower_triangular(W, v, "W")
        v = W.apply(r_action(ctx, P))
    return v


def complete_vector(ctx: RecursionContext, even: Sequence[DiffPoly]) -> list[DiffPoly]:
    """Insert the odd flows ``u_{2i+1,t} = sum_mu B_{-2i,-2mu+1} u_{2mu,t}``."""
    if len(even) != ctx.n:
        raise ValueError(f"even flow vector must have {ctx.n} entries")
    out = []
    for i in range(1, ctx.n + 1):
        out.append(even[i - 1])
        odd = DiffPoly()
        for mu in range(1, i + 1):
            odd = odd + even[mu - 1].dx(2 * i - 2 * mu + 1).scale(b_scalar(i, mu, ctx.kind.k))
        out.append(odd)
    return out


def hat_phi_action(ctx: RecursionContext, even: Sequence[DiffPoly], reps: int = 1) -> list[DiffPoly]:
    """``Phi_hat^reps`` on ``(u2_t, u4_t, ..., u_2n_t)`` via ``Phi^2`` on the completed vector."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    even = list(even)
    for _ in range(reps):
        even = phi_action(ctx, complete_vector(ctx, even), 2)[0::2]
    return even


def flow_vector(ctx: RecursionContext, m: int) -> list[DiffPoly]:
    """Reduced even flow vector ``(u2, ..., u_2n)`` for time ``t_{2m+1}``."""
    from .hierarchy import reduced_flow

    return [reduced_flow(ctx.kind, ctx.n, j, m) for j in range(1, ctx.n + 1)]


# ------------------------------------------------------------- closed forms


def lower_inverse(mat: OpMatrix) -> OpMatrix:
    """Entrywise inverse of a lower-triangular matrix with ``c*D`` diagonal."""
    size = mat.rows
    inv: dict[tuple[int, int], NonlocalPDO] = {}
    for a in range(1, size + 1):
        d_inv = NonlocalPDO.inv_d(_diagonal_scalar(mat[a, a]))
        inv[a, a] = d_inv
        for b in range(1, a):
            acc = NonlocalPDO()
            for c in range(b, a):
                if not mat[a, c].is_zero():
                    acc = acc + compose_nonlocal(mat[a, c], inv[c, b])
            inv[a, b] = -compose_nonlocal(d_inv, acc)
    return OpMatrix.build(size, size, lambda a, b: inv.get((a, b), NonlocalPDO()))


@lru_cache(maxsize=None)
def _kp_phi(ctx: RecursionContext) -> OpMatrix:
    (S, T, M, N), W = _matrices(ctx)
    R = S.nonlocal_form() - T.nonlocal_form() @ lower_inverse(M) @ N.nonlocal_form()
    return W.nonlocal_form() @ R @ lower_inverse(W)


def kp_phi_operator(ctx: RecursionContext) -> OpMatrix:
    """``Phi(2n+1) = W R W^-1`` as a matrix of nonlocal operators."""
    return _kp_phi(ctx)


@lru_cache(maxsize=None)
def _hat_phi(ctx: RecursionContext) -> OpMatrix:
    phi = _kp_phi(ctx)
    sq = phi @ phi
    n = ctx.n

    def entry(k, mu):
        out = as_nonlocal(sq[2 * k - 1, 2 * mu - 1])
        for i in range(mu, n + 1):
            b = LaurentPDO.d(2 * i - 2 * mu + 1, b_scalar(i, mu, ctx.kind.k))
            out = out + compose_nonlocal(sq[2 * k - 1, 2 * i], b)
        return out

    return OpMatrix.build(n, n, entry)


def hat_phi_operator(ctx: RecursionContext) -> OpMatrix:
    """``Phi_hat(2n+1)_{k,mu} = (Phi^2)_{2k-1,2mu-1} + sum_i (Phi^2)_{2k-1,2i} B_{-2i,-2mu+1}``."""
    return _hat_phi(ctx)


def scaling_transform(p: DiffPoly, u_scale, t_scale) -> DiffPoly:
    """Rewrite ``u2_t = p`` under ``u2 = u_scale * u`` and ``t = t_scale * t_new``.

    The new right-hand side is ``(t_scale / u_scale) * p(u_scale * u)``; the
    rescaled variable keeps the name ``u2``.
    """
    s, tau = Fraction(u_scale), Fraction(t_scale)
    if not s or not tau:
        raise ValueError("scales must be nonzero")
    if p.variables() - {2}:
        raise ValueError("scaling applies to right-hand sides in u2 only")
    # a monomial with d factors of u2 picks up s^d
    return DiffPoly((m, c * s ** sum(f[2] for f in m) * tau / s) for m, c in p.terms())
