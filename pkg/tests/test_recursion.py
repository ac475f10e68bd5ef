from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bckp import hierarchy as hz
from bckp import recursion as rc
from bckp.diffpoly import DiffPoly, const, u
from bckp.errors import BadIndex, NotExact
from bckp.golden import FixtureSet, verify
from bckp.hierarchy import BKP, CKP, KP
from bckp.pdo import LaurentPDO, operator_weight_shift
from bckp.textio import parse_poly
from oracles import sym_to_poly, ufun, x

kinds = pytest.mark.parametrize("kind", [BKP, CKP], ids=["bkp", "ckp"])


def ctx3(kind):
    return rc.make_context(kind, 1)


# ------------------------------------------------------------------ context


@kinds
def test_context_is_reduced_lax_cube(kind):
    ctx = ctx3(kind)
    assert ctx.order == 3
    lam = hz.lax_power(kind, 3, 0, 1)
    assert all(ctx.p(l) == lam.coeff(l) for l in range(4))
    assert ctx.p(3) == 1 and ctx.p(2).is_zero() and ctx.p(1) == u(2).scale(3)
    assert ctx.p(-1).is_zero() and ctx.p(7).is_zero()


def test_context_rejects_kp_and_small_n():
    with pytest.raises(BadIndex):
        rc.make_context(KP, 1)
    with pytest.raises(BadIndex):
        rc.make_context(BKP, 0)


# ----------------------------------------------------------------- matrices


@kinds
def test_matrix_shapes_and_diagonals(kind):
    ctx = ctx3(kind)
    S, T, M, N = rc.build_matrices(ctx)
    assert (S.shape, T.shape, M.shape, N.shape) == ((2, 2), (2, 3), (3, 3), (3, 2))
    assert M.is_lower_triangular()
    for a in range(1, 4):
        assert M[a, a] == LaurentPDO.d(1).scale(-3)
    W = rc.kp_flow_matrix(ctx)
    assert W.is_lower_triangular()
    assert W[1, 1] == LaurentPDO.d(1) and W[2, 2] == LaurentPDO.d(1)


@kinds
def test_ctilde_entries(kind):
    ctx = ctx3(kind)
    # s = N: only p_N = 1 survives; s = 1: p1 + 2 p2 D + 3 p3 D^2
    assert rc.ctilde_entry(ctx, 3) == LaurentPDO({0: const(1)})
    assert rc.ctilde_entry(ctx, 1) == LaurentPDO({0: ctx.p(1), 1: ctx.p(2).scale(2), 2: const(3)})


@kinds
def test_c_entry_is_a_multiplication_operator(kind):
    ctx = ctx3(kind)
    for j in range(-3, 1):
        for mu in range(-2, 4):
            assert rc.c_entry(ctx, j, mu).degrees() in ([], [0])
    # C_{j,N} = p_N = 1
    assert rc.c_entry(ctx, -2, 3) == LaurentPDO.mult(const(1))


# ---------------------------------------------------------------- solving


def test_solve_lower_triangular_example():
    D = LaurentPDO.d(1)
    mat = rc.OpMatrix.build(2, 2, lambda a, b: [[D.scale(2), LaurentPDO()], [LaurentPDO.mult(u(2)), D]][a - 1][b - 1])
    sol = rc.solve_lower_triangular(mat, [u(2, 2).scale(2), u(2) * u(2, 1) + u(4, 1)])
    assert sol == [u(2, 1), u(4)]


def test_solve_lower_triangular_reports_row():
    mat = rc.OpMatrix.build(1, 1, lambda a, b: LaurentPDO.d(1))
    with pytest.raises(NotExact) as err:
        rc.solve_lower_triangular(mat, [u(2) ** 2], "M")
    assert err.value.where == "M row 1"


polys = st.lists(st.tuples(st.integers(2, 4), st.integers(0, 3)), min_size=1, max_size=3).map(
    lambda atoms: _product(atoms)
)


def _product(atoms):
    out = const(1)
    for i, o in atoms:
        out = out * u(i, o)
    return out


@settings(max_examples=40)
@given(st.lists(polys, min_size=3, max_size=3), st.sampled_from([BKP, CKP]))
def test_solve_inverts_m(vec, kind):
    """M applied to the solution of M z = M v gives back M v (v constant-free)."""
    S, T, M, N = rc.build_matrices(ctx3(kind))
    rhs = M.apply(vec)
    z = rc.solve_lower_triangular(M, rhs)
    assert M.apply(z) == rhs
    assert z == [v - v.constant_term() for v in vec]


# --------------------------------------------------------- recursion checks


@kinds
def test_phi_hat_maps_t1_to_t7(kind):
    ctx = ctx3(kind)
    assert rc.hat_phi_action(ctx, [u(2, 1)]) == [hz.reduced_flow(kind, 1, 1, 3)]


@kinds
@pytest.mark.parametrize("m", [1, 2])
def test_phi_hat_raises_time_by_six(kind, m):
    ctx = ctx3(kind)
    got = rc.hat_phi_action(ctx, rc.flow_vector(ctx, m))
    assert got == [hz.reduced_flow(kind, 1, 1, m + 3)]


@kinds
def test_phi_hat_squared_gives_t13(kind):
    ctx = ctx3(kind)
    assert rc.hat_phi_action(ctx, [u(2, 1)], reps=2) == [hz.reduced_flow(kind, 1, 1, 6)]


@kinds
def test_operator_and_action_routes_agree(kind):
    ctx = ctx3(kind)
    op = rc.hat_phi_operator(ctx)
    for m in (0, 1):
        vec = rc.flow_vector(ctx, m)
        assert op.apply(vec) == rc.hat_phi_action(ctx, vec)


@kinds
def test_phi_on_full_kp_vector(kind):
    """Closed-form Phi and the action route agree on the completed t1 vector."""
    ctx = ctx3(kind)
    v = rc.complete_vector(ctx, [u(2, 1)])
    via_op = rc.kp_phi_operator(ctx).apply(v)
    assert via_op == rc.phi_action(ctx, v)


@kinds
def test_phi_hat_weight_shift(kind):
    op = rc.hat_phi_operator(ctx3(kind))
    assert operator_weight_shift(op[1, 1]) == {6}


@kinds
def test_phi_hat_tails_are_nonlocal_but_small(kind):
    entry = rc.hat_phi_operator(ctx3(kind))[1, 1]
    assert entry.local.max_deg == 6
    assert 1 <= len(entry.tails) <= 3


def test_closed_form_breaks_down_for_5_reduction():
    with pytest.raises(NotExact) as err:
        rc.hat_phi_operator(rc.make_context(BKP, 2))
    assert err.value.where == "compose_nonlocal"


@kinds
def test_5_reduction_action_path(kind):
    ctx = rc.make_context(kind, 2)
    got = rc.hat_phi_action(ctx, rc.flow_vector(ctx, 0))
    assert got == rc.flow_vector(ctx, 5)


def test_reps_compose():
    ctx = ctx3(BKP)
    once = rc.hat_phi_action(ctx, [u(2, 1)])
    assert rc.hat_phi_action(ctx, once) == rc.hat_phi_action(ctx, [u(2, 1)], reps=2)
    with pytest.raises(ValueError):
        rc.hat_phi_action(ctx, [u(2, 1)], reps=0)


def test_complete_vector_inserts_odd_flows():
    ctx = rc.make_context(BKP, 2)
    v = rc.complete_vector(ctx, [u(2, 1), u(4, 1)])
    assert v[1] == hz.eliminate_odd(1, BKP).dx()
    assert v[3] == hz.eliminate_odd(2, BKP).dx()


@pytest.fixture(scope="module")
def outcomes():
    return {o.tag: o for o in verify(FixtureSet.load())}


@pytest.mark.parametrize("kind", ["bkp", "ckp"])
def test_closed_forms_match_printed_displays(outcomes, kind):
    tags = [f"phi[{a},{b}]@red3[{kind}]" for a in (1, 2) for b in (1, 2)] + [f"phihat[1,1]@red3[{kind}]"]
    assert all(outcomes[t].passed for t in tags)


# ----------------------------------------------------------------- scaling


def _sym_scale(p: DiffPoly, s, tau):
    """``(tau/s) p(s u)`` through sympy substitution."""
    expr = sp.Integer(0)
    for m, c in p.terms():
        term = sp.Rational(c.numerator, c.denominator)
        for idx, order, e in m:
            term *= sp.diff(ufun(idx), x, order) ** e
        expr += term
    U = sp.Function("u2")(x)
    scaled = expr.subs(ufun(2), sp.Symbol("S") * U).doit().subs(sp.Symbol("S"), sp.Rational(s.numerator, s.denominator))
    return sym_to_poly(sp.expand(scaled * sp.Rational(tau.numerator, tau.denominator) / sp.Rational(s.numerator, s.denominator)))


@settings(max_examples=15)
@given(
    st.fractions(min_value=-3, max_value=3, max_denominator=5).filter(bool),
    st.fractions(min_value=-30, max_value=30, max_denominator=3).filter(bool),
)
def test_scaling_matches_substitution(s, tau):
    p = hz.reduced_flow(CKP, 1, 1, 2)
    assert rc.scaling_transform(p, s, tau) == _sym_scale(p, s, tau)


def test_scaling_identity_and_errors():
    p = hz.reduced_flow(BKP, 1, 1, 3)
    assert rc.scaling_transform(p, 1, 1) == p
    with pytest.raises(ValueError):
        rc.scaling_transform(p, 0, 1)
    with pytest.raises(ValueError):
        rc.scaling_transform(u(4), 2, 1)


SK7 = "u2^(7) + 7*u2*u2^(5) + 14*u2_x*u2_xxxx + 21*u2_xx*u2_xxx + 14*u2^2*u2_xxx + 42*u2*u2_x*u2_xx + 7*u2_x^3 + 28/3*u2^3*u2_x"
KK7 = "u2^(7) + 14*u2*u2^(5) + 49*u2_x*u2_xxxx + 84*u2_xx*u2_xxx + 56*u2^2*u2_xxx + 252*u2*u2_x*u2_xx + 70*u2_x^3 + 224/3*u2^3*u2_x"


@pytest.mark.parametrize(
    "kind,s,text", [(BKP, Fraction(1, 3), SK7), (CKP, Fraction(2, 3), KK7)], ids=["sawada-kotera", "kaup-kupershmidt"]
)
def test_scaled_t7_gives_the_standard_seventh_order_equations(kind, s, text):
    assert rc.scaling_transform(hz.reduced_flow(kind, 1, 1, 3), s, -27) == parse_poly(text)


def test_printed_ckp_scaling_differs_in_two_terms(outcomes):
    o = outcomes["u2_t7@red3[ckp]*scale(3/2,-27)"]
    assert not o.passed
    # the printed parameters do not lead to monic form; at s = 2/3 only two printed terms disagree
    entries = {e.tag: e for e in FixtureSet.load().entries}
    printed = parse_poly(entries["u2_t7@red3[ckp]*scale(3/2,-27)"].text)
    ours = rc.scaling_transform(hz.reduced_flow(CKP, 1, 1, 3), Fraction(2, 3), -27)
    assert printed - ours == parse_poly("4*u2*u2_x*u2_xx + 49*u2*u2_xxxx - 49*u2_x*u2_xxxx")
