import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goursatkit import jets as J
from goursatkit.expr import evaluate, parse
from genexpr import random_smooth_expression


class TestSeed:
    def test_order_two(self):
        jet = J.seed(1, 3.0, 2, 2)
        assert jet.value == 3.0
        assert list(jet.gradient()) == [1.0, 0.0]
        assert jet.deriv((1, 1)) == 0 and jet.deriv((1, 2)) == 0

    def test_order_one(self):
        jet = J.seed(2, -1.0, 2, 1)
        assert jet.value == -1.0
        assert list(jet.gradient()) == [0.0, 1.0]

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            J.seed(3, 0.0, 2, 2)


class TestCombine:
    def test_square(self):
        s = J.seed(1, 3.0, 1, 2)
        sq = J.combine("mul", s, s)
        assert (sq.value, sq.deriv((1,)), sq.deriv((1, 1))) == (9, 6, 2)

    def test_reciprocal_derivatives(self):
        r = J.combine("div", J.constant(1.0, 1, 3), J.seed(1, 2.0, 1, 3))
        assert (r.value, r.deriv((1,)), r.deriv((1, 1)), r.deriv((1, 1, 1))) == \
            (0.5, -0.25, 0.25, -0.375)

    def test_mismatched_orders_error(self):
        with pytest.raises(ValueError):
            J.combine("add", J.seed(1, 0.0, 2, 1), J.seed(1, 0.0, 2, 2))

    def test_division_by_zero_value(self):
        with pytest.raises(J.JetDomainError):
            J.combine("div", J.constant(1.0, 1, 2), J.constant(0.0, 1, 2))

    def test_div_mul_roundtrip(self):
        rng = np.random.default_rng(0)
        sp = J.space(3, 4)
        a = J.Jet(sp, rng.normal(size=sp.size))
        b = J.Jet(sp, rng.normal(size=sp.size))
        b.data[0] = 2.0
        back = (a / b) * b
        assert np.allclose(back.data, a.data, atol=1e-12)


class TestUnary:
    def test_exp_at_zero(self):
        e = J.apply_unary("exp", J.seed(1, 0.0, 1, 3))
        assert np.allclose([e.value, e.deriv((1,)), e.deriv((1, 1)), e.deriv((1, 1, 1))], 1.0)

    def test_ln_at_one(self):
        l = J.apply_unary("ln", J.seed(1, 1.0, 1, 2))
        assert (l.value, l.deriv((1,)), l.deriv((1, 1))) == (0.0, 1.0, -1.0)

    def test_sqrt_domain(self):
        with pytest.raises(J.JetDomainError):
            J.apply_unary("sqrt", J.seed(1, -1.0, 1, 1))

    def test_sin_cos_fourth_order(self):
        x = 0.7
        s = J.apply_unary("sin", J.seed(1, x, 1, 4))
        assert s.deriv((1,) * 4) == pytest.approx(math.sin(x))
        c = J.apply_unary("cos", J.seed(1, x, 1, 4))
        assert c.deriv((1, 1, 1)) == pytest.approx(math.sin(x))

    def test_integer_power_at_zero_base(self):
        cube = J.power(J.seed(1, 0.0, 1, 3), 3.0)
        assert (cube.value, cube.deriv((1,)), cube.deriv((1, 1)), cube.deriv((1, 1, 1))) == \
            (0.0, 0.0, 0.0, 6.0)

    def test_fractional_power_needs_positive_base(self):
        with pytest.raises(J.JetDomainError):
            J.power(J.seed(1, -2.0, 1, 2), 0.5)


class TestEvalJet:
    def test_bilinear(self):
        jet = J.eval_jet(parse("(x1+x2)*(x3+x4)", 4),
                         {"x1": 1, "x2": 2, "x3": 3, "x4": 4}, ["x1", "x3"], 2)
        assert jet.value == 21 and jet.deriv((1, 2)) == 1

    def test_cube(self):
        jet = J.eval_jet(parse("x1^3", 1), {"x1": 2}, ["x1"], 3)
        assert jet.deriv((1, 1, 1)) == 6

    def test_mixed_exponential(self):
        jet = J.eval_jet(parse("exp(x1*x2)", 2), {"x1": 1, "x2": 1}, ["x1", "x2"], 2)
        assert jet.deriv((1, 2)) == pytest.approx(2 * math.e, rel=1e-14)

    def test_product_rule_exact_at_order_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            vals = rng.uniform(0.5, 2.0, 2)
            jet = J.eval_jet(parse("x1*x2", 2), {"x1": vals[0], "x2": vals[1]},
                             ["x1", "x2"], 1)
            assert jet.deriv((1,)) == vals[1] and jet.deriv((2,)) == vals[0]

    def test_parameter_slot(self):
        jet = J.eval_jet(parse("a*x1^2", 1, ["a"]), {"x1": 3, "a": 2}, ["x1", "a"], 2)
        assert jet.deriv((1, 2)) == 6  # d2/dx1 da = 2*x1


def _poly_value_and_derivs(coeffs, x, y):
    # f = sum c_ij x^i y^j, i+j <= 3; returns dict of raw partials to order 3
    out = {}
    for di in range(4):
        for dj in range(4 - di):
            total = 0.0
            for (i, j), c in coeffs.items():
                if i >= di and j >= dj:
                    fall = (math.factorial(i) // math.factorial(i - di)) * \
                           (math.factorial(j) // math.factorial(j - dj))
                    total += c * fall * x ** (i - di) * y ** (j - dj)
            out[(di, dj)] = total
    return out


@given(st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_polynomial_jets_exact(seed):
    """Jets of polynomial seeds reproduce exact polynomial derivatives."""
    rng = np.random.default_rng(seed)
    coeffs = {(i, j): float(f"{rng.uniform(-2, 2):.6f}")
              for i in range(4) for j in range(4 - i)}
    text = " + ".join(f"({c!r})*x1^{i}*x2^{j}" for (i, j), c in coeffs.items())
    e = parse(text, 2)
    x, y = rng.uniform(-1.5, 1.5, 2)
    jet = J.eval_jet(e, {"x1": x, "x2": y}, ["x1", "x2"], 3)
    expected = _poly_value_and_derivs(coeffs, x, y)
    for (di, dj), want in expected.items():
        if di + dj == 0:
            got = jet.value
        else:
            got = jet.deriv((1,) * di + (2,) * dj)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@given(st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_mul_commutative_associative(seed):
    rng = np.random.default_rng(seed)
    sp = J.space(3, 4)
    a, b, c = (J.Jet(sp, rng.normal(size=sp.size)) for _ in range(3))
    ab = (a * b).data
    ba = (b * a).data
    assert np.allclose(ab, ba, rtol=1e-13, atol=1e-13)
    lhs = ((a * b) * c).data
    rhs = (a * (b * c)).data
    scale = max(np.abs(lhs).max(), 1.0)
    assert np.abs(lhs - rhs).max() <= 1e-13 * scale


def test_first_derivatives_match_finite_differences():
    """Spot check here; the full thousand-expression sweep runs in acceptance."""
    rng = np.random.default_rng(777)
    for _ in range(100)    :
        e, point = random_smooth_expression(rng)
        _assert_fd_close(e, point)


def _assert_fd_close(e, point, h=1e-5, rel=1e-6):
    jet = J.eval_jet(e, point, [f"x{i}" for i in range(1, e.arity + 1)], 1)
    fscale = max(1.0, abs(jet.value))
    for i in range(1, e.arity + 1):
        hi = dict(point); hi[f"x{i}"] += h
        lo = dict(point); lo[f"x{i}"] -= h
        try:
            fd = (evaluate(e, hi) - evaluate(e, lo)) / (2 * h)
        except ArithmeticError:
            continue
        an = jet.deriv((i,))
        assert abs(fd - an) <= rel * max(abs(an), abs(fd), 1e-3 * fscale), \
            (str(e), i, an, fd)


def test_second_derivatives_match_differenced_gradients():
    rng = np.random.default_rng(4242)
    for _ in range(50):
        e, point = random_smooth_expression(rng)
        names = [f"x{i}" for i in range(1, e.arity + 1)]
        jet = J.eval_jet(e, point, names, 2)
        h = 1e-5
        for j in range(1, e.arity + 1):
            hi = dict(point); hi[names[j - 1]] += h
            lo = dict(point); lo[names[j - 1]] -= h
            try:
                ghi = J.eval_jet(e, hi, names, 1).gradient()
                glo = J.eval_jet(e, lo, names, 1).gradient()
            except ArithmeticError:
                continue
            fd = (ghi - glo) / (2 * h)
            for i in range(1, e.arity + 1):
                an = jet.deriv((i, j))
                scale = max(abs(an), abs(fd[i - 1]), 1e-3 * max(1.0, abs(jet.value)))
                assert abs(fd[i - 1] - an) <= 2e-5 * scale, (str(e), i, j)


def test_restrict_and_substitute_last():
    # H(x, u) = (x + u)^2 over 1 x-slot; delta(x) = -x reproduces H == 0
    H = J.eval_jet(parse("(x1 + u)^2", 1, ["u"]), {"x1": 0.0, "u": 0.0},
                   ["x1", "u"], 3)
    delta = J.Jet(J.space(1, 3), np.array([0.0, -1.0, 0.0, 0.0]))
    out = J.substitute_last(H, delta)
    assert np.allclose(out.data, 0.0, atol=1e-15)

def test_substitute_requires_zero_value():
    H = J.eval_jet(parse("x1 + u", 1, ["u"]), {"x1": 0.0, "u": 0.0}, ["x1", "u"], 2)
    with pytest.raises(ValueError):
        J.substitute_last(H, J.seed(1, 1.0, 1, 2))


def test_jet_order_consistency():
    e, point = random_smooth_expression(np.random.default_rng(9))
    names = [f"x{i}" for i in range(1, e.arity + 1)]
    j3 = J.eval_jet(e, point, names, 3)
    j2 = J.eval_jet(e, point, names, 2)
    sp2 = j2.space
    assert np.allclose(j3.data[: sp2.size], j2.data, rtol=1e-15, atol=1e-15)
