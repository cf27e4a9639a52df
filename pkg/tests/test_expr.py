import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goursatkit.expr import (BinOp, Const, EvalDomainError, ExprSyntaxError, Param,
                             UnknownSymbolError, Var, evaluate, parse, to_text)
from genexpr import random_smooth_expression


class TestParse:
    def test_product_sum_tree(self):
        e = parse("x1*x3 + x2*x4", 4)
        assert e.arity == 4
        assert isinstance(e.root, BinOp) and e.root.op == "+"
        assert e.variables_used == {1, 2, 3, 4}

    def test_incomplete_input_offset(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse("x1 +", 4)
        assert exc.value.offset == 4

    def test_parameter_tree(self):
        e = parse("a*(x1+x2) + a^2/2", 2, ["a"])
        assert "a" in e.parameters_used
        assert any(isinstance(n, Param) for n in [e.root.left.left])

    def test_unknown_identifier(self):
        with pytest.raises(UnknownSymbolError):
            parse("b*x1", 2, ["a"])

    def test_variable_exceeds_arity(self):
        with pytest.raises(UnknownSymbolError):
            parse("x5 + 1", 4)

    def test_empty(self):
        with pytest.raises(ExprSyntaxError):
            parse("   ", 2)

    def test_unbalanced_paren(self):
        with pytest.raises(ExprSyntaxError):
            parse("(x1 + x2", 2)

    def test_power_requires_constant_exponent(self):
        with pytest.raises(ExprSyntaxError):
            parse("x1^x2", 2)
        e = parse("x1^-2", 1)
        assert isinstance(e.root.right, Const) and e.root.right.value == -2

    def test_precedence(self):
        assert evaluate(parse("2 + 3*4", 1), {"x1": 0}) == 14
        assert evaluate(parse("2*3^2", 1), {"x1": 0}) == 18
        assert evaluate(parse("8 - 3 - 2", 1), {"x1": 0}) == 3  # left assoc
        assert evaluate(parse("12/3/2", 1), {"x1": 0}) == 2

    def test_functions(self):
        assert evaluate(parse("exp(0)", 1), {"x1": 0}) == 1
        assert evaluate(parse("sqrt(x1)", 1), {"x1": 4}) == 2
        assert math.isclose(evaluate(parse("sin(x1)^2 + cos(x1)^2", 1), {"x1": 0.9}), 1)


class TestEvaluate:
    def test_basic(self):
        assert evaluate(parse("x1*x3", 4), {"x1": 2, "x3": 5}) == 10

    def test_ln_domain_error_names_node(self):
        with pytest.raises(EvalDomainError) as exc:
            evaluate(parse("x2 + ln(x1)", 2), {"x1": 0, "x2": 1})
        assert "ln(x1)" in str(exc.value)

    def test_parameter_arithmetic(self):
        e = parse("a*(x1+x2) + a^2/2", 2, ["a"])
        assert evaluate(e, {"x1": 1, "x2": 2, "a": 4}) == 20

    def test_division_by_zero(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("x1/(x2-1)", 2), {"x1": 1, "x2": 1})

    def test_missing_symbol(self):
        with pytest.raises(KeyError):
            evaluate(parse("x1 + x2", 2), {"x1": 1})


@given(st.integers(0, 10**9))
@settings(max_examples=150, deadline=None)
def test_roundtrip_structural(seed):
    """parse(print(e)) reproduces the tree for generated expressions."""
    rng = np.random.default_rng(seed)
    e, _ = random_smooth_expression(rng)
    printed = to_text(e)
    again = parse(printed, e.arity, e.params)
    assert again.root == e.root, printed


@given(st.integers(0, 10**9))
@settings(max_examples=100, deadline=None)
def test_evaluate_matches_independent_interpreter(seed):
    """Compare against Python's own parser/evaluator on the printed text."""
    rng = np.random.default_rng(seed)
    e, point = random_smooth_expression(rng)
    ours = evaluate(e, point)
    env = {"exp": math.exp, "ln": math.log, "sin": math.sin, "cos": math.cos,
           "sqrt": math.sqrt, "__builtins__": {}}
    env.update(point)
    theirs = eval(to_text(e).replace("^", "**"), env)
    assert ours == pytest.approx(theirs, rel=1e-14)


def test_interpreter_agreement_bulk():
    rng = np.random.default_rng(12345)
    env_fns = {"exp": math.exp, "ln": math.log, "sin": math.sin, "cos": math.cos,
               "sqrt": math.sqrt, "__builtins__": {}}
    for _ in range(1000):
        e, point = random_smooth_expression(rng)
        ours = evaluate(e, point)
        theirs = eval(to_text(e).replace("^", "**"), {**env_fns, **point})
        assert abs(ours - theirs) <= 1e-14 * max(1.0, abs(theirs))
