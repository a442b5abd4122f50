import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chernoffpde.expr import (
    BinOp,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    Num,
    UnknownIdentifierError,
    Var,
    VariableRangeError,
    evaluate,
    evaluate_many,
    parse,
    to_string,
)


def test_power_and_product():
    assert evaluate(parse("2*x1^2", 1), [3.0]) == 18.0


def test_exp_of_zero_is_one():
    e = parse("exp(0*x1)", 1)
    assert np.all(evaluate_many(e, np.linspace(-50, 50, 11)) == 1.0)


def test_variable_out_of_range():
    with pytest.raises(VariableRangeError, match="variable index out of range"):
        parse("x3", 2)


@pytest.mark.parametrize(
    "text, d, point, expected",
    [
        ("x1 - x2", 2, (5, 2), 3.0),
        ("min(x1, 0)", 1, (-4,), -4.0),
        ("max(x1, x2, 7)", 2, (1, 2), 7.0),
        ("-x1^2", 1, (3,), -9.0),
        ("2^-1", 1, (0,), 0.5),
        ("x + y*z", 3, (1, 2, 3), 7.0),
        ("pi", 1, (0,), math.pi),
        ("e", 1, (0,), math.e),
        ("1.5e2 + .5", 1, (0,), 150.5),
        ("abs(-x1) + sqrt(4) + tanh(0) + cos(0) + sin(0)", 1, (2,), 5.0),
        ("(-2)^3", 1, (0,), -8.0),
        ("  x1   *\t2 ", 1, (4,), 8.0),
    ],
)
def test_evaluate(text, d, point, expected):
    assert evaluate(parse(text, d), point) == expected


@pytest.mark.parametrize("text", ["1/x1", "sqrt(x1 - 1)", "(x1 - 1)^0.5", "x1^-1", "exp(x1 + 1000)"])
def test_domain_errors(text):
    with pytest.raises(ExprDomainError):
        evaluate(parse(text, 1), [0.0])


def test_left_associativity():
    e = parse("x1 + x2 + x3", 3)
    assert e.root == BinOp("+", BinOp("+", Var(0), Var(1)), Var(2))
    e = parse("x1 - x2 - x3", 3)
    assert e.root == BinOp("-", BinOp("-", Var(0), Var(1)), Var(2))
    assert evaluate(parse("8/4/2", 1), [0]) == 1.0


def test_power_right_associative():
    e = parse("x1^x2^x3", 3)
    assert e.root == BinOp("^", Var(0), BinOp("^", Var(1), Var(2)))
    assert evaluate(parse("2^3^2", 1), [0]) == 512.0


def test_unary_minus_binds_looser_than_power():
    assert parse("-x1^2", 1).root == Neg(BinOp("^", Var(0), Num(2.0)))


@pytest.mark.parametrize(
    "text, offset",
    [("1 +", 3), ("(x1", 3), ("x1 $ 2", 3), ("2 3", 2), ("", 0), ("sin()", 4)],
)
def test_syntax_error_offsets(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text, 1)
    assert info.value.offset == offset


def test_byte_offset_counts_utf8():
    # "é" is two bytes
    with pytest.raises(ExprSyntaxError) as info:
        parse("é", 1)
    assert info.value.offset == 0
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 + é", 1)
    assert info.value.offset == 5


def test_unknown_identifiers():
    with pytest.raises(UnknownIdentifierError):
        parse("foo + 1", 1)
    with pytest.raises(UnknownIdentifierError):
        parse("log(x1)", 1)
    # aliases only up to d = 3
    with pytest.raises(UnknownIdentifierError):
        parse("x", 4)
    with pytest.raises(VariableRangeError):
        parse("y", 1)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(parse("x1", 2), [1.0])


def test_deterministic():
    e = parse("sin(x1)*exp(-x2^2) + tanh(x1*x2)", 2)
    X = np.random.default_rng(0).normal(size=(50, 2))
    assert np.array_equal(e(X), e(X))


# random expression trees for the round-trip property
_leaves = st.one_of(
    st.floats(0, 10, allow_nan=False).map(lambda v: repr(float(v))),
    st.sampled_from(["x1", "x2", "pi", "e"]),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(st.sampled_from(["sin", "cos", "tanh", "abs"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        st.tuples(children, children).map(lambda t: f"min({t[0]}, {t[1]})"),
        children.map(lambda c: f"exp(-abs({c}))"),
        children.map(lambda c: f"({c})^2"),
    )


@settings(max_examples=100, deadline=None)
@given(st.recursive(_leaves, _extend, max_leaves=12))
def test_pretty_print_round_trip(text):
    e = parse(text, 2)
    again = parse(to_string(e.root), 2)
    assert again.root == e.root
    X = np.random.default_rng(1).uniform(-3, 3, size=(100, 2))
    assert np.array_equal(e(X), again(X))
