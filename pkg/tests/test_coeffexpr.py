import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from disconj.coeffexpr import (
    FUNCTIONS,
    BinOp,
    Call,
    Const,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    UnknownIdentifierError,
    Var,
    evaluate,
    is_constant,
    parse,
    to_source,
)


def test_cos_tree():
    assert parse("cos(10*t)") == Call("cos", BinOp("*", Const(10.0), Var()))


def test_zero_constant():
    assert parse("0") == Const(0.0)


def test_power_is_right_associative():
    assert evaluate(parse("2^3^2"), 0.0) == 512.0


def test_unary_minus_binds_below_power():
    assert evaluate(parse("-2^2"), 0.0) == -4.0
    assert evaluate(parse("(-2)^2"), 0.0) == 4.0
    assert evaluate(parse("2^-1"), 0.0) == 0.5


def test_precedence():
    assert evaluate(parse("1 + 2 * 3 ^ 2"), 0.0) == 19.0
    assert evaluate(parse("8 / 4 / 2"), 0.0) == 1.0
    assert evaluate(parse("8 - 4 - 2"), 0.0) == 2.0


@pytest.mark.parametrize(
    "src, t, expected",
    [("cos(10*t)", 0.0, 1.0), ("50", 0.37, 50.0), ("-8", 0.0, -8.0), ("-8", 0.91, -8.0)],
)
def test_evaluate_examples(src, t, expected):
    assert evaluate(parse(src), t) == expected


def test_every_function_is_callable():
    for name in FUNCTIONS:
        v = evaluate(parse(f"{name}(0.5)"), 0.0)
        assert math.isfinite(v)
    assert evaluate(parse("ln(exp(t))"), 0.7) == pytest.approx(0.7, rel=1e-15)
    assert evaluate(parse("abs(t - 1)"), 0.25) == 0.75


def test_is_constant():
    assert is_constant(parse("-8"))
    assert is_constant(parse("sin(2)^2"))
    assert not is_constant(parse("1 + 0*t"))


@pytest.mark.parametrize(
    "src, column",
    [
        ("cos(", 5),
        ("(t + 1", 7),
        ("t +", 4),
        ("t * * 2", 5),
        ("2 t", 3),
        ("t)", 2),
        ("", 1),
        ("   ", 1),
        ("t # 2", 3),
        ("1e999", 1),
        ("sin t", 5),
    ],
)
def test_negative_corpus(src, column):
    with pytest.raises(ExprSyntaxError) as info:
        parse(src)
    assert info.value.pos.column == column
    assert 0 <= info.value.pos.offset <= len(src.encode("utf-8"))


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("1 + foo(t)")
    assert info.value.pos.column == 5
    with pytest.raises(UnknownIdentifierError):
        parse("x")


def test_position_is_utf8_byte_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("t + é")
    assert info.value.pos.column == 5
    assert info.value.pos.offset == 4
    with pytest.raises(ExprSyntaxError) as info:
        parse(" t )")  # non-breaking space is whitespace, two bytes long
    assert info.value.pos.column == 4
    assert info.value.pos.offset == 4


@pytest.mark.parametrize(
    "src, t, column",
    [("ln(t)", 0.0, 1), ("1 / t", 0.0, 3), ("sqrt(t - 1)", 0.5, 1), ("exp(t)", 1000.0, 1), ("2 * ln(t)", -1.0, 5)],
)
def test_domain_errors_carry_position(src, t, column):
    with pytest.raises(ExprDomainError) as info:
        evaluate(parse(src), t)
    assert info.value.pos.column == column


# random trees: constants are non-negative so that printing and parsing agree
consts = st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Const)
leaves = st.one_of(consts, st.just(Var()))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(Call, st.sampled_from(sorted(FUNCTIONS)), children),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
def test_print_parse_round_trip(e):
    assert parse(to_source(e)) == e


@given(trees, st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=1, max_size=20))
def test_round_trip_evaluates_bit_exactly(e, ts):
    e2 = parse(to_source(e))
    for t in ts:
        try:
            v = evaluate(e, t)
        except ExprDomainError:
            with pytest.raises(ExprDomainError):
                evaluate(e2, t)
            continue
        assert evaluate(e2, t) == v or (math.isnan(v) and math.isnan(evaluate(e2, t)))


@given(trees, st.floats(min_value=-10.0, max_value=10.0))
def test_evaluation_is_finite_or_raises(e, t):
    try:
        v = evaluate(e, t)
    except ExprDomainError as exc:
        assert exc.pos.column >= 1
    else:
        assert math.isfinite(v)


CORPUS = ["0", "50", "-8", "cos(10*t)", "t^2 - 3*t + 1", "exp(-t)*sin(2*t)", "1/(1+t^2)", "sqrt(1 + t)"]


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_round_trip_at_random_points(src):
    import numpy as np

    e = parse(src)
    e2 = parse(to_source(e))
    assert e2 == e
    for t in np.random.default_rng(7).uniform(0.0, 1.0, 100):
        assert evaluate(e2, t) == evaluate(e, t)
