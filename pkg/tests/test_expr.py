import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerprod.errors import DomainError
from finslerprod.expr import (
    Binary,
    EvalError,
    Number,
    ParseError,
    Variable,
    compile_expr,
    evaluate,
    free_variables,
    parse,
    to_string,
)
from finslerprod.jet import Jet, lift, partial, seed_variables
from finslerprod.product import f_partials, Custom


def test_basic_eval():
    assert evaluate(parse("2*x + y^2"), {"x": 1.0, "y": 3.0}) == 11.0


def test_ratio_square_structure():
    assert parse("s^2/t") == Binary("/", Binary("^", Variable("s"), Number(2.0)), Variable("t"))


def test_sqrt_eval():
    assert evaluate(parse("sqrt(x)"), {"x": 4.0}) == 2.0


def test_sin_on_jet():
    (x,) = seed_variables([0.0], 1)
    out = evaluate(parse("sin(x)"), {"x": x})
    assert out.coefficient((1,)) == 1.0


def test_ratio_square_partials():
    fp = f_partials(Custom(parse("s^2/t")), 1.0, 1.0)
    assert float(fp.f_s) == 2.0
    assert float(fp.f_t) == -1.0
    assert float(fp.f_st) == -2.0
    assert float(fp.f_ss) == 2.0


@pytest.mark.parametrize("text, value", [
    ("2+3*4^2", 50.0),
    ("-2^2", -4.0),
    ("2^3^2", 512.0),
    ("(-2)^3", -8.0),
    ("2^-1", 0.5),
    ("-x*y", -6.0),
    ("10/2/5", 1.0),
    ("8-3-2", 3.0),
    ("1.5e1 + 0.5", 15.5),
    ("pow(2, 10)", 1024.0),
])
def test_precedence(text, value):
    assert evaluate(parse(text), {"x": 2.0, "y": 3.0}) == value


MALFORMED = [
    ("2*+x", 2),
    ("", 0),
    ("1 +", 3),
    ("(x + 1", 6),
    ("x + 1)", 5),
    ("foo(x)", 0),
    ("sin(x, y)", 8),
    ("pow(x)", 5),
    ("x $ y", 2),
    ("x\u00a0+ @", 5),  # offsets count UTF-8 bytes: no-break space is two
]


@pytest.mark.parametrize("text, offset", MALFORMED)
def test_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.byte_offset == offset
    assert 0 <= info.value.byte_offset <= len(text.encode("utf-8"))


def test_error_fields():
    with pytest.raises(ParseError) as info:
        parse("2*+x")
    assert info.value.found == "'+'"
    assert "number" in info.value.expected


CORPUS = [
    "x", "2", "0.5", "1e-3", "x + y", "x - y - z", "x - (y - z)", "x * y / z", "x / (y * z)",
    "x ^ y ^ z", "(x ^ y) ^ z", "-x", "-(x + y)", "--x", "-x ^ 2", "(-x) ^ 2", "x ^ -y",
    "2 * x + 3 * y", "sqrt(x * x + y * y)", "sin(x) * cos(y)", "tan(x / 2)", "exp(-x ^ 2)",
    "ln(1 + x)", "log(x)", "pow(x, 3)", "pow(x + 1, y - 2)", "x * (y + z)", "(x + y) * (x - y)",
    "x / y / z", "x / (y / z)", "1 / (1 + exp(-x))", "sqrt(1 - x ^ 2 - y ^ 2)",
    "s ^ 2 / t", "2 * s + 3 * t", "sqrt(s ^ 2 + s * t + t ^ 2)", "(s + t) ^ 2 / (s + t)",
    "x1 * x2 + y1 * y2", "sin(x1) ^ 2", "1 + 0.5 * x1 ^ 2", "exp(0.3 * x2)",
    "(1 - x1 ^ 2 - x2 ^ 2) ^ -1", "cos(sin(tan(x)))", "x - -y", "x * -y", "-x * y",
    "-(x * y)", "2 ^ 0.5 * x", "(x + 1) ^ (y + 1)", "1e10 * x", "3.25 - x / 4",
]


def test_corpus_size():
    assert len(CORPUS) == 50


@pytest.mark.parametrize("text", CORPUS)
def test_round_trip(text):
    ast = parse(text)
    printed = to_string(ast)
    assert parse(printed) == ast
    assert to_string(parse(printed)) == printed


def test_unbound_variable():
    with pytest.raises(EvalError):
        evaluate(parse("x + q"), {"x": 1.0})


def test_domain_error_from_primitive():
    with pytest.raises(DomainError):
        evaluate(parse("sqrt(x)"), {"x": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse("x^0.5"), {"x": -4.0})


def test_free_variables():
    assert free_variables(parse("sin(x1) * y2 + pow(s, t)")) == {"x1", "y2", "s", "t"}


def test_compile_expr_matches_evaluate():
    f = compile_expr("x*exp(y)", ("x", "y"))
    J = lift(f, [2.0, 0.0], 2)
    assert J.value == 2.0
    assert partial(J, (1, 1)) == 1.0


# real evaluation equals order-0 jet evaluation, bit for bit

ENV_CORPUS = [t for t in CORPUS if free_variables(parse(t)) <= {"x", "y", "z", "s", "t", "x1", "x2", "y1", "y2"}]
NAMES = ("x", "y", "z", "s", "t", "x1", "x2", "y1", "y2")


@given(values=st.lists(st.floats(0.1, 0.9), min_size=len(NAMES), max_size=len(NAMES)))
@settings(max_examples=40, deadline=None)
def test_real_equals_order_zero_jet(values):
    env = dict(zip(NAMES, values))
    jets = dict(zip(NAMES, seed_variables(np.array(values), 0)))
    for text in ENV_CORPUS:
        ast = parse(text)
        try:
            real = evaluate(ast, env)
        except DomainError:
            continue
        out = evaluate(ast, jets)
        jv = out.value if isinstance(out, Jet) else out
        assert float(jv) == real or (math.isnan(real) and math.isnan(jv)), text


@given(a=st.floats(-1e3, 1e3), b=st.floats(0.01, 1e3))
@settings(max_examples=60, deadline=None)
def test_number_literals_round_trip(a, b):
    # negative literals come back as Unary("-", ...), so compare values
    ast = Binary("+", Number(a), Binary("*", Number(b), Variable("x")))
    back = parse(to_string(ast))
    if math.copysign(1.0, a) > 0:
        assert back == ast
    assert evaluate(back, {"x": 1.0}) == evaluate(ast, {"x": 1.0})


def test_negative_literal_under_power():
    ast = Binary("^", Number(-2.0), Number(2.0))
    assert evaluate(parse(to_string(ast)), {}) == 4.0
