import numpy as np
import pytest

from ctmcpert import (RateEvalError, RateFunction, RateSyntaxError, eval_rate,
                      parse_rate, periodic_mean)


def test_parse_examples():
    r = parse_rate("1 + sin(2*pi*t)")
    assert eval_rate(r, 0.25) == pytest.approx(2.0, abs=1e-15)
    lam = parse_rate("200*(1+sin(2*pi*1*t))")
    assert eval_rate(lam, 0.0) == pytest.approx(200.0)
    const = parse_rate("3")
    assert eval_rate(const, 17.3) == 3.0
    assert const.time_invariant


def test_eval_examples():
    r = parse_rate("1 + sin(2*pi*t)")
    assert eval_rate(r, 0.75) == pytest.approx(0.0, abs=1e-15)
    tab = RateFunction.from_table([(0, 1), (0.5, 4)])
    assert eval_rate(tab, 0.6) == 4.0
    clamp = parse_rate("min(t, 2)")
    assert eval_rate(clamp, 5.0) == 2.0


def test_table_semantics():
    tab = RateFunction.from_table([(0, 1), (0.5, 4)], period=1.0)
    # right-continuous step, wrapping at the declared period
    assert tab(0.5) == 4.0
    assert tab(0.499) == 1.0
    assert tab(1.2) == 1.0
    assert tab(1.7) == 4.0
    free = RateFunction.from_table([(0, 1), (0.5, 4)])
    assert free(100.0) == 4.0  # last value extends without a period
    ts = np.array([0.0, 0.499, 0.5, 1.2, 1.7])
    assert np.allclose(tab.values(ts), [1, 1, 4, 1, 4])


@pytest.mark.parametrize("pairs,period,message", [
    ([], None, "empty"),
    ([(0.5, 1)], None, "start at t = 0"),
    ([(0, 1), (0, 2)], None, "strictly increasing"),
    ([(0, 1), (1.5, 2)], 1.0, "inside the period"),
])
def test_table_validation(pairs, period, message):
    with pytest.raises(ValueError, match=message):
        RateFunction.from_table(pairs, period)


def test_table_rejects_negative_values():
    with pytest.raises(RateEvalError):
        RateFunction.from_table([(0, 1), (0.5, -4)])


@pytest.mark.parametrize("source", [
    "1 + sin(2*pi*t)",
    "200*(1+sin(2*pi*1*t))",
    "2 - 3 - t",
    "2/(3/(t+1))",
    "-(t+1)*2 + 10",
    "max(t, 2)/min(t+1, 2)",
    "exp(-t)*cos(t/7)",
    "min(exp(t/10), max(1, t-3))",
])
def test_parse_print_round_trip(source):
    original = parse_rate(source)
    reparsed = parse_rate(original.canonical())
    rng = np.random.default_rng(11)
    ts = rng.uniform(0.0, 10.0, 1000)
    a = original.values(ts)
    b = reparsed.values(ts)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


def test_parse_print_round_trip_random_trees():
    # canonical printing must preserve precedence and associativity for
    # arbitrary expression shapes, not just hand-picked ones
    rng = np.random.default_rng(2024)

    def build(depth):
        roll = rng.random()
        if depth == 0 or roll < 0.25:
            if rng.random() < 0.4:
                return "t"
            return f"{rng.uniform(0.1, 9):.3f}"
        if roll < 0.75:
            op = rng.choice(["+", "-", "*", "/"])
            left = build(depth - 1)
            right = build(depth - 1)
            if op == "/":
                right = f"({right} + 10)"  # keep well away from zero
            return f"({left} {op} {right})"
        if roll < 0.85:
            return f"-({build(depth - 1)})"
        fn = rng.choice(["sin", "cos", "min", "max"])
        if fn in ("sin", "cos"):
            return f"{fn}({build(depth - 1)})"
        return f"{fn}({build(depth - 1)}, {build(depth - 1)})"

    ts = np.linspace(0.013, 10.0, 251)
    for _ in range(60):
        source = build(int(rng.integers(1, 5)))
        first = parse_rate(source)
        second = parse_rate(first.canonical())
        a, b = first.values(ts), second.values(ts)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-280), \
            (source, first.canonical())
        # canonical form is a fixed point of parse-then-print
        assert second.canonical() == first.canonical()


def test_periodic_mean_examples():
    assert periodic_mean(RateFunction.constant(1.0, period=1.0)) == 1.0
    sine = parse_rate("1 + sin(2*pi*t)", period=1.0)
    assert periodic_mean(sine) == pytest.approx(1.0, abs=1e-10)
    lam = parse_rate("200*(1+sin(2*pi*t))", period=1.0)
    assert periodic_mean(lam) == pytest.approx(200.0, rel=1e-10)


def test_periodic_mean_constant_exact():
    assert periodic_mean(RateFunction.constant(2.75, period=0.7)) == 2.75
    expr = parse_rate("2.75", period=0.7)
    assert periodic_mean(expr) == pytest.approx(2.75, abs=1e-10)


def test_periodic_mean_linearity():
    r1 = parse_rate("1 + sin(2*pi*t)", period=1.0)
    r2 = parse_rate("2 + cos(2*pi*t)", period=1.0)
    combo = parse_rate("0.3*(1 + sin(2*pi*t)) + 1.7*(2 + cos(2*pi*t))",
                       period=1.0)
    expected = 0.3 * periodic_mean(r1) + 1.7 * periodic_mean(r2)
    assert periodic_mean(combo) == pytest.approx(expected, abs=1e-10)


def test_periodic_mean_of_table():
    tab = RateFunction.from_table([(0, 1), (0.5, 3)], period=1.0)
    assert periodic_mean(tab) == pytest.approx(2.0, abs=1e-5)


def test_periodic_mean_requires_period():
    with pytest.raises(ValueError, match="period"):
        periodic_mean(parse_rate("1 + sin(2*pi*t)"))


def test_syntax_errors_carry_offsets():
    with pytest.raises(RateSyntaxError) as err:
        parse_rate("2 +* t")
    assert err.value.offset == 3
    with pytest.raises(RateSyntaxError, match="unknown identifier 'foo'"):
        parse_rate("foo(t)")
    with pytest.raises(RateSyntaxError, match="empty"):
        parse_rate("   ")
    with pytest.raises(RateSyntaxError):
        parse_rate("sin(t, 1)")
    with pytest.raises(RateSyntaxError):
        parse_rate("(1 + t")


def test_eval_errors():
    with pytest.raises(RateEvalError, match="negative"):
        eval_rate(parse_rate("t - 5"), 0.0)
    with pytest.raises(RateEvalError):
        eval_rate(parse_rate("1/(t-1)"), 1.0)
    with pytest.raises(ValueError, match="t >= 0"):
        eval_rate(parse_rate("t"), -0.5)


def test_whitespace_insensitive():
    a = parse_rate("1+sin(2*pi*t)")
    b = parse_rate("  1 +  sin( 2 * pi * t )  ")
    ts = np.linspace(0, 3, 50)
    assert np.allclose(a.values(ts), b.values(ts), rtol=0, atol=0)


def test_scientific_literals():
    r = parse_rate("2.5e-4 + 1e2*t")
    assert eval_rate(r, 0.0) == 2.5e-4
    assert eval_rate(r, 1.0) == pytest.approx(100.00025)
