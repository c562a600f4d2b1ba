import math

import numpy as np
import pytest

from auditgames.errors import (
    DegreeCapExceeded,
    NearSingularity,
    ZeroPolynomial,
)
from auditgames.poly import (
    Polynomial,
    RationalFn,
    count_roots,
    eval_rational,
    isolate_roots,
    poly_add,
    poly_arith,
    poly_mul,
    quotient_derivative,
    sturm_sequence,
)

P = Polynomial.from_coeffs


def from_roots(roots, scale=1.0):
    poly = P((scale,))
    for r in roots:
        poly = poly_mul(poly, P((-r, 1.0)))
    return poly


def test_difference_of_squares():
    assert poly_mul(P((1.0, 1.0)), P((-1.0, 1.0))).coefficients == (-1.0, 0.0, 1.0)


def test_additive_identity():
    p = P((0.3, 0.0, 2.0))
    assert poly_add(p, P((0.0,))).coefficients == p.coefficients


def test_expansion():
    got = poly_mul(P((0.3, 1.0)), P((0.7, 1.0)))
    assert np.allclose(got.coefficients, (0.21, 1.0, 1.0))


def test_degree_cap():
    with pytest.raises(DegreeCapExceeded):
        poly_arith(P((0, 0, 1.0)), P((0, 0, 1.0)), "mul", cap=3)


def test_quotient_rule():
    f = RationalFn(P((0.0, 0.0, 1.0)), P((1.0, 1.0)))  # x^2 / (x+1)
    df = quotient_derivative(f)
    assert np.allclose(df.numerator.coefficients, (0.0, 2.0, 1.0))
    assert np.allclose(df.denominator.coefficients, (1.0, 2.0, 1.0))


def test_derivative_of_constant_and_linear():
    df = quotient_derivative(RationalFn(P((3.0,)), P((1.0,))))
    assert df.numerator.is_zero
    df = quotient_derivative(RationalFn(P((3.0, 2.0)), P((1.0,))))
    assert df.numerator.coefficients == (2.0,)


def test_eval_rational():
    f = RationalFn(P((0.0, 0.0, 1.0)), P((1.0, 1.0)))
    assert eval_rational(f, 1.0) == 0.5
    assert eval_rational(RationalFn(P((3.0,)), P((1.0,))), 0.42) == 3.0
    with pytest.raises(NearSingularity):
        eval_rational(f, -1.0)


def test_isolate_simple_root():
    roots = isolate_roots(P((-0.25, 0.0, 1.0)), (0.0, 1.0), 20)
    assert len(roots) == 1
    assert abs(roots[0].value - 0.5) <= 2.0 ** -20
    assert roots[0].sign_change


def test_isolate_two_constructed_roots():
    p = from_roots([0.3, 0.7])
    roots = isolate_roots(p, (0.0, 1.0), 30)
    assert len(roots) == 2
    assert abs(roots[0].value - 0.3) <= 2.0 ** -30
    assert abs(roots[1].value - 0.7) <= 2.0 ** -30


def test_isolate_no_real_roots():
    assert isolate_roots(P((1.0, 0.0, 1.0)), (0.0, 1.0), 20) == []


def test_zero_polynomial_raises():
    with pytest.raises(ZeroPolynomial):
        isolate_roots(P((0.0,)), (0.0, 1.0), 10)


def test_even_multiplicity_touch_root():
    p = poly_mul(P((-0.4, 1.0)), P((-0.4, 1.0)))  # (x - 0.4)^2
    roots = isolate_roots(p, (0.0, 1.0), 20)
    assert len(roots) == 1
    assert abs(roots[0].value - 0.4) <= 2.0 ** -18  # sqfree flattening costs bits
    assert not roots[0].sign_change


def test_sturm_count_matches_numpy_roots():
    rng = np.random.default_rng(12)
    for _ in range(120):
        deg = int(rng.integers(1, 13))
        n_in = int(rng.integers(0, min(deg, 5) + 1))
        rs = sorted(rng.uniform(0.02, 0.98, n_in))
        if any(b - a < 1e-3 for a, b in zip(rs, rs[1:])):
            continue
        outside = list(rng.uniform(1.1, 3.0, deg - n_in))
        p = from_roots(list(rs) + outside)
        chain = sturm_sequence(p)
        assert count_roots(chain, 0.0, 1.0) == n_in
        found = isolate_roots(p, (0.0, 1.0), 20)
        assert len(found) == n_in
        for want, got in zip(rs, found):
            assert abs(got.value - want) <= 2.0 ** -20 + 1e-9


def test_bracketing_invariant():
    rng = np.random.default_rng(5)
    for _ in range(40):
        rs = np.unique(np.round(rng.uniform(0.05, 0.95, 3), 2))
        if len(rs) < 1:
            continue
        p = from_roots(rs)
        for root in isolate_roots(p, (0.0, 1.0), 20):
            lo = p(root.value - root.radius)
            hi = p(root.value + root.radius)
            assert lo * hi <= 0.0 or not root.sign_change


def test_quotient_derivative_matches_finite_differences():
    rng = np.random.default_rng(77)
    for _ in range(10):
        num = P(tuple(rng.normal(size=4)))
        den = P((1.0, *rng.uniform(0.2, 1.0, 2)))
        f = RationalFn(num, den)
        df = quotient_derivative(f)
        for _ in range(10):
            x = rng.uniform(0.05, 0.95)
            h = 1e-6
            fd = (eval_rational(f, x + h) - eval_rational(f, x - h)) / (2 * h)
            exact = eval_rational(df, x)
            assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_precision_warning_beyond_30_bits():
    with pytest.warns(UserWarning):
        isolate_roots(P((-0.25, 0.0, 1.0)), (0.0, 1.0), 35)
    with pytest.warns(UserWarning):
        isolate_roots(P((-0.25, 0.0, 1.0)), (0.0, 1.0), 45)
