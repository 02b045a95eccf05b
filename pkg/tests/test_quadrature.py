import math

import numpy as np
import pytest
from scipy import integrate as sci

from ergodiff.errors import DomainError, EvaluationError, NonConvergenceError
from ergodiff.quadrature import (QuadratureConfig, integrate_finite,
                                 integrate_semi_infinite)


def test_polynomial():
    res = integrate_finite(lambda x: x ** 2, 0.0, 1.0)
    assert res.converged
    assert abs(res.value - 1.0 / 3.0) <= max(res.error_estimate, 1e-12)


def test_gaussian_exponential_series():
    # oracle: scipy quad, independent of the engine under test
    oracle, _ = sci.quad(lambda t: math.exp(t * t), 0.0, 1.0, epsabs=1e-13)
    res = integrate_finite(lambda x: np.exp(x ** 2), 0.0, 1.0)
    assert abs(res.value - oracle) < 1e-9
    assert abs(res.value - 1.46265174590718) < 1e-9


def test_empty_interval():
    res = integrate_finite(lambda x: np.ones_like(x), 2.0, 2.0)
    assert res.value == 0.0 and res.converged


def test_endpoint_order_rejected():
    with pytest.raises(DomainError):
        integrate_finite(lambda x: x, 1.0, 0.0)


def test_scalar_fallback():
    res = integrate_finite(math.sin, 0.0, math.pi)
    assert abs(res.value - 2.0) < 1e-10


def test_non_finite_integrand():
    with np.errstate(divide="ignore"), pytest.raises(EvaluationError):
        integrate_finite(lambda x: 1.0 / (x - 0.5), 0.5, 1.0)


def test_budget_exhaustion():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=3)
    with pytest.raises(NonConvergenceError):
        integrate_finite(lambda x: np.exp(np.sin(17 * x) * 5), 0.0, 10.0, cfg)


def test_exponential_ray():
    res = integrate_semi_infinite(lambda x: np.exp(-x), 0.0, math.inf)
    assert res.converged and not res.diverged
    assert abs(res.value - 1.0) < 1e-9


def test_gaussian_two_rays():
    right = integrate_semi_infinite(lambda x: 2 * np.exp(-x ** 2), 0.0, math.inf)
    left = integrate_semi_infinite(lambda x: 2 * np.exp(-x ** 2), 0.0, -math.inf)
    total = right.value + left.value
    assert abs(total - 2 * math.sqrt(math.pi)) < 1e-8


def test_harmonic_tail_divergent():
    res = integrate_semi_infinite(lambda x: 1.0 / x, 1.0, math.inf)
    assert res.diverged and res.value == math.inf


def test_constant_divergent_by_growth():
    res = integrate_semi_infinite(lambda x: np.full_like(x, 2.0), 0.0, math.inf)
    assert res.diverged


def test_fast_blowup_divergent_by_cap():
    res = integrate_semi_infinite(lambda x: np.exp(x), 0.0, math.inf)
    assert res.diverged and res.value == math.inf


def test_left_ray_matches_reflection():
    res = integrate_semi_infinite(lambda x: np.exp(x), 0.0, -math.inf)
    assert abs(res.value - 1.0) < 1e-9


def test_max_range_unresolved():
    with pytest.raises(NonConvergenceError):
        integrate_semi_infinite(lambda x: np.full_like(x, 2.0), 0.0, math.inf,
                                max_range=10.0)


def test_linearity_on_random_polynomials():
    rng = np.random.default_rng(42)
    for _ in range(20):
        c1 = rng.normal(size=4)
        c2 = rng.normal(size=4)
        al, be = rng.normal(size=2)
        f = lambda x: np.polyval(c1, x)
        g = lambda x: np.polyval(c2, x)
        h = lambda x: al * np.polyval(c1, x) + be * np.polyval(c2, x)
        a, b = sorted(rng.uniform(-3, 3, size=2))
        rf = integrate_finite(f, a, b)
        rg = integrate_finite(g, a, b)
        rh = integrate_finite(h, a, b)
        combined_err = 2 * (abs(al) * rf.error_estimate
                            + abs(be) * rg.error_estimate + rh.error_estimate)
        assert abs(rh.value - (al * rf.value + be * rg.value)) \
            <= combined_err + 1e-10


def test_interval_additivity():
    rng = np.random.default_rng(7)
    f = lambda x: np.exp(-x) * np.sin(3 * x)
    for _ in range(10):
        a, b, c = sorted(rng.uniform(-2, 4, size=3))
        r1 = integrate_finite(f, a, b)
        r2 = integrate_finite(f, b, c)
        r3 = integrate_finite(f, a, c)
        tol = r1.error_estimate + r2.error_estimate + r3.error_estimate + 1e-11
        assert abs(r1.value + r2.value - r3.value) <= tol


def test_substitution_correctness():
    # the ray result must match the finite integral of the hand-substituted
    # integrand u = t/(1-t), du = dt/(1-t)^2
    ray = integrate_semi_infinite(lambda x: np.exp(-x), 0.0, math.inf)

    def transformed(t):
        t = np.asarray(t)
        return np.exp(-t / (1.0 - t)) / (1.0 - t) ** 2

    finite = integrate_finite(transformed, 0.0, 1.0 - 1e-12)
    assert abs(ray.value - finite.value) < 1e-10


def test_result_invariant_error_vs_tolerance():
    cfg = QuadratureConfig()
    res = integrate_finite(lambda x: np.cos(x), 0.0, 2.0, cfg)
    assert res.converged
    assert res.error_estimate <= max(cfg.abs_tol, cfg.rel_tol * abs(res.value))
