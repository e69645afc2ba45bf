import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from toys import TIGHT, quad1d, quad2d

from monobar.barrier import (
    SATURATION_CAP,
    ScaledBox,
    barrier_eval,
    barrier_eval_scaled,
    safe_even_power,
)
from monobar.model import Box, QuadraticProblem
from monobar.newton import inner_solve

even_mu = st.integers(1, 2**9).map(lambda k: 2 * k)


class TestSafeEvenPower:
    def test_exact_small_power(self):
        assert safe_even_power(0.5, 4) == (0.0625, False)

    @pytest.mark.parametrize("mu", [2, 32, 2**20, 2**40])
    def test_minus_one(self, mu):
        assert safe_even_power(-1.0, mu) == (1.0, False)

    def test_saturates_instead_of_overflowing(self):
        value, saturated = safe_even_power(1.5, 2**20)
        assert value == SATURATION_CAP and saturated

    def test_vector_flags(self):
        value, saturated = safe_even_power(np.array([0.5, -3.0]), 2**12)
        assert value[1] == SATURATION_CAP
        assert saturated.tolist() == [False, True]

    @pytest.mark.parametrize("mu", [0, 3, 2.5, -2])
    def test_rejects_bad_exponent(self, mu):
        with pytest.raises(ValueError):
            safe_even_power(0.5, mu)

    @given(st.floats(-10, 10), st.floats(-10, 10), even_mu)
    def test_monotone_in_magnitude(self, a, b, mu):
        lo, hi = sorted((abs(a), abs(b)))
        assert safe_even_power(lo, mu)[0] <= safe_even_power(hi, mu)[0]


class TestBarrierEval:
    def test_zero_at_center(self):
        qp = quad2d()
        sb = ScaledBox.from_box(qp.box)
        ev = barrier_eval(qp.box.center, 8, sb, qp.problem)
        assert ev.penalty == 0.0
        assert not ev.grad_term.any() and not ev.hess_diag.any()

    def test_one_dimensional_values(self):
        qp = quad1d(0.8)
        ev = barrier_eval([0.5], 4, ScaledBox.from_box(qp.box), qp.problem)
        assert ev.penalty == 0.015625
        assert ev.grad_term[0] == 0.125
        assert ev.hess_diag[0] == 0.75
        assert ev.value == pytest.approx(0.5 * 0.3**2 + 0.015625)

    def test_unit_corner(self):
        qp = QuadraticProblem.from_dense(np.zeros((2, 2)), [0.0, 0.0], Box([-1, -1], [1, 1]))
        assert barrier_eval_scaled([1.0, 1.0], 8, qp.problem).penalty == 0.125

    def test_far_outside_saturates_finitely(self):
        qp = quad1d(0.0)
        ev = barrier_eval([50.0], 2**40, ScaledBox.from_box(qp.box), qp.problem)
        assert ev.saturated
        assert np.isfinite(ev.value) and np.all(np.isfinite(ev.grad_term))
        assert np.all(np.isfinite(ev.hess_diag))

    def test_half_widths_must_be_positive(self):
        with pytest.raises(ValueError):
            ScaledBox.from_box(Box([0.0], [0.0]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.integers(1, 64).map(lambda k: 2 * k))
    def test_scaled_and_direct_forms_agree(self, m, seed, mu):
        rng = np.random.default_rng(seed)
        lower = rng.uniform(-5, 5, m)
        box = Box(lower, lower + rng.uniform(0.1, 5, m))
        sb = ScaledBox.from_box(box)
        z = rng.uniform(-1.2, 1.2, m)
        zero = QuadraticProblem.from_dense(np.zeros((m, m)), np.zeros(m), box)
        direct = barrier_eval(sb.from_unit(z), mu, sb, zero.problem)
        scaled = barrier_eval_scaled(z, mu, zero.problem)
        assert direct.penalty == pytest.approx(scaled.penalty, rel=1e-10)
        # chain rule: d/dx = (1/q) d/dz
        assert np.allclose(direct.grad_term * sb.half_widths, scaled.grad_term, rtol=1e-10)
        assert np.allclose(direct.hess_diag * sb.half_widths**2, scaled.hess_diag, rtol=1e-10)

    @given(st.floats(-0.99, 0.99), even_mu)
    def test_penalty_decays_inside_box(self, z, mu):
        zero = QuadraticProblem.from_dense([[0.0]], [0.0], Box([-1.0], [1.0]))
        small = barrier_eval_scaled([z], mu, zero.problem).penalty
        larger = barrier_eval_scaled([z], 2 * mu, zero.problem).penalty
        assert larger <= small

    @given(st.floats(-1e3, 1e3), st.integers(1, 40).map(lambda k: 2**k))
    def test_never_overflows(self, x, mu):
        qp = quad1d(0.0)
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            ev = barrier_eval([x], mu, ScaledBox.from_box(qp.box), qp.problem)
        assert np.isfinite(ev.value)


def test_default_weight_2d_minimizer():
    # with the default 1/m weight the x1 stationarity condition is
    # x1 + 2 + x1**7 / 2 = 0, whose root is -1.08941409...
    qp = quad2d()
    res = inner_solve(qp.box.center, 8, qp.problem, ScaledBox.from_box(qp.box), TIGHT)
    assert res.x[0] == pytest.approx(-1.08941409, abs=1e-8)
    assert res.x[1] == pytest.approx(0.0, abs=1e-12)
