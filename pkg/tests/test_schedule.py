import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tryon.errors import DomainError, ShapeError
from tryon.grid import Grid2D, constant_grid
from tryon.schedule import NoiseSchedule, ddpm_step, forward_diffuse, make_linear_schedule

from oracles import scalar_error_recurrence


def scalar_grid(v):
    return Grid2D(np.full((1, 1, 1), float(v)))


class TestMakeLinearSchedule:
    def test_t2_constant_beta_by_hand(self):
        s = make_linear_schedule(2, 0.5, 0.5)
        assert np.array_equal(s.beta, [0.5, 0.5])
        assert np.array_equal(s.alpha, [0.5, 0.5])
        assert np.array_equal(s.alpha_bar, [0.5, 0.25])

    def test_default_endpoint_exact(self):
        s = make_linear_schedule(30, 1e-4, 0.02)
        assert s.beta[0] == 1e-4
        assert s.beta[29] == 0.02

    @given(
        T=st.integers(2, 200),
        beta_min=st.floats(1e-6, 0.1),
        spread=st.floats(0.0, 0.5),
    )
    @settings(max_examples=50, deadline=None)
    def test_alpha_bar_strictly_decreasing(self, T, beta_min, spread):
        s = make_linear_schedule(T, beta_min, min(beta_min + spread, 0.99))
        assert np.all(np.diff(s.alpha_bar) < 0)

    def test_product_relation_exact(self):
        s = make_linear_schedule(50)
        assert s.alpha_bar[0] == s.alpha[0]
        assert np.array_equal(s.alpha_bar[1:], s.alpha_bar[:-1] * s.alpha[1:])

    def test_sigma_definition(self):
        s = make_linear_schedule(5)
        assert s.sigma[0] == 0.0
        for t in range(1, 5):
            want = math.sqrt((1 - s.alpha_bar[t - 1]) / (1 - s.alpha_bar[t]) * s.beta[t])
            assert s.sigma[t] == pytest.approx(want, abs=0, rel=1e-15)

    def test_rejects_bad_domain(self):
        with pytest.raises(DomainError):
            make_linear_schedule(1)
        with pytest.raises(DomainError):
            make_linear_schedule(10, 0.0, 0.02)
        with pytest.raises(DomainError):
            make_linear_schedule(10, 0.5, 0.2)
        with pytest.raises(DomainError):
            make_linear_schedule(10, 0.5, 1.0)

    def test_json_round_trip(self):
        s = make_linear_schedule(30)
        doc = s.to_json()
        assert set(doc) == {"T", "beta", "alpha", "alpha_bar", "sigma"}
        assert doc["T"] == 30 and len(doc["sigma"]) == 30
        back = NoiseSchedule.from_json(doc)
        assert np.array_equal(back.alpha_bar, s.alpha_bar)
        assert back.schedule_id == s.schedule_id

    def test_invariants_enforced_on_construction(self):
        s = make_linear_schedule(4)
        with pytest.raises(DomainError):
            NoiseSchedule(s.beta, s.alpha, s.alpha_bar[::-1], s.sigma)
        with pytest.raises(DomainError):
            NoiseSchedule(s.beta, s.alpha * 0.9, s.alpha_bar, s.sigma)
        bad_sigma = s.sigma.copy()
        bad_sigma[0] = 0.3
        with pytest.raises(DomainError):
            NoiseSchedule(s.beta, s.alpha, s.alpha_bar, bad_sigma)


class TestForwardDiffuse:
    def test_zero_signal_leaves_scaled_noise(self, sched30, rng):
        noise = Grid2D(rng.standard_normal((4, 4, 2)))
        z0 = constant_grid(4, 4, 2, 0.0)
        out = forward_diffuse(z0, 12, sched30, noise)
        want = np.sqrt(1 - sched30.alpha_bar[12]) * noise.values
        assert np.array_equal(out.values, want)

    def test_scalar_case(self):
        # alpha_bar exactly 0.25 at t=1: beta = {0.5, 0.5}
        s = make_linear_schedule(2, 0.5, 0.5)
        out = forward_diffuse(scalar_grid(2.0), 1, s, scalar_grid(1.0))
        assert out.values[0, 0, 0] == pytest.approx(0.5 * 2 + math.sqrt(0.75), abs=1e-12)

    def test_alpha_bar_near_one_approaches_identity(self):
        s = make_linear_schedule(2, 1e-12, 1e-12)
        out = forward_diffuse(scalar_grid(2.0), 0, s, scalar_grid(1.0))
        assert out.values[0, 0, 0] == pytest.approx(2.0, abs=1e-5)

    def test_domain_and_shape_errors(self, sched30):
        z = constant_grid(2, 2, 1, 0.0)
        with pytest.raises(DomainError):
            forward_diffuse(z, 30, sched30, z)
        with pytest.raises(DomainError):
            forward_diffuse(z, -1, sched30, z)
        with pytest.raises(ShapeError):
            forward_diffuse(z, 0, sched30, constant_grid(2, 3, 1, 0.0))


class TestDdpmStep:
    def test_zero_eps_zero_sigma_is_rescale(self, rng):
        s = make_linear_schedule(4)
        z = Grid2D(rng.standard_normal((3, 3, 1)))
        zero = constant_grid(3, 3, 1, 0.0)
        out = ddpm_step(z, zero, 0, s, zero)
        assert np.array_equal(out.values, z.values / np.sqrt(s.alpha[0]))

    def test_scalar_arithmetic_case(self):
        # Hand-built schedule hitting alpha_1 = 0.96, alpha_bar_1 ~= 0.5.
        beta = np.array([1 - 0.5 / 0.96, 0.04])
        alpha = 1.0 - beta
        alpha_bar = np.array([alpha[0], alpha[0] * alpha[1]])
        s = NoiseSchedule(beta, alpha, alpha_bar, np.zeros(2))
        zero = scalar_grid(0.0)
        out = ddpm_step(scalar_grid(1.0), scalar_grid(1.0), 1, s, zero)
        want = (1 / math.sqrt(alpha[1])) * (1 - (1 - alpha[1]) / math.sqrt(1 - alpha_bar[1]))
        assert out.values[0, 0, 0] == pytest.approx(want, rel=1e-14)
        assert out.values[0, 0, 0] == pytest.approx(0.96287, abs=5e-5)

    def test_noise_term_is_additive(self):
        s = make_linear_schedule(2, 0.5, 0.5)
        s = dataclasses.replace(s, sigma=np.array([0.0, 0.1]))
        z, eps = scalar_grid(0.8), scalar_grid(0.3)
        base = ddpm_step(z, eps, 1, s, scalar_grid(0.0))
        shifted = ddpm_step(z, eps, 1, s, scalar_grid(1.0))
        assert shifted.values[0, 0, 0] - base.values[0, 0, 0] == pytest.approx(0.1, abs=1e-15)

    def test_forward_and_reverse_are_mutually_inverse_scalings(self, sched30, rng):
        z0 = Grid2D(rng.uniform(-1, 1, (2, 2, 1)))
        zero = constant_grid(2, 2, 1, 0.0)
        for t in (0, 7, 29):
            z = forward_diffuse(z0, t, sched30, zero)
            for step in range(t, -1, -1):
                z = ddpm_step(z, zero, step, sched30, zero)
            assert np.abs(z.values - z0.values).max() < 1e-9

    def test_errors(self, sched30):
        z = constant_grid(2, 2, 1, 0.0)
        with pytest.raises(DomainError):
            ddpm_step(z, z, 99, sched30, z)
        with pytest.raises(ShapeError):
            ddpm_step(z, constant_grid(1, 2, 1, 0.0), 0, sched30, z)


class TestClosedFormRecurrence:
    def test_chain_matches_scalar_recurrence(self):
        """Optimal point-mass predictions contract the error by the closed form."""
        s = make_linear_schedule(30)
        mu = 0.3
        e = 1.0
        z = Grid2D(np.full((2, 2, 1), np.sqrt(s.alpha_bar[29]) * mu + e))
        zero = constant_grid(2, 2, 1, 0.0)
        expected = scalar_error_recurrence(s.alpha, s.alpha_bar, e)
        for i, t in enumerate(range(29, -1, -1)):
            eps_hat = (z.values - np.sqrt(s.alpha_bar[t]) * mu) / np.sqrt(1 - s.alpha_bar[t])
            z = ddpm_step(z, Grid2D(eps_hat), t, s, zero)
            ab_prev = s.alpha_bar[t - 1] if t >= 1 else 1.0
            e_chain = z.values - np.sqrt(ab_prev) * mu
            assert np.abs(e_chain - expected[i]).max() < 1e-12
