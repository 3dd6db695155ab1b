"""Flat-space closed forms, Fourier norms, and the packet-row flux growth.

Expected values come from hand Gaussian integrals, scipy quadrature of
the radial Fourier reduction, and a dense tensor-product evaluation of
one quadrature window frozen below.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from conewave.errors import NumericalError
from conewave.flatspace import (CounterexampleField, GaussianWavePacket,
                                colocated_control_integral,
                                counterexample_scaling, flat_sobolev_norm,
                                gaussian_gradient, gaussian_solution,
                                mixed_gradient_integral, sobolev_scaling_fit)


def fd_residual(fn, t, z, step):
    """|i u_t + 1/2 lap u| by fourth-order central differences."""
    ut = (fn(t - 2 * step, z) / 12 - 2 / 3 * fn(t - step, z)
          + 2 / 3 * fn(t + step, z) - fn(t + 2 * step, z) / 12) / step
    lap = 0.0
    for axis in range(3):
        acc = -2.5 * fn(t, z)
        for coeff, offset in ((-1 / 12, -2), (4 / 3, -1), (4 / 3, 1),
                              (-1 / 12, 2)):
            shifted = z.copy()
            shifted[..., axis] += offset * step
            acc = acc + coeff * fn(t, shifted)
        lap = lap + acc / step**2
    return np.abs(1j * ut + 0.5 * lap)


def fd_gradient(fn, t, z, step=1e-5):
    cols = []
    for axis in range(3):
        up, down = z.copy(), z.copy()
        up[..., axis] += step
        down[..., axis] -= step
        cols.append((fn(t, up) - fn(t, down)) / (2 * step))
    return np.stack(cols, axis=-1)


def cube_grid(half_width, count):
    x = np.linspace(-half_width, half_width, count, endpoint=False)
    return x[1] - x[0], np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)


def gaussian_radial_norm(s):
    """H^s norm of exp(-|z|^2/2) from the radial Fourier integral."""
    value, _ = quad(lambda r: r**2 * (1 + r**2)**s * math.exp(-r * r), 0, 12)
    return math.sqrt(4 * math.pi * value)


class TestGaussianSolution:
    def test_modulus_profile(self):
        # |phi| = (1+t^2)^(-3/4) exp(-|z|^2 / (2 (1+t^2))), a spreading
        # Gaussian that is standard at t = 0
        rng = np.random.default_rng(3)
        z = rng.normal(scale=2.0, size=(50, 3))
        for t in (0.0, 0.35, 1.7, -0.8):
            expected = ((1 + t * t) ** -0.75
                        * np.exp(-np.sum(z * z, -1) / (2 * (1 + t * t))))
            assert np.abs(gaussian_solution(t, z)) == pytest.approx(
                expected, rel=1e-12)

    def test_l2_norm_is_conserved(self):
        spacing, z = cube_grid(12.0, 160)
        for t in (0.0, 0.7, 2.0):
            mass = np.sum(np.abs(gaussian_solution(t, z)) ** 2) * spacing**3
            assert mass == pytest.approx(math.pi**1.5, rel=1e-9)

    def test_solves_the_free_equation(self):
        rng = np.random.default_rng(5)
        z = rng.normal(scale=1.2, size=(40, 3))
        assert fd_residual(gaussian_solution, 0.3, z, 1e-3).max() < 1e-8

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        z = rng.normal(scale=1.5, size=(30, 3))
        err = np.abs(gaussian_gradient(0.6, z) - fd_gradient(
            gaussian_solution, 0.6, z))
        assert err.max() < 1e-9


class TestGaussianWavePacket:
    def test_boosted_packet_still_solves(self):
        packet = GaussianWavePacket(center=(0.5, -0.2, 0.1),
                                    velocity=(1.0, 0.4, -0.3),
                                    amplitude=0.7 - 0.2j)
        rng = np.random.default_rng(5)
        z = rng.normal(scale=1.2, size=(40, 3))
        assert fd_residual(packet.value, 0.4, z, 1e-3).max() < 1e-8

    def test_gradient_matches_finite_differences(self):
        packet = GaussianWavePacket(velocity=(0.0, 2.0, 0.0), amplitude=1.5)
        rng = np.random.default_rng(11)
        z = rng.normal(scale=1.0, size=(25, 3))
        err = np.abs(packet.gradient(0.2, z) - fd_gradient(packet.value, 0.2, z))
        assert err.max() < 1e-9

    def test_profile_rides_at_the_boost_velocity(self):
        # the boost phase is unimodular, so the modulus is the base
        # profile translated to center + velocity * t
        packet = GaussianWavePacket(center=(1.0, 0.0, -2.0),
                                    velocity=(3.0, -1.0, 0.5), amplitude=2.0)
        rng = np.random.default_rng(2)
        offsets = rng.normal(size=(20, 3))
        for t in (0.0, 0.6, 1.4):
            spot = np.asarray(packet.center) + np.asarray(packet.velocity) * t
            got = np.abs(packet.value(t, spot + offsets))
            base = 2.0 * np.abs(gaussian_solution(t, offsets))
            assert got == pytest.approx(base, rel=1e-12)


class TestCounterexampleField:
    def test_matches_the_packet_sum(self):
        field = CounterexampleField(3, signs=(1.0, -1.0, 1.0))
        n = 8.0
        rng = np.random.default_rng(7)
        z = rng.normal(scale=3.0, size=(30, 3)) + np.array([2.0, 0, 0])
        for t in (0.0, 0.02, 0.3):
            expected = math.sqrt(3) * gaussian_solution(n * n * t, n * z)
            for j, sign in zip((1, 2, 3), field.signs):
                shifted = z - np.array([2.0**j, 0.0, 0.0])
                expected = expected + sign * gaussian_solution(n * n * t,
                                                               n * shifted)
            assert field.value(t, z) == pytest.approx(expected, rel=1e-12)

    def test_solves_the_free_equation(self):
        field = CounterexampleField(2, signs=(1.0, -1.0))
        rng = np.random.default_rng(5)
        z = rng.normal(scale=0.25, size=(40, 3)) + np.array([1.0, 0, 0])
        assert fd_residual(field.value, 0.05, z, 2e-4).max() < 1e-7

    def test_gradient_matches_finite_differences(self):
        field = CounterexampleField(2, signs=(-1.0, 1.0))
        rng = np.random.default_rng(13)
        z = rng.normal(scale=0.4, size=(25, 3))
        err = np.abs(field.gradient(0.07, z) - fd_gradient(field.value, 0.07, z))
        assert err.max() < 1e-8

    def test_seeded_signs_are_deterministic(self):
        a = CounterexampleField(5, seed=42)
        b = CounterexampleField(5, seed=42)
        assert a.signs == b.signs
        assert all(s in (-1.0, 1.0) for s in a.signs)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            CounterexampleField(0)
        with pytest.raises(ValueError):
            CounterexampleField(3, signs=(1.0, -1.0))
        with pytest.raises(ValueError):
            CounterexampleField(2, signs=(1.0, 0.5))
        with pytest.raises(ValueError):
            CounterexampleField(2, signs=(1.0, -1.0), n_scale=-4.0)


class TestFlatSobolevNorm:
    def test_centered_gaussian_l2(self):
        spacing, z = cube_grid(8.0, 128)
        u = np.exp(-np.sum(z * z, -1) / 2)
        assert flat_sobolev_norm(u, 0.0, spacing=spacing) == pytest.approx(
            math.pi**0.75, rel=1e-12)

    def test_plancherel(self):
        spacing, z = cube_grid(8.0, 128)
        u = gaussian_solution(0.4, z)
        spectral = flat_sobolev_norm(u, 0.0, spacing=spacing)
        direct = math.sqrt(np.sum(np.abs(u) ** 2) * spacing**3)
        assert spectral == pytest.approx(direct, rel=1e-10)

    def test_matches_radial_quadrature_oracle(self):
        spacing, z = cube_grid(8.0, 128)
        u = np.exp(-np.sum(z * z, -1) / 2)
        for s in (0.5, 1.0, 2.0):
            assert flat_sobolev_norm(u, s, spacing=spacing) == pytest.approx(
                gaussian_radial_norm(s), rel=1e-8)

    def test_monotone_in_s(self):
        spacing, z = cube_grid(8.0, 96)
        u = gaussian_solution(0.0, z)
        values = [flat_sobolev_norm(u, s, spacing=spacing)
                  for s in (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_closed_form_matches_fourier_route(self):
        field = CounterexampleField(2, signs=(1.0, -1.0))
        x = np.linspace(-2.5, 7.5, 200, endpoint=False)
        spacing = x[1] - x[0]
        z = np.stack(np.meshgrid(x, x - 2.5, x - 2.5, indexing="ij"), axis=-1)
        samples = field.value(0.0, z)
        for s in (0.0, 0.5, 1.0):
            assert flat_sobolev_norm(samples, s, spacing=spacing) == (
                pytest.approx(field.sobolev_norm(s), rel=1e-6))

    def test_single_row_norm_by_hand(self):
        # k = 1, N = 2: two unit Gaussians a distance 2 apart give
        # ||u||^2 = (2 + 2 e^{-N^2}) pi^(3/2) N^(-3) by direct integration
        field = CounterexampleField(1, signs=(1.0,))
        expected = math.sqrt((2 + 2 * math.exp(-4.0)) * math.pi**1.5 / 8.0)
        assert field.sobolev_norm(0.0) == pytest.approx(expected, rel=1e-12)

    def test_packet_row_scaling_law(self):
        k_power, n_power = sobolev_scaling_fit()
        assert abs(k_power - 0.5) < 0.075
        assert abs(n_power + 1.0) < 0.15

    def test_rejects_coarse_sampling(self):
        # a width-0.3 Gaussian sampled at unit spacing leaves most of its
        # spectrum against the Nyquist shell
        spacing, z = cube_grid(8.0, 16)
        u = np.exp(-np.sum(z * z, -1) / 0.18)
        with pytest.raises(NumericalError, match="Nyquist"):
            flat_sobolev_norm(u, 0.0, spacing=spacing)

    def test_rejects_boundary_mass(self):
        spacing, z = cube_grid(4.0, 64)
        u = np.exp(-np.sum(z * z, -1) / 50.0)
        with pytest.raises(NumericalError, match="boundary"):
            flat_sobolev_norm(u, 0.0, spacing=spacing)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            flat_sobolev_norm(np.zeros((8, 8, 8)), 0.0)
        with pytest.raises(ValueError):
            flat_sobolev_norm(np.zeros((8, 8, 4)), 0.0, spacing=0.1)
        assert flat_sobolev_norm(np.zeros((8, 8, 8)), 1.0, spacing=0.1) == 0.0


# Dense tensor-product evaluation of the window t in [1/4, 1/2] for
# k = 2, signs (+1, +1): cylindrical grid at spacing 0.01 with the same
# eight Gauss-Legendre time nodes used by the stratified estimator.
DENSE_WINDOW_VALUE = 0.35620818783324715


class TestMixedGradientIntegral:
    def test_against_dense_window_oracle(self):
        field = CounterexampleField(2, signs=(1.0, 1.0))
        flux = mixed_gradient_integral(field, cells_per_width=12, t_nodes=8)
        index = flux.window_bounds.index((0.25, 0.5))
        assert flux.window_values[index] == pytest.approx(
            DENSE_WINDOW_VALUE, rel=0.015)

    def test_axial_reduction_matches_tensor_grid(self):
        # one time slice evaluated both ways: full 3D tensor grid versus
        # the 2 pi-weighted half-plane rule the estimator relies on
        field = CounterexampleField(2, signs=(1.0, -1.0))
        t = 0.3
        sigma = math.sqrt(1.0 + (16.0 * t) ** 2) / 4.0
        span = 6.0 * sigma

        def slice_integral(z1, rho, weight):
            pts = np.stack([z1, rho, np.zeros_like(z1)], axis=-1)
            grad = field.gradient(t, pts)
            grad2 = np.sum(np.abs(grad) ** 2, -1)
            r = np.maximum(np.hypot(z1, rho), 1e-12)
            radial2 = np.abs(z1 * grad[..., 0] + rho * grad[..., 1]) ** 2 / r**2
            return float(np.sum(np.sqrt(np.maximum(grad2 - radial2, 0.0)
                                        * grad2) / r * weight))

        fine = 0.02
        z1 = np.arange(-span, 4.0 + span, fine)
        rho = np.arange(fine / 2, span, fine)
        zz, rr = np.meshgrid(z1, rho, indexing="ij")
        half_plane = 2 * math.pi * slice_integral(zz, rr, rr * fine * fine)

        coarse = 0.1
        x = np.arange(-span, 4.0 + span, coarse)
        y = np.arange(-span, span, coarse)
        gx, gy, gz = np.meshgrid(x, y, y, indexing="ij")
        tensor = slice_integral(gx, np.hypot(gy, gz), coarse**3)
        assert tensor == pytest.approx(half_plane, rel=0.03)

    def test_jitter_streams_agree(self):
        field = CounterexampleField(3, signs=(1.0, -1.0, 1.0))
        a = mixed_gradient_integral(field, t_nodes=8, seed=0)
        b = mixed_gradient_integral(field, t_nodes=8, seed=123)
        assert b.value == pytest.approx(a.value, rel=5e-3)

    def test_cell_refinement_consistent(self):
        field = CounterexampleField(3, signs=(1.0, -1.0, 1.0))
        coarse = mixed_gradient_integral(field, cells_per_width=12, t_nodes=8)
        fine = mixed_gradient_integral(field, cells_per_width=24, t_nodes=8)
        assert fine.value == pytest.approx(coarse.value, rel=0.01)

    def test_window_structure(self):
        field = CounterexampleField(2, signs=(1.0, 1.0))
        flux = mixed_gradient_integral(field, t_nodes=8)
        assert flux.window_bounds[0] == (0.0, 1.0 / 16.0)
        assert flux.window_bounds[-1] == (0.5, 1.0)
        assert flux.window_bounds[-1][1] == 1.0
        assert sum(flux.window_values) == pytest.approx(flux.value, rel=1e-12)
        assert flux.n_points > 0

    def test_requires_canonical_scale(self):
        field = CounterexampleField(3, signs=(1.0, 1.0, 1.0), n_scale=4.0)
        with pytest.raises(ValueError):
            mixed_gradient_integral(field)

    def test_radial_control_collapses(self):
        # co-centered packets form a radial field with no angular
        # gradient; the estimate must die with it
        flux = mixed_gradient_integral(
            CounterexampleField(3, signs=(1.0, -1.0, 1.0)), t_nodes=8)
        control = colocated_control_integral(3, t_nodes=8)
        assert control.value < 1e-5 * flux.value

    def test_stable_across_sign_draws(self):
        values = []
        for trial in range(4):
            signs = np.random.default_rng([1, trial]).choice([-1.0, 1.0], 3)
            field = CounterexampleField(3, signs=tuple(signs))
            values.append(mixed_gradient_integral(field, t_nodes=8,
                                                  seed=trial).value)
        mean = np.mean(values)
        assert max(abs(v - mean) for v in values) < 0.2 * mean


class TestCounterexampleScaling:
    def test_compact_report(self):
        report = counterexample_scaling(ks=(3, 4), trials=4,
                                        cells_per_width=8, t_nodes=8)
        assert report.ks == (3, 4)
        assert len(report.lhs_trials[0]) == 4
        # the flux exponent outruns the norm exponent even on two points
        assert report.lhs_exponent > report.rhs_exponent + 0.2
        assert 1.0 < report.lhs_exponent < 2.0
        assert 0.6 < report.rhs_exponent < 1.3
        assert report.control_value < 1e-4 * report.control_scale
        lines = report.csv().strip().split("\n")
        assert lines[0] == "k,trial,window_start,window_end,integral"
        assert len(lines) == 1 + 4 * (7 + 9)

    def test_validates_inputs(self):
        with pytest.raises(ValueError):
            counterexample_scaling(ks=(2, 3), trials=4)
        with pytest.raises(ValueError):
            counterexample_scaling(ks=(4,), trials=4)
        with pytest.raises(ValueError):
            counterexample_scaling(ks=(3, 4), trials=3)
