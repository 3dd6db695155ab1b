"""Distance solver, Hessian routes, angular bound, Gaussian pairing."""

import math

import numpy as np
import pytest

from conewave.distances import (
    IsotropicGaussian,
    PointPair,
    bvp_distance,
    check_ang_lower_bound,
    conic_distance,
    distance_error_decay,
    distance_hessian,
    flat_bilaplacian_pairing,
)
from conewave.geometry import cone_spec, flat_spec, perturbed_spec


def flat_pair_hessian(z1, z2, v1, v2):
    """Independent oracle: second derivative of |z1 + t v1 - z2 - t v2|.

    Hess = (|dv|^2 - (dv . u)^2) / d with u the unit separation; this is
    the closed form the curved-space routes must reproduce when the
    metric is Euclidean.
    """
    u = np.asarray(z1, float) - np.asarray(z2, float)
    d = np.linalg.norm(u)
    dv = np.asarray(v1, float) - np.asarray(v2, float)
    proj = dv @ u / d
    return (dv @ dv - proj ** 2) / d


def embed(r, theta):
    return np.array([r * math.cos(theta), r * math.sin(theta), 0.0])


def frame_to_cartesian(r, theta, v):
    """(radial, in-plane angular, out-of-plane) -> R^3 components."""
    vr, va, vo = v
    rhat = np.array([math.cos(theta), math.sin(theta), 0.0])
    that = np.array([-math.sin(theta), math.cos(theta), 0.0])
    return vr * rhat + va * that + vo * np.array([0.0, 0.0, 1.0])


class TestConic:
    def test_identical_points(self):
        assert conic_distance(1.0, 3.0, 3.0, 0.0) == 0.0

    def test_law_of_cosines(self):
        assert conic_distance(1.0, 1.0, 2.0, math.pi / 3) == pytest.approx(
            math.sqrt(3.0), rel=1e-15)

    def test_chord_identity(self):
        for theta in np.linspace(0.1, 3.0, 12):
            assert conic_distance(1.0, 1.0, 1.0, theta) == pytest.approx(
                2.0 * math.sin(theta / 2.0), rel=1e-13)

    def test_through_tip_beyond_pi(self):
        assert conic_distance(1.0, 2.0, 3.0, math.pi) == 5.0

    def test_alpha_one_is_euclidean(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            r1, r2 = rng.uniform(0.5, 10.0, 2)
            th = rng.uniform(0.0, math.pi)
            got = conic_distance(1.0, r1, r2, th)
            want = np.linalg.norm(embed(r1, 0.0) - embed(r2, th))
            assert got == pytest.approx(want, rel=1e-13, abs=1e-13)

    def test_domain(self):
        with pytest.raises(ValueError):
            conic_distance(0.8, 1.0, 1.0, 0.9 * math.pi)


class TestBvp:
    def test_flat_three_four_five(self):
        pair = PointPair(3.0, 0.0, 4.0, math.pi / 2)
        d, path = bvp_distance(flat_spec(), pair, tol=1e-10)
        assert d == pytest.approx(5.0, abs=1e-9)
        assert np.all(np.diff(path.s) > 0)

    def test_flat_random_chords(self):
        rng = np.random.default_rng(11)
        spec = flat_spec()
        for _ in range(10):
            r1, r2 = rng.uniform(1.0, 8.0, 2)
            th = rng.uniform(0.05, 2.0)
            d = bvp_distance(spec, PointPair(r1, 0.0, r2, th), tol=1e-10).length
            want = np.linalg.norm(embed(r1, 0.0) - embed(r2, th))
            assert d == pytest.approx(want, abs=1e-8)

    def test_cone_matches_closed_form(self):
        spec = cone_spec(0.8)
        pair = PointPair(5.0, 0.0, 7.0, 0.15)
        d = bvp_distance(spec, pair, tol=1e-10).length
        assert d == pytest.approx(conic_distance(0.8, 5.0, 7.0, 0.8 * 0.15),
                                  abs=1e-9)

    def test_symmetry(self):
        spec = perturbed_spec(1.0)
        pair = PointPair(12.0, 0.0, 17.0, 0.08)
        d1 = bvp_distance(spec, pair, tol=1e-10).length
        d2 = bvp_distance(spec, pair.swapped(), tol=1e-10).length
        assert d1 == pytest.approx(d2, abs=1e-9)

    def test_perturbed_error_bounded(self):
        spec = perturbed_spec(1.0)
        d = bvp_distance(spec, PointPair(40.0, 0.0, 40.0, 0.2), tol=1e-10).length
        d_cone = conic_distance(1.0, 40.0, 40.0, 0.2)
        assert 0.0 < abs(d - d_cone) < 1.0

    def test_triangle_inequality(self):
        spec = perturbed_spec(1.0)
        rng = np.random.default_rng(5)
        for _ in range(6):
            r = rng.uniform(10.0, 25.0, 3)
            th = np.sort(rng.uniform(0.0, 0.12, 3))
            dab = bvp_distance(spec, PointPair(r[0], th[0], r[1], th[1])).length
            dbc = bvp_distance(spec, PointPair(r[1], th[1], r[2], th[2])).length
            dac = bvp_distance(spec, PointPair(r[0], th[0], r[2], th[2])).length
            assert dac <= dab + dbc + 1e-8

    def test_radial_pair(self):
        d = bvp_distance(perturbed_spec(1.0), PointPair(10.0, 0.3, 25.0, 0.3)).length
        assert d == pytest.approx(15.0, abs=1e-8)

    def test_coincident_points(self):
        d, _ = bvp_distance(flat_spec(), PointPair(4.0, 0.2, 4.0, 0.2))
        assert d == 0.0

    def test_sector_containment(self):
        # Near-diagonal far pairs: the minimizer stays in the enlarged
        # truncated sector.
        spec = perturbed_spec(1.0)
        rng = np.random.default_rng(23)
        for _ in range(100):
            r1, r2 = rng.uniform(spec.r0, 2.0 * spec.r0, 2)
            th = rng.uniform(0.0, 0.1)
            res = bvp_distance(spec, PointPair(r1, 0.0, r2, th), tol=1e-9)
            assert res.sector_ok
            assert not res.conjugate_point


class TestDecay:
    def test_cone_error_zero(self):
        table = distance_error_decay(cone_spec(0.8), [10.0, 20.0, 40.0],
                                     theta=0.3)
        assert table.sup_error < 1e-8

    def test_flat_error_zero(self):
        table = distance_error_decay(flat_spec(), [10.0, 20.0], theta=0.3)
        assert table.sup_error < 1e-8

    def test_perturbed_differences_decay(self):
        table = distance_error_decay(perturbed_spec(1.0),
                                     [20.0, 40.0, 80.0, 160.0], theta=0.3)
        assert np.all(np.isfinite(table.errors))
        assert table.sup_error < 2.0
        # 1/r decay of first differences within a factor of two
        assert np.all(table.difference_ratios > 0.2)
        assert np.all(table.difference_ratios < 1.1)


class TestHessian:
    def test_one_particle_value(self):
        # colinear points one unit apart, out-of-plane unit velocity on
        # the far endpoint: Hessian equals 1 exactly in flat space
        got = distance_hessian(flat_spec(), PointPair(2.0, 0.0, 1.0, 0.0),
                               (0.0, 0.0, 1.0), (0.0, 0.0, 0.0))
        assert got == pytest.approx(1.0, abs=1e-8)

    def test_flat_oracle_jacobi(self):
        rng = np.random.default_rng(7)
        spec = flat_spec()
        for _ in range(12):
            r1, r2 = rng.uniform(1.5, 6.0, 2)
            th = rng.uniform(0.3, 1.8)
            v1 = tuple(rng.normal(0.0, 1.0, 3))
            v2 = tuple(rng.normal(0.0, 1.0, 3))
            got = distance_hessian(spec, PointPair(r1, 0.0, r2, th), v1, v2)
            want = flat_pair_hessian(embed(r1, 0.0), embed(r2, th),
                                     frame_to_cartesian(r1, 0.0, v1),
                                     frame_to_cartesian(r2, th, v2))
            assert got == pytest.approx(want, abs=1e-7)

    def test_flat_psd(self):
        rng = np.random.default_rng(9)
        spec = flat_spec()
        for _ in range(8):
            r1, r2 = rng.uniform(2.0, 7.0, 2)
            th = rng.uniform(0.4, 1.5)
            v1 = tuple(rng.normal(0.0, 1.0, 3))
            v2 = tuple(rng.normal(0.0, 1.0, 3))
            got = distance_hessian(spec, PointPair(r1, 0.0, r2, th), v1, v2)
            assert got >= -1e-8

    def test_symmetry_under_swap(self):
        # swapping endpoints reverses the in-plane angular axis, so the
        # same physical perturbations need their angular components negated
        spec = perturbed_spec(1.0)
        pair = PointPair(11.0, 0.0, 14.0, 0.07)
        v1, v2 = (0.3, -0.5, 0.2), (-0.1, 0.4, 0.6)
        flip = lambda v: (v[0], -v[1], v[2])
        a = distance_hessian(spec, pair, v1, v2)
        b = distance_hessian(spec, pair.swapped(), flip(v2), flip(v1))
        assert a == pytest.approx(b, rel=1e-6, abs=1e-8)

    def test_cone_radial_plane_matches_flat(self):
        # radial/in-plane motion on a cone unrolls to a flat sector
        spec = cone_spec(0.8)
        r1, r2, th = 6.0, 8.0, 0.2
        v1, v2 = (0.7, 0.2, 0.0), (-0.3, 0.5, 0.0)
        got = distance_hessian(spec, PointPair(r1, 0.0, r2, th), v1, v2)
        beta = 0.8 * th  # unrolled angle
        want = flat_pair_hessian(embed(r1, 0.0), embed(r2, beta),
                                 frame_to_cartesian(r1, 0.0, v1),
                                 frame_to_cartesian(r2, beta, v2))
        assert got == pytest.approx(want, abs=1e-7)

    def test_fd_matches_jacobi(self):
        spec = perturbed_spec(1.0)
        pair = PointPair(9.0, 0.0, 12.0, 0.25)
        v1, v2 = (0.4, 0.7, -0.2), (0.1, -0.3, 0.5)
        jac = distance_hessian(spec, pair, v1, v2, method="jacobi")
        fd = distance_hessian(spec, pair, v1, v2, method="fd", tol=1e-11)
        assert fd == pytest.approx(jac, abs=2e-4)

    def test_fd_refinement_toward_jacobi(self):
        # with refinement steps where truncation dominates, halving the
        # step shrinks the disagreement at least quadratically
        spec = perturbed_spec(1.0)
        pair = PointPair(8.0, 0.0, 10.0, 0.3)
        v1, v2 = (0.5, 0.6, 0.0), (-0.2, 0.4, 0.3)
        jac = distance_hessian(spec, pair, v1, v2, method="jacobi")
        errs = []
        for scale in (0.08, 0.04):
            fd = distance_hessian(spec, pair, v1, v2, method="fd",
                                  tol=1e-11, step_scale=scale, refine=False)
            errs.append(abs(fd - jac))
        assert errs[1] <= errs[0] / 3.0 + 1e-7

    def test_identical_points_rejected(self):
        with pytest.raises(ValueError):
            distance_hessian(flat_spec(), PointPair(2.0, 0.1, 2.0, 0.1),
                             (1, 0, 0), (0, 1, 0))


class TestAngularBound:
    def test_flat_needs_no_constant(self):
        rep = check_ang_lower_bound(flat_spec(), n_samples=40, seed=1)
        assert rep.c_star <= 1e-6
        assert rep.n_evaluated + rep.n_excluded == 40

    def test_perturbed_constant_exists_and_holds(self):
        spec = perturbed_spec(1.0)
        fit = check_ang_lower_bound(spec, n_samples=60, seed=2)
        assert math.isfinite(fit.c_star)
        verify = check_ang_lower_bound(spec, n_samples=60, seed=3,
                                       C_fit=1.5 * fit.c_star + 1e-9)
        assert verify.n_violations_at_fit == 0


class TestBilaplacian:
    def test_unit_gaussians(self):
        res = flat_bilaplacian_pairing(IsotropicGaussian(), IsotropicGaussian())
        # Dirac-mass prediction: 8 pi * integral of exp(-|z|^2)
        assert res.reference == pytest.approx(8.0 * math.pi * math.pi ** 1.5,
                                              rel=1e-13)
        assert res.value == pytest.approx(res.reference, rel=1e-9)
        assert res.quadrature_error < 1e-6

    def test_far_translation_vanishes(self):
        near = flat_bilaplacian_pairing(IsotropicGaussian(), IsotropicGaussian())
        far = flat_bilaplacian_pairing(
            IsotropicGaussian(),
            IsotropicGaussian(center=(12.0, 0.0, 0.0)))
        assert abs(far.value) < 1e-10 * abs(near.value)

    def test_scaling_law(self):
        # psi(lam z) has a -> lam^2 a; the delta pairing scales as lam^-3
        base = flat_bilaplacian_pairing(IsotropicGaussian(), IsotropicGaussian())
        for lam in (0.5, 2.0):
            scaled = flat_bilaplacian_pairing(
                IsotropicGaussian(a=0.5 * lam ** 2),
                IsotropicGaussian(a=0.5 * lam ** 2))
            assert scaled.value == pytest.approx(scaled.reference, rel=1e-9)
            assert scaled.value == pytest.approx(base.value * lam ** -3,
                                                 rel=1e-9)

    def test_offset_pair_matches_overlap(self):
        res = flat_bilaplacian_pairing(
            IsotropicGaussian(amplitude=1.3, a=0.7),
            IsotropicGaussian(amplitude=0.9, a=0.4, center=(1.0, 0.5, -0.3)))
        assert res.value == pytest.approx(res.reference, rel=1e-8)

    def test_bad_width(self):
        with pytest.raises(ValueError):
            IsotropicGaussian(a=0.0)
