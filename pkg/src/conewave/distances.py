"""Distance function, its conic approximation, and curvature diagnostics.

Pairs of points live in a common great-circle chart (r, theta). The
exact distance comes from a shooting solver for the geodesic boundary
value problem, warm-started from the unrolled-cone chord. Second
derivatives of the distance along geodesic endpoint motions are
evaluated two independent ways: finite differences of the BVP solver
and the Jacobi-field second variation, which catch each other's sign
and curvature mistakes.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NumericalError
from .geometry import ManifoldSpec
from .geodesics import GeodesicResult, PhasePoint, integrate_geodesic


@dataclass(frozen=True)
class PointPair:
    """Two points of the reduced chart; theta separation is at most pi."""

    r1: float
    theta1: float
    r2: float
    theta2: float

    def __post_init__(self):
        if self.r1 <= 0.0 or self.r2 <= 0.0:
            raise ValueError("pair radii must be positive")
        if not 0.0 <= self.separation <= math.pi:
            raise ValueError("angular separation must lie in [0, pi]")

    @property
    def separation(self) -> float:
        return abs(self.theta2 - self.theta1)

    def swapped(self) -> "PointPair":
        return PointPair(self.r2, self.theta2, self.r1, self.theta1)


def conic_distance(alpha: float, r1: float, r2: float, d_boundary: float) -> float:
    """Exact distance on the cone of slope alpha.

    d_boundary is the boundary distance alpha * Theta; beyond pi the
    minimizing path goes through the tip, giving r1 + r2.
    """
    if d_boundary < 0.0 or d_boundary > math.pi * alpha + 1e-12:
        raise ValueError("boundary separation outside [0, pi * alpha]")
    if d_boundary >= math.pi:
        return r1 + r2
    d2 = r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * math.cos(d_boundary)
    return math.sqrt(max(d2, 0.0))


@dataclass
class BvpDistance:
    """Connecting geodesic found by shooting; unpacks as (length, path)."""

    length: float
    path: GeodesicResult
    launch: PhasePoint
    conjugate_point: bool
    sector_ok: bool  # True when the Omega containment check applies and holds
    jacobi: object = None  # cached fundamental-solution transport

    def __iter__(self):
        return iter((self.length, self.path))


def _shoot(spec, r_start, gamma, T, tol, samples_at=None):
    phi0 = spec.warp(r_start)[0]
    p0 = PhasePoint(r=r_start, theta=0.0, nu=math.cos(gamma),
                    mu=math.sin(gamma) * phi0 / r_start)
    res = integrate_geodesic(spec, p0, s_max=T, tol=tol,
                             R_escape=1e9, samples_at=samples_at)
    return p0, res


def bvp_distance(spec: ManifoldSpec, pair: PointPair, tol: float = 1e-9,
                 eta: float = 0.1) -> BvpDistance:
    """Distance between the pair's points by Newton shooting.

    The initial angle and arc length come from the unrolled-cone chord,
    which is exact on a perfect cone; Newton iterates on (launch angle,
    arc length) with a damped line search. When both points sit in the
    near-diagonal sector regime (r >= r0/2, alpha * Theta <= 2 * eta)
    the returned path is additionally checked to stay inside the
    enlarged truncated sector (5 * eta, r0 / 2).
    """
    r1, r2, theta = pair.r1, pair.r2, pair.separation
    if theta == 0.0 and r1 == r2:
        point = PhasePoint(r1, 0.0, 1.0, 0.0)
        path = GeodesicResult(
            s=np.array([0.0]), r=np.array([r1]), theta=np.array([0.0]),
            nu=np.array([1.0]), mu=np.array([0.0]),
            energy=np.array([0.5]), energy_drift=0.0, escaped=False,
            turning_radius=r1)
        return BvpDistance(0.0, path, point, False, True)

    alpha = spec.alpha
    delta = alpha * theta
    d0 = conic_distance(alpha, r1, r2, min(delta, math.pi * alpha))
    # chord covector in the unrolled plane: radial and tangential unit
    # components of the straight segment from (r1, 0) to (r2, delta)
    nu0 = (r2 * math.cos(delta) - r1) / d0
    gamma = math.atan2(r2 * math.sin(delta) / d0, nu0)
    T = d0

    itol = max(1e-12, tol * 1e-2)
    scale = max(r1, r2, 1.0)
    target_norm = max(1e-12 * scale, tol * 0.1)
    phi2 = spec.warp(r2)[0]

    def residual(g, t):
        _, res = _shoot(spec, r1, g, t, itol)
        dr = float(res.r[-1]) - r2
        dth = phi2 * (float(res.theta[-1]) - theta)
        return np.array([dr, dth]), res

    f, res = residual(gamma, T)
    best = (np.linalg.norm(f), gamma, T, res)
    for _ in range(40):
        norm_f = np.linalg.norm(f)
        if norm_f < target_norm:
            break
        # Jacobian: angle column by finite difference, length column from
        # the flow derivative (dr/ds, dtheta/ds) at the endpoint.
        dg = 1e-7
        f_g, _ = residual(gamma + dg, T)
        col_g = (f_g - f) / dg
        r_end = float(res.r[-1])
        phi_end = spec.warp(r_end)[0]
        L = res.mu[0] * r1
        col_t = np.array([float(res.nu[-1]), phi2 * L / phi_end ** 2])
        J = np.column_stack([col_g, col_t])
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            raise NumericalError("singular shooting Jacobian; pair out of regime")
        damp = 1.0
        for _ in range(10):
            g_new = gamma + damp * step[0]
            t_new = max(T + damp * step[1], 1e-8)
            f_new, res_new = residual(g_new, t_new)
            if np.linalg.norm(f_new) < norm_f:
                gamma, T, f, res = g_new, t_new, f_new, res_new
                break
            damp *= 0.5
        else:
            raise NumericalError(
                "shooting line search stalled; pair out of regime")
        if np.linalg.norm(f) < best[0]:
            best = (np.linalg.norm(f), gamma, T, res)
    else:
        raise NumericalError("shooting failed to converge; pair out of regime")

    launch, path = _shoot(spec, r1, gamma, T, itol,
                          samples_at=np.linspace(0.0, T, 65))
    sol = _jacobi_pass(spec, launch, T)
    conjugate = _conjugate_flag(sol, T)
    sector_ok = True
    in_regime = (min(r1, r2) >= spec.r0 / 2.0 and delta <= 2.0 * eta)
    if in_regime:
        mid = theta / 2.0
        sector_ok = bool(
            np.all(path.r >= spec.r0 / 2.0 - 1e-9)
            and np.all(alpha * np.abs(path.theta - mid) <= 5.0 * eta + 1e-9))
    return BvpDistance(float(T), path, launch, conjugate, sector_ok, sol)


def _jacobi_rhs(spec, L):
    def rhs(s, y):
        r, ya, pa, yb, pb, za, qa, zb, qb = y[0], *y[3:]
        phi, dphi, d2phi = spec.warp(r)
        k_in = -d2phi / phi
        w2 = (L / phi) ** 2
        nu2 = y[2] ** 2
        k_out = nu2 * k_in + w2 * (1.0 - dphi ** 2) / phi ** 2
        return (y[2], L / phi ** 2, L * L * dphi / phi ** 3,
                pa, -k_in * ya, pb, -k_in * yb,
                qa, -k_out * za, qb, -k_out * zb)
    return rhs


def _jacobi_pass(spec, launch: PhasePoint, T: float):
    """Fundamental Jacobi solutions along the converged geodesic.

    Returns endpoint data for the in-plane and out-of-plane normal
    components plus the conjugate-point flag (the zero-boundary
    fundamental solution vanishing again on (0, T]).
    """
    L = launch.mu * launch.r
    y0 = (launch.r, launch.theta, launch.nu,
          1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0)
    sol = solve_ivp(_jacobi_rhs(spec, L), (0.0, T), y0, method="RK45",
                    rtol=1e-11, atol=1e-13, t_eval=np.linspace(0.0, T, 129))
    if sol.status != 0:  # pragma: no cover
        raise NumericalError("Jacobi transport failed")
    return sol


def _conjugate_flag(sol, T) -> bool:
    yb = sol.y[5]
    zb = sol.y[9]
    span = max(T, 1e-8)
    for fund in (yb, zb):
        interior = fund[sol.t > 1e-6 * span]
        if np.any(interior <= 1e-10 * span):
            return True
    return False


def _frame_speeds(spec, launch, sol):
    """(nu, w) of the unit tangent at both ends of the connecting path."""
    L = launch.mu * launch.r
    r_end = float(sol.y[0][-1])
    phi_end = spec.warp(r_end)[0]
    nu0, w0 = launch.nu, L / spec.warp(launch.r)[0]
    nu1, w1 = float(sol.y[2][-1]), L / phi_end
    return (nu0, w0), (nu1, w1)


def _second_variation(spec, bvp: BvpDistance, v1, v2) -> float:
    """Sum of [j' j] boundary terms over the two normal components."""
    T = bvp.length
    sol = bvp.jacobi if bvp.jacobi is not None else _jacobi_pass(spec, bvp.launch, T)
    (nu0, w0), (nu1, w1) = _frame_speeds(spec, bvp.launch, sol)
    value = 0.0
    for (a_proj, b_proj, ia, ib) in (
            (-v1[0] * w0 + v1[1] * nu0, -v2[0] * w1 + v2[1] * nu1, 3, 5),
            (v1[2], v2[2], 7, 9)):
        ya_T = float(sol.y[ia][-1])
        pa_T = float(sol.y[ia + 1][-1])
        yb_T = float(sol.y[ib][-1])
        pb_T = float(sol.y[ib + 1][-1])
        if abs(yb_T) < 1e-10 * max(T, 1.0):
            raise NumericalError("conjugate point: Jacobi BVP is singular")
        c2 = (b_proj - a_proj * ya_T) / yb_T
        j_prime_T = a_proj * pa_T + c2 * pb_T
        value += j_prime_T * b_proj - c2 * a_proj
    return value


def _displaced_endpoint(spec, r, omega, tangent_plane, v, t, tol):
    """Endpoint of its own geodesic after variation time t.

    omega is the endpoint direction on the unit sphere; tangent_plane
    the pair of unit sphere-tangents (in-plane, out-of-plane) fixing the
    frame in which v = (radial, in-plane angular, out-of-plane angular).
    """
    vr, va, vo = v
    w = math.hypot(va, vo)
    if t == 0.0 or (vr == 0.0 and w == 0.0):
        return r, omega
    if w == 0.0:
        return r + t * vr, omega
    u = (va * tangent_plane[0] + vo * tangent_plane[1]) / w
    phi = spec.warp(r)[0]
    # negative variation time: run the reversed launch forward; the
    # negated angular momentum already flips the sign of beta
    if t < 0.0:
        vr, mu, t = -vr, -w * phi / r, -t
    else:
        mu = w * phi / r
    res = integrate_geodesic(spec, PhasePoint(r=r, theta=0.0, nu=vr, mu=mu),
                             s_max=t, tol=tol, R_escape=1e9,
                             samples_at=np.array([t]))
    r_t = float(res.r[-1])
    beta = float(res.theta[-1])
    omega_t = math.cos(beta) * omega + math.sin(beta) * u
    return r_t, omega_t / np.linalg.norm(omega_t)


def _fd_hessian(spec, pair, v1, v2, tol, step_scale, refine=True):
    d0 = bvp_distance(spec, pair, tol=tol).length
    h0 = step_scale * min(pair.r1, pair.r2, max(d0, 1e-6))

    o1 = np.array([math.cos(pair.theta1), math.sin(pair.theta1), 0.0])
    o2 = np.array([math.cos(pair.theta2), math.sin(pair.theta2), 0.0])
    t1 = (np.array([-o1[1], o1[0], 0.0]), np.array([0.0, 0.0, 1.0]))
    t2 = (np.array([-o2[1], o2[0], 0.0]), np.array([0.0, 0.0, 1.0]))
    itol = max(1e-12, tol * 1e-2)

    def dist_at(t):
        if t == 0.0:
            return d0
        ra, oa = _displaced_endpoint(spec, pair.r1, o1, t1, v1, t, itol)
        rb, ob = _displaced_endpoint(spec, pair.r2, o2, t2, v2, t, itol)
        sep = math.acos(min(1.0, max(-1.0, float(oa @ ob))))
        return bvp_distance(spec, PointPair(ra, 0.0, rb, sep), tol=tol).length

    def stencil(h):
        d = [dist_at(k * h) for k in (-2, -1, 0, 1, 2)]
        return (-d[0] + 16.0 * d[1] - 30.0 * d[2] + 16.0 * d[3] - d[4]) / (12.0 * h * h)

    if not refine:
        return stencil(h0)
    coarse = stencil(h0)
    fine = stencil(h0 / 2.0)
    return (16.0 * fine - coarse) / 15.0


def distance_hessian(spec: ManifoldSpec, pair: PointPair, v1, v2,
                     method: str = "jacobi", tol: float = 1e-10,
                     step_scale: float = 1e-3, refine: bool = True) -> float:
    """d^2/dt^2 of the distance when the endpoints ride geodesics.

    v1, v2 are (radial, in-plane angular, out-of-plane angular) speeds
    in unit orthonormal frames at the two points, with the in-plane
    angular direction pointing from theta1 toward theta2 at both ends.
    "jacobi" evaluates the second variation along the connecting
    geodesic; "fd" drives the BVP solver through fourth-order
    differences (Richardson-extrapolated unless refine=False). The two
    routes agree to O(step^2) and are cross-checked in the test suite.
    """
    if pair.r1 == pair.r2 and pair.separation == 0.0:
        raise ValueError("distance Hessian needs distinct points")
    if method == "fd":
        return _fd_hessian(spec, pair, v1, v2, tol, step_scale, refine)
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")
    bvp = bvp_distance(spec, pair, tol=tol)
    return _second_variation(spec, bvp, tuple(v1), tuple(v2))


@dataclass
class DecayTable:
    """Distance error e = d_M - d_cone sampled along a dyadic ray."""

    radii: np.ndarray
    errors: np.ndarray
    sup_error: float
    first_differences: np.ndarray
    difference_ratios: np.ndarray

    def csv(self) -> str:
        lines = ["r,error"]
        for r, e in zip(self.radii, self.errors):
            lines.append(f"{r:.17g},{e:.17g}")
        return "\n".join(lines) + "\n"


def distance_error_decay(spec: ManifoldSpec, radii, theta: float = 0.3,
                         tol: float = 1e-10) -> DecayTable:
    """Tabulate d_M - d_cone at r' = r'' = r for fixed Theta.

    first_differences holds |e(r_{i+1}) - e(r_i)|; on a dyadic ladder a
    1/r error profile halves each step, so the consecutive ratios sit
    near 0.5.
    """
    radii = np.asarray(radii, dtype=float)
    errors = np.empty_like(radii)
    for i, r in enumerate(radii):
        d_exact = bvp_distance(spec, PointPair(r, 0.0, r, theta), tol=tol).length
        d_cone = conic_distance(spec.alpha, r, r, spec.alpha * theta)
        errors[i] = d_exact - d_cone
    diffs = np.abs(np.diff(errors))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(diffs[:-1] > 0.0, diffs[1:] / diffs[:-1], np.nan)
    return DecayTable(radii=radii, errors=errors,
                      sup_error=float(np.max(np.abs(errors))),
                      first_differences=diffs, difference_ratios=ratios)


@dataclass
class AngularBoundReport:
    """Fit of the constant in the Hessian angular lower bound."""

    c_star: float
    c_fit: float
    n_evaluated: int
    n_excluded: int
    n_violations_at_fit: int
    worst_margin: float

    def csv(self) -> str:
        return ("c_star,c_fit,n_evaluated,n_excluded,n_violations_at_fit\n"
                f"{self.c_star:.17g},{self.c_fit:.17g},{self.n_evaluated},"
                f"{self.n_excluded},{self.n_violations_at_fit}\n")


def check_ang_lower_bound(spec: ManifoldSpec, n_samples: int = 1000,
                          C_fit: float = None, seed: int = 0,
                          eta: float = 0.1, tol: float = 1e-9) -> AngularBoundReport:
    """Sample the Hessian lower bound with angular-decay weights.

    Each sample draws a near-diagonal far pair and random endpoint
    velocities, evaluates the Jacobi-route Hessian and the bracket
    B = |v'_ang|^2/r' + |v''_ang|^2/r'' + |v'|^2/r'^2 + |v''|^2/r''^2,
    and records the smallest C with hess >= -C * B. Pairs closer than
    the diagonal cutoff are excluded and counted.
    """
    rng = np.random.default_rng(seed)
    alpha = spec.alpha
    cutoff = 0.2 * eta * spec.r0
    c_needed = []
    n_excluded = 0
    n_viol = 0
    worst = math.inf
    while len(c_needed) + n_excluded < n_samples:
        r1 = rng.uniform(spec.r0, 3.0 * spec.r0)
        r2 = rng.uniform(spec.r0, 3.0 * spec.r0)
        theta = rng.uniform(0.0, eta / alpha)
        d_cone = conic_distance(alpha, r1, r2, alpha * theta)
        if d_cone < cutoff:
            n_excluded += 1
            continue
        v1 = rng.normal(0.0, 1.0, 3) / math.sqrt(3.0)
        v2 = rng.normal(0.0, 1.0, 3) / math.sqrt(3.0)
        pair = PointPair(r1, 0.0, r2, theta)
        hess = distance_hessian(spec, pair, v1, v2, method="jacobi", tol=tol)
        bracket = ((v1[1] ** 2 + v1[2] ** 2) / r1 + (v2[1] ** 2 + v2[2] ** 2) / r2
                   + float(v1 @ v1) / r1 ** 2 + float(v2 @ v2) / r2 ** 2)
        c_needed.append(max(0.0, -hess / bracket))
        if C_fit is not None:
            margin = hess + C_fit * bracket
            worst = min(worst, margin)
            if margin < 0.0:
                n_viol += 1
    c_star = float(max(c_needed)) if c_needed else 0.0
    return AngularBoundReport(
        c_star=c_star, c_fit=C_fit if C_fit is not None else c_star,
        n_evaluated=len(c_needed), n_excluded=n_excluded,
        n_violations_at_fit=n_viol,
        worst_margin=worst if worst < math.inf else 0.0)


@dataclass(frozen=True)
class IsotropicGaussian:
    """amplitude * exp(-a |z - center|^2) on R^3."""

    amplitude: float = 1.0
    a: float = 0.5
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError("Gaussian exponent a must be positive")


@dataclass
class PairingResult:
    value: float
    reference: float  # 8 pi * overlap integral, the Dirac-mass prediction
    quadrature_error: float


def flat_bilaplacian_pairing(psi1: IsotropicGaussian, psi2: IsotropicGaussian,
                             n_radial: int = 160, n_angular: int = 80) -> PairingResult:
    """Pairing of |z' - z''| against -H^2(psi1 (x) psi2), H = -Laplacian/2.

    One integration by parts moves a single H onto the distance, whose
    Laplacian in each variable is 2/|w| with w = z' - z''; the remaining
    factor is a cross-correlation of Gaussians with closed form

        (C1 + C2)(w) = A1 A2 (pi/S)^{3/2} e^{-k |b|^2} (8 k^2 |b|^2 - 12 k)

    where S = a1 + a2, k = a1 a2 / S, b = w - (c1 - c2). The remaining
    3D integral of (C1 + C2)/|w| is axisymmetric and evaluated by
    Gauss-Legendre in (radius, cosine); the 1/|w| singularity cancels
    against the volume element. The Dirac-mass prediction is
    8 pi * overlap; both are returned.
    """
    a1, a2 = psi1.a, psi2.a
    S = a1 + a2
    kap = a1 * a2 / S
    dc = np.asarray(psi1.center, dtype=float) - np.asarray(psi2.center, dtype=float)
    sep = float(np.linalg.norm(dc))
    pref = psi1.amplitude * psi2.amplitude * (math.pi / S) ** 1.5

    def quad(n_r, n_c):
        x_r, w_r = np.polynomial.legendre.leggauss(n_r)
        x_c, w_c = np.polynomial.legendre.leggauss(n_c)
        r_max = sep + 12.0 / math.sqrt(kap)
        rho = 0.5 * r_max * (x_r + 1.0)
        wr = 0.5 * r_max * w_r
        # |w - dc|^2 on the (rho, cos) grid; the axis is along dc
        b2 = (rho[:, None] ** 2 - 2.0 * rho[:, None] * sep * x_c[None, :]
              + sep * sep)
        corr = pref * np.exp(-kap * b2) * (8.0 * kap ** 2 * b2 - 12.0 * kap)
        inner = corr @ w_c
        return -2.0 * math.pi * float((rho * inner) @ wr)

    value = quad(n_radial, n_angular)
    check = quad(max(n_radial // 2, 8), max(n_angular // 2, 8))
    overlap = pref * math.exp(-kap * sep * sep)
    return PairingResult(value=value, reference=8.0 * math.pi * overlap,
                         quadrature_error=abs(value - check))
