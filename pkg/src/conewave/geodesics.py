"""Geodesic flow on the warped-product plane and trapping classification.

Rotational symmetry reduces the flow to (r, theta) with conserved
angular momentum L = mu * r, leaving three ODEs

    dr/ds = nu,   dtheta/ds = L / phi^2,   dnu/ds = L^2 phi' / phi^3.

The polar chart degenerates at r = 0; trajectories that dive below half
the cap radius are continued through the cap as straight Euclidean
chords, which is exact whenever the cap profile is flat there.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import CoordinateSingularityError, NumericalError
from .geometry import ManifoldSpec

# Fraction of the cap-flatness budget a chord chart is allowed to use.
FLAT_CAP_TOL = 1e-8


@dataclass(frozen=True)
class PhasePoint:
    """Point of the reduced phase space.

    nu is the radial momentum (dual to dr) and mu the angular momentum
    coordinate normalized so that the canonical pairing is
    nu dr + mu r dtheta; the conserved quantity is L = mu * r.
    """

    r: float
    theta: float
    nu: float
    mu: float


@dataclass
class GeodesicResult:
    """Sampled trajectory with its conservation diagnostics."""

    s: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    energy: np.ndarray
    energy_drift: float
    escaped: bool
    turning_radius: float

    def points(self):
        """The samples as an ordered list of (s, PhasePoint)."""
        return [
            (float(self.s[i]),
             PhasePoint(float(self.r[i]), float(self.theta[i]),
                        float(self.nu[i]), float(self.mu[i])))
            for i in range(len(self.s))
        ]

    def csv(self) -> str:
        lines = ["s,r,theta,nu,mu,energy"]
        for i in range(len(self.s)):
            lines.append(",".join(
                format(float(v), ".17g")
                for v in (self.s[i], self.r[i], self.theta[i],
                          self.nu[i], self.mu[i], self.energy[i])))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.csv())


def hamiltonian_energy(spec: ManifoldSpec, p: PhasePoint) -> float:
    """Kinetic energy (1/2)(nu^2 + (mu r / phi)^2).

    Equals (1/2)(nu^2 + mu^2 / h(x)) on the collar since
    h(1/r) = (phi/r)^2; at the origin the ratio r/phi tends to 1/phi'(0).
    """
    phi, dphi, _ = spec.warp(p.r)
    ratio = p.r / phi if p.r > 0.0 else 1.0 / dphi
    return 0.5 * (p.nu ** 2 + (p.mu * ratio) ** 2)


@lru_cache(maxsize=None)
def _flat_switch_radius(spec: ManifoldSpec):
    """Largest dyadic fraction of r_cap/2 on which the cap is Euclidean.

    Returns None when no such radius exists down to r_cap * 2^-14; the
    chord continuation is then unavailable.
    """
    r_s = spec.r_cap / 2.0
    for _ in range(14):
        rr = np.linspace(r_s / 256.0, r_s, 96)
        phi = spec.warp(rr)[0]
        if np.max(np.abs(phi / rr - 1.0)) < FLAT_CAP_TOL:
            return r_s
        r_s *= 0.5
    return None


def _chord_states(r, theta, nu, L, two_e, s_grid):
    """States along the straight line through the flat cap.

    The entry point (r, theta) with radial speed nu and angular momentum
    L is continued as z(t) = z0 + t v in Cartesian coordinates; s_grid
    holds flow-parameter offsets from the entry. Returns arrays
    (r, dtheta, nu, mu) with dtheta measured from the entry point.
    """
    c, s = math.cos(theta), math.sin(theta)
    z0 = np.array([r * c, r * s])
    vt = L / r
    v = np.array([nu * c - vt * s, nu * s + vt * c])
    zt = z0[None, :] + np.asarray(s_grid)[:, None] * v[None, :]
    rt = np.hypot(zt[:, 0], zt[:, 1])
    dot = zt @ z0
    cross = z0[0] * zt[:, 1] - z0[1] * zt[:, 0]
    dtheta = np.arctan2(cross, dot)
    safe = np.maximum(rt, 1e-300)
    nut = (zt @ v) / safe
    mut = L / safe
    return rt, dtheta, nut, mut


def _chord_exit(r, theta, nu, L, two_e):
    """Crossing data for the full chord: (ds, dtheta, nu_out, perigee)."""
    c, s = math.cos(theta), math.sin(theta)
    z0 = np.array([r * c, r * s])
    vt = L / r
    v = np.array([nu * c - vt * s, nu * s + vt * c])
    b = np.dot(z0, v)  # r * nu, negative on entry
    ds = -2.0 * b / two_e
    perigee = math.sqrt(max(r * r - b * b / two_e, 0.0))
    rt, dtheta, nut, _ = _chord_states(r, theta, nu, L, two_e, np.array([ds]))
    return ds, float(dtheta[0]), float(nut[0]), perigee


def _run_segments(spec, p0, s_max, rtol, L, e0, r_escape, samples_at):
    r_sw = _flat_switch_radius(spec)
    r_event = r_sw if r_sw is not None else spec.r_cap * 1e-6

    # Trial steps may probe past the cap event before it terminates the
    # segment; clamp those evaluations instead of letting warp reject them.
    r_floor = r_event * 1e-3

    def rhs(s, y):
        phi, dphi, _ = spec.warp(y[0] if y[0] > r_floor else r_floor)
        return (y[2], L / phi ** 2, L * L * dphi / phi ** 3)

    def hit_escape(s, y):
        return y[0] - r_escape

    hit_escape.terminal = True
    hit_escape.direction = 1.0

    def hit_cap(s, y):
        return y[0] - r_event

    hit_cap.terminal = True
    hit_cap.direction = -1.0

    ss = [0.0]
    rr = [p0.r]
    th = [p0.theta]
    nn = [p0.nu]
    s0, r, theta, nu = 0.0, p0.r, p0.theta, p0.nu
    escaped = False
    turning = [p0.r]
    two_e = 2.0 * e0

    for _ in range(4096):
        if samples_at is not None:
            inside = samples_at[(samples_at > s0 + 1e-13) & (samples_at < s_max)]
            t_eval = np.unique(np.concatenate([[s0], inside, [s_max]]))
        else:
            t_eval = None
        sol = solve_ivp(rhs, (s0, s_max), (r, theta, nu), method="RK45",
                        rtol=rtol, atol=rtol * 1e-3,
                        events=(hit_escape, hit_cap), t_eval=t_eval)
        if sol.status < 0:  # pragma: no cover - solver failure path
            raise NumericalError(f"geodesic integration failed: {sol.message}")
        keep = sol.t > s0 + 1e-15 if len(sol.t) else np.array([], dtype=bool)
        ss.extend(sol.t[keep])
        rr.extend(sol.y[0][keep])
        th.extend(sol.y[1][keep])
        nn.extend(sol.y[2][keep])

        if sol.status == 0:
            break
        if len(sol.t_events[0]):  # escaped
            se = float(sol.t_events[0][0])
            ye = sol.y_events[0][0]
            ss.append(se)
            rr.append(float(ye[0]))
            th.append(float(ye[1]))
            nn.append(float(ye[2]))
            escaped = True
            break

        # cap crossing
        se = float(sol.t_events[1][0])
        ye = sol.y_events[1][0]
        r, theta, nu = float(ye[0]), float(ye[1]), float(ye[2])
        ss.append(se)
        rr.append(r)
        th.append(theta)
        nn.append(nu)
        if r_sw is None:
            raise CoordinateSingularityError(
                "trajectory entered the polar singularity and the cap "
                "profile is not Euclidean near r = 0")
        ds, dtheta, nu_out, perigee = _chord_exit(r, theta, nu, L, two_e)
        turning.append(perigee)
        if se + ds >= s_max:
            # budget ends inside the cap: sample the partial chord
            t_local = np.array([s_max - se])
            if samples_at is not None:
                inside = samples_at[(samples_at > se) & (samples_at < s_max)] - se
                t_local = np.unique(np.concatenate([inside, t_local]))
            rt, dth, nut, _ = _chord_states(r, theta, nu, L, two_e, t_local)
            ss.extend(se + t_local)
            rr.extend(rt)
            th.extend(theta + dth)
            nn.extend(nut)
            break
        if samples_at is not None:
            inside = samples_at[(samples_at > se) & (samples_at < se + ds)] - se
            if len(inside):
                rt, dth, nut, _ = _chord_states(r, theta, nu, L, two_e, inside)
                ss.extend(se + inside)
                rr.extend(rt)
                th.extend(theta + dth)
                nn.extend(nut)
        s0 = se + ds
        theta = theta + dtheta
        nu = nu_out
        r = float(r_sw)
        ss.append(s0)
        rr.append(r)
        th.append(theta)
        nn.append(nu)
    else:  # pragma: no cover - pathological segment count
        raise NumericalError("geodesic exceeded the segment budget")

    s_arr = np.array(ss)
    r_arr = np.array(rr)
    order = np.argsort(s_arr, kind="stable")
    s_arr = s_arr[order]
    r_arr = r_arr[order]
    th_arr = np.array(th)[order]
    nu_arr = np.array(nn)[order]
    # collapse duplicate parameter values introduced at segment joins
    keep = np.concatenate([[True], np.diff(s_arr) > 1e-15])
    s_arr, r_arr, th_arr, nu_arr = (a[keep] for a in (s_arr, r_arr, th_arr, nu_arr))

    safe_r = np.maximum(r_arr, 1e-300)
    mu_arr = L / safe_r
    if L == 0.0:
        energy = 0.5 * nu_arr ** 2
    else:
        phi = spec.warp(r_arr)[0]
        energy = 0.5 * (nu_arr ** 2 + (L / phi) ** 2)
    drift = float(np.max(np.abs(energy - e0)))
    return GeodesicResult(
        s=s_arr, r=r_arr, theta=th_arr, nu=nu_arr, mu=mu_arr, energy=energy,
        energy_drift=drift, escaped=escaped,
        turning_radius=float(min(np.min(r_arr), min(turning))),
    )


def integrate_geodesic(spec: ManifoldSpec, p0: PhasePoint, s_max: float,
                       tol: float = 1e-8, method: str = "rk45",
                       R_escape: float = None, samples_at=None,
                       step: float = None) -> GeodesicResult:
    """Integrate the reduced flow from p0 for flow parameter s_max.

    The embedded Runge-Kutta 5(4) path retightens its tolerances until
    the observed energy drift is below tol; "verlet" selects the
    fixed-step symplectic fallback (step defaults to 1e-3). Integration
    stops early once r >= R_escape (default 100 * spec.r0).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if R_escape is None:
        R_escape = 100.0 * spec.r0
    if samples_at is not None:
        samples_at = np.asarray(samples_at, dtype=float)
    L = p0.mu * p0.r
    e0 = hamiltonian_energy(spec, p0)

    if method == "verlet":
        return _integrate_verlet(spec, p0, s_max, tol, L, e0, R_escape,
                                 1e-3 if step is None else step)
    if method != "rk45":
        raise ValueError(f"unknown integrator {method!r}")

    rtol = max(min(1e-9, tol * 1e-2), 2.5e-14)
    last = None
    for _ in range(4):
        last = _run_segments(spec, p0, s_max, rtol, L, e0, R_escape, samples_at)
        if last.energy_drift <= tol:
            return last
        if rtol <= 2.5e-14:
            break
        rtol = max(rtol * 1e-2, 2.5e-14)
    raise NumericalError(
        f"energy drift {last.energy_drift:.3e} exceeds tol {tol:.3e} "
        "at the tightest step control")


def _integrate_verlet(spec, p0, s_max, tol, L, e0, r_escape, step):
    """Velocity-Verlet on H = nu^2/2 + L^2/(2 phi^2), fixed step."""
    r_sw = _flat_switch_radius(spec)
    two_e = 2.0 * e0

    def force(r):
        phi, dphi, _ = spec.warp(r)
        return L * L * dphi / phi ** 3

    n = max(1, int(math.ceil(s_max / step)))
    ds = s_max / n
    cap_gate = r_sw if r_sw is not None else spec.r_cap * 1e-6
    ss, rr, th, nn = [0.0], [p0.r], [p0.theta], [p0.nu]
    s, r, theta, nu = 0.0, p0.r, p0.theta, p0.nu
    escaped = False
    turning = [p0.r]
    while s < s_max - 0.5 * ds:
        half = nu + 0.5 * ds * force(r)
        r_new = r + ds * half
        if r_new <= cap_gate:
            if r_sw is None:
                raise CoordinateSingularityError(
                    "trajectory entered the polar singularity and the cap "
                    "profile is not Euclidean near r = 0")
            # walk to the switch circle, jump the chord, resume
            s_hit = (r - r_sw) / max(-nu, 1e-300)
            nu_hit = -math.sqrt(max(two_e - (L / r_sw) ** 2, 0.0)) if L else -abs(nu)
            dchord, dtheta, nu_out, perigee = _chord_exit(
                r_sw, theta, nu_hit, L, two_e)
            turning.append(perigee)
            s = s + s_hit + dchord
            r, theta, nu = r_sw, theta + dtheta, nu_out
        else:
            r_half = r + 0.5 * ds * half
            phi_half = spec.warp(r_half)[0]
            theta = theta + ds * L / phi_half ** 2
            r = r_new
            nu = half + 0.5 * ds * force(r)
            s += ds
        ss.append(s)
        rr.append(r)
        th.append(theta)
        nn.append(nu)
        if r >= r_escape:
            escaped = True
            break
    ss, rr, th, nn = (np.array(a) for a in (ss, rr, th, nn))

    if L == 0.0:
        energy = 0.5 * nn ** 2
    else:
        energy = 0.5 * (nn ** 2 + (L / spec.warp(rr)[0]) ** 2)
    drift = float(np.max(np.abs(energy - e0)))
    if drift > tol:
        raise NumericalError(
            f"verlet energy drift {drift:.3e} exceeds tol {tol:.3e}; "
            "reduce the step")
    return GeodesicResult(
        s=ss, r=rr, theta=th, nu=nn, mu=L / np.maximum(rr, 1e-300),
        energy=energy, energy_drift=drift, escaped=escaped,
        turning_radius=float(min(np.min(rr), min(turning))),
    )


@dataclass(frozen=True)
class CriticalOrbit:
    """Circular geodesic radius: phi'(radius) = 0."""

    radius: float
    stable: bool  # warp maximum (phi'' < 0) traps nearby geodesics
    warp_value: float


@dataclass
class TrappingReport:
    trapping: bool
    critical_orbits: tuple
    n_samples: int
    n_escaped: int
    n_nonescaping: int
    n_inconclusive: int
    witnesses: tuple  # initial conditions of non-escaping runs


def _critical_orbits(spec, r_max):
    grid = np.linspace(1e-3, r_max, 8192)
    dphi = spec.warp(grid)[1]
    flips = np.nonzero(np.diff(np.sign(dphi)) != 0)[0]
    orbits = []
    for i in flips:
        root = brentq(lambda rr: spec.warp(rr)[1], grid[i], grid[i + 1],
                      xtol=1e-12)
        phi, _, d2phi = spec.warp(root)
        orbits.append(CriticalOrbit(radius=float(root), stable=d2phi < 0.0,
                                    warp_value=float(phi)))
    return tuple(orbits)


def classify_trapping(spec: ManifoldSpec, n_samples: int = 64,
                      R_escape: float = None, s_budget: float = 1e4,
                      tol: float = 1e-6) -> TrappingReport:
    """Probe the manifold for trapped geodesics.

    Combines the exact warped-product criterion (circular orbits sit at
    roots of phi') with a deterministic Kronecker family of inward
    unit-energy launches plus explicit probes at each critical radius.
    A sample that exhausts its budget while still moving outward is
    flagged inconclusive rather than trapped.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if R_escape is None:
        R_escape = 100.0 * spec.r0
    orbits = _critical_orbits(spec, max(3.0 * spec.r0, 2.0 * spec.r_blend))

    launches = []
    # two-dimensional Kronecker sequence from the plastic constant
    a1, a2 = 0.7548776662466927, 0.5698402909980532
    lo, hi = math.log(1.0), math.log(3.0 * spec.r0)
    for i in range(n_samples):
        t1 = (0.5 + (i + 1) * a1) % 1.0
        t2 = (0.5 + (i + 1) * a2) % 1.0
        r_i = math.exp(lo + t1 * (hi - lo))
        gamma = t2 * 0.499 * math.pi  # inward, never exactly tangential
        phi = spec.warp(r_i)[0]
        launches.append(PhasePoint(r=r_i, theta=0.0, nu=-math.cos(gamma),
                                   mu=math.sin(gamma) * phi / r_i))
    for orb in orbits:
        phi = orb.warp_value
        launches.append(PhasePoint(r=orb.radius, theta=0.0, nu=0.0,
                                   mu=phi / orb.radius))
        r_off = orb.radius * 1.001
        phi_off = spec.warp(r_off)[0]
        launches.append(PhasePoint(r=r_off, theta=0.0, nu=0.0,
                                   mu=phi_off / r_off))

    n_escaped = n_nonescaping = n_inconclusive = 0
    witnesses = []
    for p in launches:
        try:
            res = integrate_geodesic(spec, p, s_budget, tol=tol,
                                     R_escape=R_escape)
        except CoordinateSingularityError:
            n_inconclusive += 1
            continue
        if res.escaped:
            n_escaped += 1
        elif res.nu[-1] > 0.0:
            n_inconclusive += 1
        else:
            n_nonescaping += 1
            if len(witnesses) < 8:
                witnesses.append(p)
    return TrappingReport(
        trapping=bool(orbits) or n_nonescaping > 0,
        critical_orbits=orbits,
        n_samples=len(launches),
        n_escaped=n_escaped,
        n_nonescaping=n_nonescaping,
        n_inconclusive=n_inconclusive,
        witnesses=tuple(witnesses),
    )
