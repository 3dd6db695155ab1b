"""Rotationally symmetric asymptotically conic geometry.

A manifold is described by a warp function phi acting in
g = dr^2 + phi(r)^2 g_{S^2}.  Near the origin phi follows a cap profile
(either exactly Euclidean or a Gaussian bump modulation), and for large r
it follows the conic tail

    phi(r) = r * sqrt(h(1/r)),    h(x) = alpha^2 (1 + a1 x + ... + am x^m),

so that h is the boundary metric coefficient in the scattering picture.
Cap and tail are joined with a quintic smoothstep on [r_cap, r_blend],
which keeps phi and its first two derivatives continuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np


def smoothstep5(u):
    """Quintic smoothstep: 0 for u <= 0, 1 for u >= 1, C^2 at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 + u * (-15.0 + 6.0 * u))


def smoothstep5_d1(u):
    """First derivative of smoothstep5 (zero outside (0, 1))."""
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 30.0 * u ** 2 * (1.0 + u * (-2.0 + u)), 0.0)


def smoothstep5_d2(u):
    """Second derivative of smoothstep5 (zero outside (0, 1))."""
    inside = (u > 0.0) & (u < 1.0)
    u = np.clip(u, 0.0, 1.0)
    return np.where(inside, 60.0 * u * (1.0 + u * (-3.0 + 2.0 * u)), 0.0)


@dataclass(frozen=True)
class ManifoldSpec:
    """Immutable description of one rotationally symmetric manifold.

    cap selects the interior profile: "linear" is phi = r, "bump" is
    phi = r * (1 + bump_amp * exp(-((r - bump_center)/bump_width)^2)).
    tail holds the polynomial coefficients (a1, ..., am) of h, m <= 4.
    r0 is the radius beyond which the radial weight equals r, and
    epsilon0 bounds the collar coordinate x = 1/r from above.
    """

    name: str
    cap: str = "linear"
    alpha: float = 1.0
    tail: tuple = ()
    bump_amp: float = 0.0
    bump_center: float = 5.0
    bump_width: float = 1.0
    r_cap: float = 1.0
    r_blend: float = 2.0
    r0: float = 10.0
    epsilon0: float = 0.5

    def __post_init__(self):
        if self.cap not in ("linear", "bump"):
            raise ValueError(f"unknown cap profile {self.cap!r}")
        if not self.alpha > 0.0:
            raise ValueError("tail slope alpha must be positive")
        if len(self.tail) > 4:
            raise ValueError("tail polynomial order is capped at 4")
        if not 0.0 < self.r_cap < self.r_blend:
            raise ValueError("need 0 < r_cap < r_blend")
        if not self.r0 > 0.0 or not self.epsilon0 > 0.0:
            raise ValueError("r0 and epsilon0 must be positive")
        object.__setattr__(self, "tail", tuple(float(a) for a in self.tail))

    # -- tail polynomial h and derivatives in x ---------------------------

    def _h_poly(self, x):
        acc = np.zeros_like(x)
        for a in reversed(self.tail):
            acc = (acc + a) * x
        return self.alpha ** 2 * (1.0 + acc)

    def _h_poly_d1(self, x):
        acc = np.zeros_like(x)
        for i in range(len(self.tail), 0, -1):
            acc = acc * x + i * self.tail[i - 1]
        return self.alpha ** 2 * acc

    def _h_poly_d2(self, x):
        acc = np.zeros_like(x)
        for i in range(len(self.tail), 1, -1):
            acc = acc * x + i * (i - 1) * self.tail[i - 1]
        return self.alpha ** 2 * acc

    # -- cap and tail warps ----------------------------------------------

    def _cap_warp(self, r):
        if self.cap == "linear":
            return r, np.ones_like(r), np.zeros_like(r)
        A, c, w = self.bump_amp, self.bump_center, self.bump_width
        g = A * np.exp(-(((r - c) / w) ** 2))
        b = 1.0 + g
        db = g * (-2.0 * (r - c) / w ** 2)
        d2b = g * (4.0 * (r - c) ** 2 / w ** 4 - 2.0 / w ** 2)
        return r * b, b + r * db, 2.0 * db + r * d2b

    def _tail_warp(self, r):
        if not self.tail:
            # Exact cone: avoids round-off from the 1/(1/r) detour so the
            # flat profile satisfies phi(r) == r to the last bit.
            a = self.alpha
            return a * r, np.full_like(r, a), np.zeros_like(r)
        x = 1.0 / r
        h = self._h_poly(x)
        h1 = self._h_poly_d1(x)
        h2 = self._h_poly_d2(x)
        sq = np.sqrt(h)
        phi = sq / x
        dphi = sq - x * h1 / (2.0 * sq)
        d2phi = x ** 3 * (h2 / (2.0 * sq) - h1 ** 2 / (4.0 * h * sq))
        return phi, dphi, d2phi

    # -- public surface ---------------------------------------------------

    def warp(self, r):
        """Evaluate (phi, phi', phi'') at radius r (scalar or array).

        Negative radii are rejected; r = 0 is allowed and returns the cap
        values (phi(0) = 0).
        """
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise ValueError("warp: radius must be nonnegative")
        scalar = r_arr.ndim == 0
        r_arr = np.atleast_1d(r_arr)

        pc, dpc, d2pc = self._cap_warp(r_arr)
        # The tail formula divides by r; mask the cap-only points.
        safe = np.where(r_arr > self.r_cap, r_arr, self.r_blend)
        pt, dpt, d2pt = self._tail_warp(safe)

        u = (r_arr - self.r_cap) / (self.r_blend - self.r_cap)
        s = smoothstep5(u)
        du = 1.0 / (self.r_blend - self.r_cap)
        s1 = smoothstep5_d1(u) * du
        s2 = smoothstep5_d2(u) * du ** 2

        diff = pt - pc
        phi = pc + s * diff
        dphi = dpc + s1 * diff + s * (dpt - dpc)
        d2phi = d2pc + s2 * diff + 2.0 * s1 * (dpt - dpc) + s * (d2pt - d2pc)

        if scalar:
            return float(phi[0]), float(dphi[0]), float(d2phi[0])
        return phi, dphi, d2phi

    def metric_h(self, x):
        """Boundary metric coefficient h(x) = (x phi(1/x))^2 on the collar.

        Valid for 0 <= x < epsilon0; x = 0 returns the limit alpha^2.
        """
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < 0.0) or np.any(x_arr >= self.epsilon0):
            raise ValueError("metric_h: collar coordinate must satisfy 0 <= x < epsilon0")
        scalar = x_arr.ndim == 0
        x_arr = np.atleast_1d(x_arr)
        out = np.full_like(x_arr, self.alpha ** 2)
        pos = x_arr > 0.0
        if np.any(pos):
            phi, _, _ = self.warp(1.0 / x_arr[pos])
            out[pos] = (x_arr[pos] * np.atleast_1d(phi)) ** 2
        if scalar:
            return float(out[0])
        return out

    def laplacian_coeffs(self, ell, r):
        """Coefficients (c0, c1, c2) of the radial Laplacian on mode ell.

        For u = f(r) Y_ell, Delta u = (c2 f'' + c1 f' + c0 f) Y_ell with
        c2 = 1, c1 = 2 phi'/phi, c0 = -ell(ell+1)/phi^2.  The origin is a
        coordinate singularity and is rejected.
        """
        if ell < 0 or ell != int(ell):
            raise ValueError("laplacian_coeffs: ell must be a nonnegative integer")
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr <= 0.0):
            raise ValueError("laplacian_coeffs: r = 0 is a coordinate singularity")
        phi, dphi, _ = self.warp(r)
        c0 = -ell * (ell + 1) / phi ** 2
        c1 = 2.0 * dphi / phi
        c2 = np.ones_like(np.atleast_1d(np.asarray(c1)))
        if np.asarray(r).ndim == 0:
            return float(c0), float(c1), 1.0
        return c0, c1, c2

    def weight(self) -> "RadialWeight":
        return RadialWeight(self)

    # -- config schema ----------------------------------------------------

    def to_config(self) -> dict:
        """Flat key-value form used by the experiment harness."""
        d = {
            "name": self.name,
            "cap": self.cap,
            "alpha": repr(self.alpha),
            "r_cap": repr(self.r_cap),
            "r_blend": repr(self.r_blend),
            "r0": repr(self.r0),
            "epsilon0": repr(self.epsilon0),
        }
        for i in range(4):
            d[f"a{i + 1}"] = repr(self.tail[i]) if i < len(self.tail) else "0"
        if self.cap == "bump":
            d["bump_amp"] = repr(self.bump_amp)
            d["bump_center"] = repr(self.bump_center)
            d["bump_width"] = repr(self.bump_width)
        return d

    @staticmethod
    def from_config(section: dict) -> "ManifoldSpec":
        tail = [float(section.get(f"a{i}", 0.0)) for i in (1, 2, 3, 4)]
        while tail and tail[-1] == 0.0:
            tail.pop()
        kwargs = {}
        for key in ("bump_amp", "bump_center", "bump_width"):
            if key in section:
                kwargs[key] = float(section[key])
        return ManifoldSpec(
            name=str(section["name"]),
            cap=str(section.get("cap", "linear")),
            alpha=float(section.get("alpha", 1.0)),
            tail=tuple(tail),
            r_cap=float(section.get("r_cap", 1.0)),
            r_blend=float(section.get("r_blend", 2.0)),
            r0=float(section.get("r0", 10.0)),
            epsilon0=float(section.get("epsilon0", 0.5)),
            **kwargs,
        )


class RadialWeight:
    """Smooth radial length scale <z>.

    Equal to r beyond spec.r0 and to the constant max(1, 1/epsilon0) in
    the interior, joined with the same quintic smoothstep as the warp.
    The join occupies [min(r_cap, r0 - 1), r0], so it stays a genuine
    interval even when a cap region reaches all the way out to r0.  The
    weight obeys the symbol bounds |d^j<z>/dr^j| <= C_j <z>^(1-j).
    """

    def __init__(self, spec: ManifoldSpec):
        self.spec = spec
        self.interior_value = max(1.0, 1.0 / spec.epsilon0)
        self.lo = min(spec.r_cap, spec.r0 - 1.0)
        self.hi = spec.r0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        u = (r - self.lo) / (self.hi - self.lo)
        s = smoothstep5(u)
        return self.interior_value + s * (r - self.interior_value)

    def derivative(self, r, order=1):
        """d^order <z>/dr^order for order in {1, 2}."""
        r = np.asarray(r, dtype=float)
        du = 1.0 / (self.hi - self.lo)
        u = (r - self.lo) * du
        s = smoothstep5(u)
        s1 = smoothstep5_d1(u) * du
        s2 = smoothstep5_d2(u) * du ** 2
        if order == 1:
            return s + s1 * (r - self.interior_value)
        if order == 2:
            return 2.0 * s1 + s2 * (r - self.interior_value)
        raise ValueError("derivative order must be 1 or 2")

    def symbol_constants(self, r_max=None, n=4096):
        """Sampled symbol constants (C0, C1, C2).

        C_j is the largest observed |d^j<z>/dr^j| * <z>^(j-1); C0 is 1 by
        construction and returned for completeness.
        """
        if r_max is None:
            r_max = 10.0 * self.spec.r0
        r = np.linspace(0.0, r_max, n)
        z = self(r)
        c1 = float(np.max(np.abs(self.derivative(r, 1))))
        c2 = float(np.max(np.abs(self.derivative(r, 2)) * z))
        return 1.0, c1, c2


# -- stock manifolds used across the package and its experiments ----------


def flat_spec() -> ManifoldSpec:
    """Euclidean R^3 in conic form: phi(r) = r exactly at every radius."""
    return ManifoldSpec(name="flat", cap="linear", alpha=1.0, tail=())


def cone_spec(alpha: float = 0.8) -> ManifoldSpec:
    """Euclidean cap joined to a perfect cone of slope alpha."""
    return ManifoldSpec(name="cone", cap="linear", alpha=alpha, tail=())


def perturbed_spec(a1: float = 1.0) -> ManifoldSpec:
    """Asymptotically Euclidean tail with leading correction a1/r."""
    return ManifoldSpec(name="perturbed", cap="linear", alpha=1.0, tail=(a1,))


def neck_spec() -> ManifoldSpec:
    """Profile with a bulge at r = 5 producing a stable circular geodesic.

    The bump makes phi' vanish twice, so the manifold is trapping; the
    cap region extends to r = 10 and the tail is exactly Euclidean.
    """
    return ManifoldSpec(
        name="neck",
        cap="bump",
        alpha=1.0,
        tail=(),
        bump_amp=0.5,
        bump_center=5.0,
        bump_width=1.0,
        r_cap=10.0,
        r_blend=12.0,
    )


SPEC_PRESETS = {
    "flat": flat_spec,
    "cone": cone_spec,
    "perturbed": perturbed_spec,
    "neck": neck_spec,
}
