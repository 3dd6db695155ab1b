"""End-to-end acceptance gate: ten checks, one verdict line each.

Every test computes its numbers first, prints a `criterion N: ...`
scoreboard line, and only then asserts, so a full run always produces
the complete scoreboard (the terminal-summary hook in conftest repeats
it after the run).  The dense eigenbases behind the band sweeps are the
dominant cost; they are built once per manifold, shared between checks,
and dropped before the next manifold so peak memory stays near a single
basis.  The whole gate takes roughly half an hour single-threaded.

Two gates fail at their stated thresholds and are left failing on
purpose.  The row-packet flux exponent converges to 1.346 +- 0.003
against a 1.35 gate, and the absolute-value flux ratio grows by a
factor 1.97 +- 0.02 over the six bands against a 2.0 gate.  Both
measured values are quadrature-converged, and both underlying growth
laws (k^{3/2} flux, hence sqrt(k) for the normalized ratio) clear their
thresholds only beyond this band range; see the assertion messages.
"""

import gc
import math

import numpy as np
import pytest

from conewave import (
    CounterexampleField,
    GaussianWavePacket,
    HamiltonianFamily,
    PointPair,
    RadialWeight,
    WaveField,
    band_packet,
    bvp_distance,
    check_ang_lower_bound,
    classify_trapping,
    commutator_identities,
    cone_spec,
    conic_distance,
    counterexample_scaling,
    distance_error_decay,
    evolve,
    flat_bilaplacian_pairing,
    flat_spec,
    half_angular,
    heisenberg_residual,
    interaction_morawetz_flat,
    littlewood_paley,
    local_smoothing,
    mixed_gradient_integral,
    neck_spec,
    perturbed_spec,
    smooth_radial_scale,
    sobolev_norm,
    sobolev_scaling_fit,
    strichartz_ratio,
    trajectory,
)
from conewave.distances import IsotropicGaussian
from conewave.spectral import sandwich_constants

VERDICTS = []

SPECS = {
    "flat": flat_spec(),
    "cone": cone_spec(0.8),
    "perturbed": perturbed_spec(1.0),
}

# Radial grids per band for the focusing sweeps: the k = 6 shell rides
# out to r ~ 90 before turning, so its box is the widest.
SWEEP_GRIDS = {1: (48.0, 1024), 2: (48.0, 1024), 3: (48.0, 1024),
               4: (48.0, 1024), 5: (80.0, 3328), 6: (150.0, 12288)}

# Grids and degrees for the tensor-functional transit family.  The
# degree schedule scales like 2^{k/2} so the quadratic degree factor
# cancels the kinematic 2^k of a per-band transit (see _transit_packet).
TENSOR_GRIDS = {1: (48.0, 1024), 2: (48.0, 1024), 3: (48.0, 1024),
                4: (48.0, 1024), 5: (48.0, 2048), 6: (96.0, 8192)}
TENSOR_DEGREES = {1: 30, 2: 44, 3: 63, 4: 96, 5: 158, 6: 221}

UNIT_TIMES = np.linspace(0.0, 1.0, 65)

_POOL = {}


def _family(name, r_max, n_r):
    key = (name, r_max, n_r)
    if key not in _POOL:
        _POOL[key] = HamiltonianFamily(SPECS[name], r_max, n_r, scheme="sine")
    return _POOL[key]


def _evict(name, r_max, n_r):
    _POOL.pop((name, r_max, n_r), None)
    gc.collect()


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    VERDICTS.append(line)
    print(line, flush=True)
    return ok


# --- band-sweep field constructions ----------------------------------------


def _chirped_shell(family, k, t_star, aperture=0.14):
    """Inbound band-k shell whose lens phase focuses every radius at t_star.

    A fixed-shape packet spreads long before it reaches the origin once
    the band outruns the aperture; the quadratic phase aims each radius
    to arrive at t_star regardless of its spectral width, which is what
    keeps the focus sharp across all six bands.
    """
    kap = math.sqrt(2.0) * 2.0**k
    r_c = kap * t_star
    sigma = max(aperture * r_c, 2.0 / 2.0**k)
    r = family.grid
    seed = np.exp(-((r - r_c) ** 2) / (2.0 * sigma**2)
                  - 0.5j * r**2 / t_star)
    raw = WaveField(family, {0: seed})
    proj = littlewood_paley(raw, k)
    unit = {ell: v / proj.norm() for ell, v in proj.modes.items()}
    return WaveField(family, unit, 0.0, k), sigma


def _burst_times(t_star, inner):
    """Uniform base nodes plus a geometric cluster around the focus.

    The quartic burst at the focus lives on the timescale of the packet
    crossing itself; uniform-only sampling either misses it or pays for
    global refinement.
    """
    offsets = [0.0]
    rho = float(inner)
    while rho < 0.6:
        for frac in (0.37, 0.61, 0.83, 1.0):
            offsets.append(rho * frac)
        rho *= 1.9
    pts = set(float(t) for t in np.linspace(0.0, 1.0, 65))
    for off in offsets:
        for t in (t_star - off, t_star + off):
            if 0.0 < t < 1.0:
                pts.add(round(t, 12))
    return np.array(sorted(pts))


def _focus_field(family):
    """Band-1 datum that revisits the core at t = 0.5 on any manifold.

    Band 1 is too slow to traverse the weight core inside the unit
    window, so the field is built to sit in it: park a modulated pulse
    against the core and take the complex conjugate of its half-time
    evolution.  The seed is real, so conjugation is exactly time
    reversal, and the construction never assumes an eigenvector sign
    convention (dense solvers pick one arbitrarily per mode).
    """
    r = family.grid
    seed = (np.exp(-((r - 2.0) ** 2) / 2.0) * np.sin(4.5 * r)).astype(complex)
    raw = WaveField(family, {0: seed})
    proj = littlewood_paley(raw, 1)
    unit = {ell: v / proj.norm() for ell, v in proj.modes.items()}
    star = WaveField(family, unit, 0.0, 1)
    half = trajectory(star, np.array([0.5]))[0]
    rev = {ell: np.conj(v) for ell, v in half.modes.items()}
    return WaveField(family, rev, 0.0, 1)


def _transit_packet(family, k, ell):
    """Narrow band-k shell at degree ell crossing the symbol support.

    The ramp the tensor symbols ride rises across one decade of radius,
    so every band starts just outside it and traverses inward; the
    degree schedule above pins the per-band level to a common plateau.
    """
    kap = math.sqrt(2.0) * 2.0**k
    r_c = 13.0 + 0.45 * kap
    r = family.grid
    seed = np.exp(-((r - r_c) ** 2) / 18.0 - 1j * kap * r)
    raw = WaveField(family, {ell: seed})
    proj = littlewood_paley(raw, k)
    unit = {e: v / proj.norm() for e, v in proj.modes.items()}
    return WaveField(family, unit, 0.0, k)


def _gauss_sample(family, ells=(0, 2), center=15.0, width=3.0):
    g = family.grid
    modes = {}
    for i, ell in enumerate(ells):
        modes[ell] = np.exp(-((g - center) / width) ** 2) * np.exp(
            0.25j * (i + 1) * g)
    return WaveField(family, modes)


def _random_field(family, degrees, seed, cap=None):
    rng = np.random.default_rng(seed)
    modes = {}
    for ell in degrees:
        v = rng.standard_normal(family.n_r) + 1j * rng.standard_normal(
            family.n_r)
        if cap is not None:
            v = family.mode(ell).calculus(lambda lam: lam <= cap, v)
        modes[ell] = v
    return WaveField(family, modes)


@pytest.fixture(scope="module")
def band_sweeps():
    """Quartic and weighted-gradient ratios over k = 1..6, per manifold.

    Both functionals ride the same eigenbases, so the sweep runs one
    manifold at a time and drops the two large families before moving
    on; the k = 6 basis alone is over a gigabyte.
    """
    tables = {}
    for name in ("flat", "cone", "perturbed"):
        quartic, wall, smoothing = {}, {}, {}
        for k in range(1, 7):
            r_max, n_r = SWEEP_GRIDS[k]
            fam = _family(name, r_max, n_r)
            kap = math.sqrt(2.0) * 2.0**k

            shell, sigma = _chirped_shell(fam, k, 0.5)
            times = _burst_times(0.5, 0.5 / (sigma * kap) / 4.0)
            rep = strichartz_ratio(trajectory(shell, times), times, k)
            quartic[k] = rep.ratio
            wall[k] = rep.mass_near_wall

            if k == 1:
                late = _focus_field(fam)
            else:
                late, _ = _chirped_shell(fam, k, 1.0 - 0.3 / kap)
            ls = local_smoothing(trajectory(late, UNIT_TIMES), UNIT_TIMES,
                                 eps=3.0)
            smoothing[k] = ls.ratio
        _evict(name, 150.0, 12288)
        _evict(name, 80.0, 3328)
        tables[name] = {"quartic": quartic, "wall": wall,
                        "smoothing": smoothing}
    return tables


# --- the ten gates ----------------------------------------------------------


def test_flat_bilaplacian_constant():
    res = flat_bilaplacian_pairing(IsotropicGaussian(), IsotropicGaussian())
    target = 8.0 * math.pi * math.pi**1.5
    rel = abs(res.value - target) / target
    ok = rel <= 0.01
    record(1, ok, f"pairing {res.value:.6f} vs 8*pi^(5/2) {target:.6f}, "
           f"rel err {rel:.2e} (gate 1e-2)")
    assert ok


def test_interaction_morawetz_monotonicity():
    single = [GaussianWavePacket()]
    pair = [GaussianWavePacket(center=(-1.6, 0.0, 0.0),
                               velocity=(3.2, 0.0, 0.0)),
            GaussianWavePacket(center=(1.6, 0.0, 0.0),
                               velocity=(-3.2, 0.0, 0.0))]
    triple = pair + [GaussianWavePacket(center=(0.0, 1.4, 0.0),
                                        velocity=(0.0, -2.8, 0.0))]
    margins = {}
    all_hold = True
    for label, packets in (("single", single), ("pair", pair),
                           ("triple", triple)):
        rep = interaction_morawetz_flat(packets, n=64)
        assert len(rep.times) >= 33
        margins[label] = rep.min_margin
        all_hold = all_hold and rep.holds
    detail = ", ".join(f"{k} margin {v:.1f}" for k, v in margins.items())
    record(2, all_hold, f"rate >= quartic floor at 65 nodes on 64^3: {detail}")
    assert all_hold


def test_row_packet_exponents():
    rep = counterexample_scaling()
    k_exp, n_exp = sobolev_scaling_fit()
    ok_lhs = rep.lhs_exponent >= 1.35
    ok_rhs = rep.rhs_exponent <= 1.15
    ok_fit = abs(k_exp - 0.5) <= 0.075 and abs(n_exp + 1.0) <= 0.15
    ok = ok_lhs and ok_rhs and ok_fit
    record(3, ok, f"flux k-exponent {rep.lhs_exponent:.4f} (gate >= 1.35), "
           f"norm side {rep.rhs_exponent:.4f} (gate <= 1.15), "
           f"H^1/2 fit k^{k_exp:.3f} N^{n_exp:.3f}")
    assert ok_rhs
    assert ok_fit
    # Converged shortfall: the flux exponent settles at 1.346 +- 0.003
    # on bands 3..6 (self-interference background dilutes the k^{3/2}
    # law at small k), so this gate reads FAIL by construction.
    assert ok_lhs, (
        f"flux exponent {rep.lhs_exponent:.4f} < 1.35: quadrature-converged "
        "shortfall of the asymptotic k^{3/2} law at bands 3..6")


def test_strichartz_band_uniformity(band_sweeps):
    details = []
    ok = True
    for name, table in band_sweeps.items():
        vals = list(table["quartic"].values())
        spread = max(vals) / min(vals)
        worst_wall = max(table["wall"].values())
        details.append(f"{name} spread {spread:.2f}, wall {worst_wall:.1e}")
        ok = ok and spread <= 2.0 and worst_wall < 1e-3
    record(4, ok, "; ".join(details) + " (gates: spread <= 2, wall < 1e-3)")
    assert ok


def test_trapping_contrast(band_sweeps):
    report = classify_trapping(neck_spec())
    witness_ok = report.trapping and report.n_nonescaping > 0

    ratios = []
    phi_r1 = 7.721919251444967  # warp at the inner critical radius
    r1 = 5.300844441302745
    for k in range(1, 7):
        fam = HamiltonianFamily(neck_spec(), 40.0, 4096, scheme="sine")
        ell = round(math.sqrt(2.0) * 2.0**k * phi_r1)
        ham = fam.mode(ell)
        sel = np.where((ham.eigenvalues >= 4.0 ** (k - 1))
                       & (ham.eigenvalues <= 4.0 ** (k + 1)))[0]
        window = np.abs(fam.grid - r1) <= 1.2
        frac = (fam.spacing * np.abs(ham.modes[:, sel]) ** 2)[window].sum(
            axis=0)
        best = sel[int(np.argmax(frac))]
        u0 = WaveField(fam, {ell: ham.modes[:, best].astype(complex)}, 0.0, k)
        rep = local_smoothing(trajectory(u0, UNIT_TIMES), UNIT_TIMES, eps=3.0)
        ratios.append(rep.ratio)
        del fam, ham, u0
        gc.collect()
    monotone = all(b > a for a, b in zip(ratios, ratios[1:]))
    total = ratios[-1] / ratios[0]

    spreads = {name: max(t["smoothing"].values()) / min(t["smoothing"].values())
               for name, t in band_sweeps.items()}
    open_ok = all(v <= 2.0 for v in spreads.values())
    ok = witness_ok and monotone and total >= 3.0 and open_ok
    record(5, ok, f"neck ladder x{total:.1f} monotone={monotone}, "
           f"witnesses {report.n_nonescaping}; open spreads "
           + ", ".join(f"{n} {v:.2f}" for n, v in spreads.items())
           + " (gates: x3 up, <= 2 flat)")
    assert ok


def test_distance_oracle_agreement():
    spec = SPECS["cone"]
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        r1, r2 = rng.uniform(10.0, 30.0, 2)
        th = rng.uniform(0.02, 0.5)
        d = bvp_distance(spec, PointPair(r1, 0.0, r2, th), tol=1e-9).length
        want = conic_distance(0.8, r1, r2, 0.8 * th)
        worst = max(worst, abs(d - want) / want)
    table = distance_error_decay(SPECS["perturbed"],
                                 [20.0, 40.0, 80.0, 160.0], theta=0.3)
    bounded = (bool(np.all(np.isfinite(table.errors)))
               and table.sup_error < 2.0
               and bool(np.all(table.difference_ratios < 1.1)))
    ok = worst <= 1e-6 and bounded
    record(6, ok, f"cone worst rel err {worst:.2e} over 100 pairs "
           f"(gate 1e-6); ray errors sup {table.sup_error:.3f}, "
           f"difference ratios {np.round(table.difference_ratios, 2)}")
    assert ok


def test_hessian_angular_floor():
    fit = check_ang_lower_bound(SPECS["perturbed"], n_samples=1000, seed=2)
    verify = check_ang_lower_bound(SPECS["perturbed"], n_samples=1000, seed=3,
                                   C_fit=1.5 * fit.c_star + 1e-9)
    flat_rep = check_ang_lower_bound(SPECS["flat"], n_samples=1000, seed=1)
    ok = (math.isfinite(fit.c_star)
          and verify.n_violations_at_fit == 0
          and flat_rep.c_star <= 1e-6)
    record(7, ok, f"perturbed C* {fit.c_star:.4f}, violations at 1.5C* "
           f"{verify.n_violations_at_fit}/{verify.n_evaluated}; "
           f"flat C* {flat_rep.c_star:.1e} (gate <= 1e-6)")
    assert ok


def test_discrete_identity_convergence():
    heis, singles, doubles = [], [], []
    for n in (256, 512, 1024):
        fam = HamiltonianFamily(flat_spec(), r_max=40.0, n_r=n, scheme="fd2")
        field, _ = band_packet(fam, 1, 0, 15.0, 3.0, 2.0)
        times = np.linspace(0.0, 0.3, 7)
        heis.append(heisenberg_residual(trajectory(field, times), times,
                                        RadialWeight(flat_spec())))
        res = commutator_identities(smooth_radial_scale(), _gauss_sample(fam))
        singles.append(res.single)
        doubles.append(res.double)
    slopes = []
    for seq in (heis, singles, doubles):
        for coarse, fine in zip(seq, seq[1:]):
            slopes.append(math.log(coarse / fine) / math.log(2.0))
    worst = min(slopes)
    ok = worst >= 1.8
    record(8, ok, f"halving slopes {[round(s, 2) for s in slopes]} over "
           f"N = 256/512/1024 (gate >= 1.8)")
    assert ok


def test_solver_invariants():
    drift = 0.0
    for name, degrees, seed in (("perturbed", (0, 2), 41),
                                ("cone", (1, 3), 42)):
        fam = HamiltonianFamily(SPECS[name], 40.0, 256)
        fld = _random_field(fam, degrees, seed)
        for t in (0.37, 0.83):
            drift = max(drift, abs(evolve(fld, t).norm() - fld.norm()))

    fam = HamiltonianFamily(SPECS["perturbed"], 40.0, 256)
    fld = _random_field(fam, [0, 1, 2], 21, cap=16.0)
    pieces = [littlewood_paley(fld, k) for k in range(3)]
    recon = 0.0
    for ell in fld.modes:
        total = sum(p.modes[ell] for p in pieces)
        recon = max(recon, float(np.abs(total - fld.modes[ell]).max()))

    sandwich_ok = True
    for name, k in (("perturbed", 2), ("cone", 3)):
        fam = HamiltonianFamily(SPECS[name], 44.0, 512)
        fld = littlewood_paley(_random_field(fam, [0, 1], 24), k)
        base = fld.norm()
        for s in (-1.0, 0.5, 1.0):
            low, high = sandwich_constants(s, k)
            hs = sobolev_norm(fld, s)
            sandwich_ok = sandwich_ok and (
                low * 2.0 ** (k * s) * base <= hs * (1.0 + 1e-12))
            sandwich_ok = sandwich_ok and (
                hs <= high * 2.0 ** (k * s) * base * (1.0 + 1e-12))
    ok = drift <= 1e-10 and recon <= 1e-10 and sandwich_ok
    record(9, ok, f"unitarity drift {drift:.1e}, reconstruction gap "
           f"{recon:.1e} (gates 1e-10); sandwich bounds "
           f"{'hold' if sandwich_ok else 'VIOLATED'}")
    assert ok


def test_half_angular_contrast():
    spreads = {}
    for name in ("flat", "cone", "perturbed"):
        ratios = {}
        for k in range(1, 7):
            r_max, n_r = TENSOR_GRIDS[k]
            fam = _family(name, r_max, n_r)
            field = _transit_packet(fam, k, TENSOR_DEGREES[k])
            rep = half_angular(trajectory(field, UNIT_TIMES), UNIT_TIMES)
            ratios[k] = rep.ratio
        _evict(name, 96.0, 8192)
        _evict(name, 48.0, 2048)
        spreads[name] = max(ratios.values()) / min(ratios.values())
    bounded_ok = all(v <= 2.0 for v in spreads.values())

    variant = []
    for k in range(1, 7):
        fld = CounterexampleField(k, seed=0)
        flux = mixed_gradient_integral(fld)
        variant.append(flux.value / fld.sobolev_norm(0.5) ** 2)
    growth = max(variant) / min(variant)
    ok = bounded_ok and growth >= 2.0
    record(10, ok, "tensor spreads "
           + ", ".join(f"{n} {v:.2f}" for n, v in spreads.items())
           + f" (gate <= 2); |.|-inside growth x{growth:.3f} (gate >= 2)")
    assert bounded_ok
    # Converged shortfall: the normalized flux ratio grows sqrt(k)-like
    # and reaches x1.97 +- 0.02 by band 6, stable under sign draws and
    # quadrature refinement, so this gate reads FAIL by construction.
    assert growth >= 2.0, (
        f"absolute-value flux ratio grew x{growth:.3f} < 2 over bands "
        "1..6: quadrature-converged shortfall of the asymptotic sqrt(k) "
        "growth at this band range")
