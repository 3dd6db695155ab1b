import time

import numpy as np

from conewave import (HamiltonianFamily, RadialWeight, WaveField, band_packet,
                      commutator_identities, cone_spec, flat_spec,
                      heisenberg_residual, interaction_morawetz_flat,
                      local_smoothing, no_derivative_smoothing,
                      angular_morawetz, half_angular, perturbed_spec,
                      smooth_radial_scale, strichartz_ratio, trajectory,
                      GaussianWavePacket, default_symbol_family)
from conewave.functionals import _radial_hessian


def gauss_sample(family, ells=(0, 2), center=15.0, width=3.0):
    g = family.grid
    modes = {}
    for i, ell in enumerate(ells):
        modes[ell] = np.exp(-((g - center) / width) ** 2) * np.exp(
            0.25j * (i + 1) * g)
    return WaveField(family, modes)


print("== A: commutator residuals, flat fd2 refinement ==")
a_smooth = smooth_radial_scale()
for scheme in ("fd2",):
    res = []
    for n in (256, 512, 1024):
        fam = HamiltonianFamily(flat_spec(), r_max=40.0, n_r=n, scheme=scheme)
        out = commutator_identities(a_smooth, gauss_sample(fam))
        res.append(out)
        print(f"  {scheme} n={n}: single={out.single:.3e} double={out.double:.3e} "
              f"pair={out.pairing_gap:.3e}")
    import math
    s1 = [math.log(res[i].single / res[i + 1].single) / math.log(2) for i in range(2)]
    s2 = [math.log(res[i].double / res[i + 1].double) / math.log(2) for i in range(2)]
    print(f"  slopes single={s1} double={s2}")

print("== A2: sine scheme magnitude, flat ==")
fam = HamiltonianFamily(flat_spec(), r_max=40.0, n_r=512, scheme="sine")
out = commutator_identities(a_smooth, gauss_sample(fam))
print(f"  sine n=512: single={out.single:.3e} double={out.double:.3e} "
      f"pair={out.pairing_gap:.3e} norm={out.field_norm:.3f}")

print("== A3: formula check on curved specs, fd2 dense ==")
for spec in (cone_spec(), perturbed_spec()):
    vals = []
    for n in (1024, 2048, 4096):
        fam = HamiltonianFamily(spec, r_max=40.0, n_r=n, scheme="fd2")
        out = commutator_identities(a_smooth, gauss_sample(fam))
        vals.append((out.single, out.double))
        print(f"  {spec.name} n={n}: single={out.single:.3e} double={out.double:.3e}")

print("== B: flat a=|z| oracle ==")
def abs_mult(r, order=0):
    r = np.asarray(r, dtype=float)
    if order == 0:
        return r.copy()
    if order == 1:
        return np.ones_like(r)
    return np.zeros_like(r)
fam = HamiltonianFamily(flat_spec(), r_max=40.0, n_r=2048, scheme="fd2")
out = commutator_identities(abs_mult, gauss_sample(fam))
print(f"  a=|z| n=2048: single={out.single:.3e} double={out.double:.3e}")
rr, ang = _radial_hessian(abs_mult, flat_spec(), np.array([2.0, 5.0, 10.0]))
print(f"  hess components rr={rr} ang={ang} (expect 0 and 1/r)")

print("== C: heisenberg refinement, flat fd2, band packet ==")
vals = []
for n in (256, 512, 1024):
    fam = HamiltonianFamily(flat_spec(), r_max=40.0, n_r=n, scheme="fd2")
    f0, _ = band_packet(fam, 1, 0, 15.0, 3.0, 2.0)
    times = np.linspace(0.0, 0.3, 7)
    fields = trajectory(f0, times)
    r = heisenberg_residual(fields, times, RadialWeight(flat_spec()))
    vals.append(r)
    print(f"  n={n}: residual={r:.3e}  (norm {f0.norm():.3f})")
import math
print("  slopes:", [math.log(vals[i] / vals[i + 1]) / math.log(2) for i in range(2)])
fam = HamiltonianFamily(flat_spec(), r_max=40.0, n_r=512, scheme="fd2")
f0, _ = band_packet(fam, 1, 0, 15.0, 3.0, 2.0)
one = lambda r, order=0: np.ones_like(r) if order == 0 else np.zeros_like(r)
print("  a=1 residual:", heisenberg_residual([f0], [0.0], one))
ham = fam.mode(0)
eig = ham.synthesize(np.eye(ham.n)[:, 40] / ham.spacing ** 0.5)  # one eigenvector
eigf = WaveField(fam, {0: eig})
print("  eigenmode residual:", heisenberg_residual([eigf], [0.0], RadialWeight(flat_spec())))

print("== D: smoothing functionals, flat sine band traj ==")
t0 = time.time()
fam = HamiltonianFamily(flat_spec(), r_max=200.0, n_r=1024, scheme="sine")
times = np.linspace(0.0, 1.0, 65)
reps = {}
for k in (1, 2, 3):
    f0, _ = band_packet(fam, k, 1, 30.0, 4.0, 2.0 ** k)
    fields = trajectory(f0, times)
    ls = local_smoothing(fields, times, 1.0)
    nd = no_derivative_smoothing(fields, times, 1.0)
    am = angular_morawetz(fields, times)
    st = strichartz_ratio(fields, times, k)
    print(f"  k={k}: ls={ls.ratio:.4f} nd={nd.ratio:.4f} am={am.ratio:.4f} "
          f"st={st.ratio:.5f} wall={ls.mass_near_wall:.2e}")
    reps[k] = (ls, nd, am, st)
print(f"  elapsed {time.time() - t0:.1f}s")

print("== D2: eigenmode stationarity of no_derivative ==")
ham = fam.mode(0)
c = np.zeros(ham.n); c[50] = 1.0
eigf = WaveField(fam, {0: ham.synthesize(c)})
fields = trajectory(eigf, times)
nd = no_derivative_smoothing(fields, times, 1.0)
w = RadialWeight(flat_spec())(fam.grid) ** -2.0
spatial = fam.spacing * float(w @ np.abs(eigf.modes[0]) ** 2)
print(f"  LHS={nd.lhs:.10e} spatial={spatial:.10e} rel={abs(nd.lhs/spatial-1):.2e}")

print("== E: half_angular ==")
f0, _ = band_packet(fam, 2, 1, 30.0, 4.0, 4.0)
f1, _ = band_packet(fam, 2, 2, 30.0, 4.0, 4.0)
two = WaveField(fam, {1: f0.modes[1], 2: f1.modes[2]})
fields = trajectory(two, times)
t0 = time.time()
ha = half_angular(fields, times)
print(f"  two-mode: ratio={ha.ratio:.4f} lhs={ha.lhs:.4e} "
      f"single={ha.metadata['single_derivative']['ratio']:.4e} "
      f"elapsed {time.time() - t0:.1f}s")
onef = trajectory(WaveField(fam, {0: f0.modes[1]}), times)
ha0 = half_angular(onef, times)
print(f"  ell=0 only: lhs={ha0.lhs:.3e}")

print("== F: interaction morawetz ==")
t0 = time.time()
rep = interaction_morawetz_flat([GaussianWavePacket()], n=64)
quart0 = rep.quartic[1]
print(f"  single: holds={rep.holds} min_margin={rep.min_margin:.4f} "
      f"kernel_err={rep.kernel_error:.3e} scale={rep.scale:.2f}")
print(f"  rate[0]={rep.rate[0]:.4f} quartic[1]={rep.quartic[1]:.4f} "
      f"8pi(pi/2)^1.5={8*math.pi*(math.pi/2)**1.5:.4f}")
print(f"  elapsed {time.time() - t0:.1f}s per run")
pair = [GaussianWavePacket(center=(-1.6, 0, 0), velocity=(3.2, 0, 0)),
        GaussianWavePacket(center=(1.6, 0, 0), velocity=(-3.2, 0, 0))]
rep2 = interaction_morawetz_flat(pair, n=64)
mono = np.all(np.diff(rep2.virial) > 0)
print(f"  pair: holds={rep2.holds} min_margin={rep2.min_margin:.4f} "
      f"monotone={mono} kernel_err={rep2.kernel_error:.3e}")
rep3 = interaction_morawetz_flat([GaussianWavePacket()],
                                 times=np.linspace(-0.5, 0.5, 33), n=48,
                                 half_width=8.0)
anti = np.max(np.abs(rep3.virial + rep3.virial[::-1]))
print(f"  odd check: max|M(t)+M(-t)|={anti:.3e} scale={np.max(np.abs(rep3.virial)):.3f}")
