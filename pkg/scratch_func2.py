import math
import time

import numpy as np

from conewave import (GaussianWavePacket, HamiltonianFamily, RadialWeight,
                      WaveField, band_packet, flat_spec, half_angular,
                      interaction_morawetz_flat, local_smoothing,
                      no_derivative_smoothing, angular_morawetz,
                      strichartz_ratio, trajectory)

print("== D: smoothing functionals, flat sine band traj (n=2048) ==")
t0 = time.time()
fam = HamiltonianFamily(flat_spec(), r_max=200.0, n_r=2048, scheme="sine")
times = np.linspace(0.0, 1.0, 65)
for k in (1, 2, 3):
    f0, kept = band_packet(fam, k, 1, 30.0, 4.0, 2.0 ** k)
    fields = trajectory(f0, times)
    ls = local_smoothing(fields, times, 1.0)
    nd = no_derivative_smoothing(fields, times, 1.0)
    am = angular_morawetz(fields, times)
    st = strichartz_ratio(fields, times, k)
    print(f"  k={k}: kept={kept:.3f} ls={ls.ratio:.4e} nd={nd.ratio:.4e} "
          f"am={am.ratio:.4e} st={st.ratio:.4e} wall={ls.mass_near_wall:.2e}")
print(f"  elapsed {time.time() - t0:.1f}s")

print("== D2: eigenmode stationarity of no_derivative ==")
ham = fam.mode(0)
c = np.zeros(ham.n); c[50] = 1.0
eigf = WaveField(fam, {0: ham.synthesize(c)})
fields0 = trajectory(eigf, times)
nd = no_derivative_smoothing(fields0, times, 1.0)
w = RadialWeight(flat_spec())(fam.grid) ** -2.0
spatial = fam.spacing * float(w @ np.abs(eigf.modes[0]) ** 2)
print(f"  LHS={nd.lhs:.10e} spatial={spatial:.10e} rel={abs(nd.lhs/spatial-1):.2e}")

print("== D3: homogeneity and additivity ==")
f0, _ = band_packet(fam, 2, 1, 30.0, 4.0, 4.0)
doubled = WaveField(fam, {1: 2.0 * f0.modes[1]})
fa = trajectory(f0, times)
fb = trajectory(doubled, times)
r1 = local_smoothing(fa, times, 1.0).ratio
r2 = local_smoothing(fb, times, 1.0).ratio
print(f"  homogeneity gap: {abs(r1 - r2):.3e}")
f2, _ = band_packet(fam, 2, 3, 30.0, 4.0, 4.0)
joint = WaveField(fam, {1: f0.modes[1], 3: f2.modes[3]})
la = angular_morawetz(trajectory(f0, times), times).lhs
lb = angular_morawetz(trajectory(WaveField(fam, {3: f2.modes[3]}), times), times).lhs
lj = angular_morawetz(trajectory(joint, times), times).lhs
print(f"  additivity: {la:.6e} + {lb:.6e} vs {lj:.6e} rel "
      f"{abs((la + lb) / lj - 1):.2e}")

print("== E: half_angular ==")
f1, _ = band_packet(fam, 2, 2, 30.0, 4.0, 4.0)
two = WaveField(fam, {1: f0.modes[1], 2: f1.modes[2]})
fields = trajectory(two, times)
t0 = time.time()
ha = half_angular(fields, times)
print(f"  two-mode: ratio={ha.ratio:.4e} lhs={ha.lhs:.4e} "
      f"single={ha.metadata['single_derivative']['ratio']:.4e} "
      f"elapsed {time.time() - t0:.1f}s")
onef = trajectory(WaveField(fam, {0: f0.modes[1]}), times)
ha0 = half_angular(onef, times)
print(f"  ell=0 only: lhs={ha0.lhs:.3e}")

print("== F: interaction morawetz ==")
t0 = time.time()
rep = interaction_morawetz_flat([GaussianWavePacket()], n=64)
print(f"  single: holds={rep.holds} min_margin={rep.min_margin:.4f} "
      f"kernel_err={rep.kernel_error:.3e} scale={rep.scale:.2f}")
print(f"  rate[0]={rep.rate[0]:.4f} quartic[1]={rep.quartic[1]:.4f} "
      f"8pi(pi/2)^1.5={8 * math.pi * (math.pi / 2) ** 1.5:.4f}")
print(f"  elapsed {time.time() - t0:.1f}s per run")
pair = [GaussianWavePacket(center=(-1.6, 0, 0), velocity=(3.2, 0, 0)),
        GaussianWavePacket(center=(1.6, 0, 0), velocity=(-3.2, 0, 0))]
rep2 = interaction_morawetz_flat(pair, n=64)
mono = bool(np.all(np.diff(rep2.virial) > 0))
print(f"  pair: holds={rep2.holds} min_margin={rep2.min_margin:.4f} "
      f"monotone={mono} kernel_err={rep2.kernel_error:.3e} scale={rep2.scale:.1f}")
rep3 = interaction_morawetz_flat([GaussianWavePacket()],
                                 times=np.linspace(-0.5, 0.5, 33), n=48,
                                 half_width=8.0)
anti = np.max(np.abs(rep3.virial + rep3.virial[::-1]))
print(f"  odd check: max|M(t)+M(-t)|={anti:.3e} "
      f"scale={np.max(np.abs(rep3.virial)):.3f}")
print("== F2: triple ==")
triple = pair + [GaussianWavePacket(center=(0, 1.4, 0), velocity=(0, -2.8, 0))]
rep4 = interaction_morawetz_flat(triple, n=64)
print(f"  triple: holds={rep4.holds} min_margin={rep4.min_margin:.4f} "
      f"kernel_err={rep4.kernel_error:.3e} scale={rep4.scale:.1f}")
