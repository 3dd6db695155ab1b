import math, time
import numpy as np
import sys
sys.path.insert(0, "src")
from conewave.flatspace import (CounterexampleField, GaussianWavePacket,
                                colocated_control_integral, flat_sobolev_norm,
                                gaussian_solution, gaussian_gradient,
                                mixed_gradient_integral, counterexample_scaling,
                                sobolev_scaling_fit, _flux_spatial)

# --- 1. L2 conservation of the base profile ---
x = np.linspace(-12, 12, 161)
dz = x[1] - x[0]
Z = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
for t in (0.0, 0.7, 2.0):
    v = gaussian_solution(t, Z)
    print("t", t, "L2^2", np.sum(np.abs(v)**2)*dz**3, "target", math.pi**1.5)

# --- 2. PDE residual via 4th order FD ---
rng = np.random.default_rng(5)
pts = rng.normal(scale=1.2, size=(40, 3))
def residual(fn, t, z, h=1e-3):
    # i u_t + 1/2 lap u
    c = [-1/12, 4/3, -5/2, 4/3, -1/12]
    ut = (fn(t-2*h, z)/12 - 2/3*fn(t-h, z) + 2/3*fn(t+h, z) - fn(t+2*h, z)/12)/h
    lap = 0
    for ax in range(3):
        acc = c[2]*fn(t, z)
        for m, off in ((0,-2),(1,-1),(3,1),(4,2)):
            zz = z.copy(); zz[..., ax] += off*h
            acc = acc + c[m]*fn(t, zz)
        lap = lap + acc/h**2
    return np.abs(1j*ut + 0.5*lap)
r0 = residual(gaussian_solution, 0.3, pts)
print("base residual max", r0.max())
pk = GaussianWavePacket(center=(0.5, -0.2, 0.1), velocity=(1.0, 0.4, -0.3), amplitude=0.7-0.2j)
r1 = residual(pk.value, 0.4, pts)
print("boosted residual max", r1.max())
# gradient consistency FD
def gradfd(fn, t, z, h=1e-5):
    g = []
    for ax in range(3):
        zp = z.copy(); zp[..., ax] += h
        zm = z.copy(); zm[..., ax] -= h
        g.append((fn(t, zp) - fn(t, zm))/(2*h))
    return np.stack(g, axis=-1)
gerr = np.abs(pk.gradient(0.4, pts) - gradfd(pk.value, 0.4, pts)).max()
print("packet gradient FD err", gerr)
f2 = CounterexampleField(2, signs=(1.0, -1.0))
rc = residual(f2.value, 0.05, pts*0.2 + np.array([1.0,0,0]), h=2e-4)
print("counterexample residual max", rc.max(), "scale", np.abs(f2.value(0.05, pts*0.2)).max())
gerr2 = np.abs(f2.gradient(0.07, pts*0.3) - gradfd(f2.value, 0.07, pts*0.3)).max()
print("counterexample gradient FD err", gerr2)

# --- 3. flat_sobolev_norm: gaussian s=0 ---
x = np.linspace(-8, 8, 128, endpoint=False)
dz = x[1]-x[0]
Z = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
g0 = gaussian_solution(0.0, Z)
n0 = flat_sobolev_norm(g0, 0.0, spacing=dz)
print("gauss s=0:", n0, "target", math.pi**0.75, "rel", abs(n0-math.pi**0.75)/math.pi**0.75)
direct = math.sqrt(np.sum(np.abs(g0)**2)*dz**3)
print("plancherel rel diff", abs(n0-direct)/direct)
ns = [flat_sobolev_norm(g0, s, spacing=dz) for s in (-1.0, -0.5, 0.0, 0.5, 1.0, 2.0)]
print("monotone s:", ns, "increasing:", all(a < b for a, b in zip(ns, ns[1:])))
# analytic H^s of unit gaussian e^{-r^2/2}: hat = (2pi)^{3/2} e^{-xi^2/2}
# ||u||^2 = (2pi)^{-3} int (1+xi^2)^s (2pi)^3 e^{-xi^2} dxi = 4pi int rho^2 (1+rho^2)^s e^{-rho^2} drho
from scipy.integrate import quad
for s in (0.5, 1.0, 2.0):
    val = math.sqrt(4*math.pi*quad(lambda r: r**2*(1+r**2)**s*math.exp(-r**2), 0, 12)[0])
    grid = flat_sobolev_norm(np.exp(-np.sum(Z*Z, -1)/2), s, spacing=dz)
    print(f"gauss s={s}: grid {grid} analytic {val} rel {abs(grid-val)/val:.2e}")

# --- 4. closed-form vs FFT norm, k=2 ---
f2 = CounterexampleField(2, signs=(1.0, -1.0))
x = np.linspace(-2.5, 7.5, 200, endpoint=False)
dz = x[1]-x[0]
Z = np.stack(np.meshgrid(x, x-5.0+2.5, x-5.0+2.5, indexing="ij"), axis=-1)
u0 = f2.value(0.0, Z)
for s in (0.0, 0.5, 1.0):
    a = flat_sobolev_norm(u0, s, spacing=dz)
    b = f2.sobolev_norm(s)
    print(f"k=2 s={s}: fft {a} closed {b} rel {abs(a-b)/b:.2e}")

# --- 5. dense window oracle, k=2 window j=1 ([0.25, 0.5]) ---
t0 = time.time()
fld = CounterexampleField(2, signs=(1.0, 1.0))
N = 4.0
from numpy.polynomial.legendre import leggauss
gl_x, gl_w = leggauss(8)
lo, hi = 0.25, 0.5
mid, half = 0.5*(lo+hi), 0.5*(hi-lo)
amps, cents = fld.amplitudes, fld.centers
def dense_slice(t, delta):
    s = N*N*t
    sig = math.sqrt(1+s*s)/N
    z1 = np.arange(-6*sig, 4+6*sig, delta)
    rho = np.arange(delta/2, 6*sig, delta)
    q = 1.0/(s-1j)
    w1 = N*(z1[:, None, None] - cents[None, None, :])
    w2 = N*rho[None, :, None]
    pk = amps*(s-1j)**-1.5*np.exp(0.5j*q*(w1**2+w2**2))
    g1 = 1j*N*q*np.sum(pk*w1, 2); g2 = 1j*N*q*np.sum(pk*w2, 2)
    grad2 = np.abs(g1)**2+np.abs(g2)**2
    r = np.hypot(z1[:, None], rho[None, :]); r = np.maximum(r, 1e-12)
    rad2 = np.abs(z1[:, None]*g1+rho[None, :]*g2)**2/r**2
    ang2 = np.maximum(grad2-rad2, 0)
    return 2*math.pi*np.sum(np.sqrt(ang2*grad2)/r*rho[None, :])*delta*delta
dense = sum(half*gl_w[i]*dense_slice(mid+half*gl_x[i], 0.01) for i in range(8))
print("dense window(j=1, k=2):", dense, f"({time.time()-t0:.1f}s)")
for cpw in (8, 12, 16, 24):
    vals = [mixed_gradient_integral(fld, cells_per_width=cpw, seed=s).window_values[1] for s in (0, 1)]
    print(f"  stratified cpw={cpw}: {vals} rel err {[abs(v-dense)/dense for v in vals]}")

# --- 6. seed stability + control at k=3 ---
f3 = CounterexampleField(3, signs=(1.0, -1.0, 1.0))
t0 = time.time()
a = mixed_gradient_integral(f3, seed=0)
t1 = time.time()
b = mixed_gradient_integral(f3, seed=123)
print(f"k=3 flux seed0 {a.value} seed123 {b.value} rel {abs(a.value-b.value)/a.value:.3e} ({t1-t0:.1f}s/call, {a.n_points} pts)")
c24 = mixed_gradient_integral(f3, cells_per_width=24, seed=7)
print(f"k=3 cpw24 {c24.value} rel vs cpw12 {abs(c24.value-a.value)/c24.value:.3e}")
t16 = mixed_gradient_integral(f3, t_nodes=16, seed=0)
print(f"k=3 tnodes16 {t16.value} rel {abs(t16.value-a.value)/a.value:.3e}")
ctrl = colocated_control_integral(3)
print("control k=3:", ctrl.value, "vs flux", a.value)

# --- 7. timing per k + full scaling ---
for k in (4, 5, 6):
    fk = CounterexampleField(k)
    t0 = time.time()
    fx = mixed_gradient_integral(fk, seed=1)
    print(f"k={k}: flux {fx.value} 4^k*flux {4**k*fx.value} {time.time()-t0:.1f}s {fx.n_points} pts")
t0 = time.time()
rep = counterexample_scaling()
print(f"scaling report ({time.time()-t0:.1f}s):")
print("  lhs means (norm)", [4**k*m for k, m in zip(rep.ks, rep.lhs_means)])
print("  rhs means (norm)", [4**k*m for k, m in zip(rep.ks, rep.rhs_means)])
print("  lhs_exponent", rep.lhs_exponent, "rhs_exponent", rep.rhs_exponent)
print("  control", rep.control_value, "scale", rep.control_scale)
print("  trial spread per k:", [(max(v)-min(v))/np.mean(v) for v in rep.lhs_trials])

# --- 8. sobolev fit ---
t0 = time.time()
fit = sobolev_scaling_fit()
print(f"sobolev fit exponents {fit} ({time.time()-t0:.1f}s) target (0.5, -1)")
