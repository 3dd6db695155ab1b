import math, time
import numpy as np
import sys
sys.path.insert(0, "src")
from conewave.flatspace import CounterexampleField, mixed_gradient_integral

# systematic study: per k, fixed signs (all +), vary resolution
print("== resolution systematics (signs all +1) ==")
for k in (3, 4, 5, 6):
    fld = CounterexampleField(k, signs=(1.0,)*k)
    base = mixed_gradient_integral(fld, 12, 8, seed=0).value
    t16 = mixed_gradient_integral(fld, 12, 16, seed=0).value
    c16 = mixed_gradient_integral(fld, 16, 8, seed=0).value
    fine = mixed_gradient_integral(fld, 20, 16, seed=0).value
    print(f"k={k}: base {base:.6f} t16 {t16/base-1:+.2e} c16 {c16/base-1:+.2e} fine(20,16) {fine/base-1:+.2e}")

# slope with fine resolution
vals = {}
for k in (3, 4, 5, 6):
    fld = CounterexampleField(k, signs=(1.0,)*k)
    vals[k] = mixed_gradient_integral(fld, 20, 16, seed=0).value
ks = np.array([3., 4., 5., 6.])
lv = np.log([4**k*vals[k] for k in (3, 4, 5, 6)])
slope = np.polyfit(np.log(ks), lv, 1)[0]
print("fine-resolution all-plus slope:", slope)

# sign-draw distribution: per k, 16 draws at base resolution
print("== sign-draw study (cpw12,t8) ==")
t0 = time.time()
means = {}
for k in (3, 4, 5, 6):
    per = []
    for trial in range(16):
        signs = np.random.default_rng([0, k, trial]).choice([-1., 1.], size=k)
        fld = CounterexampleField(k, signs=tuple(signs))
        per.append(mixed_gradient_integral(fld, 12, 8, seed=[0, k, trial]).value)
    per = np.array(per)
    means[k] = per
    print(f"k={k}: mean {per.mean():.6f} std/mean {per.std()/per.mean():.3e} "
          f"mean4 {per[:4].mean():.6f} mean8 {per[:8].mean():.6f}")
print(f"({time.time()-t0:.0f}s)")
for n in (4, 8, 16):
    lv = np.log([4**k*means[k][:n].mean() for k in (3, 4, 5, 6)])
    print(f"slope with {n} trials:", np.polyfit(np.log(ks), lv, 1)[0])
lv = np.log([4**k*np.array([means[k][i] for i in range(16)]).mean() for k in (3,4,5,6)])
# per-window contribution profile at k=6 to see where mass sits
fld = CounterexampleField(6, signs=(1.0,)*6)
fx = mixed_gradient_integral(fld, 12, 8, seed=0)
print("k=6 window values:", [f"{v:.4e}" for v in fx.window_values])
