import math, time
import numpy as np
import sys
sys.path.insert(0, "src")
from conewave.flatspace import CounterexampleField, mixed_gradient_integral

print("== t-convergence with octave windows (signs all +1, cpw 12) ==")
for k in (3, 4, 5, 6):
    fld = CounterexampleField(k, signs=(1.0,)*k)
    t0 = time.time()
    v8 = mixed_gradient_integral(fld, 12, 8, seed=0).value
    dt = time.time()-t0
    v16 = mixed_gradient_integral(fld, 12, 16, seed=0).value
    v24 = mixed_gradient_integral(fld, 12, 24, seed=0).value
    print(f"k={k}: v8 {v8:.6f} ({dt:.1f}s) v16 {v16/v8-1:+.2e} v24 {v24/v8-1:+.2e}")

print("== spatial convergence at t16 ==")
for k in (4, 5, 6):
    fld = CounterexampleField(k, signs=(1.0,)*k)
    a = mixed_gradient_integral(fld, 12, 16, seed=0).value
    b = mixed_gradient_integral(fld, 20, 16, seed=0).value
    c = mixed_gradient_integral(fld, 20, 16, seed=5).value
    print(f"k={k}: cpw12 {a:.6f} cpw20 {b/a-1:+.2e} cpw20seed5 {c/a-1:+.2e}")

ks = np.array([3., 4., 5., 6.])
print("== slopes (all-plus) ==")
for cpw, tn in ((12, 8), (12, 16), (20, 16)):
    vals = []
    for k in (3, 4, 5, 6):
        fld = CounterexampleField(k, signs=(1.0,)*k)
        vals.append(mixed_gradient_integral(fld, cpw, tn, seed=0).value)
    lv = np.log([4**k*v for k, v in zip((3, 4, 5, 6), vals)])
    print(f"cpw{cpw} t{tn}: slope {np.polyfit(np.log(ks), lv, 1)[0]:.5f}  vals {[f'{v:.5f}' for v in vals]}")

print("== sign-averaged slope at (12, 16), 8 draws ==")
t0 = time.time()
means = []
for k in (3, 4, 5, 6):
    per = []
    for trial in range(8):
        signs = np.random.default_rng([0, k, trial]).choice([-1., 1.], size=k)
        fld = CounterexampleField(k, signs=tuple(signs))
        per.append(mixed_gradient_integral(fld, 12, 16, seed=[0, k, trial]).value)
    means.append(np.mean(per))
    print(f"k={k}: mean8 {means[-1]:.6f} spread {(max(per)-min(per))/means[-1]:.2e}")
lv = np.log([4**k*m for k, m in zip((3, 4, 5, 6), means)])
print(f"slope {np.polyfit(np.log(ks), lv, 1)[0]:.5f} ({time.time()-t0:.0f}s)")
lv4 = np.log([4**k*np.mean([0, 0, 0, 0]) for k in ()]) if False else None
means4 = []
for i, k in enumerate((3, 4, 5, 6)):
    pass
