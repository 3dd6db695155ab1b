import math, time
import numpy as np
import sys
sys.path.insert(0, "src")
from conewave.flatspace import CounterexampleField, mixed_gradient_integral

ks = (3, 4, 5, 6)
t0 = time.time()
means = []
for k in ks:
    per = []
    for trial in range(8):
        signs = np.random.default_rng([0, k, trial]).choice([-1., 1.], size=k)
        fld = CounterexampleField(k, signs=tuple(signs))
        per.append(mixed_gradient_integral(fld, 16, 32, seed=[0, k, trial]).value)
    means.append(np.mean(per))
    print(f"k={k}: mean8(cpw16,t32) {means[-1]:.6f} spread {(max(per)-min(per))/means[-1]:.2e} [{time.time()-t0:.0f}s]")
lv = np.log([4**k*m for k, m in zip(ks, means)])
lk = np.log(np.array(ks, dtype=float))
print("TRUTH slope:", np.polyfit(lk, lv, 1)[0])
print("normalized means:", [4**k*m for k, m in zip(ks, means)])
# local slopes
for i in range(3):
    print(f"local slope {ks[i]}->{ks[i+1]}:", (lv[i+1]-lv[i])/(lk[i+1]-lk[i]))
# k=7 trend point, all-plus and 2 sign draws
t0 = time.time()
f7 = CounterexampleField(7, signs=(1.,)*7)
v7 = mixed_gradient_integral(f7, 12, 16, seed=0).value
print(f"k=7 all-plus: {v7:.6f} norm {4**7*v7:.2f} ({time.time()-t0:.0f}s)")
f6 = CounterexampleField(6, signs=(1.,)*6)
v6 = mixed_gradient_integral(f6, 12, 16, seed=0).value
print("local slope 6->7 (all-plus):", (math.log(4**7*v7) - math.log(4**6*v6))/(math.log(7)-math.log(6)))
