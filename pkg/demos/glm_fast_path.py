"""The O(d^2) GLM update against the generic O(d^3) SN step.

For logistic regression every component Hessian is rank one plus the ridge,
so the inverse of the averaged Hessian can be carried along with one
Sherman-Morrison update per step.  Both variants share a seed and therefore
the same index sequence; their iterates agree to rounding.
"""
import time

import numpy as np

from stochnewton import glm_init, glm_step, sn_init, sn_step, synth_logistic
from stochnewton.glm_fast import inverse_residual

for d in (20, 100, 300):
    p = synth_logistic(0, 200, d, 1e-2)
    fast, slow = glm_init(p, np.zeros(d), seed=1), sn_init(p, np.zeros(d), 1, seed=1)
    gap = 0.0
    t_fast = t_slow = 0.0
    for _ in range(200):
        t0 = time.perf_counter()
        xf = glm_step(fast, p)
        t1 = time.perf_counter()
        xs = sn_step(slow, p)
        t2 = time.perf_counter()
        t_fast += t1 - t0
        t_slow += t2 - t1
        gap = max(gap, np.linalg.norm(xf - xs) / np.linalg.norm(xs))
    print(f"d={d:<4d} generic {1e3 * t_slow / 200:7.3f} ms/step   fast {1e3 * t_fast / 200:7.3f} ms/step   "
          f"max rel gap {gap:.1e}   |BH - I| {inverse_residual(fast, p):.1e}")
