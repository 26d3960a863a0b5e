"""Newton, incremental Newton and SN on an a8a-like problem.

Runs the three methods from x0 = 0 with lambda = 1/(100 rows) and prints how
many epochs (passes over the 10 components) each needs to reach a given
suboptimality.  Pass a libsvm file as the first argument to use real data.

    python demos/newton_family.py [path/to/a8a]
"""
import sys

from stochnewton import harness

common = dict(lam="1/(100n)", x0="zeros", stop_tol=1e-10)
if len(sys.argv) > 1:
    common.update(dataset=sys.argv[1], dim=123, parts=10)
else:
    common.update(synth="binary", rows=3000, d=123, density=0.11, n=10)

configs = [
    harness.make_config(dict(common, method="newton", max_iters=50)),
    harness.make_config(dict(common, method="inc_newton", max_iters=500)),
    harness.make_config(dict(common, method="sn", tau=1, seed=0, max_iters=500)),
]
results = harness.compare([c.validate() for c in configs])


def epochs_to(trace, level):
    return next((r.epochs for r in trace if r.f_sub <= level), float("nan"))


levels = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10]
print(f"{'method':<12s}" + "".join(f"{lv:>10.0e}" for lv in levels))
for res in results:
    print(f"{res.method:<12s}" + "".join(f"{epochs_to(res.trace, lv):>10.2f}" for lv in levels))
print("\nentries are epochs to reach f - f* <= level")
