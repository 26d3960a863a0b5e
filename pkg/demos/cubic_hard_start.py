"""How small can M be?  SCN against full cubic Newton from a far start.

Both methods start at x0 = 0.5 * ones, far from the optimum, and get the
same budget of 200 epochs.  For each M the table says whether f - f*
reached 1e-10 and after how many epochs.  Small M means long, Newton-like
steps; cubic Newton needs a larger M to stay stable from this start.
"""
import dataclasses

from stochnewton import harness

grid = [1e-8, 1e-6, 1e-5, 1e-4, 3e-4, 1e-3]
cubic = harness.make_config(dict(synth="binary", rows=3000, d=123, density=0.11, n=10, lam="1/(10000n)",
                                 x0="const:0.5", stop_tol=1e-10, method="cubic_newton", M=1.0,
                                 max_iters=200)).validate()
scn = dataclasses.replace(cubic, method="scn", tau=1, max_iters=2000)

problem = harness.build_problem(cubic)
ref = harness.reference_for(cubic, problem)
for cfg in (cubic, scn):
    best, table = harness.tune_M(cfg, grid, problem, ref)
    print(f"\n{cfg.method}")
    for row in table:
        status = f"{row.epochs:7.1f} epochs" if row.converged else "   no convergence"
        print(f"  M={row.M:<8g} {status}   final f-f*={row.f_sub:.2e}")
    print(f"  smallest convergent M: {harness.smallest_convergent_M(table):g}, fastest: {best:g}")
