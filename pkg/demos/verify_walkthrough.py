"""Watch the Lyapunov relations hold on live SN and SCN iterates.

A 4-component logistic problem with ridge 0.5 has certified constants
mu = 0.5 and H (a bound on the Hessian's Lipschitz constant).  Anchors start
inside the local basin, so every check applies: the exact expected-value
identity, the one-step bounds, and the per-step contraction factors.
"""
from stochnewton import harness

base = dict(synth="logistic", n=4, d=2, lam="0.5", synth_seed=7, tau=2, seed=0)
problem = harness.build_problem(harness.make_config(dict(base, method="sn")))
mu, H = harness.certified_constants(problem)
print(f"certified mu={mu:g}  H={H:.4g}  SN basin radius mu/H={mu / H:.3f}\n")

for extra in (dict(method="sn", x0="near:1.0"), dict(method="scn", M=H, x0="near:0.3")):
    cfg = harness.make_config(dict(base, **extra)).validate()
    report = harness.verify(cfg, steps=4)
    print(f"--- {cfg.method} ---")
    print("\n".join(report.lines()))
    print()

# below the certified H the SCN bounds no longer apply and are skipped, not passed
cfg = harness.make_config(dict(base, method="scn", M=H / 10, x0="near:0.3")).validate()
print("\n".join(harness.verify(cfg, steps=1).lines()))
