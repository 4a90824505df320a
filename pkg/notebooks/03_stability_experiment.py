"""
Nonlinear orbital stability experiment
======================================

Perturbs the reference profile by the zero-mass family ``h_J`` and tracks
the weighted norms of ``u^n - u_bar``.  The slopes of the log-log envelopes
are compared with the algebraic rates ``-p1`` and ``-p_inf`` for the five
parameter presets.  CSV and SVG output goes to the directory given as the
first argument (default ``notebook_out``).

Run with ``python notebooks/03_stability_experiment.py [out_dir]``.
"""

import os
import sys
import time

from dspstab import make_mlf, preset, run_experiment, shock_pair, solve_family
from dspstab.report import loglog_svg, write_csv

out_dir = sys.argv[1] if len(sys.argv) > 1 else "notebook_out"
os.makedirs(out_dir, exist_ok=True)

scheme = make_mlf(0.5, 0.8)
family = solve_family(scheme, shock_pair(scheme, 1.0, -1.0))

# %% five presets; the slack follows the acceptance criterion (0.1 in l1, 0.15 in l_inf)
rows = []
for choice, p in [(1, 0.3), (1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0)]:
    t0 = time.perf_counter()
    rep = run_experiment(scheme, family, preset(choice, p), range(1, 51), n_max=2000,
                         slack={"l1": 0.1, "linf": 0.15})
    dt = time.perf_counter() - t0
    print(f"choice {choice}, p = {p:.1f}: slopes {rep.slopes['l1']:+.3f} (target {rep.targets['l1']:+.2f}), "
          f"{rep.slopes['linf']:+.3f} (target {rep.targets['linf']:+.2f}), window {rep.window}, "
          f"{rep.verdicts}, {dt:.1f}s")
    rows.append((choice, p, rep.slopes["l1"], rep.targets["l1"], rep.slopes["linf"], rep.targets["linf"]))
    for k, env in (("l1", rep.log_env_l1), ("linf", rep.log_env_linf)):
        name = os.path.join(out_dir, f"choice{choice}_p{p:g}_{k}.svg")
        with open(name, "w", newline="\n") as fh:
            fh.write(loglog_svg(rep.n, env, rep.targets[k], rep.window, f"choice {choice}, p={p:g}, {k}"))

write_csv(os.path.join(out_dir, "slopes_table.csv"),
          ("choice", "p", "slope_l1", "target_l1", "slope_linf", "target_linf"), rows)
print("written to", out_dir)
