"""Energy-norm convergence against the manufactured smooth solution.

Runs the P1 study on the three coarsest meshes with the shipped defaults
(tau = diam^2, final time 0.5) and prints the observed rates, which should
approach 2.  Pass ``2`` as an argument for P2 (rates near 3, slower).

    python3 demos/02_convergence_study.py [degree]
"""

import sys

import numpy as np

from ddg.experiments import config_from_dict, convergence_point

degree = int(sys.argv[1]) if len(sys.argv) > 1 else 1
ns = [4, 8, 16] if degree == 1 else [4, 8]
cfg = config_from_dict({"experiment": "convergence", "degree": degree, "refinements": ns})

prev = None
print(f"P{degree}: {'n':>4} {'tau':>10} {'steps':>6} {'error':>12} {'rate':>6} {'seconds':>8}")
for n in ns:
    err, wall, tau, steps = convergence_point(cfg, n)
    rate = "" if prev is None else f"{np.log2(prev / err):6.3f}"
    print(f"    {n:4d} {tau:10.3e} {steps:6d} {err:12.5e} {rate:>6} {wall:8.2f}")
    prev = err
