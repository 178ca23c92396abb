"""Symbolic derivation of the manufactured forcing, checked against ddg.manufactured.

    python3 tools/derive_forcing.py
"""

import numpy as np
import sympy as sp

from ddg import manufactured

x, y, t = sp.symbols("x y t", real=True)
u = sp.sin(sp.pi * t) * sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
psi = sp.sin(sp.pi * t) * sp.cos(sp.pi * x) * sp.cos(sp.pi * y)

flux = [sp.diff(u, x) + u * sp.diff(psi, x), sp.diff(u, y) + u * sp.diff(psi, y)]
f = sp.simplify(sp.diff(u, t) - sp.diff(flux[0], x) - sp.diff(flux[1], y))
print("f =", f)

fn = sp.lambdify((x, y, t), f, "numpy")
rng = np.random.default_rng(0)
pts = rng.random((3, 1000))
diff = np.abs(fn(*pts) - manufactured.forcing(*pts)).max()
print(f"max |f_sympy - f_module| on 1000 random points: {diff:.2e}")
assert diff < 1e-11
