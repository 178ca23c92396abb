"""Two oppositely charged species coupled through a Poisson solve.

A reduced version of the PNP experiment (8 x 8 criss-cross mesh, larger
Debye length so the coarse mesh stays stable) that runs in well under a
minute.  Each step advances the positive species in the previous potential,
the negative species in the negated potential, then solves for the new
potential.  The constrained run keeps both densities nodally non-negative.

    python3 demos/04_pnp_reduced.py
"""

from ddg.experiments import PNP_COLUMNS, config_from_dict, pnp_series

cfg = config_from_dict({
    "experiment": "pnp", "mesh_n": 8, "eps": 3e-3, "gamma": 0.5, "extragrad_tol": 1e-10,
    "t_final": 0.1, "unconstrained_twin": True,
})
col = {name: i for i, name in enumerate(PNP_COLUMNS)}
for constrained in (True, False):
    rows = pnp_series(cfg, constrained)
    print("constrained" if constrained else "unconstrained")
    for r in rows[::4]:
        print(f"  t={r[col['t']]:.3f}  rho min {r[col['rho_min']]:+.3e}  nu min {r[col['nu_min']]:+.3e}  "
              f"psi range [{r[col['psi_min']]:+.2f}, {r[col['psi_max']]:+.2f}]")
