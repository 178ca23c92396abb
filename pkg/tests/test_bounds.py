import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ddg.bounds import (
    BOUND_KINDS,
    Bounds,
    ExtragradConfig,
    ExtragradientError,
    constrained_step,
    extragradient_solve,
    make_bounds,
    project_nodal,
    vi_certificate,
)
from ddg.experiments import checkerboard, named_potential
from ddg.forms import assemble_mass, assemble_sip, assemble_upwind
from ddg.mesh import build_uniform_square
from ddg.potential import constant_potential, linear_potential
from ddg.space import Field, create_space, interpolate, l2_project
from ddg.stepping import StepConfig, StepOperator

from oracles import active_set_vi

vec5 = arrays(np.float64, 5, elements=st.floats(-3, 3))


# -- bounds --------------------------------------------------------------------

def test_checkerboard_two_sided():
    space = create_space(build_uniform_square(8), 1)
    b = make_bounds("two-sided", interpolate(space, checkerboard(4)))
    assert np.all(b.lower == 0) and np.all(b.upper == 1)


def test_positivity_has_no_upper_limit():
    space = create_space(build_uniform_square(2), 2)
    b = make_bounds("positivity", Field.zeros(space))
    assert np.all(np.isinf(b.upper)) and np.all(b.lower == 0)


def test_time_varying_upper_tracks_field():
    space = create_space(build_uniform_square(2), 1)
    u = Field(space, np.linspace(0, 0.98363, space.num_dofs))
    assert np.all(make_bounds("time-varying-upper", u).upper == 0.98363)


def test_bounds_validation():
    with pytest.raises(ValueError):
        Bounds(np.ones(2), np.zeros(2))
    with pytest.raises(ValueError):
        Bounds(np.ones(2), np.ones(3))
    with pytest.raises(ValueError):
        make_bounds("upper-only", Field.zeros(create_space(build_uniform_square(1), 1)))
    assert set(BOUND_KINDS) == {"positivity", "two-sided", "time-varying-upper"}


def test_pinned():
    b = Bounds(np.zeros(4), np.full(4, np.inf)).pinned([1, 3], [0.5, -2.0])
    assert b.lower.tolist() == [0, 0.5, 0, -2.0]
    assert b.upper.tolist() == [np.inf, 0.5, np.inf, -2.0]


# -- projection ----------------------------------------------------------------

def test_clamp_examples():
    b = Bounds(np.zeros(3), np.ones(3))
    assert project_nodal([-0.5, 0.4, 1.3], b).tolist() == [0.0, 0.4, 1.0]
    with pytest.raises(ValueError):
        project_nodal([0.0, 1.0], b)


@given(x=vec5)
def test_projection_idempotent(x):
    b = Bounds(np.zeros(5), np.ones(5))
    once = project_nodal(x, b)
    assert np.array_equal(project_nodal(once, b), once)
    assert b.contains(once)


@given(x=vec5, y=vec5, lo=vec5, width=arrays(np.float64, 5, elements=st.floats(0, 4)))
def test_projection_non_expansive(x, y, lo, width):
    b = Bounds(lo, lo + width)
    d = np.linalg.norm(project_nodal(x, b) - project_nodal(y, b))
    assert d <= np.linalg.norm(x - y) * (1 + 1e-15) + 1e-15


def test_projection_minimal_distance_grid_search(rng):
    b = Bounds(np.zeros(5), np.ones(5))
    grid = np.linspace(0, 1, 11)
    points = np.array(list(itertools.product(grid, repeat=5)))
    for _ in range(5):
        x = np.round(rng.uniform(-1, 2, 5), 1)
        p = project_nodal(x, b)
        best = points[np.argmin(np.linalg.norm(points - x, axis=1))]
        assert np.allclose(p, best, atol=1e-12)
        assert np.linalg.norm(p - x) <= np.linalg.norm(points - x, axis=1).min() + 1e-12


# -- extragradient -------------------------------------------------------------

def six_dof_system():
    space = create_space(build_uniform_square(1), 1)
    M = assemble_mass(space)
    # no Dirichlet elimination here, so τ and the drift are kept small enough for the
    # inflow-boundary flux not to destroy monotonicity (symmetric part min eigenvalue 0.043)
    S = M + 0.01 * (assemble_sip(space, 10.0) + assemble_upwind(space, linear_potential(10.0, 10.0), 1.0))
    L = M @ np.array([1.0, 0, 0, 0, 0, 0])
    return S, L


def test_config_validation():
    for bad in (dict(gamma=0), dict(tol=-1), dict(norm="l1"), dict(norm="L2")):
        with pytest.raises(ValueError):
            ExtragradConfig(**bad)
    cfg = ExtragradConfig()
    assert (cfg.gamma, cfg.tol, cfg.max_iter) == (1e-5, 1e-6, 10**6)


def test_zero_is_fixed_point():
    S, _ = six_dof_system()
    x, iters = extragradient_solve(S, np.zeros(6), Bounds(np.zeros(6), np.full(6, np.inf)), np.zeros(6))
    assert iters == 1 and np.all(x == 0)


def test_six_dof_system_is_monotone():
    S, _ = six_dof_system()
    S = S.toarray()
    assert np.linalg.eigvalsh(0.5 * (S + S.T)).min() > 0


def test_feasible_seed_is_kept():
    S, _ = six_dof_system()
    target = np.array([0.3, 0.1, 0.2, 0.5, 0.4, 0.25])
    L = S @ target
    x, iters = extragradient_solve(S, L, Bounds(np.zeros(6), np.full(6, np.inf)), target)
    assert iters == 1
    assert np.abs(x - target).max() < 1e-6


@pytest.mark.parametrize("upper", [np.inf, 0.8])
def test_matches_active_set_oracle(upper):
    S, L = six_dof_system()
    free = np.linalg.solve(S.toarray(), L)
    assert free.min() < 0  # the drift forces negativity
    b = Bounds(np.zeros(6), np.full(6, upper))
    gamma = 1.0 / np.linalg.norm(S.toarray(), 2)
    x, _ = extragradient_solve(S, L, b, free, ExtragradConfig(gamma=gamma, tol=1e-13))
    ref = active_set_vi(S.toarray(), L, b.lower, b.upper)
    assert np.abs(x - ref).max() <= 1e-5
    assert vi_certificate(S, L, b, x, rng=0) >= -1e-6 * (1 + np.linalg.norm(L))


def test_default_gamma_on_six_dofs():
    S, L = six_dof_system()
    b = Bounds(np.zeros(6), np.full(6, np.inf))
    x, iters = extragradient_solve(S, L, b, np.linalg.solve(S.toarray(), L))
    ref = active_set_vi(S.toarray(), L, b.lower, b.upper)
    # the default step is tiny, so the l2 stopping rule fires far from the VI point
    assert b.contains(x)
    assert iters >= 1
    assert np.abs(x - ref).max() < 1.0


def test_max_iter_error():
    S, L = six_dof_system()
    b = Bounds(np.zeros(6), np.full(6, np.inf))
    with pytest.raises(ExtragradientError) as info:
        extragradient_solve(S, L, b, np.zeros(6), ExtragradConfig(gamma=1e-3, tol=1e-14, max_iter=5))
    assert info.value.iterations == 5 and info.value.increment > 0


def test_divergence_stops_early():
    S, L = six_dof_system()
    b = Bounds(np.full(6, -np.inf), np.full(6, np.inf))
    gamma = 1e3 / np.linalg.norm(S.toarray(), 2)
    with np.errstate(all="ignore"), pytest.raises(ExtragradientError) as info:
        extragradient_solve(S, L, b, np.ones(6), ExtragradConfig(gamma=gamma, tol=1e-14, max_iter=10**6))
    assert info.value.iterations < 1000
    assert not np.isfinite(info.value.increment)


@pytest.mark.parametrize("norm", ["l2", "linf", "L2"])
def test_norm_choices_agree(norm):
    S, L = six_dof_system()
    space = create_space(build_uniform_square(1), 1)
    b = Bounds(np.zeros(6), np.full(6, np.inf))
    gamma = 1.0 / np.linalg.norm(S.toarray(), 2)
    cfg = ExtragradConfig(gamma=gamma, tol=1e-13, norm=norm, mass=assemble_mass(space))
    x, _ = extragradient_solve(S, L, b, np.zeros(6), cfg)
    assert np.abs(x - active_set_vi(S.toarray(), L, b.lower, b.upper)).max() <= 1e-8


def test_certificate_detects_non_solution():
    S, L = six_dof_system()
    b = Bounds(np.zeros(6), np.full(6, np.inf))
    assert vi_certificate(S, L, b, np.full(6, 3.0), rng=1) < -1e-3


# -- constrained steps ---------------------------------------------------------

def test_constrained_equals_unconstrained_when_feasible():
    space = create_space(build_uniform_square(8), 1)
    u0 = l2_project(space, lambda x, y: 1.0 + 0 * x)
    cfg = StepConfig(0.01, scheme="backward-euler", dirichlet=lambda x, y, t, m: np.ones_like(x))
    op = StepOperator(space, cfg)
    plain = op.step(u0, constant_potential(), 0.01)
    assert plain.coeffs.min() >= 0
    info = {}
    con = constrained_step(u0, constant_potential(), cfg, make_bounds("positivity", u0), ExtragradConfig(), 0.01, op, info)
    assert info["iterations"] == 1
    assert np.abs(con.coeffs - plain.coeffs).max() <= 1e-6


@pytest.mark.parametrize("scheme", ["backward-euler", "crank-nicolson"])
def test_checkerboard_first_step(scheme):
    space = create_space(build_uniform_square(20), 1)
    u0 = interpolate(space, checkerboard(4))
    psi = named_potential("psi1")
    cfg = StepConfig(3e-4, 10.0, 1.0, scheme)
    op = StepOperator(space, cfg)
    info = {}
    bounds = make_bounds("two-sided", u0)
    u = constrained_step(u0, psi, cfg, bounds, ExtragradConfig(), 3e-4, op, info)
    assert info["unconstrained"].min() < 0
    assert u.coeffs.min() >= -1e-14
    assert u.coeffs.max() <= 1 + 1e-14
    sysm = info["system"]
    assert vi_certificate(sysm.reduced, sysm.reduced_rhs, info["bounds"], u.coeffs, rng=0) >= -1e-6 * (
        1 + np.linalg.norm(sysm.reduced_rhs)
    )


def test_dirichlet_dofs_are_pinned():
    space = create_space(build_uniform_square(6), 1)
    u0 = Field.zeros(space)
    g = lambda x, y, t, m: np.full_like(x, -0.25)
    cfg = StepConfig(0.01, dirichlet=g)
    u = constrained_step(u0, constant_potential(), cfg, make_bounds("positivity", u0), ExtragradConfig(gamma=0.5), 0.01)
    assert np.all(u.coeffs[space.boundary_mask] == -0.25)
    assert np.all(u.coeffs[~space.boundary_mask] >= 0)


def test_constrained_l2_monotone_harmonic():
    space = create_space(build_uniform_square(10), 1)
    u = interpolate(space, checkerboard(4))
    cfg = StepConfig(3e-4, 10.0, 1.0)
    op = StepOperator(space, cfg)
    psi = linear_potential(100.0, 100.0)
    M = assemble_mass(space)
    prev = u.coeffs @ (M @ u.coeffs)
    bounds = make_bounds("two-sided", u)
    for k in range(5):
        u = constrained_step(u, psi, cfg, bounds, ExtragradConfig(), 3e-4 * (k + 1), op)
        now = u.coeffs @ (M @ u.coeffs)
        assert now <= prev * (1 + 1e-10)
        prev = now
