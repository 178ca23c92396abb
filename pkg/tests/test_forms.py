import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ddg.diagnostics import sip_norm, upwind_energy_identity_residual
from ddg.forms import (
    apply_strong_dirichlet,
    assemble_load,
    assemble_mass,
    assemble_sip,
    assemble_upwind,
    dirichlet_values,
)
from ddg.mesh import build_uniform_square, from_cells
from ddg.potential import (
    DiscretePotential,
    constant_potential,
    linear_potential,
    polynomial_potential,
)
from ddg.space import Field, create_space, interpolate

from oracles import Oracle, constrained_solve_by_substitution


def single_triangle():
    return from_cells(np.array([[0, 0], [1, 0], [0, 1.0]]), [[0, 1, 2]])


def skew_mesh():
    """Four cells of different sizes around an off-centre vertex."""
    v = np.array([[0, 0], [1, 0], [1.3, 1.1], [0, 1], [0.62, 0.41]])
    return from_cells(v, [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])


MESHES = {"two-cell": lambda: build_uniform_square(1), "skew": skew_mesh}
QUAD_PSI = {(1, 0): 0.7, (0, 1): -1.3, (2, 0): 2.0, (1, 1): -0.5, (0, 2): 1.1}


def quad_psi_grad(x, y):
    return np.array([0.7 + 4.0 * x - 0.5 * y, -1.3 - 0.5 * x + 2.2 * y])


@pytest.fixture(scope="module", params=[(m, p) for m in MESHES for p in (1, 2)], ids=lambda t: f"{t[0]}-p{t[1]}")
def oracle_case(request):
    name, p = request.param
    mesh = MESHES[name]()
    return create_space(mesh, p), Oracle(mesh.vertices, mesh.cells, p)


# -- mass ----------------------------------------------------------------------

def test_mass_single_triangle_row_sums():
    M = assemble_mass(create_space(single_triangle(), 1)).toarray()
    assert np.allclose(M.sum(1), 1 / 6, atol=1e-15)


def test_mass_spd(small_space, rng):
    M = assemble_mass(small_space)
    assert abs(M - M.T).max() <= 1e-15
    for _ in range(20):
        x = rng.standard_normal(small_space.num_dofs)
        assert x @ (M @ x) > 0


def test_mass_oracle(oracle_case):
    space, oracle = oracle_case
    assert np.abs(assemble_mass(space).toarray() - oracle.mass()).max() <= 1e-12


# -- SIP -----------------------------------------------------------------------

def test_sip_oracle(oracle_case):
    space, oracle = oracle_case
    A = assemble_sip(space, 10.0).toarray()
    assert np.abs(A - oracle.sip(10.0)).max() <= 1e-12


def test_sip_random_field_energy_matches_oracle(rng):
    mesh = build_uniform_square(1)
    space = create_space(mesh, 1)
    oracle = Oracle(mesh.vertices, mesh.cells, 1)
    A, Ao = assemble_sip(space, 10.0), oracle.sip(10.0)
    for _ in range(5):
        w = rng.standard_normal(space.num_dofs)
        assert abs(w @ (A @ w) - w @ Ao @ w) <= 1e-12 * max(1.0, abs(w @ Ao @ w))


def test_sip_continuous_hat_has_no_facet_terms():
    mesh = build_uniform_square(1)
    space = create_space(mesh, 1)
    w = interpolate(space, lambda x, y: 1 + x - 2 * y, inward=0.0)
    A = assemble_sip(space, 37.0)
    # ∫|∇w|² = 1 + 4 over the unit square
    assert w.coeffs @ (A @ w.coeffs) == pytest.approx(5.0, abs=1e-12)


def test_sip_constant_in_kernel(small_space):
    A = assemble_sip(small_space, 10.0)
    assert np.abs(A @ np.ones(small_space.num_dofs)).max() <= 1e-11


def test_sip_symmetric(small_space):
    A = assemble_sip(small_space, 10.0)
    assert abs(A - A.T).max() <= 1e-12


@pytest.mark.parametrize("pattern", ["right-diagonal", "criss-cross"])
def test_sip_coercivity(pattern, rng):
    space = create_space(build_uniform_square(4, pattern), 1)
    A = assemble_sip(space, 10.0)
    ratios = []
    for _ in range(1000):
        w = rng.standard_normal(space.num_dofs)
        energy = w @ (A @ w)
        assert energy >= 0
        ratios.append(energy / sip_norm(Field(space, w), 10.0) ** 2)
    assert min(ratios) > 0


# -- upwind --------------------------------------------------------------------

def test_upwind_oracle(oracle_case):
    space, oracle = oracle_case
    psi = polynomial_potential(QUAD_PSI)
    B = assemble_upwind(space, psi, 1.0).toarray()
    assert np.abs(B - oracle.upwind(quad_psi_grad, 1.0)).max() <= 1e-12


def test_upwind_oracle_mu_half():
    mesh = skew_mesh()
    space = create_space(mesh, 1)
    oracle = Oracle(mesh.vertices, mesh.cells, 1)
    psi = linear_potential(3.0, -2.0)
    B = assemble_upwind(space, psi, 0.5).toarray()
    Bo = oracle.upwind(lambda x, y: np.array([3.0, -2.0]), 0.5)
    assert np.abs(B - Bo).max() <= 1e-12


def test_upwind_constant_potential_is_zero(small_space):
    B = assemble_upwind(small_space, constant_potential(4.2), 1.0)
    assert abs(B).max() == 0.0


def test_upwind_owner_swap_invariance():
    mesh = build_uniform_square(1)
    swapped = from_cells(mesh.vertices, mesh.cells[::-1].copy())
    psi = polynomial_potential(QUAD_PSI)
    for p in (1, 2):
        B = assemble_upwind(create_space(mesh, p), psi, 1.0).toarray()
        Bs = assemble_upwind(create_space(swapped, p), psi, 1.0).toarray()
        m = 3 * p
        perm = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
        assert np.abs(B - Bs[np.ix_(perm, perm)]).max() <= 1e-14


def _boundary_zero_field(space, rng):
    w = rng.standard_normal(space.num_dofs)
    w[space.boundary_mask] = 0.0
    return Field(space, w)


def test_upwind_energy_identity_linear_potential(rng):
    space = create_space(build_uniform_square(6), 1)
    psi = linear_potential(100.0, 100.0)
    for _ in range(10):
        w = _boundary_zero_field(space, rng)
        assert upwind_energy_identity_residual(w, psi, 1.0) <= 1e-10


@given(
    coeffs=st.lists(st.floats(-3, 3), min_size=10, max_size=10),
    mu=st.floats(0, 2),
    p=st.sampled_from([1, 2]),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=25, deadline=None)
def test_upwind_energy_identity_cubic(coeffs, mu, p, seed):
    space = create_space(build_uniform_square(3, "criss-cross"), p)
    powers = [(i, j) for i in range(4) for j in range(4 - i)]
    psi = polynomial_potential(dict(zip(powers, coeffs)))
    w = _boundary_zero_field(space, np.random.default_rng(seed))
    scale = max(1.0, np.abs(w.coeffs).max() ** 2 * max(1.0, max(map(abs, coeffs))))
    assert upwind_energy_identity_residual(w, psi, mu) <= 1e-10 * scale


def test_upwind_discrete_potential_matches_equivalent_analytic(small_space):
    # a P1 field that interpolates a linear function is continuous, so the
    # averaged facet gradient equals the analytic one
    psi_field = interpolate(small_space, lambda x, y: 2 * x - 5 * y, inward=0.0)
    Bd = assemble_upwind(small_space, DiscretePotential(psi_field), 1.0)
    Ba = assemble_upwind(small_space, linear_potential(2.0, -5.0), 1.0)
    assert abs(Bd - Ba).max() <= 1e-12


def test_upwind_negated_potential():
    space = create_space(build_uniform_square(2), 2)
    psi = polynomial_potential(QUAD_PSI)
    field = interpolate(space, lambda x, y: x * y - x)
    for pot in (psi, DiscretePotential(field)):
        plus = assemble_upwind(space, pot, 0.0)
        minus = assemble_upwind(space, -pot, 0.0)
        # with μ = 0 the form is linear in ψ
        assert abs(plus + minus).max() <= 1e-12


# -- load ----------------------------------------------------------------------

def test_load_zero_and_one():
    space = create_space(single_triangle(), 1)
    assert np.all(assemble_load(space, lambda x, y, t: 0.0 * x) == 0)
    assert np.allclose(assemble_load(space, lambda x, y, t: 1.0 + 0 * x), 1 / 6, atol=1e-15)


def test_load_oracle(oracle_case):
    space, oracle = oracle_case
    f = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    ref = oracle.load(f)
    # the adaptive oracle is accurate to round-off, so compare with a rule whose
    # truncation error is below the tolerance as well
    L = assemble_load(space, lambda x, y, t: f(x, y), degree=24)
    assert np.abs(L - ref).max() <= 1e-12
    # the default rule is close but pays a truncation error on unit-size cells
    assert np.abs(assemble_load(space, lambda x, y, t: f(x, y)) - ref).max() <= 1e-4


# -- Dirichlet -----------------------------------------------------------------

def test_dirichlet_homogeneous(small_space, rng):
    A = assemble_mass(small_space) + assemble_sip(small_space, 10.0)
    b = rng.standard_normal(small_space.num_dofs)
    Ar, br = apply_strong_dirichlet(A, b, small_space)
    mask = small_space.boundary_mask
    assert np.all(br[mask] == 0)
    eye_rows = Ar.toarray()[mask]
    assert np.array_equal(eye_rows, np.eye(small_space.num_dofs)[mask])
    assert abs(Ar - Ar.T).max() <= 1e-12
    x = sp.linalg.spsolve(sp.csc_matrix(Ar), br)
    assert np.all(x[mask] == 0)


def test_dirichlet_hole_data_at_quarter():
    from ddg.experiments import hole_boundary_data

    mesh = skew_mesh()
    space = create_space(mesh, 1)
    vals = hole_boundary_data(np.zeros(3), np.zeros(3), 0.25, np.array([1, 2, 2]))
    assert vals.tolist() == [0.0, 0.5, 0.5]


def test_dirichlet_smallest_marker_wins():
    space = create_space(build_uniform_square(1), 1)
    g = lambda x, y, t, marker: marker.astype(float)
    vals = dirichlet_values(space, g, 0.0)
    idx = np.flatnonzero(space.boundary_mask)
    xy = space.node_coords[idx]
    cell = space.cell_of_dof(idx)

    def at(k, px, py):
        return vals[(cell == k) & np.isclose(xy[:, 0], px) & np.isclose(xy[:, 1], py)]

    # cell 0 holds the bottom (1) and right (2) facets, cell 1 the top (3) and left (4)
    assert at(0, 1, 0).tolist() == [1.0]  # on both 1 and 2
    assert at(0, 0, 0).tolist() == [1.0]
    assert at(0, 1, 1).tolist() == [2.0]
    assert at(1, 0, 1).tolist() == [3.0]  # on both 3 and 4
    assert at(1, 0, 0).tolist() == [4.0]
    assert at(1, 1, 1).tolist() == [3.0]


@pytest.mark.parametrize("p", [1, 2])
def test_dirichlet_matches_substitution(p, rng):
    mesh = skew_mesh()
    space = create_space(mesh, p)
    A = (assemble_mass(space) + 0.1 * (assemble_sip(space, 10.0) + assemble_upwind(space, linear_potential(1.0, 2.0), 1.0))).toarray()
    b = rng.standard_normal(space.num_dofs)
    gvals = rng.standard_normal(int(space.boundary_mask.sum()))
    table = dict(zip(map(tuple, np.round(space.node_coords[space.boundary_mask], 12)), gvals))

    def g(x, y, t, marker):
        return np.array([table[(round(a, 12), round(c, 12))] for a, c in zip(x, y)])

    Ar, br = apply_strong_dirichlet(sp.csr_matrix(A), b, space, g)
    x = np.linalg.solve(Ar.toarray(), br)
    oracle = Oracle(mesh.vertices, mesh.cells, p)
    bdofs = oracle.boundary_dofs()
    assert np.array_equal(bdofs, np.flatnonzero(space.boundary_mask))
    ref = constrained_solve_by_substitution(A, b, bdofs, dirichlet_values(space, g, 0.0))
    assert np.abs(x - ref).max() <= 1e-12
