import numpy as np
from numpy.polynomial import Polynomial

from occurelax.assemble import assemble_relaxation, induced_weights
from occurelax.basis import build_test_basis
from occurelax.discretize import build_discretization, select_feasible_atoms
from occurelax.dsl import parse_problem
from occurelax.lp import solve_lp

CONSTANT = """\
occurelax-problem v1

[domain]
n = 1
omega = 0 1

[spaces]
m = 1
y_box = -1 1
z_box = -1 1

[objective]
L = 1
"""

AFFINE_TRACK = """\
occurelax-problem v1

[domain]
n = 1
omega = 0 1

[spaces]
m = 1
y_box = 0 1
z_box = 0 2

[objective]
L = z11^2
"""

WEAK_2D = """\
occurelax-problem v1

[domain]
n = 2
omega = 0 1 0 1

[spaces]
m = 1
y_box = -1 1
z_box = -2 2 -2 2

[objective]
L = z11^2 + z12^2

[constraints]
weak compact = z11 ; z12
"""

FOUR_POINT = """\
occurelax-problem v1

[domain]
n = 1
omega = 0 1

[spaces]
m = 2
y_box = -1 1 -1 1
z_box = -1 1 -1 1

[objective]
L = y1*y2 + z11^2 + z21^2

[constraints]
A = y1^2 - 1
A = y2^2 - 1
C = -y1*y2
"""


def problem_of(text):
    result = parse_problem(text)
    assert result.ok, result.diagnostics
    return result.problem


def assemble(text, res_x=4, res_y=3, res_z=3, mode="affine", d_x=1, d_y=0, eps=None):
    p = problem_of(text)
    d = build_discretization(p, res_x=res_x, res_y=res_y, res_z=res_z)
    d = select_feasible_atoms(p, d, **(eps or {}))
    tb = build_test_basis(p.omega, p.m, mode, d_x, d_y)
    return p, d, assemble_relaxation(p, d, tb)


def test_mass_row_structure():
    p, d, lp = assemble(CONSTANT)
    assert lp.row_tags.count("mass") == 1
    i = lp.row_tags.index("mass")
    assert lp.b[i] == 1.0
    assert np.all(lp.A[i, : d.n_bulk] == 1.0)
    assert np.all(lp.A[i, d.n_bulk :] == 0.0)


def test_constant_objective_value_is_volume():
    _, _, lp = assemble(CONSTANT)
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.value - 1.0) < 1e-9


def test_liouville_row_count_1d():
    _, _, lp = assemble(CONSTANT, d_x=1)
    assert lp.row_tags.count("liouville") == 4


def test_induced_measure_rows_match_quadrature_error_oracle():
    # y(x) = 0.25 + 0.5 x on aligned grids; every Liouville row residual must
    # equal the midpoint-rule quadrature error of its integrand exactly.
    p = problem_of(AFFINE_TRACK)
    res = 8
    # y grid j/32 contains 0.25 + 0.5*(2k+1)/16 exactly; z grid {0,.5,1,1.5,2}
    d = build_discretization(p, res_x=res, res_y=4 * res + 1, res_z=5)
    d = select_feasible_atoms(p, d)
    tb = build_test_basis(p.omega, p.m, "affine", d_x=4)
    lp = assemble_relaxation(p, d, tb)
    w = induced_weights(d, lambda x: [0.25 + 0.5 * x[0]], lambda x: [[0.5]], require_exact=True)
    resid = lp.A @ w - lp.b

    y_poly = Polynomial([0.25, 0.5])
    centers = d.cell_centers[:, 0]
    vol = d.cell_volumes
    row = 1  # rows 0.. = mass, then Liouville entries in basis order
    for entry in tb.entries:
        x_poly = tb._axis_poly(0, entry.x_alpha[0], False)
        beta = entry.y_beta[0]
        integrand = x_poly.deriv() * y_poly**beta
        if beta:
            integrand = integrand + beta * x_poly * y_poly ** (beta - 1) * Polynomial([0.5])
        exact = integrand.integ()(1.0) - integrand.integ()(0.0)
        midpoint = float(np.sum(vol * integrand(centers)))
        assert abs(resid[row] - (midpoint - exact)) < 1e-12, entry
        row += 1


def test_weak_family_row_coefficients():
    p, d, lp = assemble(WEAK_2D, res_x=(2, 2), res_y=2, res_z=(2, 2), d_x=1)
    rows = [i for i, t in enumerate(lp.row_tags) if t == "support-integralized"]
    assert rows  # one per compact entry
    tb = build_test_basis(p.omega, p.m, "affine", 1)
    coords = d.bulk_coordinates()
    entry = tb.compact_entries[0]
    want = (
        tb.dphi_dx(entry, coords["x"], coords["y"], 0) * coords["z"][:, 0, 0]
        + tb.dphi_dx(entry, coords["x"], coords["y"], 1) * coords["z"][:, 0, 1]
    )
    assert np.allclose(lp.A[rows[0], : d.n_bulk], want)
    assert np.all(lp.A[rows[0], d.n_bulk :] == 0.0)


def test_assembly_deterministic():
    _, _, lp1 = assemble(FOUR_POINT, res_x=3, res_y=(3, 3), res_z=(3, 3), d_x=2)
    _, _, lp2 = assemble(FOUR_POINT, res_x=3, res_y=(3, 3), res_z=(3, 3), d_x=2)
    assert np.array_equal(lp1.A, lp2.A)
    assert np.array_equal(lp1.b, lp2.b)
    assert np.array_equal(lp1.c, lp2.c)
    assert lp1.row_names == lp2.row_names


def test_nonlinear_basis_value_at_least_affine():
    p = problem_of(FOUR_POINT)
    d = build_discretization(p, res_x=4, res_y=(3, 3), res_z=(3, 3))
    d = select_feasible_atoms(p, d)
    aff = assemble_relaxation(p, d, build_test_basis(p.omega, p.m, "affine", 2))
    non = assemble_relaxation(p, d, build_test_basis(p.omega, p.m, "nonlinear", 2, 2))
    va = solve_lp(aff)
    vn = solve_lp(non)
    assert va.status == "optimal" and vn.status == "optimal"
    assert vn.value >= va.value - 1e-9


def test_tightening_eps_never_decreases_value():
    text = CONSTANT.replace("L = 1", "L = -y1").replace(
        "[objective]", "[constraints]\nB = y1 - 0.4\n\n[objective]"
    )
    p = problem_of(text)

    def value(eps_ineq):
        d = build_discretization(p, res_x=2, res_y=3, res_z=2)
        d = select_feasible_atoms(p, d, eps_ineq=eps_ineq)
        lp = assemble_relaxation(p, d, build_test_basis(p.omega, p.m, "affine", 1))
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        return sol.value

    assert value(1e-9) >= value(0.2) - 1e-9
