import numpy as np
import pytest

import bdlab
from bdlab import InputError, NotSolvableError


def unit_grid(n=33):
    return bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (n, n))


def test_classification_tags():
    assert bdlab.classify_inclusion(np.zeros((2, 2))).tag == "Trivial"
    assert bdlab.classify_inclusion(np.diag([2.0, 0.0])).tag == "Degenerate"
    assert bdlab.classify_inclusion(np.diag([1.0, -3.0])).tag == "OppositeSign"
    assert bdlab.classify_inclusion(np.eye(2)).tag == "Elliptic"


def test_classification_frame_is_rotation():
    P = np.array([[1.0, 0.7], [0.7, -0.4]])
    case = bdlab.classify_inclusion(P)
    F = case.frame
    assert np.allclose(F @ F.T, np.eye(2), atol=1e-12)
    assert np.linalg.det(F) == pytest.approx(1.0, abs=1e-12)
    # frame diagonalizes P with the stated eigenvalues: Q P Q^T = diag
    D = F @ P @ F.T
    assert np.allclose(np.diag(case.eigen), D, atol=1e-9)


def test_profile_domain_check():
    p = bdlab.Profile1D.from_function(np.sin, 0.0, 1.0)
    with pytest.raises(InputError):
        p(np.array([1.5]))


def test_opposite_sign_solution_residual():
    P = bdlab.sym_dyad([1, 0], [0, 1]).array
    g = unit_grid(65)
    h1 = bdlab.Profile1D.from_function(np.sin, -4.0, 4.0)
    h2 = bdlab.Profile1D.from_function(np.cos, -4.0, 4.0)
    u, gvals, residual = bdlab.solve_opposite_sign(P, h1, h2, g)
    assert residual < 5e-3


def test_opposite_sign_order():
    P = bdlab.sym_dyad([1, 0], [0, 1]).array
    h1 = bdlab.Profile1D.from_function(np.sin, -4.0, 4.0)
    h2 = bdlab.Profile1D.from_function(np.cos, -4.0, 4.0)
    errs = []
    for n in (33, 65, 129):
        _, _, residual = bdlab.solve_opposite_sign(P, h1, h2, unit_grid(n))
        errs.append(residual)
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_degenerate_needs_nonzero_eigenvalue():
    h = bdlab.Profile1D.from_function(lambda s: np.zeros_like(s), 0.0, 1.0)
    with pytest.raises(InputError):
        bdlab.solve_degenerate(0.0, h, h, unit_grid(17))


def test_degenerate_inclusion_is_satisfied():
    grid = unit_grid(65)
    h = bdlab.Profile1D.from_function(np.cos, 0.0, 1.0)
    p = bdlab.Profile1D.from_function(lambda s: 2.0 + s, 0.0, 1.0)
    u, g, residual = bdlab.solve_degenerate(1.5, h, p, grid)
    assert residual < 5e-3
    # Eu stays in span{e1 (x) e1}: off-diagonal and (2,2) entries vanish
    E = bdlab.sym_gradient(u)
    assert np.abs(E[..., 0, 1]).max() < 5e-3
    assert np.abs(E[..., 1, 1]).max() < 5e-3


def test_elliptic_harmonic_g():
    grid = unit_grid(65)
    X = grid.nodes()
    g = X[..., 0] ** 2 - X[..., 1] ** 2
    sol = bdlab.solve_elliptic(np.eye(2), g, grid)
    assert sol.residual_pde < 1e-10
    assert sol.residual_incl < 1e-2
    assert sol.curl_residual < 1e-8


def test_elliptic_anisotropic():
    # P = diag(2, 1): solvability needs d11 g + 2 d22 g = 0
    grid = unit_grid(65)
    X = grid.nodes()
    g = np.exp(X[..., 0]) * np.cos(X[..., 1] / np.sqrt(2.0))
    sol = bdlab.solve_elliptic(np.diag([2.0, 1.0]), g, grid)
    assert sol.residual_incl < 1e-2


def test_elliptic_not_solvable_reports_residual():
    grid = unit_grid(65)
    X = grid.nodes()
    with pytest.raises(NotSolvableError) as exc:
        bdlab.solve_elliptic(np.eye(2), X[..., 0] ** 2, grid)
    assert exc.value.residual == pytest.approx(2.0, rel=1e-6)


def test_elliptic_rejects_sign_indefinite_p():
    grid = unit_grid(17)
    with pytest.raises(InputError):
        bdlab.solve_elliptic(np.diag([1.0, -1.0]), np.zeros(grid.n), grid)
