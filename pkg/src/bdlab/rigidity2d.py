"""Closed-form solutions of the 2D differential inclusion Eu in span{P}.

A symmetric 2x2 matrix P sorts into four cases by its eigenvalue signs:
Trivial (P = 0), OppositeSign (P = a (.) b with independent a, b),
Degenerate (P = +-a (.) a, one zero eigenvalue), and Elliptic (same-sign
eigenvalues).  The first three admit rich solution families built from
one-dimensional profiles; the elliptic case is rigid: it is solvable only
when the second-order operator A_P g = lam2 d11 g + lam1 d22 g vanishes,
and then u is recovered through a conjugate potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import InputError, NotSolvableError
from .fields import DisplacementField, Grid, sym_gradient
from .symtensor import as_matrix, classify_dyad

__all__ = [
    "InclusionCase",
    "Profile1D",
    "classify_inclusion",
    "solve_opposite_sign",
    "solve_degenerate",
    "solve_elliptic",
    "EllipticSolution",
]

_CASE_TOL = 1e-9


@dataclass(frozen=True)
class InclusionCase:
    tag: str  # Trivial | OppositeSign | Degenerate | Elliptic
    eigen: Tuple[float, float]
    frame: np.ndarray  # orthogonal Q with Q P Q^T = diag(eigen)

    def to_json(self) -> dict:
        return {"tag": self.tag, "eigen": list(self.eigen),
                "frame": self.frame.tolist()}


def classify_inclusion(P) -> InclusionCase:
    """Diagonalize P and sort by eigenvalue signs.

    Eigenvalues are ordered by decreasing magnitude so the Degenerate case
    always has lam1 != 0, lam2 = 0.
    """
    P = as_matrix(P)
    if P.shape != (2, 2):
        raise InputError("inclusion classification is for 2x2 matrices")
    norm = float(np.linalg.norm(P))
    if norm < _CASE_TOL:
        return InclusionCase("Trivial", (0.0, 0.0), np.eye(2))
    w, V = np.linalg.eigh(P)
    order = np.argsort(-np.abs(w))
    w = w[order]
    V = V[:, order]
    # deterministic row signs, det Q = +1
    for k in range(2):
        i = int(np.argmax(np.abs(V[:, k])))
        if V[i, k] < 0:
            V[:, k] = -V[:, k]
    if np.linalg.det(V) < 0:
        V[:, 1] = -V[:, 1]
    Q = V.T
    lam1, lam2 = float(w[0]), float(w[1])
    zero = [abs(l) < _CASE_TOL * norm for l in (lam1, lam2)]
    if zero[1]:
        tag = "Degenerate"
        lam2 = 0.0
    elif lam1 * lam2 < 0:
        tag = "OppositeSign"
    else:
        tag = "Elliptic"
    return InclusionCase(tag, (lam1, lam2), Q)


@dataclass(frozen=True)
class Profile1D:
    """Scalar samples on a uniform 1D grid with trapezoid antiderivatives."""

    lo: float
    hi: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 3:
            raise InputError("profile needs at least 3 samples")
        if self.hi <= self.lo:
            raise InputError("profile interval must have positive length")
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray],
                      lo: float, hi: float, n: int = 32769) -> "Profile1D":
        s = np.linspace(lo, hi, n)
        return cls(lo, hi, np.asarray(fn(s), dtype=float))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.samples.size)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < self.lo - 1e-12) or np.any(s > self.hi + 1e-12):
            raise InputError("profile evaluated outside its interval")
        return np.interp(s, self.grid, self.samples)

    def antiderivative(self) -> "Profile1D":
        """Zero at the left endpoint; H' = h to O(h_grid^2)."""
        H = cumulative_trapezoid(self.samples, self.grid, initial=0.0)
        return Profile1D(self.lo, self.hi, H)


def _projection_range(grid: Grid, v: np.ndarray) -> Tuple[float, float]:
    corners = np.array([[lo, hi] for lo, hi in grid.box])
    vals = []
    for c0 in corners[0]:
        for c1 in corners[1]:
            vals.append(c0 * v[0] + c1 * v[1])
    return min(vals), max(vals)


def _check_domain(p: Profile1D, lo: float, hi: float, what: str):
    if p.lo > lo + 1e-12 or p.hi < hi - 1e-12:
        raise InputError(f"profile for {what} covers [{p.lo}, {p.hi}] but "
                         f"[{lo:.6g}, {hi:.6g}] is required")


def solve_opposite_sign(P, h1: Profile1D, h2: Profile1D, grid: Grid):
    """u(x) = H1(x.a) b + H2(x.b) a solves Eu = P g with
    g(x) = h1(x.a) + h2(x.b), for P = a (.) b with opposite-sign spectrum.

    Returns (u, g samples, residual), residual being the max norm of
    Eu - P g under the O(h^2) difference scheme.
    """
    P = as_matrix(P)
    case = classify_inclusion(P)
    if case.tag != "OppositeSign":
        raise InputError(f"matrix classifies as {case.tag}, not OppositeSign")
    dc = classify_dyad(P)
    a, b = dc.witness_a, dc.witness_b

    ra = _projection_range(grid, a)
    rb = _projection_range(grid, b)
    _check_domain(h1, *ra, what="h1 (argument x.a)")
    _check_domain(h2, *rb, what="h2 (argument x.b)")
    H1 = h1.antiderivative()
    H2 = h2.antiderivative()

    pts = grid.nodes()
    sa = pts @ a
    sb = pts @ b
    g = h1(sa) + h2(sb)
    vals = H1(sa)[..., None] * b + H2(sb)[..., None] * a
    u = DisplacementField(grid, vals)
    E = sym_gradient(u)
    residual = float(np.abs(E - g[..., None, None] * P).max())
    return u, g, residual


def solve_degenerate(lam1: float, h: Profile1D, p: Profile1D, grid: Grid):
    """For P = diag(lam1, 0): g(x) = h(x1) + p(x1) x2 and
    u(x) = lam1 (H(x1) + P'(x1) x2, -P(x1)) with P'' = p, H' = h.

    Returns (u, g samples, residual) against Eu = diag(lam1, 0) g.
    """
    if lam1 == 0.0:
        raise InputError("lam1 must be nonzero in the degenerate case")
    lo, hi = grid.box[0]
    _check_domain(h, lo, hi, what="h (argument x1)")
    _check_domain(p, lo, hi, what="p (argument x1)")
    H = h.antiderivative()
    Pprime = p.antiderivative()
    Pcal = Pprime.antiderivative()

    pts = grid.nodes()
    x1 = pts[..., 0]
    x2 = pts[..., 1]
    g = h(x1) + p(x1) * x2
    vals = np.empty(grid.n + (2,))
    vals[..., 0] = lam1 * (H(x1) + Pprime(x1) * x2)
    vals[..., 1] = -lam1 * Pcal(x1)
    u = DisplacementField(grid, vals)
    E = sym_gradient(u)
    target = np.zeros_like(E)
    target[..., 0, 0] = lam1 * g
    residual = float(np.abs(E - target).max())
    return u, g, residual


@dataclass(frozen=True)
class EllipticSolution:
    u: DisplacementField
    g: np.ndarray
    residual_pde: float
    residual_incl: float
    curl_residual: float


def _deriv4(arr: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order first derivative on a uniform grid.

    The residual of the constructed elliptic solution is measured by an
    O(h^2) difference of path-integrated data; the derivative feeding that
    pipeline needs one extra order so its boundary-stencil error jump does
    not surface as an O(h) edge artifact after the 1/h amplification.
    """
    a = np.moveaxis(arr, axis, 0)
    if a.shape[0] < 5:
        return np.moveaxis(np.gradient(a, h, axis=0, edge_order=2), 0, axis)
    out = np.empty_like(a, dtype=float)
    out[2:-2] = (-a[4:] + 8 * a[3:-1] - 8 * a[1:-3] + a[:-4]) / (12 * h)
    out[0] = (-25 * a[0] + 48 * a[1] - 36 * a[2] + 16 * a[3] - 3 * a[4]) / (12 * h)
    out[1] = (-3 * a[0] - 10 * a[1] + 18 * a[2] - 6 * a[3] + a[4]) / (12 * h)
    out[-1] = (25 * a[-1] - 48 * a[-2] + 36 * a[-3] - 16 * a[-4] + 3 * a[-5]) / (12 * h)
    out[-2] = (3 * a[-1] + 10 * a[-2] - 18 * a[-3] + 6 * a[-4] - a[-5]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def _path_integrate(grid: Grid, F1: np.ndarray, F2: np.ndarray,
                    rows_first: bool = True) -> np.ndarray:
    """Potential of (F1, F2) with value 0 at the lower-left corner."""
    x1 = grid.axes[0]
    x2 = grid.axes[1]
    out = np.empty(grid.n)
    if rows_first:
        base = cumulative_trapezoid(F1[:, 0], x1, initial=0.0)
        out[...] = base[:, None] + cumulative_trapezoid(F2, x2, axis=1, initial=0.0)
    else:
        base = cumulative_trapezoid(F2[0, :], x2, initial=0.0)
        out[...] = base[None, :] + cumulative_trapezoid(F1, x1, axis=0, initial=0.0)
    return out


def solve_elliptic(P, g: np.ndarray, grid: Grid,
                   tol: Optional[float] = None) -> EllipticSolution:
    """Solve Eu = P g for same-sign-spectrum diagonal P = diag(lam1, lam2).

    Solvability requires A_P g = lam2 d11 g + lam1 d22 g = 0; the discrete
    residual is measured at interior nodes and compared against
    tol = 10 h^2 |g|_inf (|lam1|+|lam2|) unless overridden.  On success a
    conjugate potential f with grad f = (-lam1 d2 g, lam2 d1 g) is built by
    path integration, and u from the gradient field
    U = diag(lam1, lam2) g + [[0,-1],[1,0]] f.
    """
    P = as_matrix(P)
    case = classify_inclusion(P)
    if case.tag != "Elliptic":
        raise InputError(f"matrix classifies as {case.tag}, not Elliptic")
    if abs(P[0, 1]) > 1e-12 * np.linalg.norm(P):
        raise InputError("solve_elliptic expects P in its diagonal frame; "
                         "rotate coordinates with the frame from classify_inclusion")
    lam1, lam2 = float(P[0, 0]), float(P[1, 1])

    g = np.asarray(g, dtype=float)
    if g.shape != grid.n:
        raise InputError(f"g must be sampled on the grid nodes {grid.n}")
    h1, h2 = grid.spacing

    d11 = (g[2:, :] - 2.0 * g[1:-1, :] + g[:-2, :]) / h1 ** 2
    d22 = (g[:, 2:] - 2.0 * g[:, 1:-1] + g[:, :-2]) / h2 ** 2
    Ag = lam2 * d11[:, 1:-1] + lam1 * d22[1:-1, :]
    residual_pde = float(np.abs(Ag).max())
    if tol is None:
        tol = 10.0 * max(h1, h2) ** 2 * float(np.abs(g).max()) * (abs(lam1) + abs(lam2))
    if residual_pde > tol:
        raise NotSolvableError(
            f"A_P g has residual {residual_pde:.6g} > tol {tol:.6g}: "
            "the inclusion admits no solution for this g", residual_pde)

    g1 = _deriv4(g, h1, axis=0)
    g2 = _deriv4(g, h2, axis=1)
    F1 = -lam1 * g2
    F2 = lam2 * g1
    f_rc = _path_integrate(grid, F1, F2, rows_first=True)
    f_cr = _path_integrate(grid, F1, F2, rows_first=False)
    curl_residual = float(np.abs(f_rc - f_cr).max())
    f = f_rc

    # U rows are the gradients of the two components of u
    U11 = lam1 * g
    U12 = -f
    U21 = f
    U22 = lam2 * g
    vals = np.empty(grid.n + (2,))
    vals[..., 0] = _path_integrate(grid, U11, U12, rows_first=True)
    vals[..., 1] = _path_integrate(grid, U21, U22, rows_first=True)
    u = DisplacementField(grid, vals)

    E = sym_gradient(u)
    residual_incl = float(np.abs(E - g[..., None, None] * P).max())
    return EllipticSolution(u=u, g=g, residual_pde=residual_pde,
                            residual_incl=residual_incl,
                            curl_residual=curl_residual)
