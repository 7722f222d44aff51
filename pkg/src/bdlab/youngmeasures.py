"""Desk-scale generalized Young measures.

A measure here is a triple: per-cell oscillation atoms (nu_x), a
concentration measure (lambda) split into an absolutely continuous cell
density and singular surface/point atoms, and unit-sphere direction atoms
(nu_x^inf) attached wherever lambda lives.  Duality pairing, barycenters,
Jensen-type checks, the staircase averaging construction, and empirical
estimation from sequences are provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, RecessionError
from .fields import (DisplacementField, Grid, PointAtom, SurfaceAtom, SymMeasure,
                     assemble_symmetrized_measure)
from .functional import _recession_at
from .integrands import Integrand, recession
from .symtensor import as_matrix, classify_dyad

__all__ = [
    "YoungMeasure",
    "ConcAtom",
    "PairingReport",
    "elementary_ym",
    "laminate_ym",
    "pair_duality",
    "barycenter",
    "jensen_check",
    "staircase_average",
    "staircase_cell",
    "empirical_ym",
]


@dataclass(frozen=True)
class ConcAtom:
    """Singular piece of the concentration measure with its direction atoms.

    kind "surface": polyline geometry, mass_density per unit length.
    kind "point": location, total mass.
    sphere: tuple of (weight, unit-norm matrix) with weights summing to 1.
    """

    kind: str
    geometry: np.ndarray
    mass: float
    sphere: Tuple[Tuple[float, np.ndarray], ...]

    def __post_init__(self):
        if self.kind not in ("surface", "point"):
            raise InputError("conc atom kind must be 'surface' or 'point'")
        object.__setattr__(self, "geometry", np.asarray(self.geometry, float))
        sph = tuple((float(w), np.asarray(M, float)) for w, M in self.sphere)
        wsum = sum(w for w, _ in sph)
        if abs(wsum - 1.0) > 1e-12:
            raise InputError(f"sphere weights sum to {wsum}, expected 1")
        for _, M in sph:
            if abs(np.linalg.norm(M) - 1.0) > 1e-12:
                raise InputError("sphere atoms must have unit Frobenius norm")
        object.__setattr__(self, "sphere", sph)

    def segments(self):
        for p0, p1 in zip(self.geometry[:-1], self.geometry[1:]):
            yield p0, p1

    def sphere_mean(self) -> np.ndarray:
        return sum(w * M for w, M in self.sphere)


@dataclass(frozen=True)
class YoungMeasure:
    """osc_weights: (K, *cells), summing to 1 over K per cell.
    osc_atoms: (K, *cells, d, d).
    conc_density: (*cells,) >= 0, the cell density of lambda.
    conc_dirs: (*cells, d, d) unit directions where conc_density > 0.
    conc_atoms: singular part of lambda with attached sphere atoms."""

    grid: Grid
    osc_weights: np.ndarray
    osc_atoms: np.ndarray
    conc_density: np.ndarray
    conc_dirs: np.ndarray
    conc_atoms: Tuple[ConcAtom, ...] = ()

    def __post_init__(self):
        d = self.grid.dim
        cells = self.grid.cell_shape
        w = np.asarray(self.osc_weights, float)
        a = np.asarray(self.osc_atoms, float)
        cd = np.asarray(self.conc_density, float)
        dirs = np.asarray(self.conc_dirs, float)
        if w.shape[1:] != cells or a.shape != w.shape + (d, d):
            raise InputError("oscillation arrays have inconsistent shapes")
        if not np.allclose(w.sum(axis=0), 1.0, atol=1e-12):
            raise InputError("oscillation weights must sum to 1 per cell")
        if cd.shape != cells or dirs.shape != cells + (d, d):
            raise InputError("concentration arrays have inconsistent shapes")
        if np.any(cd < -1e-15):
            raise InputError("concentration density must be nonnegative")
        active = cd > 0
        if active.any():
            norms = np.linalg.norm(dirs[active], axis=(-2, -1))
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise InputError("concentration directions must be unit matrices")
        object.__setattr__(self, "osc_weights", w)
        object.__setattr__(self, "osc_atoms", a)
        object.__setattr__(self, "conc_density", cd)
        object.__setattr__(self, "conc_dirs", dirs)
        object.__setattr__(self, "conc_atoms", tuple(self.conc_atoms))

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "osc_weights": self.osc_weights.ravel().tolist(),
            "osc_atoms": self.osc_atoms.ravel().tolist(),
            "conc_density": self.conc_density.ravel().tolist(),
            "conc_dirs": self.conc_dirs.ravel().tolist(),
            "conc_atoms": [
                {"kind": c.kind, "geometry": c.geometry.tolist(), "mass": c.mass,
                 "sphere": [[w, M.tolist()] for w, M in c.sphere]}
                for c in self.conc_atoms
            ],
        }


@dataclass(frozen=True)
class PairingReport:
    bulk_pairing: float
    singular_pairing: float
    total: float
    recession_mode: str

    def to_json(self) -> dict:
        return {"bulk_pairing": self.bulk_pairing,
                "singular_pairing": self.singular_pairing,
                "total": self.total, "recession_mode": self.recession_mode}


def _zero_conc(grid: Grid):
    d = grid.dim
    return np.zeros(grid.cell_shape), np.zeros(grid.cell_shape + (d, d))


def elementary_ym(mu: SymMeasure) -> YoungMeasure:
    """nu_x = delta at the density, lambda = |mu^s|, nu^inf = delta at the polar."""
    grid = mu.grid
    cd, dirs = _zero_conc(grid)
    atoms = []
    for a in mu.surface_atoms:
        na = float(np.linalg.norm(a.amplitude))
        if na == 0.0:
            continue
        atoms.append(ConcAtom("surface", a.polyline, na,
                              ((1.0, a.amplitude / na),)))
    for p in mu.point_atoms:
        npn = float(np.linalg.norm(p.matrix))
        if npn == 0.0:
            continue
        atoms.append(ConcAtom("point", p.location, npn, ((1.0, p.matrix / npn),)))
    return YoungMeasure(grid, np.ones((1,) + grid.cell_shape),
                        mu.density[None, ...], cd, dirs, tuple(atoms))


def laminate_ym(A_plus, A_minus, theta: float,
                grid: Optional[Grid] = None) -> YoungMeasure:
    """Two-atom oscillation theta delta_{A+} + (1-theta) delta_{A-} per cell.

    The difference A+ - A- must be a symmetric dyad (laminate
    compatibility); theta must be interior to (0, 1)."""
    A_plus = as_matrix(A_plus)
    A_minus = as_matrix(A_minus)
    if not 0.0 < theta < 1.0:
        raise InputError("theta must lie strictly between 0 and 1")
    tag = classify_dyad(A_plus - A_minus).tag
    if tag not in ("RankOneDyad", "OppositeSignDyad"):
        raise InputError(f"A+ - A- classifies as {tag}; a laminate needs a "
                         "symmetric dyad difference")
    grid = grid or Grid(((0.0, 1.0), (0.0, 1.0)), (3, 3))
    cells = grid.cell_shape
    w = np.empty((2,) + cells)
    w[0] = theta
    w[1] = 1.0 - theta
    atoms = np.empty((2,) + cells + A_plus.shape)
    atoms[0] = A_plus
    atoms[1] = A_minus
    cd, dirs = _zero_conc(grid)
    return YoungMeasure(grid, w, atoms, cd, dirs)


def pair_duality(f: Integrand, nu: YoungMeasure) -> PairingReport:
    """<<f, nu>> = int <f(x,.), nu_x> dx + int <f_inf(x,.), nu_x^inf> dlambda."""
    grid = nu.grid
    X = grid.centers() if f.x_dependent else None
    bulk = 0.0
    K = nu.osc_weights.shape[0]
    for k in range(K):
        vals = f(X, nu.osc_atoms[k])
        bulk += float((nu.osc_weights[k] * vals).sum() * grid.cell_volume)

    singular = 0.0
    if np.any(nu.conc_density > 0):
        centers = grid.centers()
        idx = np.argwhere(nu.conc_density > 0)
        for ij in idx:
            ij = tuple(ij)
            val = _recession_at(f, centers[ij], nu.conc_dirs[ij],
                                "a concentration cell")
            singular += val * float(nu.conc_density[ij]) * grid.cell_volume
    for c in nu.conc_atoms:
        if c.kind == "surface":
            for p0, p1 in c.segments():
                mid = 0.5 * (p0 + p1)
                L = float(np.linalg.norm(p1 - p0))
                inner = 0.0
                for w, M in c.sphere:
                    inner += w * _recession_at(f, mid, M, "a surface atom")
                singular += inner * c.mass * L
        else:
            inner = 0.0
            for w, M in c.sphere:
                inner += w * _recession_at(f, c.geometry, M, "a point atom")
            singular += inner * c.mass
    return PairingReport(bulk_pairing=bulk, singular_pairing=singular,
                         total=bulk + singular, recession_mode="strong")


def barycenter(nu: YoungMeasure) -> SymMeasure:
    """[nu] = <id, nu_x> L^d + <id, nu_x^inf> lambda."""
    dens = np.einsum("k...,k...ij->...ij", nu.osc_weights, nu.osc_atoms)
    dens = dens + nu.conc_density[..., None, None] * nu.conc_dirs
    surf = []
    pts = []
    for c in nu.conc_atoms:
        mean = c.sphere_mean()
        if c.kind == "surface":
            surf.append(SurfaceAtom(c.geometry, mean * c.mass))
        else:
            pts.append(PointAtom(c.geometry, mean * c.mass))
    return SymMeasure(nu.grid, dens, tuple(surf), tuple(pts))


def jensen_check(nu: YoungMeasure, h: Integrand, where: str = "regular",
                 cell: Optional[Tuple[int, ...]] = None,
                 atom_index: int = 0, tol: float = 1e-9) -> dict:
    """Jensen-type inequalities at a point of the Young measure.

    regular: h(<id,nu_x> + <id,nu^inf> dlam/dx) <= <h,nu_x> + <h#,nu^inf> dlam/dx.
    singular (at a conc atom): h#(<id,nu^inf>) <= <h#,nu^inf>.
    h# is the upper (limsup) recession estimate.  A FAILS verdict certifies
    the triple is not generated by any deformation sequence, provided h
    itself passed the quasiconvexity scans.  gap = rhs - lhs.
    """
    if h.x_dependent:
        raise InputError("jensen check requires an x-independent h")

    def sharp(A):
        A = np.asarray(A, float)
        nA = float(np.linalg.norm(A))
        if nA == 0.0:
            return 0.0
        est = recession(h, None, A, mode="upper_sharp")
        if not est.converged and est.spread > 1e-3 * (1.0 + nA):
            raise RecessionError("upper recession estimate did not stabilize")
        return est.value

    if where == "regular":
        if cell is None:
            cell = tuple(s // 2 for s in nu.grid.cell_shape)
        w = nu.osc_weights[(slice(None),) + cell]
        atoms = nu.osc_atoms[(slice(None),) + cell]
        dlam = float(nu.conc_density[cell])
        mean = np.einsum("k,kij->ij", w, atoms)
        if dlam > 0:
            mean = mean + dlam * nu.conc_dirs[cell]
        lhs = float(h(None, mean))
        rhs = float(np.dot(w, h(None, atoms)))
        if dlam > 0:
            rhs += dlam * sharp(nu.conc_dirs[cell])
    elif where == "singular":
        if not nu.conc_atoms:
            raise InputError("no concentration atoms to check")
        c = nu.conc_atoms[atom_index]
        lhs = sharp(c.sphere_mean())
        rhs = sum(w * sharp(M) for w, M in c.sphere)
    else:
        raise InputError("where must be 'regular' or 'singular'")

    gap = rhs - lhs
    verdict = "HOLDS" if lhs <= rhs + tol else "FAILS"
    return {"where": where, "lhs": float(lhs), "rhs": float(rhs),
            "gap": float(gap), "verdict": verdict}


# ---------------------------------------------------------------------------
# Staircase averaging (the singular-Jensen construction)


def staircase_cell(n: int = 17) -> DisplacementField:
    """Cell field v = (1_{x2 > 1/2}, 1_{x1 > 1/2}) on (0,1)^2; its opposite
    faces differ by exactly e2 (across x1) and e1 (across x2)."""
    grid = Grid(((0.0, 1.0), (0.0, 1.0)), (n, n))
    pts = grid.nodes()
    vals = np.stack([(pts[..., 1] > 0.5).astype(float),
                     (pts[..., 0] > 0.5).astype(float)], axis=-1)
    return DisplacementField(grid, vals)


def staircase_average(v: DisplacementField, q1: float, q2: float, n: int,
                      tol: float = 1e-8):
    """Tile v periodically, add the floor staircase, rescale by 1/n.

    With a = e1, b = e2 and cell box (lo1,hi1)x(lo2,hi2):
    w(y) = v_per(y) + q1 floor((y1-lo1)/L1) e2 + q2 floor((y2-lo2)/L2) e1
    and u_n(x) = w(n x)/n.  The floor jumps cancel the tiling jumps exactly
    when the traces of v on opposite faces differ by q1 e2 / q2 e1; the
    returned gluing_mass quantifies any violation of that cancellation.

    Returns (u_n, dist_to_affine, target, gluing_mass) where target is the
    matrix T = q1 e2 (x) e1 + q2 e1 (x) e2, the affine limit being x -> Tx.
    """
    if n < 1:
        raise InputError("n must be a positive integer")
    grid = v.grid
    if grid.dim != 2:
        raise InputError("staircase averaging implemented for d = 2")
    if v.jumps:
        raise InputError("supply the cell field by node samples, without "
                         "explicit jump interfaces")
    if grid.box != ((0.0, 1.0), (0.0, 1.0)):
        raise InputError("the cell must be the unit box (0,1)^2")

    vals = v.values
    # trace compatibility across opposite faces, constant along each face
    delta_a = vals[-1, :, :] - vals[0, :, :] - q1 * np.array([0.0, 1.0])
    delta_b = vals[:, -1, :] - vals[:, 0, :] - q2 * np.array([1.0, 0.0])
    if np.abs(delta_a).max() > tol:
        raise InputError(
            f"trace mismatch {np.abs(delta_a).max():.3g} across the x1-faces "
            f"(expected difference q1*e2 with q1 = {q1})")
    if np.abs(delta_b).max() > tol:
        raise InputError(
            f"trace mismatch {np.abs(delta_b).max():.3g} across the x2-faces "
            f"(expected difference q2*e1 with q2 = {q2})")

    n1, n2 = grid.n
    N1 = n * (n1 - 1) + 1
    N2 = n * (n2 - 1) + 1
    # fine node (I, J) sits in tile (k1, k2) at local node (i, j); nodes on
    # internal gluing lines take the lo-face branch of the right/upper tile
    I = np.arange(N1)
    J = np.arange(N2)
    k1 = np.minimum(I // (n1 - 1), n - 1)
    k2 = np.minimum(J // (n2 - 1), n - 1)
    i = I - k1 * (n1 - 1)
    j = J - k2 * (n2 - 1)
    big = vals[np.ix_(i, j)].astype(float)
    big[..., 1] += q1 * k1[:, None]
    big[..., 0] += q2 * k2[None, :]

    out_grid = Grid(grid.box, (N1, N2))
    u_vals = big / n
    u_n = DisplacementField(out_grid, u_vals)

    # gluing mass of Eu_n: across every internal tile boundary the jump of
    # w is the (k-independent) trace mismatch; the amplitude per unit
    # length of a jump vector j against normal e is |j (.) e|
    jump_a = -(delta_a)  # lo-face branch minus hi-face branch, per face node
    amp_a = np.sqrt(jump_a[:, 0] ** 2 + 0.5 * jump_a[:, 1] ** 2)
    jump_b = -(delta_b)
    amp_b = np.sqrt(jump_b[:, 1] ** 2 + 0.5 * jump_b[:, 0] ** 2)
    wts2 = np.full(n2, grid.spacing[1])
    wts2[0] = wts2[-1] = grid.spacing[1] / 2
    wts1 = np.full(n1, grid.spacing[0])
    wts1[0] = wts1[-1] = grid.spacing[0] / 2
    glue = (n - 1) / n * (float(amp_a @ wts2) + float(amp_b @ wts1))

    T = np.array([[0.0, q2], [q1, 0.0]])  # q1 e2 (x) e1 + q2 e1 (x) e2
    pts = out_grid.nodes()
    affine = pts @ T.T
    diff = np.linalg.norm(u_vals - affine, axis=-1)
    w1 = np.full(N1, 1.0)
    w1[0] = w1[-1] = 0.5
    w2 = np.full(N2, 1.0)
    w2[0] = w2[-1] = 0.5
    cellvol = out_grid.spacing[0] * out_grid.spacing[1]
    dist = float((w1[:, None] * w2[None, :] * diff).sum() * cellvol)
    return u_n, dist, T, glue


# ---------------------------------------------------------------------------
# Empirical estimation


def empirical_ym(seq: Sequence[DisplacementField], window: int = 4,
                 bins: int = 32, cutoff_factor: float = 10.0) -> YoungMeasure:
    """Histogram the strains of a sequence into a Young measure estimate.

    Per window of cells, strain values within the cutoff become oscillation
    atoms at bin centers; exceedances (|E| above cutoff_factor * median)
    contribute their mass to the concentration density with the mean
    normalized direction.
    """
    if not seq:
        raise InputError("empty sequence")
    grid = seq[0].grid
    for u in seq:
        if u.grid != grid:
            raise InputError("all fields must share one grid")
    cells = grid.cell_shape
    if any(c % window for c in cells):
        raise InputError("window must divide the cell counts")
    d = grid.dim

    strains = []
    for u in seq:
        mu = assemble_symmetrized_measure(u)
        strains.append(mu.density)
    E = np.stack(strains)  # (J, *cells, d, d)
    norms = np.linalg.norm(E, axis=(-2, -1))
    med = float(np.median(norms))
    cutoff = cutoff_factor * max(med, 1e-12)
    conc_mask = norms > cutoff

    # global bin lattice on the independent entries, width = range / bins
    flat = E.reshape(-1, d, d)
    ok = ~conc_mask.reshape(-1)
    span = float(np.ptp(flat[ok])) if ok.any() else 1.0
    width = max(span / bins, 1e-12)

    nw1, nw2 = cells[0] // window, cells[1] // window
    K = bins  # cap atoms per window
    W = np.zeros((K, nw1, nw2))
    Atoms = np.zeros((K, nw1, nw2, d, d))
    cd = np.zeros(cells)
    dirs = np.zeros(cells + (d, d))

    J = E.shape[0]
    for i in range(nw1):
        for j in range(nw2):
            sl = (slice(None), slice(i * window, (i + 1) * window),
                  slice(j * window, (j + 1) * window))
            block = E[sl].reshape(-1, d, d)
            mask = ~conc_mask[sl].reshape(-1)
            vals = block[mask]
            if vals.size == 0:
                W[0, i, j] = 1.0
                continue
            keys = np.round(vals / width).astype(np.int64)
            flatkeys = keys.reshape(keys.shape[0], -1)
            uniq, inv, counts = np.unique(flatkeys, axis=0,
                                          return_inverse=True,
                                          return_counts=True)
            order = np.argsort(-counts)[:K]
            total = counts.sum()
            assigned = 0.0
            for r, idx0 in enumerate(order):
                sel = inv == idx0
                Atoms[r, i, j] = vals[sel].mean(axis=0)
                W[r, i, j] = counts[idx0] / total
                assigned += W[r, i, j]
            if assigned < 1.0:  # lump the tail into the heaviest atom
                W[0, i, j] += 1.0 - assigned

    if conc_mask.any():
        mass = np.where(conc_mask, norms, 0.0).sum(axis=0) / J  # per cell
        cd = mass
        with np.errstate(invalid="ignore"):
            mean_dir = np.where(conc_mask[..., None, None], E, 0.0).sum(axis=0)
        nd = np.linalg.norm(mean_dir, axis=(-2, -1))
        active = cd > 0
        mean_dir[active] /= nd[active][..., None, None]
        dirs = mean_dir

    # aggregate the concentration part onto the window lattice
    cdw = cd.reshape(nw1, window, nw2, window).mean(axis=(1, 3))
    dirw = (cd[..., None, None] * dirs).reshape(
        nw1, window, nw2, window, d, d).sum(axis=(1, 3))
    ndw = np.linalg.norm(dirw, axis=(-2, -1))
    activew = cdw > 0
    dirw[activew] /= np.where(ndw[activew] > 0, ndw[activew], 1.0)[..., None, None]

    wgrid = Grid(grid.box, (nw1 + 1, nw2 + 1))
    return YoungMeasure(wgrid, W, Atoms, cdw, dirw)
