"""Grid-sampled displacement fields and their symmetrized derivative measures.

A displacement field is sampled at the nodes of a box grid and may carry
explicit jump interfaces (oriented polylines with a trace difference).
Its symmetrized derivative splits into a cell-centered density plus
singular surface/point atoms; all singular masses are exact, never
smeared onto the mesh.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError

__all__ = [
    "Grid",
    "JumpInterface",
    "DisplacementField",
    "SurfaceAtom",
    "PointAtom",
    "SymMeasure",
    "sym_gradient",
    "fit_rigid",
    "assemble_symmetrized_measure",
    "blow_up",
    "directional_slice_check",
    "doubling_scan",
    "ball_mass",
    "unit_ball_volume",
    "field_from_function",
    "staircase_field",
]


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box grid; n nodes per axis, so n-1 cells per axis."""

    box: Tuple[Tuple[float, float], ...]
    n: Tuple[int, ...]

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        n = tuple(int(k) for k in self.n)
        if len(box) != len(n):
            raise InputError("box and n must agree in dimension")
        if any(k < 3 for k in n):
            raise InputError("need at least 3 nodes per axis")
        if any(hi <= lo for lo, hi in box):
            raise InputError("box must have positive extent per axis")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "n", n)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((hi - lo) / (k - 1) for (lo, hi), k in zip(self.box, self.n))

    @property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, k) for (lo, hi), k in zip(self.box, self.n))

    @property
    def cell_centers(self) -> Tuple[np.ndarray, ...]:
        return tuple(0.5 * (ax[1:] + ax[:-1]) for ax in self.axes)

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return tuple(k - 1 for k in self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.box]))

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (*n, dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def centers(self) -> np.ndarray:
        """All cell-center coordinates, shape (*cell_shape, dim)."""
        mesh = np.meshgrid(*self.cell_centers, indexing="ij")
        return np.stack(mesh, axis=-1)

    def to_json(self) -> dict:
        return {"box": [list(b) for b in self.box], "n": list(self.n)}

    @classmethod
    def from_json(cls, doc: dict) -> "Grid":
        return cls(tuple(tuple(b) for b in doc["box"]), tuple(doc["n"]))


@dataclass(frozen=True)
class JumpInterface:
    """Oriented polyline (d=2) with a constant trace difference across it.

    The unit normal of a segment with tangent t is (t[1], -t[0]); the jump
    vector is u(+side) - u(-side) where + is the side the normal points to.
    """

    polyline: np.ndarray  # (k, d)
    jump: np.ndarray  # (d,)

    def __post_init__(self):
        pl = np.atleast_2d(np.asarray(self.polyline, dtype=float))
        jp = np.asarray(self.jump, dtype=float)
        if pl.shape[0] < 2 or pl.shape[1] != jp.shape[0]:
            raise InputError("polyline needs >= 2 points matching the jump dimension")
        if pl.shape[1] != 2:
            raise InputError("jump interfaces are supported in d = 2")
        object.__setattr__(self, "polyline", pl)
        object.__setattr__(self, "jump", jp)

    def segments(self):
        for p0, p1 in zip(self.polyline[:-1], self.polyline[1:]):
            yield p0, p1

    def segment_normals(self) -> np.ndarray:
        t = np.diff(self.polyline, axis=0)
        lengths = np.linalg.norm(t, axis=1)
        if np.any(lengths <= 0):
            raise InputError("degenerate polyline segment")
        t = t / lengths[:, None]
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.polyline, axis=0), axis=1).sum())

    def to_json(self) -> dict:
        return {"polyline": self.polyline.tolist(), "jump": self.jump.tolist()}


@dataclass(frozen=True)
class DisplacementField:
    grid: Grid
    values: np.ndarray  # (*grid.n, d)
    jumps: Tuple[JumpInterface, ...] = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = self.grid.n + (self.grid.dim,)
        if vals.shape != expected:
            raise InputError(f"values must have shape {expected}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InputError("field values must be finite")
        lo = np.array([b[0] for b in self.grid.box])
        hi = np.array([b[1] for b in self.grid.box])
        for j in self.jumps:
            if np.any(j.polyline < lo - 1e-12) or np.any(j.polyline > hi + 1e-12):
                raise InputError("jump interface leaves the grid box")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "jumps", tuple(self.jumps))

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "values": self.values.ravel().tolist(),
            "jumps": [j.to_json() for j in self.jumps],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DisplacementField":
        grid = Grid.from_json(doc["grid"])
        vals = np.asarray(doc["values"], dtype=float).reshape(grid.n + (grid.dim,))
        jumps = tuple(
            JumpInterface(np.asarray(j["polyline"]), np.asarray(j["jump"]))
            for j in doc.get("jumps", [])
        )
        return cls(grid, vals, jumps)


def field_from_function(grid: Grid, fn: Callable[[np.ndarray], np.ndarray],
                        jumps: Sequence[JumpInterface] = ()) -> DisplacementField:
    """Sample fn (vectorized over points of shape (..., d)) at the grid nodes."""
    return DisplacementField(grid, np.asarray(fn(grid.nodes()), dtype=float), tuple(jumps))


def staircase_field(n: int = 65) -> DisplacementField:
    """u = (1_{x2>0}, 1_{x1>0}) on (-1,1)^2 with both interfaces explicit."""
    grid = Grid(((-1.0, 1.0), (-1.0, 1.0)), (n, n))
    pts = grid.nodes()
    vals = np.stack([(pts[..., 1] > 0).astype(float),
                     (pts[..., 0] > 0).astype(float)], axis=-1)
    jumps = (
        # across {x2 = 0}: normal (0,-1), jump u(x2<0) - u(x2>0) = (-1, 0)
        JumpInterface(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([-1.0, 0.0])),
        # across {x1 = 0}: tangent (0,1) -> normal (1,0), jump u(x1>0)-u(x1<0) = (0, 1)
        JumpInterface(np.array([[0.0, -1.0], [0.0, 1.0]]), np.array([0.0, 1.0])),
    )
    return DisplacementField(grid, vals, jumps)


# ---------------------------------------------------------------------------
# Symmetrized gradient


def _node_gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """du[i][j] = d u_i / d x_j at every node; O(h^2) incl. boundaries."""
    d = grid.dim
    out = np.empty(grid.n + (d, d))
    for i in range(d):
        grads = np.gradient(values[..., i], *grid.axes, edge_order=2)
        if d == 1:
            grads = [grads]
        for j in range(d):
            out[..., i, j] = grads[j]
    return out


def sym_gradient(u: DisplacementField) -> np.ndarray:
    """(grad u + grad u^T)/2 sampled at the grid nodes.

    Centered differences in the interior, second-order one-sided stencils
    on the boundary.  Jump interfaces are not handled here (use
    assemble_symmetrized_measure); values near an interface are polluted
    over a one-node halo.
    """
    du = _node_gradient(u.grid, u.values)
    return 0.5 * (du + np.swapaxes(du, -1, -2))


def skew_gradient(u: DisplacementField) -> np.ndarray:
    """(grad u - grad u^T)/2 at the grid nodes."""
    du = _node_gradient(u.grid, u.values)
    return 0.5 * (du - np.swapaxes(du, -1, -2))


def _segment_point_distance(p0, p1, pts):
    """Distance from points (...,2) to segment p0-p1."""
    v = p1 - p0
    L2 = float(v @ v)
    t = np.clip(((pts - p0) @ v) / L2, 0.0, 1.0)
    proj = p0 + t[..., None] * v
    return np.linalg.norm(pts - proj, axis=-1)


def _jump_flags(u: DisplacementField) -> np.ndarray:
    """Cells whose differencing stencil may cross a jump interface."""
    grid = u.grid
    flags = np.zeros(grid.cell_shape, dtype=bool)
    if not u.jumps:
        return flags
    centers = grid.centers()
    # A cell is contaminated when an interface passes within 1.5 cells of its
    # center: the node gradient halo extends one node past the interface.
    reach = 1.5 * max(grid.spacing)
    for jmp in u.jumps:
        for p0, p1 in jmp.segments():
            flags |= _segment_point_distance(p0, p1, centers) <= reach
    return flags


def _fill_flagged(valarr: np.ndarray, flags: np.ndarray) -> np.ndarray:
    """Replace flagged cells by averages of unflagged neighbors (BFS fill)."""
    out = valarr.copy()
    known = ~flags
    if known.all():
        return out
    if not known.any():
        out[...] = 0.0
        return out
    ndim = flags.ndim
    while not known.all():
        newly = np.zeros_like(known)
        acc = np.zeros_like(out)
        cnt = np.zeros(flags.shape)
        for ax in range(ndim):
            for shift in (1, -1):
                nb_known = np.roll(known, shift, axis=ax)
                nb_val = np.roll(out, shift, axis=ax)
                # roll wraps; mask out the wrapped slab
                sl = [slice(None)] * ndim
                sl[ax] = 0 if shift == 1 else -1
                nb_known = nb_known.copy()
                nb_known[tuple(sl)] = False
                use = (~known) & nb_known
                acc[use] += nb_val[use]
                cnt[use] += 1
                newly |= use
        if not newly.any():
            out[~known] = 0.0
            break
        out[newly] = acc[newly] / cnt[newly][..., None, None]
        known |= newly
    return out


def _corner_partial(grid: Grid, vals: np.ndarray, ax: int) -> np.ndarray:
    """Cell-centered partial derivative along ax by corner differencing.

    Differences along ax, averages over the remaining cell corners: O(h^2)
    at the cell center and exact on every cell where vals is affine.
    """
    out = np.diff(vals, axis=ax) / grid.spacing[ax]
    for other in range(grid.dim):
        if other == ax:
            continue
        sl0 = [slice(None)] * out.ndim
        sl1 = [slice(None)] * out.ndim
        sl0[other] = slice(None, -1)
        sl1[other] = slice(1, None)
        out = 0.5 * (out[tuple(sl0)] + out[tuple(sl1)])
    return out


def _cell_density(u: DisplacementField) -> Tuple[np.ndarray, np.ndarray]:
    """Cell-centered symmetrized gradient and the jump-contamination flags."""
    grid = u.grid
    du = np.stack([_corner_partial(grid, u.values, ax)
                   for ax in range(grid.dim)], axis=-1)
    dens = 0.5 * (du + np.swapaxes(du, -1, -2))
    flags = _jump_flags(u)
    return _fill_flagged(dens, flags), flags


# ---------------------------------------------------------------------------
# Rigid deformations


def _skew_basis(d: int) -> List[np.ndarray]:
    basis = []
    for i in range(d):
        for j in range(i + 1, d):
            B = np.zeros((d, d))
            B[i, j] = -1.0
            B[j, i] = 1.0
            basis.append(B)
    return basis


def fit_rigid(u: DisplacementField):
    """Least-squares fit u(x) ~ u0 + R x with R skew-symmetric.

    Returns (u0, R, residual) where residual is the RMS misfit over nodes.
    """
    if u.jumps:
        raise InputError("fit_rigid expects a jump-free field")
    grid = u.grid
    d = grid.dim
    pts = grid.nodes().reshape(-1, d)
    vals = u.values.reshape(-1, d)
    if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-12) < min(d, 2):
        raise InputError("degenerate grid: nodes are collinear")
    basis = _skew_basis(d)
    ncols = d + len(basis)
    N = pts.shape[0]
    A = np.zeros((N * d, ncols))
    for i in range(d):
        A[i::d, i] = 1.0
    for k, B in enumerate(basis):
        prod = pts @ B.T  # (N, d)
        for i in range(d):
            A[i::d, d + k] = prod[:, i]
    rhs = vals.reshape(-1)
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    u0 = coef[:d]
    R = sum(c * B for c, B in zip(coef[d:], basis))
    resid = A @ coef - rhs
    rms = float(np.sqrt(np.mean(resid ** 2) * d))  # RMS of the vector misfit
    return u0, np.asarray(R), rms


# ---------------------------------------------------------------------------
# The symmetrized derivative as a measure


@dataclass(frozen=True)
class SurfaceAtom:
    """(d-1)-dimensional piece carrying a matrix amplitude per unit length."""

    polyline: np.ndarray  # (k, 2)
    amplitude: np.ndarray  # (d, d), per unit H^{d-1} measure

    def __post_init__(self):
        object.__setattr__(self, "polyline", np.atleast_2d(np.asarray(self.polyline, float)))
        object.__setattr__(self, "amplitude", np.asarray(self.amplitude, float))

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.polyline, axis=0), axis=1).sum())

    def segments(self):
        for p0, p1 in zip(self.polyline[:-1], self.polyline[1:]):
            yield p0, p1

    def to_json(self) -> dict:
        return {"polyline": self.polyline.tolist(), "amplitude": self.amplitude.tolist()}


@dataclass(frozen=True)
class PointAtom:
    location: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, float))
        object.__setattr__(self, "matrix", np.asarray(self.matrix, float))

    def to_json(self) -> dict:
        return {"location": self.location.tolist(), "matrix": self.matrix.tolist()}


@dataclass(frozen=True)
class SymMeasure:
    """Matrix measure: cell density * Lebesgue + surface atoms + point atoms."""

    grid: Grid
    density: np.ndarray  # (*cell_shape, d, d)
    surface_atoms: Tuple[SurfaceAtom, ...] = ()
    point_atoms: Tuple[PointAtom, ...] = ()

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float)
        expected = self.grid.cell_shape + (self.grid.dim, self.grid.dim)
        if dens.shape != expected:
            raise InputError(f"density must have shape {expected}, got {dens.shape}")
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "surface_atoms", tuple(self.surface_atoms))
        object.__setattr__(self, "point_atoms", tuple(self.point_atoms))

    def density_norms(self) -> np.ndarray:
        return np.linalg.norm(self.density, axis=(-2, -1))

    def total_variation(self) -> float:
        tv = float(self.density_norms().sum() * self.grid.cell_volume)
        for a in self.surface_atoms:
            tv += float(np.linalg.norm(a.amplitude)) * a.length()
        for p in self.point_atoms:
            tv += float(np.linalg.norm(p.matrix))
        return tv

    def singular_mass(self) -> float:
        m = sum(float(np.linalg.norm(a.amplitude)) * a.length() for a in self.surface_atoms)
        m += sum(float(np.linalg.norm(p.matrix)) for p in self.point_atoms)
        return float(m)

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "density": self.density.ravel().tolist(),
            "surface_atoms": [a.to_json() for a in self.surface_atoms],
            "point_atoms": [p.to_json() for p in self.point_atoms],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SymMeasure":
        grid = Grid.from_json(doc["grid"])
        d = grid.dim
        dens = np.asarray(doc["density"], float).reshape(grid.cell_shape + (d, d))
        surf = tuple(SurfaceAtom(np.asarray(a["polyline"]), np.asarray(a["amplitude"]))
                     for a in doc.get("surface_atoms", []))
        pts = tuple(PointAtom(np.asarray(p["location"]), np.asarray(p["matrix"]))
                    for p in doc.get("point_atoms", []))
        return cls(grid, dens, surf, pts)


def _segments_overlap(p0, p1, q0, q1, tol=1e-12) -> bool:
    """True when two segments share a piece of positive length.

    Transversal crossings at isolated points carry no surface measure and
    are allowed; only collinear overlap double-counts mass.
    """
    def cross(a, b):
        return a[0] * b[1] - a[1] * b[0]

    r = p1 - p0
    s = q1 - q0
    scale = max(np.linalg.norm(r), np.linalg.norm(s), 1.0)
    if abs(cross(r, s)) > tol * scale ** 2:
        return False
    if abs(cross(q0 - p0, r)) > tol * scale ** 2:
        return False  # parallel but not collinear
    # collinear: compare parameter intervals along r
    rr = float(r @ r)
    t0 = float((q0 - p0) @ r) / rr
    t1 = float((q1 - p0) @ r) / rr
    lo, hi = min(t0, t1), max(t0, t1)
    return min(hi, 1.0) - max(lo, 0.0) > 1e-9


def assemble_symmetrized_measure(u: DisplacementField) -> SymMeasure:
    """Split Eu into cell density and exact singular surface atoms.

    Each jump interface contributes amplitude (u+ - u-) (.) n per unit
    length; the density near an interface is reconstructed from unpolluted
    neighbor cells.
    """
    segs = []
    for jmp in u.jumps:
        segs.extend(list(jmp.segments()))
    for i in range(len(segs)):
        for k in range(i + 1, len(segs)):
            if _segments_overlap(segs[i][0], segs[i][1], segs[k][0], segs[k][1]):
                raise InputError("jump interfaces overlap along a set of "
                                 "positive length")

    dens, _ = _cell_density(u)
    atoms = []
    for jmp in u.jumps:
        normals = jmp.segment_normals()
        for (p0, p1), n in zip(jmp.segments(), normals):
            amp = 0.5 * (np.outer(jmp.jump, n) + np.outer(n, jmp.jump))
            atoms.append(SurfaceAtom(np.stack([p0, p1]), amp))
    return SymMeasure(u.grid, dens, tuple(atoms))


# ---------------------------------------------------------------------------
# Blow-ups, ball masses, doubling


def _clip_segment_to_box(p0, p1, box):
    """Liang-Barsky clip; returns (q0, q1) or None."""
    t0, t1 = 0.0, 1.0
    v = p1 - p0
    for ax, (lo, hi) in enumerate(box):
        if abs(v[ax]) < 1e-15:
            if p0[ax] < lo or p0[ax] > hi:
                return None
            continue
        ta = (lo - p0[ax]) / v[ax]
        tb = (hi - p0[ax]) / v[ax]
        ta, tb = min(ta, tb), max(ta, tb)
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return p0 + t0 * v, p0 + t1 * v


def blow_up(mu: SymMeasure, x0, r: float, c: float) -> SymMeasure:
    """Rescaled pushforward c * T_* mu under T(x) = (x - x0)/r.

    Densities transform with c * r^d, surface amplitudes with c * r^{d-1},
    point atoms with c; polar directions are unchanged.  The result is
    represented on the intersection of the blown-up box with [-1, 1]^d;
    clipped mass triggers a warning.
    """
    if r <= 0 or c <= 0:
        raise InputError("r and c must be positive")
    x0 = np.asarray(x0, dtype=float)
    grid = mu.grid
    d = grid.dim
    new_box = []
    clipped = False
    for ax, (lo, hi) in enumerate(grid.box):
        lo_t, hi_t = (lo - x0[ax]) / r, (hi - x0[ax]) / r
        nlo, nhi = max(lo_t, -1.0), min(hi_t, 1.0)
        if nlo >= nhi:
            raise InputError("blow-up window does not meet the measure's box")
        clipped = clipped or (lo_t < nlo - 1e-12) or (hi_t > nhi + 1e-12)
        new_box.append((nlo, nhi))
    if clipped:
        warnings.warn("blow-up clipped mass outside the unit box", stacklevel=2)

    new_grid = Grid(tuple(new_box), grid.n)
    centers = new_grid.centers().reshape(-1, d)
    orig = x0 + r * centers
    # nearest containing cell (piecewise-constant density)
    idx = []
    for ax, (lo, hi) in enumerate(grid.box):
        h = grid.spacing[ax]
        k = np.clip(((orig[:, ax] - lo) / h).astype(int), 0, grid.cell_shape[ax] - 1)
        idx.append(k)
    dens = mu.density[tuple(idx)] * (c * r ** d)
    dens = dens.reshape(new_grid.cell_shape + (d, d))

    surf = []
    for a in mu.surface_atoms:
        pts = (a.polyline - x0) / r
        for p0, p1 in zip(pts[:-1], pts[1:]):
            clip = _clip_segment_to_box(p0, p1, new_grid.box)
            if clip is None:
                continue
            q0, q1 = clip
            if np.linalg.norm(q1 - q0) < 1e-14:
                continue
            surf.append(SurfaceAtom(np.stack([q0, q1]), a.amplitude * (c * r ** (d - 1))))
    pts_atoms = []
    for p in mu.point_atoms:
        loc = (p.location - x0) / r
        if all(lo - 1e-12 <= loc[ax] <= hi + 1e-12 for ax, (lo, hi) in enumerate(new_grid.box)):
            pts_atoms.append(PointAtom(loc, p.matrix * c))
    return SymMeasure(new_grid, dens, tuple(surf), tuple(pts_atoms))


def _ball_inside_box(box, x0, r) -> bool:
    return all(x0[ax] - lo >= r and hi - x0[ax] >= r for ax, (lo, hi) in enumerate(box))


def ball_mass(mu: SymMeasure, x0, r: float) -> float:
    """|mu|(B(x0, r)): exact for constant densities with the ball inside the
    box and for straight surface atoms (segment-disk chords); midpoint
    subsampling otherwise."""
    x0 = np.asarray(x0, dtype=float)
    grid = mu.grid
    d = grid.dim
    total = 0.0

    norms = mu.density_norms()
    if norms.max(initial=0.0) > 0:
        if _ball_inside_box(grid.box, x0, r) and np.ptp(norms) < 1e-13 * max(1.0, norms.max()):
            total += float(norms.flat[0]) * unit_ball_volume(d) * r ** d
        else:
            # subsampled midpoint quadrature of the indicator
            sub = 4
            axes = []
            for ax in range(d):
                cc = grid.cell_centers[ax]
                h = grid.spacing[ax]
                offs = (np.arange(sub) + 0.5) / sub - 0.5
                axes.append((cc[:, None] + h * offs[None, :]).ravel())
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            inside = np.linalg.norm(mesh - x0, axis=-1) < r
            rep = np.repeat(np.repeat(norms, sub, axis=0), sub, axis=1) if d == 2 else None
            if d != 2:
                raise InputError("density ball mass quadrature implemented for d = 2")
            total += float((rep * inside).sum()) * grid.cell_volume / sub ** d

    for a in mu.surface_atoms:
        amp = float(np.linalg.norm(a.amplitude))
        for p0, p1 in a.segments():
            v = p1 - p0
            L = np.linalg.norm(v)
            w = p0 - x0
            # |w + t v|^2 = r^2
            aa = float(v @ v)
            bb = 2.0 * float(w @ v)
            cc = float(w @ w) - r * r
            disc = bb * bb - 4 * aa * cc
            if disc <= 0:
                continue
            sq = math.sqrt(disc)
            t0 = max((-bb - sq) / (2 * aa), 0.0)
            t1 = min((-bb + sq) / (2 * aa), 1.0)
            if t1 > t0:
                total += amp * (t1 - t0) * L

    for p in mu.point_atoms:
        if np.linalg.norm(p.location - x0) < r:
            total += float(np.linalg.norm(p.matrix))
    return total


def doubling_scan(mu: SymMeasure, x0, t: float, radii: Sequence[float]) -> dict:
    """Ratios |mu|(B(x0, t r)) / |mu|(B(x0, r)) per radius.

    Returns {"ratios": [(r, ratio)], "sup": max, "argmax": r at max};
    a zero denominator is reported as inf.
    """
    if t <= 1:
        raise InputError("t must exceed 1")
    radii = list(radii)
    if any(r <= 0 for r in radii):
        raise InputError("radii must be positive")
    rows = []
    for r in radii:
        num = ball_mass(mu, x0, t * r)
        den = ball_mass(mu, x0, r)
        ratio = math.inf if den == 0.0 else num / den
        rows.append((float(r), float(ratio)))
    finite = [q for _, q in rows if math.isfinite(q)]
    sup = max(finite) if finite else math.inf
    argmax = None
    for r, q in rows:
        if q == sup:
            argmax = r
            break
    return {"ratios": rows, "sup": sup, "argmax": argmax}


# ---------------------------------------------------------------------------
# Slicing


_DIAG = 1.0 / math.sqrt(2.0)


def _tv(seq: np.ndarray) -> float:
    return float(np.abs(np.diff(seq)).sum())


def directional_slice_check(u: DisplacementField, xi) -> Tuple[float, float]:
    """Compare |xi^T Eu xi|(box) with the integral over slices of the 1D
    total variation of t -> xi . u(y + t xi).

    Supported directions: axis-aligned and the two diagonals (square grids).
    """
    xi = np.asarray(xi, dtype=float)
    if u.grid.dim != 2:
        raise InputError("slicing implemented for d = 2")
    xi = xi / np.linalg.norm(xi)
    mu = assemble_symmetrized_measure(u)

    lhs = float(np.abs(np.einsum("i,...ij,j->...", xi, mu.density, xi)).sum()
                * u.grid.cell_volume)
    for a in mu.surface_atoms:
        lhs += abs(float(xi @ a.amplitude @ xi)) * a.length()
    for p in mu.point_atoms:
        lhs += abs(float(xi @ p.matrix @ xi))

    h1, h2 = u.grid.spacing
    comp = u.values @ xi  # (n1, n2)

    def trap_weights(n, h):
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        return w

    if abs(abs(xi[0]) - 1.0) < 1e-12:  # +-e1: slices run along axis 0
        tv = np.abs(np.diff(comp, axis=0)).sum(axis=0)
        rhs = float(tv @ trap_weights(u.grid.n[1], h2))
    elif abs(abs(xi[1]) - 1.0) < 1e-12:  # +-e2
        tv = np.abs(np.diff(comp, axis=1)).sum(axis=1)
        rhs = float(tv @ trap_weights(u.grid.n[0], h1))
    elif abs(abs(xi[0]) - _DIAG) < 1e-9 and abs(abs(xi[1]) - _DIAG) < 1e-9:
        if abs(h1 - h2) > 1e-12:
            raise InputError("diagonal slices require a square grid")
        sgn = 1 if xi[0] * xi[1] > 0 else -1
        arr = comp if sgn > 0 else comp[:, ::-1]
        n1, n2 = arr.shape
        rhs = 0.0
        width = h1 / math.sqrt(2.0)
        for off in range(-(n1 - 1), n2):
            diag = np.diagonal(arr, offset=off)
            if diag.size >= 2:
                rhs += _tv(diag) * width
    else:
        raise InputError("slice direction must be axis-aligned or diagonal")
    return lhs, rhs
