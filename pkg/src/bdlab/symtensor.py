"""Algebra of symmetric matrices and symmetric tensor products.

The constructive classification of 2x2 symmetric matrices into dyads
(a (.) b := (ab^T + ba^T)/2) drives the rigidity and laminate machinery:
a nonzero symmetric 2x2 matrix is a symmetric dyad exactly when its
eigenvalues do not share a sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError

__all__ = [
    "SymMatrix",
    "DyadClass",
    "sym_dyad",
    "classify_dyad",
    "frobenius_inner",
    "as_matrix",
]

DEFAULT_TOL = 1e-9


def _triu_indices(d: int):
    return np.triu_indices(d)


@dataclass(frozen=True)
class SymMatrix:
    """A d x d symmetric matrix stored as its upper triangle.

    Symmetry is structural: reconstruction always yields M == M^T.
    """

    dim: int
    upper: np.ndarray  # length d*(d+1)/2, row-major upper triangle

    def __post_init__(self):
        expected = self.dim * (self.dim + 1) // 2
        upper = np.asarray(self.upper, dtype=float)
        if self.dim < 1 or upper.shape != (expected,):
            raise InputError(
                f"upper triangle of a {self.dim}x{self.dim} symmetric matrix "
                f"needs {expected} entries, got {upper.shape}"
            )
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_array(cls, arr, tol: float = 1e-12) -> "SymMatrix":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError(f"expected a square matrix, got shape {arr.shape}")
        scale = max(1.0, float(np.abs(arr).max(initial=0.0)))
        if np.abs(arr - arr.T).max(initial=0.0) > tol * scale:
            raise InputError("matrix is not symmetric within tolerance")
        sym = 0.5 * (arr + arr.T)
        i, j = _triu_indices(arr.shape[0])
        return cls(arr.shape[0], sym[i, j])

    @property
    def array(self) -> np.ndarray:
        d = self.dim
        out = np.zeros((d, d))
        i, j = _triu_indices(d)
        out[i, j] = self.upper
        out[j, i] = self.upper
        return out

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        if self.dim != other.dim:
            raise InputError("dimension mismatch")
        return SymMatrix(self.dim, self.upper + other.upper)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        if self.dim != other.dim:
            raise InputError("dimension mismatch")
        return SymMatrix(self.dim, self.upper - other.upper)

    def __mul__(self, c: float) -> "SymMatrix":
        return SymMatrix(self.dim, self.upper * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(self.dim, -self.upper)

    def to_json(self) -> list:
        """Row-major nested lists."""
        return self.array.tolist()


def as_matrix(M, tol: float = 1e-12) -> np.ndarray:
    """Coerce a SymMatrix or array-like to a dense symmetric ndarray."""
    if isinstance(M, SymMatrix):
        return M.array
    return SymMatrix.from_array(M, tol=tol).array


@dataclass(frozen=True)
class DyadClass:
    """Classification result for a symmetric matrix.

    tag is one of "Zero", "RankOneDyad", "OppositeSignDyad", "NotDyad".
    For OppositeSignDyad, sym_dyad(witness_a, witness_b) reproduces M;
    for RankOneDyad, sign * (witness_a outer witness_a) reproduces M.
    """

    tag: str
    witness_a: Optional[np.ndarray] = None
    witness_b: Optional[np.ndarray] = None
    sign: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "a": None if self.witness_a is None else self.witness_a.tolist(),
            "b": None if self.witness_b is None else self.witness_b.tolist(),
            "sign": self.sign,
        }


def sym_dyad(a, b) -> SymMatrix:
    """Symmetric tensor product (a b^T + b a^T)/2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise InputError(f"vectors of equal dimension required, got {a.shape} and {b.shape}")
    return SymMatrix.from_array(0.5 * (np.outer(a, b) + np.outer(b, a)))


def frobenius_inner(A, B) -> float:
    """Frobenius scalar product A : B = sum_ij A_ij B_ij."""
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise InputError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def _canonical_eigvec(v: np.ndarray) -> np.ndarray:
    # Deterministic sign: first entry of largest magnitude is positive.
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _classify_2d_diagonal(lam1: float, lam2: float, V: np.ndarray) -> DyadClass:
    """Classify diag(lam1, lam2) in the frame whose columns are V (M = V diag V^T).

    Both eigenvalues are nonzero here.
    """
    if lam1 * lam2 > 0:
        return DyadClass("NotDyad")
    gamma = np.sqrt(-lam1 / lam2)
    a = np.array([gamma, 1.0])
    b = np.array([lam1 / gamma, lam2])
    a = V @ a
    b = V @ b
    # Push all scale freedom into b; fix a's orientation for determinism.
    na = np.linalg.norm(a)
    a_unit = _canonical_eigvec(a / na)
    b = b * na * (1.0 if np.allclose(a / na, a_unit) else -1.0)
    return DyadClass("OppositeSignDyad", witness_a=a_unit, witness_b=b)


def classify_dyad(M, tol: float = DEFAULT_TOL) -> DyadClass:
    """Decide whether M is a symmetric dyad and produce witnesses.

    Eigenvalues with |lambda| < tol * |M| count as zero.  For d > 2 the
    matrix is restricted to its (at most 2-dimensional) range and the 2D
    eigenvalue-sign criterion is applied there; rank > 2 is never a dyad.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    A = as_matrix(M, tol=max(tol, 1e-12))
    norm = np.linalg.norm(A)
    if norm < tol:
        return DyadClass("Zero")

    lam, V = np.linalg.eigh(A)
    nonzero = np.abs(lam) >= tol * norm
    rank = int(np.count_nonzero(nonzero))

    if rank == 0:
        return DyadClass("Zero")
    if rank > 2:
        return DyadClass("NotDyad")
    if rank == 1:
        k = int(np.nonzero(nonzero)[0][0])
        sign = 1 if lam[k] > 0 else -1
        a = _canonical_eigvec(V[:, k]) * np.sqrt(abs(lam[k]))
        return DyadClass("RankOneDyad", witness_a=a, witness_b=float(sign) * a, sign=sign)

    # rank == 2: work in the plane spanned by the two active eigenvectors.
    idx = np.nonzero(nonzero)[0]
    lam1, lam2 = float(lam[idx[0]]), float(lam[idx[1]])
    V2 = V[:, idx]  # d x 2, M = V2 diag(lam1, lam2) V2^T on its range
    return _classify_2d_diagonal(lam1, lam2, V2)


def reconstruct(dc: DyadClass, dim: int = 2) -> SymMatrix:
    """Rebuild the matrix a DyadClass describes (zero matrix for Zero/NotDyad)."""
    if dc.tag == "OppositeSignDyad":
        return sym_dyad(dc.witness_a, dc.witness_b)
    if dc.tag == "RankOneDyad":
        return SymMatrix.from_array(dc.sign * np.outer(dc.witness_a, dc.witness_a))
    return SymMatrix.from_array(np.zeros((dim, dim)))
