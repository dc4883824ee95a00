"""Geometry of the search space: Grassmann factor, affine measurement factor,
and their product.

A subspace iterate is an orthonormal basis matrix modulo rotation; the affine
factor is the solution set of the linear measurements A(X) = b. Both factors
expose projections onto their tangent spaces and retractions, and the product
combines them componentwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

ORTHO_TOL = 1e-12


class DimensionError(ValueError):
    """Shapes of operands do not match the geometry."""


class DegenerateRetractionError(RuntimeError):
    """U + H lost rank; the QR retraction is undefined."""


class RankDeficiencyError(ValueError):
    """Sensing matrix does not have full row rank."""


@dataclass(frozen=True)
class GrassmannPoint:
    """A point of Grass(p, r): an orthonormal basis of an r-dim subspace of R^p."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise DimensionError("basis must be a 2-d array")
        p, r = b.shape
        if not (1 <= r < p):
            raise DimensionError(f"need 1 <= r < p, got p={p}, r={r}")
        defect = np.linalg.norm(b.T @ b - np.eye(r))
        if defect > ORTHO_TOL * max(1.0, r):
            raise ValueError(f"basis not orthonormal (defect {defect:.3e})")
        object.__setattr__(self, "basis", b)

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]

    def projector_complement(self) -> np.ndarray:
        """I - U U^T, the projector onto the orthogonal complement."""
        u = self.basis
        return np.eye(self.p) - u @ u.T


@dataclass(frozen=True)
class GrassmannTangent:
    """Horizontal lift of a tangent vector at some GrassmannPoint: U^T H = 0."""

    value: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


def grass_project(u: GrassmannPoint, z: np.ndarray) -> GrassmannTangent:
    """Project an ambient p x r matrix onto the horizontal space at u."""
    z = np.asarray(z, dtype=float)
    if z.shape != u.basis.shape:
        raise DimensionError(f"expected shape {u.basis.shape}, got {z.shape}")
    return GrassmannTangent(z - u.basis @ (u.basis.T @ z))


def grass_retract(u: GrassmannPoint, h: GrassmannTangent | np.ndarray) -> GrassmannPoint:
    """QR retraction: the Q factor of U + H with positive diagonal R."""
    hv = h.value if isinstance(h, GrassmannTangent) else np.asarray(h, dtype=float)
    if hv.shape != u.basis.shape:
        raise DimensionError(f"expected shape {u.basis.shape}, got {hv.shape}")
    q, r = np.linalg.qr(u.basis + hv)
    diag = np.diag(r)
    if np.any(np.abs(diag) < 1e-14 * max(1.0, np.abs(diag).max(initial=0.0))):
        raise DegenerateRetractionError("U + H is numerically rank deficient")
    q = q * np.sign(diag)
    return GrassmannPoint(q)


def grass_distance(u1: GrassmannPoint, u2: GrassmannPoint) -> float:
    """sqrt(sum_i sin^2(theta_i)) over the principal angles between u1 and u2.

    Evaluated through the projector residuals ||(I - P1) U2||_F (symmetrized),
    which equals sqrt(r - ||U1^T U2||_F^2) but stays accurate near zero where
    forming the sines from the cosines loses half the working precision.
    """
    if u1.basis.shape != u2.basis.shape:
        raise DimensionError("points live on different Grassmannians")
    r12 = u2.basis - u1.basis @ (u1.basis.T @ u2.basis)
    r21 = u1.basis - u2.basis @ (u2.basis.T @ u1.basis)
    sq = 0.5 * (np.sum(r12 * r12) + np.sum(r21 * r21))
    return float(np.sqrt(max(sq, 0.0)))


class MeasurementSubspace:
    """The affine set {X in R^{n x s} : A(X) = b}.

    Two variants:
      * entry mask: A selects entries on a set Omega (matrix completion),
      * dense sensing: each measurement is a Frobenius inner product with a
        dense matrix; A is stored flat as (m, n*s) acting on vec(X).

    A reduced pivoted-QR basis of range(A^T) is cached at construction for the
    dense variant; rank-deficient A is rejected.
    """

    def __init__(self, n: int, s: int):
        self.n = int(n)
        self.s = int(s)

    # --- constructors -----------------------------------------------------

    @classmethod
    def from_mask(cls, mask: np.ndarray, values: np.ndarray) -> "MeasurementSubspace":
        """Entry-mask variant. `mask` is boolean n x s; `values` holds the
        observed entries (entries outside the mask are ignored)."""
        mask = np.asarray(mask, dtype=bool)
        values = np.asarray(values, dtype=float)
        if mask.shape != values.shape or mask.ndim != 2:
            raise DimensionError("mask and values must share an n x s shape")
        self = cls(*mask.shape)
        self.kind = "entry_mask"
        self.mask = mask
        rows, cols = np.nonzero(mask)
        self.rows, self.cols = rows, cols
        self.m = int(rows.size)
        self.values = np.where(mask, values, 0.0)
        self.b = values[rows, cols].copy()
        return self

    @classmethod
    def from_dense(cls, a_mat: np.ndarray, b: np.ndarray, n: int, s: int) -> "MeasurementSubspace":
        """Dense-sensing variant with flat A of shape (m, n*s), acting on
        column-stacked vec(X)."""
        a_mat = np.asarray(a_mat, dtype=float)
        b = np.asarray(b, dtype=float).ravel()
        if a_mat.ndim != 2 or a_mat.shape[1] != n * s:
            raise DimensionError("A must have shape (m, n*s)")
        if b.size != a_mat.shape[0]:
            raise DimensionError("b length must match the number of rows of A")
        self = cls(n, s)
        self.kind = "dense"
        self.m = a_mat.shape[0]
        self.a_mat = a_mat
        self.b = b
        if self.m > n * s:
            warnings.warn("overdetermined sensing (m > n*s); only the penalized "
                          "formulation applies", stacklevel=2)
        q, r, piv = scipy.linalg.qr(a_mat.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag.size == 0 or diag.min() < 1e-12 * diag[0]:
            raise RankDeficiencyError("sensing matrix A is numerically rank deficient")
        self.q_basis = q
        self._r_fac = r
        self._piv = piv
        return self

    # --- measurement operator --------------------------------------------

    def apply(self, x_mat: np.ndarray) -> np.ndarray:
        """A(X) as a length-m vector."""
        x_mat = self._check_shape(x_mat)
        if self.kind == "entry_mask":
            return x_mat[self.rows, self.cols]
        return self.a_mat @ x_mat.ravel(order="F")

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        """A^T(v) as an n x s matrix."""
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.m:
            raise DimensionError("adjoint input must have length m")
        if self.kind == "entry_mask":
            out = np.zeros((self.n, self.s))
            out[self.rows, self.cols] = v
            return out
        return (self.a_mat.T @ v).reshape((self.n, self.s), order="F")

    def residual(self, x_mat: np.ndarray) -> np.ndarray:
        return self.apply(x_mat) - self.b

    def _check_shape(self, x_mat: np.ndarray) -> np.ndarray:
        x_mat = np.asarray(x_mat, dtype=float)
        if x_mat.shape != (self.n, self.s):
            raise DimensionError(f"expected shape {(self.n, self.s)}, got {x_mat.shape}")
        return x_mat


@dataclass(frozen=True)
class AffineTangent:
    """Element of null(A), an n x s matrix."""

    value: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


def meas_project(l: MeasurementSubspace, delta: np.ndarray) -> AffineTangent:
    """Orthogonal projection of an ambient n x s matrix onto null(A)."""
    delta = l._check_shape(delta)
    if l.kind == "entry_mask":
        out = np.where(l.mask, 0.0, delta)
        return AffineTangent(out)
    v = delta.ravel(order="F")
    v = v - l.q_basis @ (l.q_basis.T @ v)
    return AffineTangent(v.reshape((l.n, l.s), order="F"))


def meas_feasible_point(l: MeasurementSubspace) -> np.ndarray:
    """A point of the affine set: observed values on the mask (zero elsewhere),
    or the minimum-norm solution of A vec(X) = b for dense sensing."""
    if l.kind == "entry_mask":
        return l.values.copy()
    if l.m > l.n * l.s:
        raise RankDeficiencyError("overdetermined system has no exact solution")
    # min-norm solution lives in range(A^T) = range(Q): X = Q R^{-T} b[piv]
    y = scipy.linalg.solve_triangular(l._r_fac.T, l.b[l._piv], lower=True)
    x = l.q_basis @ y
    return x.reshape((l.n, l.s), order="F")


# --- product manifold ----------------------------------------------------


@dataclass(frozen=True)
class ProductPoint:
    """Iterate z = (X, U) with X feasible and U a subspace."""

    x: np.ndarray
    u: GrassmannPoint


@dataclass(frozen=True)
class ProductTangent:
    """Tangent (dx, du) with dx in null(A) and du horizontal at the anchor."""

    dx: np.ndarray
    du: np.ndarray

    def __add__(self, other: "ProductTangent") -> "ProductTangent":
        return ProductTangent(self.dx + other.dx, self.du + other.du)

    def __sub__(self, other: "ProductTangent") -> "ProductTangent":
        return ProductTangent(self.dx - other.dx, self.du - other.du)

    def __neg__(self) -> "ProductTangent":
        return ProductTangent(-self.dx, -self.du)

    def __mul__(self, scalar: float) -> "ProductTangent":
        return ProductTangent(scalar * self.dx, scalar * self.du)

    __rmul__ = __mul__


def product_project(
    l: MeasurementSubspace, z: ProductPoint, dx: np.ndarray, du: np.ndarray
) -> ProductTangent:
    """Componentwise tangent projection at z."""
    return ProductTangent(meas_project(l, dx).value, grass_project(z.u, du).value)


def product_retract(z: ProductPoint, xi: ProductTangent) -> ProductPoint:
    """X + dx on the flat factor, QR retraction on the Grassmann factor."""
    if xi.dx.shape != z.x.shape or xi.du.shape != z.u.basis.shape:
        raise DimensionError("tangent is not anchored at this point")
    return ProductPoint(z.x + xi.dx, grass_retract(z.u, xi.du))


def product_inner(xi: ProductTangent, zeta: ProductTangent) -> float:
    return float(np.vdot(xi.dx, zeta.dx) + np.vdot(xi.du, zeta.du))


def product_norm(xi: ProductTangent) -> float:
    return float(np.sqrt(product_inner(xi, xi)))
