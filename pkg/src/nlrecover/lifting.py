"""Feature maps and kernels used to lift structured data to a low-rank space.

Supported liftings: explicit monomial features of degree <= d, the monomial
kernel (X^T Y + c)^(.d), and the Gaussian kernel. Analytic Euclidean gradients
and Hessian-vector products of the residual cost trace(P_{W_perp} K(X, X)) are
provided for the monomial kernel; the Gaussian kernel gets an analytic gradient
only (its Hessian is handled by finite differences of the gradient upstream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .manifold import DimensionError, GrassmannPoint

MAX_EXPLICIT_FEATURES = 20000


class FeatureSizeError(ValueError):
    """Explicit feature matrix would exceed the configured size cap."""


def count_monomials(n: int, d: int) -> int:
    """Number of monomials in n variables of total degree <= d: C(n + d, n)."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    return math.comb(n + d, n)


@dataclass(frozen=True)
class MultiIndexTable:
    """All exponent vectors alpha with |alpha| <= d, in graded lexicographic
    order (total degree ascending, lexicographically descending within a
    degree, so for n=2, d=2: 1, x1, x2, x1^2, x1*x2, x2^2)."""

    n: int
    d: int
    exponents: np.ndarray  # (N, n) int array

    def __len__(self) -> int:
        return self.exponents.shape[0]


def _exponents_of_degree(n: int, t: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(t,)]
    out = []
    for first in range(t, -1, -1):
        for rest in _exponents_of_degree(n - 1, t - first):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=64)
def multi_index_table(n: int, d: int) -> MultiIndexTable:
    rows: list[tuple[int, ...]] = []
    for t in range(d + 1):
        rows.extend(_exponents_of_degree(n, t))
    exps = np.array(rows, dtype=int)
    assert exps.shape[0] == count_monomials(n, d)
    return MultiIndexTable(n, d, exps)


@lru_cache(maxsize=64)
def _derivative_index(n: int, d: int):
    """For each variable j, the triples (row, coeff, lowered row) with
    alpha_j > 0 and lowered = index of alpha - e_j in the same table."""
    table = multi_index_table(n, d)
    lookup = {tuple(row): i for i, row in enumerate(table.exponents)}
    per_var = []
    for j in range(n):
        rows, coeffs, lowers = [], [], []
        for a, alpha in enumerate(table.exponents):
            if alpha[j] > 0:
                lowered = alpha.copy()
                lowered[j] -= 1
                rows.append(a)
                coeffs.append(alpha[j])
                lowers.append(lookup[tuple(lowered)])
        per_var.append(
            (np.array(rows, dtype=int), np.array(coeffs, dtype=float), np.array(lowers, dtype=int))
        )
    return per_var


def monomial_features(x_mat: np.ndarray, d: int, max_features: int = MAX_EXPLICIT_FEATURES) -> np.ndarray:
    """Explicit monomial feature matrix: column j lists all x_j^alpha with
    |alpha| <= d, coefficient 1, in multi-index table order."""
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    if d < 1:
        raise ValueError("degree must be >= 1")
    n, s = x_mat.shape
    n_feat = count_monomials(n, d)
    if n_feat > max_features:
        raise FeatureSizeError(f"N(n={n}, d={d}) = {n_feat} exceeds cap {max_features}")
    table = multi_index_table(n, d)
    out = np.empty((n_feat, s))
    # powers[j][e] = x_j ** e, computed once per variable
    powers = [np.vander(x_mat[j], N=d + 1, increasing=True).T for j in range(n)]
    for a, alpha in enumerate(table.exponents):
        row = np.ones(s)
        for j in range(n):
            e = alpha[j]
            if e:
                row = row * powers[j][e]
        out[a] = row
    return out


def monomial_features_vjp(x_mat: np.ndarray, d: int, r_mat: np.ndarray) -> np.ndarray:
    """Columnwise vector-Jacobian product of the monomial feature map:
    out[j, i] = sum_a r_mat[a, i] * d(x_i^alpha_a)/d(x_i)_j."""
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    n, s = x_mat.shape
    phi = monomial_features(x_mat, d)
    if r_mat.shape != phi.shape:
        raise DimensionError(f"weight matrix must have shape {phi.shape}")
    out = np.zeros((n, s))
    for j, (rows, coeffs, lowers) in enumerate(_derivative_index(n, d)):
        if rows.size:
            out[j] = np.einsum("a,as,as->s", coeffs, r_mat[rows], phi[lowers])
    return out


def monomial_kernel(x_mat: np.ndarray, y_mat: np.ndarray, d: int, c: float) -> np.ndarray:
    """(X^T Y + c)^(.d) entrywise; degree 0 gives the all-ones matrix."""
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    y_mat = np.atleast_2d(np.asarray(y_mat, dtype=float))
    if x_mat.shape[0] != y_mat.shape[0]:
        raise DimensionError("x and y must share the ambient dimension")
    if d < 0:
        raise ValueError("degree must be >= 0")
    if d == 0:
        return np.ones((x_mat.shape[1], y_mat.shape[1]))
    return (x_mat.T @ y_mat + c) ** d


def gaussian_kernel(x_mat: np.ndarray, y_mat: np.ndarray, sigma: float) -> np.ndarray:
    """Entry (i, j) = exp(-||x_i - y_j||^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    y_mat = np.atleast_2d(np.asarray(y_mat, dtype=float))
    if x_mat.shape[0] != y_mat.shape[0]:
        raise DimensionError("x and y must share the ambient dimension")
    sq = (
        np.sum(x_mat**2, axis=0)[:, None]
        - 2.0 * (x_mat.T @ y_mat)
        + np.sum(y_mat**2, axis=0)[None, :]
    )
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * sigma**2))


def _w_perp(w: GrassmannPoint | np.ndarray, s: int) -> np.ndarray:
    wb = w.basis if isinstance(w, GrassmannPoint) else np.asarray(w, dtype=float)
    if wb.shape[0] != s:
        raise DimensionError("subspace basis does not match the number of columns")
    return np.eye(s) - wb @ wb.T


def monomial_grad_x(x_mat: np.ndarray, w, d: int, c: float) -> np.ndarray:
    """Euclidean gradient in X of trace(P_{W_perp} K_d(X, X)):
    2 d X (K_{d-1} o P_{W_perp})."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    p_perp = _w_perp(w, x_mat.shape[1])
    k_lower = monomial_kernel(x_mat, x_mat, d - 1, c)
    return 2.0 * d * x_mat @ (k_lower * p_perp)


def monomial_hess_operator(x_mat: np.ndarray, w, d: int, c: float):
    """Euclidean Hessian of trace(P_{W_perp} K_d(X, X)) at (X, W) as an
    operator on (dx, dw); the kernel matrices are built once so repeated
    products (e.g. inside a CG loop) stay cheap."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    wb = w.basis if isinstance(w, GrassmannPoint) else np.asarray(w, dtype=float)
    s = x_mat.shape[1]
    p_perp = _w_perp(wb, s)
    k_d = monomial_kernel(x_mat, x_mat, d, c)
    k_1 = monomial_kernel(x_mat, x_mat, d - 1, c)
    k_1_perp = k_1 * p_perp
    k_2_perp = monomial_kernel(x_mat, x_mat, d - 2, c) * p_perp if d >= 2 else None

    def apply(dx: np.ndarray, dw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        sym_x = x_mat.T @ dx + dx.T @ x_mat
        sym_w = wb @ dw.T + dw @ wb.T
        h_x = 2.0 * d * dx @ k_1_perp
        if k_2_perp is not None:
            h_x = h_x + 2.0 * d * (d - 1) * x_mat @ (k_2_perp * sym_x)
        h_x = h_x - 2.0 * d * x_mat @ (k_1 * sym_w)
        h_w = -2.0 * d * (k_1 * sym_x) @ wb - 2.0 * k_d @ dw
        return h_x, h_w

    return apply


def monomial_hess(
    x_mat: np.ndarray,
    w,
    d: int,
    c: float,
    dx: np.ndarray,
    dw: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean Hessian-vector product of trace(P_{W_perp} K_d(X, X)) at
    (X, W) applied to (dx, dw). Returns the (n x s, s x r) blocks."""
    return monomial_hess_operator(x_mat, w, d, c)(dx, dw)


def gaussian_grad_x(x_mat: np.ndarray, w, sigma: float) -> np.ndarray:
    """Euclidean gradient in X of trace(P_{W_perp} K_G(X, X)) for the Gaussian
    kernel: -(2 / sigma^2) X (diag(colsum(K o P)) - K o P)."""
    x_mat = np.atleast_2d(np.asarray(x_mat, dtype=float))
    p_perp = _w_perp(w, x_mat.shape[1])
    kp = gaussian_kernel(x_mat, x_mat, sigma) * p_perp
    return -(2.0 / sigma**2) * x_mat @ (np.diag(kp.sum(axis=0)) - kp)


def lift_grad_w(k_mat: np.ndarray, w) -> np.ndarray:
    """Euclidean gradient of the residual cost in the subspace variable:
    -2 K W (valid for any symmetric kernel matrix K)."""
    wb = w.basis if isinstance(w, GrassmannPoint) else np.asarray(w, dtype=float)
    if k_mat.shape != (wb.shape[0], wb.shape[0]):
        raise DimensionError("kernel matrix and basis sizes disagree")
    return -2.0 * k_mat @ wb


@dataclass(frozen=True)
class LiftingSpec:
    """Choice of lifting and its parameters.

    kind is one of 'monomial_features', 'monomial_kernel', 'gaussian_kernel';
    degree/offset apply to the monomial variants, sigma to the Gaussian.
    """

    kind: str
    n: int
    degree: int = 2
    offset: float = 1.0
    sigma: float = 2.5

    def __post_init__(self):
        if self.kind not in ("monomial_features", "monomial_kernel", "gaussian_kernel"):
            raise ValueError(f"unknown lifting kind {self.kind!r}")
        if self.kind in ("monomial_features", "monomial_kernel") and self.degree < 1:
            raise ValueError("monomial degree must be >= 1")
        if self.kind == "gaussian_kernel" and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.kind == "monomial_features":
            count_monomials(self.n, self.degree)  # fail fast on bad (n, d)

    @classmethod
    def monomials(cls, n: int, degree: int) -> "LiftingSpec":
        return cls("monomial_features", n, degree=degree)

    @classmethod
    def monomial(cls, n: int, degree: int, offset: float = 1.0) -> "LiftingSpec":
        return cls("monomial_kernel", n, degree=degree, offset=offset)

    @classmethod
    def gaussian(cls, n: int, sigma: float) -> "LiftingSpec":
        return cls("gaussian_kernel", n, sigma=sigma)

    @property
    def is_kernel(self) -> bool:
        return self.kind in ("monomial_kernel", "gaussian_kernel")

    def feature_dim(self) -> int:
        if self.kind != "monomial_features":
            raise ValueError("only the explicit feature map has a feature dimension")
        return count_monomials(self.n, self.degree)

    def kernel(self, x_mat: np.ndarray, y_mat: np.ndarray | None = None) -> np.ndarray:
        """Kernel matrix of the lifting (Gram of the features for the explicit
        monomial map)."""
        y_mat = x_mat if y_mat is None else y_mat
        if self.kind == "monomial_kernel":
            return monomial_kernel(x_mat, y_mat, self.degree, self.offset)
        if self.kind == "gaussian_kernel":
            return gaussian_kernel(x_mat, y_mat, self.sigma)
        return monomial_features(x_mat, self.degree).T @ monomial_features(y_mat, self.degree)

    def features(self, x_mat: np.ndarray) -> np.ndarray:
        if self.kind != "monomial_features":
            raise ValueError(f"{self.kind} has no explicit feature matrix")
        return monomial_features(x_mat, self.degree)
