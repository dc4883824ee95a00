"""Cost functions on the product of the measurement subspace and a Grassmann.

Two evaluation paths for the same residual: the explicit feature form
||Phi(X) - P_U Phi(X)||_F^2 with U in Grass(N, r), and the kernel trace form
trace(K(X,X)) - trace(W^T K(X,X) W) with W in Grass(s, r). An optional
quadratic penalty lambda * ||A(X) - b||^2 replaces the affine constraint for
noisy measurements, in which case X ranges over all of R^{n x s}.

Riemannian gradients project the Euclidean blocks onto the tangent spaces;
Hessian-vector products add the Grassmann curvature correction. The monomial
kernel uses analytic Hessian blocks; the Gaussian kernel and the explicit
feature map fall back to central finite differences of the Euclidean gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lifting import (
    LiftingSpec,
    gaussian_grad_x,
    lift_grad_w,
    monomial_features,
    monomial_features_vjp,
    monomial_grad_x,
    monomial_hess_operator,
)
from .manifold import (
    MeasurementSubspace,
    ProductPoint,
    ProductTangent,
    grass_project,
    grass_retract,
    meas_project,
    product_inner,
    product_norm,
    product_retract,
)

FD_GRAD_STEP = 1e-6


def feature_residual_cost(phi: np.ndarray, basis: np.ndarray) -> float:
    """||Phi - P_U Phi||_F^2 evaluated explicitly."""
    resid = phi - basis @ (basis.T @ phi)
    return float(np.sum(resid * resid))


def kernel_trace_cost(k_mat: np.ndarray, basis: np.ndarray) -> float:
    """trace(K) - trace(W^T K W), the kernel-side value of the same residual."""
    return float(np.trace(k_mat) - np.sum((k_mat @ basis) * basis))


@dataclass
class Objective:
    """Residual cost of a lifting under measurement constraints.

    form is 'feature' (explicit monomial features, U in Grass(N, r)) or
    'kernel_trace' (kernel lifting, W in Grass(s, r)). penalty_lambda switches
    to the penalized formulation for noisy measurements.
    """

    lifting: LiftingSpec
    rank_r: int
    measurement: MeasurementSubspace
    form: str = ""
    penalty_lambda: float | None = None

    def __post_init__(self):
        if not self.form:
            self.form = "kernel_trace" if self.lifting.is_kernel else "feature"
        if self.form == "feature" and self.lifting.kind != "monomial_features":
            raise ValueError("feature form requires the explicit monomial features")
        if self.form == "kernel_trace" and not self.lifting.is_kernel:
            raise ValueError("kernel trace form requires a kernel lifting")
        if self.form not in ("feature", "kernel_trace"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.penalty_lambda is not None and self.penalty_lambda <= 0:
            raise ValueError("penalty lambda must be positive")
        if not (1 <= self.rank_r < self.grassmann_ambient()):
            raise ValueError("rank must satisfy 1 <= r < ambient dimension")

    # --- geometry ----------------------------------------------------------

    def grassmann_ambient(self) -> int:
        """Ambient dimension of the subspace variable: N(n, d) for the feature
        form, the number of data columns for kernel forms."""
        if self.form == "feature":
            return self.lifting.feature_dim()
        return self.measurement.s

    @property
    def constrained(self) -> bool:
        return self.penalty_lambda is None

    def lift(self, x_mat: np.ndarray) -> np.ndarray:
        """The matrix whose leading left singular subspace solves the
        U-subproblem: Phi(X) for the feature form, K(X, X) for kernels."""
        if self.form == "feature":
            return self.lifting.features(x_mat)
        return self.lifting.kernel(x_mat)

    def lifted_residual(self, z: ProductPoint) -> float:
        """Cost without the penalty term (always >= 0 up to roundoff)."""
        if self.form == "feature":
            return feature_residual_cost(self.lift(z.x), z.u.basis)
        return kernel_trace_cost(self.lift(z.x), z.u.basis)

    # --- cost / gradient / Hessian -----------------------------------------

    def cost(self, z: ProductPoint) -> float:
        val = self.lifted_residual(z)
        if self.penalty_lambda is not None:
            r = self.measurement.residual(z.x)
            val += self.penalty_lambda * float(r @ r)
        return val

    def _euclid_grad(self, x_mat: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Euclidean gradient blocks of the ambient extension of the lifted
        residual (valid for any, not necessarily orthonormal, basis)."""
        lf = self.lifting
        if self.form == "feature":
            phi = monomial_features(x_mat, lf.degree)
            resid = 2.0 * (phi - basis @ (basis.T @ phi))
            gx = monomial_features_vjp(x_mat, lf.degree, resid)
            gu = -2.0 * phi @ (phi.T @ basis)
            return gx, gu
        if lf.kind == "monomial_kernel":
            gx = monomial_grad_x(x_mat, basis, lf.degree, lf.offset)
        else:
            gx = gaussian_grad_x(x_mat, basis, lf.sigma)
        gu = lift_grad_w(lf.kernel(x_mat), basis)
        return gx, gu

    def rgrad(self, z: ProductPoint) -> ProductTangent:
        gx, gu = self._euclid_grad(z.x, z.u.basis)
        if self.penalty_lambda is not None:
            gx = gx + 2.0 * self.penalty_lambda * self.measurement.adjoint(
                self.measurement.residual(z.x)
            )
        else:
            gx = meas_project(self.measurement, gx).value
        return ProductTangent(gx, grass_project(z.u, gu).value)

    def _euclid_hess_operator(self, x_mat: np.ndarray, basis: np.ndarray):
        lf = self.lifting
        if lf.kind == "monomial_kernel":
            return monomial_hess_operator(x_mat, basis, lf.degree, lf.offset)
        # Gaussian kernel and explicit features: central differences of the
        # Euclidean gradient in the ambient space.
        h = FD_GRAD_STEP * (1.0 + np.linalg.norm(x_mat))

        def apply(dx, du):
            gx_p, gu_p = self._euclid_grad(x_mat + h * dx, basis + h * du)
            gx_m, gu_m = self._euclid_grad(x_mat - h * dx, basis - h * du)
            return (gx_p - gx_m) / (2.0 * h), (gu_p - gu_m) / (2.0 * h)

        return apply

    def _euclid_hess(
        self, x_mat: np.ndarray, basis: np.ndarray, dx: np.ndarray, du: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        return self._euclid_hess_operator(x_mat, basis)(dx, du)

    def rhess_operator(self, z: ProductPoint):
        """Riemannian Hessian at z as an operator on tangents; point-dependent
        quantities (kernel matrices, the curvature term) are built once."""
        euclid = self._euclid_hess_operator(z.x, z.u.basis)
        _, gu = self._euclid_grad(z.x, z.u.basis)
        u_gu = z.u.basis.T @ gu

        def apply(xi: ProductTangent) -> ProductTangent:
            hx, hu = euclid(xi.dx, xi.du)
            if self.penalty_lambda is not None:
                hx = hx + 2.0 * self.penalty_lambda * self.measurement.adjoint(
                    self.measurement.apply(xi.dx)
                )
            else:
                hx = meas_project(self.measurement, hx).value
            # Grassmann quotient curvature: P_perp(eucl_hess - du (U^T grad_U))
            hu = hu - xi.du @ u_gu
            return ProductTangent(hx, grass_project(z.u, hu).value)

        return apply

    def rhess(self, z: ProductPoint, xi: ProductTangent) -> ProductTangent:
        return self.rhess_operator(z)(xi)

    def retract(self, z: ProductPoint, xi: ProductTangent) -> ProductPoint:
        if self.constrained:
            return product_retract(z, xi)
        return ProductPoint(z.x + xi.dx, grass_retract(z.u, xi.du))

    def project(self, z: ProductPoint, dx: np.ndarray, du: np.ndarray) -> ProductTangent:
        du = grass_project(z.u, du).value
        if self.constrained:
            dx = meas_project(self.measurement, dx).value
        return ProductTangent(dx, du)

    def random_tangent(self, z: ProductPoint, rng: np.random.Generator) -> ProductTangent:
        return self.project(
            z,
            rng.standard_normal(z.x.shape),
            rng.standard_normal(z.u.basis.shape),
        )


@dataclass
class FdReport:
    """Outcome of the derivative self-check."""

    grad_error: float
    hess_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.grad_error <= self.tol and self.hess_error <= self.tol


def fd_check(
    obj: Objective,
    z: ProductPoint,
    tol: float = 1e-5,
    rng: np.random.Generator | None = None,
    n_dirs: int = 10,
) -> FdReport:
    """Compare rgrad and (for the monomial kernel) the Euclidean Hessian blocks
    against central finite differences. Reports the max relative discrepancy;
    passes iff both are <= tol."""
    rng = np.random.default_rng(0) if rng is None else rng
    grad = obj.rgrad(z)
    gnorm = product_norm(grad)
    grad_err = 0.0
    for _ in range(n_dirs):
        xi = obj.random_tangent(z, rng)
        nrm = product_norm(xi)
        if nrm == 0.0:
            continue
        xi = (1.0 / nrm) * xi
        analytic = product_inner(grad, xi)
        errs = []
        for h in (1e-3, 1e-4, 1e-5, 1e-6):
            fp = obj.cost(obj.retract(z, h * xi))
            fm = obj.cost(obj.retract(z, (-h) * xi))
            errs.append(abs((fp - fm) / (2.0 * h) - analytic))
        grad_err = max(grad_err, min(errs) / max(gnorm, 1e-12))

    hess_err = 0.0
    if obj.lifting.kind == "monomial_kernel":
        for _ in range(n_dirs):
            xi = obj.random_tangent(z, rng)
            nrm = product_norm(xi)
            if nrm == 0.0:
                continue
            xi = (1.0 / nrm) * xi
            hx, hu = obj._euclid_hess(z.x, z.u.basis, xi.dx, xi.du)
            h = 1e-5 * (1.0 + np.linalg.norm(z.x))
            gx_p, gu_p = obj._euclid_grad(z.x + h * xi.dx, z.u.basis + h * xi.du)
            gx_m, gu_m = obj._euclid_grad(z.x - h * xi.dx, z.u.basis - h * xi.du)
            fd_x = (gx_p - gx_m) / (2.0 * h)
            fd_u = (gu_p - gu_m) / (2.0 * h)
            num = np.sqrt(np.sum((hx - fd_x) ** 2) + np.sum((hu - fd_u) ** 2))
            den = max(np.sqrt(np.sum(hx**2) + np.sum(hu**2)), 1e-12)
            hess_err = max(hess_err, num / den)

    return FdReport(grad_error=grad_err, hess_error=hess_err, tol=tol)
