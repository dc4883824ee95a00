import numpy as np
import pytest

from nlrecover.lifting import LiftingSpec, monomial_features
from nlrecover.manifold import (
    GrassmannPoint,
    MeasurementSubspace,
    ProductPoint,
    ProductTangent,
    product_inner,
    product_norm,
)
from nlrecover.objective import (
    Objective,
    fd_check,
    feature_residual_cost,
    kernel_trace_cost,
)
from nlrecover.solvers import default_init, truncated_svd

from conftest import small_masked_objective


def random_basis(rng, p, r):
    q, _ = np.linalg.qr(rng.standard_normal((p, r)))
    return q


class TestCost:
    def test_zero_at_exact_low_rank(self, rng):
        # rank-deficient data with the matching leading subspace: cost vanishes
        obj, _ = small_masked_objective(seed=1)
        x = np.zeros((4, 8))
        x[:2] = rng.standard_normal((2, 8))
        k = obj.lifting.kernel(x)
        rk = int(np.linalg.matrix_rank(k))
        assert rk < k.shape[0]
        obj2 = Objective(lifting=obj.lifting, rank_r=rk, measurement=obj.measurement)
        val = obj2.cost(ProductPoint(x, truncated_svd(k, rk)))
        assert abs(val) <= 1e-10 * max(1.0, np.trace(k))

    def test_trailing_eigenvalue_example(self):
        # kernel diag(3,2,1), r=2, W = (e1,e2): cost equals the tail value 1
        w = GrassmannPoint(np.eye(3)[:, :2])
        assert kernel_trace_cost(np.diag([3.0, 2.0, 1.0]), w.basis) == pytest.approx(1.0)

    def test_trace_kernel_identity_matched_gram(self, rng):
        # Frobenius residual on rows of Phi equals the kernel-trace value with
        # the matched Gram K = Phi^T Phi, for arbitrary W
        for n, d, s in ((3, 2, 12), (4, 2, 20), (2, 1, 8)):
            x = rng.standard_normal((n, s))
            phi = monomial_features(x, d)
            k = phi.T @ phi
            w = random_basis(rng, s, 3)
            lhs = feature_residual_cost(phi.T, w)  # rows of Phi projected
            rhs = kernel_trace_cost(k, w)
            assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))

    def test_penalized_equals_constrained_when_feasible(self):
        obj, target = small_masked_objective(seed=2)
        pen = Objective(
            lifting=obj.lifting,
            rank_r=obj.rank_r,
            measurement=obj.measurement,
            penalty_lambda=1e8,
        )
        z = default_init(obj)  # feasible X: penalty term is exactly zero
        assert pen.cost(z) == pytest.approx(obj.cost(z), rel=1e-12)

    def test_nonnegative(self, rng):
        obj, _ = small_masked_objective(seed=3)
        z = default_init(obj)
        k = obj.lifting.kernel(z.x)
        assert obj.cost(z) >= -1e-10 * np.trace(k)

    def test_form_lifting_mismatch(self):
        obj, _ = small_masked_objective(seed=0)
        with pytest.raises(ValueError):
            Objective(
                lifting=LiftingSpec.monomial(4, 2),
                rank_r=2,
                measurement=obj.measurement,
                form="feature",
            )

    def test_rank_bounds(self):
        obj, _ = small_masked_objective(seed=0)
        with pytest.raises(ValueError):
            Objective(lifting=obj.lifting, rank_r=0, measurement=obj.measurement)
        with pytest.raises(ValueError):
            # ambient of the kernel form is the column count s = 8
            Objective(lifting=obj.lifting, rank_r=8, measurement=obj.measurement)


class TestRgrad:
    def test_zero_at_exact_solution(self):
        # fully observed rank-deficient data: the initial point is optimal
        rng = np.random.default_rng(0)
        x = np.vstack([rng.standard_normal((1, 8)), np.zeros((2, 8))])
        meas = MeasurementSubspace.from_mask(np.ones((3, 8), dtype=bool), x)
        lifting = LiftingSpec.monomial(3, 2)
        rank = int(np.linalg.matrix_rank(lifting.kernel(x)))
        obj = Objective(lifting=lifting, rank_r=rank, measurement=meas)
        z = default_init(obj)
        g = obj.rgrad(z)
        assert obj.cost(z) <= 1e-10 * np.trace(lifting.kernel(x))
        assert product_norm(g) <= 1e-10 * max(1.0, np.trace(lifting.kernel(x)))

    def test_subspace_gradient_vanishes_on_invariant_subspace(self, rng):
        obj, _ = small_masked_objective(seed=4)
        z0 = default_init(obj)
        # U from the exact eigenvectors of K: the subspace component vanishes
        g = obj.rgrad(z0)
        assert np.linalg.norm(g.du) <= 1e-8 * max(1.0, np.trace(obj.lifting.kernel(z0.x)))

    def test_components_are_tangent(self, rng):
        for kind in ("monomial_kernel", "gaussian_kernel", "monomial_features"):
            obj, _ = small_masked_objective(kind=kind, seed=5)
            z = default_init(obj)
            u_rand = GrassmannPoint(random_basis(rng, obj.grassmann_ambient(), obj.rank_r))
            z = ProductPoint(z.x, u_rand)
            g = obj.rgrad(z)
            assert np.linalg.norm(obj.measurement.apply(g.dx)) <= 1e-10 * max(1.0, np.linalg.norm(g.dx))
            assert np.linalg.norm(z.u.basis.T @ g.du) <= 1e-10 * max(1.0, np.linalg.norm(g.du))

    def test_directional_derivative(self, rng):
        obj, _ = small_masked_objective(seed=6)
        z0 = default_init(obj)
        u_rand = GrassmannPoint(random_basis(rng, obj.grassmann_ambient(), obj.rank_r))
        z = ProductPoint(z0.x, u_rand)
        g = obj.rgrad(z)
        for _ in range(10):
            xi = obj.random_tangent(z, rng)
            xi = (1.0 / product_norm(xi)) * xi
            analytic = product_inner(g, xi)
            errs = []
            for h in (1e-4, 1e-5, 1e-6):
                fp = obj.cost(obj.retract(z, h * xi))
                fm = obj.cost(obj.retract(z, (-h) * xi))
                errs.append(abs((fp - fm) / (2 * h) - analytic))
            assert min(errs) <= 1e-6 * max(1.0, product_norm(g))

    def test_penalized_gradient_includes_misfit_term(self, rng):
        obj, target = small_masked_objective(seed=7)
        pen = Objective(
            lifting=obj.lifting, rank_r=obj.rank_r,
            measurement=obj.measurement, penalty_lambda=3.0,
        )
        z0 = default_init(obj)
        x_off = z0.x + rng.standard_normal(z0.x.shape)  # infeasible on purpose
        z = ProductPoint(x_off, z0.u)
        g = pen.rgrad(z)
        for _ in range(5):
            xi = pen.random_tangent(z, rng)
            xi = (1.0 / product_norm(xi)) * xi
            analytic = product_inner(g, xi)
            errs = []
            for h in (1e-4, 1e-5, 1e-6):
                fp = pen.cost(pen.retract(z, h * xi))
                fm = pen.cost(pen.retract(z, (-h) * xi))
                errs.append(abs((fp - fm) / (2 * h) - analytic))
            assert min(errs) <= 1e-5 * max(1.0, product_norm(g))


class TestQuotientInvariance:
    def test_cost_and_gradient_norm(self, rng):
        obj, _ = small_masked_objective(seed=8)
        z = default_init(obj)
        q, _ = np.linalg.qr(rng.standard_normal((obj.rank_r, obj.rank_r)))
        z_rot = ProductPoint(z.x, GrassmannPoint(z.u.basis @ q))
        assert obj.cost(z_rot) == pytest.approx(obj.cost(z), rel=1e-10)
        g = product_norm(obj.rgrad(z))
        g_rot = product_norm(obj.rgrad(z_rot))
        assert g_rot == pytest.approx(g, rel=1e-10, abs=1e-12)


class TestRhess:
    def _generic_point(self, obj, rng):
        z0 = default_init(obj)
        u = GrassmannPoint(random_basis(rng, obj.grassmann_ambient(), obj.rank_r))
        return ProductPoint(z0.x, u)

    def test_zero_tangent_maps_to_zero(self, rng):
        obj, _ = small_masked_objective(seed=9)
        z = self._generic_point(obj, rng)
        out = obj.rhess(z, ProductTangent(np.zeros_like(z.x), np.zeros_like(z.u.basis)))
        assert product_norm(out) == 0.0

    def test_symmetry(self, rng):
        obj, _ = small_masked_objective(seed=10)
        z = self._generic_point(obj, rng)
        for _ in range(5):
            xi = obj.random_tangent(z, rng)
            zeta = obj.random_tangent(z, rng)
            a = product_inner(xi, obj.rhess(z, zeta))
            b = product_inner(zeta, obj.rhess(z, xi))
            assert abs(a - b) <= 1e-8 * (1 + abs(a) + abs(b))

    @pytest.mark.parametrize("kind", ["monomial_kernel", "gaussian_kernel", "monomial_features"])
    def test_taylor_order(self, kind, rng):
        # |f(Retr(t xi)) - f - t<g,xi> - t^2/2 <xi,H xi>| = O(t^3)
        obj, _ = small_masked_objective(kind=kind, seed=11)
        z = self._generic_point(obj, rng)
        xi = obj.random_tangent(z, rng)
        xi = (1.0 / product_norm(xi)) * xi
        f0 = obj.cost(z)
        g = obj.rgrad(z)
        h_xi = obj.rhess(z, xi)
        gxi = product_inner(g, xi)
        xhx = product_inner(xi, h_xi)
        ts = np.logspace(-1, -4, 7)
        res = np.array([
            abs(obj.cost(obj.retract(z, t * xi)) - f0 - t * gxi - 0.5 * t * t * xhx)
            for t in ts
        ])
        if np.all(res < 1e-13 * (1 + abs(f0))):
            return  # residual at roundoff: quadratic model is exact
        slope = np.polyfit(np.log(ts), np.log(res + 1e-300), 1)[0]
        assert slope >= 2.7

    def test_penalty_hessian_term(self, rng):
        obj, _ = small_masked_objective(seed=12)
        pen = Objective(
            lifting=obj.lifting, rank_r=obj.rank_r,
            measurement=obj.measurement, penalty_lambda=2.0,
        )
        z = self._generic_point(pen, rng)
        xi = pen.random_tangent(z, rng)
        # penalized Hessian = unconstrained lifted Hessian + 2 lambda A^T A
        hx_pen = pen.rhess(z, xi).dx
        hx_lift, _ = pen._euclid_hess(z.x, z.u.basis, xi.dx, xi.du)
        extra = 2.0 * 2.0 * pen.measurement.adjoint(pen.measurement.apply(xi.dx))
        assert np.allclose(hx_pen, hx_lift + extra, atol=1e-9)


class TestFdCheck:
    def test_monomial_passes(self, rng):
        obj, _ = small_masked_objective(seed=13)
        z0 = default_init(obj)
        z = ProductPoint(z0.x, GrassmannPoint(random_basis(rng, obj.grassmann_ambient(), obj.rank_r)))
        report = fd_check(obj, z, tol=1e-5, rng=rng, n_dirs=5)
        assert report.passed, (report.grad_error, report.hess_error)

    def test_gaussian_gradient_passes(self, rng):
        obj, _ = small_masked_objective(kind="gaussian_kernel", seed=14)
        z0 = default_init(obj)
        z = ProductPoint(z0.x, GrassmannPoint(random_basis(rng, obj.grassmann_ambient(), obj.rank_r)))
        report = fd_check(obj, z, tol=1e-5, rng=rng, n_dirs=5)
        assert report.grad_error <= 1e-5

    def test_report_fields(self, rng):
        obj, _ = small_masked_objective(seed=15)
        report = fd_check(obj, default_init(obj), tol=1e-5, rng=rng, n_dirs=2)
        assert report.tol == 1e-5
        assert report.grad_error >= 0.0
