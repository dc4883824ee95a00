import numpy as np
import pytest

from nlrecover.lifting import (
    FeatureSizeError,
    LiftingSpec,
    count_monomials,
    gaussian_grad_x,
    gaussian_kernel,
    lift_grad_w,
    monomial_features,
    monomial_features_vjp,
    monomial_grad_x,
    monomial_hess,
    monomial_kernel,
    multi_index_table,
)
from nlrecover.synth import ClusterSpec, UosSpec, gen_clusters, gen_uos, numerical_rank


def random_basis(rng, p, r):
    q, _ = np.linalg.qr(rng.standard_normal((p, r)))
    return q


class TestCountMonomials:
    def test_reference_values(self):
        assert count_monomials(15, 2) == 136
        assert count_monomials(20, 5) == 53130

    def test_degree_zero(self):
        assert count_monomials(7, 0) == 1

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            count_monomials(0, 2)
        with pytest.raises(ValueError):
            count_monomials(3, -1)


class TestMultiIndexTable:
    def test_length_and_uniqueness(self):
        table = multi_index_table(3, 3)
        assert len(table) == count_monomials(3, 3)
        rows = {tuple(r) for r in table.exponents}
        assert len(rows) == len(table)

    def test_graded_order(self):
        table = multi_index_table(2, 2)
        degrees = table.exponents.sum(axis=1)
        assert list(degrees) == sorted(degrees)
        # within each degree the leading variable comes first
        assert [tuple(r) for r in table.exponents] == [
            (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)
        ]


class TestMonomialFeatures:
    def test_univariate_quadratic(self):
        phi = monomial_features(np.array([[2.0]]), 2)
        assert np.allclose(phi.ravel(), [1.0, 2.0, 4.0])

    def test_bivariate_linear(self):
        phi = monomial_features(np.array([[3.0], [5.0]]), 1)
        assert np.allclose(phi.ravel(), [1.0, 3.0, 5.0])

    def test_rank_bound_union_of_subspaces(self):
        # 2 subspaces of dim 2 in R^6: rank bounded by 2 * C(4, 2) = 12
        m_mat, _ = gen_uos(UosSpec(n=6, k=2, dims=(2, 2), pts_per=30), np.random.default_rng(3))
        phi = monomial_features(m_mat, 2)
        assert numerical_rank(phi, 1e-8) <= 12

    def test_size_cap(self):
        with pytest.raises(FeatureSizeError):
            monomial_features(np.zeros((20, 2)), 5)  # N(20,5) = 53130 > cap


class TestMonomialKernel:
    def test_linear_homogeneous_is_gram(self, rng):
        x = rng.standard_normal((3, 5))
        y = rng.standard_normal((3, 4))
        assert np.allclose(monomial_kernel(x, y, 1, 0.0), x.T @ y)

    def test_scalar_example(self):
        k = monomial_kernel(np.array([[2.0]]), np.array([[3.0]]), 2, 1.0)
        assert k.item() == pytest.approx(49.0)

    def test_symmetric_psd(self, rng):
        x = rng.standard_normal((4, 9))
        k = monomial_kernel(x, x, 3, 1.0)
        assert np.allclose(k, k.T)
        vals = np.linalg.eigvalsh(k)
        assert vals.min() >= -1e-10 * np.linalg.norm(k)

    def test_rank_matches_explicit_features(self, rng):
        # K_d(X, X) and Phi_d(X) have the same rank (coefficients differ)
        for n, d, s in ((3, 2, 14), (4, 2, 30)):
            x = rng.standard_normal((n, s))
            k_rank = numerical_rank(monomial_kernel(x, x, d, 1.0), 1e-8)
            phi_rank = numerical_rank(monomial_features(x, d), 1e-8)
            assert k_rank == phi_rank

    def test_degree_zero_is_ones(self, rng):
        x = rng.standard_normal((2, 3))
        assert np.all(monomial_kernel(x, x, 0, 1.0) == 1.0)


class TestGaussianKernel:
    def test_diagonal_is_one(self, rng):
        x = rng.standard_normal((3, 6))
        k = gaussian_kernel(x, x, 1.5)
        assert np.allclose(np.diag(k), 1.0)
        assert np.all(k > 0.0) and np.all(k <= 1.0 + 1e-15)

    def test_characteristic_distance(self):
        sigma = 2.5
        x = np.zeros((3, 1))
        y = np.zeros((3, 1))
        y[0, 0] = sigma * np.sqrt(2.0)
        assert gaussian_kernel(x, y, sigma).item() == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_two_cluster_spectral_gap(self):
        # top-2 singular values dominate: median sigma3/sigma2 < 0.1 over seeds
        ratios = []
        for seed in range(12):
            m_mat, _ = gen_clusters(ClusterSpec(n=2, k=2, pts_per=50), np.random.default_rng(seed))
            sv = np.linalg.svd(gaussian_kernel(m_mat, m_mat, 2.5), compute_uv=False)
            ratios.append(sv[2] / sv[1])
        assert np.median(ratios) < 0.1

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            gaussian_kernel(np.zeros((2, 2)), np.zeros((2, 2)), 0.0)


def euclid_fd_gradient(cost, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (cost(x + e) - cost(x - e)) / (2 * h)
    return g


class TestMonomialGradX:
    def test_full_subspace_gives_zero(self, rng):
        x = rng.standard_normal((3, 5))
        w_full = np.eye(5)  # spans everything: P_perp = 0
        assert np.linalg.norm(monomial_grad_x(x, w_full, 2, 1.0)) == 0.0

    def test_degree_one_homogeneous(self, rng):
        x = rng.standard_normal((4, 6))
        w = random_basis(rng, 6, 2)
        p_perp = np.eye(6) - w @ w.T
        assert np.allclose(monomial_grad_x(x, w, 1, 0.0), 2.0 * x @ p_perp, atol=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_matches_finite_differences(self, d, rng):
        n, s, r = 4, 6, 2
        x = rng.standard_normal((n, s))
        w = random_basis(rng, s, r)
        p_perp = np.eye(s) - w @ w.T

        def cost(xm):
            return float(np.trace(p_perp @ monomial_kernel(xm, xm, d, 1.0)))

        analytic = monomial_grad_x(x, w, d, 1.0)
        fd = euclid_fd_gradient(cost, x)
        rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(analytic), 1e-12)
        assert rel <= 1e-6

    def test_degree_validation(self, rng):
        with pytest.raises(ValueError):
            monomial_grad_x(np.zeros((2, 3)), random_basis(rng, 3, 1), 0, 1.0)


class TestMonomialHess:
    def test_degree_one_reduction(self, rng):
        # with d = 1 the (d-1)-weighted term vanishes: XX block is 2 dx (K0 o P)
        x = rng.standard_normal((3, 5))
        w = random_basis(rng, 5, 2)
        dx = rng.standard_normal((3, 5))
        dw = np.zeros((5, 2))
        h_x, _ = monomial_hess(x, w, 1, 1.0, dx, dw)
        p_perp = np.eye(5) - w @ w.T
        assert np.allclose(h_x, 2.0 * dx @ p_perp, atol=1e-12)

    def test_symmetry(self, rng):
        n, s, r, d = 4, 6, 2, 2
        x = rng.standard_normal((n, s))
        w = random_basis(rng, s, r)
        for _ in range(5):
            dx1, dw1 = rng.standard_normal((n, s)), rng.standard_normal((s, r))
            dx2, dw2 = rng.standard_normal((n, s)), rng.standard_normal((s, r))
            h1 = monomial_hess(x, w, d, 1.0, dx1, dw1)
            h2 = monomial_hess(x, w, d, 1.0, dx2, dw2)
            a = np.vdot(dx2, h1[0]) + np.vdot(dw2, h1[1])
            b = np.vdot(dx1, h2[0]) + np.vdot(dw1, h2[1])
            assert abs(a - b) <= 1e-9 * (1 + abs(a) + abs(b))

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_matches_fd_of_gradient(self, d, rng):
        n, s, r = 3, 5, 2
        x = rng.standard_normal((n, s))
        w = random_basis(rng, s, r)
        dx = rng.standard_normal((n, s))
        dw = rng.standard_normal((s, r))
        h_x, h_w = monomial_hess(x, w, d, 1.0, dx, dw)
        h = 1e-6 * (1 + np.linalg.norm(x))

        def grads(xm, wm):
            return monomial_grad_x(xm, wm, d, 1.0), lift_grad_w(monomial_kernel(xm, xm, d, 1.0), wm)

        gx_p, gw_p = grads(x + h * dx, w + h * dw)
        gx_m, gw_m = grads(x - h * dx, w - h * dw)
        fd_x = (gx_p - gx_m) / (2 * h)
        fd_w = (gw_p - gw_m) / (2 * h)
        num = np.sqrt(np.linalg.norm(h_x - fd_x) ** 2 + np.linalg.norm(h_w - fd_w) ** 2)
        den = max(np.sqrt(np.linalg.norm(h_x) ** 2 + np.linalg.norm(h_w) ** 2), 1e-12)
        assert num / den <= 1e-5


class TestGaussianGradX:
    def test_full_subspace_gives_zero(self, rng):
        x = rng.standard_normal((3, 4))
        assert np.linalg.norm(gaussian_grad_x(x, np.eye(4), 1.0)) == 0.0

    def test_duplicate_columns_antisymmetric(self):
        x = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
        w = np.array([[1.0], [1.0]]) / np.sqrt(2.0)
        g = gaussian_grad_x(x, w, 1.5)
        assert np.all(np.isfinite(g))
        assert np.allclose(g[:, 0], -g[:, 1], atol=1e-12)

    def test_matches_finite_differences(self, rng):
        n, s, r, sigma = 3, 8, 2, 1.7
        x = rng.standard_normal((n, s))
        w = random_basis(rng, s, r)
        p_perp = np.eye(s) - w @ w.T

        def cost(xm):
            return float(np.trace(p_perp @ gaussian_kernel(xm, xm, sigma)))

        analytic = gaussian_grad_x(x, w, sigma)
        fd = euclid_fd_gradient(cost, x)
        rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(analytic), 1e-12)
        assert rel <= 1e-6


class TestLiftGradW:
    def test_identity_kernel(self, rng):
        w = random_basis(rng, 5, 2)
        assert np.allclose(lift_grad_w(np.eye(5), w), -2.0 * w)

    def test_invariant_subspace_is_critical(self, rng):
        a = rng.standard_normal((6, 6))
        k = a @ a.T
        vals, vecs = np.linalg.eigh(k)
        w = vecs[:, -2:]  # leading eigenvectors
        g = lift_grad_w(k, w)
        riem = g - w @ (w.T @ g)
        assert np.linalg.norm(riem) <= 1e-10 * np.linalg.norm(k)

    def test_matches_finite_differences(self, rng):
        s, r = 6, 2
        a = rng.standard_normal((s, s))
        k = a @ a.T
        w = random_basis(rng, s, r)
        dw = rng.standard_normal((s, r))

        def cost(wm):
            return float(np.trace(k) - np.trace(wm.T @ k @ wm))

        h = 1e-7
        fd = (cost(w + h * dw) - cost(w - h * dw)) / (2 * h)
        analytic = np.vdot(lift_grad_w(k, w), dw)
        assert abs(fd - analytic) <= 1e-8 * max(1.0, abs(analytic))


class TestVjp:
    def test_matches_dense_jacobian(self, rng):
        n, s, d = 3, 4, 2
        x = rng.standard_normal((n, s))
        r_mat = rng.standard_normal((count_monomials(n, d), s))

        def cost(xm):
            return float(np.vdot(r_mat, monomial_features(xm, d)))

        fd = euclid_fd_gradient(cost, x)
        assert np.allclose(monomial_features_vjp(x, d, r_mat), fd, atol=1e-6)


class TestLiftingSpec:
    def test_kernel_dispatch(self, rng):
        x = rng.standard_normal((3, 4))
        spec = LiftingSpec.monomial(3, 2, offset=1.0)
        assert np.allclose(spec.kernel(x), monomial_kernel(x, x, 2, 1.0))
        gspec = LiftingSpec.gaussian(3, 2.0)
        assert np.allclose(gspec.kernel(x), gaussian_kernel(x, x, 2.0))
        fspec = LiftingSpec.monomials(3, 2)
        phi = monomial_features(x, 2)
        assert np.allclose(fspec.kernel(x), phi.T @ phi)

    def test_validation(self):
        with pytest.raises(ValueError):
            LiftingSpec("unknown", 3)
        with pytest.raises(ValueError):
            LiftingSpec.gaussian(3, -1.0)
        with pytest.raises(ValueError):
            LiftingSpec.monomial(3, 0)

    def test_rank_bound_for_sampled_unions(self):
        # rank(Phi_d) <= p * C(r_tilde + d, d) for unions of p subspaces
        rng = np.random.default_rng(11)
        for p, r_tilde, d in ((2, 2, 2), (3, 1, 3), (4, 3, 2), (2, 3, 3)):
            n = max(r_tilde + 2, 5)
            spec = UosSpec(n=n, k=p, dims=(r_tilde,) * p, pts_per=25)
            m_mat, _ = gen_uos(spec, rng)
            try:
                phi = monomial_features(m_mat, d)
            except FeatureSizeError:
                continue
            from math import comb

            assert numerical_rank(phi, 1e-8) <= p * comb(r_tilde + d, d)
