"""Solvers for the lifted recovery problem.

Three families:
  * a Riemannian trust-region method with a Steihaug-Toint truncated-CG
    subproblem (first- or second-order model),
  * an alternating minimization scheme: inexact minimization in X (projected
    gradient descent with Armijo backtracking, or an inner trust region on the
    X factor) alternating with a truncated-SVD update of the subspace, with an
    adaptive exact/randomized SVD policy,
  * a simple one-gradient-step-per-SVD alternation.

All solvers record a per-iteration trace serializable to CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .manifold import (
    GrassmannPoint,
    ProductPoint,
    ProductTangent,
    grass_distance,
    meas_feasible_point,
    meas_project,
)
from .objective import Objective, feature_residual_cost, kernel_trace_cost


class NumericalError(RuntimeError):
    """Cost or curvature became non-finite."""


class LineSearchError(RuntimeError):
    """Armijo backtracking exhausted its budget; gradient or direction is
    unreliable at working precision."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass
class TcgConfig:
    max_inner: int | None = None  # default: tangent-space dimension
    kappa: float = 0.1
    theta: float = 1.0


@dataclass
class RtrConfig:
    delta0: float = 1.0
    delta_bar: float | None = None  # default: 2 sqrt(dim)
    rho_prime: float = 0.1
    eps_g: float = 1e-6
    eps_h: float = math.inf  # inf disables second-order stopping
    max_iter: int = 500
    tcg: TcgConfig = field(default_factory=TcgConfig)
    use_hessian: bool = True  # False: identity model (first-order variant)

    def __post_init__(self):
        if not 0 < self.rho_prime < 0.25:
            raise ValueError("rho_prime must lie in (0, 1/4)")
        if self.delta_bar is not None and not 0 < self.delta0 < self.delta_bar:
            raise ValueError("need 0 < delta0 < delta_bar")


@dataclass
class ArmijoConfig:
    alpha0: float = 2.0
    tau: float = 0.5
    beta: float = 1e-4
    max_backtracks: int = 60


@dataclass
class SvdPolicyConfig:
    tau1: float = 1e-3
    tau2: float = 1e-1
    oversample: int = 10
    power_q: int = 1

    def __post_init__(self):
        if not 0 < self.tau1 < self.tau2 < 1:
            raise ValueError("need 0 < tau1 << tau2 < 1")


@dataclass
class AltminConfig:
    eps_x: float = 1e-6
    eps_u: float = 1e-6
    schedule: str = "greedy"  # or "adaptive"
    theta: float = 0.5
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    svd_policy: SvdPolicyConfig = field(default_factory=SvdPolicyConfig)
    max_outer: int = 200
    max_inner: int = 200
    inner: str = "gradient"  # or "trust_region"

    def __post_init__(self):
        if self.schedule not in ("greedy", "adaptive"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.inner not in ("gradient", "trust_region"):
            raise ValueError(f"unknown inner solver {self.inner!r}")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")


# --------------------------------------------------------------------------
# trace
# --------------------------------------------------------------------------

TRACE_COLUMNS = ("k", "f", "gnorm_x", "gnorm_u", "step", "delta", "rho", "svd_mode", "inner_iters", "rmse")


@dataclass
class TraceRecord:
    k: int
    f: float
    gnorm_x: float
    gnorm_u: float
    step: float | None = None
    delta: float | None = None
    rho: float | None = None
    svd_mode: str | None = None
    inner_iters: int | None = None
    rmse: float | None = None


@dataclass
class SolveTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = "max_iter"  # grad_tol | max_iter | stalled
    extras: dict = field(default_factory=dict)

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for r in self.records:
                writer.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# --------------------------------------------------------------------------
# SVD machinery
# --------------------------------------------------------------------------


def truncated_svd(y_mat: np.ndarray, r: int) -> GrassmannPoint:
    """Span of the r leading left singular vectors. Ties at sigma_r are broken
    by the order the decomposition returns."""
    y_mat = np.asarray(y_mat, dtype=float)
    if not 1 <= r < min(y_mat.shape):
        raise ValueError("need 1 <= r < min(p, s)")
    u, _, _ = np.linalg.svd(y_mat, full_matrices=False)
    return GrassmannPoint(u[:, :r])


def randomized_svd(
    y_mat: np.ndarray,
    r: int,
    oversample: int = 10,
    power_q: int = 1,
    rng: np.random.Generator | None = None,
) -> GrassmannPoint:
    """Gaussian range finder of width r + oversample with power_q passes of
    Y Y^T (re-orthonormalized), then an exact SVD of the sketch."""
    rng = np.random.default_rng(0) if rng is None else rng
    y_mat = np.asarray(y_mat, dtype=float)
    p, s = y_mat.shape
    width = min(r + oversample, min(p, s))
    omega = rng.standard_normal((s, width))
    q, _ = np.linalg.qr(y_mat @ omega)
    for _ in range(power_q):
        z, _ = np.linalg.qr(y_mat.T @ q)
        q, _ = np.linalg.qr(y_mat @ z)
    b = q.T @ y_mat
    ub, _, _ = np.linalg.svd(b, full_matrices=False)
    return GrassmannPoint(q @ ub[:, :r])


def svd_policy(f_val: float, tau1: float, tau2: float) -> str:
    """Route the subspace update: exact SVD far from a solution, randomized
    with one power pass in the middle range, plain randomized near it."""
    if f_val > tau2:
        return "exact"
    if f_val > tau1:
        return "rand_power"
    return "rand_plain"


def wedin_gap_check(y1: np.ndarray, y2: np.ndarray, r: int, delta: float) -> bool:
    """Test oracle: dist(U1, U2)^2 <= 2 ||Y1 - Y2||_F^2 / delta^2 whenever both
    spectra have sigma_r - sigma_{r+1} >= delta."""
    u1, s1, _ = np.linalg.svd(np.asarray(y1, dtype=float), full_matrices=False)
    u2, s2, _ = np.linalg.svd(np.asarray(y2, dtype=float), full_matrices=False)
    if s1[r - 1] - s1[r] < delta or s2[r - 1] - s2[r] < delta:
        raise ValueError("spectral gap below delta; the bound does not apply")
    d = grass_distance(GrassmannPoint(u1[:, :r]), GrassmannPoint(u2[:, :r]))
    bound = 2.0 * np.sum((y1 - y2) ** 2) / delta**2
    return d**2 <= bound + 1e-12 * (1.0 + bound)


# --------------------------------------------------------------------------
# Armijo backtracking
# --------------------------------------------------------------------------


def armijo(
    f_along: Callable[[float], float],
    f0: float,
    g_dot_d: float,
    cfg: ArmijoConfig | None = None,
) -> float:
    """Largest step alpha in {alpha0 tau^i} with
    f(alpha) <= f0 + beta alpha <g, d>. Requires a descent direction."""
    cfg = cfg or ArmijoConfig()
    if g_dot_d >= 0:
        raise ValueError("not a descent direction")
    alpha = cfg.alpha0
    for _ in range(cfg.max_backtracks + 1):
        if f_along(alpha) <= f0 + cfg.beta * alpha * g_dot_d:
            return alpha
        alpha *= cfg.tau
    raise LineSearchError(
        f"no Armijo step after {cfg.max_backtracks} backtracks (f0={f0:.6g})"
    )


# --------------------------------------------------------------------------
# generic Riemannian problem interface + truncated CG
# --------------------------------------------------------------------------


@dataclass
class RiemannianProblem:
    """Minimal interface the trust-region loop needs. Tangent vectors must
    support +, -, unary - and scalar *. hess_at(point) returns the Hessian as
    an operator with point-dependent data precomputed."""

    cost: Callable
    grad: Callable
    hess_at: Callable  # point -> (tangent -> tangent)
    retract: Callable
    inner: Callable  # (tangent, tangent) -> float
    rand_tangent: Callable  # (point, rng) -> tangent
    dim: int

    def norm(self, xi) -> float:
        return math.sqrt(max(self.inner(xi, xi), 0.0))


def product_problem(obj: Objective) -> RiemannianProblem:
    meas = obj.measurement
    if obj.constrained:
        mask_dim = meas.n * meas.s - meas.m
    else:
        mask_dim = meas.n * meas.s
    s_amb = obj.grassmann_ambient()
    dim = mask_dim + (s_amb - obj.rank_r) * obj.rank_r
    return RiemannianProblem(
        cost=obj.cost,
        grad=obj.rgrad,
        hess_at=obj.rhess_operator,
        retract=obj.retract,
        inner=lambda a, b: float(np.vdot(a.dx, b.dx) + np.vdot(a.du, b.du)),
        rand_tangent=obj.random_tangent,
        dim=max(dim, 1),
    )


def x_factor_problem(obj: Objective, u: GrassmannPoint) -> RiemannianProblem:
    """The X-subproblem with the subspace frozen, as a Riemannian problem on
    the affine factor alone (tangent vectors are plain matrices)."""
    meas = obj.measurement
    zero_du = np.zeros(u.basis.shape)

    def cost(x):
        return obj.cost(ProductPoint(x, u))

    def grad(x):
        return obj.rgrad(ProductPoint(x, u)).dx

    def hess_at(x):
        op = obj.rhess_operator(ProductPoint(x, u))
        return lambda dx: op(ProductTangent(dx, zero_du)).dx

    def retract(x, dx):
        return x + dx

    def rand_tangent(x, rng):
        d = rng.standard_normal(x.shape)
        return meas_project(meas, d).value if obj.constrained else d

    dim = meas.n * meas.s - (meas.m if obj.constrained else 0)
    return RiemannianProblem(
        cost=cost,
        grad=grad,
        hess_at=hess_at,
        retract=retract,
        inner=lambda a, b: float(np.vdot(a, b)),
        rand_tangent=rand_tangent,
        dim=max(dim, 1),
    )


def tcg_subproblem(
    grad,
    hess_op: Callable,
    delta: float,
    cfg: TcgConfig,
    inner: Callable,
    dim: int,
) -> tuple[object, bool, int]:
    """Steihaug-Toint truncated CG for the trust-region subproblem.

    Returns (step, hit_boundary, iterations). Starts at zero, so the model
    decrease is at least the Cauchy decrease; exits on the boundary, on
    negative curvature (followed to the boundary), or once the residual drops
    below ||g|| min(kappa, ||g||^theta).
    """
    if delta <= 0:
        raise ValueError("trust radius must be positive")
    eta = 0.0 * grad
    r = grad
    d = -r
    r_sq = inner(r, r)
    g_norm = math.sqrt(r_sq)
    if g_norm == 0.0:
        return eta, False, 0
    tol = g_norm * min(cfg.kappa, g_norm**cfg.theta)
    max_inner = cfg.max_inner if cfg.max_inner is not None else dim
    eta_sq = 0.0

    for i in range(max_inner):
        hd = hess_op(d)
        dhd = inner(d, hd)
        if not math.isfinite(dhd):
            raise NumericalError("non-finite curvature in the subproblem")
        d_sq = inner(d, d)
        eta_d = inner(eta, d)
        if dhd <= 0:
            tau = _boundary_step(eta_sq, eta_d, d_sq, delta)
            return eta + tau * d, True, i + 1
        alpha = r_sq / dhd
        if eta_sq + 2.0 * alpha * eta_d + alpha**2 * d_sq >= delta**2:
            tau = _boundary_step(eta_sq, eta_d, d_sq, delta)
            return eta + tau * d, True, i + 1
        eta = eta + alpha * d
        eta_sq = eta_sq + 2.0 * alpha * eta_d + alpha**2 * d_sq
        r = r + alpha * hd
        r_sq_new = inner(r, r)
        if math.sqrt(r_sq_new) <= tol:
            return eta, False, i + 1
        d = -r + (r_sq_new / r_sq) * d
        r_sq = r_sq_new
    return eta, False, max_inner


def _boundary_step(eta_sq: float, eta_d: float, d_sq: float, delta: float) -> float:
    """Positive root of ||eta + tau d|| = delta."""
    disc = eta_d**2 + d_sq * (delta**2 - eta_sq)
    return (-eta_d + math.sqrt(max(disc, 0.0))) / d_sq


def _min_eig_estimate(
    prob: RiemannianProblem, z, rng: np.random.Generator, iters: int = 30
) -> tuple[float, object]:
    """Lanczos estimate of the smallest Hessian eigenvalue on the tangent
    space at z, with the corresponding Ritz direction."""
    v = prob.rand_tangent(z, rng)
    nrm = prob.norm(v)
    if nrm == 0.0:
        return 0.0, v
    v = (1.0 / nrm) * v
    basis = [v]
    alphas, betas = [], []
    v_prev = None
    hop = prob.hess_at(z)
    for _ in range(min(iters, prob.dim)):
        w = hop(basis[-1])
        a = prob.inner(basis[-1], w)
        alphas.append(a)
        w = w - a * basis[-1]
        if v_prev is not None:
            w = w - betas[-1] * v_prev
        # full re-orthogonalization for numerical robustness at small dims
        for u in basis:
            w = w - prob.inner(w, u) * u
        b = prob.norm(w)
        if b < 1e-12:
            break
        betas.append(b)
        v_prev = basis[-1]
        basis.append((1.0 / b) * w)
    t = np.diag(alphas)
    for i, b in enumerate(betas[: len(alphas) - 1]):
        t[i, i + 1] = t[i + 1, i] = b
    evals, evecs = np.linalg.eigh(t)
    lam = float(evals[0])
    coeffs = evecs[:, 0]
    direction = coeffs[0] * basis[0]
    for c, u in zip(coeffs[1:], basis[1 : len(coeffs)]):
        direction = direction + c * u
    return lam, direction


# --------------------------------------------------------------------------
# Riemannian trust region
# --------------------------------------------------------------------------


def rtr_generic(
    prob: RiemannianProblem,
    z0,
    cfg: RtrConfig,
    rmse_of=None,
    gnorm_parts=None,
    on_iterate=None,
) -> tuple[object, SolveTrace]:
    """Trust-region loop on an arbitrary Riemannian problem.

    rmse_of(z) optionally records an error-to-truth column; gnorm_parts(g)
    splits the gradient norm into (x, u) components for the trace; on_iterate
    is called with every iterate (for invariant monitoring).
    """
    delta_bar = cfg.delta_bar if cfg.delta_bar is not None else 2.0 * math.sqrt(prob.dim)
    if not 0 < cfg.delta0 < delta_bar:
        raise ValueError("need 0 < delta0 < delta_bar")
    rng = np.random.default_rng(2**32 - 1)
    z = z0
    delta = cfg.delta0
    trace = SolveTrace()
    f_val = prob.cost(z)
    if not math.isfinite(f_val):
        raise NumericalError("cost is not finite at the initial point")

    def hess_model(point):
        if cfg.use_hessian:
            return prob.hess_at(point)
        return lambda v: v

    for k in range(cfg.max_iter):
        if on_iterate is not None:
            on_iterate(z)
        g = prob.grad(z)
        gnorm = prob.norm(g)
        gx, gu = gnorm_parts(g) if gnorm_parts is not None else (gnorm, 0.0)
        rec = TraceRecord(
            k=k,
            f=f_val,
            gnorm_x=gx,
            gnorm_u=gu,
            delta=delta,
            rmse=rmse_of(z) if rmse_of is not None else None,
        )
        hop = hess_model(z)
        if gnorm > cfg.eps_g:
            eta, on_boundary, n_inner = tcg_subproblem(
                g, hop, delta, cfg.tcg, prob.inner, prob.dim
            )
        elif math.isfinite(cfg.eps_h):
            lam_min, direction = _min_eig_estimate(prob, z, rng)
            if lam_min >= -cfg.eps_h:
                trace.append(rec)
                trace.status = "grad_tol"
                return z, trace
            # negative-curvature step to the boundary, oriented downhill
            nrm = prob.norm(direction)
            direction = (delta / nrm) * direction
            if prob.inner(g, direction) > 0:
                direction = -direction
            eta, on_boundary, n_inner = direction, True, 0
        else:
            trace.append(rec)
            trace.status = "grad_tol"
            return z, trace

        model_decrease = -(prob.inner(g, eta) + 0.5 * prob.inner(eta, hop(eta)))
        z_plus = prob.retract(z, eta)
        f_plus = prob.cost(z_plus)
        if not math.isfinite(f_plus):
            raise NumericalError("cost became non-finite at a trial point")
        actual = f_val - f_plus
        if model_decrease <= 1e-15 * (1.0 + abs(f_val)):
            rho = 1.0 if actual >= 0.0 else -math.inf
        else:
            rho = actual / model_decrease

        if rho < 0.25:
            delta = delta / 4.0
        elif rho > 0.75 and on_boundary:
            delta = min(2.0 * delta, delta_bar)
        accepted = rho > cfg.rho_prime
        if accepted:
            z = z_plus
            f_val = f_plus
        rec.step = prob.norm(eta)
        rec.rho = rho
        rec.inner_iters = n_inner
        trace.append(rec)
        if delta < 1e-16:
            trace.status = "stalled"
            return z, trace
    trace.status = "max_iter"
    return z, trace


def rtr_solve(
    obj: Objective,
    z0: ProductPoint,
    cfg: RtrConfig | None = None,
    truth: np.ndarray | None = None,
    on_iterate=None,
) -> tuple[ProductPoint, SolveTrace]:
    """Riemannian trust region on the full product manifold."""
    cfg = cfg or RtrConfig()
    prob = product_problem(obj)
    rmse_of = None
    if truth is not None:
        scale = math.sqrt(truth.size)
        rmse_of = lambda z: float(np.linalg.norm(z.x - truth)) / scale
    gnorm_parts = lambda g: (float(np.linalg.norm(g.dx)), float(np.linalg.norm(g.du)))
    return rtr_generic(
        prob, z0, cfg, rmse_of=rmse_of, gnorm_parts=gnorm_parts, on_iterate=on_iterate
    )


# --------------------------------------------------------------------------
# alternating minimization
# --------------------------------------------------------------------------


def default_init(obj: Objective) -> ProductPoint:
    """Feasible X0 (observed entries / min-norm solution) plus the leading-r
    subspace of its lifting."""
    x0 = meas_feasible_point(obj.measurement)
    u0 = truncated_svd(obj.lift(x0), obj.rank_r)
    return ProductPoint(x0, u0)


def random_init(obj: Objective, rng: np.random.Generator, scale: float = 1.0) -> ProductPoint:
    """Feasible X0 perturbed by a random null-space component, with the
    subspace re-fit by a truncated SVD."""
    x0 = meas_feasible_point(obj.measurement)
    noise = meas_project(obj.measurement, rng.standard_normal(x0.shape)).value
    x0 = x0 + scale * noise
    u0 = truncated_svd(obj.lift(x0), obj.rank_r)
    return ProductPoint(x0, u0)


def rtr_solve_restarts(
    obj: Objective,
    cfg: RtrConfig | None = None,
    rng: np.random.Generator | None = None,
    n_starts: int = 3,
    perturb_scale: float = 0.3,
    truth: np.ndarray | None = None,
) -> tuple[ProductPoint, SolveTrace]:
    """Trust-region solves from the measured init plus perturbed restarts,
    keeping the lowest final cost; stops early once the cost is essentially
    zero. Restarts only help against bad basins of the nonconvex landscape."""
    cfg = cfg or RtrConfig()
    rng = np.random.default_rng(0) if rng is None else rng
    scale = max(float(np.trace(obj.lift(meas_feasible_point(obj.measurement))))
                if obj.form != "feature" else 1.0, 1.0)
    best = None
    for i in range(max(n_starts, 1)):
        z0 = default_init(obj) if i == 0 else random_init(obj, rng, perturb_scale)
        z, trace = rtr_solve(obj, z0, cfg, truth=truth)
        f_val = obj.cost(z)
        if best is None or f_val < best[0]:
            best = (f_val, z, trace)
        if f_val <= 1e-12 * scale:
            break
    return best[1], best[2]


def _subspace_update(
    obj: Objective,
    x_mat: np.ndarray,
    f_val: float,
    f_scale: float,
    cfg: SvdPolicyConfig,
    rng: np.random.Generator,
    force_exact: bool = False,
) -> tuple[GrassmannPoint, str]:
    lifted = obj.lift(x_mat)
    mode = "exact" if force_exact else svd_policy(f_val / f_scale, cfg.tau1, cfg.tau2)
    if mode == "exact":
        return truncated_svd(lifted, obj.rank_r), mode
    power_q = cfg.power_q if mode == "rand_power" else 0
    u_new = randomized_svd(lifted, obj.rank_r, cfg.oversample, power_q, rng)
    # the exact SVD never increases f; guard the randomized shortcut so the
    # monotonicity of the outer loop is preserved
    if _residual_of(obj, lifted, u_new) > f_val + 1e-12 * (1.0 + abs(f_val)):
        return truncated_svd(lifted, obj.rank_r), "exact"
    return u_new, mode


def _residual_of(obj: Objective, lifted: np.ndarray, u: GrassmannPoint) -> float:
    if obj.form == "feature":
        return feature_residual_cost(lifted, u.basis)
    return kernel_trace_cost(lifted, u.basis)


def altmin_solve(
    obj: Objective,
    z0: ProductPoint,
    cfg: AltminConfig | None = None,
    rng: np.random.Generator | None = None,
    truth: np.ndarray | None = None,
    on_iterate=None,
) -> tuple[ProductPoint, SolveTrace]:
    """Alternating minimization: inexact X-minimization to a scheduled
    tolerance, then a gated (randomized) truncated-SVD subspace update."""
    if not obj.constrained:
        raise ValueError("alternating minimization requires the constrained formulation")
    cfg = cfg or AltminConfig()
    rng = np.random.default_rng(0) if rng is None else rng
    trace = SolveTrace()
    x, u = z0.x, z0.u
    # the SVD-policy thresholds compare f after normalizing by the lifted
    # energy at the initial point (trace of K, or ||Phi||_F^2)
    lifted0 = obj.lift(z0.x)
    if obj.form == "feature":
        f_scale = max(float(np.sum(lifted0**2)), 1e-30)
    else:
        f_scale = max(float(np.trace(lifted0)), 1e-30)

    def rmse_of(xm):
        if truth is None:
            return None
        return float(np.linalg.norm(xm - truth)) / math.sqrt(truth.size)

    f_prev = math.inf
    no_progress = 0
    for k in range(cfg.max_outer):
        z = ProductPoint(x, u)
        if on_iterate is not None:
            on_iterate(z)
        g = obj.rgrad(z)
        gx = float(np.linalg.norm(g.dx))
        gu = float(np.linalg.norm(g.du))
        f_val = obj.cost(z)
        rec = TraceRecord(k=k, f=f_val, gnorm_x=gx, gnorm_u=gu, rmse=rmse_of(x))
        if gx <= cfg.eps_x and gu <= cfg.eps_u:
            trace.append(rec)
            trace.status = "grad_tol"
            return z, trace
        # descent below working precision over several whole outer rounds:
        # the alternation has stalled numerically
        if f_prev - f_val <= 1e-15 * (1.0 + abs(f_prev)):
            no_progress += 1
            if no_progress >= 3:
                trace.append(rec)
                trace.status = "stalled"
                return z, trace
        else:
            no_progress = 0
        f_prev = f_val

        eps_xk = cfg.eps_x if cfg.schedule == "greedy" else max(cfg.eps_x, cfg.theta * gx)

        stalled = False
        if cfg.inner == "trust_region":
            sub_cfg = RtrConfig(eps_g=eps_xk, max_iter=cfg.max_inner, rho_prime=0.1)
            x, sub_trace = rtr_generic(x_factor_problem(obj, u), x, sub_cfg)
            n_inner = len(sub_trace.records) - 1
            step = sub_trace.final.step
            f_val = obj.cost(ProductPoint(x, u))
        else:
            n_inner = 0
            step = None  # first inner step size, the one the descent bound uses
            while n_inner < cfg.max_inner:
                grad_x = obj.rgrad(ProductPoint(x, u)).dx
                gx_inner = float(np.linalg.norm(grad_x))
                if gx_inner <= eps_xk:
                    break
                f_here = obj.cost(ProductPoint(x, u))
                d = -grad_x
                try:
                    alpha = armijo(
                        lambda a: obj.cost(ProductPoint(x + a * d, u)),
                        f_here,
                        float(np.vdot(grad_x, d)),
                        cfg.armijo,
                    )
                except LineSearchError:
                    # descent direction is exact, so failure means the
                    # decrease fell below working precision: numerical stall
                    stalled = True
                    break
                if step is None:
                    step = alpha
                x = x + alpha * d
                n_inner += 1
            f_val = obj.cost(ProductPoint(x, u))

        if stalled:
            rec.step = step
            rec.inner_iters = n_inner
            trace.append(rec)
            trace.status = "stalled"
            return ProductPoint(x, u), trace

        # the subspace gradient is evaluated at the new X with the old basis
        gu_new = float(np.linalg.norm(obj.rgrad(ProductPoint(x, u)).du))
        if gu_new <= cfg.eps_u:
            svd_mode = "skip"
        else:
            u, svd_mode = _subspace_update(obj, x, f_val, f_scale, cfg.svd_policy, rng)
        rec.step = step
        rec.svd_mode = svd_mode
        rec.inner_iters = n_inner
        trace.append(rec)
    trace.status = "max_iter"
    return ProductPoint(x, u), trace


def simple_altmin_solve(
    obj: Objective,
    z0: ProductPoint,
    cfg: AltminConfig | None = None,
    truth: np.ndarray | None = None,
    on_iterate=None,
) -> tuple[ProductPoint, SolveTrace]:
    """One projected Armijo gradient step in X, then an exact truncated SVD,
    repeated until the X-gradient passes the tolerance."""
    if not obj.constrained:
        raise ValueError("alternating minimization requires the constrained formulation")
    cfg = cfg or AltminConfig()
    trace = SolveTrace()
    trace.extras["dist_increments"] = []
    x, u = z0.x, z0.u

    def rmse_of(xm):
        if truth is None:
            return None
        return float(np.linalg.norm(xm - truth)) / math.sqrt(truth.size)

    f_prev = math.inf
    no_progress = 0
    for k in range(cfg.max_outer):
        z = ProductPoint(x, u)
        if on_iterate is not None:
            on_iterate(z)
        g = obj.rgrad(z)
        gx = float(np.linalg.norm(g.dx))
        gu = float(np.linalg.norm(g.du))
        f_val = obj.cost(z)
        rec = TraceRecord(k=k, f=f_val, gnorm_x=gx, gnorm_u=gu, rmse=rmse_of(x))
        if gx <= cfg.eps_x:
            trace.append(rec)
            trace.status = "grad_tol"
            return z, trace
        if f_prev - f_val <= 1e-15 * (1.0 + abs(f_prev)):
            no_progress += 1
            if no_progress >= 3:
                trace.append(rec)
                trace.status = "stalled"
                return z, trace
        else:
            no_progress = 0
        f_prev = f_val
        d = -g.dx
        try:
            step = armijo(
                lambda a: obj.cost(ProductPoint(x + a * d, u)),
                f_val,
                float(np.vdot(g.dx, d)),
                cfg.armijo,
            )
        except LineSearchError:
            trace.append(rec)
            trace.status = "stalled"
            return z, trace
        x_new = x + step * d
        u_new = truncated_svd(obj.lift(x_new), obj.rank_r)
        trace.extras["dist_increments"].append(
            math.sqrt(float(np.sum((x_new - x) ** 2)) + grass_distance(u, u_new) ** 2)
        )
        x, u = x_new, u_new
        rec.step = step
        rec.svd_mode = "exact"
        rec.inner_iters = 1
        trace.append(rec)
    trace.status = "max_iter"
    return ProductPoint(x, u), trace
