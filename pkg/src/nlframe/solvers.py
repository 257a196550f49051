"""Iterative reconstruction schemes with certified step windows and error bounds.

The certified constants (beta, derivative ratio bounds, stability bounds) are
sampled estimates from :mod:`nlframe.certify`, so every window below is a
certificate with the caveats recorded there.  Passing ``force=True`` in the
config runs a solver whose precondition failed; its verdicts are then
labelled ``unverified``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import certify
from .errors import CertificateError, DivergenceError, InvalidInputError
from .maps import DifferentiableMap
from .spaces import L2, LINF, NormSpec, as_operator, as_vector, left_inverse

DIVERGENCE_RUN = 10
GL_NODES = 8

# how each reported solver constant was obtained
CONSTANT_PROVENANCE = {
    "beta": certify.SAMPLED_LOWER,
    "ratio_sup": certify.SAMPLED_LOWER,
    "ratio_inf": certify.SAMPLED_UPPER,
    "A": certify.SAMPLED_UPPER,
    "B": certify.SAMPLED_LOWER,
    "norm_T": certify.EXACT,
    "norm_Tdag": certify.EXACT,
    "sigma_min_T": certify.EXACT,
    "two_minus_beta_sq": certify.FORMULA,
    "window": certify.FORMULA,
    "sup_G_prime_H": certify.SAMPLED_LOWER,
    "sup_G_prime_A": certify.SAMPLED_LOWER,
}


@dataclass(frozen=True)
class SolverConfig:
    mu: float = 1.0
    max_iter: int = 10_000
    tol: float = 1e-12
    norm: NormSpec = L2
    force: bool = False

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidInputError("mu must be positive")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if int(self.max_iter) < 1:
            raise InvalidInputError("max_iter must be >= 1")
        object.__setattr__(self, "norm", NormSpec.parse(self.norm))

    def to_dict(self):
        return {"mu": self.mu, "max_iter": self.max_iter, "tol": self.tol,
                "norm": self.norm.to_dict(), "force": self.force}


@dataclass
class SolverReport:
    algorithm: str
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list
    ratios: list
    r0_predicted: float = None
    bound_coefficient: float = None
    noise_norm: float = None
    bound: float = None
    consistency_residual: float = None
    errors_l2: list = None
    errors_linf: list = None
    constants: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def error_l2(self):
        return None if not self.errors_l2 else self.errors_l2[-1]

    @property
    def error_linf(self):
        return None if not self.errors_linf else self.errors_linf[-1]

    def trace_rows(self):
        """(iter, residual, ratio, err_l2, err_linf) per step; ratio is blank on the first."""
        rows = []
        for i, r in enumerate(self.residuals):
            ratio = self.ratios[i - 1] if i >= 1 and i - 1 < len(self.ratios) else None
            e2 = self.errors_l2[i + 1] if self.errors_l2 else None
            ei = self.errors_linf[i + 1] if self.errors_linf else None
            rows.append((i + 1, r, ratio, e2, ei))
        return rows

    def to_dict(self):
        j = certify._jsonable
        return {
            "algorithm": self.algorithm,
            "x": j(self.x),
            "iterations": self.iterations,
            "converged": self.converged,
            "r0_predicted": j(self.r0_predicted),
            "bound_coefficient": j(self.bound_coefficient),
            "noise_norm": j(self.noise_norm),
            "bound": j(self.bound),
            "error_l2": j(self.error_l2),
            "error_linf": j(self.error_linf),
            "consistency_residual": j(self.consistency_residual),
            "max_ratio": j(max(self.ratios) if self.ratios else None),
            "constants": {k: j(v) for k, v in self.constants.items()},
            "verdicts": [{"condition": c, "status": s, "detail": j(d)} for c, s, d in self.verdicts],
            "extras": {k: j(v) for k, v in self.extras.items()},
        }


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------

def _run(step, x0, cfg, x_true=None, thin=1):
    x = np.array(x0, dtype=float)
    nrm = cfg.norm
    residuals, ratios, trace = [], [], [x.copy()]
    e2 = [L2(x - x_true)] if x_true is not None else None
    ei = [LINF(x - x_true)] if x_true is not None else None
    run = 0
    converged = False
    for n in range(int(cfg.max_iter)):
        xn = step(x)
        if not np.all(np.isfinite(xn)):
            raise DivergenceError(f"non-finite iterate at step {n + 1}")
        d = nrm(xn - x)
        if residuals and residuals[-1] > 0:
            r = d / residuals[-1]
            ratios.append(r)
            run = run + 1 if r >= 1.0 else 0
            if run >= DIVERGENCE_RUN:
                raise DivergenceError(f"step ratio >= 1 for {DIVERGENCE_RUN} consecutive steps (at step {n + 1})")
        residuals.append(d)
        x = xn
        if x_true is not None:
            e2.append(L2(x - x_true))
            ei.append(LINF(x - x_true))
        if (n + 1) % thin == 0:
            trace.append(x.copy())
        if d <= cfg.tol * max(1.0, nrm(x)):
            converged = True
            break
    return x, residuals, ratios, converged, trace, e2, ei


def _status(ok, cfg):
    if ok:
        return "pass"
    return "unverified" if cfg.force else "fail"


def _gate(verdicts, cfg, what):
    failed = [(c, d) for c, s, d in verdicts if s == "fail"]
    if failed and not cfg.force:
        cond, detail = failed[0]
        margin = detail.get("margin") if isinstance(detail, dict) else None
        raise CertificateError(f"{what}: precondition failed: {cond}", margin=margin, verdicts=verdicts)


def default_plan(F, z, T=None, seed=0):
    """Sampling box scaled to a rough solution size (at least radius 1)."""
    z = np.asarray(z, dtype=float)
    if T is not None:
        T = as_operator(T)
        guess = np.linalg.lstsq(T.matrix, z, rcond=None)[0]
    else:
        guess = z
    R = max(1.0, 2.0 * float(np.max(np.abs(guess))) if guess.size else 1.0)
    return certify.SamplingPlan(box_radius=R, n_pts=256, n_dir=16, refine_rounds=2, seed=seed)


def _noise(F, z, x_true, noise_norm, norm=L2):
    if noise_norm is not None:
        return float(noise_norm)
    if x_true is not None:
        return norm(z - F(x_true))
    return None


# ---------------------------------------------------------------------------
# left-inverse iteration
# ---------------------------------------------------------------------------

def left_inverse_iteration(F, T, z, cfg, Tdag=None, x0=None, plan=None, x_true=None, noise_norm=None):
    """x <- x - mu T^+ (F(x) - z) with T^+ a left inverse of T.

    Preconditions: mu <= 1 / sup |F'(x)y|/|Ty| and beta |T| |T^+| < 1.  The
    predicted per-step ratio is r0 = 1 - mu (1 - beta |T| |T^+|) inf |F'(x)y|/|Ty|
    and the error bound is |T^+| / (1 - beta |T||T^+|) / inf(...) * |noise|.
    """
    T = as_operator(T)
    z = as_vector(z, F.out_dim, "z")
    Td = left_inverse(T) if Tdag is None else as_operator(Tdag)
    if np.max(np.abs(Td.matrix @ T.matrix - np.eye(T.shape[1]))) > 1e-10:
        raise InvalidInputError("Tdag is not a left inverse of T")
    plan = plan or default_plan(F, z, T)
    beta = certify.beta_FT(F, T, plan, norm=L2).estimate
    lo, hi = certify.derivative_ratio_bounds(F, T, plan)
    kappa = T.sigma_max * Td.sigma_max
    bk = beta * kappa
    mu = cfg.mu
    verdicts = [
        ("mu <= 1 / sup ratio", _status(mu <= (1.0 / hi) * (1 + 1e-12), cfg), {"mu": mu, "limit": 1.0 / hi,
                                                                               "margin": 1.0 / hi - mu}),
        ("beta |T| |T^+| < 1", _status(bk < 1.0, cfg), {"value": bk, "margin": 1.0 - bk}),
    ]
    _gate(verdicts, cfg, "left-inverse iteration")
    r0 = 1.0 - mu * (1.0 - bk) * lo
    coef = Td.sigma_max / (1.0 - bk) / lo if bk < 1.0 and lo > 0 else math.inf
    M = Td.matrix
    x0 = np.zeros(F.in_dim) if x0 is None else as_vector(x0, F.in_dim, "x0")
    xt = None if x_true is None else as_vector(x_true, F.in_dim, "x_true")
    x, res, ratios, conv, trace, e2, ei = _run(lambda x: x - mu * (M @ (F(x) - z)), x0, cfg, xt)
    rep = SolverReport("left-inverse", x, len(res), conv, res, ratios, r0_predicted=r0,
                       bound_coefficient=coef, consistency_residual=L2(M @ (F(x) - z)),
                       errors_l2=e2, errors_linf=ei, trace=trace, verdicts=verdicts)
    rep.constants = {"beta": beta, "ratio_inf": lo, "ratio_sup": hi, "norm_T": T.sigma_max,
                     "norm_Tdag": Td.sigma_max, "provenance": "beta, ratio_sup: sampled-lower-bound; "
                     "ratio_inf: sampled-upper-bound; norms: exact"}
    rep.noise_norm = _noise(F, z, xt, noise_norm)
    if rep.noise_norm is not None:
        rep.bound = coef * rep.noise_norm
    ok = all(r <= r0 + 1e-9 for r in ratios)
    rep.verdicts.append(("measured ratios <= r0", "pass" if ok else "fail", max(ratios) if ratios else 0.0))
    return rep


# ---------------------------------------------------------------------------
# Van Cittert iteration
# ---------------------------------------------------------------------------

def van_cittert_window(F, T, plan):
    """Sampled constants and the step window of the adjoint-residual iteration."""
    T = as_operator(T)
    beta = certify.beta_FT(F, T, plan, norm=L2).estimate
    A, B = certify.uniform_stability(F, plan, out_norm=L2).estimate
    gap = 2.0 - beta * beta
    window = gap * T.sigma_min * A / (T.sigma_max**2 * B**2) if gap > 0 else 0.0
    return {"beta": beta, "A": A, "B": B, "sigma_min_T": T.sigma_min, "norm_T": T.sigma_max,
            "two_minus_beta_sq": gap, "window": window}


def _vc_verdicts(c, mu, cfg):
    gap = c["two_minus_beta_sq"]
    return [
        ("beta < sqrt(2)", _status(gap > 1e-12, cfg), {"beta": c["beta"], "margin": gap}),
        ("T bounded below", _status(c["sigma_min_T"] > 0, cfg), {"sigma_min": c["sigma_min_T"]}),
        ("mu inside window", _status(gap > 1e-12 and mu < c["window"], cfg),
         {"mu": mu, "window": c["window"], "margin": c["window"] - mu}),
    ]


def _vc_rate(c, mu):
    gap = c["two_minus_beta_sq"]
    return 1.0 - mu * gap * c["sigma_min_T"] * c["A"] + mu * mu * c["norm_T"] ** 2 * c["B"] ** 2


def van_cittert_iteration(F, T, z, cfg, x0=None, plan=None, x_true=None, noise_norm=None):
    """u <- u - mu T^T (F(u) - z), certified for beta < sqrt(2) and mu in the window.

    The squared contraction factor is r1 = 1 - mu (2 - beta^2) s_min(T) A + mu^2 |T|^2 B^2
    and the error bound is 2|T| / ((2 - beta^2) s_min(T) A) * |noise|.
    """
    T = as_operator(T)
    z = as_vector(z, F.out_dim, "z")
    plan = plan or default_plan(F, z, T)
    c = van_cittert_window(F, T, plan)
    verdicts = _vc_verdicts(c, cfg.mu, cfg)
    _gate(verdicts, cfg, "Van Cittert iteration")
    mu = cfg.mu
    r1 = _vc_rate(c, mu)
    gap = c["two_minus_beta_sq"]
    coef = 2.0 * c["norm_T"] / (gap * c["sigma_min_T"] * c["A"]) if gap > 0 and c["A"] > 0 else math.inf
    M = T.matrix.T
    x0 = np.zeros(F.in_dim) if x0 is None else as_vector(x0, F.in_dim, "x0")
    xt = None if x_true is None else as_vector(x_true, F.in_dim, "x_true")
    x, res, ratios, conv, trace, e2, ei = _run(lambda u: u - mu * (M @ (F(u) - z)), x0, cfg, xt)
    rep = SolverReport("van-cittert", x, len(res), conv, res, ratios,
                       r0_predicted=math.sqrt(max(r1, 0.0)), bound_coefficient=coef,
                       consistency_residual=L2(M @ (F(x) - z)), errors_l2=e2, errors_linf=ei,
                       trace=trace, verdicts=verdicts, constants=dict(c))
    rep.constants["provenance"] = "beta, B: sampled-lower-bound; A: sampled-upper-bound; T norms: exact"
    rep.noise_norm = _noise(F, z, xt, noise_norm)
    if rep.noise_norm is not None:
        rep.bound = coef * rep.noise_norm
    ok = all(r <= rep.r0_predicted + 1e-9 for r in ratios)
    rep.verdicts.append(("measured ratios <= sqrt(r1)", "pass" if ok else "fail", max(ratios) if ratios else 0.0))
    return rep


# ---------------------------------------------------------------------------
# fixed points in a second norm
# ---------------------------------------------------------------------------

def norm_maxrow(M):
    """Operator norm induced by the max norm: the largest absolute row sum."""
    return float(np.max(np.sum(np.abs(M), axis=1)))


def norm_spectral(M):
    return float(np.linalg.norm(M, 2))


_GL = np.polynomial.legendre.leggauss(GL_NODES)


def averaged_jacobian(G, a, b):
    """int_0^1 G'(a + t (b - a)) dt by Gauss-Legendre quadrature."""
    t, w = _GL
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    P = a[None, :] + t[:, None] * (b - a)[None, :]
    J = G.derivatives_many(P)
    return np.tensordot(w, J, axes=1)


def fit_decay(b):
    """Fit b_n <= C r^n: r from a log-linear least-squares fit, C the smallest constant covering all n."""
    b = np.asarray(b, dtype=float)
    n = np.arange(1, b.size + 1)
    keep = b > 1e-300
    if keep.sum() < 2:
        return (float(b[0]) if b.size else 0.0), 0.0
    slope = np.polyfit(n[keep], np.log(b[keep]), 1)[0]
    r = float(math.exp(slope))
    C = float(np.max(b[keep] / r ** n[keep]))
    return C, r


def fixed_point_iteration(G, cfg, x0=None, plan=None, x_true=None, track_products=True):
    """x <- G(x) measured in ``cfg.norm`` (the max norm by default for this scheme).

    Refuses unless the sampled sup of |G'(x)|_2 is below one.  Convergence in
    the max norm is then demonstrated through the products of averaged
    Jacobians T_n ... T_1, whose max-row-sum norms b_n are fitted to C r^n.
    """
    if not isinstance(G, DifferentiableMap):
        raise InvalidInputError("G must be a DifferentiableMap")
    if G.in_dim != G.out_dim:
        raise InvalidInputError("G must map R^n to itself")
    n = G.in_dim
    plan = plan or certify.SamplingPlan(box_radius=1.0, n_pts=256)
    Xs = certify.base_points(plan, n)
    J = G.derivatives_many(Xs)
    h_norms = np.linalg.norm(J, 2, axis=(1, 2))
    a_norms = np.max(np.sum(np.abs(J), axis=2), axis=1)
    sup_h, sup_a = float(h_norms.max()), float(a_norms.max())
    verdicts = [("sampled sup |G'|_2 < 1", _status(sup_h < 1.0, cfg), {"value": sup_h, "margin": 1.0 - sup_h})]
    _gate(verdicts, cfg, "fixed-point iteration")
    x0 = np.zeros(n) if x0 is None else as_vector(x0, n, "x0")
    xt = None if x_true is None else as_vector(x_true, n, "x_true")
    history = [x0.copy()]

    def step(x):
        y = G(x)
        history.append(y.copy())
        return y

    x, res, ratios, conv, trace, e2, ei = _run(step, x0, cfg, xt)
    rep = SolverReport("fixed-point", x, len(res), conv, res, ratios, consistency_residual=cfg.norm(G(x) - x),
                       errors_l2=e2, errors_linf=ei, trace=trace, verdicts=verdicts)
    rep.constants = {"sup_G_prime_H": sup_h, "sup_G_prime_A": sup_a,
                     "provenance": "sampled-lower-bound (sup over sampled points)"}
    if track_products and len(history) >= 2:
        P = np.eye(n)
        b = []
        for k in range(1, len(history)):
            Tk = averaged_jacobian(G, history[k - 1], history[k])
            P = Tk @ P
            b.append(norm_maxrow(P))
        C, r = fit_decay(b)
        rep.extras.update({"b_n": b, "C_fit": C, "r1_fit": r, "fit_provenance": certify.FITTED})
    return rep


def affine_map(Q, c):
    """G(x) = Q x + c as a DifferentiableMap."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    return DifferentiableMap(
        eval=lambda x: Q @ x + c, jacobian=lambda x: Q, in_dim=Q.shape[1], out_dim=Q.shape[0],
        name="affine", eval_batch=lambda X: X @ Q.T + c,
        jacobian_batch=lambda X: np.broadcast_to(Q, (X.shape[0],) + Q.shape))


def residual_map(F, T, z, mu):
    """G(x) = x - mu T^T (F(x) - z)."""
    T = as_operator(T)
    M = T.matrix
    n = F.in_dim
    eye = np.eye(n)
    return DifferentiableMap(
        eval=lambda x: x - mu * (M.T @ (F(x) - z)),
        jacobian=lambda x: eye - mu * (M.T @ F.derivative(x)),
        in_dim=n, out_dim=n, name="residual_map",
        eval_batch=lambda X: X - mu * ((F.evaluate_many(X) - z) @ M),
        jacobian_batch=lambda X: eye[None] - mu * np.einsum("mi,kmj->kij", M, F.derivatives_many(X)),
    )


def localized_iteration(F, T, z, cfg, x0=None, plan=None, x_true=None, noise_linf=None):
    """The adjoint-residual iteration run as a fixed-point scheme in the max norm.

    The step window is the one of :func:`van_cittert_iteration` (contraction
    certified in l2).  The max-norm error constant
    ``C = mu (1 + C_fit / (1 - r_fit)) |T^T|_inf`` comes from the fitted
    product-norm decay and is empirical.
    """
    T = as_operator(T)
    z = as_vector(z, F.out_dim, "z")
    plan = plan or default_plan(F, z, T)
    c = van_cittert_window(F, T, plan)
    verdicts = _vc_verdicts(c, cfg.mu, cfg)
    _gate(verdicts, cfg, "localized iteration")
    G = residual_map(F, T, z, cfg.mu)
    fcfg = SolverConfig(mu=cfg.mu, max_iter=cfg.max_iter, tol=cfg.tol, norm=LINF, force=cfg.force)
    rep = fixed_point_iteration(G, fcfg, x0=x0, plan=plan, x_true=x_true)
    rep.algorithm = "localized"
    rep.verdicts = verdicts + rep.verdicts
    rep.constants.update(c)
    rep.r0_predicted = math.sqrt(max(_vc_rate(c, cfg.mu), 0.0))
    rep.consistency_residual = L2(T.matrix.T @ (F(rep.x) - z))
    if "C_fit" in rep.extras and rep.extras["r1_fit"] < 1.0:
        C = cfg.mu * (1.0 + rep.extras["C_fit"] / (1.0 - rep.extras["r1_fit"])) * norm_maxrow(T.matrix.T)
    else:
        C = math.inf
    rep.bound_coefficient = C
    rep.extras["C_provenance"] = certify.FITTED
    if noise_linf is not None:
        rep.noise_norm = float(noise_linf)
    elif x_true is not None:
        rep.noise_norm = LINF(z - F(as_vector(x_true, F.in_dim)))
    if rep.noise_norm is not None:
        rep.bound = C * rep.noise_norm
    return rep


# ---------------------------------------------------------------------------
# differential subalgebra inequality
# ---------------------------------------------------------------------------

def seeded_matrix_pairs(n, count, seed, decay=1.0):
    """Pairs of matrices with off-diagonal decay exp(-decay |i - j|) and random signs."""
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    env = np.exp(-decay * np.abs(idx[:, None] - idx[None, :]))
    out = []
    for _ in range(int(count)):
        A = rng.standard_normal((n, n)) * env
        B = rng.standard_normal((n, n)) * env
        out.append((A, B))
    return out


def subalgebra_fit(pairs, thetas=(1.0, 0.5), norm_a=norm_maxrow, norm_h=norm_spectral):
    """Smallest D per theta with |T1 T2|_A <= D |T1|_A |T2|_A ((|T1|_H/|T1|_A)^th + (|T2|_H/|T2|_A)^th).

    Empirical evidence on the supplied pairs only.  Returns
    ``{theta: (D_fit, index_of_binding_pair)}``.
    """
    if not pairs:
        raise InvalidInputError("need at least one matrix pair")
    out = {}
    for th in thetas:
        best, arg = -math.inf, -1
        for i, (A, B) in enumerate(pairs):
            na, nb = norm_a(A), norm_a(B)
            if na == 0 or nb == 0:
                continue
            denom = na * nb * ((norm_h(A) / na) ** th + (norm_h(B) / nb) ** th)
            d = norm_a(A @ B) / denom
            if d > best:
                best, arg = d, i
        out[float(th)] = (float(best), arg)
    return out
