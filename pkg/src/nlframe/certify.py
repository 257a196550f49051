"""Sampled and exact estimates of the stability constants of a map.

Every supremum over an unbounded domain is replaced by a maximum over a
seeded quasi-random sample (plus a few rounds of coordinate refinement
around the running maximiser).  Such an estimate is a lower bound of the true
supremum, and an estimated infimum is an upper bound of the true infimum;
reports record which one they carry.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import CertificateError, InvalidInputError, SingularDerivativeError
from .kernels import direction_stats
from .spaces import L2, NormSpec, as_operator, sum_union, DEFAULT_ENUM_CAP

SQRT2 = math.sqrt(2.0)

EXACT = "exact"
SAMPLED_LOWER = "sampled-lower-bound"  # estimate of a sup: true value is >= estimate
SAMPLED_UPPER = "sampled-upper-bound"  # estimate of an inf: true value is <= estimate
FITTED = "fitted"
FORMULA = "formula"


@dataclass(frozen=True)
class SamplingPlan:
    """Finite stand-in for "for all x, y": where and how densely to sample."""

    box_radius: float = 1.0
    n_pts: int = 256
    n_dir: int = 32
    refine_rounds: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (self.box_radius > 0 and math.isfinite(self.box_radius)):
            raise InvalidInputError("box_radius must be positive")
        for name in ("n_pts", "n_dir"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if int(self.refine_rounds) < 0:
            raise InvalidInputError("refine_rounds must be >= 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - {"box_radius", "n_pts", "n_dir", "refine_rounds", "seed"}
        if unknown:
            raise InvalidInputError(f"unknown sampling plan fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class CertificationReport:
    constant: str
    estimate: object
    provenance: str
    witness: dict = field(default_factory=dict)
    plan: dict = None
    verdicts: list = field(default_factory=list)
    note: str = ""

    def to_dict(self):
        return {
            "constant": self.constant,
            "estimate": _jsonable(self.estimate),
            "provenance": self.provenance,
            "witness": {k: _jsonable(v) for k, v in self.witness.items()},
            "plan": self.plan,
            "verdicts": [
                {"condition": c, "passed": bool(ok), "detail": _jsonable(d)} for c, ok, d in self.verdicts
            ],
            "note": self.note,
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def base_points(plan, n):
    """``plan.n_pts`` points of the box [-R, R]^n, the origin first.

    A larger ``n_pts`` with the same seed yields a superset.
    """
    R = float(plan.box_radius)
    X = np.zeros((plan.n_pts, n))
    if plan.n_pts > 1:
        H = qmc.Halton(d=n, scramble=True, seed=plan.seed).random(plan.n_pts - 1)
        X[1:] = (2.0 * H - 1.0) * R
    return X


def unit_directions(plan, n):
    """Unit input directions: +-1 in one dimension, else +-e_i then Gaussian ones."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    eye = np.eye(n)
    fixed = np.vstack([eye, -eye])
    rng = np.random.default_rng([plan.seed, 1])
    G = rng.standard_normal((plan.n_dir, n))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return np.vstack([fixed, G])


def _clip(x, R):
    return np.clip(x, -R, R)


def _coordinate_refine(score, x0, y0, plan, maximize=True, move_y=True):
    """Greedy coordinate search around (x0, y0); returns every pair it scored."""
    R = float(plan.box_radius)
    n = x0.shape[0]
    sign = 1.0 if maximize else -1.0
    bx, by = x0.copy(), y0.copy()
    bv = sign * score(bx[None], by[None])[0]
    seen_X, seen_Y = [], []
    hx, hy = R / 8.0, 0.25
    for _ in range(plan.refine_rounds):
        for _sweep in range(2):
            cx = [bx]
            cy = [by]
            for i in range(n):
                for s in (1.0, -1.0):
                    e = np.zeros(n)
                    e[i] = s
                    cx.append(_clip(bx + hx * e, R))
                    cy.append(by)
                    if move_y and n > 1:
                        y = by + hy * e
                        cx.append(bx)
                        cy.append(y / np.linalg.norm(y))
            CX, CY = np.array(cx), np.array(cy)
            v = sign * score(CX, CY)
            seen_X.append(CX)
            seen_Y.append(CY)
            j = int(np.nanargmax(v))
            if v[j] > bv:
                bv, bx, by = v[j], CX[j].copy(), CY[j].copy()
        hx /= 4.0
        hy /= 4.0
    if not seen_X:
        return np.empty((0, n)), np.empty((0, n))
    return np.vstack(seen_X), np.vstack(seen_Y)


# ---------------------------------------------------------------------------
# derivative direction pool (beta, delta, theta, alpha)
# ---------------------------------------------------------------------------

def _images(F, T, X, Y):
    """F'(x_i) y_i and T y_i for paired rows of X and Y."""
    J = F.derivatives_many(X)
    A = np.einsum("imn,in->im", J, Y)
    B = Y @ as_operator(T).matrix.T
    return A, B


class DirectionPool:
    """All (x, y) pairs evaluated while certifying F against T.

    beta, delta and theta are read off the same pool, so their algebraic
    relations hold sample by sample.
    """

    def __init__(self, F, T, plan, norm=None):
        T = as_operator(T)
        if T.shape != (F.out_dim, F.in_dim):
            raise InvalidInputError(f"T has shape {T.shape}, F maps R^{F.in_dim} -> R^{F.out_dim}")
        self.F, self.T, self.plan = F, T, plan
        self.norm = norm if norm is not None else F.out_norm
        if self.norm.kind != "p":
            raise InvalidInputError("output norm must be a p-norm")
        p = self.norm.p
        n = F.in_dim
        Xb = base_points(plan, n)
        Yd = unit_directions(plan, n)
        X = np.repeat(Xb, Yd.shape[0], axis=0)
        Y = np.tile(Yd, (Xb.shape[0], 1))
        self._set(X, Y)

        def stat(idx):
            def score(CX, CY):
                A, B = _images(F, T, CX, CY)
                with np.errstate(all="ignore"):
                    return direction_stats(A, B, p)[idx]
            return score

        extra_X, extra_Y = [], []
        if plan.refine_rounds > 0:
            for idx, arr in ((2, self.dirdist), (3, self.reldev), (4, self.angle)):
                j = int(np.nanargmax(arr))
                cx, cy = _coordinate_refine(stat(idx), self.X[j], self.Y[j], plan, maximize=True)
                extra_X.append(cx)
                extra_Y.append(cy)
        if extra_X:
            self._set(np.vstack([self.X] + extra_X), np.vstack([self.Y] + extra_Y))

    def _set(self, X, Y):
        self.X, self.Y = X, Y
        self.A, self.B = _images(self.F, self.T, X, Y)
        with np.errstate(all="ignore"):
            na, nb, dd, rd, ang = direction_stats(self.A, self.B, self.norm.p)
        self.na, self.nb = na, nb
        self.dirdist, self.reldev, self.angle = dd, rd, ang

    def check_nonsingular(self):
        if np.any(self.na == 0):
            j = int(np.flatnonzero(self.na == 0)[0])
            raise SingularDerivativeError(f"F'(x)y = 0 at x={self.X[j].tolist()}, y={self.Y[j].tolist()}")
        self.check_T()

    def check_T(self):
        if np.any(self.nb == 0):
            j = int(np.flatnonzero(self.nb == 0)[0])
            raise InvalidInputError(f"T is not bounded below: Ty = 0 for y={self.Y[j].tolist()}")

    def _argmax_report(self, name, arr):
        j = int(np.argmax(arr))
        return CertificationReport(
            constant=name,
            estimate=float(arr[j]),
            provenance=SAMPLED_LOWER,
            witness={"x": self.X[j], "y": self.Y[j], "samples": int(arr.size)},
            plan=self.plan.to_dict(),
            note="maximum over sampled (x, y); a lower bound of the supremum",
        )

    def beta(self):
        self.check_nonsingular()
        return self._argmax_report("beta_FT", self.dirdist)

    def delta(self):
        self.check_T()
        return self._argmax_report("delta_FT", self.reldev)

    def theta(self):
        if not self.norm.is_euclidean:
            raise InvalidInputError("theta_FT needs the Euclidean output norm")
        self.check_nonsingular()
        return self._argmax_report("theta_FT", self.angle)


def beta_FT(F, T, plan, norm=None):
    """Largest distance between F'(x)y/|F'(x)y| and Ty/|Ty| over the samples."""
    return DirectionPool(F, T, plan, norm).beta()


def delta_FT(F, T, plan, norm=None):
    """Largest relative deviation |F'(x)y - Ty| / |Ty| over the samples."""
    return DirectionPool(F, T, plan, norm).delta()


def theta_FT(F, T, plan):
    """Largest angle between F'(x)y and Ty over the samples (Euclidean)."""
    return DirectionPool(F, T, plan, L2).theta()


# ---------------------------------------------------------------------------
# alpha_F
# ---------------------------------------------------------------------------

def _unit_grid(m, norm, count, seed):
    if m == 2:
        ang = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        G = np.column_stack([np.cos(ang), np.sin(ang)])
    elif m == 1:
        G = np.array([[1.0], [-1.0]])
    else:
        G = np.random.default_rng([seed, 2]).standard_normal((count, m))
    return G / norm.rows(G)[:, None]


def _ball_radius(U, z, norm):
    return float(np.max(norm.rows(U - z[None, :] / norm(z))))


def alpha_F(F, plan, T=None, norm=None, grid=720, pool=None):
    """Smallest ball radius (centred on a unit vector) holding all F'(x)y/|F'(x)y|,
    maximised over sampled directions y.

    The inner infimum is searched over the normalised mean direction, Ty/|Ty|
    when ``T`` is given, a grid of unit vectors and the samples themselves,
    followed by Nelder-Mead refinement.  With ``T`` supplied the estimate never
    exceeds the matching ``beta_FT`` estimate on the same pool.
    """
    norm = norm if norm is not None else F.out_norm
    if pool is None:
        T_ref = T if T is not None else np.eye(F.out_dim, F.in_dim)
        pool = DirectionPool(F, T_ref, plan, norm)
    if np.any(pool.na == 0):
        raise SingularDerivativeError("F'(x)y vanished at a sample")
    U_all = pool.A / pool.na[:, None]
    keys = np.round(pool.Y, 12)
    _, group = np.unique(keys, axis=0, return_inverse=True)
    group = np.asarray(group).reshape(-1)
    G = _unit_grid(F.out_dim, norm, grid, plan.seed)
    best = (-1.0, None, None)
    for g in np.unique(group):
        rows = np.flatnonzero(group == g)
        U = U_all[rows]
        cands = [U.mean(axis=0)]
        if T is not None:
            cands.append(pool.B[rows[0]] / pool.nb[rows[0]])
        cands.extend(G)
        cands.extend(U[:: max(1, U.shape[0] // 256)])
        cands = [c for c in cands if norm(c) > 0]
        vals = np.array([_ball_radius(U, c, norm) for c in cands])
        order = np.argsort(vals, kind="stable")[:3]
        r_best, z_best = float(vals[order[0]]), cands[order[0]] / norm(cands[order[0]])
        for j in order:
            res = minimize(lambda w: _ball_radius(U, w, norm) if norm(w) > 0 else np.inf,
                           cands[j], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
            if res.fun < r_best and norm(res.x) > 0:
                r_best, z_best = float(res.fun), res.x / norm(res.x)
        if r_best > best[0]:
            best = (r_best, pool.Y[rows[0]], z_best)
    return CertificationReport(
        constant="alpha_F",
        estimate=best[0],
        provenance=SAMPLED_LOWER,
        witness={"y": best[1], "center": best[2]},
        plan=plan.to_dict(),
        note="outer max over sampled y of an inner min over candidate centres; "
        "the inner value is an upper bound of the inner infimum on the sample",
    )


# ---------------------------------------------------------------------------
# uniform stability and derivative ratios
# ---------------------------------------------------------------------------

def _stability_at(F, X, Y_dirs, in_norm, out_norm):
    """Per-point (min, max) of |F'(x)y|/|y|; exact inner extremisation when both norms are l2."""
    J = F.derivatives_many(X)
    if in_norm.is_euclidean and out_norm.is_euclidean:
        s = np.linalg.svd(J, compute_uv=False)
        lo = s[:, -1] if J.shape[1] >= J.shape[2] else np.zeros(J.shape[0])
        return lo, s[:, 0]
    A = np.einsum("imn,jn->ijm", J, Y_dirs)
    r = out_norm.rows(A.reshape(-1, A.shape[-1])).reshape(A.shape[:2]) / in_norm.rows(Y_dirs)[None, :]
    return r.min(axis=1), r.max(axis=1)


def uniform_stability(F, plan, in_norm=L2, out_norm=None):
    """(A_hat, B_hat): sampled min and max of |F'(x)y| / |y|.

    A_hat over-estimates the true lower constant A and B_hat under-estimates
    B.  A degenerate A_hat (below 1e-12) is recorded as a failed verdict.
    """
    out_norm = out_norm if out_norm is not None else F.out_norm
    X = base_points(plan, F.in_dim)
    Yd = unit_directions(plan, F.in_dim)
    lo, hi = _stability_at(F, X, Yd, in_norm, out_norm)
    if plan.refine_rounds > 0:
        dummy = np.zeros(F.in_dim)
        for arr, maximize, which in ((lo, False, 0), (hi, True, 1)):
            j = int(np.argmin(arr) if not maximize else np.argmax(arr))
            cx, _ = _coordinate_refine(
                lambda CX, CY, w=which: _stability_at(F, CX, Yd, in_norm, out_norm)[w],
                X[j], dummy, plan, maximize=maximize, move_y=False)
            if cx.size:
                l2, h2 = _stability_at(F, cx, Yd, in_norm, out_norm)
                X = np.vstack([X, cx])
                lo = np.concatenate([lo, l2])
                hi = np.concatenate([hi, h2])
    i, j = int(np.argmin(lo)), int(np.argmax(hi))
    A_hat, B_hat = float(lo[i]), float(hi[j])
    degenerate = A_hat <= 1e-12
    return CertificationReport(
        constant="uniform_stability",
        estimate=(A_hat, B_hat),
        provenance=f"lower: {SAMPLED_UPPER}; upper: {SAMPLED_LOWER}",
        witness={"x_min": X[i], "x_max": X[j], "samples": int(lo.size)},
        plan=plan.to_dict(),
        verdicts=[("nondegenerate lower stability bound", not degenerate, A_hat)],
    )


def _ratio_at(F, T, X):
    """Per-point (inf, sup) of |F'(x)y| / |Ty| over y, exactly, in l2."""
    T = as_operator(T)
    TT = T.matrix.T @ T.matrix
    J = F.derivatives_many(X)
    lo = np.empty(X.shape[0])
    hi = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        w = sla.eigh(J[i].T @ J[i], TT, eigvals_only=True)
        lo[i] = math.sqrt(max(w[0], 0.0))
        hi[i] = math.sqrt(max(w[-1], 0.0))
    return lo, hi


def derivative_ratio_bounds(F, T, plan):
    """Sampled (inf, sup) over x of the extreme values of |F'(x)y| / |Ty| (l2 norms)."""
    T = as_operator(T)
    if not T.bounded_below:
        raise InvalidInputError("T must be bounded below")
    X = base_points(plan, F.in_dim)
    lo, hi = _ratio_at(F, T, X)
    if plan.refine_rounds > 0:
        dummy = np.zeros(F.in_dim)
        for arr, maximize, which in ((lo, False, 0), (hi, True, 1)):
            j = int(np.argmin(arr) if not maximize else np.argmax(arr))
            cx, _ = _coordinate_refine(lambda CX, CY, w=which: _ratio_at(F, T, CX)[w],
                                       X[j], dummy, plan, maximize=maximize, move_y=False)
            if cx.size:
                l2, h2 = _ratio_at(F, T, cx)
                lo = np.concatenate([lo, l2])
                hi = np.concatenate([hi, h2])
    return float(lo.min()), float(hi.max())


# ---------------------------------------------------------------------------
# gamma_{F,T}(kA) and RIP
# ---------------------------------------------------------------------------

def _gamma_single(F, T, U, plan, m_norm, level):
    n = F.in_dim
    R = float(plan.box_radius)
    Xb = base_points(plan, n)
    if m_norm is not None:
        nm = m_norm.rows(Xb)
        scale = np.where(nm > R, R / np.where(nm > 0, nm, 1.0), 1.0)
        Xb = Xb * scale[:, None]
    mags = R * np.geomspace(1e-3, 1.0, 4)
    best = (-1.0, None, None)
    Tm = as_operator(T).matrix
    for i, B in enumerate(U.bases):
        rng = np.random.default_rng([plan.seed, 3, level, i])
        C = rng.standard_normal((plan.n_dir, B.shape[1]))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        Z = (C @ B.T) * mags[np.arange(plan.n_dir) % mags.size][:, None]
        X = np.repeat(Xb, Z.shape[0], axis=0)
        ZZ = np.tile(Z, (Xb.shape[0], 1))
        gap = _gamma_gap(F, Tm, X, ZZ)
        j = int(np.argmax(gap))
        if gap[j] > best[0]:
            best = (float(gap[j]), X[j], ZZ[j], B)
    val, x, z, B = best
    if plan.refine_rounds > 0:
        # refine inside the winning subspace: move x freely, z within span(B)
        def score(CX, CC):
            return _gamma_gap(F, Tm, CX, CC @ B.T)

        c0 = B.T @ z
        cx, cc = _refine_xz(score, x, c0, plan)
        if cx.size:
            v = score(cx, cc)
            j = int(np.argmax(v))
            if v[j] > val:
                val, x, z = float(v[j]), cx[j], cc[j] @ B.T
    return val, x, z


def _refine_xz(score, x0, c0, plan):
    R = float(plan.box_radius)
    bx, bc = x0.copy(), c0.copy()
    bv = score(bx[None], bc[None])[0]
    out_X, out_C = [], []
    hx, hc = R / 8.0, 0.25 * float(np.linalg.norm(c0))
    for _ in range(plan.refine_rounds):
        cx, cc = [bx], [bc]
        for i in range(bx.size):
            for s in (1.0, -1.0):
                e = np.zeros(bx.size)
                e[i] = s
                cx.append(_clip(bx + hx * e, R))
                cc.append(bc)
        for i in range(bc.size):
            for s in (1.0, -1.0):
                e = np.zeros(bc.size)
                e[i] = s
                c = bc + hc * e
                if np.linalg.norm(c) > 0:
                    cx.append(bx)
                    cc.append(c)
        CX, CC = np.array(cx), np.array(cc)
        v = score(CX, CC)
        out_X.append(CX)
        out_C.append(CC)
        j = int(np.argmax(v))
        if v[j] > bv:
            bv, bx, bc = v[j], CX[j].copy(), CC[j].copy()
        hx /= 4.0
        hc /= 4.0
    if not out_X:
        return np.empty((0, x0.size)), np.empty((0, c0.size))
    return np.vstack(out_X), np.vstack(out_C)


def _gamma_gap(F, Tm, X, Z):
    num = np.linalg.norm(F.evaluate_many(X + Z) - F.evaluate_many(X) - Z @ Tm.T, axis=1)
    return num / np.linalg.norm(Z, axis=1)


def gamma_kA(F, T, union, k, plan, m_norm=None, cap=DEFAULT_ENUM_CAP):
    """Sampled sup of |F(x+z) - F(x) - Tz| / |z| over x in the M-ball, z in kA.

    The estimate for kA is the maximum of the estimates for jA, j <= k, each
    drawn from its own seeded stream, so it never decreases in k.
    """
    best = (-1.0, None, None, None)
    for j in range(1, int(k) + 1):
        U = sum_union(union, j, cap=cap)
        val, x, z = _gamma_single(F, T, U, plan, m_norm, j)
        if val > best[0]:
            best = (val, x, z, j)
    val, x, z, j = best
    return CertificationReport(
        constant=f"gamma_FT({k}A)",
        estimate=val,
        provenance=SAMPLED_LOWER,
        witness={"x": x, "z": z, "level": j},
        plan=plan.to_dict(),
    )


def rip_delta(T, union, k, cap=DEFAULT_ENUM_CAP):
    """Exact restricted isometry constant of ``T`` on ``kA``.

    For each maximal subspace V of kA with orthonormal basis B the constant is
    ``max(s_max(TB)^2 - 1, 1 - s_min(TB)^2)``; the overall value is the max
    over V.  A value >= 1 means T annihilates some element of kA.
    """
    T = as_operator(T)
    U = sum_union(union, k, cap=cap)
    best, arg = -1.0, 0
    for i, B in enumerate(U.bases):
        s = np.linalg.svd(T.matrix @ B, compute_uv=False)
        smin = s[-1] if B.shape[1] <= T.shape[0] else 0.0
        d = max(s[0] ** 2 - 1.0, 1.0 - smin**2)
        if d > best:
            best, arg = d, i
    witness = {"subspace": arg}
    if U.supports is not None:
        witness["support"] = list(U.supports[arg])
    return CertificationReport(
        constant=f"rip_delta({k}A)",
        estimate=float(best),
        provenance=EXACT,
        witness=witness,
        verdicts=[("bounded below on every piece (delta < 1)", best < 1.0, best)],
    )


# ---------------------------------------------------------------------------
# closed-form constants from the recovery theory
# ---------------------------------------------------------------------------

def sparse_riesz_constants(delta2, gamma2A):
    """(D, beta) of the sparse Riesz lower bound from RIP and linearisation constants.

    Requires ``sqrt(delta2) + gamma2A < sqrt(2)/2``.
    """
    c = math.sqrt(max(float(delta2), 0.0)) + float(gamma2A)
    margin = SQRT2 / 2 - c
    if not margin > 0:
        raise CertificateError(
            f"sqrt(delta_2A) + gamma(2A) = {c:.6g} >= sqrt(2)/2; sparse Riesz bound unavailable",
            margin=margin,
        )
    D = 1.0 / (1.0 - SQRT2 * c)
    return D, D * c


def almost_linear_constants(gamma2A, gamma4A):
    """(gamma1, gamma2) = (2 g4, 2 (g2 + g4))."""
    g2, g4 = float(gamma2A), float(gamma4A)
    if not math.isfinite(g4):
        raise InvalidInputError("gamma(4A) must be finite")
    return 2.0 * g4, 2.0 * (g2 + g4)


def recovery_condition(D, beta, gamma1, gamma2, aA, sA):
    """gamma3 = 1 - 2 D g1 - (D g1 + D g2 + beta) sqrt(aA sA); positive means the bound applies."""
    vals = (D, beta, gamma1, gamma2, aA, sA)
    if any(v < 0 for v in vals) or not D > 0:
        raise InvalidInputError("constants must be non-negative with D > 0")
    return 1.0 - 2.0 * D * gamma1 - (D * gamma1 + D * gamma2 + beta) * math.sqrt(aA * sA)


def composed_hypothesis(delta2, delta4, gamma2A, gamma4A, aA, sA):
    """Left side of the combined sufficient condition; it must be < 1."""
    r2, r4 = math.sqrt(max(delta2, 0.0)), math.sqrt(max(delta4, 0.0))
    return SQRT2 * (r2 + gamma2A) + 4.0 * gamma4A + (r2 + 3.0 * gamma2A + 4.0 * r4) * math.sqrt(aA * sA)


# ---------------------------------------------------------------------------
# all constants for one (F, T) pair
# ---------------------------------------------------------------------------

def certify_map(F, T, plan, norm=None):
    """beta, delta, alpha (and theta for l2) on one pool, with the bi-Lipschitz verdicts."""
    norm = norm if norm is not None else F.out_norm
    pool = DirectionPool(F, T, plan, norm)
    reps = {"beta_FT": pool.beta(), "delta_FT": pool.delta()}
    if norm.is_euclidean:
        reps["theta_FT"] = pool.theta()
    reps["alpha_F"] = alpha_F(F, plan, T=T, norm=norm, pool=pool)
    stab = uniform_stability(F, plan, out_norm=norm)
    reps["uniform_stability"] = stab
    T = as_operator(T)
    b, d, a = reps["beta_FT"].estimate, reps["delta_FT"].estimate, reps["alpha_F"].estimate
    verdicts = [
        ("uniform stability (A_hat > 0)", stab.estimate[0] > 1e-12, stab.estimate),
        ("T bounded below", T.bounded_below, T.sigma_min),
        ("alpha_F < 1 => bi-Lipschitz", a < 1.0, a),
        ("beta_FT < 1 => bi-Lipschitz", b < 1.0, b),
        ("delta_FT < 1/3 => bi-Lipschitz", d < 1.0 / 3.0, d),
    ]
    if norm.is_euclidean:
        verdicts += [
            ("beta_FT < sqrt(2) (Hilbert) => bi-Lipschitz", b < SQRT2 and 2.0 - b * b > 1e-12, b),
            ("delta_FT < sqrt(2) - 1 (Hilbert) => bi-Lipschitz", d < SQRT2 - 1.0, d),
        ]
    if T.bounded_below and T.shape[0] >= T.shape[1]:
        tdag = 1.0 / T.sigma_min
        verdicts.append(("beta_FT |T| |T^+| < 1 (left-inverse iteration)", b * T.sigma_max * tdag < 1.0,
                         b * T.sigma_max * tdag))
    for r in reps.values():
        r.verdicts = list(r.verdicts) + verdicts if r is reps["beta_FT"] else r.verdicts
    return reps, verdicts
