"""Sparse approximation triples, greedy approximation and constrained recovery.

A triple bundles a coordinate-aligned union of subspaces A, an l1-type norm
M (plain or weighted) and the Euclidean norm H.  For such unions the best
approximator in A is a coordinate truncation, which keeps every quantity
here exactly computable by enumeration at desk scale.
"""
import itertools
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from . import certify
from .errors import CertificateError, InfeasibleError, InvalidInputError, UnsupportedError
from .kernels import topk_support
from .spaces import (
    DEFAULT_ENUM_CAP,
    L1,
    L2,
    NormSpec,
    SubspaceUnion,
    as_operator,
    as_vector,
    best_subspace,
    sum_union,
)

MAX_ENUM_DIM = 14


@dataclass(frozen=True, eq=False)
class SparseTriple:
    """(A, M, H) with H = l2 and M an l1-type norm on a coordinate union A.

    M is rescaled so that ``|x|_2 <= |x|_M`` with equality attained, i.e. the
    imbedding of M into H has norm one.
    """

    union: SubspaceUnion
    m_norm: NormSpec
    kind: str = "custom"
    name: str = ""

    def __post_init__(self):
        if self.union.supports is None:
            raise UnsupportedError("only coordinate-aligned unions are supported")
        if not (self.m_norm.kind == "weighted_l1" or self.m_norm.p == 1.0):
            raise UnsupportedError("M must be an l1 or weighted l1 norm")

    @classmethod
    def classical(cls, n, s):
        return cls(SubspaceUnion.sparse(n, s), L1, "classical", f"classical:n={n},s={s}")

    @classmethod
    def weighted(cls, weights, s):
        w = np.asarray(weights, dtype=float)
        norm = NormSpec.weighted_l1(w).rescaled(1.0 / float(np.min(w)))
        return cls(SubspaceUnion.sparse(w.size, s), norm, "weighted",
                   f"weighted:s={s},w={';'.join(f'{v:g}' for v in w)}")

    @classmethod
    def parse(cls, text):
        """``classical:n=12,s=2`` or ``weighted:s=1,w=1;2;3``."""
        if isinstance(text, SparseTriple):
            return text
        m = re.fullmatch(r"\s*(\w+)\s*:(.*)", str(text))
        if not m:
            raise InvalidInputError(f"cannot parse triple {text!r}")
        kind, rest = m.group(1), m.group(2)
        fields = {}
        for part in rest.split(","):
            if "=" not in part:
                raise InvalidInputError(f"bad triple field {part!r} in {text!r}")
            k, v = part.split("=", 1)
            fields[k.strip()] = v.strip()
        try:
            if kind == "classical":
                return cls.classical(int(fields["n"]), int(fields["s"]))
            if kind == "weighted":
                return cls.weighted([float(v) for v in fields["w"].split(";")], int(fields["s"]))
        except KeyError as exc:
            raise InvalidInputError(f"triple {text!r} is missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise InvalidInputError(f"triple {text!r}: {exc}") from None
        raise InvalidInputError(f"unknown triple kind {kind!r}")

    @property
    def n(self):
        return self.union.ambient_dim

    @property
    def s(self):
        return None if self.union.classical is None else self.union.classical[1]

    def m(self, x):
        return self.m_norm(x)

    def h(self, x):
        return L2(x)

    def weights(self):
        w = np.ones(self.n) if self.m_norm.weights is None else np.asarray(self.m_norm.weights)
        return self.m_norm.scale * w


def _check(x, triple):
    return as_vector(x, triple.n)


def best_approximator(x, triple):
    """Best approximation of ``x`` in A with respect to M (ties to the lowest index)."""
    x = _check(x, triple)
    if triple.union.classical is not None:
        S = topk_support(triple.m_norm.magnitudes(x)[None, :], triple.s)[0]
        out = np.zeros_like(x)
        out[S] = x[S]
        return out
    return best_subspace(x, triple.union, triple.m_norm)[1]


def second_approximator(x, triple):
    """Best approximation of the residual ``x - x_AM``."""
    x = _check(x, triple)
    return best_approximator(x - best_approximator(x, triple), triple)


def sigma_kAM(x, triple, k=1, cap=DEFAULT_ENUM_CAP):
    """M-distance from ``x`` to ``kA``."""
    x = _check(x, triple)
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if triple.union.classical is not None:
        mag = triple.m_norm.scale * triple.m_norm.magnitudes(x)
        t = min(k * triple.s, triple.n)
        keep = topk_support(mag[None, :], t)[0]
        tail = np.ones(triple.n, dtype=bool)
        tail[keep] = False
        return float(np.sum(mag[tail]))
    U = sum_union(triple.union, k, cap=cap)
    return triple.m(x - best_subspace(x, U, triple.m_norm)[1])


def s_A(triple):
    """sup over A of (|x|_M / |x|_H)^2, exact for coordinate unions.

    On a support S the supremum is ``sum_{i in S} w_i^2`` (Cauchy-Schwarz,
    attained at ``x_i = w_i``).
    """
    w2 = triple.weights() ** 2
    vals = [float(np.sum(w2[list(S)])) for S in triple.union.supports]
    i = int(np.argmax(vals))
    return vals[i]


def _aA_ratio(x, triple):
    xa = best_approximator(x, triple)
    mx = triple.m(xa)
    if mx == 0:
        return 0.0
    u = best_approximator(x - xa, triple)
    return (L2(u) / mx) ** 2


def a_A(triple, plan=None):
    """Sampled sup of (|u_AM|_H / |x_AM|_M)^2, a lower bound of the true a_A (which is <= 1).

    Probes are flat vectors on leading coordinates, seeded random vectors of
    several shapes, and a coordinate hill climb from the best probe.
    """
    plan = plan or certify.SamplingPlan(n_pts=256)
    n = triple.n
    w = triple.weights()
    probes = []
    for j in range(1, n + 1):
        v = np.zeros(n)
        v[:j] = 1.0
        probes.append(v)
        probes.append(v / w)
    rng = np.random.default_rng([plan.seed, 11])
    G = rng.standard_normal((plan.n_pts, n))
    probes.extend(G)
    probes.extend(np.sign(G) * (rng.random((plan.n_pts, n)) < 0.5))
    probes.extend(G * np.exp(-np.arange(n) / 2.0))
    vals = np.array([_aA_ratio(p, triple) for p in probes])
    j = int(np.argmax(vals))
    bx, bv = np.array(probes[j], dtype=float), float(vals[j])
    h = 0.25 * max(1.0, float(np.max(np.abs(bx))))
    for _ in range(plan.refine_rounds):
        improved = True
        while improved:
            improved = False
            for i in range(n):
                for sgn in (1.0, -1.0):
                    c = bx.copy()
                    c[i] += sgn * h
                    v = _aA_ratio(c, triple)
                    if v > bv + 1e-15:
                        bx, bv, improved = c, v, True
        h /= 4.0
    return certify.CertificationReport(
        constant="a_A",
        estimate=bv,
        provenance=certify.SAMPLED_LOWER,
        witness={"x": bx},
        plan=plan.to_dict(),
    )


@dataclass
class GreedyResult:
    iterates: list
    errors: list  # |x - x^k|_M, k = 0..K
    step_norms: list  # |u_k|_M
    sigmas: list  # sigma_{kA,M}(x), k = 0..K
    telescoping_residual: float

    def ratios(self):
        """|x - x^k|_M / sigma_{kA,M}(x) where sigma > 0."""
        return [e / s if s > 0 else (1.0 if e == 0 else math.inf) for e, s in zip(self.errors, self.sigmas)]


def greedy(x, triple, K, cap=DEFAULT_ENUM_CAP):
    """x^{k+1} = x^k + best approximation of x - x^k, starting from 0."""
    x = _check(x, triple)
    xk = np.zeros_like(x)
    iterates, errors, steps = [], [triple.m(x)], []
    sigmas = [triple.m(x)]
    for k in range(1, int(K) + 1):
        u = best_approximator(x - xk, triple)
        steps.append(triple.m(u))
        xk = xk + u
        iterates.append(xk.copy())
        errors.append(triple.m(x - xk))
        sigmas.append(sigma_kAM(x, triple, k, cap=cap))
    tele = abs(sum(steps) + errors[-1] - errors[0])
    return GreedyResult(iterates, errors, steps, sigmas, tele)


def approximation_gap_check(x, triple, aA=None):
    """|x - x_AM|_H <= sqrt(a_A) |x|_M; returns (holds, lhs, rhs)."""
    x = _check(x, triple)
    if aA is None:
        aA = 1.0 / triple.s if triple.kind == "classical" else a_A(triple).estimate
    lhs = L2(x - best_approximator(x, triple))
    rhs = math.sqrt(aA) * triple.m(x)
    return lhs <= rhs + 1e-9, lhs, rhs


def predict_bounds(D, beta, gamma1, gamma2, aA, sA, sigma, eps):
    """(H-bound, M-bound) on |x* - x0| from the recovery theorem; needs gamma3 > 0."""
    g3 = certify.recovery_condition(D, beta, gamma1, gamma2, aA, sA)
    if not g3 > 0:
        raise CertificateError(f"gamma3 = {g3:.6g} <= 0: theorem inapplicable", margin=g3)
    ras = math.sqrt(aA * sA)
    bound_h = (2 + 8 * D * gamma2 + 4 * beta) / g3 * math.sqrt(aA) * sigma + (2 + ras) * D / g3 * eps
    bound_m = ((2 - 4 * D * gamma1 + 2 * (D * gamma1 + 2 * D * gamma2 + beta) * ras) / g3 * sigma
               + 2 * D / g3 * math.sqrt(sA) * eps)
    return bound_h, bound_m


def verify_axioms(triple, plan=None):
    """Sampled checks of the five triple properties; returns (name, passed, detail) tuples."""
    plan = plan or certify.SamplingPlan(n_pts=128)
    n = triple.n
    rng = np.random.default_rng([plan.seed, 12])
    X = np.vstack([np.eye(n), rng.standard_normal((plan.n_pts, n))])
    out = []

    ratio = float(np.max(L2.rows(X) / triple.m_norm.rows(X)))
    out.append(("(i) imbedding |x|_H <= |x|_M, constant 1", abs(ratio - 1.0) <= 1e-6, ratio))
    out.append(("(ii) proximinality (finite dimension)", True, "structural"))

    worst_iii, worst_iv = 0.0, 0.0
    n_sub = min(len(triple.union), 64)
    for x in X[n:]:
        for i in range(n_sub):
            S = list(triple.union.supports[i])
            B = triple.union.bases[i]
            xs = np.zeros(n)
            xs[S] = x[S]
            ph = B @ (B.T @ x)
            worst_iii = max(worst_iii, float(np.max(np.abs(ph - xs))))
            # the truncation must not be beaten in M by moving inside the piece
            H = rng.standard_normal((4, len(S)))
            base = triple.m(x - xs)
            for hvec in H:
                y = xs.copy()
                y[S] += 1e-3 * hvec
                if triple.m(x - y) < base - 1e-12:
                    worst_iii = max(worst_iii, base - triple.m(x - y))
            mx = triple.m(x)
            worst_iv = max(
                worst_iv,
                abs(triple.m(xs) + triple.m(x - xs) - mx) / max(1.0, mx),
                abs(L2(xs) ** 2 + L2(x - xs) ** 2 - L2(x) ** 2) / max(1.0, L2(x) ** 2),
            )
    out.append(("(iii) common best approximator", worst_iii <= 1e-10, worst_iii))
    out.append(("(iv) norm splitting (M and H)", worst_iv <= 1e-10, worst_iv))

    worst_v = 0.0
    K = math.ceil(n / min(len(S) for S in triple.union.supports))
    for x in X[n : n + 16]:
        res = greedy(x, triple, K)
        worst_v = max(worst_v, res.errors[-1] / max(1.0, res.errors[0]))
    out.append(("(v) sparse density (greedy residual -> 0)", worst_v <= 1e-12, worst_v))
    return out


# ---------------------------------------------------------------------------
# recovery
# ---------------------------------------------------------------------------

def _sign_patterns(k):
    return np.array(list(itertools.product((1.0, -1.0), repeat=k)))


def _support_candidates(AS, z, eps, wS, signs):
    """Minimisers of c.x over {|AS x - z| <= eps} for c = signs * wS (rows), or None if infeasible.

    Every returned point lies on (or inside) the constraint ellipsoid, so
    each is feasible whatever its sign pattern.
    """
    G = AS.T @ AS
    if np.linalg.cond(G) > 1e12:
        return None
    x_ls = np.linalg.solve(G, AS.T @ z)
    r2 = float(np.sum((AS @ x_ls - z) ** 2))
    tol = (1e-12 * max(1.0, float(np.linalg.norm(z)))) ** 2
    if r2 > eps * eps + tol:
        return None
    rad = math.sqrt(max(eps * eps - r2, 0.0))
    C = signs * wS[None, :]
    GiC = np.linalg.solve(G, C.T).T
    q = np.sum(C * GiC, axis=1)
    return x_ls[None, :] - rad * GiC / np.sqrt(q)[:, None]


def _enum_linear(A, z, eps, w, max_support=None):
    """Global minimiser of sum w|x| subject to |Ax - z| <= eps by support enumeration.

    An optimum exists whose support has linearly independent columns; on that
    support, with its sign pattern fixed, the problem is a linear objective
    over an ellipsoid and has the closed form used by ``_support_candidates``.
    """
    m, n = A.shape
    if n > MAX_ENUM_DIM:
        raise UnsupportedError(f"support enumeration limited to n <= {MAX_ENUM_DIM}")
    if np.linalg.norm(z) <= eps:
        return np.zeros(n), 0, True
    rank = np.linalg.matrix_rank(A)
    kmax = min(rank, n) if max_support is None else min(rank, n, max_support)
    best_x, best_obj, count = None, math.inf, 0
    for k in range(1, kmax + 1):
        signs = _sign_patterns(k)
        for S in itertools.combinations(range(n), k):
            S = list(S)
            X = _support_candidates(A[:, S], z, eps, w[S], signs)
            if X is None:
                continue
            count += X.shape[0]
            obj = np.abs(X) @ w[S]
            j = int(np.argmin(obj))
            if best_x is None or obj[j] < best_obj - 1e-13 * max(1.0, best_obj):
                best_obj = float(obj[j])
                best_x = np.zeros(n)
                best_x[S] = X[j]
    if best_x is None:
        return None, count, False
    return best_x, count, True


def _gauss_newton_on_support(F, z, S, x0):
    n = F.in_dim

    def embed(v):
        x = np.zeros(n)
        x[S] = v
        return x

    res = least_squares(lambda v: F(embed(v)) - z, x0[S], jac=lambda v: F.derivative(embed(v))[:, S],
                        method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    return embed(res.x)


def _repair(F, z, eps, x, anchor):
    """Largest step from ``anchor`` toward ``x`` that stays feasible (bisection)."""
    if np.linalg.norm(F(x) - z) <= eps:
        return x
    if np.linalg.norm(F(anchor) - z) > eps:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(F(anchor + mid * (x - anchor)) - z) <= eps:
            lo = mid
        else:
            hi = mid
    return anchor + lo * (x - anchor)


def _is_linear(F):
    return F.params.get("kind") == "linear"


def _enum_nonlinear(F, z, eps, w):
    """Sequential linearisation with exact enumeration per step, then feasibility repair."""
    n = F.in_dim
    x = np.zeros(n)
    count = 0
    for _ in range(40):
        J = F.derivative(x)
        zl = z - F(x) + J @ x
        xn, c, ok = _enum_linear(J, zl, eps, w)
        count += c
        if not ok:
            break
        done = np.linalg.norm(xn - x) <= 1e-13 * (1.0 + np.linalg.norm(x))
        x = xn
        if done:
            break
    return _finish_nonlinear(F, z, eps, x, w), count


def _finish_nonlinear(F, z, eps, x, w):
    S = np.flatnonzero(np.abs(x) > 1e-12 * max(1.0, float(np.max(np.abs(x)))))
    if np.linalg.norm(F(x) - z) <= eps:
        return x
    supports = [list(S)] if S.size else []
    supports.append(list(range(F.in_dim)))
    for sup in supports:
        anchor = _gauss_newton_on_support(F, z, sup, x)
        y = _repair(F, z, eps, x, anchor)
        if y is not None:
            return y
    return None


def _penalty(F, z, eps, w, x_init=None):
    """Quadratic-hinge penalty on split variables with lambda continuation (L-BFGS-B)."""
    n = F.in_dim

    def fun(v, lam):
        p, q = v[:n], v[n:]
        x = p - q
        r = F(x) - z
        nr = float(np.linalg.norm(r))
        h = max(0.0, nr - eps)
        f = float(w @ (p + q)) + lam * h * h
        gx = 2.0 * lam * h * (F.derivative(x).T @ r) / nr if h > 0 else np.zeros(n)
        return f, np.concatenate([w + gx, w - gx])

    x0 = np.zeros(n) if x_init is None else np.asarray(x_init, dtype=float)
    v = np.concatenate([np.maximum(x0, 0.0), np.maximum(-x0, 0.0)])
    for lam in np.geomspace(1.0, 1e10, 11):
        res = minimize(fun, v, args=(lam,), jac=True, method="L-BFGS-B",
                       bounds=[(0.0, None)] * (2 * n),
                       options={"maxiter": 5000, "ftol": 1e-16, "gtol": 1e-12})
        v = res.x
    x = v[:n] - v[n:]
    # polish on the detected support with its sign pattern
    S = list(np.flatnonzero(np.abs(x) > 1e-7 * max(1.0, float(np.max(np.abs(x))))))
    if S:
        J = F.derivative(x)
        zl = z - F(x) + J @ x
        X = _support_candidates(J[:, S], zl, eps, w[S], np.sign(x[S])[None, :])
        if X is not None:
            y = np.zeros(n)
            y[S] = X[0]
            if _is_linear(F) or np.linalg.norm(F(y) - z) <= eps:
                x = y
    if np.linalg.norm(F(x) - z) > eps:
        x = _finish_nonlinear(F, z, eps, x, w)
    return x


@dataclass
class RecoveryReport:
    x: np.ndarray
    method: str
    objective: float
    residual: float
    eps: float
    certified_global: bool
    candidates: int = 0
    eps_effective: float = None
    sigma: float = None
    err_h: float = None
    err_m: float = None
    constants: dict = field(default_factory=dict)
    gamma3: float = None
    bound_h: float = None
    bound_m: float = None
    status: str = "no constants supplied"

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["x"] = [float(v) for v in self.x]
        return {k: certify._jsonable(v) for k, v in d.items()}


def recover(F, z, eps, triple, method="enum", x_true=None, constants=None):
    """Minimise |x|_M subject to |F(x) - z| <= eps.

    ``enum`` is exact (global over all supports) for linear F and a
    sequential-linearisation heuristic otherwise; ``penalty`` is the
    scalable path.  With ``x_true`` the report carries measured errors and,
    when ``constants`` (D, beta, gamma1, gamma2, aA, sA) give gamma3 > 0,
    the predicted bounds evaluated at ``eps + |F(x_true) - z|``.
    """
    z = as_vector(z, F.out_dim, "z")
    eps = float(eps)
    if not eps >= 0:
        raise InvalidInputError("eps must be non-negative")
    if F.in_dim != triple.n:
        raise InvalidInputError(f"map input dimension {F.in_dim} != triple dimension {triple.n}")
    w = triple.weights()
    linear = _is_linear(F)
    if method == "enum":
        if linear:
            x, count, ok = _enum_linear(F.derivative(np.zeros(F.in_dim)), z, eps, w)
            if not ok:
                raise InfeasibleError(f"no support admits |F(x) - z| <= {eps:g}")
        else:
            x, count = _enum_nonlinear(F, z, eps, w)
        certified = linear
    elif method == "penalty":
        x, count, certified = _penalty(F, z, eps, w), 0, False
    else:
        raise InvalidInputError(f"unknown recovery method {method!r}")
    if x is None:
        raise InfeasibleError(f"could not find a point with |F(x) - z| <= {eps:g}")
    residual = float(np.linalg.norm(F(x) - z))
    if residual > eps + 1e-8:
        raise InfeasibleError(f"recovered point violates the constraint by {residual - eps:.3g}")
    rep = RecoveryReport(x=x, method=method, objective=triple.m(x), residual=residual, eps=eps,
                         certified_global=certified, candidates=count)
    if x_true is not None:
        x_true = as_vector(x_true, triple.n, "x_true")
        noise = float(np.linalg.norm(F(x_true) - z))
        rep.eps_effective = eps + noise
        rep.sigma = sigma_kAM(x_true, triple, 1)
        rep.err_h = L2(x - x_true)
        rep.err_m = triple.m(x - x_true)
        if constants is not None:
            c = dict(constants)
            rep.constants = c
            rep.gamma3 = certify.recovery_condition(c["D"], c["beta"], c["gamma1"], c["gamma2"], c["aA"], c["sA"])
            if rep.gamma3 > 0:
                rep.bound_h, rep.bound_m = predict_bounds(
                    c["D"], c["beta"], c["gamma1"], c["gamma2"], c["aA"], c["sA"], rep.sigma, rep.eps_effective)
                within_ball = rep.objective <= triple.m(x_true) + 1e-12
                rep.status = "bound applies" if within_ball and noise <= eps + 1e-15 else \
                    "bound evaluated; hypotheses not verified for this point"
            else:
                rep.status = "theorem inapplicable"
    return rep


def classical_aA(triple):
    """(a_A, provenance): 1/s for classical triples, else a sampled lower bound."""
    if triple.kind == "classical":
        return 1.0 / triple.s, certify.FORMULA
    return a_A(triple).estimate, certify.SAMPLED_LOWER


def composed_constants(F, T, triple, plan, cap=DEFAULT_ENUM_CAP):
    """Constants for the composed recovery guarantee of a map near an RIP operator.

    Computes exact RIP constants on 2A and 4A, sampled linearisation errors on
    2A and 4A, then (D, beta) and (gamma1, gamma2).  Raises
    ``CertificateError`` when either the stated sufficient condition or the
    composed gamma3 > 0 fails.
    """
    T = as_operator(T)
    d2 = certify.rip_delta(T, triple.union, 2, cap=cap).estimate
    d4 = certify.rip_delta(T, triple.union, 4, cap=cap).estimate
    g2 = certify.gamma_kA(F, T, triple.union, 2, plan, m_norm=triple.m_norm, cap=cap).estimate
    g4 = certify.gamma_kA(F, T, triple.union, 4, plan, m_norm=triple.m_norm, cap=cap).estimate
    aA, aprov = classical_aA(triple)
    sA = s_A(triple)
    hyp = certify.composed_hypothesis(d2, d4, g2, g4, aA, sA)
    out = {"delta2A": d2, "delta4A": d4, "gamma2A": g2, "gamma4A": g4, "aA": aA, "sA": sA,
           "hypothesis": hyp,
           "provenance": {"delta2A": certify.EXACT, "delta4A": certify.EXACT, "gamma2A": certify.SAMPLED_LOWER,
                          "gamma4A": certify.SAMPLED_LOWER, "aA": aprov, "sA": certify.EXACT}}
    if not hyp < 1.0:
        raise CertificateError(f"sufficient condition value {hyp:.6g} >= 1", margin=1.0 - hyp, verdicts=out)
    D, beta = certify.sparse_riesz_constants(d2, g2)
    g1, gg2 = certify.almost_linear_constants(g2, g4)
    g3 = certify.recovery_condition(D, beta, g1, gg2, aA, sA)
    out.update({"D": D, "beta": beta, "gamma1": g1, "gamma2": gg2, "gamma3": g3})
    if not g3 > 0:
        raise CertificateError(f"composed gamma3 = {g3:.6g} <= 0", margin=g3, verdicts=out)
    return out
