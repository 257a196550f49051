"""Differentiable maps F with analytic Jacobians, plus the catalog of test maps."""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .spaces import L2, DenseOperator, NormSpec, as_operator, as_vector

ZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DifferentiableMap:
    """A map R^n -> R^m together with its Jacobian.

    ``eval_batch`` / ``jacobian_batch`` are optional vectorised versions taking
    an ``(N, n)`` array; when absent the scalar callables are looped.
    ``out_norm`` is the norm the map's examples are naturally measured in.
    """

    eval: object
    jacobian: object
    in_dim: int
    out_dim: int
    zero_normalized: bool = False
    name: str = "map"
    params: dict = field(default_factory=dict)
    eval_batch: object = None
    jacobian_batch: object = None
    out_norm: NormSpec = L2

    def __post_init__(self):
        if self.zero_normalized:
            f0 = np.asarray(self.eval(np.zeros(self.in_dim)), dtype=float)
            if np.linalg.norm(f0) > ZERO_TOL:
                raise InvalidInputError(f"{self.name}: flagged F(0)=0 but |F(0)| = {np.linalg.norm(f0):.3e}")

    def __call__(self, x):
        return np.asarray(self.eval(as_vector(x, self.in_dim)), dtype=float).reshape(self.out_dim)

    def derivative(self, x):
        x = as_vector(x, self.in_dim)
        if self.jacobian is None:
            return fd_jacobian(self, x)
        return np.asarray(self.jacobian(x), dtype=float).reshape(self.out_dim, self.in_dim)

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.eval_batch is not None:
            return np.asarray(self.eval_batch(X), dtype=float).reshape(X.shape[0], self.out_dim)
        return np.array([self(x) for x in X]).reshape(X.shape[0], self.out_dim)

    def derivatives_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.jacobian_batch is not None:
            return np.asarray(self.jacobian_batch(X), dtype=float).reshape(X.shape[0], self.out_dim, self.in_dim)
        return np.array([self.derivative(x) for x in X]).reshape(X.shape[0], self.out_dim, self.in_dim)


def fd_step(x):
    return max(1e-6, 1e-6 * float(np.max(np.abs(x))) if np.size(x) else 1e-6)


def fd_jacobian(F, x, h=None):
    """Central-difference Jacobian, one column per coordinate."""
    x = as_vector(x, F.in_dim)
    h = fd_step(x) if h is None else float(h)
    if not h > 0:
        raise InvalidInputError("finite-difference step must be positive")
    J = np.empty((F.out_dim, F.in_dim))
    for j in range(F.in_dim):
        e = np.zeros(F.in_dim)
        e[j] = h
        J[:, j] = (np.asarray(F.eval(x + e), dtype=float) - np.asarray(F.eval(x - e), dtype=float)) / (2 * h)
    return J


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------

def linear_map(T, name="linear"):
    T = as_operator(T)
    M = T.matrix
    return DifferentiableMap(
        eval=lambda x: M @ x,
        jacobian=lambda x: M,
        in_dim=M.shape[1],
        out_dim=M.shape[0],
        zero_normalized=True,
        name=name,
        params={"kind": "linear"},
        eval_batch=lambda X: X @ M.T,
        jacobian_batch=lambda X: np.broadcast_to(M, (X.shape[0],) + M.shape),
    )


# ---------------------------------------------------------------------------
# the U-shaped curves E_{p, eps}
# ---------------------------------------------------------------------------

def _parse_p(p):
    if isinstance(p, str):
        return NormSpec.parse(p).p
    return float(p)


def e_map(p=2, eps=0.0):
    """The U-shaped curve R -> R^2: a half-circle arc joined to two tangent rays.

    For ``|t| <= pi/2 + eps`` the curve is ``(sin t, -cos t)``; outside it
    continues along the tangent lines.  The exponent ``p`` does not change
    the curve, only the output norm used when certifying it.
    """
    eps = float(eps)
    if not 0.0 <= eps < math.pi / 4:
        raise InvalidInputError(f"eps must lie in [0, pi/4), got {eps}")
    p = _parse_p(p)
    c, s = math.cos(eps), math.sin(eps)
    edge = math.pi / 2 + eps

    def ev_batch(X):
        t = np.asarray(X, dtype=float).reshape(-1)
        out = np.empty((t.size, 2))
        mid = np.abs(t) <= edge
        lo = t < -edge
        hi = t > edge
        out[mid, 0] = np.sin(t[mid])
        out[mid, 1] = -np.cos(t[mid])
        d = t[lo] + edge
        out[lo, 0] = -c - s * d
        out[lo, 1] = s - c * d
        d = t[hi] - edge
        out[hi, 0] = c - s * d
        out[hi, 1] = s + c * d
        return out

    def jac_batch(X):
        t = np.asarray(X, dtype=float).reshape(-1)
        out = np.empty((t.size, 2, 1))
        mid = np.abs(t) <= edge
        out[mid, 0, 0] = np.cos(t[mid])
        out[mid, 1, 0] = np.sin(t[mid])
        lo = t < -edge
        out[lo, 0, 0] = -s
        out[lo, 1, 0] = -c
        hi = t > edge
        out[hi, 0, 0] = -s
        out[hi, 1, 0] = c
        return out

    return DifferentiableMap(
        eval=lambda x: ev_batch(x)[0],
        jacobian=lambda x: jac_batch(x)[0],
        in_dim=1,
        out_dim=2,
        zero_normalized=False,
        name=f"e_map(p={p:g}, eps={eps:g})",
        params={"kind": "e_map", "p": "inf" if math.isinf(p) else p, "eps": eps},
        eval_batch=ev_batch,
        jacobian_batch=jac_batch,
        out_norm=NormSpec.lp(p),
    )


def t1_operator():
    """The embedding t -> (t, 0) used as the linear reference for E_{p,eps}."""
    return DenseOperator(np.array([[1.0], [0.0]]))


# ---------------------------------------------------------------------------
# perturbations of a linear operator
# ---------------------------------------------------------------------------

_G = {
    "sin": (np.sin, np.cos),
    "tanh": (np.tanh, lambda u: 1.0 / np.cosh(u) ** 2),
}


def perturbed_linear(T, eta, g_kind="sin"):
    """F(x) = T x + eta * g(T x), with g applied componentwise and g(0) = 0.

    The Jacobian is ``(I + eta diag(g'(Tx))) T``; for a scalar ``T = 1`` this
    is ``1 + eta g'(x)``.  Applying g on the output side keeps F well defined
    for rectangular T.
    """
    T = as_operator(T)
    eta = float(eta)
    if not eta >= 0:
        raise InvalidInputError("eta must be non-negative")
    if g_kind not in _G:
        raise InvalidInputError(f"g_kind must be one of {sorted(_G)}")
    g, dg = _G[g_kind]
    M = T.matrix

    def ev_batch(X):
        Y = X @ M.T
        return Y + eta * g(Y)

    def jac_batch(X):
        Y = X @ M.T
        return (1.0 + eta * dg(Y))[:, :, None] * M[None, :, :]

    return DifferentiableMap(
        eval=lambda x: ev_batch(x[None, :])[0],
        jacobian=lambda x: jac_batch(x[None, :])[0],
        in_dim=M.shape[1],
        out_dim=M.shape[0],
        zero_normalized=True,
        name=f"perturbed_linear(eta={eta:g}, g={g_kind})",
        params={"kind": "perturbed_linear", "eta": eta, "g": g_kind},
        eval_batch=ev_batch,
        jacobian_batch=jac_batch,
    )


# ---------------------------------------------------------------------------
# companding followed by sampling
# ---------------------------------------------------------------------------

_F = {
    "identity": (lambda t, c: t, lambda t, c: np.ones_like(t)),
    "cubic": (lambda t, c: t + c * t**3, lambda t, c: 1.0 + 3.0 * c * t**2),
    "tanh": (lambda t, c: np.tanh(t), lambda t, c: 1.0 / np.cosh(t) ** 2),
}

GRAM_COND_LIMIT = 1e8


def _checked_inverse(G, label):
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond >= GRAM_COND_LIMIT:
        raise InvalidInputError(f"{label} is singular to working precision (condition number {cond:.3e})")
    return np.linalg.inv(G)


def companding_map(Phi, Psi, f="identity", c=0.0):
    """Companding-then-sampling map and its linear surrogate.

    ``Phi`` (n x L) holds the impulse responses and ``Psi`` (m x L) the
    sampling functionals, both as samples on L atoms.  The map is
    ``x -> Psi f(Phi^T x)`` with ``f`` applied entrywise.  The surrogate is
    returned in column convention (m x n):
    ``G_pp^{-1} G_pf (G_fp G_pp^{-1} G_pf)^{-1} G_ff`` where
    ``G_ff = Phi Phi^T``, ``G_fp = Phi Psi^T``, ``G_pp = Psi Psi^T``.
    It satisfies ``T^T (Psi Phi^T) = Phi Phi^T``.
    """
    Phi = np.asarray(Phi, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    if Phi.ndim != 2 or Psi.ndim != 2 or Phi.shape[1] != Psi.shape[1]:
        raise InvalidInputError("Phi (n x L) and Psi (m x L) must share the atom count L")
    if isinstance(f, str):
        if f not in _F:
            raise InvalidInputError(f"unknown companding function {f!r}")
        fname = f
        fv, fd = (lambda t, _f=_F[f][0]: _f(t, c)), (lambda t, _f=_F[f][1]: _f(t, c))
    else:
        fname = getattr(f[0], "__name__", "custom")
        fv, fd = f
    if abs(float(np.asarray(fv(np.zeros(1)))[0])) > ZERO_TOL:
        raise InvalidInputError("companding function must satisfy f(0) = 0")

    G_ff = Phi @ Phi.T
    G_fp = Phi @ Psi.T
    G_pp_inv = _checked_inverse(Psi @ Psi.T, "Psi Psi^T")
    inner_inv = _checked_inverse(G_fp @ G_pp_inv @ G_fp.T, "Phi Psi^T (Psi Psi^T)^-1 Psi Phi^T")
    T = G_pp_inv @ G_fp.T @ inner_inv @ G_ff

    def ev_batch(X):
        return fv(X @ Phi) @ Psi.T

    def jac_batch(X):
        D = fd(X @ Phi)  # (N, L)
        return np.einsum("ml,nl,kl->kmn", Psi, Phi, D)

    F = DifferentiableMap(
        eval=lambda x: ev_batch(x[None, :])[0],
        jacobian=lambda x: jac_batch(x[None, :])[0],
        in_dim=Phi.shape[0],
        out_dim=Psi.shape[0],
        zero_normalized=True,
        name=f"companding(f={fname}, n={Phi.shape[0]}, m={Psi.shape[0]}, L={Phi.shape[1]})",
        params={"kind": "companding", "f": fname, "c": c, "n": Phi.shape[0], "m": Psi.shape[0], "L": Phi.shape[1]},
        eval_batch=ev_batch,
        jacobian_batch=jac_batch,
    )
    return F, DenseOperator(T)


# ---------------------------------------------------------------------------
# seeded operators and map specs
# ---------------------------------------------------------------------------

def seeded_operator(shape, seed, distribution="gaussian"):
    """Random operator; ``gaussian`` entries are N(0, 1/m) so columns have unit mean norm."""
    m, n = (int(v) for v in shape)
    rng = np.random.default_rng(seed)
    if distribution == "gaussian":
        return DenseOperator(rng.standard_normal((m, n)) / math.sqrt(m))
    if distribution == "orthogonal":
        Q, R = np.linalg.qr(rng.standard_normal((max(m, n), max(m, n))))
        Q = Q * np.sign(np.diag(R))
        return DenseOperator(Q[:m, :n])
    if distribution == "graded":
        Q, R = np.linalg.qr(rng.standard_normal((n, n)))
        Q = Q * np.sign(np.diag(R))
        if m != n:
            raise InvalidInputError("graded operators are square")
        return DenseOperator(Q @ np.diag(np.linspace(1.0, 2.0, n)))
    if distribution == "banded":
        if m != n:
            raise InvalidInputError("banded operators are square")
        off = 0.3 * rng.uniform(-1, 1, n - 1)
        return DenseOperator(np.eye(n) + np.diag(off, 1) + np.diag(off[::-1], -1))
    raise InvalidInputError(f"unknown distribution {distribution!r}")


def map_from_spec(spec, operator=None):
    """Build ``(F, T)`` from a config dict such as ``{"kind": "e_map", "p": 2, "eps": 0}``.

    ``T`` is the natural linear reference when the spec implies one (``T1``
    for E-maps, the surrogate for companding, the operator itself otherwise)
    and ``None`` when nothing is available.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InvalidInputError("map spec needs a 'kind' field")
    kind = spec["kind"]
    if kind == "e_map":
        return e_map(spec.get("p", 2), spec.get("eps", 0.0)), (operator or t1_operator())
    if kind in ("linear", "perturbed_linear"):
        if operator is None:
            raise InvalidInputError(f"map kind {kind!r} needs an operator")
        if kind == "linear":
            return linear_map(operator), operator
        return perturbed_linear(operator, spec.get("eta", 0.0), spec.get("g", "sin")), operator
    if kind == "companding":
        try:
            n, m, L = int(spec["n"]), int(spec["m"]), int(spec["L"])
        except KeyError as exc:
            raise InvalidInputError(f"companding spec missing {exc.args[0]!r}") from None
        rng = np.random.default_rng(spec.get("seed", 0))
        Phi = rng.standard_normal((n, L))
        Psi = rng.standard_normal((m, L))
        return companding_map(Phi, Psi, spec.get("f", "identity"), spec.get("c", 0.0))
    raise InvalidInputError(f"unknown map kind {kind!r}")


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapCatalogEntry:
    """A named (F, T) instance with its documented constants.

    ``constants`` maps a constant name to ``(value, provenance)`` where the
    provenance is one of ``"stated"``, ``"derived"`` or ``"exact"``.
    """

    name: str
    build: object
    constants: dict = field(default_factory=dict)

    def instance(self):
        return self.build()


def catalog():
    sq2 = math.sqrt(2.0)
    entries = []
    for p in (1, 2, math.inf):
        for eps in (0.0, math.pi / 6):
            consts = {}
            if p == 2 and eps == 0.0:
                consts = {"beta_T1": (sq2, "stated"), "alpha": (sq2, "derived")}
            if math.isinf(p) and eps == 0.0:
                consts = {"beta_T1": (1.0, "derived"), "alpha": (1.0, "stated")}
            entries.append(
                MapCatalogEntry(
                    f"e_map_p{p:g}_eps{eps:.4f}",
                    (lambda p=p, eps=eps: (e_map(p, eps), t1_operator())),
                    consts,
                )
            )
    entries.append(
        MapCatalogEntry(
            "scalar_sin_0.1",
            lambda: (perturbed_linear(np.eye(1), 0.1, "sin"), DenseOperator(np.eye(1))),
            {"delta": (0.1, "derived"), "beta": (0.0, "derived")},
        )
    )
    entries.append(
        MapCatalogEntry(
            "graded4_sin_0.05",
            lambda: (perturbed_linear(seeded_operator((4, 4), 7, "graded"), 0.05, "sin"),
                     seeded_operator((4, 4), 7, "graded")),
        )
    )
    entries.append(
        MapCatalogEntry(
            "identity3",
            lambda: (linear_map(np.eye(3)), DenseOperator(np.eye(3))),
            {"beta": (0.0, "exact"), "delta": (0.0, "exact")},
        )
    )
    entries.append(
        MapCatalogEntry(
            "companding_cubic_3x4x8",
            lambda: map_from_spec({"kind": "companding", "n": 3, "m": 4, "L": 8, "f": "cubic", "c": 0.01, "seed": 3}),
        )
    )
    return entries
