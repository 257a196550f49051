"""Finite-dimensional vectors, norms, dense operators and unions of subspaces."""
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NoLeftInverseError, ResourceLimitError, UnsupportedError
from .kernels import pnorm_rows

DEFAULT_ENUM_CAP = 200_000
ORTHO_TOL = 1e-12
SPAN_TOL = 1e-10


def as_vector(x, dim=None, name="x"):
    """Validate ``x`` as a finite 1-D float vector (optionally of length ``dim``)."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise InvalidInputError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return v


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormSpec:
    """A p-norm (``kind="p"``) or weighted l1 norm, times a positive ``scale``."""

    kind: str = "p"
    p: float = 2.0
    weights: tuple = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("p", "weighted_l1"):
            raise InvalidInputError(f"unknown norm kind {self.kind!r}")
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise InvalidInputError("norm scale must be positive and finite")
        if self.kind == "p":
            if not (self.p >= 1.0):
                raise InvalidInputError(f"p must lie in [1, inf], got {self.p}")
        else:
            if self.weights is None or len(self.weights) == 0:
                raise InvalidInputError("weighted_l1 needs a weight vector")
            if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
                raise InvalidInputError("weights must be positive and finite")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def lp(cls, p, scale=1.0):
        return cls(kind="p", p=float(p), scale=float(scale))

    @classmethod
    def weighted_l1(cls, weights, scale=1.0):
        return cls(kind="weighted_l1", p=1.0, weights=tuple(weights), scale=float(scale))

    @classmethod
    def parse(cls, text):
        """Parse ``l1``, ``l2``, ``linf``, ``inf`` or a bare exponent such as ``3``."""
        if isinstance(text, NormSpec):
            return text
        if isinstance(text, (int, float)):
            return cls.lp(float(text))
        t = str(text).strip().lower()
        if t in ("linf", "inf", "l_inf", "max"):
            return cls.lp(math.inf)
        if t.startswith("l"):
            t = t[1:]
        try:
            return cls.lp(float(t))
        except ValueError:
            raise InvalidInputError(f"cannot parse norm {text!r}") from None

    @property
    def is_euclidean(self):
        return self.kind == "p" and self.p == 2.0

    def _weights_for(self, n):
        if self.kind != "weighted_l1":
            return None
        if len(self.weights) != n:
            raise InvalidInputError(f"norm has {len(self.weights)} weights, vector has dimension {n}")
        return np.asarray(self.weights)

    def rows(self, X):
        """Norm of every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "weighted_l1":
            return self.scale * np.abs(X) @ self._weights_for(X.shape[1])
        return self.scale * pnorm_rows(X, self.p)

    def __call__(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(self.rows(x[None, :])[0])

    def magnitudes(self, x):
        """Per-coordinate contributions ``w_i |x_i|`` (weights 1 for p-norms)."""
        x = np.asarray(x, dtype=float)
        w = self._weights_for(x.shape[-1])
        return np.abs(x) if w is None else np.abs(x) * w

    def rescaled(self, factor):
        return NormSpec(kind=self.kind, p=self.p, weights=self.weights, scale=self.scale * float(factor))

    def to_dict(self):
        d = {"kind": self.kind, "scale": self.scale}
        if self.kind == "p":
            d["p"] = "inf" if math.isinf(self.p) else self.p
        else:
            d["weights"] = list(self.weights)
        return d


L1 = NormSpec.lp(1)
L2 = NormSpec.lp(2)
LINF = NormSpec.lp(math.inf)


# ---------------------------------------------------------------------------
# dense operators
# ---------------------------------------------------------------------------

def singular_values(M):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        raise InvalidInputError("empty matrix")
    return np.linalg.svd(M, compute_uv=False)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """An m x n real matrix with cached extreme singular values.

    ``sigma_min`` is ``inf |Ty| / |y|`` over nonzero ``y``, which is zero
    whenever ``m < n``.
    """

    matrix: np.ndarray
    sigma_min: float = field(init=False)
    sigma_max: float = field(init=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        if M.ndim != 2 or M.size == 0:
            raise InvalidInputError(f"operator must be a non-empty 2-D array, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InvalidInputError("operator has non-finite entries")
        M.setflags(write=False)
        s = singular_values(M)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "sigma_max", float(s[0]))
        object.__setattr__(self, "sigma_min", float(s[-1]) if M.shape[0] >= M.shape[1] else 0.0)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def bounded_below(self):
        return self.sigma_min > 0 and self.shape[0] >= self.shape[1]

    @property
    def adjoint(self):
        return DenseOperator(self.matrix.T)

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return DenseOperator(self.matrix @ other.matrix)
        return self.matrix @ other

    def norm(self):
        return self.sigma_max


def as_operator(T):
    return T if isinstance(T, DenseOperator) else DenseOperator(np.asarray(T, dtype=float))


def singular_bounds(T):
    """(sigma_min, sigma_max) of ``T`` via a full SVD."""
    T = as_operator(T)
    return T.sigma_min, T.sigma_max


def left_inverse(T, rtol=1e-12):
    """Moore-Penrose left inverse of a full-column-rank operator."""
    T = as_operator(T)
    m, n = T.shape
    if m < n or T.sigma_min <= rtol * max(T.sigma_max, 1.0):
        raise NoLeftInverseError(
            f"operator of shape {T.shape} is not bounded below (sigma_min={T.sigma_min:.3e})"
        )
    return DenseOperator(np.linalg.pinv(T.matrix))


# ---------------------------------------------------------------------------
# subspaces
# ---------------------------------------------------------------------------

def orthonormalize(M, tol=SPAN_TOL):
    """Orthonormal basis for the column span of ``M`` (rank-revealing SVD)."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise InvalidInputError("cannot orthonormalize a zero matrix")
    r = int(np.sum(s > tol * s[0]))
    return U[:, :r]


def _coordinate_support(B):
    """Support tuple if the columns of ``B`` are signed standard basis vectors."""
    A = np.abs(B)
    if not np.all((A < 1e-14) | (np.abs(A - 1.0) < 1e-14)):
        return None
    if not np.all(np.sum(A > 0.5, axis=0) == 1):
        return None
    idx = np.argmax(A, axis=0)
    if len(set(idx.tolist())) != B.shape[1]:
        return None
    return tuple(sorted(int(i) for i in idx))


def project(x, basis):
    """Orthogonal projection ``B B^T x`` onto the span of an orthonormal basis."""
    B = np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    x = as_vector(x)
    if x.shape[0] != B.shape[0]:
        raise InvalidInputError(f"x has dimension {x.shape[0]}, basis lives in R^{B.shape[0]}")
    return B @ (B.T @ x)


@dataclass(frozen=True, eq=False)
class SubspaceUnion:
    """A finite union of subspaces of R^n, each stored by an orthonormal basis.

    ``supports`` is filled in when every basis is coordinate aligned, and
    ``classical`` holds ``(n, s)`` when the union is exactly the set of all
    s-sparse vectors in R^n.
    """

    bases: tuple
    ambient_dim: int
    supports: tuple = None
    classical: tuple = None

    def __post_init__(self):
        bases = []
        for i, B in enumerate(self.bases):
            B = np.array(B, dtype=float)
            if B.ndim == 1:
                B = B.reshape(-1, 1)
            if B.shape[0] != self.ambient_dim:
                raise InvalidInputError(f"basis {i} lives in R^{B.shape[0]}, expected R^{self.ambient_dim}")
            d = B.shape[1]
            if not 1 <= d <= self.ambient_dim:
                raise InvalidInputError(f"basis {i} has {d} columns")
            if np.max(np.abs(B.T @ B - np.eye(d))) > ORTHO_TOL:
                raise InvalidInputError(f"basis {i} is not orthonormal")
            B.setflags(write=False)
            bases.append(B)
        object.__setattr__(self, "bases", tuple(bases))
        if self.supports is None:
            sup = [_coordinate_support(B) for B in bases]
            if sup and all(s is not None for s in sup):
                object.__setattr__(self, "supports", tuple(sup))

    def __len__(self):
        return len(self.bases)

    @classmethod
    def from_spans(cls, spans, ambient_dim=None):
        spans = [np.asarray(S, dtype=float) for S in spans]
        spans = [S.reshape(-1, 1) if S.ndim == 1 else S for S in spans]
        n = ambient_dim if ambient_dim is not None else spans[0].shape[0]
        return cls(tuple(orthonormalize(S) for S in spans), n)

    @classmethod
    def from_supports(cls, n, supports, classical=None):
        eye = np.eye(n)
        supports = tuple(tuple(sorted(int(i) for i in S)) for S in supports)
        for S in supports:
            if not S or S[0] < 0 or S[-1] >= n:
                raise InvalidInputError(f"support {S} invalid in R^{n}")
        return cls(tuple(eye[:, list(S)] for S in supports), n, supports=supports, classical=classical)

    @classmethod
    def sparse(cls, n, s):
        """All s-sparse vectors in R^n (supports in lexicographic order)."""
        if not 1 <= s <= n:
            raise InvalidInputError(f"need 1 <= s <= n, got s={s}, n={n}")
        return cls.from_supports(n, itertools.combinations(range(n), s), classical=(n, s))

    @property
    def dims(self):
        return [B.shape[1] for B in self.bases]


def best_subspace(x, u, norm=L2):
    """Index and approximant of the subspace closest to ``x`` in ``norm``.

    For the Euclidean norm the approximant is the orthogonal projection.  For
    any other supported norm the union must be coordinate aligned, where the
    minimiser over each piece is plain coordinate truncation.  Ties go to the
    lowest index.
    """
    if len(u) == 0:
        raise InvalidInputError("empty subspace union")
    x = as_vector(x, u.ambient_dim)
    norm = NormSpec.parse(norm) if not isinstance(norm, NormSpec) else norm
    if u.supports is not None:
        cands = np.zeros((len(u), x.shape[0]))
        for i, S in enumerate(u.supports):
            cands[i, list(S)] = x[list(S)]
    elif norm.is_euclidean:
        cands = np.array([B @ (B.T @ x) for B in u.bases])
    else:
        raise UnsupportedError("non-Euclidean best approximation needs a coordinate-aligned union")
    dist = norm.rows(x[None, :] - cands)
    tol = 1e-12 * (1.0 + float(np.max(dist)))
    i = int(np.flatnonzero(dist <= dist.min() + tol)[0])
    return i, cands[i]


def _n_multisets(N, k):
    return math.comb(N + k - 1, k)


def _maximal_supports(sets):
    sets = sorted(set(sets), key=lambda S: (-len(S), S))
    kept = []
    for S in sets:
        fs = frozenset(S)
        if not any(fs <= frozenset(K) for K in kept):
            kept.append(S)
    return sorted(kept, key=lambda S: (len(S), S))


def sum_union(u, k, cap=DEFAULT_ENUM_CAP):
    """The union ``kA`` of all k-fold Minkowski sums of pieces of ``u``.

    Pieces whose span is contained in another piece are absorbed, so the
    result lists only maximal subspaces.
    """
    if k < 1:
        raise InvalidInputError("k must be a positive integer")
    if k == 1:
        return u
    n = u.ambient_dim
    if u.classical is not None:
        _, s = u.classical
        t = min(k * s, n)
        count = math.comb(n, t)
        if count > cap:
            raise ResourceLimitError(f"{count} supports of size {t} in R^{n} exceed cap {cap}")
        return SubspaceUnion.sparse(n, t)
    count = _n_multisets(len(u), k)
    if count > cap:
        raise ResourceLimitError(f"C({len(u)}+{k}-1, {k}) = {count} multisets exceed cap {cap}")
    if u.supports is not None:
        sets = []
        for combo in itertools.combinations_with_replacement(range(len(u)), k):
            sets.append(tuple(sorted(set().union(*(u.supports[i] for i in combo)))))
        return SubspaceUnion.from_supports(n, _maximal_supports(sets))
    spans = []
    for combo in itertools.combinations_with_replacement(range(len(u)), k):
        spans.append(orthonormalize(np.hstack([u.bases[i] for i in combo])))
    return SubspaceUnion(tuple(_maximal_spans(spans)), n)


def span_contains(big, small, tol=SPAN_TOL):
    """True if span(small) is contained in span(big) (both orthonormal)."""
    R = small - big @ (big.T @ small)
    return float(np.max(np.abs(R))) < tol


def _maximal_spans(spans):
    order = sorted(range(len(spans)), key=lambda i: -spans[i].shape[1])
    kept = []
    for i in order:
        if not any(span_contains(spans[j], spans[i]) for j in kept):
            kept.append(i)
    return [spans[i] for i in sorted(kept)]


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def read_matrix(path):
    """Load a matrix from CSV (row-major) or JSON ``{"rows", "cols", "data"}``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        obj = json.loads(path.read_text())
        try:
            rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"{path}: matrix JSON needs rows, cols, data") from exc
        arr = np.asarray(data, dtype=float).reshape(-1)
        if arr.size != rows * cols:
            raise InvalidInputError(f"{path}: {arr.size} entries for a {rows}x{cols} matrix")
        return arr.reshape(rows, cols)
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return arr


def write_matrix(path, M):
    path = Path(path)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if path.suffix.lower() == ".json":
        obj = {"rows": M.shape[0], "cols": M.shape[1], "data": [float(v) for v in M.reshape(-1)]}
        path.write_text(json.dumps(obj))
    else:
        np.savetxt(path, M, delimiter=",", fmt="%.17g")


def read_vector(path):
    return read_matrix(path).reshape(-1)


def write_vector(path, v):
    v = np.asarray(v, dtype=float).reshape(-1)
    if Path(path).suffix.lower() == ".json":
        write_matrix(path, v.reshape(-1, 1))
    else:
        write_matrix(path, v.reshape(1, -1))
