"""Small dense linear algebra used by all the geometric modules.

Everything here works on plain float64 numpy arrays and treats them as
values: no function mutates its argument, and arrays stored in result
objects are marked read-only.  A subspace basis is always an
``(ambient, dim)`` array with orthonormal columns.

The singular value decomposition is a one-sided Jacobi iteration.  All
matrices in this package are tiny (nothing above 32x32), where Jacobi is
simple, deterministic and accurate to close to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# rank decisions are made relative to the largest singular value
RANK_TOL = 1e-10

_JACOBI_SWEEPS = 60
_JACOBI_EPS = 1e-15


def as_matrix(a) -> np.ndarray:
    """Validate and copy input into a float64 2-d array."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise InvalidInputError(f"expected a 2-d array, got ndim={m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def frozen(a: np.ndarray) -> np.ndarray:
    """Return a read-only view-safe copy of ``a``."""
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SvdResult:
    """Full decomposition ``a = left @ diag(singular_values) @ right.T``.

    ``left`` is (rows, rows) orthogonal, ``right`` is (cols, cols)
    orthogonal and ``singular_values`` has length min(rows, cols), sorted
    non-increasing, padded with zeros past the rank.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        r, c = self.left.shape[0], self.right.shape[0]
        d = np.zeros((r, c))
        k = len(self.singular_values)
        d[:k, :k] = np.diag(self.singular_values)
        return self.left @ d @ self.right.T

    def rank(self, tol: float = RANK_TOL) -> int:
        s = self.singular_values
        if len(s) == 0 or s[0] == 0.0:
            return 0
        return int(np.sum(s > tol * s[0]))


def _jacobi_tall(b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided Jacobi on a tall matrix b (n, k), n >= k.

    Returns (u_full (n,n), sigma (k,), v (k,k)) with b = u_full[:, :k] * sigma @ v.T.
    """
    n, k = b.shape
    w = b.copy()
    v = np.eye(k)
    for _ in range(_JACOBI_SWEEPS):
        off = 0.0
        for i in range(k - 1):
            for j in range(i + 1, k):
                x = w[:, i]
                y = w[:, j]
                alpha = float(x @ x)
                beta = float(y @ y)
                gamma = float(x @ y)
                if alpha == 0.0 or beta == 0.0:
                    continue
                denom = math.sqrt(alpha) * math.sqrt(beta)
                if denom == 0.0:
                    continue
                off = max(off, abs(gamma) / denom)
                if abs(gamma) <= _JACOBI_EPS * denom:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                w[:, i], w[:, j] = c * x - s * y, s * x + c * y
                v[:, i], v[:, j] = c * v[:, i] - s * v[:, j], s * v[:, i] + c * v[:, j]
        if off <= _JACOBI_EPS:
            break

    sigma = np.linalg.norm(w, axis=0) if k else np.zeros(0)

    # canonical signs: the largest-magnitude entry of each right vector is
    # made positive (flip u and v together, which preserves the product)
    for i in range(k):
        col = v[:, i]
        pivot = int(np.argmax(np.abs(np.round(col, 12))))
        if col[pivot] < 0.0:
            v[:, i] = -col
            w[:, i] = -w[:, i]

    # non-increasing sigma; degenerate blocks broken lexicographically on
    # the right vectors so repeated values still give deterministic bases
    order = sorted(
        range(k),
        key=lambda i: (-round(float(sigma[i]), 12), tuple(np.round(-v[:, i], 10))),
    )
    w = w[:, order]
    v = v[:, order]
    sigma = sigma[list(order)]

    cutoff = (sigma[0] if k else 0.0) * 1e-14
    u_cols = []
    for i in range(k):
        if sigma[i] > cutoff:
            u_cols.append(w[:, i] / sigma[i])
        else:
            sigma[i] = max(sigma[i], 0.0)
    u_part = np.column_stack(u_cols) if u_cols else np.zeros((n, 0))
    u_full = orthonormal_completion(u_part, n)
    return u_full, sigma, v


def svd(a) -> SvdResult:
    """Full SVD of an arbitrary small dense matrix."""
    m = as_matrix(a)
    r, c = m.shape
    if r == 0 or c == 0:
        return SvdResult(frozen(np.eye(r)), frozen(np.zeros(min(r, c))), frozen(np.eye(c)))
    if r <= c:
        u_full, sigma, v = _jacobi_tall(m.T)
        # m = v * sigma @ u_full[:, :r].T, so left <- v, right <- u_full
        return SvdResult(frozen(v), frozen(sigma), frozen(u_full))
    u_full, sigma, v = _jacobi_tall(m)
    return SvdResult(frozen(u_full), frozen(sigma), frozen(v))


def singular_values(a) -> np.ndarray:
    return svd(a).singular_values


def rank_of(a, tol: float = RANK_TOL) -> int:
    return svd(a).rank(tol)


def orthonormal_completion(q: np.ndarray, ambient: int | None = None) -> np.ndarray:
    """Extend orthonormal columns ``q`` to a square orthogonal matrix.

    Candidates are taken from the identity, most-independent first, so the
    completion is deterministic.
    """
    n = q.shape[0] if ambient is None else ambient
    if q.size == 0:
        q = np.zeros((n, 0))
    cols = [q[:, i] for i in range(q.shape[1])]
    while len(cols) < n:
        best, best_norm = None, -1.0
        basis = np.column_stack(cols) if cols else np.zeros((n, 0))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            r = e - basis @ (basis.T @ e) if cols else e
            nr = float(np.linalg.norm(r))
            if nr > best_norm + 1e-12:
                best, best_norm = r, nr
        # re-orthogonalize once for numerical hygiene
        r = best / best_norm
        if cols:
            r = r - basis @ (basis.T @ r)
            r = r / np.linalg.norm(r)
        cols.append(r)
    return np.column_stack(cols)


@dataclass(frozen=True)
class OrthonormalizeResult:
    """Orthonormal basis for the span of the input vectors.

    ``matrix`` holds the kept columns; ``dropped`` lists the indices of
    input vectors that were linearly dependent at the tolerance.
    """

    matrix: np.ndarray
    rank: int
    dropped: tuple[int, ...]

    @property
    def deficient(self) -> bool:
        return len(self.dropped) > 0


def orthonormalize(vectors, tol: float = RANK_TOL) -> OrthonormalizeResult:
    """Modified Gram-Schmidt with a second re-orthogonalization pass.

    Accepts a sequence of same-length vectors or an (ambient, k) column
    matrix.  Vectors below ``tol`` (relative to the largest input norm)
    after projection are reported as dropped rather than kept.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        m = as_matrix(vectors)
    else:
        vs = [np.asarray(v, dtype=float).ravel() for v in vectors]
        if not vs:
            raise InvalidInputError("orthonormalize needs at least one vector")
        q = len(vs[0])
        if any(len(v) != q for v in vs):
            raise InvalidInputError("vectors do not share an ambient dimension")
        m = as_matrix(np.column_stack(vs))
    if m.shape[1] == 0:
        raise InvalidInputError("orthonormalize needs at least one vector")

    scale = float(np.max(np.linalg.norm(m, axis=0))) if m.size else 0.0
    if scale == 0.0:
        return OrthonormalizeResult(frozen(np.zeros((m.shape[0], 0))), 0,
                                    tuple(range(m.shape[1])))
    kept: list[np.ndarray] = []
    dropped: list[int] = []
    for i in range(m.shape[1]):
        v = m[:, i].copy()
        for _ in range(2):
            for u in kept:
                v -= (u @ v) * u
        nv = float(np.linalg.norm(v))
        if nv <= tol * scale:
            dropped.append(i)
        else:
            kept.append(v / nv)
    basis = np.column_stack(kept) if kept else np.zeros((m.shape[0], 0))
    return OrthonormalizeResult(frozen(basis), len(kept), tuple(dropped))


def gram_volume(vectors) -> float:
    """j-dimensional volume of the parallelepiped spanned by j vectors.

    Computed as the product of the singular values of the column matrix,
    which equals sqrt(det of the Gram matrix); zero when dependent.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        m = as_matrix(vectors)
    else:
        m = as_matrix(np.column_stack([np.asarray(v, dtype=float) for v in vectors]))
    q, j = m.shape
    if j == 0:
        return 1.0
    if j > q:
        return 0.0
    s = svd(m).singular_values
    return float(np.prod(s[:j]))


def nullspace(a, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (cols) of the kernel of ``a``."""
    m = as_matrix(a)
    dec = svd(m)
    r = dec.rank(tol)
    return frozen(dec.right[:, r:])


def project_columns(basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of vector(s) onto the column span of ``basis``."""
    if basis.shape[1] == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return basis @ (basis.T @ x)


def containment_residual(outer: np.ndarray, inner: np.ndarray) -> float:
    """Max-norm residual of projecting ``inner`` columns onto span(outer)."""
    if inner.shape[1] == 0:
        return 0.0
    r = inner - project_columns(outer, inner)
    return float(np.max(np.abs(r)))


def intersect_bases(u: np.ndarray, w: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of span(u) ∩ span(w); bases share an ambient dim.

    A null vector (x, y) of [u | -w] encodes u x = w y, i.e. a vector in
    both spans; the intersection dimension equals
    dim u + dim w - rank [u | w].
    """
    if u.shape[0] != w.shape[0]:
        raise InvalidInputError("ambient dimension mismatch")
    a, b = u.shape[1], w.shape[1]
    if a == 0 or b == 0:
        return frozen(np.zeros((u.shape[0], 0)))
    ker = nullspace(np.hstack([u, -w]), tol)
    if ker.shape[1] == 0:
        return frozen(np.zeros((u.shape[0], 0)))
    vecs = u @ ker[:a, :]
    return orthonormalize(vecs, tol).matrix
