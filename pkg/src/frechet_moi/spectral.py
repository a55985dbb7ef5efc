"""Hermitian matrices as finite stand-ins for self-adjoint operators.

Covers clustered spectral decomposition, the functional calculus
``f(A) = U f(Lambda) U*``, Schatten p-norms, seeded random inputs and the
JSON matrix format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import EigensolverError, InvalidPError, NonHermitianError

__all__ = [
    "SchattenIndex",
    "SpectralData",
    "as_hermitian",
    "decompose",
    "default_cluster_tol",
    "schatten_norm",
    "apply_function",
    "random_hermitian",
    "random_unitary",
    "matrix_to_json",
    "matrix_from_json",
]

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class SchattenIndex:
    """Schatten exponent ``p`` in ``[1, inf]``.

    ``in_theorem_scope`` is true only for ``1 < p < inf``; the endpoints are
    accepted for diagnostics.
    """

    p: float

    def __post_init__(self):
        p = float(self.p)
        if math.isnan(p) or p < 1:
            raise InvalidPError(f"invalid-p: p = {self.p} (need 1 <= p <= inf)")
        object.__setattr__(self, "p", p)

    @property
    def in_theorem_scope(self):
        return 1 < self.p < math.inf

    @property
    def conjugate(self):
        """The Hölder conjugate exponent ``q`` with ``1/p + 1/q = 1``."""
        if self.p == 1:
            return SchattenIndex(math.inf)
        if self.p == math.inf:
            return SchattenIndex(1.0)
        return SchattenIndex(self.p / (self.p - 1))

    @classmethod
    def coerce(cls, p):
        return p if isinstance(p, cls) else cls(p)


def as_hermitian(A, tol=HERMITIAN_TOL) -> np.ndarray:
    """Validate ``A`` as a square Hermitian matrix and return it as an array.

    Raises:
        NonHermitianError: if ``A`` is not square or ``|A - A*| > tol`` entrywise.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise NonHermitianError(f"non-hermitian-input: expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonHermitianError("non-hermitian-input: matrix has non-finite entries")
    gap = np.max(np.abs(A - A.conj().T))
    if gap > tol * max(1.0, np.max(np.abs(A))):
        raise NonHermitianError(f"non-hermitian-input: |A - A*| = {gap:.3e}")
    return A


def default_cluster_tol(A) -> float:
    return 1e-8 * (1.0 + np.linalg.norm(A, 2))


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Clustered spectral decomposition of a Hermitian matrix.

    Eigenvectors are the columns of ``basis``; ``labels[i]`` is the cluster
    of column ``i`` and ``values[c]`` the representative eigenvalue of
    cluster ``c``.
    """

    values: np.ndarray
    labels: np.ndarray
    basis: np.ndarray
    cluster_tol: float

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def n_clusters(self):
        return len(self.values)

    @cached_property
    def eigenvalues(self):
        """Cluster representative of every eigenvector column."""
        return self.values[self.labels]

    def projection(self, c):
        cols = self.basis[:, self.labels == c]
        return cols @ cols.conj().T

    @property
    def clusters(self):
        """List of ``(representative, projection)`` pairs."""
        return [(float(self.values[c]), self.projection(c)) for c in range(self.n_clusters)]

    def reconstruct(self):
        U = self.basis
        return (U * self.eigenvalues) @ U.conj().T


def _is_diagonal(A):
    return not np.any(A - np.diag(np.diag(A)))


def decompose(A, cluster_tol: float | None = None) -> SpectralData:
    """Eigendecomposition with eigenvalue clustering.

    Sorted eigenvalues are merged into one cluster while consecutive gaps stay
    within ``cluster_tol`` (default ``1e-8 * (1 + |A|_2)``). The cluster
    representative is the mean of its members. Exactly diagonal inputs skip
    the eigensolver so their spectra stay exact.

    Raises:
        NonHermitianError: on non-Hermitian input.
        EigensolverError: if LAPACK does not converge.
    """
    A = as_hermitian(A)
    if cluster_tol is None:
        cluster_tol = default_cluster_tol(A)
    if cluster_tol < 0:
        raise ValueError("cluster_tol must be >= 0")
    d = A.shape[0]
    if _is_diagonal(A):
        diag = np.real(np.diag(A)).astype(float)
        order = np.argsort(diag, kind="stable")
        w = diag[order]
        U = np.eye(d, dtype=A.dtype if np.iscomplexobj(A) else float)[:, order]
    else:
        try:
            w, U = np.linalg.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(f"eigensolver-failure: {exc}") from exc
    labels = np.zeros(d, dtype=int)
    if d > 1:
        labels[1:] = np.cumsum(np.diff(w) > cluster_tol)
    n = labels[-1] + 1
    values = np.array([w[labels == c].mean() for c in range(n)])
    return SpectralData(values=values, labels=labels, basis=U, cluster_tol=float(cluster_tol))


def _singular_values(X):
    X = np.asarray(X)
    if X.shape[0] == X.shape[1] and np.allclose(X, X.conj().T, rtol=0, atol=0):
        return np.abs(np.linalg.eigvalsh(X))
    return np.linalg.svd(X, compute_uv=False)


def schatten_norm(X, p) -> float:
    """Schatten p-norm ``(sum sigma_i^p)^(1/p)``; largest singular value at ``p = inf``.

    Raises:
        InvalidPError: if ``p < 1``.
    """
    p = SchattenIndex.coerce(p).p
    s = _singular_values(X)
    if s.size == 0:
        return 0.0
    if p == math.inf:
        return float(s.max())
    top = s.max()
    if top == 0:
        return 0.0
    # scale to avoid overflow for large p
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def apply_function(f, A, spectral: SpectralData | None = None) -> np.ndarray:
    """``f(A) = U f(Lambda) U*`` over the clustered decomposition of ``A``."""
    if spectral is None:
        spectral = decompose(A)
    U = spectral.basis
    fv = np.asarray(f.eval(0, spectral.values))
    out = (U * fv[spectral.labels]) @ U.conj().T
    if not np.iscomplexobj(fv) and not np.iscomplexobj(U):
        return out.real if np.iscomplexobj(out) else out
    return out


def random_unitary(rng: np.random.Generator, d: int, real: bool = False) -> np.ndarray:
    """Haar-distributed unitary (orthogonal if ``real``) via QR with phase fix."""
    Z = rng.standard_normal((d, d))
    if not real:
        Z = Z + 1j * rng.standard_normal((d, d))
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_hermitian(seed: int, d: int, spectrum=None, real: bool = False) -> np.ndarray:
    """Seeded Hermitian test matrix.

    With ``spectrum`` given, returns ``U diag(spectrum) U*`` for a seeded
    random unitary ``U``. Otherwise draws a Gaussian-ensemble matrix,
    symmetrizes it and scales it to unit operator norm.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    if spectrum is not None:
        spectrum = np.asarray(spectrum, dtype=float)
        if spectrum.shape != (d,):
            raise ValueError(f"spectrum must have length {d}")
        U = random_unitary(rng, d, real=real)
        A = (U * spectrum) @ U.conj().T
    else:
        Z = rng.standard_normal((d, d))
        if not real:
            Z = Z + 1j * rng.standard_normal((d, d))
        A = (Z + Z.conj().T) / 2
        norm = np.linalg.norm(A, 2)
        if norm > 0:
            A = A / norm
    return (A + A.conj().T) / 2


def matrix_to_json(X) -> dict:
    """``{"dim": d, "data": [[re, im], ...]}``, row-major."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("only square matrices are serialized")
    return {"dim": X.shape[0], "data": [[float(z.real), float(z.imag)] for z in X.ravel()]}


def matrix_from_json(obj: dict) -> np.ndarray:
    d = int(obj["dim"])
    data = np.asarray(obj["data"], dtype=float)
    if data.shape != (d * d, 2):
        raise ValueError(f"matrix payload has shape {data.shape}, expected ({d * d}, 2)")
    return (data[:, 0] + 1j * data[:, 1]).reshape(d, d)
