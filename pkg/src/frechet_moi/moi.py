"""Multiple operator integrals over finite spectral decompositions.

For bases ``A_0, ..., A_n`` with spectral projections ``P^(j)_i`` and
eigenvalues ``lambda^(j)_i``, the integral of ``f^[n]`` against
perturbations ``X_1, ..., X_n`` is the projection sandwich sum

    sum over (i_0, ..., i_n) of
        f^[n](lambda^(0)_{i_0}, ..., lambda^(n)_{i_n})
        P^(0)_{i_0} X_1 P^(1)_{i_1} X_2 ... X_n P^(n)_{i_n}.

It is evaluated in the eigenbases: each ``X_j`` is rotated once into the
(basis ``j-1``, basis ``j``) frame and the index chain is contracted left to
right, so the cost is ``O(d^(n+1))`` per call.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DimensionMismatchError, OrderExceededError
from .scalar_fn import ScalarFunction, divided_difference
from .spectral import SpectralData, decompose

__all__ = [
    "DEFAULT_BUDGET",
    "DividedDifferenceCache",
    "MoiRequest",
    "MultilinearResult",
    "moi_evaluate",
    "moi_symmetrized",
    "taylor_remainder",
]

DEFAULT_BUDGET = 1e9
MAX_ORDER = 5


class DividedDifferenceCache:
    """Memo of ``f^[n]`` values keyed by the sorted node tuple.

    Values are idempotent, so concurrent inserts of the same key are
    harmless.
    """

    def __init__(self, f: ScalarFunction):
        self.f = f
        self._store: dict[tuple, complex] = {}
        self.hits = 0
        self.misses = 0

    def __call__(self, nodes) -> complex:
        key = tuple(sorted(nodes))
        try:
            val = self._store[key]
        except KeyError:
            val = divided_difference(self.f, key)
            self._store[key] = val
            self.misses += 1
            return val
        self.hits += 1
        return val

    def __len__(self):
        return len(self._store)


@dataclass
class MoiRequest:
    f: ScalarFunction
    n: int
    bases: Sequence[SpectralData]
    perturbations: Sequence[np.ndarray]

    def validate(self):
        if self.n < 1:
            raise ValueError("order n must be >= 1")
        if self.n > self.f.max_order:
            raise OrderExceededError(
                f"order-exceeded: n = {self.n} but {self.f.id} has derivatives up to {self.f.max_order}"
            )
        if self.n > MAX_ORDER:
            raise OrderExceededError(f"order-exceeded: n = {self.n} > {MAX_ORDER} is not supported")
        if len(self.bases) != self.n + 1 or len(self.perturbations) != self.n:
            raise DimensionMismatchError(
                f"dimension-mismatch: order {self.n} needs {self.n + 1} bases and {self.n} perturbations, "
                f"got {len(self.bases)} and {len(self.perturbations)}"
            )
        d = self.bases[0].dim
        for B in self.bases:
            if B.dim != d:
                raise DimensionMismatchError(f"dimension-mismatch: bases of size {B.dim} and {d}")
        for X in self.perturbations:
            if np.shape(X) != (d, d):
                raise DimensionMismatchError(f"dimension-mismatch: perturbation of shape {np.shape(X)}, expected ({d}, {d})")


@dataclass
class MultilinearResult:
    value: np.ndarray
    tuple_count: int
    dd_cache_hits: int
    diagnostics: dict = field(default_factory=dict)


def _dd_tensor(cache: DividedDifferenceCache, bases: Sequence[SpectralData]) -> np.ndarray:
    shape = tuple(B.n_clusters for B in bases)
    values = [B.values for B in bases]
    out = None
    for idx in itertools.product(*(range(c) for c in shape)):
        v = cache([values[j][i] for j, i in enumerate(idx)])
        if out is None:
            out = np.empty(shape, dtype=complex if isinstance(v, complex) else float)
        out[idx] = v
    return out


def moi_evaluate(req: MoiRequest, cache: DividedDifferenceCache | None = None) -> MultilinearResult:
    """Evaluate the multiple operator integral described by ``req``.

    ``tuple_count`` is the number of cluster tuples summed (the product of
    the cluster counts); ``dd_cache_hits`` counts divided differences served
    from the cache rather than recomputed.

    Raises:
        DimensionMismatchError: inconsistent sizes.
        OrderExceededError: ``n`` above ``f.max_order`` (or above 5).
    """
    req.validate()
    if cache is None or cache.f is not req.f:
        cache = DividedDifferenceCache(req.f)
    hits0 = cache.hits
    bases = list(req.bases)
    n = req.n
    F = _dd_tensor(cache, bases)
    # expand cluster axes to eigenvector axes
    F = F[np.ix_(*(B.labels for B in bases))]
    rotated = [
        bases[j].basis.conj().T @ np.asarray(req.perturbations[j]) @ bases[j + 1].basis
        for j in range(n)
    ]
    d = bases[0].dim
    W = F * rotated[0].reshape((d, d) + (1,) * (n - 1))
    for j in range(1, n):
        rest = W.shape[3:]
        W = W.reshape(d, d, d, -1)
        W = np.einsum("abcr,bc->acr", W, rotated[j]).reshape((d, d) + rest)
    value = bases[0].basis @ W @ bases[n].basis.conj().T
    tuple_count = math.prod(B.n_clusters for B in bases)
    return MultilinearResult(
        value=value,
        tuple_count=tuple_count,
        dd_cache_hits=cache.hits - hits0,
        diagnostics={"dd_evaluations": len(cache)},
    )


def _as_spectral(A):
    return A if isinstance(A, SpectralData) else decompose(A)


def moi_symmetrized(f: ScalarFunction, n: int, A, Xs, budget: float = DEFAULT_BUDGET,
                    cache: DividedDifferenceCache | None = None) -> np.ndarray:
    """Sum of the ``A, ..., A`` integral over all ``n!`` orderings of ``Xs``.

    ``A`` may be a matrix or a precomputed :class:`SpectralData`.

    Raises:
        BudgetExceededError: if ``d^(n+1) * n!`` exceeds ``budget``.
        DimensionMismatchError: if ``len(Xs) != n`` or sizes disagree.
    """
    S = _as_spectral(A)
    if len(Xs) != n:
        raise DimensionMismatchError(f"dimension-mismatch: {len(Xs)} perturbations for order {n}")
    cost = float(S.dim) ** (n + 1) * math.factorial(n)
    if cost > budget:
        raise BudgetExceededError(f"budget-exceeded: estimated {cost:.3g} multiply-adds > budget {budget:.3g}")
    if cache is None:
        cache = DividedDifferenceCache(f)
    total = None
    for perm in itertools.permutations(range(n)):
        req = MoiRequest(f, n, [S] * (n + 1), [Xs[i] for i in perm])
        val = moi_evaluate(req, cache).value
        total = val if total is None else total + val
    return total


def taylor_remainder(f: ScalarFunction, n: int, A, X) -> np.ndarray:
    """Integral of ``f^[n]`` with bases ``(A + X, A, ..., A)`` against ``(X, ..., X)``."""
    A = np.asarray(A)
    X = np.asarray(X)
    S_shift = decompose(A + X)
    S = decompose(A)
    req = MoiRequest(f, n, [S_shift] + [S] * n, [X] * n)
    return moi_evaluate(req).value
