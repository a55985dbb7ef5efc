"""Fréchet derivatives of matrix functions and their numerical checks."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateGridError, OrderExceededError, SmoothnessInsufficientError, StepTooSmallError
from .moi import DEFAULT_BUDGET, DividedDifferenceCache, moi_symmetrized, taylor_remainder
from .scalar_fn import ScalarFunction
from .spectral import SchattenIndex, SpectralData, apply_function, as_hermitian, decompose, schatten_norm

__all__ = [
    "DerivativeReport",
    "frechet_derivative",
    "taylor_expand",
    "gateaux_fd",
    "default_fd_step",
    "differentiability_report",
    "sample_directions",
    "multilinear_norm_estimate",
    "NOISE_FACTOR",
    "SLOPE_MARGIN",
]

NOISE_FACTOR = 1.05
SLOPE_MARGIN = 0.2
THREADS_ENV = "FRECHET_MOI_THREADS"


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def frechet_derivative(f: ScalarFunction, n: int, A, Xs, *, allow_nonsmooth: bool = False,
                       budget: float = DEFAULT_BUDGET, cache: DividedDifferenceCache | None = None):
    """n-th Fréchet derivative ``D^n f(A)[X_1, ..., X_n]``.

    Computed as the symmetrized multiple operator integral of ``f^[n]``.
    ``A`` may be a matrix or precomputed :class:`SpectralData`.

    Raises:
        SmoothnessInsufficientError: if ``f`` is not declared C^n_b and
            ``allow_nonsmooth`` is false.
        OrderExceededError: if ``n > f.max_order``.
    """
    if n > f.max_order:
        raise OrderExceededError(f"order-exceeded: n = {n} > max_order {f.max_order} of {f.id}")
    if n > f.cb_order and not allow_nonsmooth:
        raise SmoothnessInsufficientError(
            f"smoothness-insufficient: {f.id} is declared '{f.smoothness_class(n)}' at order {n}; "
            "pass allow_nonsmooth=True to compute anyway"
        )
    S = A if isinstance(A, SpectralData) else decompose(A)
    return moi_symmetrized(f, n, S, list(Xs), budget=budget, cache=cache)


def taylor_expand(f: ScalarFunction, n: int, A, X):
    """Order-``n`` Taylor expansion with exact integral remainder.

    Returns ``(approximation, remainder)`` where ``approximation`` is
    ``f(A) + sum_{m<n} D^m f(A)[X, ..., X] / m!`` and ``remainder`` is the
    integral of ``f^[n]`` with bases ``(A + X, A, ..., A)``. Their sum equals
    ``f(A + X)`` up to rounding.
    """
    if n > f.max_order:
        raise OrderExceededError(f"order-exceeded: n = {n} > max_order {f.max_order} of {f.id}")
    A = as_hermitian(A)
    X = as_hermitian(X)
    S = decompose(A)
    approx = apply_function(f, A, S).astype(complex)
    for m in range(1, n):
        approx = approx + frechet_derivative(f, m, S, [X] * m, allow_nonsmooth=True) / math.factorial(m)
    return approx, taylor_remainder(f, n, A, X)


# central stencils of second-order accuracy: (offsets, weights, half-width multiplier)
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def default_fd_step(n: int, A) -> float:
    return np.finfo(float).eps ** (1.0 / (n + 2)) * (1.0 + np.linalg.norm(A, 2))


def gateaux_fd(f: ScalarFunction, n: int, A, X, h: float | None = None):
    """Central finite difference of ``t -> f(A + tX)`` of order ``n`` at 0.

    Independent of the divided-difference machinery: it only evaluates
    ``f`` on the matrices ``A + kh X``.

    Raises:
        StepTooSmallError: if ``h`` is below ``100 * eps * (1 + |A|_2)``.
    """
    if n not in _STENCILS:
        raise ValueError("gateaux_fd supports 1 <= n <= 4")
    A = as_hermitian(A)
    X = as_hermitian(X)
    scale = 1.0 + np.linalg.norm(A, 2)
    if h is None:
        h = default_fd_step(n, A)
    if not h > 100 * np.finfo(float).eps * scale:
        raise StepTooSmallError(f"step-too-small: h = {h:g}")
    offsets, weights = _STENCILS[n]
    total = 0
    for k, w in zip(offsets, weights):
        if w:
            total = total + w * apply_function(f, A + k * h * X)
    return total / h ** n


def sample_directions(seed: int, d: int, count: int, p=2.0, real: bool = False):
    """Seeded Gaussian-ensemble Hermitian matrices normalized to unit p-norm."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        Z = rng.standard_normal((d, d))
        if not real:
            Z = Z + 1j * rng.standard_normal((d, d))
        H = (Z + Z.conj().T) / 2
        out.append(H / schatten_norm(H, p))
    return out


def multilinear_norm_estimate(op, n: int, d: int, p=2.0, seed: int = 0, trials: int = 64) -> float:
    """Lower-bound estimate of an n-linear map's norm on S^p.

    ``op(Xs)`` maps a list of ``n`` matrices to a matrix; the estimate is the
    largest ``|op(Xs)|_p / prod |X_j|_p`` over ``trials`` seeded tuples.
    """
    best = 0.0
    dirs = sample_directions(seed, d, trials * n, p)
    for i in range(trials):
        Xs = dirs[i * n:(i + 1) * n]
        best = max(best, schatten_norm(op(Xs), p))
    return best


@dataclass
class DerivativeReport:
    """Remainder-ratio samples for the o(.) condition of order ``n``.

    The verdict is a sampled-uniformity statement: it covers the given
    directions and steps only.
    """

    order: int
    p: float
    samples: list
    slope_estimate: float
    verdict: str
    sup_ratios: list = field(default_factory=list)
    sup_remainders: list = field(default_factory=list)
    monotone: bool = True
    uniformity: str = "sampled uniformity"
    config: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["samples"] = [
            {"t": t, "direction": str(k), "remainder_ratio": r} for t, k, r in self.samples
        ]
        out["p"] = _json_float(self.p)
        out["slope_estimate"] = _json_float(self.slope_estimate)
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "direction", "remainder_ratio"])
        for t, k, r in self.samples:
            w.writerow([repr(float(t)), k, repr(float(r))])
        return buf.getvalue()


def _json_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _loglog_slope(ts, values):
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = values > 0
    if ok.sum() < 2:
        return math.inf
    slope, _ = np.polyfit(np.log(ts[ok]), np.log(values[ok]), 1)
    return float(slope)


def differentiability_report(f: ScalarFunction, n: int, A, p, directions, t_grid, *,
                             seed: int = 0, aux_samples: int = 4, expected_slope: float = 2.0,
                             allow_nonsmooth: bool = False, threads: int | None = None) -> DerivativeReport:
    """Probe the order-``n`` o(.) remainder along each direction and step.

    For ``n = 1`` the remainder is ``|f(A+tX) - f(A) - t Df(A)[X]|_p``. For
    ``n >= 2`` it is ``|D^{n-1}f(A+tX)[Xs] - D^{n-1}f(A)[Xs] - D^n f(A)[Xs, tX]|_p``
    maximized over ``aux_samples`` seeded tuples ``Xs`` of unit p-norm.
    ``remainder_ratio`` divides by ``t`` (all directions have unit p-norm).

    The verdict passes iff the per-step maximum ratio over directions is
    nonincreasing up to a factor 1.05 and the log-log slope of the maximum
    remainder is at least ``expected_slope - 0.2``.

    Raises:
        DegenerateGridError: fewer than two steps, or steps not positive and
            strictly decreasing.
    """
    p_idx = SchattenIndex.coerce(p)
    ts = [float(t) for t in t_grid]
    if len(ts) < 2 or any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise DegenerateGridError("degenerate-grid: t_grid must hold >= 2 positive, strictly decreasing steps")
    A = as_hermitian(A)
    d = A.shape[0]
    dirs = []
    for X in directions:
        X = as_hermitian(X)
        dirs.append(X / schatten_norm(X, p_idx))
    if not dirs:
        raise DegenerateGridError("degenerate-grid: no directions")
    S = decompose(A)
    cache = DividedDifferenceCache(f)
    aux = sample_directions(seed, d, aux_samples * (n - 1), p_idx) if n > 1 else []
    aux_tuples = [aux[i * (n - 1):(i + 1) * (n - 1)] for i in range(aux_samples)] if n > 1 else [[]]
    kw = dict(allow_nonsmooth=allow_nonsmooth)

    if n == 1:
        fA = apply_function(f, A, S)
        base_terms = [frechet_derivative(f, 1, S, [X], cache=cache, **kw) for X in dirs]
    else:
        base_terms = []
        for X in dirs:
            per = []
            for Xs in aux_tuples:
                low = frechet_derivative(f, n - 1, S, Xs, cache=cache, **kw)
                top = frechet_derivative(f, n, S, list(Xs) + [X], cache=cache, **kw)
                per.append((low, top))
            base_terms.append(per)

    def job(args):
        t, k = args
        X = dirs[k]
        if n == 1:
            R = apply_function(f, A + t * X) - fA - t * base_terms[k]
            rem = schatten_norm(R, p_idx)
        else:
            St = decompose(A + t * X)
            rem = 0.0
            for Xs, (low, top) in zip(aux_tuples, base_terms[k]):
                shifted = frechet_derivative(f, n - 1, St, Xs, **kw)
                rem = max(rem, schatten_norm(shifted - low - t * top, p_idx))
        return rem

    pairs = [(t, k) for t in ts for k in range(len(dirs))]
    nthreads = _threads(threads)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            rems = list(pool.map(job, pairs))
    else:
        rems = [job(pr) for pr in pairs]

    samples = [(t, k, rem / t) for (t, k), rem in zip(pairs, rems)]
    sup_rem = [max(rems[i * len(dirs):(i + 1) * len(dirs)]) for i in range(len(ts))]
    sup_ratio = [r / t for r, t in zip(sup_rem, ts)]
    monotone = all(b <= a * NOISE_FACTOR for a, b in zip(sup_ratio, sup_ratio[1:]))
    floor = 1e-13 * (1.0 + np.linalg.norm(A, 2))
    if max(sup_rem) <= floor:
        slope = math.inf
    else:
        slope = _loglog_slope(ts, sup_rem)
    verdict = "pass" if monotone and slope >= expected_slope - SLOPE_MARGIN else "fail"
    return DerivativeReport(
        order=n,
        p=p_idx.p,
        samples=samples,
        slope_estimate=slope,
        verdict=verdict,
        sup_ratios=sup_ratio,
        sup_remainders=sup_rem,
        monotone=monotone,
        config={
            "seed": seed,
            "t_grid": ts,
            "directions": len(dirs),
            "aux_samples": aux_samples if n > 1 else 0,
            "noise_factor": NOISE_FACTOR,
            "expected_slope": expected_slope,
            "slope_margin": SLOPE_MARGIN,
            "function": f.to_spec(),
        },
    )
