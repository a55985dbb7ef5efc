"""Scalar functions, divided differences, mollification and continuity moduli.

A :class:`ScalarFunction` bundles a function ``f`` with its derivatives up to
``max_order``. Everything downstream (matrix functions, multiple operator
integrals, experiments) only touches ``f`` through :meth:`ScalarFunction.eval`
and :func:`divided_difference`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.special
from numpy.polynomial import Polynomial

from .errors import (
    DegenerateGridError,
    EmptyGridError,
    NonpositiveEpsilonError,
    OrderExceededError,
    SmoothnessInsufficientError,
    UnknownFunctionError,
)

__all__ = [
    "ScalarFunction",
    "Mollifier",
    "eval_derivative",
    "divided_difference",
    "mollify",
    "uc_modulus",
    "sup_norm",
    "builtin",
    "builtin_ids",
    "difference",
    "from_spec",
    "SMOOTHNESS_UC",
    "SMOOTHNESS_CB",
    "SMOOTHNESS_LIPSCHITZ",
]

SMOOTHNESS_UC = "C^n_b, f^(n) uniformly continuous"
SMOOTHNESS_CB = "C^n_b"
SMOOTHNESS_LIPSCHITZ = "Lipschitz"

DerivFn = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """A scalar function with derivatives up to ``max_order``.

    ``derivs(m, t)`` must accept a float array ``t`` and return ``f^(m)(t)``
    with the same shape. Smoothness is declared, not detected:

    * ``uc_order``: largest ``n`` such that ``f`` is C^n_b with ``f^(n)``
      uniformly continuous.
    * ``cb_order``: largest ``n`` such that ``f`` is C^n_b.

    Both default to ``max_order``. ``deriv_bounds[m]`` is a declared bound on
    ``sup |f^(m)|`` where one is known.
    """

    id: str
    max_order: int
    derivs: DerivFn
    params: dict = field(default_factory=dict)
    uc_order: int | None = None
    cb_order: int | None = None
    lipschitz: bool = True
    lipschitz_bound: float | None = None
    deriv_bounds: dict = field(default_factory=dict)
    # set for mollified functions: (base, epsilon, quadrature_nodes)
    mollified_from: tuple | None = None

    def __post_init__(self):
        if self.max_order < 0:
            raise ValueError("max_order must be >= 0")
        if self.uc_order is None:
            object.__setattr__(self, "uc_order", self.max_order)
        if self.cb_order is None:
            object.__setattr__(self, "cb_order", max(self.max_order, self.uc_order))

    def eval(self, m, t):
        """Return ``f^(m)(t)``; scalar in, scalar out."""
        if not 0 <= m <= self.max_order:
            raise OrderExceededError(
                f"order-exceeded: {self.id} has derivatives up to {self.max_order}, asked for {m}"
            )
        arr = np.asarray(t, dtype=float)
        out = np.asarray(self.derivs(m, arr))
        if out.ndim == 0 or arr.ndim == 0:
            return out.reshape(()).item()
        return out

    def smoothness_class(self, n):
        """Declared smoothness tag of ``f`` relative to order ``n``."""
        if n <= self.uc_order:
            return SMOOTHNESS_UC
        if n <= self.cb_order:
            return SMOOTHNESS_CB
        if self.lipschitz:
            return SMOOTHNESS_LIPSCHITZ
        return "unclassified"

    def is_real(self):
        return not np.iscomplexobj(np.asarray(self.derivs(0, np.zeros(1))))

    def to_spec(self):
        """JSON-friendly description from which :func:`from_spec` rebuilds ``f``."""
        if self.mollified_from is not None:
            base, eps, nodes = self.mollified_from
            return {"base_id": base.to_spec(), "epsilon": eps, "quadrature_nodes": nodes}
        return {"id": self.id, "params": dict(self.params)}

    def __repr__(self):
        return f"ScalarFunction({self.id!r}, max_order={self.max_order})"


def eval_derivative(f: ScalarFunction, m: int, t: float) -> complex:
    """Return ``f^(m)(t)``.

    Raises:
        OrderExceededError: if ``m > f.max_order``.
    """
    return f.eval(m, t)


# --------------------------------------------------------------------------
# divided differences
# --------------------------------------------------------------------------

def dd_tolerance(nodes):
    return 1e-6 * (1.0 + max(abs(x) for x in nodes))


def divided_difference(f: ScalarFunction, nodes: Sequence[float]) -> complex:
    """Divided difference ``f^[k](x_0, ..., x_k)`` with confluent limits.

    Nodes are sorted first, so the result is symmetric by construction.
    A node group whose spread is below ``1e-6 * (1 + max|x|)`` is treated as
    coincident and evaluated as ``f^(j)(mean) / j!``. Otherwise the
    recurrence removes the extreme nodes, whose difference is the largest
    available denominator.

    Raises:
        OrderExceededError: if ``len(nodes) - 1 > f.max_order``.
    """
    xs = tuple(sorted(float(x) for x in nodes))
    k = len(xs) - 1
    if k < 0:
        raise ValueError("divided_difference needs at least one node")
    if k > f.max_order:
        raise OrderExceededError(
            f"order-exceeded: f^[{k}] needs f^({k}) but {f.id} stops at {f.max_order}"
        )
    tol = dd_tolerance(xs)
    memo: dict[tuple[int, int], complex] = {}

    def dd(i, j):
        # divided difference over the sorted slice xs[i..j]
        key = (i, j)
        if key in memo:
            return memo[key]
        order = j - i
        if order == 0:
            val = f.eval(0, xs[i])
        elif xs[j] - xs[i] < tol:
            mean = math.fsum(xs[i:j + 1]) / (order + 1)
            val = f.eval(order, mean) / math.factorial(order)
        else:
            val = (dd(i + 1, j) - dd(i, j - 1)) / (xs[j] - xs[i])
        memo[key] = val
        return val

    return dd(0, k)


# --------------------------------------------------------------------------
# mollifier
# --------------------------------------------------------------------------

@lru_cache(maxsize=1)
def bump_normalization():
    """``1 / int exp(-1/(1-u^2)) du`` over (-1, 1), adaptive quadrature."""
    mass, _ = scipy.integrate.quad(
        lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return 1.0 / mass


@lru_cache(maxsize=None)
def _bump_numerator(j):
    # phi^(j)(u) = c exp(-1/(1-u^2)) N_j(u) / (1-u^2)^(2j)
    if j == 0:
        return Polynomial([1.0])
    prev = _bump_numerator(j - 1)
    u = Polynomial([0.0, 1.0])
    d = Polynomial([1.0, 0.0, -1.0])
    k = j - 1
    return -2 * u * prev + d * (prev.deriv() * d + 4 * k * u * prev)


def bump(u, j=0):
    """The normalized bump ``phi`` (``j = 0``) or its ``j``-th derivative."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    d = 1.0 - ui * ui
    out[inside] = np.exp(-1.0 / d) * _bump_numerator(j)(ui) / d ** (2 * j)
    return bump_normalization() * out


@dataclass(frozen=True)
class Mollifier:
    """The rescaled bump ``phi_eps(s) = phi(s / eps) / eps`` on ``[-eps, eps]``."""

    epsilon: float
    quadrature_nodes: int = 2049

    def __post_init__(self):
        if not self.epsilon > 0:
            raise NonpositiveEpsilonError(f"nonpositive-epsilon: {self.epsilon}")
        if self.quadrature_nodes < 3 or self.quadrature_nodes % 2 == 0:
            raise ValueError("quadrature_nodes must be odd and >= 3 for Simpson's rule")

    def kernel(self, s, j=0):
        """``phi_eps^(j)(s)``."""
        eps = self.epsilon
        return bump(np.asarray(s, dtype=float) / eps, j) / eps ** (1 + j)

    def nodes_weights(self):
        s = np.linspace(-self.epsilon, self.epsilon, self.quadrature_nodes)
        h = s[1] - s[0]
        w = np.ones(self.quadrature_nodes)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return s, w * h / 3.0

    def mass(self):
        s, w = self.nodes_weights()
        return float(np.dot(w, self.kernel(s)))


def _convolve(g: Callable[[np.ndarray], np.ndarray], kern: np.ndarray, s: np.ndarray, t: np.ndarray):
    # (kern * g)(t) = sum_i w_i kern(s_i) g(t - s_i), chunked over t
    t = np.atleast_1d(t)
    out = None
    chunk = max(1, 2_000_000 // len(s))
    for start in range(0, t.size, chunk):
        tt = t.ravel()[start:start + chunk]
        vals = g(tt[:, None] - s[None, :])
        part = vals @ kern
        if out is None:
            out = np.empty(t.size, dtype=part.dtype)
        out[start:start + chunk] = part
    return out.reshape(t.shape)


def mollify(f: ScalarFunction, eps: float, smooth_order: int | None = None,
            quadrature_nodes: int = 2049) -> ScalarFunction:
    """Return ``f_eps = phi_eps * f``.

    Derivatives up to ``f.max_order`` are convolutions of ``f^(m)`` with the
    kernel; higher ones move the excess derivatives onto the kernel. The
    result carries ``max(f.max_order, smooth_order)`` derivatives
    (``smooth_order`` defaults to ``f.max_order + 2``).

    Raises:
        NonpositiveEpsilonError: if ``eps <= 0``.
        SmoothnessInsufficientError: if ``f`` is not declared Lipschitz.
    """
    moll = Mollifier(eps, quadrature_nodes)
    if not f.lipschitz:
        raise SmoothnessInsufficientError(f"smoothness-insufficient: {f.id} is not Lipschitz")
    top = f.max_order
    order = max(top, top + 2 if smooth_order is None else smooth_order)
    s, w = moll.nodes_weights()
    kernels = {}

    def kern(j):
        if j not in kernels:
            kernels[j] = w * moll.kernel(s, j)
        return kernels[j]

    def derivs(m, t):
        if m <= top:
            return _convolve(lambda x: f.derivs(m, x), kern(0), s, t)
        return _convolve(lambda x: f.derivs(top, x), kern(m - top), s, t)

    bounds = {m: b for m, b in f.deriv_bounds.items() if m <= top}
    smooth = order if (f.cb_order >= 1 or f.lipschitz) else None
    return ScalarFunction(
        id=f"mollified({f.id}, eps={eps:g})",
        max_order=order,
        derivs=derivs,
        params={"epsilon": eps},
        uc_order=smooth,
        cb_order=smooth,
        lipschitz=True,
        lipschitz_bound=f.lipschitz_bound,
        deriv_bounds=bounds,
        mollified_from=(f, float(eps), quadrature_nodes),
    )


# --------------------------------------------------------------------------
# grid suprema
# --------------------------------------------------------------------------

def sup_norm(f: ScalarFunction, m: int, grid) -> float:
    """Grid supremum of ``|f^(m)|``."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise EmptyGridError("empty-grid")
    return float(np.max(np.abs(f.eval(m, grid))))


def uc_modulus(f: ScalarFunction, m: int, eta: float, grid) -> float:
    """Grid estimate of ``sup_{|s-r| < eta} |f^(m)(s) - f^(m)(r)|``.

    Only grid pairs closer than ``eta`` count, so the value is monotone in
    ``eta`` on a fixed grid. The grid is sorted first.

    Raises:
        EmptyGridError: if ``grid`` is empty.
        DegenerateGridError: if no two grid points are closer than ``eta``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise EmptyGridError("empty-grid")
    vals = np.asarray(f.eval(m, grid))
    if grid.size == 1:
        return 0.0
    if np.min(np.diff(grid)) >= eta:
        raise DegenerateGridError(f"degenerate-grid: grid spacing must be below eta = {eta:g}")
    best = 0.0
    # shift over neighbor offsets while any pair at that offset is within eta
    for off in range(1, grid.size):
        gaps = grid[off:] - grid[:-off]
        ok = gaps < eta
        if not ok.any():
            break
        diffs = np.abs(vals[off:] - vals[:-off])[ok]
        best = max(best, float(diffs.max()))
    return best


# --------------------------------------------------------------------------
# builtin library
# --------------------------------------------------------------------------

def _poly(coeffs):
    p = Polynomial(np.asarray(coeffs, dtype=float))
    degree = max(p.degree(), 0)

    def derivs(m, t):
        q = p.deriv(m) if m else p
        return q(t) + 0.0 * t

    # polynomials only ever see a bounded spectral hull, where they agree
    # with a C^inf_b function; they are declared smooth at every order
    order = degree + 2
    return order, derivs


def _make_polynomial(coeffs=(0.0, 0.0, 1.0)):
    order, derivs = _poly(coeffs)
    return ScalarFunction("polynomial", order, derivs, params={"coeffs": list(map(float, coeffs))})


def _make_monomial(degree=2):
    degree = int(degree)
    coeffs = [0.0] * degree + [1.0]
    order, derivs = _poly(coeffs)
    return ScalarFunction("monomial", order, derivs, params={"degree": degree})


def _make_affine(slope=1.0, intercept=0.0):
    def derivs(m, t):
        if m == 0:
            return slope * t + intercept
        if m == 1:
            return np.full_like(t, slope, dtype=float)
        return np.zeros_like(t, dtype=float)

    return ScalarFunction(
        "affine", 6, derivs, params={"slope": slope, "intercept": intercept},
        lipschitz_bound=abs(slope), deriv_bounds={1: abs(slope), **{m: 0.0 for m in range(2, 7)}},
    )


def _make_constant(value=1.0):
    def derivs(m, t):
        return np.full_like(t, value if m == 0 else 0.0, dtype=float)

    return ScalarFunction(
        "constant", 6, derivs, params={"value": value}, lipschitz_bound=0.0,
        deriv_bounds={m: 0.0 for m in range(1, 7)},
    )


def _make_sin():
    def exact(m, t):
        return [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)][m % 4](t)

    return ScalarFunction("sin", 8, exact, lipschitz_bound=1.0,
                          deriv_bounds={m: 1.0 for m in range(0, 9)})


def _make_cos():
    def exact(m, t):
        return [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin][m % 4](t)

    return ScalarFunction("cos", 8, exact, lipschitz_bound=1.0,
                          deriv_bounds={m: 1.0 for m in range(0, 9)})


def _make_exp():
    # exp is only C^n_b on half-lines bounded above; declared smooth for the
    # same reason as polynomials
    return ScalarFunction("exp", 8, lambda m, t: np.exp(t))


def _make_expi():
    # complex-valued: exp(i t)
    return ScalarFunction(
        "expi", 8, lambda m, t: (1j) ** m * np.exp(1j * t), lipschitz_bound=1.0,
        deriv_bounds={m: 1.0 for m in range(0, 9)},
    )


def _make_lorentzian():
    # (1 + t^2)^{-1} = Im 1/(t - i); derivatives from the resolvent form
    def derivs(m, t):
        z = 1.0 / (t - 1j)
        return (math.factorial(m) * (-1) ** m * z ** (m + 1)).imag

    bounds = {0: 1.0, 1: 3 * math.sqrt(3) / 8, 2: 2.0, 4: 24.0}
    return ScalarFunction("lorentzian", 8, derivs, lipschitz_bound=bounds[1], deriv_bounds=bounds)


def _make_abs():
    def derivs(m, t):
        return np.abs(t)

    return ScalarFunction("abs", 0, derivs, uc_order=0, cb_order=0, lipschitz_bound=1.0)


@lru_cache(maxsize=1)
def _fresnel_scale():
    return math.sqrt(math.pi / 2), math.sqrt(2 / math.pi)


def _make_fresnel():
    """``f(t) = int_0^t sin(s^2) ds``: f' bounded, not uniformly continuous."""
    a, b = _fresnel_scale()

    def derivs(m, t):
        if m == 0:
            s, _ = scipy.special.fresnel(b * t)
            return a * s
        if m == 1:
            return np.sin(t * t)
        return 2.0 * t * np.cos(t * t)

    return ScalarFunction(
        "fresnel", 2, derivs, uc_order=0, cb_order=1, lipschitz_bound=1.0,
        deriv_bounds={1: 1.0},
    )


def _bump_train_pattern(n):
    """Primitives of the unit pair pattern on [-1/2, 3/2].

    The pattern is a positive bump ``(1 - (2u)^2)^2`` at ``u = 0`` followed by
    its negative at ``u = 1``; ``prims[j]`` is its ``j``-th primitive from the
    left end, as a list of polynomial pieces on [-1/2, 1/2] and [1/2, 3/2],
    plus the polynomial valid right of the support.
    """
    u = Polynomial([0.0, 1.0])
    pos = (1 - (2 * u) ** 2) ** 2
    neg = -(1 - (2 * (u - 1)) ** 2) ** 2
    pieces = [(-0.5, 0.5, pos), (0.5, 1.5, neg)]
    prims = [[pieces, Polynomial([0.0])]]
    for _ in range(n):
        prev_pieces, _prev_tail = prims[-1]
        new_pieces = []
        carry = 0.0
        for lo, hi, poly in prev_pieces:
            q = poly.integ(lbnd=lo) + carry
            new_pieces.append((lo, hi, q))
            carry = q(hi)
        prev_tail = prims[-1][1]
        tail = prev_tail.integ(lbnd=1.5) + carry
        prims.append([new_pieces, tail])
    return prims


def _make_bump_train(n=1, pairs=200):
    """Witness whose ``n``-th derivative is a train of shrinking bump pairs.

    Pair ``k`` (``k = 1..pairs``) starts at ``t = 3k`` and consists of a unit
    positive bump of width ``1/k`` followed by a unit negative one. Each pair
    integrates to zero, and the j-th primitive of pair ``k`` scales like
    ``k^-j``, so ``f', ..., f^(n)`` stay bounded for ``n <= 3`` while
    ``f^(n)`` is not uniformly continuous.
    """
    n = int(n)
    pairs = int(pairs)
    if not 1 <= n <= 3:
        raise ValueError("bump_train supports n in {1, 2, 3}")
    prims = _bump_train_pattern(n)

    def level(j, t):
        # j-th primitive of the full train (j = 0 is the train itself)
        pieces, tail = prims[j]
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k in range(1, pairs + 1):
            # local coordinate: pattern lives on [-1/2, 3/2]
            u = (t - 3 * k) * k - 0.5
            scale = float(k) ** (-j)
            inside = (u >= -0.5) & (u < 1.5)
            if inside.any():
                ui = u[inside]
                vals = np.zeros(ui.shape)
                for lo, hi, poly in pieces:
                    sel = (ui >= lo) & (ui < hi)
                    vals[sel] = poly(ui[sel])
                out[inside] += scale * vals
            right = u >= 1.5
            if j >= 1 and right.any():
                out[right] += scale * tail(u[right])
        return out

    def derivs(m, t):
        return level(n - m, t)

    return ScalarFunction(
        "bump_train", n, derivs, params={"n": n, "pairs": pairs}, uc_order=n - 1, cb_order=n,
        deriv_bounds={n: 1.0},
    )


_BUILTINS = {
    "abs": _make_abs,
    "affine": _make_affine,
    "bump_train": _make_bump_train,
    "constant": _make_constant,
    "cos": _make_cos,
    "exp": _make_exp,
    "expi": _make_expi,
    "fresnel": _make_fresnel,
    "lorentzian": _make_lorentzian,
    "monomial": _make_monomial,
    "polynomial": _make_polynomial,
    "sin": _make_sin,
}


def builtin_ids():
    return sorted(_BUILTINS)


def builtin(name: str, **params) -> ScalarFunction:
    """Build a library function by id, e.g. ``builtin("monomial", degree=3)``.

    Raises:
        UnknownFunctionError: if ``name`` is not in the library.
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownFunctionError(f"unknown-function: {name!r}") from None
    return factory(**params)


def from_spec(spec: dict) -> ScalarFunction:
    """Inverse of :meth:`ScalarFunction.to_spec`."""
    if "base_id" in spec:
        return mollify(from_spec(spec["base_id"]), spec["epsilon"],
                       quadrature_nodes=spec.get("quadrature_nodes", 2049))
    return builtin(spec["id"], **spec.get("params", {}))


def difference(f: ScalarFunction, g: ScalarFunction) -> ScalarFunction:
    """``f - g`` with ``min`` of the declared orders."""
    order = min(f.max_order, g.max_order)

    def derivs(m, t):
        return f.derivs(m, t) - g.derivs(m, t)

    return ScalarFunction(
        f"({f.id} - {g.id})", order, derivs,
        uc_order=min(f.uc_order, g.uc_order, order), cb_order=min(f.cb_order, g.cb_order, order),
        lipschitz=f.lipschitz and g.lipschitz,
    )
