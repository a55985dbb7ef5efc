"""Executable probes of the characterization theorem and its comments.

Every probe returns an :class:`ExperimentReport`. Reports on finite
truncations are sampled statements and say so in ``config["scope"]``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGridError,
    IndexOutOfRangeError,
    InvalidPError,
    SmoothnessInsufficientError,
)
from .frechet import NOISE_FACTOR, frechet_derivative, sample_directions
from .moi import DividedDifferenceCache
from .scalar_fn import ScalarFunction, difference, mollify, sup_norm, uc_modulus
from .spectral import SchattenIndex, apply_function, as_hermitian, decompose, schatten_norm

__all__ = [
    "CATALOG",
    "DiagonalModel",
    "CommutativeModel",
    "ExperimentReport",
    "REPORT_SCHEMA",
    "golden_sequence",
    "rank_one_check",
    "necessity_probe",
    "mollifier_convergence",
    "norm_bound_probe",
    "commutative_counterexample",
    "list_experiments",
    "write_report",
]

SAMPLED = "sampled statement on a finite truncation"

# experiment id -> anchor label of the claim it probes
CATALOG = {
    "rank_one_check": "Eq. derivative_at_Q_k",
    "necessity_probe": "proof (ii)=>(iii), uniform difference quotients",
    "mollifier_convergence": "Lemma convolution_lemma",
    "norm_bound_probe": "proof (iii)=>(i), C_{p,n} bound",
    "commutative_counterexample": "Comment 2",
}


def list_experiments():
    """Sorted catalog lines pairing each experiment id with its anchor."""
    return [f"{key} — {CATALOG[key]}" for key in sorted(CATALOG)]


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "experiment_id", "config", "measurements", "verdict"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "experiment_id": {"type": "string"},
        "config": {"type": "object"},
        "measurements": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "anchor", "value"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "anchor": {"type": "string", "minLength": 1},
                    "value": {},
                },
            },
        },
        "series": {"type": "object"},
        "verdict": {"enum": ["pass", "fail", "informational"]},
        "conclusion": {"type": "string"},
    },
}


def _plain(x):
    # numpy scalars/arrays and non-finite floats to JSON-safe values
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_plain(float(x.real)), _plain(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict
    measurements: list = field(default_factory=list)
    verdict: str = "informational"
    series: dict = field(default_factory=dict)
    conclusion: str = ""

    def measure(self, name, value, anchor=None):
        self.measurements.append(
            {"name": name, "anchor": anchor or CATALOG.get(self.experiment_id, self.experiment_id), "value": value}
        )
        return value

    def get(self, name):
        for m in self.measurements:
            if m["name"] == name:
                return m["value"]
        raise KeyError(name)

    @property
    def passed(self):
        return self.verdict != "fail"

    def to_dict(self):
        return _plain({
            "schema_version": 1,
            "experiment_id": self.experiment_id,
            "config": self.config,
            "measurements": self.measurements,
            "series": self.series,
            "verdict": self.verdict,
            "conclusion": self.conclusion,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def series_csv(self, name):
        rows = self.series[name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(rows["columns"])
        for row in rows["rows"]:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _atomic_write(path, text):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: ExperimentReport, out_dir, seed=None, csv_series=True):
    """Write ``<id>_seed<seed>.json`` (plus one CSV per series) atomically.

    Returns the list of written paths.
    """
    seed = report.config.get("seed", 0) if seed is None else seed
    stem = f"{report.experiment_id}_seed{seed}"
    paths = [os.path.join(out_dir, stem + ".json")]
    _atomic_write(paths[0], report.to_json() + "\n")
    if csv_series:
        for name in sorted(report.series):
            path = os.path.join(out_dir, f"{stem}_{name}.csv")
            _atomic_write(path, report.series_csv(name))
            paths.append(path)
    return paths


def _series(columns, rows):
    return {"columns": list(columns), "rows": [[float(v) for v in r] for r in rows]}


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_sequence(d, lo, hi):
    """First ``d`` points of the golden-ratio (Kronecker) sequence on ``[lo, hi]``."""
    k = np.arange(d)
    return lo + (hi - lo) * np.mod(k * GOLDEN, 1.0)


@dataclass(frozen=True, eq=False)
class DiagonalModel:
    """Diagonal operator ``A e_k = lambda_k e_k`` with coordinate projections ``Q_k``."""

    lambdas: np.ndarray

    @classmethod
    def dense(cls, d, lo=-10.0, hi=10.0):
        return cls(golden_sequence(d, lo, hi))

    @property
    def dim(self):
        return len(self.lambdas)

    @property
    def A(self):
        return np.diag(np.asarray(self.lambdas, dtype=float))

    def projection(self, k):
        if not 0 <= k < self.dim:
            raise IndexOutOfRangeError(f"index-out-of-range: k = {k} for dimension {self.dim}")
        Q = np.zeros((self.dim, self.dim))
        Q[k, k] = 1.0
        return Q

    @property
    def projections(self):
        return [self.projection(k) for k in range(self.dim)]

    def embed(self, extra):
        """Append isolated eigenvalues; indices of the original ``Q_k`` are kept."""
        return DiagonalModel(np.concatenate([np.asarray(self.lambdas, float), np.asarray(extra, float)]))


@dataclass(frozen=True)
class CommutativeModel:
    """``L^p[0, 1]`` simulated on ``N`` atoms of mass ``1/N``."""

    N: int
    p: SchattenIndex

    def norm(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        p = self.p.p
        if p == math.inf:
            return float(x.max())
        return (math.fsum((x ** p).tolist()) / self.N) ** (1.0 / p)

    def indicator(self, k):
        x = np.zeros(self.N)
        x[:k] = 1.0
        return x


# --------------------------------------------------------------------------
# probes
# --------------------------------------------------------------------------

def rank_one_check(f: ScalarFunction, m: int, model: DiagonalModel, k: int, t: float) -> ExperimentReport:
    """Compare ``D^m f(A + tQ_k)[Q_k, ..., Q_k]`` with ``f^(m)(lambda_k + t) Q_k``.

    For ``m = 0`` the left side is ``f(A + tQ_k) - f(A)`` and the right side
    ``(f(lambda_k + t) - f(lambda_k)) Q_k``.
    """
    if not 0 <= m <= f.max_order:
        raise ValueError(f"m must lie in [0, {f.max_order}]")
    Q = model.projection(k)
    A = model.A
    lam = float(model.lambdas[k])
    shifted = A + t * Q
    if m == 0:
        left = apply_function(f, shifted) - apply_function(f, A)
        scalar = f.eval(0, lam + t) - f.eval(0, lam)
        anchor = "Eq. 0-derivative_at_Q_k"
    else:
        left = frechet_derivative(f, m, shifted, [Q] * m)
        scalar = f.eval(m, lam + t)
        anchor = CATALOG["rank_one_check"]
    gap = float(np.linalg.norm(left - scalar * Q))
    tol = 1e-9 * (1.0 + abs(f.eval(m, lam + t)))
    rep = ExperimentReport(
        "rank_one_check",
        config={"function": f.to_spec(), "m": m, "k": k, "t": t, "dim": model.dim,
                "lambda_k": lam, "tolerance": tol, "scope": SAMPLED},
    )
    rep.measure("scalar", scalar, anchor)
    rep.measure("frobenius_gap", gap, anchor)
    rep.verdict = "pass" if gap <= tol else "fail"
    return rep


def _check_t_grid(t_grid):
    ts = [float(t) for t in t_grid]
    if not ts or any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise DegenerateGridError("degenerate-grid: steps must be positive and strictly decreasing")
    return ts


def necessity_probe(f: ScalarFunction, n: int, lambdas, t_grid, eps: float = 0.05,
                    reference_bound: float = 1.0) -> ExperimentReport:
    """Uniformity of the difference quotients of ``f^(n-1)`` over ``lambdas``.

    ``D(t) = max_lambda |(f^(n-1)(lambda + t) - f^(n-1)(lambda)) / t - f^(n)(lambda)|``.
    Verdict ``pass`` ("uniformly differentiable") when ``D(t_min) <= eps``;
    ``fail`` ("necessity violated") when ``D(t_min)`` is also at least ten
    times the uniform prediction ``t_min * reference_bound / 2``; otherwise
    informational.
    """
    if n < 1 or n > f.max_order:
        raise ValueError(f"n must lie in [1, {f.max_order}]")
    ts = _check_t_grid(t_grid)
    lam = np.asarray(lambdas, dtype=float)
    if lam.size == 0:
        raise DegenerateGridError("degenerate-grid: no lambdas")
    low = np.asarray(f.eval(n - 1, lam))
    top = np.asarray(f.eval(n, lam))
    rows = []
    for t in ts:
        q = (np.asarray(f.eval(n - 1, lam + t)) - low) / t - top
        i = int(np.argmax(np.abs(q)))
        rows.append((t, float(abs(q[i])), float(lam[i])))
    floor = rows[-1][1]
    prediction = ts[-1] * reference_bound / 2
    rep = ExperimentReport(
        "necessity_probe",
        config={"function": f.to_spec(), "n": n, "t_grid": ts, "eps": eps,
                "reference_bound": reference_bound, "lambda_range": [float(lam.min()), float(lam.max())],
                "lambda_count": int(lam.size), "scope": SAMPLED},
    )
    rep.series["D"] = _series(["t", "D", "argmax_lambda"], rows)
    rep.measure("D_at_t_min", floor)
    rep.measure("uniform_prediction", prediction)
    if floor <= eps:
        rep.verdict, rep.conclusion = "pass", "uniformly differentiable"
    elif floor >= 10 * prediction:
        rep.verdict, rep.conclusion = "fail", f"necessity violated (floor {floor:.4g})"
    else:
        rep.verdict, rep.conclusion = "informational", "inconclusive on this grid"
    return rep


def mollifier_convergence(f: ScalarFunction, n: int, eps_list, grid,
                          quadrature_nodes: int = 2049) -> ExperimentReport:
    """Grid-sup error ``|f^(n) - (phi_eps * f)^(n)|`` along decreasing ``eps``.

    Passes when the series is nonincreasing (factor 1.05) and its last value
    is within ``2 * uc_modulus(f, n, 2 * min(eps), grid)``.

    Raises:
        SmoothnessInsufficientError: if ``f`` is not declared C^n_b.
    """
    if n > f.cb_order:
        raise SmoothnessInsufficientError(f"smoothness-insufficient: {f.id} is not declared C^{n}_b")
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DegenerateGridError("degenerate-grid: eps_list must be strictly decreasing")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DegenerateGridError("degenerate-grid: empty grid")
    exact = np.asarray(f.eval(n, grid))
    errors = []
    for eps in eps_list:
        g = mollify(f, eps, quadrature_nodes=quadrature_nodes)
        errors.append(float(np.max(np.abs(exact - np.asarray(g.eval(n, grid))))))
    eta = 2 * min(eps_list)
    uc_grid = grid
    if grid.size < 2 or np.min(np.diff(np.sort(grid))) >= eta:
        uc_grid = np.linspace(grid.min(), grid.max(), int(math.ceil((grid.max() - grid.min()) * 4 / eta)) + 1)
    modulus = uc_modulus(f, n, eta, uc_grid)
    bound = 2 * modulus
    monotone = all(b <= a * NOISE_FACTOR for a, b in zip(errors, errors[1:]))
    rep = ExperimentReport(
        "mollifier_convergence",
        config={"function": f.to_spec(), "n": n, "eps_list": eps_list, "quadrature_nodes": quadrature_nodes,
                "grid": [float(grid.min()), float(grid.max()), int(grid.size)], "noise_factor": NOISE_FACTOR, "scope": SAMPLED},
    )
    rep.series["sup_error"] = _series(["eps", "sup_error"], zip(eps_list, errors))
    rep.measure("sup_errors", errors)
    rep.measure("uc_modulus", modulus)
    rep.measure("lemma_bound", bound)
    rep.measure("monotone", monotone)
    rep.measure("decay_ratio", errors[-1] / errors[0] if errors[0] > 0 else 0.0)
    rep.verdict = "pass" if monotone and errors[-1] <= bound + 1e-12 else "fail"
    decaying = errors[0] == 0 or errors[-1] <= 0.5 * errors[0]
    rep.conclusion = "converging" if decaying else f"plateau near {errors[-1]:.3g}"
    return rep


def norm_bound_probe(f: ScalarFunction, n: int, p, A, trials: int, seed: int,
                     eps_list=(0.5, 0.2, 0.1, 0.05), grid=None, quadrature_nodes: int = 2049) -> ExperimentReport:
    """Empirical norm ratios of the symmetrized integral over a mollified family.

    For each ``g`` in ``{f, f_eps, f - f_eps}`` records
    ``R(g) = max_trials |Gamma(g)[Xs]|_p / prod |X_j|_p`` and the fitted
    constant ``R(g) / sup|g^(n)|``. The verdict is informational; the spread
    (max / min fitted constant) is recorded.
    """
    if n > f.cb_order:
        raise SmoothnessInsufficientError(f"smoothness-insufficient: {f.id} is not declared C^{n}_b")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p_idx = SchattenIndex.coerce(p)
    A = as_hermitian(A)
    d = A.shape[0]
    S = decompose(A)
    if grid is None:
        grid = np.linspace(-10.0, 10.0, 4001)
    grid = np.asarray(grid, dtype=float)
    dirs = sample_directions(seed, d, trials * n, p_idx)
    tuples = [dirs[i * n:(i + 1) * n] for i in range(trials)]

    family = [("f", f)]
    for eps in eps_list:
        fe = mollify(f, eps, quadrature_nodes=quadrature_nodes)
        family.append((f"f_eps={eps:g}", fe))
        family.append((f"f-f_eps={eps:g}", difference(f, fe)))

    rows = {}
    trial_ratios = {}
    for label, g in family:
        cache = DividedDifferenceCache(g)
        ratios = []
        for Xs in tuples:
            G = frechet_derivative(g, n, S, Xs, cache=cache)
            ratios.append(schatten_norm(G, p_idx) / math.prod(schatten_norm(X, p_idx) for X in Xs))
        R = max(ratios)
        sup_g = sup_norm(g, n, grid)
        rows[label] = {"R": R, "sup_nth_derivative": sup_g, "fitted_constant": R / sup_g if sup_g > 0 else None}
        trial_ratios[label] = ratios
    constants = [r["fitted_constant"] for r in rows.values() if r["fitted_constant"] is not None]
    spread = max(constants) / min(constants) if constants and min(constants) > 0 else (1.0 if constants else None)
    rep = ExperimentReport(
        "norm_bound_probe",
        config={"function": f.to_spec(), "n": n, "p": p_idx.p, "dim": d, "trials": trials, "seed": seed,
                "eps_list": list(eps_list), "grid": [float(grid.min()), float(grid.max()), int(grid.size)],
                "scope": SAMPLED},
    )
    rep.measure("family", rows)
    rep.measure("max_trial_ratio_f", max(trial_ratios["f"]))
    rep.measure("sup_nth_derivative_f", rows["f"]["sup_nth_derivative"])
    rep.measure("fitted_constant_spread", spread)
    rep.series["trial_ratios_f"] = _series(["trial", "ratio"], enumerate(trial_ratios["f"]))
    rep.verdict = "informational"
    rep.conclusion = f"fitted constants within a factor {spread:.4g}" if spread is not None else "f^(n) vanishes"
    return rep


def commutative_counterexample(p, N: int, k_list, t_list=(1e-1, 1e-2, 1e-3, 1e-4),
                               contrast_dim: int = 4) -> ExperimentReport:
    """Squares of indicators in simulated ``L^p[0, 1]`` versus Schatten classes.

    With ``X`` the indicator of the first ``k`` of ``N`` atoms,
    ``|X|_p = (k/N)^(1/p)`` and ``|X^2|_p / |X|_p = 1``, so ``X^2`` is not
    ``o(|X|_p)``. The contrast run takes ``X = tQ`` for a rank-one projection
    ``Q``, where the ratio is ``t``.

    Raises:
        InvalidPError: unless ``1 < p < inf``.
    """
    p_idx = SchattenIndex.coerce(p)
    if not p_idx.in_theorem_scope:
        raise InvalidPError(f"invalid-p: need 1 < p < inf, got {p_idx.p}")
    model = CommutativeModel(int(N), p_idx)
    rows = []
    norm_err = 0.0
    ratio_err = 0.0
    identity_gap = 0.0
    for k in k_list:
        k = int(k)
        if not 1 <= k <= model.N:
            raise ValueError(f"k = {k} outside [1, {model.N}]")
        X = model.indicator(k)
        nx = model.norm(X)
        ratio = model.norm(X * X) / nx
        expected = (k / model.N) ** (1.0 / p_idx.p)
        norm_err = max(norm_err, abs(nx - expected))
        ratio_err = max(ratio_err, abs(ratio - 1.0))
        # f(t) = t^2 on [0, 2]: f(1 + X) - f(1) = 2X + X^2 pointwise
        identity_gap = max(identity_gap, float(np.max(np.abs(((1 + X) ** 2 - 1) - (2 * X + X * X)))))
        rows.append((k, nx, ratio))
    contrast = []
    Q = np.zeros((contrast_dim, contrast_dim))
    Q[0, 0] = 1.0
    for t in t_list:
        Xs = t * Q
        contrast.append((t, schatten_norm(Xs @ Xs, p_idx) / schatten_norm(Xs, p_idx)))
    contrast_err = max(abs(r - t) / t for t, r in contrast)
    norms = [r[1] for r in rows]
    # ratio 1 must persist across distinct, shrinking scales of |X|_p
    shrinking = len(norms) < 2 or min(norms) < max(norms)
    rep = ExperimentReport(
        "commutative_counterexample",
        config={"p": p_idx.p, "N": model.N, "k_list": [int(k) for k in k_list], "t_list": list(t_list),
                "contrast_dim": contrast_dim, "scope": SAMPLED},
    )
    rep.series["indicator"] = _series(["k", "norm_X", "ratio_X2_over_X"], rows)
    rep.series["schatten_contrast"] = _series(["t", "ratio"], contrast)
    rep.measure("max_norm_error", norm_err)
    rep.measure("max_ratio_deviation", ratio_err)
    rep.measure("square_identity_gap", identity_gap)
    rep.measure("schatten_contrast_relative_error", contrast_err, "Comment 2 (Schatten contrast)")
    reproduced = ratio_err <= 1e-14 and norm_err <= 1e-14 and shrinking
    rep.verdict = "pass" if reproduced and contrast_err <= 1e-12 else "fail"
    rep.conclusion = (
        "Fréchet differentiability fails in L^p: |X^2|_p / |X|_p = 1 while |X|_p -> 0"
        if reproduced else "counterexample not reproduced"
    )
    return rep
