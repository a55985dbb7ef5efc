"""Exit criteria of the build, one test per criterion.

Each test records a PASS/FAIL line (shown with ``-s`` and in the terminal
summary) before asserting, so a failing criterion is still reported.
"""

import math
import time

import numpy as np
import pytest

from frechet_moi.experiments import (
    DiagonalModel,
    commutative_counterexample,
    mollifier_convergence,
    necessity_probe,
    norm_bound_probe,
    rank_one_check,
)
from frechet_moi.frechet import (
    differentiability_report,
    frechet_derivative,
    gateaux_fd,
    sample_directions,
    taylor_expand,
)
from frechet_moi.moi import MoiRequest, moi_evaluate
from frechet_moi.scalar_fn import builtin, divided_difference, sup_norm
from frechet_moi.spectral import (
    apply_function,
    decompose,
    random_hermitian,
    random_unitary,
    schatten_norm,
)

from conftest import ordered_word_sum, polynomial_derivative_oracle, rel_fro

pytestmark = pytest.mark.acceptance


def test_polynomial_oracle(acceptance_log):
    start = time.perf_counter()
    worst = 0.0
    count = 0
    for m in (2, 3, 4):
        f = builtin("monomial", degree=m)
        for d in (3, 5, 8):
            for trial in range(20):
                seed = 1000 * m + 100 * d + trial
                A = random_hermitian(seed, d)
                n = 1 + trial % min(m, 3)
                Xs = sample_directions(seed + 7, d, n)
                got = frechet_derivative(f, n, A, Xs)
                worst = max(worst, rel_fro(got, polynomial_derivative_oracle(A, Xs, m)))
                count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    acceptance_log(1, "polynomial oracle", ok, f"{count} cases, max rel gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_taylor_identity(acceptance_log):
    start = time.perf_counter()
    worst = 0.0
    for name in ("sin", "lorentzian"):
        f = builtin(name)
        for n in (1, 2, 3):
            for trial in range(10):
                d = 2 + trial % 7
                seed = 50 * n + trial + (0 if name == "sin" else 5000)
                A = random_hermitian(seed, d)
                X = 0.5 * random_hermitian(seed + 1, d)
                approx, rem = taylor_expand(f, n, A, X)
                worst = max(worst, rel_fro(approx + rem, apply_function(f, A + X)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 60
    acceptance_log(2, "Taylor identity", ok, f"60 cases, max rel gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_remainder_scaling(acceptance_log):
    start = time.perf_counter()
    t_grid = [1e-1, 1e-2, 1e-3, 1e-4]
    slopes = []
    verdicts = []
    for name in ("sin", "lorentzian", "exp"):
        f = builtin(name)
        for p in (1.5, 2, 4):
            A = random_hermitian(11, 6)
            dirs = sample_directions(12, 6, 8, p)
            for n in (1, 2, 3):
                rep = differentiability_report(f, n, A, p, dirs, t_grid, seed=13)
                if n == 1:
                    slopes.append(rep.slope_estimate)
                verdicts.append(rep.verdict == "pass" and rep.monotone)
    elapsed = time.perf_counter() - start
    ok = min(slopes) >= 1.8 and all(verdicts) and elapsed < 120
    acceptance_log(3, "remainder scaling", ok,
                   f"min first-order slope {min(slopes):.3f}, {sum(verdicts)}/{len(verdicts)} monotone, {elapsed:.1f}s")
    assert ok


def test_fd_cross_validation(acceptance_log):
    start = time.perf_counter()
    worst = 0.0
    count = 0
    for i, name in enumerate(("sin", "cos", "exp", "lorentzian")):
        f = builtin(name)
        for n in (1, 2, 3):
            for d in (2, 5, 8):
                seed = 1000 * i + 10 * n + d
                A = random_hermitian(seed, d)
                X = sample_directions(seed + 1, d, 1)[0]
                D = frechet_derivative(f, n, A, [X] * n)
                worst = max(worst, rel_fro(gateaux_fd(f, n, A, X), D))
                count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 60
    acceptance_log(4, "finite-difference cross-validation", ok,
                   f"{count} cases, max rel gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_rank_one_identities(acceptance_log):
    start = time.perf_counter()
    f = builtin("sin")
    model = DiagonalModel.dense(32, -10, 10)
    rng = np.random.default_rng(5)
    pairs = list(zip(rng.integers(0, 32, 16), rng.uniform(-2, 2, 16)))
    worst = 0.0
    passed = 0
    for m in (0, 1, 2):
        for k, t in pairs:
            rep = rank_one_check(f, m, model, int(k), float(t))
            scale = 1 + abs(f.eval(m, model.lambdas[k] + t))
            worst = max(worst, rep.get("frobenius_gap") / scale)
            passed += rep.verdict == "pass"
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and passed == 48 and elapsed < 30
    acceptance_log(5, "rank-one identities", ok, f"48 checks, max scaled gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_mollifier_lemma(acceptance_log):
    start = time.perf_counter()
    eps_list = [0.5, 0.1, 0.02]
    smooth = mollifier_convergence(builtin("sin"), 1, eps_list, np.linspace(-10, 10, 2001))
    bound_ok = all(err <= 2 * eps for err, eps in zip(smooth.get("sup_errors"), eps_list))
    witness = mollifier_convergence(builtin("fresnel"), 1, eps_list, np.arange(0, 1000.0001, 0.05))
    plateau = min(witness.get("sup_errors"))
    elapsed = time.perf_counter() - start
    ok = bound_ok and plateau > 0.1 and elapsed < 60
    sin_errs = ", ".join(f"{e:.1e}" for e in smooth.get("sup_errors"))
    acceptance_log(6, "mollifier lemma", ok,
                   f"sin errors [{sin_errs}], Fresnel min error {plateau:.3f}, {elapsed:.1f}s")
    assert ok


def test_necessity_probe(acceptance_log):
    start = time.perf_counter()
    lam = np.arange(0, 1000.0001, 0.05)
    witness = necessity_probe(builtin("fresnel"), 1, lam, [1e-2])
    D_witness = witness.get("D_at_t_min")
    smooth = necessity_probe(builtin("sin"), 1, lam, [1e-1, 1e-2, 1e-3, 1e-4])
    smooth_ok = all(D <= t for t, D, _ in smooth.series["D"]["rows"])
    elapsed = time.perf_counter() - start
    ok = D_witness >= 0.5 and smooth_ok and elapsed < 60
    acceptance_log(7, "necessity probe", ok,
                   f"Fresnel D(1e-2) = {D_witness:.3f}, sin D(t) <= t: {smooth_ok}, {elapsed:.1f}s")
    assert ok


def test_commutative_counterexample(acceptance_log):
    start = time.perf_counter()
    norm_err = ratio_err = contrast_err = 0.0
    for p, N in ((2, 1000), (4, 10_000)):
        rep = commutative_counterexample(p, N, [1, 10, 100])
        for k, nx, ratio in rep.series["indicator"]["rows"]:
            norm_err = max(norm_err, abs(nx - (k / N) ** (1 / p)))
            ratio_err = max(ratio_err, abs(ratio - 1))
        rows = rep.series["schatten_contrast"]["rows"]
        contrast_err = max(contrast_err, max(abs(r - t) / t for t, r in rows))
        decreasing = all(b[1] < a[1] for a, b in zip(rows, rows[1:]))
    elapsed = time.perf_counter() - start
    ok = norm_err <= 1e-14 and ratio_err <= 1e-14 and contrast_err <= 1e-12 and decreasing and elapsed < 5
    acceptance_log(8, "commutative counterexample", ok,
                   f"norm err {norm_err:.1e}, ratio err {ratio_err:.1e}, contrast rel err {contrast_err:.1e}, {elapsed:.2f}s")
    assert ok


def test_norm_bound_probe(acceptance_log):
    start = time.perf_counter()
    rep = norm_bound_probe(builtin("sin"), 1, 2, random_hermitian(3, 6), trials=16, seed=4)
    sup = rep.get("sup_nth_derivative_f")
    ratios = [r for _, r in rep.series["trial_ratios_f"]["rows"]]
    schur_ok = all(r <= sup + 1e-10 for r in ratios)
    spreads = {}
    for name in ("sin", "lorentzian"):
        for p, n, d in ((1.5, 1, 6), (3, 2, 6)):
            r = norm_bound_probe(builtin(name), n, p, random_hermitian(d, d), trials=8, seed=9)
            spreads[(name, p, n)] = r.get("fitted_constant_spread")
    elapsed = time.perf_counter() - start
    ok = schur_ok and max(spreads.values()) <= 3 and elapsed < 120
    acceptance_log(9, "norm-bound probe", ok,
                   f"max p=2 ratio {max(ratios):.4f} vs sup|f'| {sup:.4f}, max spread {max(spreads.values()):.3f}, {elapsed:.1f}s")
    assert ok


def _dd_trial(seed):
    rng = np.random.default_rng(seed)
    f = builtin(("sin", "exp", "lorentzian", "cos")[seed % 4])
    n = 1 + seed % 4
    x = rng.uniform(-2, 2, n + 1)
    val = divided_difference(f, x)
    scale = 1 + abs(val)
    sym = all(abs(divided_difference(f, rng.permutation(x)) - val) <= 1e-12 * scale for _ in range(3))
    xs = np.sort(x)
    rec = True
    if np.min(np.diff(xs)) > 1e-2:
        hi, lo = divided_difference(f, xs[1:]), divided_difference(f, xs[:-1])
        rec = abs((hi - lo) / (xs[-1] - xs[0]) - val) <= 1e-7 * (1 + abs(hi) + abs(lo)) / (xs[-1] - xs[0])
    hull = np.linspace(xs[0], xs[-1], 2001)
    mv = abs(val) <= sup_norm(f, n, hull) / math.factorial(n) * (1 + 1e-9) + 1e-12
    return sym and rec and mv


def _schatten_trial(seed):
    rng = np.random.default_rng(seed)
    d = 2 + seed % 6
    p = float(rng.choice([1.0, 1.5, 2.0, 3.0, 7.0, math.inf]))
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    Y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    nx, ny = schatten_norm(X, p), schatten_norm(Y, p)
    tri = schatten_norm(X + Y, p) <= (nx + ny) * (1 + 1e-12)
    c = complex(rng.standard_normal(), rng.standard_normal())
    hom = abs(schatten_norm(c * X, p) - abs(c) * nx) <= 1e-12 * abs(c) * nx
    U, V = random_unitary(rng, d), random_unitary(rng, d)
    inv = abs(schatten_norm(U @ X @ V, p) - nx) <= 1e-12 * nx
    q = 1.0 if p == math.inf else (math.inf if p == 1 else p / (p - 1))
    holder = schatten_norm(X @ Y, 1) <= nx * schatten_norm(Y, q) * (1 + 1e-12)
    return tri and hom and inv and holder


def _moi_trial(seed):
    rng = np.random.default_rng(seed)
    d = 2 + seed % 5
    n = 1 + seed % 3
    f = builtin(("sin", "lorentzian", "exp")[seed % 3])
    S = [decompose(random_hermitian(seed * 10 + j, d)) for j in range(n + 1)]
    Xs = sample_directions(seed, d, n)
    Y = sample_directions(seed + 1, d, 1)[0]
    a, b = rng.standard_normal(2)
    j = int(rng.integers(n))
    base = moi_evaluate(MoiRequest(f, n, S, Xs)).value
    other = moi_evaluate(MoiRequest(f, n, S, Xs[:j] + [Y] + Xs[j + 1:])).value
    mixed = moi_evaluate(MoiRequest(f, n, S, Xs[:j] + [a * Xs[j] + b * Y] + Xs[j + 1:])).value
    lin = rel_fro(mixed, a * base + b * other) <= 1e-12
    m = n + int(rng.integers(0, 3))
    A = random_hermitian(seed + 3, d)
    SA = decompose(A)
    poly = moi_evaluate(MoiRequest(builtin("monomial", degree=m), n, [SA] * (n + 1), Xs)).value
    collapse = rel_fro(poly, ordered_word_sum(A, Xs, m)) <= 1e-10
    return lin and collapse


def test_invariant_suites(acceptance_log):
    start = time.perf_counter()
    failures = {
        "divided differences": sum(not _dd_trial(s) for s in range(200)),
        "Schatten norms": sum(not _schatten_trial(s) for s in range(200)),
        "MOI": sum(not _moi_trial(s) for s in range(200)),
    }
    elapsed = time.perf_counter() - start
    ok = not any(failures.values()) and elapsed < 120
    summary = ", ".join(f"{k} {v}/200 failed" for k, v in failures.items())
    acceptance_log(10, "invariant suites", ok, f"{summary}, {elapsed:.1f}s")
    assert ok
