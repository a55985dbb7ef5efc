import numpy as np
import pytest


def rel_fro(a, b):
    """Relative Frobenius distance, measured against ``b``."""
    nb = np.linalg.norm(b)
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / (nb if nb > 0 else 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def ordered_word_sum(A, Xs, m):
    """sum over a_0 + ... + a_n = m - n of A^a0 X_1 A^a1 ... X_n A^an.

    This is the integral of (t^m)^[n] against X_1, ..., X_n in that order,
    obtained by expanding (A + s_1 X_1 + ... )^m by hand.
    """
    n = len(Xs)
    d = A.shape[0]
    if m < n:
        return np.zeros((d, d), dtype=complex)
    powers = [np.eye(d, dtype=complex)]
    for _ in range(m):
        powers.append(powers[-1] @ A)
    total = np.zeros((d, d), dtype=complex)
    for exps in compositions(m - n, n + 1):
        W = powers[exps[0]]
        for X, a in zip(Xs, exps[1:]):
            W = W @ X @ powers[a]
        total = total + W
    return total


def polynomial_derivative_oracle(A, Xs, m):
    """Coefficient of s_1 ... s_n in (A + sum s_j X_j)^m, by brute-force word expansion."""
    import itertools

    n = len(Xs)
    d = A.shape[0]
    total = np.zeros((d, d), dtype=complex)
    # choose which positions hold perturbations and in which order
    for pos in itertools.combinations(range(m), n):
        for perm in itertools.permutations(range(n)):
            W = np.eye(d, dtype=complex)
            it = iter(perm)
            for i in range(m):
                W = W @ (Xs[next(it)] if i in pos else A)
            total = total + W
    return total


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
