import itertools

import numpy as np
import pytest

from msstgarch.model import ModelSpec, RegimeParams, benchmark_spec


@pytest.fixture
def bench_spec():
    return benchmark_spec()


@pytest.fixture
def garch_spec():
    return ModelSpec((RegimeParams(0.1, 0.1, 0.1, 0.8, 0.0),))


def random_two_regime_spec(rng, smooth=True):
    """Random stable-ish K=2 spec with a strictly positive transition matrix."""
    regimes = []
    for _ in range(2):
        a0 = rng.uniform(0.05, 2.0)
        a1, a2 = rng.uniform(0.0, 0.6, size=2)
        b = rng.uniform(0.0, 0.6)
        g = rng.uniform(0.1, 3.0) if smooth else 0.0
        regimes.append(RegimeParams(a0, a1, a2, b, g))
    e11, e22 = rng.uniform(0.05, 0.95, size=2)
    P = np.array([[e11, 1 - e11], [1 - e22, e22]])
    return ModelSpec(tuple(regimes), P)


def reference_paths(theta, y, h1):
    """Plain-Python regime variance recursion, written from the model definition."""
    K, T = theta.shape[0], len(y)
    H = np.empty((K, T))
    for j in range(K):
        a0, a1, a2, b, g = theta[j]
        h = h1[j]
        for t in range(T):
            H[j, t] = h
            w = 1.0 / (1.0 + np.exp(-g * y[t]))
            h = a0 + y[t] ** 2 * (a1 * (1 - w) + a2 * w) + b * h
    return H


def enumerate_posterior(spec, y, h1, pi0):
    """Exhaustive sum over all K**T regime paths.

    Returns the total log likelihood, the filtered probabilities
    p(z_t | y_1..y_t) and a dict mapping each path to p(path | y).
    """
    theta = spec.theta
    P = np.asarray(spec.transition)
    K, T = spec.K, len(y)
    H = reference_paths(theta, y, h1)
    dens = np.exp(-0.5 * y**2 / H) / np.sqrt(2 * np.pi * H)  # (K, T)
    joint = {}
    for path in itertools.product(range(K), repeat=T):
        p = pi0[path[0]] * dens[path[0], 0]
        for t in range(1, T):
            p *= P[path[t - 1], path[t]] * dens[path[t], t]
        joint[path] = p
    total = sum(joint.values())
    filtered = np.zeros((T, K))
    for t in range(T):
        # p(z_t | y_1..y_t) needs the likelihood of the prefix only
        prefix = {}
        for path in itertools.product(range(K), repeat=t + 1):
            p = pi0[path[0]] * dens[path[0], 0]
            for s in range(1, t + 1):
                p *= P[path[s - 1], path[s]] * dens[path[s], s]
            prefix[path] = p
        norm = sum(prefix.values())
        for path, p in prefix.items():
            filtered[t, path[-1]] += p / norm
    posterior = {k: v / total for k, v in joint.items()}
    return np.log(total), filtered, posterior


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Record one pass/fail line per acceptance criterion; the lines are
    printed and repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(criterion, passed, detail):
        line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].split(".")[0].rstrip(":"))):
            terminalreporter.write_line(line)
