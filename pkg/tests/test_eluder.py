import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varbandit.core import FunctionClass, from_rows, random_class
from varbandit.eluder import (
    EluderBudgetError,
    critical_epsilons,
    eluder_dim,
    format_certificate,
    is_eps_dependent,
    nonmonotone_eluder_dim,
    replay_certificate,
)


def indicators_plus_zero(n):
    rows = [[0.0] * n] + [[1.0 if j == i else 0.0 for j in range(n)] for i in range(n)]
    return from_rows(rows, 1, n)


def two_constants(n):
    return from_rows([[0.0] * n, [1.0] * n], 1, n)


def naive_independent(values, prefix, z, eps):
    """Definition check over all ordered pairs with plain loops."""
    F = values.shape[0]
    for g in range(F):
        for h in range(F):
            disc = math.sqrt(sum((values[g, p] - values[h, p]) ** 2 for p in prefix))
            if disc <= eps and values[g, z] - values[h, z] > eps:
                return True
    return False


def naive_longest(values, eps, max_len):
    """Longest independent sequence with repeats allowed, by plain enumeration."""
    n = values.shape[1]
    best = 0

    def extend(seq):
        nonlocal best
        best = max(best, len(seq))
        if len(seq) == max_len:
            return
        for z in range(n):
            if naive_independent(values, seq, z, eps):
                extend(seq + [z])

    extend([])
    return best


def test_dependence_examples():
    fc = from_rows([[0.0], [1.0]], 1, 1)
    dep, w = is_eps_dependent((0, 0), [], fc, fc.full_mask(), 0.5)
    assert not dep and w.gap == 1.0
    dep, w = is_eps_dependent((0, 0), [(0, 0)], fc, fc.full_mask(), 0.5)
    assert dep and w is None
    dep, _ = is_eps_dependent((0, 0), [], fc, np.array([True, False]), 0.5)
    assert dep


def test_dependence_boundary_counts_as_dependent():
    fc = from_rows([[0.0, 0.0], [0.5, 0.5]], 1, 2)
    # gap exactly eps is not independent
    assert is_eps_dependent((0, 1), [], fc, fc.full_mask(), 0.5)[0]


def test_nonmonotone_examples():
    assert nonmonotone_eluder_dim(two_constants(4), epsilon=0.5)[0] == 1
    d, cert = nonmonotone_eluder_dim(indicators_plus_zero(5), epsilon=0.5)
    assert d == 5
    assert replay_certificate(cert, indicators_plus_zero(5))
    fc = random_class(4, 1, 3, rng=0)
    assert nonmonotone_eluder_dim(fc, epsilon=1.0)[0] == 0


def test_eluder_dim_examples():
    d, cert = eluder_dim(two_constants(4), epsilon=0.5, with_certificate=True)
    assert d == 1
    assert critical_epsilons(two_constants(4), two_constants(4).full_mask(),
                             [(0, a) for a in range(4)], 0.5) == [0.5, 1.0 - 1e-9]
    assert eluder_dim(indicators_plus_zero(3), epsilon=0.5) == 3
    assert eluder_dim(two_constants(4), epsilon=1.5) == 0


def test_certificate_contents():
    fc = indicators_plus_zero(3)
    d, cert = eluder_dim(fc, epsilon=0.5, with_certificate=True)
    assert len(cert) == d == 3
    for j, (z, w) in enumerate(zip(cert.points, cert.witnesses)):
        assert w.prefix_discrepancy <= cert.epsilon
        assert w.gap > cert.epsilon
    assert "witness=" in format_certificate(cert)
    bogus = type(cert)(cert.epsilon, cert.points + (cert.points[0],), cert.witnesses)
    assert not replay_certificate(bogus, fc)


def test_budget_refusal():
    with pytest.raises(EluderBudgetError):
        eluder_dim(random_class(3, 4, 4, rng=0), epsilon=0.1)
    with pytest.raises(EluderBudgetError):
        eluder_dim(random_class(65, 1, 2, rng=0), epsilon=0.1)
    assert eluder_dim(random_class(3, 4, 4, rng=0), epsilon=0.1, budget=16) >= 1


def test_matches_naive_enumeration_with_repeats():
    rng = np.random.default_rng(17)
    for _ in range(25):
        F, A = int(rng.integers(2, 5)), int(rng.integers(1, 5))
        values = np.round(rng.uniform(0, 1, size=(F, 1, A)), 2)
        fc = FunctionClass(values, 1.0)
        eps = float(rng.choice([0.05, 0.1, 0.2, 0.4]))
        flat = values[:, 0, :]
        # repeats allowed up to two extra steps beyond the domain size
        assert nonmonotone_eluder_dim(fc, epsilon=eps)[0] == naive_longest(flat, eps, A + 2)


def test_eluder_dim_dominates_a_fine_epsilon_sweep():
    rng = np.random.default_rng(3)
    for _ in range(10):
        fc = FunctionClass(np.round(rng.uniform(0, 1, size=(3, 1, 4)), 2), 1.0)
        eps = 0.1
        d = eluder_dim(fc, epsilon=eps)
        sweep = max(nonmonotone_eluder_dim(fc, epsilon=e)[0] for e in np.linspace(eps, 1.0, 181))
        assert d >= sweep
        assert d >= nonmonotone_eluder_dim(fc, epsilon=eps)[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_in_epsilon(seed):
    fc = random_class(4, 2, 2, rng=seed)
    grid = [0.05, 0.1, 0.2, 0.4, 0.8]
    dims = [eluder_dim(fc, epsilon=e) for e in grid]
    assert all(a >= b for a, b in zip(dims, dims[1:]))
    for e, d in zip(grid, dims):
        assert d >= nonmonotone_eluder_dim(fc, epsilon=e)[0]


def test_permuted_domain_gives_same_value():
    fc = random_class(4, 2, 3, rng=11)
    domain = [(x, a) for x in range(2) for a in range(3)]
    base = eluder_dim(fc, domain=domain, epsilon=0.2)
    for perm in itertools.islice(itertools.permutations(domain), 0, 720, 97):
        assert eluder_dim(fc, domain=list(perm), epsilon=0.2) == base
