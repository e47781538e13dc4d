import numpy as np
import pytest

from rankcontest import Population, RewardSchedule


def brute_force_regret(w, score, slot, lam, gamma=1.0, eps=1e-9):
    """Per-agent deviation gains by direct enumeration, one candidate at a time."""
    n = len(w)
    out = []
    for i in range(n):
        current = lam[slot[i] - 1] - score[i] ** gamma / w[i]
        best = -np.inf
        candidates = [0.0] + [score[j] + eps for j in range(n) if j != i]
        for y in candidates:
            rank = 1 + sum(1 for j in range(n) if j != i and score[j] <= y)
            best = max(best, lam[rank - 1] - y ** gamma / w[i])
        out.append(max(best - current, 0.0))
    return np.array(out)


def recursion_costs(w_sorted, lam):
    k = [0.0]
    for i in range(1, len(lam)):
        k.append(k[-1] + w_sorted[i] * (lam[i] - lam[i - 1]))
    return np.array(k)


def random_monotone_schedule(rng, n):
    """A valid schedule with a random mean: sorted uniforms."""
    v = np.sort(rng.uniform(0, 1, n))
    return RewardSchedule(v, float(np.mean(v)))


@pytest.fixture
def example3():
    return Population.from_arrays([1.0, 2.0, 3.0]), RewardSchedule([0.0, 0.3, 0.9], 0.4)


@pytest.fixture
def homogeneous4():
    return Population.from_arrays([1.0] * 4), RewardSchedule([0.0, 0.0, 1.0, 1.0], 0.5)


@pytest.fixture
def two_group4():
    # agents 0, 1 in A (env 1), agents 2, 3 in B (env 0.4)
    return (Population.from_arrays([1.0, 2.0, 1.0, 2.0], env=[1, 1, 0.4, 0.4], group=[0, 0, 1, 1]),
            RewardSchedule([0.0, 0.0, 1.0, 1.0], 0.5))
