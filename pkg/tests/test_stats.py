import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from hybrid_ncl.stats import (
    NEMENYI_Q,
    chi2_sf,
    friedman_statistic,
    nemenyi_cd,
    rank_table,
    significance_pairs,
    write_cd_csv,
)


def brute_ranks(row):
    """Tie-averaged ranks by counting: rank = 1 + #smaller + #ties_other / 2."""
    row = list(row)
    return [1 + sum(o < v for o in row) + 0.5 * (sum(o == v for o in row) - 1) for v in row]


def brute_friedman(errors):
    """Rank-sum form of the statistic, with no shared code."""
    D, K = len(errors), len(errors[0])
    sums = [0.0] * K
    for row in errors:
        for j, r in enumerate(brute_ranks(row)):
            sums[j] += r
    return 12.0 / (D * K * (K + 1)) * sum(s * s for s in sums) - 3.0 * D * (K + 1)


def test_ranks_with_ties():
    t = rank_table([[0.1, 0.3, 0.1, 0.2]])
    assert t.ranks.tolist() == [[1.5, 4.0, 1.5, 3.0]]


def test_matches_brute_force(rng):
    for _ in range(100):
        D, K = int(rng.integers(2, 25)), int(rng.integers(2, 12))
        E = np.round(rng.uniform(size=(D, K)), 1)  # coarse values force ties
        chi2, p = friedman_statistic(rank_table(E))
        assert abs(chi2 - max(brute_friedman(E.tolist()), 0.0)) <= 1e-10
        assert 0.0 <= p <= 1.0


def test_all_tied_is_zero():
    chi2, p = friedman_statistic(rank_table(np.ones((6, 4))))
    assert chi2 == 0.0 and p == 1.0


@pytest.mark.parametrize("D", [2, 3, 5, 8])
def test_two_methods_sign_test(D):
    # every assignment of winners across D datasets
    stats = []
    for wins in itertools.product([0, 1], repeat=D):
        E = np.array([[0.0, 1.0] if w else [1.0, 0.0] for w in wins])
        chi2, _ = friedman_statistic(rank_table(E))
        w1 = sum(wins)
        assert chi2 == pytest.approx((2 * w1 - D) ** 2 / D, abs=1e-12)
        stats.append(chi2)
    # under random relabeling the statistic has mean K - 1 = 1 exactly
    assert np.mean(stats) == pytest.approx(1.0, abs=1e-12)


def test_chi2_sf_against_scipy():
    for dof in (1, 2, 3, 7, 19):
        for x in (0.0, 0.01, 0.5, 1.0, 3.0, 10.0, 40.0, 120.0):
            assert chi2_sf(x, dof) == pytest.approx(sps.chi2.sf(x, dof), rel=1e-10, abs=1e-300)


def test_p_value_small_for_consistent_winner():
    E = np.tile([1.0, 2.0, 3.0], (20, 1))
    chi2, p = friedman_statistic(rank_table(E))
    assert chi2 == pytest.approx(40.0)
    assert p == pytest.approx(math.exp(-20.0), rel=1e-12)


def test_invariances(rng):
    E = rng.uniform(size=(10, 5))
    base = friedman_statistic(rank_table(E))
    perm = rng.permutation(5)
    assert friedman_statistic(rank_table(E[:, perm]))[0] == pytest.approx(base[0], abs=1e-12)
    assert friedman_statistic(rank_table(np.exp(3 * E) - 2))[0] == pytest.approx(base[0], abs=1e-12)


def test_duplicate_method_ties(rng):
    E = rng.uniform(size=(7, 3))
    t = rank_table(np.c_[E, E[:, 1]])
    np.testing.assert_array_equal(t.ranks[:, 1], t.ranks[:, 3])


def test_validation():
    with pytest.raises(ValueError):
        friedman_statistic(rank_table([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        rank_table([1.0, 2.0])


class TestNemenyi:
    def test_two_methods(self):
        for D in (1, 4, 20):
            assert nemenyi_cd(2, D) == pytest.approx(1.960 / math.sqrt(D), rel=1e-12)

    def test_monotone(self):
        for alpha in (0.05, 0.10):
            for K in range(2, 21):
                cds = [nemenyi_cd(K, D, alpha) for D in range(1, 40)]
                assert all(a > b for a, b in zip(cds, cds[1:]))
            for D in (5, 20):
                cds = [nemenyi_cd(K, D, alpha) for K in range(2, 21)]
                assert all(a < b for a, b in zip(cds, cds[1:]))

    def test_table_against_studentized_range(self):
        for alpha, row in NEMENYI_Q.items():
            for K, q in zip(range(2, 21), row):
                ref = sps.studentized_range.ppf(1 - alpha, K, np.inf) / math.sqrt(2)
                assert q == pytest.approx(ref, abs=1e-3)

    def test_limits(self):
        with pytest.raises(ValueError):
            nemenyi_cd(21, 5)
        with pytest.raises(ValueError):
            nemenyi_cd(1, 5)
        with pytest.raises(ValueError):
            nemenyi_cd(3, 5, alpha=0.01)


class TestSignificance:
    def test_extremes(self, rng):
        t = rank_table(rng.uniform(size=(8, 4)))
        assert significance_pairs(t, math.inf) == set()
        if len(set(t.mean_ranks)) == 4:
            assert len(significance_pairs(t, 0.0)) == 6

    def test_hand_built(self):
        # mean ranks A=1.0, B=2.25, C=2.75
        E = [[1, 2, 3], [1, 2, 3], [1, 2, 3], [1, 3, 2]]
        t = rank_table(E, ["A", "B", "C"])
        np.testing.assert_allclose(t.mean_ranks, [1.0, 2.25, 2.75])
        assert significance_pairs(t, 1.5) == {("A", "C")}
        assert significance_pairs(t, 1.0) == {("A", "B"), ("A", "C")}

    def test_cd_csv_intervals(self, tmp_path):
        E = [[1, 2, 3], [1, 2, 3], [1, 2, 3], [1, 3, 2]]
        t = rank_table(E, ["A", "B", "C"])
        write_cd_csv(t, 1.5, tmp_path / "cd.csv")
        rows = [line.split(",") for line in (tmp_path / "cd.csv").read_text().splitlines()[1:]]
        iv = {r[0]: (float(r[2]), float(r[3])) for r in rows}
        overlap = lambda a, b: iv[a][1] >= iv[b][0] and iv[b][1] >= iv[a][0]
        assert not overlap("A", "C") and overlap("A", "B") and overlap("B", "C")


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_statistic_nonnegative(D, K, seed):
    E = np.random.default_rng(seed).integers(0, 3, size=(D, K)).astype(float)
    chi2, p = friedman_statistic(rank_table(E))
    assert chi2 >= 0 and 0 <= p <= 1
