import itertools
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanet_nd import occupancy as oc
from vanet_nd.harness.validate import occupancy_suite


def enumerate_events(B, N, q):
    """P(exactly e beams hold q nodes), e = 0..B, by listing all B**N assignments."""
    counts = np.zeros(B + 1)
    for a in itertools.product(range(B), repeat=N):
        occ = np.bincount(np.array(a, dtype=int), minlength=B) if N else np.zeros(B, int)
        counts[(occ == q).sum()] += 1
    return counts / B ** N


# -- situation counts ---------------------------------------------------------

def test_ns_examples():
    assert oc.situation_count_NS(4, 2, 1) == 6
    assert oc.situation_count_NS(4, 2, 2) == 6
    assert oc.situation_count_NS(7, 3, 0) == 1
    assert oc.situation_count_NS(3, 2, 2) == 0


def test_ds_examples():
    assert oc.situation_count_DS(1, 1, 1) == 0
    assert oc.situation_count_DS(2, 1, 2) == 2
    for b in range(5):
        for q in range(1, 4):
            assert oc.situation_count_DS(b, q, 0) == 1


def test_bs_examples():
    assert oc.situation_count_BS(2, 1, 1, 2) == 0
    assert oc.situation_count_BS(2, 2, 1, 2) == 1
    for B, q in [(3, 1), (2, 3), (4, 2)]:
        assert oc.situation_count_BS(B, B, q, q * B) == 1
        assert oc.situation_count_BS(B, B, q, q * B + 1) == 0


def test_event_probability_examples():
    assert oc.event_probability(0, 2, 2, 2) == pytest.approx(0.5, abs=1e-15)
    B, q = 3, 2
    N = q * B
    assert oc.event_probability(B, B, N, q) == pytest.approx(
        oc.situation_count_NS(N, q, B) / B ** N, abs=1e-15)


@pytest.mark.parametrize("B", [1, 2, 3, 4])
def test_event_probabilities_sum_to_one_and_match_enumeration(B):
    for N in range(0, 9 if B <= 3 else 8):
        for q in range(0, N + 1):
            brute = enumerate_events(B, N, q)
            probs = [oc.event_probability(e, B, N, q) for e in range(B + 1)]
            assert sum(probs) == pytest.approx(1.0, abs=1e-12)
            # e = 0 is what DS counts; e >= 1 come from NS * BS
            assert np.allclose(probs, brute, atol=1e-12)


# -- expected q-beams -------------------------------------------------------

def test_two_nodes_two_beams():
    s = oc.expected_q_beams(2, 2)
    assert s.E == pytest.approx((0.5, 1.0, 0.5), abs=1e-15)
    assert s.alpha == pytest.approx(2 / 3, abs=1e-15)
    assert s.mean_nonempty_occupancy == pytest.approx(4 / 3, abs=1e-15)


def test_no_neighbors_has_no_alpha():
    assert oc.q_beam_expectations(0, 5) == [5]
    with pytest.raises(ValueError):
        oc.expected_q_beams(0, 5)
    with pytest.raises(ValueError):
        oc.binomial_q_beams(0, 5)


@pytest.mark.parametrize("B", [1, 2, 3, 12])
def test_single_neighbor(B):
    s = oc.expected_q_beams(1, B)
    assert s.E == pytest.approx((B - 1, 1.0), abs=1e-15)
    assert s.alpha == 1.0 and s.mean_nonempty_occupancy == 1.0


def test_brute_force_trivial_cases():
    assert oc.brute_force_occupancy(1, 3).E[1] == 1
    s = oc.brute_force_occupancy(3, 1)
    assert s.E[3] == 1 and s.E[0] == 0


def test_brute_force_size_guard():
    with pytest.raises(ValueError):
        oc.brute_force_occupancy(12, 12)


def test_invalid_model():
    with pytest.raises(ValueError):
        oc.OccupancyModel(-1, 3)
    with pytest.raises(ValueError):
        oc.OccupancyModel(3, 0)


def test_oracle_equivalence():
    for B in range(1, 5):
        for N in range(0, 9):
            exact = oc.q_beam_expectations(N, B)
            brute = oc.brute_force_occupancy(N, B).E
            for q in range(N + 1):
                assert abs(float(exact[q]) - float(brute[q])) <= 1e-12


def test_exact_values_are_rational():
    E = oc.q_beam_expectations(5, 3)
    assert all(isinstance(x, Fraction) for x in E)
    assert sum(E) == 3 and sum(q * e for q, e in enumerate(E)) == 5


@pytest.mark.parametrize("N", range(0, 41))
def test_conservation_b12(N):
    E = [float(x) for x in oc.q_beam_expectations(N, 12)]
    assert abs(sum(E) - 12) < 1e-9
    assert abs(sum(q * e for q, e in enumerate(E)) - N) < 1e-9


def test_alpha_non_increasing_in_N():
    alphas = [oc.expected_q_beams(N, 12).alpha for N in range(1, 41)]
    assert all(b <= a + 1e-15 for a, b in zip(alphas, alphas[1:]))


@given(st.integers(1, 30), st.integers(1, 12))
def test_occupancy_bounds(N, B):
    s = oc.expected_q_beams(N, B)
    assert 0 < s.alpha <= 1
    assert 1 - 1e-12 <= s.mean_nonempty_occupancy <= N + 1e-12


@given(st.integers(1, 60), st.integers(1, 12))
def test_binomial_linearity_matches_counting(N, B):
    exact = oc.expected_q_beams(N, B)
    lin = oc.binomial_q_beams(N, B)
    assert np.allclose(exact.E, lin.E, atol=1e-12)
    assert lin.alpha == pytest.approx(exact.alpha, rel=1e-12)


def test_table2_scale_values():
    s = oc.expected_q_beams(60, 12)
    assert s.alpha == pytest.approx(0.0838, abs=1e-4)
    assert s.mean_nonempty_occupancy == pytest.approx(5.027, abs=1e-3)


def test_monte_carlo_fallback_is_close():
    exact = oc.expected_q_beams(20, 12)
    mc = oc.expected_q_beams(20, 12, monte_carlo=True, draws=200_000, seed=3)
    assert mc.alpha == pytest.approx(exact.alpha, rel=2e-3)
    assert np.allclose(mc.E, exact.E, atol=0.02)


# -- oracle sensitivity -----------------------------------------------------

def test_corrupted_ds_base_case_is_caught(monkeypatch):
    assert all(c.passed for c in occupancy_suite()[0])

    @lru_cache(maxsize=None)
    def bad_ds(b, q, n):
        # the base case as printed: zero whenever b = 0 or n = 0
        if b == 0 or n == 0:
            return 0
        return sum(comb(n, m) * bad_ds(b - 1, q, n - m) for m in range(n + 1) if m != q)

    monkeypatch.setattr(oc, "_ds", bad_ds)
    checks, _ = occupancy_suite()
    assert not all(c.passed for c in checks)
