import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hazardscope import changepoint as cp
from hazardscope.changepoint import (CpdConfig, KernelCost, KernelSpec, default_penalty, detect, detect_fixed_k,
                                     detect_penalized, first_breakpoint, gram_matrix, median_heuristic_gamma,
                                     segment_cost)
from hazardscope.errors import ValidationError
from oracles import brute_fixed_k, brute_penalized, cost_table, rbf_gram

signals = st.lists(st.floats(0, 1, allow_nan=False), min_size=4, max_size=18)


class TestGamma:
    @pytest.mark.parametrize("x,gamma", [([0, 0, 1, 1], 1.0), ([5, 5, 5], 1.0), ([0, 2], 0.25)])
    def test_hand_cases(self, x, gamma):
        assert median_heuristic_gamma(x) == gamma

    def test_too_short(self):
        with pytest.raises(ValidationError):
            median_heuristic_gamma([1.0])

    @settings(max_examples=50, deadline=None)
    @given(signals)
    def test_matches_oracle_gram(self, x):
        np.testing.assert_allclose(gram_matrix(x), rbf_gram(x), rtol=0, atol=1e-12)


class TestGramAndCost:
    def test_entry(self):
        assert gram_matrix([0.0, 1.0], 1.0)[0, 1] == pytest.approx(math.exp(-1), abs=1e-15)

    def test_large_gamma(self):
        G = gram_matrix([0.0, 1.0, 2.0], 1e6)
        assert G[0, 1] == 0.0 and G[0, 0] == 1.0

    def test_segment_costs(self):
        G = gram_matrix([0.0, 1.0], 1.0)
        assert segment_cost(G, 0, 2) == pytest.approx(1 - math.exp(-1), abs=1e-12)
        assert segment_cost(G, 0, 1) == 0.0
        assert segment_cost(gram_matrix([3.0] * 5), 0, 5) == 0.0

    def test_empty_segment(self):
        with pytest.raises(ValidationError):
            segment_cost(gram_matrix([0.0, 1.0]), 1, 1)

    @settings(max_examples=50, deadline=None)
    @given(signals)
    def test_prefix_sum_costs_match_direct(self, x):
        kc = KernelCost(x)
        C = cost_table(rbf_gram(x))
        n = len(x)
        for a in range(n):
            for b in range(a + 1, n + 1):
                assert kc.cost(a, b) == pytest.approx(C[a, b], abs=1e-10)
                assert kc.cost(a, b) >= -1e-10

    @settings(max_examples=50, deadline=None)
    @given(signals, st.floats(0.01, 100))
    def test_gram_properties(self, x, gamma):
        G = gram_matrix(x, gamma)
        assert np.array_equal(G, G.T)
        assert np.all(np.diag(G) == 1.0)
        assert np.all((G > 0) | (G == 0)) and np.all(G <= 1.0)


class TestFixedK:
    def test_single_step(self):
        assert detect_fixed_k([0.0] * 6 + [1.0] * 6, k=1) == [6]

    def test_two_steps(self):
        assert detect_fixed_k([0.0] * 4 + [1.0] * 4 + [0.0] * 4, k=2) == [4, 8]

    def test_constant_tie_break(self):
        assert detect_fixed_k([0.3] * 10, k=1, min_segment_size=2) == [2]

    def test_infeasible(self):
        with pytest.raises(ValidationError):
            detect_fixed_k([0.0] * 5, k=2, min_segment_size=2)

    @settings(max_examples=60, deadline=None)
    @given(signals, st.integers(1, 3), st.integers(1, 3))
    def test_matches_enumeration(self, x, k, m):
        if len(x) < (k + 1) * m:
            return
        assert detect_fixed_k(x, k=k, min_segment_size=m) == brute_fixed_k(x, k, m)

    @settings(max_examples=60, deadline=None)
    @given(signals, st.integers(1, 3), st.integers(1, 3))
    def test_invariants(self, x, k, m):
        if len(x) < (k + 1) * m:
            return
        bps = detect_fixed_k(x, k=k, min_segment_size=m)
        edges = [0, *bps, len(x)]
        assert len(bps) == k
        assert all(b - a >= m for a, b in zip(edges, edges[1:]))


class TestPenalized:
    def test_constant(self):
        for beta in (0.01, 1.0, 100.0):
            assert detect_penalized([0.5] * 12, beta=beta) == []

    def test_step(self):
        assert detect_penalized([0.0] * 10 + [1.0] * 10, beta=0.5) == [10]

    def test_huge_penalty(self):
        assert detect_penalized([0.0] * 10 + [1.0] * 10, beta=1e6) == []

    def test_short_signal(self):
        assert detect_penalized([0.0, 1.0, 0.0], beta=0.1, min_segment_size=2) == []

    def test_nonpositive_beta(self):
        with pytest.raises(ValidationError):
            detect_penalized([0.0, 1.0, 0.0, 1.0], beta=0.0)

    def test_default_penalty_positive_and_detects_clear_step(self):
        x = [0.0] * 15 + [1.0] * 15
        assert default_penalty(x) > 0
        assert detect_penalized(x) == [15]

    @settings(max_examples=60, deadline=None)
    @given(signals, st.sampled_from([0.01, 0.1, 1.0, 10.0]), st.integers(1, 3))
    def test_matches_enumeration(self, x, beta, m):
        assert detect_penalized(x, beta=beta, min_segment_size=m) == brute_penalized(x, [beta], m)[beta]

    @settings(max_examples=40, deadline=None)
    @given(signals)
    def test_monotone_in_beta(self, x):
        counts = [len(detect_penalized(x, beta=b)) for b in (0.01, 0.1, 1.0, 10.0)]
        assert counts == sorted(counts, reverse=True)


class TestConfig:
    def test_dispatch(self):
        x = [0.0] * 10 + [1.0] * 10
        assert detect(x, CpdConfig(mode="fixed", k=1)) == [10]
        assert detect(x, CpdConfig(mode="penalized", beta=0.5)) == [10]

    def test_from_dict_auto(self):
        c = CpdConfig.from_dict({"mode": "penalized", "beta": "auto", "gamma": "auto", "min_segment_size": 3})
        assert c.beta is None and c.gamma is None and c.min_segment_size == 3

    @pytest.mark.parametrize("kw", [{"mode": "nope"}, {"k": 0}, {"min_segment_size": 0}, {"beta": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            CpdConfig(**kw)

    def test_fixed_gamma_used(self):
        x = [0.0, 0.1, 0.2, 5.0]
        assert KernelCost(x, KernelSpec(2.0)).gamma == 2.0

    @pytest.mark.parametrize("bps,first", [([6, 9], 6), ([], None), ([3], 3)])
    def test_first_breakpoint(self, bps, first):
        assert first_breakpoint(bps) == first


def test_backend_reported():
    assert cp.BACKEND in ("compiled", "python")
