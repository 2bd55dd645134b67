import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cachebc.analysis import (
    NoDeliveryNeeded,
    SystemParams,
    achievable_T_best,
    achievable_T_simple,
    alpha_breakpoint,
    alpha_max_needed,
    csit_reduction,
    csit_reduction_float,
    dcsit_load,
    dcsit_load_closed_form,
    delivery_time_for_eta,
    dof,
    dof_log_approx,
    evaluate,
    gamma_substitute,
    gap,
    gap_scan,
    lower_bound_T,
    select_eta,
    sum_dof_upper,
    zf_load,
)
from cachebc.combinatorics import harmonic

F = Fraction


def params(K, N, M, alpha=0):
    return SystemParams(K=K, N=N, M=M, alpha=alpha)


class TestSystemParams:
    def test_derived(self):
        p = params(4, 8, 2)
        assert p.gamma == F(1, 4)
        assert p.Gamma == 1
        assert p.delivery_budget() == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            params(0, 1, 0)
        with pytest.raises(ValueError):
            params(3, 2, 1)  # N < K
        with pytest.raises(ValueError):
            params(2, 2, 3)  # M > N
        with pytest.raises(ValueError):
            params(2, 2, 1, alpha=2)

    def test_no_delivery_needed(self):
        with pytest.raises(NoDeliveryNeeded):
            params(4, 4, 4).delivery_budget()

    def test_non_integer_budget(self):
        with pytest.raises(ValueError):
            params(3, 4, 1).delivery_budget()


class TestAlphaBreakpoint:
    def test_zero_at_eta_equals_budget(self):
        assert alpha_breakpoint(5, 2, 2) == 0

    def test_hand_evaluation(self):
        # Oracle: direct rational evaluation of the defining ratio.
        k3 = F(2 - 1) / (1 * (harmonic(3) - harmonic(2) - 1) + 2)
        assert k3 == F(3, 4)
        assert alpha_breakpoint(3, 1, 2) == F(3, 4)
        k4 = F(3 - 1) / (1 * (harmonic(4) - harmonic(3) - 1) + 3)
        assert k4 == F(8, 9)
        assert alpha_breakpoint(4, 1, 3) == F(8, 9)

    def test_range_and_errors(self):
        with pytest.raises(ValueError):
            alpha_breakpoint(4, 2, 1)  # eta < Gamma
        with pytest.raises(ValueError):
            alpha_breakpoint(4, 1, 4)  # eta >= K

    def test_strictly_increasing_in_eta(self):
        for K in range(2, 51):
            for Gamma in range(1, K):
                values = [alpha_breakpoint(K, Gamma, eta) for eta in range(Gamma, K)]
                assert all(b < a for b, a in zip(values, values[1:]))
                assert all(0 <= v <= 1 for v in values)


class TestSelectEta:
    def test_examples(self):
        assert select_eta(3, 1, 0) == 1
        assert select_eta(3, 1, F(3, 4)) == 2  # tie resolves upward
        assert select_eta(3, 1, F(1, 2)) == 1

    def test_matches_bruteforce(self):
        for K in range(2, 9):
            for Gamma in range(1, K):
                for alpha in [F(0), F(1, 7), F(1, 3), F(2, 3), F(9, 10), F(1)]:
                    feasible = [eta for eta in range(Gamma, K)
                                if alpha_breakpoint(K, Gamma, eta) <= alpha]
                    assert select_eta(K, Gamma, alpha) == max(feasible)


class TestAchievableTimes:
    def test_alpha_zero_point(self):
        assert achievable_T_best(params(3, 3, 1, 0)) == F(5, 6)
        assert achievable_T_simple(params(3, 3, 1, 0)) == F(5, 6)

    def test_alpha_one_hits_cache_floor(self):
        for K in range(2, 12):
            for Gamma in range(1, K):
                p = params(K, K, Gamma, 1)
                assert achievable_T_best(p) == 1 - p.gamma
                assert achievable_T_simple(p) == 1 - p.gamma

    def test_best_with_selected_eta_bruteforce(self):
        # Oracle: pick the largest feasible fold order by scanning breakpoints,
        # then evaluate the duration ratio directly.
        K, Gamma, alpha = 4, 1, F(1, 5)
        feasible = [e for e in range(Gamma, K) if alpha_breakpoint(K, Gamma, e) <= alpha]
        eta = max(feasible)
        diff = harmonic(K) - harmonic(eta)
        expected = (K - Gamma) * diff / ((K - eta) + alpha * (eta + K * (diff - 1)))
        assert expected == F(195, 196)
        assert achievable_T_best(params(4, 4, 1, alpha)) == expected

    def test_simple_point(self):
        assert achievable_T_simple(params(2, 2, 1, F(1, 2))) == F(1, 2)

    def test_best_never_above_simple(self):
        for K in range(2, 13):
            for Gamma in range(1, K):
                for alpha in [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]:
                    p = params(K, K, Gamma, alpha)
                    best, simple = achievable_T_best(p), achievable_T_simple(p)
                    assert best <= simple
                    if select_eta(K, Gamma, alpha) == Gamma:
                        assert best == simple

    def test_simple_monotone_in_alpha_and_budget(self):
        for K in range(2, 13):
            for Gamma in range(1, K):
                ts = [achievable_T_simple(params(K, K, Gamma, F(i, 4))) for i in range(5)]
                assert all(b >= a for b, a in zip(ts, ts[1:]))
            at_zero = [achievable_T_simple(params(K, K, G, 0)) for G in range(1, K)]
            assert all(b >= a for b, a in zip(at_zero, at_zero[1:]))

    def test_floor_from_formula_at_top_eta(self):
        # At eta = K-1 the duration ratio collapses to 1 - gamma for any alpha.
        for K in range(2, 9):
            for Gamma in range(1, K):
                for alpha in [F(0), F(1, 3), F(1)]:
                    assert delivery_time_for_eta(K, Gamma, K - 1, alpha) == 1 - F(Gamma, K)


class TestDof:
    def test_points(self):
        assert dof(params(3, 3, 1, 1)) == 1
        assert dof(params(3, 3, 1, 0)) == F(4, 5)
        assert dof(params(2, 2, 1, 0)) == 1

    def test_inversion_identity_exact(self):
        for K in range(2, 16):
            for Gamma in range(1, K):
                for alpha in [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)]:
                    p = params(K, K, Gamma, alpha)
                    assert dof(p) * achievable_T_simple(p) == 1 - p.gamma

    @settings(max_examples=120, deadline=None)
    @given(st.data())
    def test_inversion_identity_property(self, data):
        K = data.draw(st.integers(2, 24))
        Gamma = data.draw(st.integers(1, K - 1))
        alpha = F(data.draw(st.integers(0, 64)), 64)
        p = params(K, K, Gamma, alpha)
        assert dof(p) * achievable_T_simple(p) == 1 - p.gamma


class TestDofLogApprox:
    def test_small_cache_targets(self):
        assert dof_log_approx(F(1, 50), 0) == pytest.approx(0.25, abs=0.01)
        assert dof_log_approx(F(1, 1000), 0) == pytest.approx(1 / 7, abs=0.01)
        assert 1 / 11.8 <= dof_log_approx(1e-5, 0) <= 1 / 11.3

    def test_rejects_zero_gamma(self):
        with pytest.raises(ValueError):
            dof_log_approx(0, 0)


class TestLowerBound:
    def test_term_oracle(self):
        # Oracle: every bracket term by hand for K=N=3, M=1, alpha=0.
        terms = {}
        for s in (1, 2, 3):
            terms[s] = (harmonic(s) - F(1 * s, 3 // s)) / (harmonic(s) * 0 + 1 - 0)
        assert terms[1] == F(2, 3)
        assert terms[2] == F(-1, 2)
        assert terms[3] == F(-7, 6)  # negative terms allowed, never win
        assert lower_bound_T(params(3, 3, 1, 0)) == F(2, 3)

    def test_alpha_one_normalization(self):
        # At alpha = 1 every term is the bracket divided by H_s.
        p = params(4, 4, 1, 1)
        expected = max((harmonic(s) - F(s, 4 // s)) / harmonic(s) for s in (1, 2, 3, 4))
        assert lower_bound_T(p) == expected

    def test_floor(self):
        for K in range(2, 13):
            for Gamma in range(1, K):
                for alpha in [F(0), F(1, 2), F(1)]:
                    p = params(K, K, Gamma, alpha)
                    assert lower_bound_T(p) >= 1 - p.gamma


class TestSumDofUpper:
    def test_points(self):
        assert sum_dof_upper(1, 0, 0) == 1
        assert sum_dof_upper(2, 0, 0) == F(4, 3)
        assert sum_dof_upper(2, 1, 0) == 2

    def test_alpha_extremes(self):
        for s in range(1, 9):
            assert sum_dof_upper(s, 0, 0) == s / harmonic(s)
            raw = sum_dof_upper(s, 1, F(1, 2))
            assert raw == s + (s / harmonic(s)) * F(1, 2)
            assert raw >= s  # reported raw, no clamp


class TestGap:
    def test_point(self):
        assert gap(params(3, 3, 1, 0)) == F(5, 4)

    def test_gap_is_one_beyond_quality_threshold(self):
        # The single-served-user term attains the lower bound there, and the
        # achievable time sits on the 1-gamma floor: the gap closes exactly.
        for K in range(2, 13):
            for Gamma in range(1, K):
                thr = alpha_max_needed(K, F(Gamma, K))
                for alpha in (thr, F(1)):
                    p = params(K, K, Gamma, alpha)
                    assert lower_bound_T(p) == 1 - p.gamma
                    assert gap(p) == 1

    def test_grid_below_four_exact(self):
        for K in range(2, 31):
            for Gamma in range(1, K):
                for alpha in [F(0), F(1, 2), F(1)]:
                    assert gap(params(K, K, Gamma, alpha)) < 4


class TestGapScan:
    def test_matches_exact_on_sample(self):
        import random

        rng = random.Random(0)
        res = gap_scan(40)
        assert res.max_gap < 4
        for _ in range(25):
            K = rng.randrange(2, 41)
            Gamma = rng.randrange(1, K)
            ai = rng.randrange(0, 21)
            exact = gap(params(K, K, Gamma, F(ai, 20)))
            # Recompute the same point through the float path.
            one = gap_scan(K, [ai / 20], K_min=K)
            assert one.per_K[0] >= float(exact) - 1e-9
        # The scan's reported worst point reproduces exactly.
        exact_at_worst = gap(params(res.K, res.K, res.Gamma,
                                    F(res.alpha).limit_denominator(10 ** 6)))
        assert float(exact_at_worst) == pytest.approx(res.max_gap, rel=1e-9)


class TestCsitReduction:
    def test_zero_at_full_quality(self):
        assert csit_reduction(params(4, 4, 2, 1)) == 0

    def test_rational_oracle(self):
        hk, h2 = harmonic(4), harmonic(2)
        expected = (h2 - F(1, 2) * hk) / ((hk - 1) * (hk - h2))
        assert expected == F(66, 91)
        assert csit_reduction(params(4, 4, 2, 0)) == expected

    def test_raw_value_unclamped(self):
        # At Gamma = K-1 the implied total quality alpha + delta is exactly 1.
        for K in range(2, 10):
            p = params(K, K, K - 1, 0)
            assert csit_reduction(p) == 1

    def test_large_K_limit(self):
        # Convergence to (1-alpha)(1-gamma)/log(1/gamma) is logarithmic in K
        # with a gamma-dependent offset ~ (log(gamma)/(1-gamma) + 1)/log(K); at
        # K = 1e5 a 2% tolerance holds where that offset is small (gamma=0.7).
        K = 10 ** 5
        Gamma = 7 * 10 ** 4
        gamma = Gamma / K
        limit = (1 - 0.0) * (1 - gamma) / math.log(1 / gamma)
        assert csit_reduction_float(K, Gamma, 0) == pytest.approx(limit, rel=0.02)

    def test_limit_approach_trend(self):
        # At gamma = 0.1 the same limit is approached from below as K grows.
        gamma = 0.1
        limit = (1 - gamma) / math.log(1 / gamma)
        errs = [abs(csit_reduction_float(K, K // 10, 0) - limit)
                for K in (10 ** 4, 10 ** 5, 10 ** 6)]
        assert errs[0] > errs[1] > errs[2]

    def test_needs_two_users(self):
        with pytest.raises(ValueError):
            csit_reduction(params(1, 1, F(1, 2), 0))


class TestAlphaMaxNeeded:
    def test_points(self):
        assert alpha_max_needed(2, F(1, 2)) == 0
        assert alpha_max_needed(3, F(1, 3)) == F(3, 4)
        assert alpha_max_needed(4, F(1, 4)) == F(8, 9)

    def test_equals_top_breakpoint(self):
        for K in range(2, 12):
            for Gamma in range(1, K):
                assert alpha_max_needed(K, F(Gamma, K)) == alpha_breakpoint(K, Gamma, K - 1)

    def test_beyond_threshold_time_is_floor(self):
        for K in range(2, 9):
            for Gamma in range(1, K):
                thr = alpha_max_needed(K, F(Gamma, K))
                for alpha in [thr, min(1, thr + F(1, 100)), F(1)]:
                    p = params(K, K, Gamma, alpha)
                    assert achievable_T_best(p) == 1 - p.gamma


class TestGammaSubstitute:
    def test_values(self):
        assert gamma_substitute(F(1, 5)) == pytest.approx(0.0067379, abs=1e-6)
        assert gamma_substitute(1) == pytest.approx(math.exp(-1), rel=1e-12)
        with pytest.raises(ValueError):
            gamma_substitute(0)

    def test_substitution_recovers_target_dof(self):
        # Identity check (1-gamma')/log(1/gamma') ~ alpha. The relative error
        # is exp(-1/alpha) itself, so 1% holds on alphas up to 1/5.
        for alpha in [F(1, 20), F(1, 10), F(1, 6), F(1, 5)]:
            g = gamma_substitute(alpha)
            assert dof_log_approx(g, 0) == pytest.approx(float(alpha), rel=0.01)


class TestDcsitLoad:
    def test_empty_sum(self):
        assert dcsit_load(3, 3).L == 0

    def test_summation_oracle(self):
        expected = sum(F((3 - j + 1) * (3 - j), j) for j in range(1, 4))
        assert expected == 7
        got = dcsit_load(3, 0)
        assert got.L == 7
        assert got.Q == F(7, 3)

    def test_closed_form_disagrees_with_sum(self):
        # The alternative closed form over-counts at small K; the summation
        # is the definition. The disagreement itself is the expected outcome.
        assert dcsit_load_closed_form(3, 0) == 10
        assert dcsit_load(3, 0).L == 7
        assert dcsit_load_closed_form(3, 0) != dcsit_load(3, 0).L

    def test_float_path_tracks_exact(self):
        for K, Gamma in [(10, 2), (50, 5), (200, 20)]:
            exact = dcsit_load(K, Gamma)
            approx = dcsit_load(K, Gamma, exact=False)
            assert approx.L == pytest.approx(float(exact.L), rel=1e-12)

    def test_vanishing_fraction_trend(self):
        ratios = []
        for K in (100, 1000, 10000):
            Gamma = K // 10
            with_cache = dcsit_load(K, Gamma, exact=False)
            no_cache = dcsit_load(K, 0, exact=False)
            ratios.append(with_cache.L / no_cache.L)
        assert ratios[0] > ratios[1] > ratios[2]


class TestZfLoad:
    def test_points(self):
        assert zf_load(4, 1) == 4
        assert zf_load(10, 5) == 2

    def test_ratio_to_zero_forcing(self):
        # Large-K ratio Q(Gamma)/Q_ZF approaches log(1/gamma) - 3/2 + 2 gamma
        # - gamma^2/2 (integral approximation of the defining sum).
        K, gamma = 10 ** 4, 0.1
        Gamma = int(K * gamma)
        q = dcsit_load(K, Gamma, exact=False).Q
        ratio = q / float(zf_load(K, 1))
        const = math.log(1 / gamma) - 1.5 + 2 * gamma - gamma ** 2 / 2
        assert ratio == pytest.approx(const, rel=0.02)


class TestEvaluate:
    def test_bundle(self):
        pt = evaluate(params(3, 3, 1, 0))
        assert (pt.T_ach_simple, pt.T_ach_best, pt.T_lower) == (F(5, 6), F(5, 6), F(2, 3))
        assert pt.dof == F(4, 5)
        assert pt.eta_selected == 1
        assert pt.gap == F(5, 4)
