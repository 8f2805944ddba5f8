import math

import pytest

from extraction_audit.distance import DistanceKind, distance
from extraction_audit.metrics import (
    SequenceResult,
    ccdf,
    cost_summary,
    extraction_rate,
    geometric_mean_floor,
    heatmap_coverage,
    mass_gain,
    shells,
    success_greedy,
    success_probabilistic,
    token_eval_cost,
)
from extraction_audit.model import InvalidInputError

from conftest import random_tokens


def result(id, masses, verbatim=None, span=None, evals=0, greedy=None):
    return SequenceResult(
        id=id,
        verbatim_mass=masses[0] if verbatim is None else verbatim,
        nearverbatim_mass=tuple(masses),
        greedy_distance=greedy,
        token_evals=evals,
        char_span=span,
    )


class TestSuccessPredicates:
    def test_greedy_identical(self):
        assert success_greedy((1, 2, 3), (1, 2, 3), DistanceKind.HAMMING, 0)

    def test_greedy_one_substitution(self):
        assert not success_greedy((1, 2, 3), (1, 0, 3), DistanceKind.HAMMING, 0)
        assert success_greedy((1, 2, 3), (1, 0, 3), DistanceKind.HAMMING, 1)

    def test_greedy_matches_direct_distance(self, rng):
        for _ in range(100):
            a = random_tokens(rng, 6, 4)
            b = random_tokens(rng, 6, 4)
            for kind in DistanceKind:
                for eps in (0, 1, 2):
                    assert success_greedy(a, b, kind, eps) == (distance(kind, a, b) <= eps)

    def test_greedy_length_mismatch_for_hamming(self):
        with pytest.raises(InvalidInputError):
            success_greedy((1, 2), (1, 2, 3), DistanceKind.HAMMING, 0)

    def test_probabilistic_boundary(self):
        assert success_probabilistic(0.001, 0.001)
        assert not success_probabilistic(0.0, 0.001)
        # The Gatsby sequence: verbatim mass 0.1431 clears tau_min = 0.001.
        assert success_probabilistic(0.1431, 0.001)


class TestExtractionRate:
    def test_all_none_and_fraction(self):
        rs = [result(str(i), [0.5]) for i in range(8)]
        assert extraction_rate(rs, lambda r: True) == 1.0
        assert extraction_rate(rs, lambda r: False) == 0.0
        assert extraction_rate(rs, lambda r: int(r.id) < 3) == 0.375

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            extraction_rate([], lambda r: True)

    def test_rate_at_eps0_counts_verbatim(self):
        rs = [result(str(i), [i / 10, i / 10 + 0.01]) for i in range(10)]
        tau = 0.35
        rate = extraction_rate(rs, lambda r: success_probabilistic(r.nearverbatim_mass[0], tau))
        assert rate == sum(1 for r in rs if r.verbatim_mass >= tau) / 10


class TestGainAndShells:
    def test_all_mass_verbatim(self):
        r = result("a", [0.4, 0.4, 0.4])
        d = shells(r)
        assert d.verbatim_share == 1.0
        assert d.shell_share == (1.0, 0.0, 0.0)
        assert mass_gain(r) == 0.0

    def test_gatsby_numbers(self):
        # Verbatim 0.1431; the three near-verbatim continuations sum to 0.3579.
        r = result("gatsby", [0.1431, 0.2908, 0.3579])
        assert math.isclose(mass_gain(r), 0.2148, abs_tol=1e-12)
        d = shells(r)
        assert math.isclose(d.verbatim_share, 0.1431 / 0.3579, abs_tol=1e-12)
        assert math.isclose(sum(d.shell_share), 1.0, abs_tol=1e-9)

    def test_zero_mass_sequence(self):
        d = shells(result("z", [0.0, 0.0]))
        assert d.verbatim_share == 0.0
        assert d.shell_share == (0.0, 0.0)

    def test_tiny_negative_shell_clamped(self):
        r = result("c", [0.2, 0.2 - 1e-13])
        d = shells(r)
        assert d.shell_mass[1] == 0.0

    def test_decreasing_vector_rejected(self):
        with pytest.raises(InvalidInputError):
            result("bad", [0.3, 0.1])


class TestCcdf:
    def test_hand_counted_corpus(self):
        gains = [0.0, 0.0, 0.005, 0.01, 0.02, 0.02, 0.1, 0.3, 0.0, 0.004]
        pts = dict(ccdf(gains, [0.001, 0.01, 0.05, 0.5]))
        assert pts[0.001] == 7 / 10
        assert pts[0.01] == 5 / 10
        assert pts[0.05] == 2 / 10
        assert pts[0.5] == 0.0

    def test_nonincreasing_and_positive_gain_intercept(self, rng):
        gains = [rng.choice([0.0, rng.random()]) for _ in range(50)]
        xs = [0.0, 1e-12, 0.1, 0.5, 0.9]
        ys = [y for _, y in ccdf(gains, xs)]
        assert ys == sorted(ys, reverse=True)
        positive = sum(1 for g in gains if g > 0) / len(gains)
        assert ys[1] == positive

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            ccdf([], [0.1])


class TestHeatmap:
    def test_single_span(self):
        rs = [result("a", [0.3], span=(2, 6))]
        cov, flags = heatmap_coverage(rs, 8, epsilon=0, tau_min=0.1)
        assert cov == [0, 0, 0.3, 0.3, 0.3, 0.3, 0, 0]
        assert flags == [False, False, True, True, True, True, False, False]

    def test_overlap_takes_max(self):
        rs = [result("a", [0.2], span=(0, 5)), result("b", [0.5], span=(3, 8))]
        cov, _ = heatmap_coverage(rs, 8, epsilon=0)
        assert cov[3] == cov[4] == 0.5
        assert cov[0] == 0.2

    def test_random_spans_match_naive_scan(self, rng):
        rs = []
        n = 40
        for i in range(30):
            start = rng.randrange(0, n - 1)
            end = rng.randrange(start + 1, n + 1)
            rs.append(result(str(i), [rng.random()], span=(start, end)))
        cov, _ = heatmap_coverage(rs, n, epsilon=0)
        for pos in range(n):
            want = max(
                (r.verbatim_mass for r in rs if r.char_span[0] <= pos < r.char_span[1]),
                default=0.0,
            )
            assert cov[pos] == want

    def test_span_outside_text_rejected(self):
        rs = [result("a", [0.3], span=(5, 12))]
        with pytest.raises(InvalidInputError):
            heatmap_coverage(rs, 10, epsilon=0)


class TestCosts:
    def test_reference_cost_rows(self):
        assert token_eval_cost("greedy", 50, 50) == 99
        assert token_eval_cost("teacher_forcing", 50, 50) == 100
        assert token_eval_cost("kcbs", 50, 50, B=20) == 1030
        assert token_eval_cost("mc", 50, 50, M=20) == 1030
        assert token_eval_cost("mc", 50, 50, M=3000) == 147050

    def test_cost_summary_table(self):
        rs = [result(str(i), [0.1], evals=1030) for i in range(3)]
        summary = cost_summary(rs, 50, 50, B=20)
        assert summary["actual_total"] == 3090
        assert summary["per_pair"]["kcbs"] == 1030
        assert math.isclose(summary["ratio_vs_greedy"]["kcbs"], 1030 / 99)

    def test_unknown_method(self):
        with pytest.raises(InvalidInputError):
            token_eval_cost("telepathy", 50, 50)


class TestJoinById:
    def test_pairs_matching_ids_only(self):
        from extraction_audit.metrics import join_by_id

        left = [result("a", [0.1]), result("b", [0.2]), result("c", [0.3])]
        right = [result("c", [0.5]), result("a", [0.6])]
        pairs = join_by_id(left, right)
        assert [(l.id, r.id) for l, r in pairs] == [("a", "a"), ("c", "c")]


class TestGeometricFloor:
    def test_reference_value(self):
        assert abs(geometric_mean_floor(0.001, 50) - 0.8707) < 1e-3
