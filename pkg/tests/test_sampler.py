import math

import numpy as np
import pytest

from tworate import (
    KL,
    BestOfMConfig,
    RejectionSampler,
    TableScore,
    ThresholdDetector,
    best_of_m_exact_law,
    best_of_m_sample,
    best_of_m_sample_positions,
    build_plan,
    expected_acceptance,
    f_divergence,
    kl_lower_bound,
    make_plan,
    optimal_distribution,
    sample_watermarked,
    total_variation,
)
from tworate.divergence import ErrorRates
from tworate.errors import BudgetExceededError

from conftest import make_distribution, random_plan


def empirical_from_positions(F, pos):
    counts = np.bincount(pos, minlength=len(F)).astype(float)
    return F.empirical_from_counts(counts)


class TestRejectionSampler:
    def test_identity_plan_accepts_everything(self, two_state):
        F, region = two_state
        s = RejectionSampler(make_plan(F, region, 0.5))
        rng = np.random.default_rng(0)
        s.sample_positions(10_000, rng)
        assert s.stats.acceptances == s.stats.proposals
        assert s.stats.rate == 1.0

    def test_two_state_frequency(self, two_state):
        F, region = two_state
        s = RejectionSampler(make_plan(F, region, 0.25))
        rng = np.random.default_rng(1)
        pos = s.sample_positions(10**6, rng)
        assert abs((pos == 0).mean() - 0.75) <= 0.0018

    def test_acceptance_rate_identity(self):
        F = make_distribution([0.2, 0.8])
        plan = make_plan(F, F.subset([0]), 0.1)
        assert expected_acceptance(plan) == pytest.approx(0.2 / 0.9, abs=1e-12)
        assert expected_acceptance(plan) == pytest.approx(1.0 / plan.w1, abs=1e-12)
        s = RejectionSampler(plan)
        rng = np.random.default_rng(2)
        s.sample_positions(200_000, rng)
        p = expected_acceptance(plan)
        sigma = math.sqrt(p * (1 - p) / s.stats.proposals)
        assert abs(s.stats.rate - p) <= 4 * sigma

    def test_scalar_path_matches_target(self, two_state):
        F, region = two_state
        plan = make_plan(F, region, 0.25)
        s = RejectionSampler(plan)
        rng = np.random.default_rng(3)
        draws = [sample_watermarked(s, rng).id for _ in range(20_000)]
        freq = sum(d == 0 for d in draws) / len(draws)
        assert abs(freq - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / 20_000)

    def test_scalar_deterministic_per_seed(self, two_state):
        F, region = two_state
        plan = make_plan(F, region, 0.25)
        runs = []
        for _ in range(2):
            s = RejectionSampler(plan)
            rng = np.random.default_rng(9)
            runs.append([s.sample(rng).id for _ in range(500)])
        assert runs[0] == runs[1]

    def test_budget_guard(self):
        F = make_distribution([1e-4] + [0.9999 / 9] * 9)
        plan = make_plan(F, F.subset([0]), 0.0)  # acceptance ~ 1e-4
        s = RejectionSampler(plan, max_proposals=100)
        with pytest.raises(BudgetExceededError):
            s.sample_positions(10, np.random.default_rng(0))

    def test_expected_acceptance_examples(self):
        F = make_distribution([0.5, 0.5])
        assert expected_acceptance(make_plan(F, F.subset([0]), 0.5)) == 1.0
        F2 = make_distribution([0.01, 0.99])
        assert expected_acceptance(make_plan(F2, F2.subset([0]), 0.0)) == pytest.approx(
            0.01, abs=1e-15
        )

    def test_exactness_tv_small_support(self):
        rng_master = np.random.default_rng(123)
        for trial in range(5):
            plan = random_plan(rng_master, 12, interior_beta=True)
            gstar = optimal_distribution(plan)
            s = RejectionSampler(plan)
            pos = s.sample_positions(200_000, np.random.default_rng(trial))
            ghat = empirical_from_positions(plan.base, pos)
            assert total_variation(ghat, gstar) <= 0.01

    def test_geometric_proposals_mean(self):
        F = make_distribution([0.25, 0.75])
        plan = make_plan(F, F.subset([0]), 0.25)
        s = RejectionSampler(plan)
        rng = np.random.default_rng(5)
        n = 100_000
        s.sample_positions(n, rng)
        mean_props = s.stats.proposals / s.stats.acceptances
        p = expected_acceptance(plan)
        sigma = math.sqrt((1 - p) / p**2 / s.stats.acceptances)
        assert abs(mean_props - plan.w1) <= 3 * sigma + 1e-3


class TestBestOfM:
    def score_ab(self):
        return TableScore({0: 0.9, 1: 0.1})

    def test_m1_is_base(self, two_state):
        F, _ = two_state
        law = best_of_m_exact_law(F, BestOfMConfig(1, self.score_ab()))
        assert np.allclose(law.mass, F.mass)

    def test_two_state_m2_exact(self, two_state):
        F, _ = two_state
        law = best_of_m_exact_law(F, BestOfMConfig(2, self.score_ab()))
        by_id = dict(zip([s.id for s in law.states], law.mass))
        assert by_id[0] == pytest.approx(0.75, abs=1e-15)
        assert by_id[1] == pytest.approx(0.25, abs=1e-15)

    def test_two_state_m2_monte_carlo(self, two_state):
        F, _ = two_state
        cfg = BestOfMConfig(2, self.score_ab())
        pos = best_of_m_sample_positions(F, cfg, 10**6, np.random.default_rng(0))
        assert abs((pos == 0).mean() - 0.75) <= 0.002

    def test_large_m_concentrates(self, reference_ten_state):
        F, score = reference_ten_state
        law = best_of_m_exact_law(F, BestOfMConfig(200, score))
        by_id = dict(zip([s.id for s in law.states], law.mass))
        assert by_id[9] > 0.99  # argmax-score state

    def test_single_draw_matches_tie_order(self, two_state):
        F, _ = two_state
        cfg = BestOfMConfig(3, self.score_ab())
        rng = np.random.default_rng(7)
        wins = sum(best_of_m_sample(F, cfg, rng).id == 0 for _ in range(20_000))
        assert abs(wins / 20_000 - (1 - 0.5**3)) <= 0.01

    def test_tie_breaks_by_lower_id(self):
        F = make_distribution([0.5, 0.5])
        cfg = BestOfMConfig(4, TableScore({0: 0.5, 1: 0.5}))
        law = best_of_m_exact_law(F, cfg)
        by_id = dict(zip([s.id for s in law.states], law.mass))
        # id 0 wins ties: P(0) = 1 - (1/2)^4
        assert by_id[0] == pytest.approx(1 - 0.5**4, abs=1e-15)

    def test_monte_carlo_matches_exact_law(self, reference_ten_state):
        F, score = reference_ten_state
        cfg = BestOfMConfig(4, score)
        law = best_of_m_exact_law(F, cfg)
        pos = best_of_m_sample_positions(F, cfg, 10**6, np.random.default_rng(11))
        ghat = empirical_from_positions(F, pos)
        assert total_variation(ghat, law) <= 0.005

    @pytest.mark.parametrize("m", [2, 4, 8])
    def test_suboptimal_versus_tight_floor(self, reference_ten_state, m):
        F, score = reference_ten_state
        det = ThresholdDetector(score, 0.5)
        S = det.region(F)
        alpha = F.mass_of(S)
        law = best_of_m_exact_law(F, BestOfMConfig(m, score))
        beta_m = 1.0 - law.mass_of(S)
        kl = f_divergence(law, F, KL)
        floor = kl_lower_bound(ErrorRates(alpha, beta_m))
        assert kl >= floor - 1e-10
        assert kl - floor > 1e-6  # strictly above on the reference instance

    def test_law_sums_to_one(self, reference_ten_state):
        F, score = reference_ten_state
        for m in (1, 2, 3, 7):
            law = best_of_m_exact_law(F, BestOfMConfig(m, score))
            assert abs(math.fsum(law.mass.tolist()) - 1.0) <= 1e-12
