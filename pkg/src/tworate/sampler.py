"""Two-rate acceptance sampling and the best-of-m baseline.

The rejection sampler proposes from the base distribution and accepts
detected proposals with probability 1, undetected ones with probability
w0/w1; accepted draws are distributed exactly as the optimal tilt. The
best-of-m baseline keeps the highest-scoring of m base draws and comes
with its exact law for evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distribution import FiniteDistribution, State
from .errors import BudgetExceededError
from .optimal import WatermarkPlan

DEFAULT_PROPOSAL_BUDGET = 10_000_000


@dataclass
class SamplerStats:
    proposals: int = 0
    acceptances: int = 0

    @property
    def rate(self) -> float:
        return self.acceptances / self.proposals if self.proposals else math.nan

    def merge(self, other: "SamplerStats") -> "SamplerStats":
        return SamplerStats(
            self.proposals + other.proposals,
            self.acceptances + other.acceptances,
        )

    def to_json_obj(self) -> dict:
        return {
            "proposals": self.proposals,
            "acceptances": self.acceptances,
            "rate": self.rate,
        }


def expected_acceptance(plan: WatermarkPlan) -> float:
    """Per-proposal acceptance probability alpha/(1-beta) = 1/w1."""
    return plan.alpha / (1.0 - plan.beta)


class RejectionSampler:
    """Exact sampler for the optimal watermarked distribution.

    The acceptance variate is drawn only on the undetected branch, so
    seed reproducibility depends on that exact consumption pattern.
    sample() follows it proposal by proposal; sample_positions() is the
    vectorized form (chunked, deterministic per seed, but with its own
    RNG consumption order).
    """

    def __init__(self, plan: WatermarkPlan, max_proposals: int = DEFAULT_PROPOSAL_BUDGET):
        self.plan = plan
        self.max_proposals = max_proposals
        self.accept_ratio = plan.w0 / plan.w1
        self.stats = SamplerStats()
        self._cum = plan.base.cumulative
        self._in_region = plan.in_region_mask()

    def sample(self, rng: np.random.Generator) -> State:
        spent = 0
        while spent < self.max_proposals:
            pos = int(np.searchsorted(self._cum, rng.random(), side="right"))
            spent += 1
            self.stats.proposals += 1
            if self._in_region[pos] or rng.random() < self.accept_ratio:
                self.stats.acceptances += 1
                return self.plan.base.states[pos]
        raise BudgetExceededError(
            f"no acceptance within {self.max_proposals} proposals "
            f"(expected ~{1.0 / expected_acceptance(self.plan):.3g} per sample)"
        )

    def sample_positions(
        self, n: int, rng: np.random.Generator, chunk: int = 1 << 16
    ) -> np.ndarray:
        """n accepted draws as positions into the base support."""
        out = np.empty(n, dtype=np.int64)
        got = 0
        spent = 0
        while got < n:
            if spent >= self.max_proposals:
                raise BudgetExceededError(
                    f"proposal budget {self.max_proposals} exhausted after "
                    f"{got} of {n} acceptances"
                )
            m = min(chunk, self.max_proposals - spent)
            pos = np.searchsorted(self._cum, rng.random(m), side="right")
            detected = self._in_region[pos]
            accept = detected.copy()
            n_undetected = int((~detected).sum())
            if n_undetected:
                accept[~detected] = rng.random(n_undetected) < self.accept_ratio
            kept = pos[accept]
            take = min(len(kept), n - got)
            out[got : got + take] = kept[:take]
            got += take
            spent += m
            self.stats.proposals += m
            self.stats.acceptances += int(accept.sum())
        return out

    def sample_states(self, n: int, rng: np.random.Generator) -> list[State]:
        return [self.plan.base.states[int(p)] for p in self.sample_positions(n, rng)]


def sample_watermarked(sampler: RejectionSampler, rng: np.random.Generator) -> State:
    return sampler.sample(rng)


@dataclass(frozen=True)
class BestOfMConfig:
    """m candidates, winner by (score desc, state id asc)."""

    m: int
    score: object

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")


def _preference(F: FiniteDistribution, cfg: BestOfMConfig) -> np.ndarray:
    """Rank per support position; larger wins under the fixed tie order."""
    scores = cfg.score.scores(F)
    ids = np.array([s.id for s in F.states])
    # worst-to-best: ascending score, descending id on ties
    order = np.lexsort((-ids, scores))
    pref = np.empty(len(F), dtype=np.int64)
    pref[order] = np.arange(len(F))
    return pref


def best_of_m_sample(
    F: FiniteDistribution, cfg: BestOfMConfig, rng: np.random.Generator
) -> State:
    pref = _preference(F, cfg)
    pos = F.sample_positions(cfg.m, rng)
    best = pos[int(np.argmax(pref[pos]))]
    return F.states[int(best)]


def best_of_m_sample_positions(
    F: FiniteDistribution, cfg: BestOfMConfig, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n independent best-of-m winners, as positions into F's support."""
    pref = _preference(F, cfg)
    pos = F.sample_positions(n * cfg.m, rng).reshape(n, cfg.m)
    winners = pos[np.arange(n), np.argmax(pref[pos], axis=1)]
    return winners


def best_of_m_exact_law(F: FiniteDistribution, cfg: BestOfMConfig) -> FiniteDistribution:
    """Closed-form law of the best-of-m winner.

    Ordering states worst to best, P(x) = C(x)^m - C(x-)^m with C the
    cumulative F-mass up to and including x.
    """
    pref = _preference(F, cfg)
    order = np.argsort(pref)  # worst first
    cum = np.cumsum(F.mass[order])
    cum[-1] = 1.0
    prev = np.concatenate(([0.0], cum[:-1]))
    p_ordered = cum**cfg.m - prev**cfg.m
    mass = np.empty(len(F))
    mass[order] = p_ordered
    mass = mass / math.fsum(mass.tolist())
    return FiniteDistribution(F.states, mass, F.support_key)
