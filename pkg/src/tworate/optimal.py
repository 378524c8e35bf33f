"""Watermark plans and the exact optimal watermarked distribution.

A plan fixes (F, S, alpha = F(S), beta) and derives the two density
ratios w1 = (1-beta)/alpha on S and w0 = beta/(1-alpha) off S. Tilting F
by those ratios yields the distribution that meets both error
constraints with equality at the minimum possible f-divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detector import ThresholdDetector
from .distribution import FiniteDistribution, State, StateSet
from .divergence import ErrorRates, FGenerator, f_divergence, lower_bound
from .errors import CoverageError, InfeasibleError

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class WatermarkPlan:
    base: FiniteDistribution
    region: StateSet
    alpha: float
    beta: float
    w1: float
    w0: float

    def rates(self) -> ErrorRates:
        return ErrorRates(self.alpha, self.beta)

    def in_region_mask(self) -> np.ndarray:
        return np.fromiter(
            (s.id in self.region for s in self.base.states),
            dtype=bool,
            count=len(self.base),
        )

    def to_json_obj(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "w1": self.w1,
            "w0": self.w0,
            "region_ids": sorted(self.region.ids),
            "seedless": True,
        }


def make_plan(F: FiniteDistribution, region: StateSet, beta: float) -> WatermarkPlan:
    """Plan from an explicit detection region; alpha is the achieved F(S)."""
    if not (0.0 <= beta <= 1.0):
        raise InfeasibleError(f"beta must lie in [0, 1], got {beta}")
    alpha = F.mass_of(region)
    if alpha == 0.0:
        raise InfeasibleError("undetectable: the detection region has zero F-mass")
    if alpha >= 1.0:
        raise InfeasibleError(
            "degenerate region: F(S) = 1 leaves no undetected mass to reweight"
        )
    if alpha > 1.0 - beta:
        raise InfeasibleError(
            f"infeasible: alpha <= 1 - beta violated (alpha={alpha}, beta={beta})"
        )
    w1 = (1.0 - beta) / alpha
    w0 = beta / (1.0 - alpha)
    assert abs(alpha * w1 + (1.0 - alpha) * w0 - 1.0) <= WEIGHT_TOL
    return WatermarkPlan(F, region, alpha, beta, w1, w0)


def build_plan(
    F: FiniteDistribution, d: ThresholdDetector, beta: float
) -> WatermarkPlan:
    return make_plan(F, d.region(F), beta)


def optimal_distribution(plan: WatermarkPlan) -> FiniteDistribution:
    """The tilted distribution: w1*F on the region, w0*F off it.

    With beta = 0 the off-region states carry zero mass and are dropped,
    leaving F conditioned on the detection region.
    """
    mask = plan.in_region_mask()
    mass = np.where(mask, plan.w1 * plan.base.mass, plan.w0 * plan.base.mass)
    keep = mass > 0.0
    states = [s for s, k in zip(plan.base.states, keep) if k]
    mass = mass[keep]
    mass = mass / math.fsum(mass.tolist())
    return FiniteDistribution(states, mass, plan.base.support_key)


def density_ratio(plan: WatermarkPlan, x: State) -> float:
    if x.id not in plan.base.index:
        raise CoverageError(f"state id {x.id} is not in the plan's base support")
    return plan.w1 if x.id in plan.region else plan.w0


@dataclass(frozen=True)
class AttainmentCheck:
    achieved: float
    bound: float

    @property
    def gap(self) -> float:
        return self.achieved - self.bound


def verify_attainment(plan: WatermarkPlan, f: FGenerator) -> AttainmentCheck:
    """Divergence actually incurred by the tilt versus the theoretical floor."""
    g = optimal_distribution(plan)
    return AttainmentCheck(
        achieved=f_divergence(g, plan.base, f),
        bound=lower_bound(f, plan.rates()),
    )
