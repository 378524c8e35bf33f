"""KL-regularized policy optimization over a tabular softmax policy.

The objective J(pi) = E_pi[r] - KL(pi || F) with reward r(x) = A * 1{x in S},
A = log((1-beta)(1-alpha)/(alpha*beta)), has the exponential tilt of F as
its unique maximizer, which coincides with the optimal watermarked
distribution. Gradients are exact (finite support), so full-batch ascent
recovers the maximizer; the default exponentiated-gradient update
contracts the error geometrically regardless of conditioning.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distribution import FiniteDistribution, StateSet
from .divergence import ErrorRates, KL, f_divergence
from .errors import CoverageError, InfeasibleError
from .optimal import WatermarkPlan


def reward_coefficient(r: ErrorRates) -> float:
    """A = log((1-beta)(1-alpha)/(alpha*beta)); finite only for interior rates."""
    a, b = r.alpha, r.beta
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise InfeasibleError(
            f"degenerate reward: needs 0 < alpha < 1 and 0 < beta < 1 "
            f"(got alpha={a}, beta={b}); the rejection sampler handles beta = 0"
        )
    return math.log((1.0 - b) * (1.0 - a) / (a * b))


@dataclass(frozen=True)
class RewardSpec:
    """Reward r(x) = coefficient * 1{x in region}."""

    coefficient: float
    region: StateSet

    @classmethod
    def for_plan(cls, plan: WatermarkPlan) -> "RewardSpec":
        return cls(reward_coefficient(plan.rates()), plan.region)

    def vector(self, F: FiniteDistribution) -> np.ndarray:
        if self.region.support_key is not F.support_key:
            raise CoverageError("reward region belongs to a different support")
        mask = np.fromiter(
            (s.id in self.region for s in F.states), dtype=bool, count=len(F)
        )
        return np.where(mask, self.coefficient, 0.0)


class SoftmaxPolicy:
    """pi(x) = exp(logit_x) / sum exp over the base support."""

    __slots__ = ("base", "logits")

    def __init__(self, base: FiniteDistribution, logits: np.ndarray):
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != (len(base),):
            raise ValueError("logits must align with the base support")
        self.base = base
        self.logits = logits

    @property
    def probs(self) -> np.ndarray:
        z = self.logits - self.logits.max()
        e = np.exp(z)
        return e / e.sum()

    def distribution(self) -> FiniteDistribution:
        return FiniteDistribution(self.base.states, self.probs, self.base.support_key)

    def to_json_obj(self) -> dict:
        return {
            "logits": self.logits.tolist(),
            "support_ids": [s.id for s in self.base.states],
        }


def objective(pi: SoftmaxPolicy, F: FiniteDistribution, reward: RewardSpec) -> float:
    """J(pi) = E_pi[r] - KL(pi || F)."""
    if pi.base.support_key is not F.support_key:
        raise CoverageError("policy and base live on different supports")
    p = pi.probs
    r = reward.vector(F)
    val = float(np.dot(p, r - np.log(p) + F.log_mass))
    if math.isnan(val):
        raise ArithmeticError("objective evaluated to NaN")
    return val


def objective_gradient(
    pi: SoftmaxPolicy, F: FiniteDistribution, reward: RewardSpec
) -> np.ndarray:
    """Exact dJ/dlogits: pi_k * (g_k - J) with g = r + log F - log pi."""
    p = pi.probs
    g = reward.vector(F) + F.log_mass - np.log(p)
    j = float(np.dot(p, g))
    return p * (g - j)


def gibbs_solution(F: FiniteDistribution, reward: RewardSpec) -> FiniteDistribution:
    """Normalized exponential tilt F(x) e^{r(x)} / Z, the unique maximizer."""
    r = reward.vector(F)
    w = F.mass * np.exp(r - r.max())
    return FiniteDistribution(F.states, w / math.fsum(w.tolist()), F.support_key)


@dataclass(frozen=True)
class TrainConfig:
    """Constant-step ascent settings.

    method "mirror" preconditions the exact gradient by 1/pi
    (exponentiated-gradient ascent), contracting the error uniformly by
    (1 - learning_rate) per step; "plain" takes raw logit-gradient steps,
    whose rate degrades with the smallest target mass.
    """

    learning_rate: float = 0.5
    max_iters: int = 5000
    tol: float = 1e-9
    method: str = "mirror"

    def __post_init__(self):
        if self.method not in ("mirror", "plain"):
            raise ValueError(f"unknown training method {self.method!r}")


@dataclass(frozen=True)
class TrainReport:
    iterations: int
    final_objective: float
    kl_to_target: float
    converged: bool

    def to_json_obj(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_objective": self.final_objective,
            "kl_to_target": self.kl_to_target,
            "converged": self.converged,
        }


def train(
    F: FiniteDistribution,
    reward: RewardSpec,
    config: TrainConfig | None = None,
) -> tuple[SoftmaxPolicy, TrainReport]:
    """Gradient ascent from logits = log F until the gradient sup-norm <= tol.

    Logits are mean-centered each step to pin the softmax shift gauge.
    Non-convergence is reported, not raised.
    """
    cfg = config or TrainConfig()
    if cfg.tol <= 0:
        raise ValueError("tol must be positive")
    pi = SoftmaxPolicy(F, F.log_mass.copy())
    r_vec = reward.vector(F)
    converged = False
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        p = pi.probs
        g = r_vec + F.log_mass - np.log(p)
        j = float(np.dot(p, g))
        grad = p * (g - j)
        if np.any(~np.isfinite(grad)):
            raise ArithmeticError("non-finite gradient during training")
        if float(np.abs(grad).max()) <= cfg.tol:
            converged = True
            break
        step = (g - j) if cfg.method == "mirror" else grad
        logits = pi.logits + cfg.learning_rate * step
        pi = SoftmaxPolicy(F, logits - logits.mean())
    target = gibbs_solution(F, reward)
    report = TrainReport(
        iterations=iters,
        final_objective=objective(pi, F, reward),
        kl_to_target=f_divergence(pi.distribution(), target, KL),
        converged=converged,
    )
    return pi, report


def export_policy(pi: SoftmaxPolicy, report: TrainReport, fp) -> None:
    json.dump({"policy": pi.to_json_obj(), "report": report.to_json_obj()}, fp, indent=2)
    fp.write("\n")
