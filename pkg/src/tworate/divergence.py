"""f-divergences on finite supports and the tight two-point lower bound.

The central quantity is the bound

    alpha * f((1-beta)/alpha) + (1-alpha) * f(beta/(1-alpha))

valid for any convex generator f with f(1) = 0 whenever a detector with
false-positive rate alpha and false-negative rate beta exists, together
with its closed forms for KL, total variation, and Pearson chi-square,
and the comparison against the earlier bound
g1 = -log((alpha+beta)(2-alpha-beta)), which it strictly dominates on
the interior of the feasible region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distribution import FiniteDistribution
from .errors import AbsoluteContinuityError, CoverageError, InfeasibleError

GENERATOR_TOL = 1e-12
CONVEXITY_SLACK = 1e-9


@dataclass(frozen=True)
class FGenerator:
    """Convex generator f with f(1) = 0 plus its limit f(0+)."""

    name: str
    fn: Callable[[float], float]
    value_at_zero: float
    fn_vec: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, t: float) -> float:
        if t == 0.0:
            return self.value_at_zero
        return self.fn(t)

    def apply(self, t: np.ndarray) -> np.ndarray:
        if self.fn_vec is not None:
            out = self.fn_vec(t)
        else:
            out = np.array([self.fn(v) for v in t])
        return np.where(t == 0.0, self.value_at_zero, out)


def check_generator(f: FGenerator, spot_checks: int = 100, seed: int = 12345) -> None:
    """Reject generators violating f(1)=0 or a random convexity spot-check."""
    if abs(f.fn(1.0)) > GENERATOR_TOL:
        raise ValueError(f"generator {f.name!r}: f(1) = {f.fn(1.0)!r}, expected 0")
    rng = np.random.default_rng(seed)
    for _ in range(spot_checks):
        t1, t2 = rng.uniform(1e-6, 10.0, size=2)
        lam = rng.uniform(0.0, 1.0)
        mid = f.fn(lam * t1 + (1.0 - lam) * t2)
        chord = lam * f.fn(t1) + (1.0 - lam) * f.fn(t2)
        if mid > chord + CONVEXITY_SLACK:
            raise ValueError(f"generator {f.name!r} failed a convexity spot-check")


def make_generator(
    name: str,
    fn: Callable[[float], float],
    value_at_zero: float,
    fn_vec: Callable[[np.ndarray], np.ndarray] | None = None,
) -> FGenerator:
    g = FGenerator(name, fn, value_at_zero, fn_vec)
    check_generator(g)
    return g


def _tlogt(t: float) -> float:
    return 0.0 if t == 0.0 else t * math.log(t)


KL = make_generator(
    "kl",
    _tlogt,
    0.0,
    lambda t: np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0),
)
TV = make_generator("tv", lambda t: 0.5 * abs(t - 1.0), 0.5, lambda t: 0.5 * np.abs(t - 1.0))
CHI2 = make_generator("chi2", lambda t: (t - 1.0) ** 2, 1.0, lambda t: (t - 1.0) ** 2)

GENERATORS = {g.name: g for g in (KL, TV, CHI2)}


@dataclass(frozen=True)
class ErrorRates:
    """Feasible (false-positive, false-negative) rate pair."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise InfeasibleError(f"alpha must be > 0, got {self.alpha}")
        if not (0.0 <= self.beta <= 1.0):
            raise InfeasibleError(f"beta must lie in [0, 1], got {self.beta}")
        if self.alpha > 1.0 - self.beta:
            raise InfeasibleError(
                f"feasibility requires alpha <= 1 - beta; "
                f"got alpha={self.alpha}, beta={self.beta}"
            )


def f_divergence(G: FiniteDistribution, F: FiniteDistribution, f: FGenerator) -> float:
    """Sum_x F(x) f(G(x)/F(x)) with the f(0+) convention off supp(G)."""
    if G.support_key is not F.support_key:
        raise CoverageError("G and F live on different supports")
    fi = F.index
    outside = [i for i in G.index if i not in fi]
    if outside:
        raise AbsoluteContinuityError(
            f"G puts mass on states outside supp(F): {sorted(outside)[:10]}"
        )
    gmass = np.zeros(len(F))
    for i, pos in G.index.items():
        gmass[fi[i]] = G.mass[pos]
    if f.name == "kl":
        # log-mass differences avoid forming tiny ratios
        pos = gmass > 0.0
        glog = np.log(gmass[pos])
        terms = gmass[pos] * (glog - F.log_mass[pos])
        return math.fsum(terms.tolist())
    ratio = gmass / F.mass
    terms = F.mass * f.apply(ratio)
    return math.fsum(terms.tolist())


def bernoulli_f_divergence(a: float, q: float, f: FGenerator) -> float:
    """Divergence of Bernoulli(q) from Bernoulli(a): a f(q/a) + (1-a) f((1-q)/(1-a))."""
    if not (0.0 < a < 1.0):
        raise InfeasibleError(f"reference rate must lie in (0, 1), got {a}")
    if not (0.0 <= q <= 1.0):
        raise InfeasibleError(f"coarse-grained mass must lie in [0, 1], got {q}")
    return a * f(q / a) + (1.0 - a) * f((1.0 - q) / (1.0 - a))


def lower_bound(f: FGenerator, r: ErrorRates) -> float:
    """Tight fidelity floor: alpha f((1-beta)/alpha) + (1-alpha) f(beta/(1-alpha))."""
    a, b = r.alpha, r.beta
    total = a * f((1.0 - b) / a)
    if a < 1.0:
        total += (1.0 - a) * f(b / (1.0 - a))
    return total


def kl_lower_bound(r: ErrorRates) -> float:
    """Closed KL form (1-beta) log((1-beta)/alpha) + beta log(beta/(1-alpha)).

    beta = 0 uses the 0 log 0 = 0 convention. An alpha of exactly 0 is
    unrepresentable in ErrorRates; the bound diverges there (math.inf).
    """
    a, b = r.alpha, r.beta
    first = (1.0 - b) * math.log((1.0 - b) / a) if b < 1.0 else 0.0
    second = b * math.log(b / (1.0 - a)) if b > 0.0 else 0.0
    return first + second


def tv_lower_bound(r: ErrorRates) -> float:
    return 1.0 - r.alpha - r.beta


def chi2_lower_bound(r: ErrorRates) -> float:
    if not (r.alpha < 1.0):
        raise InfeasibleError("chi-square bound needs alpha < 1")
    return (1.0 - r.alpha - r.beta) ** 2 / (r.alpha * (1.0 - r.alpha))


def bound_for(name: str, r: ErrorRates) -> float:
    if name == "kl":
        return kl_lower_bound(r)
    if name == "tv":
        return tv_lower_bound(r)
    if name == "chi2":
        return chi2_lower_bound(r)
    return lower_bound(GENERATORS[name], r)


def cai_bound(r: ErrorRates) -> float:
    """Earlier KL floor g1 = -log((alpha+beta)(2-alpha-beta))."""
    s = r.alpha + r.beta
    if not (0.0 < s < 1.0):
        raise InfeasibleError(f"g1 needs 0 < alpha + beta < 1, got {s}")
    return -math.log(s * (2.0 - s))


@dataclass(frozen=True)
class BoundComparison:
    g1: float
    g2: float

    @property
    def margin(self) -> float:
        return self.g2 - self.g1


def compare_bounds(r: ErrorRates) -> BoundComparison:
    """g2 (tight KL floor) against g1; margin is strictly positive inside."""
    if r.beta <= 0.0:
        raise InfeasibleError("comparison needs beta > 0")
    return BoundComparison(g1=cai_bound(r), g2=kl_lower_bound(r))
