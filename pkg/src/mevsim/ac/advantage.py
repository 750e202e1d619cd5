"""Distinguishing advantage between two wirings, exact and Monte Carlo."""

from __future__ import annotations

import math
from dataclasses import dataclass

from mevsim.ac.core import Wiring
from mevsim.ac.randomness import derive_seed
from mevsim.ac.scheduler import DEFAULT_BUDGET, Distinguisher, exact_distribution, run

Z95 = 1.959963984540054


def guess_zero_probability(w: Wiring, d: Distinguisher, **kwargs) -> float:
    return exact_distribution(w, d, **kwargs).get(0, 0.0)


def advantage_exact(wA: Wiring, wB: Wiring, d: Distinguisher, **kwargs) -> float:
    """|Pr[d guesses 0 on wA] - Pr[d guesses 0 on wB]| by exhaustive enumeration."""
    pa = guess_zero_probability(wA, d, **kwargs)
    pb = guess_zero_probability(wB, d, **kwargs)
    return float(min(abs(pa - pb), 1.0))


def hoeffding_halfwidth(trials: int, alpha: float = 0.05) -> float:
    """Two-sided Hoeffding deviation bound for a difference of two means of ``trials`` bits each."""
    return math.sqrt(math.log(2 / alpha) / trials)


@dataclass(frozen=True)
class AdvantageEstimate:
    estimate: float
    ci95: float
    hoeffding: float
    p_a: float
    p_b: float
    trials: int

    def __iter__(self):
        yield self.estimate
        yield self.ci95


def trial_seed(seed: int, trial: int, world: int = 0) -> int:
    return derive_seed(seed, trial, world)


def advantage_estimate(
    wA: Wiring,
    wB: Wiring,
    d: Distinguisher,
    trials: int,
    seed: int,
    *,
    budget: int = DEFAULT_BUDGET,
) -> AdvantageEstimate:
    """Monte Carlo advantage with a normal-approximation 95% CI and the Hoeffding bound."""
    if trials < 100:
        raise ValueError(f"advantage_estimate needs at least 100 trials, got {trials}")
    zeros_a = sum(run(wA, d, trial_seed(seed, i, 0), budget=budget).guess == 0 for i in range(trials))
    zeros_b = sum(run(wB, d, trial_seed(seed, i, 1), budget=budget).guess == 0 for i in range(trials))
    pa, pb = zeros_a / trials, zeros_b / trials
    ci = Z95 * math.sqrt(pa * (1 - pa) / trials + pb * (1 - pb) / trials)
    return AdvantageEstimate(abs(pa - pb), ci, hoeffding_halfwidth(trials), pa, pb, trials)
