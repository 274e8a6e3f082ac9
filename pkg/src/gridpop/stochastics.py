"""Probabilistic substrate: seeded RNG, clock arithmetic, hazard conversion, sampling.

All randomness in a run flows through a single numpy Generator (PCG64),
created by make_rng(seed). Identical seeds reproduce identical draw
sequences across runs and platforms for a pinned numpy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Rng = np.random.Generator

# Steps per year for the named clocks. Weekly uses the conventional 52.
CLOCK_STEPS_PER_YEAR = {
    "hourly": 8760,
    "daily": 365,
    "weekly": 52,
    "monthly": 12,
}

# Yearly probabilities of exactly 1 would make the per-step hazard infinite.
_CERTAINTY_CLAMP = 1.0 - 1e-9

# Half-normal initial-age draws above this are redrawn (unbounded tail guard).
DEFAULT_MAX_INITIAL_AGE_YEARS = 110.0


@dataclass(frozen=True)
class ClockSpec:
    """Fixed simulation step size expressed as steps per year."""

    kind: str
    steps_per_year: int

    def __post_init__(self) -> None:
        if self.steps_per_year < 1:
            raise ValueError("steps_per_year must be >= 1")
        if self.kind in CLOCK_STEPS_PER_YEAR and self.steps_per_year != CLOCK_STEPS_PER_YEAR[self.kind]:
            raise ValueError(f"clock {self.kind!r} must have {CLOCK_STEPS_PER_YEAR[self.kind]} steps/year")

    @classmethod
    def hourly(cls) -> "ClockSpec":
        return cls("hourly", 8760)

    @classmethod
    def daily(cls) -> "ClockSpec":
        return cls("daily", 365)

    @classmethod
    def weekly(cls) -> "ClockSpec":
        return cls("weekly", 52)

    @classmethod
    def monthly(cls) -> "ClockSpec":
        return cls("monthly", 12)

    @classmethod
    def custom(cls, steps_per_year: int) -> "ClockSpec":
        return cls("custom", int(steps_per_year))

    @classmethod
    def parse(cls, text: str) -> "ClockSpec":
        """Parse 'hourly'|'daily'|'weekly'|'monthly'|'custom:N'."""
        text = text.strip()
        if text in CLOCK_STEPS_PER_YEAR:
            return cls(text, CLOCK_STEPS_PER_YEAR[text])
        if text.startswith("custom:"):
            try:
                n = int(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad custom clock spec: {text!r}") from None
            return cls.custom(n)
        raise ValueError(f"unknown clock spec: {text!r}")

    def __str__(self) -> str:
        if self.kind == "custom":
            return f"custom:{self.steps_per_year}"
        return self.kind


def make_rng(seed: int) -> Rng:
    """Create the run's random generator (PCG64) from a 64-bit seed."""
    return np.random.default_rng(seed)


def instantaneous_probability(p_yearly: float, clock: ClockSpec) -> float:
    """Convert a yearly probability to the equivalent per-step probability.

    Uses the exponential-hazard conversion -ln(1 - p) / steps_per_year so
    that compounding over one year of steps recovers ~p_yearly. Inputs at
    exactly 1 are clamped just below to keep the hazard finite; the result
    is clamped into [0, 1].
    """
    if not 0.0 <= p_yearly <= 1.0:
        raise ValueError(f"yearly probability outside [0, 1]: {p_yearly}")
    p = min(p_yearly, _CERTAINTY_CLAMP)
    per_step = -math.log1p(-p) / clock.steps_per_year
    return min(max(per_step, 0.0), 1.0)


def instantaneous_probability_array(p_yearly: np.ndarray, steps_per_year: int) -> np.ndarray:
    """Vectorized instantaneous_probability; callers pre-clamp inputs to [0, 1]."""
    p = np.minimum(p_yearly, _CERTAINTY_CLAMP)
    return np.clip(-np.log1p(-p) / steps_per_year, 0.0, 1.0)


def bernoulli(rng: Rng, p: float) -> bool:
    """True with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {p}")
    return bool(rng.random() < p)


def weighted_sample(rng: Rng, items, weights):
    """Pick one item with probability weight_i / sum(weights).

    weights must be non-negative with a positive total; zero-weight items
    are never returned.
    """
    if len(items) == 0:
        raise ValueError("weighted_sample from empty sequence")
    if len(items) != len(weights):
        raise ValueError("items and weights differ in length")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("negative weight")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("all weights are zero")
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
    # Guard against the draw landing exactly on the total due to rounding.
    idx = min(idx, len(items) - 1)
    while w[idx] == 0.0:  # searchsorted may land on a trailing zero-weight slot
        idx -= 1
    return items[idx]


def shuffle(rng: Rng, items) -> list:
    """Return a new uniformly permuted list of items."""
    out = list(items)
    rng.shuffle(out)
    return out


def sample_indices_without_replacement(rng: Rng, n: int, k: int) -> np.ndarray:
    """k distinct indices drawn uniformly from range(n); k is capped at n."""
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    return rng.choice(n, size=k, replace=False)


def sample_half_normal_age_steps(
    rng: Rng,
    clock: ClockSpec,
    size: int,
    max_age_years: float = DEFAULT_MAX_INITIAL_AGE_YEARS,
) -> np.ndarray:
    """Draw initial ages in steps: |floor(Normal(0, 25 * steps_per_year))|.

    The half-normal has mean 25*sqrt(2/pi) ~ 19.95 years. Draws at or above
    max_age_years are redrawn (the unbounded tail admits unrealistic ages
    with tiny probability).
    """
    n = clock.steps_per_year
    cap_steps = int(max_age_years * n)
    out = np.abs(np.floor(rng.normal(0.0, 25.0 * n, size=size))).astype(np.int64)
    while True:
        over = out >= cap_steps
        count = int(over.sum())
        if count == 0:
            return out
        out[over] = np.abs(np.floor(rng.normal(0.0, 25.0 * n, size=count))).astype(np.int64)


def sample_half_normal_age(
    rng: Rng,
    clock: ClockSpec,
    max_age_years: float = DEFAULT_MAX_INITIAL_AGE_YEARS,
) -> float:
    """Single initial-age draw in years (a multiple of 1/steps_per_year)."""
    steps = sample_half_normal_age_steps(rng, clock, size=1, max_age_years=max_age_years)
    return float(steps[0]) / clock.steps_per_year
