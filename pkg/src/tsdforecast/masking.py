"""Partial-observation masks over agent histories.

Two patterns are supported: random per-frame dropout (simulating tracker
losses) and continuous masking of a prefix (simulating long occlusions). The
current step (last index of the history) is never masked; with no anchor
position the focal-centric frame would be undefined.

Masks are boolean arrays shaped like the histories they apply to, with True
meaning observed. Steps are ordered oldest first, so index ``t_obs - 1`` is
the current step.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .scenario import AgentState, Scenario


@dataclass
class ObservationMask:
    focal: np.ndarray            # (t_obs,) bool
    neighbors: np.ndarray        # (num_neighbors, t_obs) bool
    pattern: str                 # "none" | "random" | "continuous"
    parameter: float             # mask rate, or observed length in steps

    @property
    def t_obs(self) -> int:
        return int(self.focal.shape[0])

    @property
    def num_neighbors(self) -> int:
        return int(self.neighbors.shape[0])


def masked_count(t_obs: int, rate: float) -> int:
    """Number of steps dropped by random masking: round(rate * (t_obs - 1)).

    Half-way cases round up. The current step never counts.
    """
    return int(math.floor(rate * (t_obs - 1) + 0.5))


def no_mask(t_obs: int, num_neighbors: int) -> ObservationMask:
    return ObservationMask(
        focal=np.ones(t_obs, dtype=bool),
        neighbors=np.ones((num_neighbors, t_obs), dtype=bool),
        pattern="none",
        parameter=0.0,
    )


def random_mask(t_obs: int, num_neighbors: int, rate: float, seed: int) -> ObservationMask:
    """Drop round(rate*(t_obs-1)) steps uniformly among the non-current steps.

    Each neighbor row is masked independently with the same scheme.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"rate must be in [0, 1), got {rate}")
    if t_obs < 1:
        raise ValueError(f"t_obs must be >= 1, got {t_obs}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    k = masked_count(t_obs, rate)

    def one_row():
        row = np.ones(t_obs, dtype=bool)
        if k > 0:
            drop = rng.choice(t_obs - 1, size=k, replace=False)
            row[drop] = False
        return row

    focal = one_row()
    neighbors = np.stack([one_row() for _ in range(num_neighbors)]) if num_neighbors else \
        np.ones((0, t_obs), dtype=bool)
    return ObservationMask(focal=focal, neighbors=neighbors, pattern="random", parameter=rate)


def continuous_mask(t_obs: int, num_neighbors: int, observed_len: int) -> ObservationMask:
    """Mask the first t_obs - observed_len steps, identically for all agents."""
    if not 1 <= observed_len <= t_obs:
        raise ValueError(f"observed_len must be in [1, {t_obs}], got {observed_len}")
    row = np.zeros(t_obs, dtype=bool)
    row[t_obs - observed_len:] = True
    neighbors = np.tile(row, (num_neighbors, 1)) if num_neighbors else np.ones((0, t_obs), dtype=bool)
    return ObservationMask(focal=row.copy(), neighbors=neighbors,
                           pattern="continuous", parameter=float(observed_len))


def apply_mask(s: Scenario, m: ObservationMask) -> Scenario:
    """Copy of the scenario with masked states invalidated and zeroed.

    Futures and the map are untouched. Idempotent.
    """
    if m.t_obs != s.t_obs or m.num_neighbors != s.num_neighbors:
        raise ValueError(
            f"mask dims ({m.t_obs}, {m.num_neighbors}) do not match scenario "
            f"({s.t_obs}, {s.num_neighbors})")
    out = copy.deepcopy(s)
    for t, keep in enumerate(m.focal):
        if not keep:
            out.focal_past[t] = AgentState(0.0, 0.0, False)
    for n, row in enumerate(m.neighbors):
        for t, keep in enumerate(row):
            if not keep:
                out.neighbors[n][t] = AgentState(0.0, 0.0, False)
    return out


# ---------------------------------------------------------------------------
# Mask schedules: JSON-friendly descriptions of how to draw masks, e.g.
#   {"pattern": "none"}
#   {"pattern": "random", "rate": 0.4}
#   {"pattern": "continuous", "observed_len": 5}
#   {"pattern": "mixed", "rates": [...], "observed_lens": [...]}
# "mixed" picks uniformly over all listed rates and observed lengths.
# ---------------------------------------------------------------------------

DEFAULT_TRAIN_SCHEDULE = {
    "pattern": "mixed",
    "rates": [0.2, 0.4, 0.6, 0.8],
    "observed_lens": [1, 5, 10, 15],
}


def sample_mask(schedule: dict, t_obs: int, num_neighbors: int, seed: int) -> ObservationMask:
    """Draw one mask from a schedule, deterministic in the seed."""
    pattern = schedule.get("pattern", "none")
    if pattern == "none":
        return no_mask(t_obs, num_neighbors)
    if pattern == "random":
        return random_mask(t_obs, num_neighbors, float(schedule["rate"]), seed)
    if pattern == "continuous":
        return continuous_mask(t_obs, num_neighbors, int(schedule["observed_len"]))
    if pattern == "mixed":
        rates = list(schedule.get("rates", DEFAULT_TRAIN_SCHEDULE["rates"]))
        lens = list(schedule.get("observed_lens", DEFAULT_TRAIN_SCHEDULE["observed_lens"]))
        options = [("random", r) for r in rates] + [("continuous", l) for l in lens]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        kind, param = options[rng.integers(len(options))]
        if kind == "random":
            return random_mask(t_obs, num_neighbors, float(param), seed + 1)
        return continuous_mask(t_obs, num_neighbors, min(int(param), t_obs))
    raise ValueError(f"unknown mask pattern {pattern!r}")
