"""Synthetic driving scenarios: kinematic maneuvers over a small polyline map.

Each scenario is built around one focal agent observed for ``t_obs`` steps and
predicted for ``t_pred`` steps, in the focal-centric frame (position at the
current step is the origin, heading along +x). The focal agent performs one of
four maneuvers (straight, left turn, right turn, stop); the map is a small
intersection whose lanes include the centerline consistent with the maneuver
plus distractor lanes. Surrounding agents are independent kinematic rollouts.

All randomness flows through ``numpy.random.Generator`` (PCG64) seeded from
``(config.seed, scenario_id)``, so generation is reproducible across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

MANEUVERS = ("straight", "left_turn", "right_turn", "stop")

# Lane shapes are geometric paths; a stopping agent still sits on a straight
# lane, so "stop" maps onto the straight shape for map construction.
_LANE_SHAPE = {
    "straight": "straight",
    "left_turn": "left_turn",
    "right_turn": "right_turn",
    "stop": "straight",
}


@dataclass
class AgentState:
    """Single timestep of an agent. Coordinates are meaningless when invalid."""

    x: float
    y: float
    valid: bool = True


@dataclass
class GeneratorConfig:
    t_obs: int = 20
    t_pred: int = 30
    num_neighbors: int = 8
    num_polylines: int = 3
    speed_range: tuple[float, float] = (0.3, 1.5)
    turn_rate_range: tuple[float, float] = (0.02, 0.10)
    noise_std: float = 0.05
    maneuver_mix: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    seed: int = 0
    # Step (relative to the current frame, <= 0) at which turns/deceleration
    # may begin. None defaults to (-t_obs // 2, 0).
    onset_range: tuple[int, int] | None = None
    # Deceleration (m/step^2) used by the stop maneuver. None derives it from
    # a stop time drawn uniformly in [1, t_pred].
    stop_decel_range: tuple[float, float] | None = None

    def validate(self):
        if self.t_obs < 1 or self.t_pred < 1:
            raise ValueError(f"t_obs and t_pred must be >= 1, got {self.t_obs}, {self.t_pred}")
        if self.num_neighbors < 0 or self.num_polylines < 1:
            raise ValueError("num_neighbors must be >= 0 and num_polylines >= 1")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if len(self.maneuver_mix) != len(MANEUVERS):
            raise ValueError(f"maneuver_mix needs {len(MANEUVERS)} entries")
        if any(p < 0 for p in self.maneuver_mix):
            raise ValueError("maneuver_mix entries must be non-negative")
        if abs(sum(self.maneuver_mix) - 1.0) > 1e-9:
            raise ValueError(f"maneuver_mix must sum to 1, got {sum(self.maneuver_mix)}")
        if self.speed_range[0] > self.speed_range[1] or self.speed_range[0] <= 0:
            raise ValueError(f"bad speed_range {self.speed_range}")
        if self.turn_rate_range[0] > self.turn_rate_range[1] or self.turn_rate_range[0] <= 0:
            raise ValueError(f"bad turn_rate_range {self.turn_rate_range}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.onset_range is not None and self.onset_range[0] > self.onset_range[1]:
            raise ValueError(f"bad onset_range {self.onset_range}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        kwargs = dict(d)
        for key in ("speed_range", "turn_rate_range", "maneuver_mix", "onset_range", "stop_decel_range"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs).validate()


@dataclass
class Scenario:
    focal_past: list[AgentState]
    focal_future: list[AgentState]
    neighbors: list[list[AgentState]]
    neighbor_futures: list[list[AgentState]]
    map_polylines: list[list[tuple[float, float]]]
    maneuver_label: str
    scenario_id: int

    @property
    def t_obs(self) -> int:
        return len(self.focal_past)

    @property
    def t_pred(self) -> int:
        return len(self.focal_future)

    @property
    def num_neighbors(self) -> int:
        return len(self.neighbors)


def rollout(maneuver: str, speed: float, turn_rate: float, decel: float,
            t_obs: int, t_pred: int, onset: int = 0) -> np.ndarray:
    """Noise-free maneuver kinematics in the natural (approach) frame.

    Returns positions of shape (t_obs + t_pred, 2) for steps
    t = -(t_obs-1) .. t_pred. The agent approaches along +x at constant
    ``speed``; from step ``onset`` (<= 0) onward a turn accumulates heading
    ``turn_rate`` per step, or the stop maneuver sheds ``decel`` speed per
    step. Each step moves by the current speed along the heading held at the
    start of the step.
    """
    if maneuver not in MANEUVERS:
        raise ValueError(f"unknown maneuver {maneuver!r}")
    if onset > 0:
        raise ValueError(f"onset must be <= 0, got {onset}")
    total = t_obs + t_pred
    start = -(t_obs - 1)
    pos = np.zeros((total, 2))
    p = np.array([float(start) * speed, 0.0])
    v = speed
    pos[0] = p
    for i in range(1, total):
        t = start + i  # step index being entered
        if maneuver in ("left_turn", "right_turn") and t > onset:
            sign = 1.0 if maneuver == "left_turn" else -1.0
            step_heading = sign * turn_rate * (t - 1 - onset)
            p = p + v * np.array([math.cos(step_heading), math.sin(step_heading)])
        elif maneuver == "stop" and t > onset:
            v = max(0.0, speed - decel * (t - onset))
            p = p + np.array([v, 0.0])
        else:
            p = p + np.array([v, 0.0])
        pos[i] = p
    return pos


def rollout_heading(maneuver: str, turn_rate: float, onset: int, t: int) -> float:
    """Analytic heading at integer step t for the rollout above."""
    if maneuver == "left_turn" and t > onset:
        return turn_rate * (t - onset)
    if maneuver == "right_turn" and t > onset:
        return -turn_rate * (t - onset)
    return 0.0


def _to_focal_frame(points: np.ndarray, origin: np.ndarray, heading: float) -> np.ndarray:
    """Rigid transform taking (origin, heading) to (0, +x)."""
    c, s = math.cos(-heading), math.sin(-heading)
    rot = np.array([[c, -s], [s, c]])
    return (points - origin) @ rot.T


def _clipped_noise(rng: np.random.Generator, std: float, n: int) -> np.ndarray:
    """Gaussian noise with norm clipped at 1.5*std.

    The clip guarantees consecutive displacements stay within
    speed_max + 3*std of the clean kinematics.
    """
    noise = rng.normal(0.0, std, size=(n, 2)) if std > 0 else np.zeros((n, 2))
    if std > 0:
        norms = np.linalg.norm(noise, axis=1)
        cap = 1.5 * std
        over = norms > cap
        noise[over] *= (cap / norms[over])[:, None]
    return noise


def _sample_maneuver_params(cfg: GeneratorConfig, rng: np.random.Generator, maneuver: str):
    speed = rng.uniform(*cfg.speed_range)
    turn_rate = rng.uniform(*cfg.turn_rate_range)
    if cfg.stop_decel_range is not None:
        decel = rng.uniform(*cfg.stop_decel_range)
    else:
        decel = speed / rng.uniform(1.0, cfg.t_pred)
    lo, hi = cfg.onset_range if cfg.onset_range is not None else (-(cfg.t_obs // 2), 0)
    onset = int(rng.integers(lo, hi + 1)) if maneuver != "straight" else 0
    return speed, turn_rate, decel, onset


def _lane_centerline(shape: str, speed: float, turn_rate: float, onset: int,
                     t_obs: int, t_pred: int) -> np.ndarray:
    """Lane path through the scene, extended beyond the prediction horizon."""
    ext = max(2, t_pred // 4)
    return rollout(shape, speed, turn_rate, 0.0, t_obs, t_pred + ext, onset)


def generate_scenario(cfg: GeneratorConfig, scenario_id: int) -> Scenario:
    """Generate one scenario, deterministic in (cfg.seed, scenario_id)."""
    cfg.validate()
    if scenario_id < 0:
        raise ValueError("scenario_id must be non-negative")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, scenario_id])))

    maneuver = MANEUVERS[rng.choice(len(MANEUVERS), p=np.asarray(cfg.maneuver_mix, dtype=float))]
    speed, turn_rate, decel, onset = _sample_maneuver_params(cfg, rng, maneuver)

    clean = rollout(maneuver, speed, turn_rate, decel, cfg.t_obs, cfg.t_pred, onset)
    anchor = clean[cfg.t_obs - 1].copy()
    anchor_heading = rollout_heading(maneuver, turn_rate, onset, 0)

    # Lanes: the true lane shape plus distractors, all passing through the
    # focal pose, in a shuffled order so lane index carries no information.
    # The true lane is generated alongside the trajectory and mapped into the
    # focal frame; distractors are rolled out from the focal pose directly
    # (onset 0 puts their current step at the origin, heading +x).
    true_shape = _LANE_SHAPE[maneuver]
    true_lane = _lane_centerline(true_shape, speed, turn_rate, onset, cfg.t_obs, cfg.t_pred)
    lanes = [_to_focal_frame(true_lane, anchor, anchor_heading)]
    other_shapes = [s for s in ("straight", "left_turn", "right_turn") if s != true_shape]
    for i in range(cfg.num_polylines - 1):
        shape = other_shapes[i % len(other_shapes)]
        lanes.append(_lane_centerline(shape, speed, rng.uniform(*cfg.turn_rate_range), 0,
                                      cfg.t_obs, cfg.t_pred))
    lanes = lanes[: cfg.num_polylines]
    order = rng.permutation(len(lanes))
    polylines = [[(float(x), float(y)) for x, y in lanes[idx]] for idx in order]

    # Focal trajectory: transform, then add noise everywhere except the
    # anchor step so the frame normalization stays exact.
    focal = _to_focal_frame(clean, anchor, anchor_heading)
    noise = _clipped_noise(rng, cfg.noise_std, len(focal))
    noise[cfg.t_obs - 1] = 0.0
    focal = focal + noise
    focal_past = [AgentState(float(x), float(y)) for x, y in focal[: cfg.t_obs]]
    focal_future = [AgentState(float(x), float(y)) for x, y in focal[cfg.t_obs:]]

    neighbors, neighbor_futures = [], []
    for _ in range(cfg.num_neighbors):
        n_man = MANEUVERS[rng.choice(len(MANEUVERS), p=np.asarray(cfg.maneuver_mix, dtype=float))]
        n_speed, n_turn, n_decel, n_onset = _sample_maneuver_params(cfg, rng, n_man)
        n_clean = rollout(n_man, n_speed, n_turn, n_decel, cfg.t_obs, cfg.t_pred, n_onset)
        n_anchor = n_clean[cfg.t_obs - 1].copy()
        n_heading = rollout_heading(n_man, n_turn, n_onset, 0)
        local = _to_focal_frame(n_clean, n_anchor, n_heading)
        # Place the neighbor at a random pose around the focal agent.
        offset = rng.uniform(-20.0, 20.0, size=2)
        pose = rng.uniform(-math.pi, math.pi)
        c, s = math.cos(pose), math.sin(pose)
        placed = local @ np.array([[c, s], [-s, c]]) + offset
        placed = placed + _clipped_noise(rng, cfg.noise_std, len(placed))
        neighbors.append([AgentState(float(x), float(y)) for x, y in placed[: cfg.t_obs]])
        neighbor_futures.append([AgentState(float(x), float(y)) for x, y in placed[cfg.t_obs:]])

    return Scenario(
        focal_past=focal_past,
        focal_future=focal_future,
        neighbors=neighbors,
        neighbor_futures=neighbor_futures,
        map_polylines=polylines,
        maneuver_label=maneuver,
        scenario_id=scenario_id,
    )


def generate_dataset(cfg: GeneratorConfig, n: int) -> list[Scenario]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [generate_scenario(cfg, i) for i in range(n)]


# ---------------------------------------------------------------------------
# Serialization: one JSON document per scenario, newline-delimited. Floats are
# rounded to 9 significant digits before encoding.
# ---------------------------------------------------------------------------

def _round9(value):
    if isinstance(value, float):
        return float(format(value, ".9g"))
    if isinstance(value, dict):
        return {k: _round9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round9(v) for v in value]
    return value


def scenario_to_dict(s: Scenario) -> dict:
    d = asdict(s)
    d["map_polylines"] = [[[float(x), float(y)] for x, y in poly] for poly in s.map_polylines]
    return _round9(d)


def scenario_from_dict(d: dict) -> Scenario:
    def states(seq):
        return [AgentState(float(a["x"]), float(a["y"]), bool(a["valid"])) for a in seq]

    return Scenario(
        focal_past=states(d["focal_past"]),
        focal_future=states(d["focal_future"]),
        neighbors=[states(seq) for seq in d["neighbors"]],
        neighbor_futures=[states(seq) for seq in d["neighbor_futures"]],
        map_polylines=[[(float(p[0]), float(p[1])) for p in poly] for poly in d["map_polylines"]],
        maneuver_label=str(d["maneuver_label"]),
        scenario_id=int(d["scenario_id"]),
    )


def save_dataset(scenarios: list[Scenario], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for s in scenarios:
            f.write(json.dumps(scenario_to_dict(s), separators=(",", ":")) + "\n")


def load_dataset(path) -> list[Scenario]:
    scenarios = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                scenarios.append(scenario_from_dict(json.loads(line)))
    return scenarios
