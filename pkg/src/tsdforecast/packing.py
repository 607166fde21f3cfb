"""Batching of scenarios into padded tensors.

Scenarios are packed batch-first. Neighbor lists and polylines are padded to
the batch maximum with validity masks; observation masks are folded into the
per-step validity so downstream code sees a single boolean per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .masking import ObservationMask, no_mask
from .scenario import Scenario


@dataclass
class PackedScenes:
    focal: torch.Tensor          # (B, t_obs, 2)
    focal_valid: torch.Tensor    # (B, t_obs) bool
    neighbors: torch.Tensor      # (B, max_nb, t_obs, 2)
    neighbor_valid: torch.Tensor  # (B, max_nb, t_obs) bool
    futures: torch.Tensor        # (B, t_pred, 2)
    map_points: torch.Tensor     # (B, max_poly, max_len, 2)
    map_point_valid: torch.Tensor  # (B, max_poly, max_len) bool
    scenario_ids: list[int]

    @property
    def batch_size(self) -> int:
        return int(self.focal.shape[0])


def _states_to_arrays(states) -> tuple[np.ndarray, np.ndarray]:
    xy = np.array([[st.x, st.y] for st in states], dtype=np.float64)
    valid = np.array([st.valid for st in states], dtype=bool)
    return xy, valid


def _scenario_arrays(s: Scenario, cache: dict | None):
    """Raw numpy views of one scenario, memoized when a cache dict is given."""
    if cache is not None:
        hit = cache.get(id(s))
        if hit is not None:
            return hit
    focal_xy, focal_valid = _states_to_arrays(s.focal_past)
    nb_xy = np.zeros((s.num_neighbors, s.t_obs, 2))
    nb_valid = np.zeros((s.num_neighbors, s.t_obs), dtype=bool)
    for n, seq in enumerate(s.neighbors):
        nb_xy[n], nb_valid[n] = _states_to_arrays(seq)
    future_xy = np.array([[st.x, st.y] for st in s.focal_future], dtype=np.float64)
    polys = [np.asarray(p, dtype=np.float64) for p in s.map_polylines]
    entry = (focal_xy, focal_valid, nb_xy, nb_valid, future_xy, polys)
    if cache is not None:
        cache[id(s)] = entry
    return entry


def pack_scenarios(scenarios: list[Scenario],
                   masks: list[ObservationMask] | None = None,
                   dtype: torch.dtype = torch.float32,
                   cache: dict | None = None) -> PackedScenes:
    """Stack scenarios (optionally under observation masks) into tensors.

    Pass a dict as ``cache`` to reuse per-scenario arrays across calls (the
    training loop packs the same scenarios every epoch).
    """
    if not scenarios:
        raise ValueError("cannot pack an empty scenario list")
    t_obs = scenarios[0].t_obs
    t_pred = scenarios[0].t_pred
    if any(s.t_obs != t_obs or s.t_pred != t_pred for s in scenarios):
        raise ValueError("scenarios in a batch must share t_obs and t_pred")
    if masks is None:
        masks = [no_mask(s.t_obs, s.num_neighbors) for s in scenarios]
    if len(masks) != len(scenarios):
        raise ValueError("need one mask per scenario")

    bsz = len(scenarios)
    max_nb = max(s.num_neighbors for s in scenarios)
    max_poly = max(len(s.map_polylines) for s in scenarios)
    max_len = max((len(p) for s in scenarios for p in s.map_polylines), default=2)

    focal = np.zeros((bsz, t_obs, 2))
    focal_valid = np.zeros((bsz, t_obs), dtype=bool)
    neighbors = np.zeros((bsz, max_nb, t_obs, 2))
    neighbor_valid = np.zeros((bsz, max_nb, t_obs), dtype=bool)
    futures = np.zeros((bsz, t_pred, 2))
    map_points = np.zeros((bsz, max_poly, max_len, 2))
    map_point_valid = np.zeros((bsz, max_poly, max_len), dtype=bool)

    for i, (s, m) in enumerate(zip(scenarios, masks)):
        if m.t_obs != s.t_obs or m.num_neighbors != s.num_neighbors:
            raise ValueError(f"mask dims do not match scenario {s.scenario_id}")
        focal_xy, state_valid, nb_xy, nb_state_valid, future_xy, polys = \
            _scenario_arrays(s, cache)
        keep = state_valid & np.asarray(m.focal, dtype=bool)
        focal[i] = np.where(keep[:, None], focal_xy, 0.0)
        focal_valid[i] = keep
        nb = s.num_neighbors
        if nb:
            nb_keep = nb_state_valid & np.asarray(m.neighbors, dtype=bool)
            neighbors[i, :nb] = np.where(nb_keep[:, :, None], nb_xy, 0.0)
            neighbor_valid[i, :nb] = nb_keep
        futures[i] = future_xy
        for p, pts in enumerate(polys):
            map_points[i, p, :len(pts)] = pts
            map_point_valid[i, p, :len(pts)] = True

    return PackedScenes(
        focal=torch.as_tensor(focal, dtype=dtype),
        focal_valid=torch.as_tensor(focal_valid),
        neighbors=torch.as_tensor(neighbors, dtype=dtype),
        neighbor_valid=torch.as_tensor(neighbor_valid),
        futures=torch.as_tensor(futures, dtype=dtype),
        map_points=torch.as_tensor(map_points, dtype=dtype),
        map_point_valid=torch.as_tensor(map_point_valid),
        scenario_ids=[s.scenario_id for s in scenarios],
    )


def concat_packs(a: PackedScenes, b: PackedScenes) -> PackedScenes:
    """Concatenate two packs of the same scenarios along the batch axis."""
    if a.focal.shape != b.focal.shape or a.neighbors.shape != b.neighbors.shape:
        raise ValueError("packs must share shapes to concatenate")
    return PackedScenes(
        focal=torch.cat([a.focal, b.focal]),
        focal_valid=torch.cat([a.focal_valid, b.focal_valid]),
        neighbors=torch.cat([a.neighbors, b.neighbors]),
        neighbor_valid=torch.cat([a.neighbor_valid, b.neighbor_valid]),
        futures=torch.cat([a.futures, b.futures]),
        map_points=torch.cat([a.map_points, b.map_points]),
        map_point_valid=torch.cat([a.map_point_valid, b.map_point_valid]),
        scenario_ids=a.scenario_ids + b.scenario_ids,
    )
