"""Scene encoder: focal history, neighbor, and map features plus interactions.

The encoder is deliberately small: one temporal self-attention block over the
focal history, one cross-attention block from neighbors onto that history, and
one from map polylines onto it. It emits five feature families --
per-step focal embeddings, neighbor embeddings, polyline embeddings, and the
two interaction families -- plus the temporal attention map between history
steps.

Masked history steps never contribute information: their input features are
zeroed before projection, they get exactly zero attention weight as keys, and
their rows in the per-step output are the learned mask token verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .layers import CrossAttention, init_linear_, scaled_uniform_

STATE_FEATURES = 3   # displacement x/y from previous valid step, validity bit
SEGMENT_FEATURES = 4  # segment midpoint x/y, unit direction x/y


@dataclass
class SceneFeatures:
    """Encoder outputs for a batch of scenes (leading axis is the batch)."""

    focal: torch.Tensor          # (B, t_obs, d) per-step focal embeddings
    agents: torch.Tensor         # (B, num_neighbors, d)
    map: torch.Tensor            # (B, num_polylines, d)
    focal_to_agents: torch.Tensor   # (B, num_neighbors, d)
    focal_to_map: torch.Tensor      # (B, num_polylines, d)
    temporal: torch.Tensor       # (B, t_obs, t_obs) attention between steps
    focal_valid: torch.Tensor    # (B, t_obs) bool
    neighbor_valid: torch.Tensor  # (B, num_neighbors, t_obs) bool
    poly_valid: torch.Tensor     # (B, num_polylines) bool

    @property
    def batch_size(self) -> int:
        return int(self.focal.shape[0])

    def same_shapes(self, other: "SceneFeatures") -> bool:
        return (self.focal.shape == other.focal.shape
                and self.agents.shape == other.agents.shape
                and self.focal_to_agents.shape == other.focal_to_agents.shape)

    def batch_slice(self, lo: int, hi: int) -> "SceneFeatures":
        return SceneFeatures(
            focal=self.focal[lo:hi], agents=self.agents[lo:hi], map=self.map[lo:hi],
            focal_to_agents=self.focal_to_agents[lo:hi],
            focal_to_map=self.focal_to_map[lo:hi], temporal=self.temporal[lo:hi],
            focal_valid=self.focal_valid[lo:hi], neighbor_valid=self.neighbor_valid[lo:hi],
            poly_valid=self.poly_valid[lo:hi])


def _step_features(positions: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
    """Per-step (dx, dy, valid) features using only valid coordinates.

    Displacements are taken from the previous valid step (or the origin when
    there is none), so the coordinates of masked steps never enter the result.
    Rows for masked steps are exactly zero.
    """
    t_obs = positions.shape[-2]
    idx = torch.arange(t_obs, device=positions.device)
    marked = torch.where(valid, idx.expand(valid.shape), idx.new_full((), -1))
    prev = torch.cummax(marked, dim=-1).values
    prev = torch.cat([prev.new_full(prev.shape[:-1] + (1,), -1), prev[..., :-1]], dim=-1)
    has_prev = prev >= 0
    gather_idx = prev.clamp(min=0).unsqueeze(-1).expand(positions.shape)
    prev_pos = torch.gather(positions, -2, gather_idx)
    prev_pos = torch.where(has_prev.unsqueeze(-1), prev_pos, torch.zeros_like(prev_pos))
    disp = positions - prev_pos
    feat = torch.cat([disp, torch.ones_like(disp[..., :1])], dim=-1)
    return torch.where(valid.unsqueeze(-1), feat, torch.zeros_like(feat))


def _segment_features(points: torch.Tensor, point_valid: torch.Tensor):
    """Midpoint + unit direction per polyline segment, with a validity mask."""
    a, b = points[..., :-1, :], points[..., 1:, :]
    seg_valid = point_valid[..., :-1] & point_valid[..., 1:]
    mid = 0.5 * (a + b)
    diff = b - a
    norm = diff.norm(dim=-1, keepdim=True)
    direction = torch.where(norm > 1e-9, diff / norm.clamp(min=1e-9), torch.zeros_like(diff))
    feat = torch.cat([mid, direction], dim=-1)
    return torch.where(seg_valid.unsqueeze(-1), feat, torch.zeros_like(feat)), seg_valid


class SceneEncoder(nn.Module):
    """Three-block attention encoder over one scene."""

    def __init__(self, d: int, heads: int, max_steps: int = 64):
        super().__init__()
        if d % heads != 0:
            raise ValueError(f"hidden dim {d} must be divisible by heads {heads}")
        self.d = d
        self.max_steps = max_steps
        self.state_proj = nn.Linear(STATE_FEATURES, d)
        self.seg_proj = nn.Linear(SEGMENT_FEATURES, d)
        self.mask_token = nn.Parameter(torch.zeros(d))
        self.pos_embed = nn.Parameter(torch.zeros(max_steps, d))
        self.temporal = CrossAttention(d, heads)
        self.agent_block = CrossAttention(d, heads)
        self.map_block = CrossAttention(d, heads)

    def reset_parameters(self, gen: torch.Generator) -> None:
        init_linear_(self.state_proj, gen)
        init_linear_(self.seg_proj, gen)
        scaled_uniform_(self.mask_token, self.d, gen)
        scaled_uniform_(self.pos_embed, self.d, gen)
        self.temporal.reset_parameters(gen)
        self.agent_block.reset_parameters(gen)
        self.map_block.reset_parameters(gen)

    def forward(self, pack) -> SceneFeatures:
        focal, focal_valid = pack.focal, pack.focal_valid
        bsz, t_obs, _ = focal.shape
        if t_obs > self.max_steps:
            raise ValueError(f"t_obs {t_obs} exceeds encoder capacity {self.max_steps}")
        pe = self.pos_embed[:t_obs]

        rows = self.state_proj(_step_features(focal, focal_valid)) + pe
        x_rows = torch.where(focal_valid.unsqueeze(-1), rows, self.mask_token.expand_as(rows))
        out, weights = self.temporal(x_rows, x_rows, key_valid=focal_valid)
        f_x = torch.where(focal_valid.unsqueeze(-1), out, self.mask_token.expand_as(out))
        f_temporal = (weights
                      * focal_valid[:, :, None].to(weights.dtype)
                      * focal_valid[:, None, :].to(weights.dtype))

        nb_pos, nb_valid = pack.neighbors, pack.neighbor_valid
        nb_rows = self.state_proj(_step_features(nb_pos, nb_valid)) + pe
        nb_rows = nb_rows * nb_valid.unsqueeze(-1).to(nb_rows.dtype)
        counts = nb_valid.sum(dim=-1, keepdim=True).clamp(min=1).to(nb_rows.dtype)
        f_a = nb_rows.sum(dim=-2) / counts
        f_xa, _ = self.agent_block(f_a, f_x, key_valid=focal_valid)

        seg_feat, seg_valid = _segment_features(pack.map_points, pack.map_point_valid)
        seg_rows = self.seg_proj(seg_feat) * seg_valid.unsqueeze(-1).to(seg_feat.dtype)
        seg_counts = seg_valid.sum(dim=-1, keepdim=True).clamp(min=1).to(seg_feat.dtype)
        f_m = seg_rows.sum(dim=-2) / seg_counts
        poly_valid = seg_valid.any(dim=-1)
        f_xm, _ = self.map_block(f_m, f_x, key_valid=focal_valid)

        return SceneFeatures(
            focal=f_x,
            agents=f_a,
            map=f_m,
            focal_to_agents=f_xa,
            focal_to_map=f_xm,
            temporal=f_temporal,
            focal_valid=focal_valid,
            neighbor_valid=nb_valid,
            poly_valid=poly_valid,
        )


def init_encoder(d: int, heads: int, seed: int, max_steps: int = 64) -> SceneEncoder:
    """Build an encoder with reproducible scaled-uniform initialization."""
    enc = SceneEncoder(d, heads, max_steps)
    gen = torch.Generator().manual_seed(seed)
    enc.reset_parameters(gen)
    return enc


def encode_batch(scenarios, masks, encoder: SceneEncoder) -> SceneFeatures:
    """Encode scenarios under observation masks; see ``encode`` for one scene."""
    from .packing import pack_scenarios

    pack = pack_scenarios(scenarios, masks, dtype=next(encoder.parameters()).dtype)
    for t in (pack.focal, pack.neighbors, pack.futures, pack.map_points):
        if not torch.isfinite(t).all():
            raise FloatingPointError("non-finite coordinates in scenario inputs")
    return encoder(pack)


def encode(scenario, mask, encoder: SceneEncoder) -> SceneFeatures:
    """Encode a single scenario (batch of one) under an observation mask."""
    return encode_batch([scenario], [mask], encoder)
