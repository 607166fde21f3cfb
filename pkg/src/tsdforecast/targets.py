"""Anchor-free sequential target-point generation.

For each of K modes, N target points are produced over N decoding cycles.
Every cycle the mode queries (plus a cycle embedding and the previous cycle's
output embeddings) cross-attend to the map, the neighbors, and the focal
history in that order; interaction features bias the attention logits of the
matching block. Two feed-forward heads then emit the location and scale of a
2-D Laplace distribution per mode, with locations accumulated relative to the
previous target (or the origin on the first cycle).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .encoder import SceneFeatures
from .layers import CrossAttention, FeedForwardHead, scaled_uniform_

SCALE_FLOOR = 1e-6


@dataclass
class TargetSet:
    """K modes x N sequential target points as Laplace parameters."""

    mu: torch.Tensor          # (B, K, N, 2) locations, meters
    b: torch.Tensor           # (B, K, N, 2) scales, strictly positive
    embeddings: torch.Tensor  # (B, K, N, d)

    @property
    def num_modes(self) -> int:
        return int(self.mu.shape[1])

    @property
    def num_targets(self) -> int:
        return int(self.mu.shape[2])

    def batch_slice(self, lo: int, hi: int) -> "TargetSet":
        return TargetSet(mu=self.mu[lo:hi], b=self.b[lo:hi],
                         embeddings=self.embeddings[lo:hi])


class TargetGenerator(nn.Module):
    def __init__(self, d: int, heads: int, num_modes: int, max_targets: int = 8):
        super().__init__()
        self.d = d
        self.num_modes = num_modes
        self.max_targets = max_targets
        self.mode_queries = nn.Parameter(torch.zeros(num_modes, d))
        self.step_embed = nn.Parameter(torch.zeros(max_targets, d))
        self.map_block = CrossAttention(d, heads)
        self.agent_block = CrossAttention(d, heads)
        self.hist_block = CrossAttention(d, heads)
        # Interaction features enter as per-key attention-logit biases.
        self.map_bias = nn.Parameter(torch.zeros(d))
        self.agent_bias = nn.Parameter(torch.zeros(d))
        self.temporal_gate = nn.Parameter(torch.zeros(()))
        self.loc_head = FeedForwardHead(d, 2)
        self.scale_head = FeedForwardHead(d, 2)

    def reset_parameters(self, gen: torch.Generator) -> None:
        scaled_uniform_(self.mode_queries, self.d, gen)
        scaled_uniform_(self.step_embed, self.d, gen)
        self.map_block.reset_parameters(gen)
        self.agent_block.reset_parameters(gen)
        self.hist_block.reset_parameters(gen)
        scaled_uniform_(self.map_bias, self.d, gen)
        scaled_uniform_(self.agent_bias, self.d, gen)
        with torch.no_grad():
            self.temporal_gate.zero_()
        self.loc_head.reset_parameters(gen)
        self.scale_head.reset_parameters(gen)

    def forward(self, feats: SceneFeatures, num_targets: int) -> TargetSet:
        if num_targets < 1 or num_targets > self.max_targets:
            raise ValueError(f"num_targets must be in [1, {self.max_targets}]")
        bsz = feats.batch_size
        map_logit = feats.focal_to_map @ self.map_bias
        agent_logit = feats.focal_to_agents @ self.agent_bias
        # Attention received by each history step, averaged over valid steps.
        n_valid = feats.focal_valid.sum(dim=-1, keepdim=True).clamp(min=1)
        salience = feats.temporal.sum(dim=1) / n_valid.to(feats.temporal.dtype)
        hist_logit = self.temporal_gate * salience

        base = self.mode_queries.unsqueeze(0).expand(bsz, -1, -1)
        prev_emb = torch.zeros_like(base)
        prev_mu = base.new_zeros(bsz, self.num_modes, 2)
        mus, scales, embs = [], [], []
        for i in range(num_targets):
            q = base + self.step_embed[i] + prev_emb
            h, _ = self.map_block(q, feats.map, key_valid=feats.poly_valid,
                                  logit_bias=map_logit)
            h, _ = self.agent_block(h, feats.agents, logit_bias=agent_logit)
            h, _ = self.hist_block(h, feats.focal, key_valid=feats.focal_valid,
                                   logit_bias=hist_logit)
            mu = prev_mu + self.loc_head(h)
            b = F.softplus(self.scale_head(h)) + SCALE_FLOOR
            mus.append(mu)
            scales.append(b)
            embs.append(h)
            prev_emb, prev_mu = h, mu
        return TargetSet(
            mu=torch.stack(mus, dim=2),
            b=torch.stack(scales, dim=2),
            embeddings=torch.stack(embs, dim=2),
        )


def init_target_generator(d: int, heads: int, num_modes: int, seed: int,
                          max_targets: int = 8) -> TargetGenerator:
    gen_module = TargetGenerator(d, heads, num_modes, max_targets)
    g = torch.Generator().manual_seed(seed)
    gen_module.reset_parameters(g)
    return gen_module


def generate_targets(feats: SceneFeatures, model: TargetGenerator,
                     num_modes: int, num_targets: int) -> TargetSet:
    """Run the generator, checking the requested mode count against the model."""
    if num_modes != model.num_modes:
        raise ValueError(f"model has {model.num_modes} mode queries, requested {num_modes}")
    return model(feats, num_targets)


def target_step_indices(t_pred: int, num_targets: int) -> torch.Tensor:
    """0-based future indices hit by each target: (i+1) * t_pred / N for i in 0..N-1."""
    if t_pred % num_targets != 0:
        raise ValueError(f"t_pred {t_pred} not divisible by num_targets {num_targets}")
    stride = t_pred // num_targets
    return torch.arange(1, num_targets + 1) * stride - 1


def laplace_nll(mu: torch.Tensor, b: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Elementwise Laplace negative log-likelihood log(2b) + |x - mu| / b."""
    return torch.log(2.0 * b) + torch.abs(target - mu) / b


def _gather_mode(tensor: torch.Tensor, mode) -> torch.Tensor:
    """Select one mode per batch item; mode is an int or a (B,) index tensor."""
    bsz = tensor.shape[0]
    if isinstance(mode, int):
        mode = torch.full((bsz,), mode, dtype=torch.long)
    return tensor[torch.arange(bsz), mode.to(torch.long)]


def target_loss(targets: TargetSet, gt_future: torch.Tensor, mode) -> torch.Tensor:
    """Laplace NLL of the selected mode's targets against the true waypoints.

    gt_future is (B, t_pred, 2); returns a (B,) loss, summed over targets and
    coordinates.
    """
    if (targets.b <= 0).any():
        raise FloatingPointError("target scales must be strictly positive")
    n = targets.num_targets
    idx = target_step_indices(gt_future.shape[1], n).to(gt_future.device)
    waypoints = gt_future[:, idx]                      # (B, N, 2)
    mu = _gather_mode(targets.mu, mode)                # (B, N, 2)
    b = _gather_mode(targets.b, mode)
    return laplace_nll(mu, b, waypoints).sum(dim=(-1, -2))


def select_best_mode(targets: TargetSet, gt_future: torch.Tensor) -> torch.Tensor:
    """Mode whose final target is closest (L2) to the true endpoint; first wins ties."""
    endpoint = gt_future[:, -1].unsqueeze(1)           # (B, 1, 2)
    dist = (targets.mu[:, :, -1] - endpoint).norm(dim=-1)   # (B, K)
    return first_argmin(dist)


def first_argmin(values: torch.Tensor) -> torch.Tensor:
    """Row-wise index of the first minimum of a (B, K) tensor."""
    k = values.shape[1]
    idx = torch.arange(k, device=values.device).expand(values.shape)
    best = values.min(dim=1, keepdim=True).values
    candidates = torch.where(values == best, idx, torch.full_like(idx, k))
    return candidates.min(dim=1).values
