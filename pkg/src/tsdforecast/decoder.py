"""Target-guided multi-modal trajectory decoding and its losses.

Decoding runs once per target segment. Trajectory queries cross-attend to the
map, neighbors, and focal history; the matching target embedding is then added
to each mode's query and a guided multi-head attention mixes the modes using
the target-informed sums as query/key and the plain trajectory embedding as
value. After a final self-attention across modes, feed-forward heads emit the
per-step Laplace location and scale for the segment. Segment outputs
concatenate to the full horizon; a score head over the last segment's mode
embeddings yields the mixture weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .encoder import SceneFeatures
from .layers import CrossAttention, FeedForwardHead, init_linear_, init_layer_norm_, scaled_uniform_
from .targets import SCALE_FLOOR, TargetSet, _gather_mode, first_argmin, laplace_nll


@dataclass
class Forecast:
    """K trajectory modes as per-step Laplace parameters plus mixture weights."""

    mu: torch.Tensor      # (B, K, t_pred, 2)
    b: torch.Tensor       # (B, K, t_pred, 2) strictly positive
    pi: torch.Tensor      # (B, K) probabilities summing to 1
    pi_logits: torch.Tensor | None = None  # (B, K) pre-softmax scores

    @property
    def num_modes(self) -> int:
        return int(self.mu.shape[1])

    @property
    def t_pred(self) -> int:
        return int(self.mu.shape[2])

    def batch_slice(self, lo: int, hi: int) -> "Forecast":
        return Forecast(mu=self.mu[lo:hi], b=self.b[lo:hi], pi=self.pi[lo:hi],
                        pi_logits=None if self.pi_logits is None else self.pi_logits[lo:hi])


class TrajectoryDecoder(nn.Module):
    def __init__(self, d: int, heads: int, num_modes: int, steps_per_segment: int):
        super().__init__()
        if d % heads != 0:
            raise ValueError(f"hidden dim {d} must be divisible by heads {heads}")
        self.d = d
        self.heads = heads
        self.head_dim = d // heads
        self.num_modes = num_modes
        self.steps_per_segment = steps_per_segment
        self.traj_queries = nn.Parameter(torch.zeros(num_modes, d))
        self.map_block = CrossAttention(d, heads)
        self.agent_block = CrossAttention(d, heads)
        self.hist_block = CrossAttention(d, heads)
        self.guided_q = nn.Linear(d, d)
        self.guided_k = nn.Linear(d, d)
        self.guided_v = nn.Linear(d, d)
        self.guided_out = nn.Linear(d, d)
        self.guided_norm = nn.LayerNorm(d)
        self.mode_block = CrossAttention(d, heads)
        self.loc_head = FeedForwardHead(d, 2 * steps_per_segment)
        self.scale_head = FeedForwardHead(d, 2 * steps_per_segment)
        self.score_head = nn.Linear(d, 1)

    def reset_parameters(self, gen: torch.Generator) -> None:
        scaled_uniform_(self.traj_queries, self.d, gen)
        self.map_block.reset_parameters(gen)
        self.agent_block.reset_parameters(gen)
        self.hist_block.reset_parameters(gen)
        for lin in (self.guided_q, self.guided_k, self.guided_v, self.guided_out):
            init_linear_(lin, gen)
        init_layer_norm_(self.guided_norm)
        self.mode_block.reset_parameters(gen)
        self.loc_head.reset_parameters(gen)
        self.scale_head.reset_parameters(gen)
        init_linear_(self.score_head, gen)

    def _guided_attention(self, traj_emb: torch.Tensor, target_emb: torch.Tensor) -> torch.Tensor:
        """Mix modes with target-informed queries/keys and plain values."""
        bsz, k, d = traj_emb.shape
        x = traj_emb + target_emb
        q = self.guided_q(x).view(bsz, k, self.heads, self.head_dim).transpose(1, 2)
        key = self.guided_k(x).view(bsz, k, self.heads, self.head_dim).transpose(1, 2)
        val = self.guided_v(traj_emb).view(bsz, k, self.heads, self.head_dim).transpose(1, 2)
        weights = torch.softmax(q @ key.transpose(-1, -2) / math.sqrt(self.head_dim), dim=-1)
        attended = (weights @ val).transpose(1, 2).reshape(bsz, k, d)
        return self.guided_norm(x + self.guided_out(attended))

    def forward(self, feats: SceneFeatures, target_embeddings: torch.Tensor) -> Forecast:
        """target_embeddings is (B, K, N, d); one decoding pass per segment."""
        bsz, k, num_segments, _ = target_embeddings.shape
        if k != self.num_modes:
            raise ValueError(f"expected {self.num_modes} modes, got {k}")
        base = self.traj_queries.unsqueeze(0).expand(bsz, -1, -1)
        h, _ = self.map_block(base, feats.map, key_valid=feats.poly_valid)
        h, _ = self.agent_block(h, feats.agents)
        h, _ = self.hist_block(h, feats.focal, key_valid=feats.focal_valid)
        deltas, scales = [], []
        mode_emb = h
        for i in range(num_segments):
            g = self._guided_attention(h, target_embeddings[:, :, i])
            mode_emb, _ = self.mode_block(g, g)
            s = self.steps_per_segment
            deltas.append(self.loc_head(mode_emb).view(bsz, k, s, 2))
            scales.append(F.softplus(self.scale_head(mode_emb)).view(bsz, k, s, 2) + SCALE_FLOOR)
        mu = torch.cumsum(torch.cat(deltas, dim=2), dim=2)
        b = torch.cat(scales, dim=2)
        logits = self.score_head(mode_emb).squeeze(-1)
        return Forecast(mu=mu, b=b, pi=torch.softmax(logits, dim=-1), pi_logits=logits)


def init_trajectory_decoder(d: int, heads: int, num_modes: int,
                            steps_per_segment: int, seed: int) -> TrajectoryDecoder:
    dec = TrajectoryDecoder(d, heads, num_modes, steps_per_segment)
    g = torch.Generator().manual_seed(seed)
    dec.reset_parameters(g)
    return dec


def decode_trajectories(feats: SceneFeatures, targets: TargetSet,
                        model: TrajectoryDecoder) -> Forecast:
    """Decode full trajectories guided by the generated targets."""
    if targets.mu.shape[0] != feats.batch_size:
        raise ValueError("targets and features disagree on batch size")
    return model(feats, targets.embeddings)


def regression_loss(fc: Forecast, gt_future: torch.Tensor, mode) -> torch.Tensor:
    """Per-step Laplace NLL of the selected mode, summed over steps and coords."""
    mu = _gather_mode(fc.mu, mode)
    b = _gather_mode(fc.b, mode)
    return laplace_nll(mu, b, gt_future).sum(dim=(-1, -2))


def classification_loss(fc: Forecast, gt_future: torch.Tensor) -> torch.Tensor:
    """Mixture NLL optimizing only the mode probabilities.

    Locations and scales are detached, so gradients reach the mixture scores
    alone. Evaluated with log-sum-exp stabilization.
    """
    mu = fc.mu.detach()
    b = fc.b.detach()
    log_lik = -laplace_nll(mu, b, gt_future.unsqueeze(1)).sum(dim=(-1, -2))  # (B, K)
    if fc.pi_logits is not None:
        log_pi = F.log_softmax(fc.pi_logits, dim=-1)
    else:
        log_pi = torch.log(fc.pi)
    return -torch.logsumexp(log_pi + log_lik, dim=-1)


def select_best_endpoint_mode(fc: Forecast, gt_future: torch.Tensor) -> torch.Tensor:
    """Mode whose final trajectory point is closest to the true endpoint."""
    endpoint = gt_future[:, -1].unsqueeze(1)
    dist = (fc.mu[:, :, -1] - endpoint).norm(dim=-1)
    return first_argmin(dist)


def forecast_records(fc: Forecast, scenario_ids) -> list[dict]:
    """JSON-ready per-scenario records with mu, b, and pi arrays."""
    if len(scenario_ids) != fc.mu.shape[0]:
        raise ValueError("need one scenario id per forecast")
    records = []
    for i, sid in enumerate(scenario_ids):
        records.append({
            "scenario_id": int(sid),
            "mu": fc.mu[i].tolist(),
            "b": fc.b[i].tolist(),
            "pi": fc.pi[i].tolist(),
        })
    return records
