"""Shared attention and feed-forward building blocks.

All learnable tensors are initialized from a scaled uniform distribution with
bound 1/sqrt(fan_in), drawn from an explicit ``torch.Generator`` in a fixed
order so parameter initialization is reproducible from a seed alone. Layer
norm gains start at 1 and biases at 0.
"""

from __future__ import annotations

import math

import torch
from torch import nn

# Finite stand-in for -inf when masking attention logits: exp(x - max)
# underflows to exactly zero, so masked keys get exactly zero weight without
# producing NaNs for rows where every key is masked.
_MASKED_LOGIT = -1e9


def scaled_uniform_(tensor: torch.Tensor, fan_in: int, gen: torch.Generator) -> None:
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=gen)


def init_linear_(linear: nn.Linear, gen: torch.Generator) -> None:
    fan_in = linear.in_features
    scaled_uniform_(linear.weight, fan_in, gen)
    if linear.bias is not None:
        scaled_uniform_(linear.bias, fan_in, gen)


def init_layer_norm_(norm: nn.LayerNorm) -> None:
    with torch.no_grad():
        norm.weight.fill_(1.0)
        norm.bias.fill_(0.0)


class CrossAttention(nn.Module):
    """Multi-head attention followed by a residual connection and layer norm.

    Keys flagged invalid receive exactly zero attention weight. An optional
    per-key logit bias is added to every query's attention scores. Queries
    facing no valid key fall back to the residual path.
    """

    def __init__(self, d: int, heads: int):
        super().__init__()
        if d % heads != 0:
            raise ValueError(f"hidden dim {d} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = d // heads
        self.q_proj = nn.Linear(d, d)
        self.k_proj = nn.Linear(d, d)
        self.v_proj = nn.Linear(d, d)
        self.out_proj = nn.Linear(d, d)
        self.norm = nn.LayerNorm(d)

    def reset_parameters(self, gen: torch.Generator) -> None:
        for lin in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
            init_linear_(lin, gen)
        init_layer_norm_(self.norm)

    def forward(self, query, keyval, key_valid=None, logit_bias=None):
        """Returns (output, weights) with weights averaged over heads."""
        bsz, n_q, d = query.shape
        n_k = keyval.shape[1]
        q = self.q_proj(query).view(bsz, n_q, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(keyval).view(bsz, n_k, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(keyval).view(bsz, n_k, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if logit_bias is not None:
            scores = scores + logit_bias[:, None, None, :]
        if key_valid is not None:
            scores = scores.masked_fill(~key_valid[:, None, None, :], _MASKED_LOGIT)
        if n_k > 0:
            weights = torch.softmax(scores, dim=-1)
            if key_valid is not None:
                weights = weights * key_valid[:, None, None, :]
            attended = weights @ v
        else:
            weights = scores.new_zeros(bsz, self.heads, n_q, 0)
            attended = scores.new_zeros(bsz, self.heads, n_q, self.head_dim)
        attended = attended.transpose(1, 2).reshape(bsz, n_q, d)
        out = self.norm(query + self.out_proj(attended))
        return out, weights.mean(dim=1)


class FeedForwardHead(nn.Module):
    """Three-layer MLP head with ReLU activations."""

    def __init__(self, d: int, out_dim: int):
        super().__init__()
        self.layers = nn.ModuleList([
            nn.Linear(d, d),
            nn.Linear(d, d),
            nn.Linear(d, out_dim),
        ])

    def reset_parameters(self, gen: torch.Generator) -> None:
        for lin in self.layers:
            init_linear_(lin, gen)

    def forward(self, x):
        x = torch.relu(self.layers[0](x))
        x = torch.relu(self.layers[1](x))
        return self.layers[2](x)
