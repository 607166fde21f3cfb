"""Independent reference implementations used to pin expected test values.

Everything here is plain numpy / Python scalars with explicit loops, kept
deliberately separate from the library's tensor code paths.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# Laplace losses, scalar by scalar
# ---------------------------------------------------------------------------

def laplace_nll_scalar(mu: float, b: float, s: float) -> float:
    return math.log(2.0 * b) + abs(s - mu) / b


def target_loss_oracle(mu, b, gt_future, mode: int) -> float:
    """mu/b: (K, N, 2); gt_future: (t_pred, 2). Sums over targets and coords."""
    k, n, _ = np.asarray(mu).shape
    t_pred = len(gt_future)
    assert t_pred % n == 0
    stride = t_pred // n
    total = 0.0
    for i in range(n):
        step = (i + 1) * stride - 1
        for j in range(2):
            total += laplace_nll_scalar(mu[mode][i][j], b[mode][i][j], gt_future[step][j])
    return total


def regression_loss_oracle(mu, b, gt_future, mode: int) -> float:
    """mu/b: (K, t_pred, 2); gt_future: (t_pred, 2)."""
    total = 0.0
    for t in range(len(gt_future)):
        for j in range(2):
            total += laplace_nll_scalar(mu[mode][t][j], b[mode][t][j], gt_future[t][j])
    return total


def classification_loss_oracle(mu, b, pi, gt_future) -> float:
    """-log sum_k pi_k exp(loglik_k) with explicit log-sum-exp stabilization."""
    k = len(pi)
    logs = []
    for mode in range(k):
        loglik = 0.0
        for t in range(len(gt_future)):
            for j in range(2):
                loglik -= laplace_nll_scalar(mu[mode][t][j], b[mode][t][j], gt_future[t][j])
        logs.append(math.log(pi[mode]) + loglik)
    m = max(logs)
    return -(m + math.log(sum(math.exp(v - m) for v in logs)))


def best_mode_oracle(mu_final, gt_final) -> int:
    """Brute-force scan for the closest final point; first index wins ties."""
    best, best_d = 0, float("inf")
    for k in range(len(mu_final)):
        d = math.hypot(mu_final[k][0] - gt_final[0], mu_final[k][1] - gt_final[1])
        if d < best_d:
            best, best_d = k, d
    return best


# ---------------------------------------------------------------------------
# Empirical MMD over pooled feature vectors
# ---------------------------------------------------------------------------

def mmd_oracle(fx_full, fa_full, fxa_full, fx_part, fa_part, fxa_part) -> float:
    """Inputs are per-sample lists: fx (T, d), fa (Nn, d), fxa (Nn, d)."""

    def sample_vector(fx, fa, fxa):
        parts = [np.mean(fx, axis=0)]
        parts.append(np.mean(fa, axis=0) if len(fa) else np.zeros(fx.shape[1]))
        parts.append(np.mean(fxa, axis=0) if len(fxa) else np.zeros(fx.shape[1]))
        return np.concatenate(parts)

    v_full = np.mean([sample_vector(*t) for t in zip(fx_full, fa_full, fxa_full)], axis=0)
    v_part = np.mean([sample_vector(*t) for t in zip(fx_part, fa_part, fxa_part)], axis=0)
    diff = v_full - v_part
    return float(np.dot(diff, diff))


# ---------------------------------------------------------------------------
# Metrics: exhaustive per-mode scan
# ---------------------------------------------------------------------------

def metrics_oracle(mu, pi, gts, k_eval: int, miss_threshold: float = 2.0):
    """mu: (B, K, T, 2) array, pi: (B, K), gts: (B, T, 2). Returns dict."""
    mu = np.asarray(mu)
    pi = np.asarray(pi)
    gts = np.asarray(gts)
    ades, fdes, misses = [], [], []
    for i in range(mu.shape[0]):
        order = sorted(range(mu.shape[1]), key=lambda k: (-pi[i][k], k))[:k_eval]
        best_ade, best_fde = float("inf"), float("inf")
        for k in order:
            dists = [math.hypot(mu[i][k][t][0] - gts[i][t][0], mu[i][k][t][1] - gts[i][t][1])
                     for t in range(mu.shape[2])]
            best_ade = min(best_ade, sum(dists) / len(dists))
            best_fde = min(best_fde, dists[-1])
        ades.append(best_ade)
        fdes.append(best_fde)
        misses.append(1.0 if best_fde > miss_threshold else 0.0)
    n = len(ades)
    return {"min_ade": sum(ades) / n, "min_fde": sum(fdes) / n,
            "miss_rate": sum(misses) / n}


def t_statistic_oracle(a, b) -> float:
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    mean = sum(d) / n
    var = sum((x - mean) ** 2 for x in d) / (n - 1)
    return mean / (math.sqrt(var) / math.sqrt(n))


# ---------------------------------------------------------------------------
# Kinematics: analytic positions via geometric sums
# ---------------------------------------------------------------------------

def turn_positions_analytic(speed: float, omega: float, steps: int):
    """Positions after 1..steps unit-time steps of a turn starting at the origin.

    Step k moves by speed along heading (k-1)*omega; the cumulative sum has
    the closed form of a geometric series in exp(i*omega).
    """
    out = []
    for k in range(1, steps + 1):
        z = (1 - np.exp(1j * omega * k)) / (1 - np.exp(1j * omega))
        out.append((speed * z.real, speed * z.imag))
    return out


def stop_positions_analytic(speed: float, decel: float, steps: int):
    """x-positions after 1..steps steps of v_k = max(0, speed - decel*k)."""
    out = []
    for k in range(1, steps + 1):
        m = min(k, int(math.floor(speed / decel)) if decel > 0 else k)
        x = speed * m - decel * m * (m + 1) / 2.0
        out.append(x)
    return out


# ---------------------------------------------------------------------------
# Numpy re-implementations of the attention forward passes
# ---------------------------------------------------------------------------

def layer_norm_np(x, gain, bias, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gain + bias


def linear_np(params, prefix, x):
    return x @ params[f"{prefix}.weight"].T + params[f"{prefix}.bias"]


def ffn3_np(params, prefix, x):
    h = np.maximum(linear_np(params, f"{prefix}.layers.0", x), 0.0)
    h = np.maximum(linear_np(params, f"{prefix}.layers.1", h), 0.0)
    return linear_np(params, f"{prefix}.layers.2", h)


def softplus_np(x):
    return np.logaddexp(0.0, x)


def attention_block_np(params, prefix, heads, query, keyval, key_valid=None, logit_bias=None):
    """Multi-head cross-attention + residual + layer norm, loops over heads."""
    n_q, d = query.shape
    n_k = keyval.shape[0]
    hd = d // heads
    q = linear_np(params, f"{prefix}.q_proj", query)
    k = linear_np(params, f"{prefix}.k_proj", keyval)
    v = linear_np(params, f"{prefix}.v_proj", keyval)
    attended = np.zeros((n_q, d))
    if n_k > 0:
        for h in range(heads):
            qs = q[:, h * hd:(h + 1) * hd]
            ks = k[:, h * hd:(h + 1) * hd]
            vs = v[:, h * hd:(h + 1) * hd]
            scores = qs @ ks.T / math.sqrt(hd)
            if logit_bias is not None:
                scores = scores + logit_bias[None, :]
            if key_valid is not None:
                scores = np.where(key_valid[None, :], scores, -np.inf)
            for i in range(n_q):
                row = scores[i]
                finite = np.isfinite(row)
                if not finite.any():
                    continue
                m = row[finite].max()
                w = np.zeros_like(row)
                w[finite] = np.exp(row[finite] - m)
                w = w / w.sum()
                attended[i, h * hd:(h + 1) * hd] = w @ vs
    out = linear_np(params, f"{prefix}.out_proj", attended)
    return layer_norm_np(query + out, params[f"{prefix}.norm.weight"],
                         params[f"{prefix}.norm.bias"])


def target_generator_np(params, feats, num_targets: int, heads: int):
    """Reference forward pass of the sequential target generator.

    ``feats`` holds single-sample numpy arrays: focal (T, d), agents (Nn, d),
    map (P, d), focal_to_agents, focal_to_map, temporal (T, T),
    focal_valid (T,), poly_valid (P,).
    """
    k, d = params["mode_queries"].shape
    map_logit = feats["focal_to_map"] @ params["map_bias"]
    agent_logit = feats["focal_to_agents"] @ params["agent_bias"]
    n_valid = max(1, int(feats["focal_valid"].sum()))
    salience = feats["temporal"].sum(axis=0) / n_valid
    hist_logit = float(params["temporal_gate"]) * salience

    prev_emb = np.zeros((k, d))
    prev_mu = np.zeros((k, 2))
    mus, bs, embs = [], [], []
    for i in range(num_targets):
        q = params["mode_queries"] + params["step_embed"][i] + prev_emb
        h = attention_block_np(params, "map_block", heads, q, feats["map"],
                               key_valid=feats["poly_valid"], logit_bias=map_logit)
        h = attention_block_np(params, "agent_block", heads, h, feats["agents"],
                               logit_bias=agent_logit)
        h = attention_block_np(params, "hist_block", heads, h, feats["focal"],
                               key_valid=feats["focal_valid"], logit_bias=hist_logit)
        mu = prev_mu + ffn3_np(params, "loc_head", h)
        b = softplus_np(ffn3_np(params, "scale_head", h)) + 1e-6
        mus.append(mu)
        bs.append(b)
        embs.append(h)
        prev_emb, prev_mu = h, mu
    return np.stack(mus, axis=1), np.stack(bs, axis=1), np.stack(embs, axis=1)


def trajectory_decoder_np(params, feats, target_embeddings, heads: int,
                          steps_per_segment: int):
    """Reference forward pass of the target-guided decoder (single sample)."""
    k, d = params["traj_queries"].shape
    num_segments = target_embeddings.shape[1]
    hd = d // heads

    base = params["traj_queries"]
    h = attention_block_np(params, "map_block", heads, base, feats["map"],
                           key_valid=feats["poly_valid"])
    h = attention_block_np(params, "agent_block", heads, h, feats["agents"])
    h = attention_block_np(params, "hist_block", heads, h, feats["focal"],
                           key_valid=feats["focal_valid"])

    deltas, scales = [], []
    mode_emb = h
    for i in range(num_segments):
        x = h + target_embeddings[:, i]
        q = linear_np(params, "guided_q", x)
        key = linear_np(params, "guided_k", x)
        val = linear_np(params, "guided_v", h)
        attended = np.zeros((k, d))
        for head in range(heads):
            sl = slice(head * hd, (head + 1) * hd)
            scores = q[:, sl] @ key[:, sl].T / math.sqrt(hd)
            w = np.exp(scores - scores.max(axis=1, keepdims=True))
            w = w / w.sum(axis=1, keepdims=True)
            attended[:, sl] = w @ val[:, sl]
        g = layer_norm_np(x + linear_np(params, "guided_out", attended),
                          params["guided_norm.weight"], params["guided_norm.bias"])
        mode_emb = attention_block_np(params, "mode_block", heads, g, g)
        deltas.append(ffn3_np(params, "loc_head", mode_emb).reshape(k, steps_per_segment, 2))
        scales.append(softplus_np(ffn3_np(params, "scale_head", mode_emb))
                      .reshape(k, steps_per_segment, 2) + 1e-6)

    mu = np.cumsum(np.concatenate(deltas, axis=1), axis=1)
    b = np.concatenate(scales, axis=1)
    logits = (mode_emb @ params["score_head.weight"].T + params["score_head.bias"]).reshape(k)
    pi = np.exp(logits - logits.max())
    pi = pi / pi.sum()
    return mu, b, pi
