"""Evaluation metrics (minADE, minFDE, miss rate) and paired significance tests.

Displacement errors are computed against the Laplace location parameters of
the top-K modes by mixture weight. The ADE-best and FDE-best modes are chosen
independently; a scenario is missed when its best final displacement is
strictly greater than 2 meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy import stats

from .decoder import Forecast

MISS_THRESHOLD_M = 2.0


class DegenerateInputError(ValueError):
    """Raised when a statistical test receives inputs it cannot handle."""


@dataclass
class EvalResult:
    min_ade: float
    min_fde: float
    miss_rate: float
    n_scenarios: int
    per_scenario: list[tuple[float, float, bool]] | None = None

    def as_row(self) -> dict:
        return {"min_ade": self.min_ade, "min_fde": self.min_fde,
                "miss_rate": self.miss_rate, "n": self.n_scenarios}


def _stack_forecasts(forecasts) -> Forecast:
    if isinstance(forecasts, Forecast):
        return forecasts
    return Forecast(mu=torch.cat([f.mu for f in forecasts]),
                    b=torch.cat([f.b for f in forecasts]),
                    pi=torch.cat([f.pi for f in forecasts]))


def evaluate(forecasts, gt_futures, k_eval: int = 6, keep_per_scenario: bool = False) -> EvalResult:
    """Aggregate minADE/minFDE/MR over scenarios.

    forecasts: a batched Forecast or a list of them; gt_futures: (B, t_pred, 2)
    tensor/array of ground-truth positions. When a forecast has more than
    k_eval modes, only the k_eval most probable are scored.
    """
    fc = _stack_forecasts(forecasts)
    gt = torch.as_tensor(np.asarray(gt_futures), dtype=fc.mu.dtype)
    if gt.ndim != 3 or gt.shape[0] != fc.mu.shape[0] or gt.shape[1] != fc.t_pred:
        raise ValueError(f"ground truth shape {tuple(gt.shape)} does not match "
                         f"forecasts ({fc.mu.shape[0]}, {fc.t_pred}, 2)")

    mu = fc.mu
    if fc.num_modes > k_eval:
        top = torch.argsort(-fc.pi, dim=1, stable=True)[:, :k_eval]
        mu = torch.gather(mu, 1, top[:, :, None, None].expand(-1, -1, fc.t_pred, 2))

    err = (mu - gt.unsqueeze(1)).norm(dim=-1)     # (B, K, T)
    ade = err.mean(dim=-1)                        # (B, K)
    fde = err[..., -1]                            # (B, K)
    best_ade = ade.min(dim=1).values
    best_fde = fde.min(dim=1).values
    missed = best_fde > MISS_THRESHOLD_M

    per = None
    if keep_per_scenario:
        per = [(float(a), float(f), bool(m))
               for a, f, m in zip(best_ade, best_fde, missed)]
    return EvalResult(
        min_ade=float(best_ade.mean()),
        min_fde=float(best_fde.mean()),
        miss_rate=float(missed.to(best_fde.dtype).mean()),
        n_scenarios=int(mu.shape[0]),
        per_scenario=per,
    )


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t statistic, p value).

    Equal inputs return (0, 1). A nonzero but constant difference has zero
    variance and no defined statistic, which raises DegenerateInputError.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length 1-D samples with n >= 2")
    d = a - b
    if np.all(d == 0.0):
        return 0.0, 1.0
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateInputError("differences have zero variance")
    n = len(d)
    t = d.mean() / (sd / math.sqrt(n))
    p = 2.0 * stats.t.sf(abs(t), df=n - 1)
    return float(t), float(p)
