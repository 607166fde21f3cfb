"""Two-branch self-distillation training.

Every step runs the fully observed batch and a masked copy through the same
parameters, shares the winner mode chosen on the full branch, aligns pooled
features with an empirical MMD penalty, and sums everything with unit weights.
Ablation variants switch parts of this recipe off without touching the
parameter set:

  baseline     single full-observation branch, no target guidance
  target_only  single branch with target guidance
  tsd_no_mmd   both branches, shared winner, no feature alignment
  tsd          the full recipe

The winner mode comes from the final predicted target when guidance is on and
from the final trajectory point otherwise.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from .decoder import classification_loss, regression_loss, select_best_endpoint_mode
from .encoder import SceneFeatures
from .masking import DEFAULT_TRAIN_SCHEDULE, sample_mask
from .model import ForecastModel
from .packing import concat_packs, pack_scenarios
from .targets import select_best_mode, target_loss


class TrainingError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class VariantFlags:
    use_targets: bool
    two_branch: bool
    use_mmd: bool


VARIANTS = {
    "baseline": VariantFlags(use_targets=False, two_branch=False, use_mmd=False),
    "target_only": VariantFlags(use_targets=True, two_branch=False, use_mmd=False),
    "tsd_no_mmd": VariantFlags(use_targets=True, two_branch=True, use_mmd=False),
    "tsd": VariantFlags(use_targets=True, two_branch=True, use_mmd=True),
}


@dataclass
class TrainConfig:
    seed: int = 0
    epochs: int = 30
    batch_size: int = 32
    k_modes: int = 6
    n_targets: int = 3
    d_model: int = 64
    n_heads: int = 8
    lr: float = 1e-3
    weight_decay: float = 1e-4
    grad_clip: float = 5.0
    mask_schedule: dict = field(default_factory=lambda: dict(DEFAULT_TRAIN_SCHEDULE))
    variant: str = "tsd"

    _ALIASES = {"K": "k_modes", "N": "n_targets", "d": "d_model", "H": "n_heads"}

    def validate(self) -> "TrainConfig":
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; pick one of {sorted(VARIANTS)}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.k_modes < 1 or self.n_targets < 1:
            raise ValueError("k_modes and n_targets must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kwargs = {cls._ALIASES.get(k, k): v for k, v in d.items()}
        return cls(**kwargs).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


LOSS_FIELDS = ("l_tar_full", "l_reg_full", "l_cls_full",
               "l_tar_part", "l_reg_part", "l_cls_part", "l_mmd")


@dataclass
class LossBreakdown:
    l_tar_full: float | None = None
    l_reg_full: float | None = None
    l_cls_full: float | None = None
    l_tar_part: float | None = None
    l_reg_part: float | None = None
    l_cls_part: float | None = None
    l_mmd: float | None = None
    total: float = 0.0

    def components(self) -> dict:
        return {name: getattr(self, name) for name in LOSS_FIELDS}


def mmd_loss(full: SceneFeatures, part: SceneFeatures) -> torch.Tensor:
    """Empirical MMD between pooled feature vectors of the two branches.

    Per sample the vector concatenates the time-mean of the focal embeddings
    with the neighbor-means of the agent and interaction embeddings; the loss
    is the squared L2 distance between the two batch means.
    """
    if not full.same_shapes(part):
        raise ValueError("branch features have mismatched shapes")

    def pooled(f: SceneFeatures) -> torch.Tensor:
        parts = [f.focal.mean(dim=1)]
        for t in (f.agents, f.focal_to_agents):
            if t.shape[1] > 0:
                parts.append(t.mean(dim=1))
            else:
                parts.append(t.new_zeros(t.shape[0], t.shape[2]))
        return torch.cat(parts, dim=-1)

    diff = pooled(full).mean(dim=0) - pooled(part).mean(dim=0)
    return (diff ** 2).sum()


def _branch_losses(targets, forecast, futures: torch.Tensor, winner: torch.Tensor,
                   use_targets: bool) -> dict[str, torch.Tensor]:
    losses = {}
    if use_targets:
        losses["tar"] = target_loss(targets, futures, winner).mean()
    losses["reg"] = regression_loss(forecast, futures, winner).mean()
    losses["cls"] = classification_loss(forecast, futures).mean()
    return losses


def train_step(model: ForecastModel, optimizer: torch.optim.Optimizer,
               batch, mask_schedule: dict, step_seed: int, variant: str = "tsd",
               grad_clip: float = 5.0, debug: dict | None = None,
               pack_cache: dict | None = None) -> LossBreakdown:
    """One optimization step over a scenario batch. Updates model in place.

    When two branches are active they run as one concatenated forward pass
    through the shared parameters; every model operation is row-independent,
    so this equals two separate passes.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    flags = VARIANTS[variant]
    dtype = next(model.parameters()).dtype
    bsz = len(batch)

    pack_full = pack_scenarios(batch, None, dtype=dtype, cache=pack_cache)
    futures = pack_full.futures

    if flags.two_branch:
        seeds = np.random.SeedSequence(step_seed).generate_state(bsz)
        masks = [sample_mask(mask_schedule, s.t_obs, s.num_neighbors, int(seeds[i]))
                 for i, s in enumerate(batch)]
        pack_part = pack_scenarios(batch, masks, dtype=dtype, cache=pack_cache)
        out = model(concat_packs(pack_full, pack_part), use_targets=flags.use_targets)
        feats_full = out.features.batch_slice(0, bsz)
        feats_part = out.features.batch_slice(bsz, 2 * bsz)
        targets_full = out.targets.batch_slice(0, bsz) if out.targets is not None else None
        targets_part = out.targets.batch_slice(bsz, 2 * bsz) if out.targets is not None else None
        fc_full = out.forecast.batch_slice(0, bsz)
        fc_part = out.forecast.batch_slice(bsz, 2 * bsz)
    else:
        out = model(pack_full, use_targets=flags.use_targets, branch="full")
        feats_full, targets_full, fc_full = out.features, out.targets, out.forecast
        feats_part = targets_part = fc_part = None

    if flags.use_targets:
        winner = select_best_mode(targets_full, futures)
    else:
        winner = select_best_endpoint_mode(fc_full, futures)

    full_losses = _branch_losses(targets_full, fc_full, futures, winner, flags.use_targets)
    terms = dict(
        l_tar_full=full_losses.get("tar"),
        l_reg_full=full_losses["reg"],
        l_cls_full=full_losses["cls"],
        l_tar_part=None, l_reg_part=None, l_cls_part=None, l_mmd=None,
    )

    if flags.two_branch:
        part_losses = _branch_losses(targets_part, fc_part, futures, winner, flags.use_targets)
        terms["l_tar_part"] = part_losses.get("tar")
        terms["l_reg_part"] = part_losses["reg"]
        terms["l_cls_part"] = part_losses["cls"]
        if flags.use_mmd:
            terms["l_mmd"] = mmd_loss(feats_full, feats_part)
        if debug is not None:
            debug["winner_full"] = winner.clone()
            debug["winner_partial"] = winner.clone()  # shared by construction
            debug["masks"] = masks

    active = [t for t in terms.values() if t is not None]
    total = torch.stack(active).sum()
    if not torch.isfinite(total):
        detail = {k: (float(v) if v is not None else None) for k, v in terms.items()}
        raise TrainingError(f"non-finite training loss at seed {step_seed}: {detail}")

    optimizer.zero_grad()
    total.backward()
    if grad_clip and grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
    optimizer.step()

    floats = {k: (float(v.detach()) if v is not None else None) for k, v in terms.items()}
    return LossBreakdown(total=sum(v for v in floats.values() if v is not None), **floats)


def _loss_csv_rows(history: list[LossBreakdown]) -> list[list]:
    rows = [["step", *LOSS_FIELDS, "total"]]
    for step, bd in enumerate(history, start=1):
        row = [step]
        for name in LOSS_FIELDS:
            v = getattr(bd, name)
            row.append("" if v is None else format(v, ".9g"))
        row.append(format(bd.total, ".9g"))
        rows.append(row)
    return rows


def train(dataset, config: TrainConfig, out_dir=None) -> tuple[ForecastModel, list[LossBreakdown]]:
    """Train a model on a scenario list; optionally write ckpt.bin + losses.csv."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    config.validate()
    t_pred = dataset[0].t_pred
    t_obs = dataset[0].t_obs
    model = ForecastModel.create(
        d=config.d_model, heads=config.n_heads, num_modes=config.k_modes,
        num_targets=config.n_targets, t_pred=t_pred, seed=config.seed,
        max_steps=max(64, t_obs))
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr,
                                 weight_decay=config.weight_decay)

    history: list[LossBreakdown] = []
    pack_cache: dict = {}
    step = 0
    for epoch in range(config.epochs):
        order_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([config.seed, 1000 + epoch])))
        order = order_rng.permutation(len(dataset))
        for lo in range(0, len(dataset), config.batch_size):
            batch = [dataset[i] for i in order[lo:lo + config.batch_size]]
            step += 1
            step_seed = int(np.random.SeedSequence([config.seed, 5000 + step]).generate_state(1)[0])
            bd = train_step(model, optimizer, batch, config.mask_schedule,
                            step_seed, variant=config.variant, grad_clip=config.grad_clip,
                            pack_cache=pack_cache)
            history.append(bd)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        model.save(out_dir / "ckpt.bin", extra_config={"variant": config.variant,
                                                       "train_seed": config.seed})
        with open(out_dir / "losses.csv", "w", newline="") as f:
            csv.writer(f).writerows(_loss_csv_rows(history))
        with open(out_dir / "train_config.json", "w") as f:
            json.dump(config.to_dict(), f, indent=1)
    return model, history
