"""Composite forecasting model: encoder, target generator, trajectory decoder.

The model owns the full parameter set; training variants differ only in which
loss terms and guidance paths they exercise, never in the parameters, so every
variant has an identical checkpoint layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from . import checkpoint as ckpt_io
from .decoder import Forecast, TrajectoryDecoder
from .encoder import SceneEncoder, SceneFeatures
from .packing import PackedScenes, pack_scenarios
from .targets import TargetGenerator, TargetSet


@dataclass
class BranchOutput:
    features: SceneFeatures
    targets: TargetSet | None
    forecast: Forecast
    branch: str  # "full" | "partial"


class ForecastModel(nn.Module):
    def __init__(self, d: int = 64, heads: int = 8, num_modes: int = 6,
                 num_targets: int = 3, t_pred: int = 30,
                 max_steps: int = 64, max_targets: int = 8):
        super().__init__()
        if t_pred % num_targets != 0:
            raise ValueError(f"t_pred {t_pred} not divisible by num_targets {num_targets}")
        self.d = d
        self.heads = heads
        self.num_modes = num_modes
        self.num_targets = num_targets
        self.t_pred = t_pred
        self.encoder = SceneEncoder(d, heads, max_steps)
        self.target_gen = TargetGenerator(d, heads, num_modes, max_targets)
        self.decoder = TrajectoryDecoder(d, heads, num_modes, t_pred // num_targets)

    def reset_parameters(self, gen: torch.Generator) -> None:
        self.encoder.reset_parameters(gen)
        self.target_gen.reset_parameters(gen)
        self.decoder.reset_parameters(gen)

    @classmethod
    def create(cls, d: int, heads: int, num_modes: int, num_targets: int,
               t_pred: int, seed: int, max_steps: int = 64, max_targets: int = 8) -> "ForecastModel":
        model = cls(d, heads, num_modes, num_targets, t_pred, max_steps, max_targets)
        model.reset_parameters(torch.Generator().manual_seed(seed))
        return model

    def config(self) -> dict:
        return {
            "d": self.d,
            "heads": self.heads,
            "num_modes": self.num_modes,
            "num_targets": self.num_targets,
            "t_pred": self.t_pred,
            "max_steps": self.encoder.max_steps,
            "max_targets": self.target_gen.max_targets,
        }

    def forward(self, pack: PackedScenes, use_targets: bool = True,
                branch: str = "full") -> BranchOutput:
        feats = self.encoder(pack)
        if use_targets:
            targets = self.target_gen(feats, self.num_targets)
            embeddings = targets.embeddings
        else:
            targets = None
            embeddings = feats.focal.new_zeros(
                feats.batch_size, self.num_modes, self.num_targets, self.d)
        forecast = self.decoder(feats, embeddings)
        return BranchOutput(features=feats, targets=targets, forecast=forecast, branch=branch)

    def forecast_scenarios(self, scenarios, masks=None, use_targets: bool = True,
                           batch_size: int = 128) -> Forecast:
        """Forecast a list of scenarios in evaluation mode (no gradients)."""
        mus, bs, pis = [], [], []
        with torch.no_grad():
            for lo in range(0, len(scenarios), batch_size):
                chunk = scenarios[lo:lo + batch_size]
                chunk_masks = masks[lo:lo + batch_size] if masks is not None else None
                pack = pack_scenarios(chunk, chunk_masks,
                                      dtype=next(self.parameters()).dtype)
                out = self.forward(pack, use_targets=use_targets)
                mus.append(out.forecast.mu)
                bs.append(out.forecast.b)
                pis.append(out.forecast.pi)
        return Forecast(mu=torch.cat(mus), b=torch.cat(bs), pi=torch.cat(pis))

    def save(self, path, extra_config: dict | None = None) -> None:
        cfg = self.config()
        if extra_config:
            cfg.update(extra_config)
        named = {name: p for name, p in self.named_parameters()}
        ckpt_io.save_checkpoint(named, path, model_config=cfg)

    @classmethod
    def load(cls, path) -> "ForecastModel":
        tensors, manifest = ckpt_io.load_checkpoint(path)
        cfg = manifest.get("model")
        if cfg is None:
            raise ValueError(f"manifest for {path} lacks a model section")
        model = cls(d=cfg["d"], heads=cfg["heads"], num_modes=cfg["num_modes"],
                    num_targets=cfg["num_targets"], t_pred=cfg["t_pred"],
                    max_steps=cfg["max_steps"], max_targets=cfg["max_targets"])
        state = {name: tensors[name] for name, _ in model.named_parameters()}
        model.load_state_dict(state)
        return model
