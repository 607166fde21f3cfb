"""Trajectory forecasting robust to partially observed histories.

A compact scene encoder, anchor-free sequential target generation, and
target-guided multi-modal trajectory decoding, trained with two-branch
self-distillation (full and masked observations through shared parameters
with an MMD feature-alignment penalty) on synthetic kinematic scenarios.
"""

from .scenario import (AgentState, GeneratorConfig, Scenario, generate_dataset,
                       generate_scenario, load_dataset, rollout, save_dataset)
from .masking import (ObservationMask, apply_mask, continuous_mask, no_mask,
                      random_mask, sample_mask)
from .encoder import SceneEncoder, SceneFeatures, encode, encode_batch, init_encoder
from .targets import (TargetGenerator, TargetSet, generate_targets,
                      init_target_generator, select_best_mode, target_loss)
from .decoder import (Forecast, TrajectoryDecoder, classification_loss,
                      decode_trajectories, forecast_records,
                      init_trajectory_decoder, regression_loss)
from .model import BranchOutput, ForecastModel
from .packing import PackedScenes, pack_scenarios
from .distill import (LossBreakdown, TrainConfig, TrainingError, VARIANTS,
                      mmd_loss, train, train_step)
from .metrics import DegenerateInputError, EvalResult, evaluate, paired_t_test
from .harness import ExperimentSpec, run_experiment, write_report

__version__ = "0.1.0"

__all__ = [
    "AgentState", "GeneratorConfig", "Scenario", "generate_dataset",
    "generate_scenario", "load_dataset", "rollout", "save_dataset",
    "ObservationMask", "apply_mask", "continuous_mask", "no_mask",
    "random_mask", "sample_mask",
    "SceneEncoder", "SceneFeatures", "encode", "encode_batch", "init_encoder",
    "TargetGenerator", "TargetSet", "generate_targets", "init_target_generator",
    "select_best_mode", "target_loss",
    "Forecast", "TrajectoryDecoder", "classification_loss", "decode_trajectories",
    "forecast_records", "init_trajectory_decoder", "regression_loss",
    "BranchOutput", "ForecastModel", "PackedScenes", "pack_scenarios",
    "LossBreakdown", "TrainConfig", "TrainingError", "VARIANTS",
    "mmd_loss", "train", "train_step",
    "DegenerateInputError", "EvalResult", "evaluate", "paired_t_test",
    "ExperimentSpec", "run_experiment", "write_report",
    "__version__",
]
