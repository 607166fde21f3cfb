import numpy as np
import pytest
import torch

from tsdforecast import GeneratorConfig, generate_dataset, generate_scenario

torch.set_num_threads(1)


def futures_tensor(scenarios, dtype=torch.float32):
    arr = np.array([[[st.x, st.y] for st in s.focal_future] for s in scenarios])
    return torch.as_tensor(arr, dtype=dtype)


def params_to_numpy(module) -> dict:
    return {name: p.detach().cpu().double().numpy()
            for name, p in module.state_dict().items()}


def features_to_numpy(feats, idx: int = 0) -> dict:
    return {
        "focal": feats.focal[idx].detach().double().numpy(),
        "agents": feats.agents[idx].detach().double().numpy(),
        "map": feats.map[idx].detach().double().numpy(),
        "focal_to_agents": feats.focal_to_agents[idx].detach().double().numpy(),
        "focal_to_map": feats.focal_to_map[idx].detach().double().numpy(),
        "temporal": feats.temporal[idx].detach().double().numpy(),
        "focal_valid": feats.focal_valid[idx].numpy(),
        "poly_valid": feats.poly_valid[idx].numpy(),
    }


@pytest.fixture(scope="session")
def toy_config():
    return GeneratorConfig(t_obs=4, t_pred=4, num_neighbors=1, num_polylines=3,
                           noise_std=0.05, seed=123)


@pytest.fixture(scope="session")
def toy_scenarios(toy_config):
    return generate_dataset(toy_config, 6)


@pytest.fixture(scope="session")
def tiny_scenario():
    cfg = GeneratorConfig(t_obs=2, t_pred=2, num_neighbors=2, num_polylines=3,
                          noise_std=0.05, seed=321)
    return generate_scenario(cfg, 0)
