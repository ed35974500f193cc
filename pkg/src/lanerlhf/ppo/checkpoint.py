"""Policy checkpoints: tensors plus training provenance."""
from __future__ import annotations

from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional, Union

from ..nn import CheckpointError, load_tensors, save_tensors
from .network import PolicyNet
from .trainer import PpoConfig

KIND_POLICY = "policy"


def save_policy_checkpoint(
    path: Union[str, Path],
    policy: PolicyNet,
    config: PpoConfig,
    trained_steps: int,
    scenario_id: str,
    seed_lineage: Union[list, dict],
    extra_meta: Optional[dict] = None,
) -> dict:
    meta = {
        "kind": KIND_POLICY,
        "obs_dim": policy.obs_dim,
        "width": policy.width,
        "n_actions": policy.n_actions,
        "config": asdict(config),
        "trained_steps": trained_steps,
        "scenario_id": scenario_id,
        "seed_lineage": seed_lineage,
        "frozen": policy.params.frozen_names(),
    }
    if extra_meta:
        meta.update(extra_meta)
    save_tensors(path, policy.params.values_dict(), meta)
    return meta


def load_policy_checkpoint(
    path: Union[str, Path], expect_obs_dim: Optional[int] = None
) -> tuple[PolicyNet, dict]:
    """Rebuild the policy; validates kind, shapes, and optionally obs_dim."""
    tensors, meta = load_tensors(path)
    if meta.get("kind") != KIND_POLICY:
        raise CheckpointError(f"{path}: not a policy checkpoint (kind={meta.get('kind')!r})")
    obs_dim = int(meta["obs_dim"])
    if expect_obs_dim is not None and obs_dim != expect_obs_dim:
        raise CheckpointError(
            f"{path}: obs_dim {obs_dim} does not match the scenario's {expect_obs_dim}"
        )
    policy = PolicyNet(
        obs_dim=obs_dim, width=int(meta["width"]), n_actions=int(meta["n_actions"])
    )
    policy.params.load_values(tensors)
    return policy, meta


def config_from_meta(meta: dict) -> PpoConfig:
    known = {f.name for f in fields(PpoConfig)}
    return PpoConfig(**{k: v for k, v in meta.get("config", {}).items() if k in known})
