"""Policy checkpoints: versioned npz with the tensors and a shape manifest,
plus a human-readable sidecar listing dims, grammar hash and config. Loads
refuse a grammar-hash mismatch so a policy never serves a different
ontology than it was trained on."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, CheckpointMismatch
from .net import PARAM_KEYS, PolicyConfig, PolicyParams

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    params: PolicyParams,
    grammar_hash: str,
    config: PolicyConfig,
    extra: dict | None = None,
):
    path = Path(path)
    meta = {
        "version": CHECKPOINT_VERSION,
        "grammar_hash": grammar_hash,
        "input_dim": params.input_dim,
        "hidden": params.hidden,
        "actions": params.actions,
        "config": {
            k: getattr(config, k)
            for k in (
                "hidden_size",
                "gamma_rl",
                "batch_episodes",
                "pool_capacity",
                "entropy_bonus",
                "value_weight",
                "importance_clip",
                "learning_rate",
                "grad_clip",
                "normalize_advantages",
            )
        },
        "extra": extra or {},
    }
    arrays = {k: params.tensors[k] for k in PARAM_KEYS}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)
    manifest = [f"version: {CHECKPOINT_VERSION}", f"grammar_hash: {grammar_hash}"]
    manifest.append(f"input_dim: {params.input_dim}")
    manifest.append(f"hidden: {params.hidden}")
    manifest.append(f"actions: {params.actions}")
    for key in PARAM_KEYS:
        manifest.append(f"tensor {key}: {'x'.join(map(str, params.tensors[key].shape))}")
    manifest.append("config: " + json.dumps(meta["config"], sort_keys=True))
    sidecar = path.with_suffix(path.suffix + ".manifest.txt")
    sidecar.write_text("\n".join(manifest) + "\n", encoding="utf-8")


def load_checkpoint(
    path: str | Path, expect_grammar_hash: str | None = None
) -> tuple[PolicyParams, dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {meta.get('version')!r}")
            tensors = {k: np.array(data[k]) for k in PARAM_KEYS}
    except (KeyError, ValueError, OSError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if expect_grammar_hash is not None and meta["grammar_hash"] != expect_grammar_hash:
        raise CheckpointMismatch(
            f"checkpoint trained on grammar {meta['grammar_hash']}, expected {expect_grammar_hash}"
        )
    params = PolicyParams(tensors, meta["input_dim"], meta["hidden"], meta["actions"])
    return params, meta
