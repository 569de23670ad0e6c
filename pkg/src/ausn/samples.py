"""Small deterministic tensors shipped with the package for demos and smoke tests."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .formats import save_tensor

SAMPLES = ("normal_4096.npy", "normal_4096.f32", "weights_16x64.npy", "activations_64.npy")
DEFAULT_SEED = 20201


def sample_path(name: str) -> Path:
    if name not in SAMPLES:
        raise KeyError(f"unknown sample {name!r}; available: {', '.join(SAMPLES)}")
    return Path(str(resources.files("ausn") / "data" / name))


def synthetic(kind: str, shape, seed: int = DEFAULT_SEED, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if kind == "normal":
        x = rng.standard_normal(shape)
    elif kind == "relu":
        x = np.maximum(rng.standard_normal(shape), 0.0)
    elif kind == "laplace":
        x = rng.laplace(size=shape)
    else:
        raise ValueError(f"unknown distribution {kind!r}")
    return (scale * x).astype(np.float32)


def write_samples(directory, seed: int = DEFAULT_SEED) -> list[Path]:
    """Regenerate the bundled sample files into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    normal = synthetic("normal", (64, 64), seed, scale=0.05)
    return [
        save_tensor(directory / "normal_4096.npy", normal),
        save_tensor(directory / "normal_4096.f32", normal, name="normal_4096"),
        save_tensor(directory / "weights_16x64.npy", synthetic("normal", (16, 64), seed + 1, 0.1)),
        save_tensor(directory / "activations_64.npy", synthetic("relu", (64,), seed + 2)),
    ]
