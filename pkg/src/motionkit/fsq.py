"""Finite scalar quantization.

Each latent dimension is bounded with ``floor(L/2) * tanh(z)`` and
rounded to the nearest integer, giving codes in
``{-floor(L/2), ..., +floor(L/2)}`` without any learned codebook.  For
odd L this is exactly L levels and the codebook has ``L**D`` entries;
for even L the same symmetric rule is kept (saturating at
``+-floor(L/2)``), which yields L+1 integer levels.

The gradient contract is straight-through at the round: gradients pass
through the tanh bounding unchanged by the rounding step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FsqSpec:
    dims: int = 8
    levels: int = 8

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")

    @property
    def half(self) -> int:
        return self.levels // 2

    @property
    def codebook_size(self) -> int:
        return self.levels**self.dims


@dataclass(frozen=True)
class UniversalToken:
    codes: np.ndarray  # (D,) int
    continuous_value: np.ndarray  # (D,) bounded pre-round value

    def __post_init__(self):
        if np.any(self.codes != np.rint(self.continuous_value)):
            raise ValueError("codes must equal rint(continuous_value)")

    def key(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.codes)


def fsq_bound(z: np.ndarray, spec: FsqSpec) -> np.ndarray:
    """The smooth bounding stage: floor(L/2) * tanh(z)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.dims:
        raise ValueError(f"expected last dim {spec.dims}, got {z.shape[-1]}")
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite input to fsq_bound")
    return spec.half * np.tanh(z)


def fsq_bound_grad(z: np.ndarray, spec: FsqSpec) -> np.ndarray:
    """d bound / d z, elementwise."""
    z = np.asarray(z, dtype=float)
    return spec.half * (1.0 - np.tanh(z) ** 2)


def fsq_quantize(z: np.ndarray, spec: FsqSpec) -> UniversalToken:
    bounded = fsq_bound(z, spec)
    codes = np.rint(bounded).astype(int)
    return UniversalToken(codes=codes, continuous_value=bounded)


def fsq_codes(bounded: np.ndarray) -> np.ndarray:
    """Round already-bounded values to integer codes (batch friendly)."""
    return np.rint(np.asarray(bounded, dtype=float)).astype(int)


def enumerate_codes(spec: FsqSpec, grid_points_per_dim: int = 33):
    """Distinct code tuples reached by a dense input grid.

    For odd ``levels`` this enumerates the full codebook of size
    ``levels**dims``.
    """
    axis = np.linspace(-6.0, 6.0, grid_points_per_dim)
    seen = set()
    grids = np.meshgrid(*([axis] * spec.dims), indexing="ij")
    flat = np.stack([g.reshape(-1) for g in grids], axis=-1)
    bounded = spec.half * np.tanh(flat)
    codes = np.rint(bounded).astype(int)
    for row in codes:
        seen.add(tuple(int(c) for c in row))
    return seen
