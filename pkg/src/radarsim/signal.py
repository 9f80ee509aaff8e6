"""SFCW intermediate-frequency synthesis from captured propagation paths.

Each path of length d contributes exp(-2*pi*j * (f0 + n*delta_f) * d / c) to
its channel at frequency step n; a channel's IF sample is the coherent sum
over its paths.  Channels without paths are exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import SPEED_OF_LIGHT
from .raytracer import PathSet

_MAX_PATHS_PER_CHANNEL = 10**8
_CHUNK_ROWS = 65536


@dataclass(frozen=True)
class SfcwConfig:
    """Stepped-frequency grid f0 + n*delta_f, n in [0, n_steps)."""

    f0: float  # Hz
    delta_f: float  # Hz
    n_steps: int
    c: float = SPEED_OF_LIGHT  # m/s

    def __post_init__(self):
        if self.f0 <= 0.0:
            raise ValueError("f0 must be positive")
        if self.delta_f <= 0.0:
            raise ValueError("delta_f must be positive")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")

    @property
    def bandwidth(self) -> float:
        return self.delta_f * (self.n_steps - 1)

    @property
    def frequencies(self) -> np.ndarray:
        return self.f0 + self.delta_f * np.arange(self.n_steps)

    @classmethod
    def default_band(cls) -> "SfcwConfig":
        """128 steps spanning 72-82 GHz inclusive (delta_f = 10 GHz / 127)."""
        return cls(f0=72e9, delta_f=10e9 / 127.0, n_steps=128)


@dataclass(frozen=True)
class IFDataCube:
    """Complex IF samples indexed [tx, rx, frequency step]."""

    values: np.ndarray  # (n_tx, n_rx, n_steps) complex128
    config: SfcwConfig

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 3:
            raise ValueError(f"cube must be 3-d (tx, rx, step), got shape {v.shape}")
        if v.shape[2] != self.config.n_steps:
            raise ValueError(
                f"cube has {v.shape[2]} steps but config declares {self.config.n_steps}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("cube contains non-finite samples")
        object.__setattr__(self, "values", v)

    @property
    def n_tx(self) -> int:
        return self.values.shape[0]

    @property
    def n_rx(self) -> int:
        return self.values.shape[1]


def path_length(tx: np.ndarray, scatter_points: np.ndarray, rx: np.ndarray) -> float:
    """Geometric path length tx -> p1 -> ... -> pm -> rx in meters."""
    pts = np.asarray(scatter_points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("at least one scatter point is required")
    tx = np.asarray(tx, dtype=np.float64).reshape(3)
    rx = np.asarray(rx, dtype=np.float64).reshape(3)
    d = np.linalg.norm(pts[0] - tx)
    if len(pts) > 1:
        d += np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
    d += np.linalg.norm(rx - pts[-1])
    return float(d)


def synthesize_if(paths: PathSet, cfg: SfcwConfig) -> IFDataCube:
    """Sum unit-amplitude phasors over every captured path, per channel.

    Accumulation runs in complex128; the deterministic per-channel order of
    the PathSet fixes the summation order.  When the trace was configured
    with amplitude_spreading, each contribution is weighted by 1/d^2.
    """
    n_tx, n_rx = paths.n_tx, paths.n_rx
    cube = np.zeros((n_tx, n_rx, cfg.n_steps), dtype=np.complex128)
    if len(paths) == 0:
        return IFDataCube(cube, cfg)

    counts = paths.channel_counts()
    worst = int(counts.max())
    if worst > _MAX_PATHS_PER_CHANNEL:
        raise ValueError(
            f"channel holds {worst} paths (> {_MAX_PATHS_PER_CHANNEL}); refusing to accumulate"
        )

    d = paths.total_length
    amp = (1.0 / d**2) if paths.config.amplitude_spreading else None
    freqs = cfg.frequencies
    flat = cube.reshape(n_tx * n_rx, cfg.n_steps)
    key = paths.tx_index.astype(np.int64) * n_rx + paths.rx_index.astype(np.int64)
    # paths are sorted by channel, so each channel is one contiguous row block
    boundaries = np.flatnonzero(np.diff(key)) + 1
    starts = np.concatenate(([0], boundaries))
    stops = np.concatenate((boundaries, [len(d)]))

    for lo in range(0, len(d), _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, len(d))
        phases = np.exp(d[lo:hi, None] * (-2j * np.pi / cfg.c) * freqs[None, :])
        if amp is not None:
            phases *= amp[lo:hi, None]
        inside = (starts < hi) & (stops > lo)
        for s, e, k in zip(starts[inside], stops[inside], key[starts[inside]]):
            flat[k] += phases[max(s, lo) - lo : min(e, hi) - lo].sum(axis=0)

    return IFDataCube(cube, cfg)
