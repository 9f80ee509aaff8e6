"""Pydantic request/response models for the simulation service.

All file and directory fields refer to paths on the machine running the
service; the pipeline stages exchange data through the on-disk formats
(.rsp path sets, .rsc cubes, .rsi image pairs), not through request bodies.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class GridModel(BaseModel):
    counts: tuple[int, int, int] = (128, 128, 64)
    spacing: tuple[float, float, float] = (0.005, 0.005, 0.005)
    origin: Optional[tuple[float, float, float]] = None
    center: Optional[tuple[float, float, float]] = None  # used when origin is omitted


class TraceRequest(BaseModel):
    mesh_path: str
    array: str = Field("paper-94", description="builtin layout name or layout JSON path")
    alpha: float = Field(0.3, ge=0.0, le=1.0)
    rays_per_tx: int = Field(20000, ge=1)
    max_bounces: int = Field(3, ge=1)
    perception_radius: Optional[float] = Field(None, gt=0.0)
    seed: int = 0
    out_path: str


class TraceResponse(BaseModel):
    out_path: str
    n_paths: int
    zero_paths: bool
    n_channels_hit: int
    elapsed_s: float


class SfcwModel(BaseModel):
    f0: float = 72e9
    delta_f: float = 10e9 / 127.0
    n_steps: int = 128


class SynthesizeRequest(BaseModel):
    paths_path: str
    sfcw: SfcwModel = SfcwModel()
    out_path: str


class SynthesizeResponse(BaseModel):
    out_path: str
    dims: tuple[int, int, int]
    elapsed_s: float


class ImageRequest(BaseModel):
    cube_path: str
    array: str = "paper-94"
    grid: GridModel = GridModel()
    label: Optional[str] = None
    normalize: bool = True
    preview_png: bool = False
    out_path: str


class ImageResponse(BaseModel):
    out_path: str
    dims: tuple[int, int]
    peak_intensity: float
    preview_paths: list[str] = []
    elapsed_s: float


class GenerateRequest(BaseModel):
    config_path: Optional[str] = None
    config: Optional[dict] = None  # inline generation config (same schema as the file)
    base_dir: str = "."  # resolves relative mesh/layout paths of an inline config
    out_dir: str
    resume: bool = False
    preview_png: bool = False


class GenerateResponse(BaseModel):
    out_dir: str
    manifest: str
    n_samples: int
    n_written: int
    n_skipped: int
    n_zero_paths: int
    elapsed_s: float


class AugmentModel(BaseModel):
    flip_horizontal: bool = True
    flip_vertical: bool = True
    rotation_deg: tuple[float, float] = (0.0, 30.0)
    scale_range: tuple[float, float] = (0.70, 1.00)
    blur_sigma: float = 1.0


class AugmentRequest(BaseModel):
    in_dir: str
    out_dir: str
    seed: int
    config: AugmentModel = AugmentModel()


class AugmentResponse(BaseModel):
    out_dir: str
    manifest: str
    n_images: int
    elapsed_s: float


class HealthResponse(BaseModel):
    status: str
    version: str
