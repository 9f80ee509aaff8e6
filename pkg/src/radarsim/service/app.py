"""FastAPI service exposing the simulation pipeline.

Endpoints wrap the core package stage by stage; requests and responses are
small JSON documents and all bulk data stays on the service filesystem.
Run with `radarsim serve` or `uvicorn radarsim.service.app:app`.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataset import AugmentConfig, GenerationConfig, augment_directory, generate_dataset
from ..formats import load_cube, load_pathset, save_cube, save_pair, save_pair_previews, save_pathset
from ..imaging import VoxelGrid, matched_filter, max_project, normalize_pair
from ..raytracer import MaterialParams, TraceConfig, default_perception_radius, trace_paths
from ..scene import Scene, load_mesh, resolve_array
from ..signal import SfcwConfig, synthesize_if
from .schemas import (
    AugmentRequest,
    AugmentResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    ImageRequest,
    ImageResponse,
    SynthesizeRequest,
    SynthesizeResponse,
    TraceRequest,
    TraceResponse,
)


def _grid_from_model(model) -> VoxelGrid:
    if model.origin is not None:
        return VoxelGrid(tuple(model.origin), tuple(model.spacing), tuple(model.counts))
    center = model.center if model.center is not None else (0.0, 0.0, 0.30)
    return VoxelGrid.centered(center, tuple(model.counts), tuple(model.spacing))


def create_app() -> FastAPI:
    app = FastAPI(title="radarsim", version=__version__)

    @app.exception_handler(ValueError)
    async def _value_error(request, exc: ValueError):
        raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/trace", response_model=TraceResponse)
    def trace(req: TraceRequest) -> TraceResponse:
        t0 = time.perf_counter()
        mesh = load_mesh(req.mesh_path)
        array = resolve_array(req.array)
        radius = req.perception_radius or default_perception_radius(array)
        scene = Scene(mesh, array, MaterialParams(req.alpha))
        config = TraceConfig(
            rays_per_tx=req.rays_per_tx,
            rng_seed=req.seed,
            max_bounces=req.max_bounces,
            perception_radius=radius,
        )
        paths = trace_paths(scene, config)
        Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
        save_pathset(paths, req.out_path)
        hit = int(np.count_nonzero(paths.channel_counts()))
        return TraceResponse(
            out_path=req.out_path,
            n_paths=paths.n_paths,
            zero_paths=paths.zero_paths,
            n_channels_hit=hit,
            elapsed_s=time.perf_counter() - t0,
        )

    @app.post("/synthesize", response_model=SynthesizeResponse)
    def synthesize(req: SynthesizeRequest) -> SynthesizeResponse:
        t0 = time.perf_counter()
        paths = load_pathset(req.paths_path)
        cfg = SfcwConfig(f0=req.sfcw.f0, delta_f=req.sfcw.delta_f, n_steps=req.sfcw.n_steps)
        cube = synthesize_if(paths, cfg)
        Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
        save_cube(cube, req.out_path)
        return SynthesizeResponse(
            out_path=req.out_path,
            dims=tuple(cube.values.shape),
            elapsed_s=time.perf_counter() - t0,
        )

    @app.post("/image", response_model=ImageResponse)
    def image(req: ImageRequest) -> ImageResponse:
        t0 = time.perf_counter()
        cube = load_cube(req.cube_path)
        array = resolve_array(req.array)
        grid = _grid_from_model(req.grid)
        volume = matched_filter(cube, array, grid)
        pair = max_project(volume)
        if req.normalize:
            pair = normalize_pair(pair)
        if req.label is not None:
            from ..imaging import RadarImagePair

            pair = RadarImagePair(
                intensity=pair.intensity,
                depth=pair.depth,
                grid=pair.grid,
                label=req.label,
                normalized=pair.normalized,
            )
        Path(req.out_path).parent.mkdir(parents=True, exist_ok=True)
        save_pair(pair, req.out_path)
        previews = []
        if req.preview_png:
            previews = save_pair_previews(pair, str(Path(req.out_path).with_suffix("")))
        return ImageResponse(
            out_path=req.out_path,
            dims=tuple(pair.intensity.shape),
            peak_intensity=float(pair.intensity.max(initial=0.0)),
            preview_paths=previews,
            elapsed_s=time.perf_counter() - t0,
        )

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        t0 = time.perf_counter()
        if (req.config_path is None) == (req.config is None):
            raise HTTPException(
                status_code=400, detail="provide exactly one of config_path or config"
            )
        if req.config_path is not None:
            cfg = GenerationConfig.from_file(req.config_path)
        else:
            cfg = GenerationConfig.from_dict(req.config, base_dir=req.base_dir)
        stats = generate_dataset(
            cfg, req.out_dir, resume=req.resume, preview_png=req.preview_png
        )
        return GenerateResponse(
            out_dir=req.out_dir, elapsed_s=time.perf_counter() - t0, **stats
        )

    @app.post("/augment", response_model=AugmentResponse)
    def augment(req: AugmentRequest) -> AugmentResponse:
        t0 = time.perf_counter()
        cfg = AugmentConfig(
            flip_horizontal=req.config.flip_horizontal,
            flip_vertical=req.config.flip_vertical,
            rotation_deg=tuple(req.config.rotation_deg),
            scale_range=tuple(req.config.scale_range),
            blur_sigma=req.config.blur_sigma,
        )
        stats = augment_directory(req.in_dir, req.out_dir, req.seed, cfg)
        return AugmentResponse(
            out_dir=req.out_dir, elapsed_s=time.perf_counter() - t0, **stats
        )

    return app


app = create_app()
