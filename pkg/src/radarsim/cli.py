"""Command-line client for the simulation service.

Every pipeline command is a thin HTTP client: with --server it talks to a
running service, otherwise it mounts the service in-process (same request
and response schemas, no socket).  File paths always refer to the machine
the service runs on.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from . import __version__

_TIMEOUT = httpx.Timeout(None)  # trace/generate runs are long; no client timeout


def _post_inprocess(endpoint: str, payload: dict) -> httpx.Response:
    """Mount the ASGI app in-process; same request path, no socket."""
    import asyncio

    from .service.app import create_app

    async def run() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://radarsim.local", timeout=_TIMEOUT
        ) as client:
            return await client.post(endpoint, json=payload)

    return asyncio.run(run())


def _post(args, endpoint: str, payload: dict) -> int:
    try:
        if args.server:
            with httpx.Client(base_url=args.server.rstrip("/"), timeout=_TIMEOUT) as client:
                resp = client.post(endpoint, json=payload)
        else:
            resp = _post_inprocess(endpoint, payload)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        return 1
    print(json.dumps(resp.json(), indent=2))
    return 0


def _cmd_generate(args) -> int:
    return _post(
        args,
        "/generate",
        {
            "config_path": args.config,
            "out_dir": args.out,
            "resume": args.resume,
            "preview_png": args.preview_png,
        },
    )


def _cmd_augment(args) -> int:
    return _post(
        args,
        "/augment",
        {"in_dir": args.in_dir, "out_dir": args.out, "seed": args.seed},
    )


def _cmd_trace(args) -> int:
    payload = {
        "mesh_path": args.mesh,
        "array": args.array,
        "alpha": args.alpha,
        "rays_per_tx": args.rays,
        "max_bounces": args.max_bounces,
        "seed": args.seed,
        "out_path": args.out,
    }
    if args.radius is not None:
        payload["perception_radius"] = args.radius
    return _post(args, "/trace", payload)


def _cmd_synth(args) -> int:
    return _post(
        args,
        "/synthesize",
        {
            "paths_path": args.paths,
            "sfcw": {"f0": args.f0, "delta_f": args.delta_f, "n_steps": args.n_steps},
            "out_path": args.out,
        },
    )


def _cmd_image(args) -> int:
    grid = {"counts": args.grid_counts, "spacing": [args.grid_spacing] * 3}
    if args.grid_origin is not None:
        grid["origin"] = args.grid_origin
    else:
        grid["center"] = args.grid_center
    payload = {
        "cube_path": args.cube,
        "array": args.array,
        "grid": grid,
        "label": args.label,
        "normalize": not args.raw,
        "preview_png": args.preview_png,
        "out_path": args.out,
    }
    return _post(args, "/image", payload)


def _cmd_demo_assets(args) -> int:
    from .sampledata import write_demo_assets

    config_path = write_demo_assets(
        args.out, samples_per_class=args.samples, rays_per_tx=args.rays, base_seed=args.seed
    )
    print(json.dumps({"config": str(config_path)}, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("radarsim.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarsim",
        description="Radar mesh simulation, SFCW synthesis, matched-filter imaging and dataset generation.",
    )
    parser.add_argument("--version", action="version", version=f"radarsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", default=None, help="service URL; runs in-process when omitted")

    p = sub.add_parser("generate", help="generate a labeled dataset from a config file")
    p.add_argument("--config", required=True, help="generation config JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--resume", action="store_true", help="skip files whose header seed matches")
    p.add_argument("--preview-png", action="store_true", help="also write 8-bit PNG previews")
    add_server(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("augment", help="augment a dataset directory")
    p.add_argument("--in", dest="in_dir", required=True, help="input dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    add_server(p)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("trace", help="trace a posed mesh into a path set (.rsp)")
    p.add_argument("--mesh", required=True)
    p.add_argument("--array", default="paper-94", help="builtin name or layout JSON path")
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--rays", type=int, default=20000, help="rays per TX element")
    p.add_argument("--max-bounces", type=int, default=3)
    p.add_argument("--radius", type=float, default=None, help="perception-sphere radius (m)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    add_server(p)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("synth", help="synthesize the SFCW IF cube (.rsc) from a path set")
    p.add_argument("--paths", required=True)
    p.add_argument("--f0", type=float, default=72e9)
    p.add_argument("--delta-f", type=float, default=10e9 / 127.0)
    p.add_argument("--n-steps", type=int, default=128)
    p.add_argument("--out", required=True)
    add_server(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("image", help="matched-filter image pair (.rsi) from an IF cube")
    p.add_argument("--cube", required=True)
    p.add_argument("--array", default="paper-94")
    p.add_argument("--grid-counts", type=int, nargs=3, default=[128, 128, 64], metavar=("NX", "NY", "NZ"))
    p.add_argument("--grid-spacing", type=float, default=0.005)
    p.add_argument("--grid-center", type=float, nargs=3, default=[0.0, 0.0, 0.30], metavar=("X", "Y", "Z"))
    p.add_argument("--grid-origin", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"))
    p.add_argument("--label", default=None)
    p.add_argument("--raw", action="store_true", help="skip [0,1] normalization")
    p.add_argument("--preview-png", action="store_true")
    p.add_argument("--out", required=True)
    add_server(p)
    p.set_defaults(func=_cmd_image)

    p = sub.add_parser("demo-assets", help="write procedural demo meshes and a desk-scale config")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=2, help="samples per class")
    p.add_argument("--rays", type=int, default=3000, help="rays per TX element")
    p.add_argument("--seed", type=int, default=1234)
    p.set_defaults(func=_cmd_demo_assets)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
