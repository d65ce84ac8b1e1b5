"""Command-line entry points: detect, eval, sweep, synth, bridge-debug.

Exit codes: 0 success, 2 invalid arguments, 3 backend failure, 4 I/O or
dataset errors. Every output directory receives a resolved-config snapshot
sufficient to reproduce the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import bench, dataset
from .backends.base import BackendBundle
from .backends.scene import generate_corpus
from .backends.synthetic import SyntheticBackend
from .backends.wire import RemoteBackend
from .bridge import build_bridged_sequence
from .errors import BackendError, ConfigError, DatasetError
from .metrics import PairEval, build_report, compute_metrics, format_report, pct, report_csv_rows
from .pipeline import PipelineConfig, run_pipeline
from .query import QuerySpec
from .raster import RasterImage, load_image_png, save_image_png, save_mask_png

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_IO = 4
EXIT_INTERRUPTED = 130

ENV_BACKEND_URL = "OVCD_BACKEND_URL"


def _make_backend(selector: str) -> BackendBundle:
    if selector == "synthetic":
        return BackendBundle.single(SyntheticBackend())
    if selector == "remote":
        url = os.environ.get(ENV_BACKEND_URL)
        if not url:
            raise ConfigError(f"--backend remote needs {ENV_BACKEND_URL} or remote:URL")
        return BackendBundle.single(RemoteBackend(url))
    if selector.startswith("remote:"):
        return BackendBundle.single(RemoteBackend(selector.split(":", 1)[1]))
    raise ConfigError(f"unknown backend {selector!r} (use synthetic or remote:URL)")


def _load_config(path: Optional[str], overrides: dict) -> PipelineConfig:
    payload = {}
    if path:
        with open(path, encoding="utf-8") as fp:
            payload = json.load(fp)
    payload.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig.from_dict(payload)


def _write_config_snapshot(out_dir: Path, config: PipelineConfig) -> None:
    with open(out_dir / "config.json", "w", encoding="utf-8") as fp:
        json.dump(config.to_dict(), fp, indent=2, sort_keys=True)


def _parse_queries(raw_queries: list[str]) -> list[QuerySpec]:
    queries = []
    for i, raw in enumerate(raw_queries):
        prompts = [p.strip() for p in raw.split(",") if p.strip()]
        if not prompts:
            raise ConfigError(f"empty query: {raw!r}")
        qid = f"q{i:02d}_{prompts[0].replace(' ', '_')}"
        queries.append(QuerySpec(query_id=qid, prompts=prompts))
    return queries


def _overlay(image: RasterImage, mask) -> RasterImage:
    """Change pixels blended toward red on top of the second acquisition."""
    out = image.data.astype(np.float32).copy()
    red = np.array([255.0, 32.0, 32.0], dtype=np.float32)
    out[mask.bits] = 0.5 * out[mask.bits] + 0.5 * red
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------


def cmd_detect(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _load_config(
        args.config,
        {
            "k_transition": args.k_transition,
            "tau": args.tau,
            "theta_match": args.theta,
            "tile_size": args.tile_size,
            "tile_stride": args.tile_stride,
            "seed": args.seed,
        },
    )
    _write_config_snapshot(out_dir, config)
    backends = _make_backend(args.backend)
    t1 = load_image_png(args.t1)
    t2 = load_image_png(args.t2)
    queries = _parse_queries(args.query)

    manifest = {
        "status": "partial",
        "t1": str(args.t1),
        "t2": str(args.t2),
        "backend": args.backend,
        "config": config.to_dict(),
        "queries": [],
    }
    exit_code = EXIT_OK
    try:
        outputs = run_pipeline(t1, t2, queries, config, backends)
        for query in queries:
            result = outputs.results.get(query.query_id)
            if result is None:
                manifest["queries"].append(
                    {
                        "query_id": query.query_id,
                        "status": "error",
                        "error": outputs.failures.get(query.query_id, "unknown failure"),
                    }
                )
                exit_code = EXIT_BACKEND
                continue
            mask_name = f"{query.query_id}_mask.png"
            overlay_name = f"{query.query_id}_overlay.png"
            save_mask_png(result.change_mask, out_dir / mask_name)
            save_image_png(_overlay(t2, result.change_mask), out_dir / overlay_name)
            manifest["queries"].append(
                {
                    "query_id": query.query_id,
                    "status": "ok",
                    "prompts": query.prompts,
                    "selected_prompt": result.selected_prompt,
                    "mask": mask_name,
                    "overlay": overlay_name,
                    "change_area": result.change_mask.area(),
                    "matched_pairs": [list(p) for p in result.matched_pairs],
                    "unmatched_t1": result.unmatched_t1,
                    "unmatched_t2": result.unmatched_t2,
                    "instances": {
                        "t1": [
                            {"id": i, "area": a, "matched": i not in result.unmatched_t1}
                            for i, a in sorted(result.instance_areas_t1.items())
                        ],
                        "t2": [
                            {"id": i, "area": a, "matched": i not in result.unmatched_t2}
                            for i, a in sorted(result.instance_areas_t2.items())
                        ],
                    },
                }
            )
        manifest["status"] = "complete" if exit_code == EXIT_OK else "partial"
    except KeyboardInterrupt:
        manifest["status"] = "interrupted"
        exit_code = EXIT_INTERRUPTED
    finally:
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as fp:
            json.dump(manifest, fp, indent=2, sort_keys=True)
    return exit_code


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    scenes = generate_corpus(args.seed, args.n, size=args.size)
    dataset.write_corpus(scenes, args.out, seed=args.seed)
    print(f"wrote {args.n} pairs to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    gt = dataset.scan_label_dir(args.gt)
    pred = dataset.scan_label_dir(args.pred)
    missing = sorted(set(gt) - set(pred))
    if missing:
        raise DatasetError(f"predictions missing for {len(missing)} pairs, first: {missing[0]}")

    pairs = []
    for (category, name), gt_path in sorted(gt.items()):
        truth = dataset.load_mask(gt_path)
        guess = dataset.load_mask(pred[(category, name)])
        counts, metrics = compute_metrics(guess, truth)
        pairs.append(PairEval(name=name, category=category, counts=counts, metrics=metrics))

    report = build_report(pairs, config={"pred": str(args.pred), "gt": str(args.gt)})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "invocation.json", "w", encoding="utf-8") as fp:
        json.dump(report.config, fp, indent=2, sort_keys=True)
    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fp:
        csv.writer(fp).writerows(report_csv_rows(report))
    (out_dir / "report.txt").write_text(format_report(report), encoding="utf-8")
    print(
        f"pairs {len(pairs)}  micro f1 {pct(report.micro.f1)}  iou {pct(report.micro.iou)}  "
        f"mean_f1 {pct(report.mean_f1)}  mean_iou {pct(report.mean_iou)}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _grid_from_file(path: str) -> tuple[list[tuple[str, dict]], str, Optional[str], dict]:
    with open(path, encoding="utf-8") as fp:
        payload = json.load(fp)
    preset = payload.get("preset")
    if preset == "ablation":
        grid = bench.ablation_grid()
    elif preset == "k":
        grid = bench.transition_count_grid(payload.get("values", (0, 1, 3, 5)))
    elif preset is None:
        rows = payload.get("rows")
        if not rows:
            raise ConfigError("grid file needs 'preset' or a nonempty 'rows' list")
        grid = [(row["name"], row.get("overrides", {})) for row in rows]
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    delta_mode = payload.get("delta_mode", "previous" if preset == "k" else "baseline")
    return grid, delta_mode, payload.get("baseline"), payload.get("base", {})


def cmd_sweep(args: argparse.Namespace) -> int:
    grid, delta_mode, baseline, base_overrides = _grid_from_file(args.grid)
    if args.data:
        items = bench.dataset_eval_items(dataset.scan_dataset(args.data))
    else:
        items = bench.scene_eval_items(generate_corpus(args.seed, args.n, size=args.size))

    base_config = PipelineConfig.from_dict(base_overrides)
    backends = _make_backend(args.backend)
    result = bench.run_sweep(grid, items, base_config, backends, delta_mode=delta_mode, baseline=baseline)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench.write_sweep_csv(result, out_dir / "sweep.csv")
    text = bench.format_sweep(result)
    (out_dir / "sweep.txt").write_text(text, encoding="utf-8")
    _write_config_snapshot(out_dir, base_config)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bridge-debug
# ---------------------------------------------------------------------------


def cmd_bridge_debug(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t1 = load_image_png(args.t1)
    t2 = load_image_png(args.t2)
    sequence = build_bridged_sequence(t1, t2, args.k)
    for index, frame in enumerate(sequence.frames):
        save_image_png(frame, out_dir / f"frame_{index:02d}.png")
    with open(out_dir / "invocation.json", "w", encoding="utf-8") as fp:
        json.dump({"t1": str(args.t1), "t2": str(args.t2), "k": args.k}, fp, indent=2)
    print(f"wrote {len(sequence.frames)} frames to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovcd", description="Open-vocabulary change detection over bi-temporal image pairs"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect query-conditioned changes in one pair")
    p.add_argument("--t1", required=True, help="first acquisition PNG")
    p.add_argument("--t2", required=True, help="second acquisition PNG")
    p.add_argument(
        "--query",
        action="append",
        required=True,
        help="query prompt(s); comma-separated synonyms; repeatable",
    )
    p.add_argument("--config", help="pipeline config JSON (flags override file values)")
    p.add_argument("--backend", default="synthetic", help="synthetic | remote[:URL]")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k-transition", type=int, dest="k_transition")
    p.add_argument("--tau", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--tile-size", type=int, dest="tile_size")
    p.add_argument("--tile-stride", type=int, dest="tile_stride")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="emit a synthetic benchmark corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="prediction masks (label layout)")
    p.add_argument("--gt", required=True, help="ground-truth masks (label layout)")
    p.add_argument("--out", default=".", help="where report.csv / report.txt go")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a config grid and tabulate metrics")
    p.add_argument("--grid", required=True, help="grid JSON (preset or explicit rows)")
    p.add_argument("--data", help="dataset directory (A/B/label layout)")
    p.add_argument("--seed", type=int, default=0, help="synthetic corpus seed (no --data)")
    p.add_argument("--n", type=int, default=8, help="synthetic corpus size (no --data)")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--backend", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bridge-debug", help="write the transition-frame sequence as PNGs")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bridge_debug)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (DatasetError, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
