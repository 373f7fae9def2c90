"""Single executable over the whole library.

Subcommands: cluster, attend, track, bench, synth.  Global flags --seed,
--threads, --out-dir apply to every subcommand; --json reserves stdout
for a machine-readable result (human chatter goes to stderr).  Identical
inputs and --seed produce byte-identical outputs.

Exit codes: 0 success, 2 usage/config error, 3 I/O or file-format error,
4 numeric failure.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import formats
from .bench import run_suite
from .config import ConfigError, load_bench, load_scene, load_tracker
from .core import ShapeError
from .formats import FileFormatError
from .gmm import EmConfig, EmptyClusterError, build_prototype_set
from .memory import MemoryBank, aggregate, reconstruct_all
from .synth import generate_sequence, per_frame_mean_iou, run_tracker

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (EmptyClusterError, OverflowError, FloatingPointError,
                ZeroDivisionError) as exc:
            _fail(EXIT_NUMERIC, str(exc))
        except FileFormatError as exc:
            _fail(EXIT_IO, str(exc))
        except OSError as exc:
            _fail(EXIT_IO, str(exc))
        except (ConfigError, ShapeError, ValueError, KeyError) as exc:
            _fail(EXIT_CONFIG, str(exc))
    return wrapper


def _emit(ctx, payload: dict, human: str):
    if ctx.obj["json"]:
        click.echo(json.dumps(payload, sort_keys=True, indent=2))
    else:
        click.echo(human)


def _out_dir(ctx) -> Path:
    out = Path(ctx.obj["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.option("--seed", type=int, default=None,
              help="Override the seed from config files.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker cap for parallel suite rows.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True,
              help="Directory for generated files.")
@click.option("--json", "as_json", is_flag=True,
              help="Reserve stdout for a JSON result.")
@click.pass_context
def main(ctx, seed, threads, out_dir, as_json):
    """Prototype-condensed attention toolkit."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=max(1, threads), out_dir=out_dir,
                   json=as_json)


@main.command()
@click.argument("input_fmap", type=click.Path(exists=True, dir_okay=False))
@click.option("--protos", type=int, default=64, show_default=True)
@click.option("--iters", type=int, default=6, show_default=True)
@click.option("--sigma2", type=float, default=0.5, show_default=True)
@click.option("--init", type=click.Choice(["subsample", "farthest", "warm"]),
              default="subsample", show_default=True)
@click.option("--warm", "warm_path", type=click.Path(exists=True),
              help="Prototype file whose key means seed a warm start.")
@click.option("--values", "values_path", type=click.Path(exists=True),
              help="Value map; defaults to the input map itself.")
@click.option("--value-mode",
              type=click.Choice(["literal", "normalized", "hard"]),
              default="literal", show_default=True)
@click.pass_context
@guarded
def cluster(ctx, input_fmap, protos, iters, sigma2, init, warm_path,
            values_path, value_mode):
    """Condense a feature map into prototypes; write them plus the
    likelihood trace."""
    fmap = formats.read_fmap(input_fmap)
    keys = fmap.pixels()
    values = (formats.read_fmap(values_path).pixels()
              if values_path else keys)
    if values.shape[0] != keys.shape[0]:
        raise ConfigError("value map must match the input map pixel count")
    warm_means = None
    n_protos = protos
    if init == "warm":
        if warm_path is None:
            raise ConfigError("--init warm requires --warm FILE")
        warm_set = formats.read_prototype_set(warm_path)
        warm_means = warm_set.key_means
        n_protos = warm_set.n_protos
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else 0
    cfg = EmConfig(n_protos, sigma2, iters, init, warm_means, seed)
    protoset, trace = build_prototype_set(keys, values, cfg, value_mode)
    out = _out_dir(ctx)
    proto_path = out / "protos.pcap"
    trace_path = out / "trace.json"
    formats.write_prototype_set(proto_path, protoset)
    trace_path.write_text(json.dumps(
        {"log_likelihood": list(trace)}, indent=2) + "\n")
    _emit(ctx, {"protos": str(proto_path), "trace": str(trace_path),
                "n_protos": protoset.n_protos,
                "log_likelihood": list(trace)},
          f"wrote {proto_path} and {trace_path} "
          f"({protoset.n_protos} components, {iters} iterations)")


def _load_bank_dir(bank_dir: Path) -> MemoryBank:
    files = sorted(bank_dir.glob("*.pcap"))
    if not files:
        raise ConfigError(f"no .pcap files in bank directory {bank_dir}")
    bank = MemoryBank(capacity=len(files))
    for order, path in enumerate(files):
        stem_digits = "".join(ch for ch in path.stem if ch.isdigit())
        index = int(stem_digits) if stem_digits else order
        bank.push_frame(formats.read_prototype_set(path), index)
    return bank


@main.command()
@click.argument("query_fmap", type=click.Path(exists=True, dir_okay=False))
@click.argument("bank_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--values", "values_path", type=click.Path(exists=True),
              help="Current value map; defaults to the query map.")
@click.pass_context
@guarded
def attend(ctx, query_fmap, bank_dir, values_path):
    """Read a prototype bank with a query key map and aggregate over time.

    The bank directory holds one .pcap per stored frame; numeric filename
    stems order the frames."""
    query = formats.read_fmap(query_fmap)
    current = formats.read_fmap(values_path) if values_path else query
    bank = _load_bank_dir(Path(bank_dir))
    recons = reconstruct_all(bank, query)
    result = aggregate(recons, current)
    out = _out_dir(ctx)
    ybar_path = out / "ybar.fmap"
    weights_path = out / "weights.fmap"
    formats.write_fmap(ybar_path, result.y_bar)
    h, w, s = result.weights.shape
    from .core import FeatureMap

    formats.write_fmap(weights_path, FeatureMap(h, w, s, result.weights))
    _emit(ctx, {"ybar": str(ybar_path), "weights": str(weights_path),
                "frames_read": len(recons)},
          f"wrote {ybar_path} and {weights_path} ({len(recons)} memory frames)")


@main.command()
@click.argument("scene_config", type=click.Path(exists=True, dir_okay=False))
@click.option("--capacity", type=int, default=None,
              help="Override the tracker's memory capacity.")
@click.option("--instance/--no-instance", "use_instance", default=None,
              help="Toggle the per-object prototype stage.")
@click.pass_context
@guarded
def track(ctx, scene_config, capacity, use_instance):
    """Run the toy tracker on a scene config; write masks, JSON metrics,
    and a quality figure."""
    scene = load_scene(scene_config, seed_override=ctx.obj["seed"])
    overrides = {}
    if capacity is not None:
        overrides["capacity"] = capacity
    if use_instance is not None:
        overrides["use_instance"] = use_instance
    if ctx.obj["seed"] is not None:
        overrides["seed"] = ctx.obj["seed"]
    params = load_tracker(scene_config, overrides)
    output = run_tracker(scene, params)
    out = _out_dir(ctx)
    masks_dir = out / "masks"
    masks_dir.mkdir(exist_ok=True)
    frames_json = []
    for t, results in enumerate(output.frames):
        row = []
        for tid, mask in results:
            name = f"frame_{t:04d}_track_{tid:03d}.pgm"
            formats.write_pgm(masks_dir / name, mask.values)
            row.append({"track": tid, "mask": f"masks/{name}",
                        "area": mask.area, "box": mask.box})
        frames_json.append(row)
    _, gt_masks, _ = generate_sequence(scene)
    from .figures import render_track_figure

    render_track_figure(per_frame_mean_iou(output.frames, gt_masks),
                        per_frame_mean_iou(output.initial_frames, gt_masks),
                        out / "track.png")
    payload = {
        "metrics": output.metrics.as_dict(),
        "initial_metrics": output.initial_metrics.as_dict(),
        "frames": frames_json,
    }
    (out / "track.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")
    m = output.metrics
    _emit(ctx, payload,
          f"mean IoU {m.mean_iou:.4f} (initial "
          f"{output.initial_metrics.mean_iou:.4f}), "
          f"{m.id_switches} ID switches, sMOTSA-like {m.smotsa:.4f}; "
          f"outputs in {out}")


@main.command()
@click.argument("bench_config", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@guarded
def bench(ctx, bench_config):
    """Run the cost suite from a config file; write CSV, SVG, and PNG."""
    cfg = load_bench(bench_config)
    result = run_suite(cfg, _out_dir(ctx), threads=ctx.obj["threads"])
    _emit(ctx, {"rows": len(result["reports"]), "paths": result["paths"]},
          f"wrote {result['paths']['csv']} "
          f"({len(result['reports'])} rows), {result['paths']['svg']}")


@main.command()
@click.argument("scene_config", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@guarded
def synth(ctx, scene_config):
    """Generate a synthetic sequence: frames as .fmap, masks as PGM, ids
    as JSON."""
    scene = load_scene(scene_config, seed_override=ctx.obj["seed"])
    frames, gt_masks, gt_ids = generate_sequence(scene)
    out = _out_dir(ctx)
    frames_dir = out / "frames"
    masks_dir = out / "gt_masks"
    frames_dir.mkdir(exist_ok=True)
    masks_dir.mkdir(exist_ok=True)
    for t, frame in enumerate(frames):
        formats.write_fmap(frames_dir / f"frame_{t:04d}.fmap", frame)
        for i, mask in enumerate(gt_masks[t]):
            formats.write_pgm(masks_dir / f"frame_{t:04d}_obj_{i:02d}.pgm",
                              mask.values)
    ids_path = out / "ids.json"
    ids_path.write_text(json.dumps(
        {"object_ids": gt_ids, "n_frames": len(frames)},
        sort_keys=True, indent=2) + "\n")
    _emit(ctx, {"frames": len(frames), "objects": len(gt_ids),
                "out_dir": str(out)},
          f"wrote {len(frames)} frames and masks for {len(gt_ids)} objects "
          f"to {out}")


if __name__ == "__main__":
    main()
