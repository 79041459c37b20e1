"""``facies-gtm`` command line: one subcommand per pipeline stage.

Every stage reads its inputs from, and writes its outputs to, fixed names in
``paths.output_dir`` (see :data:`ARTIFACTS`), so stages compose through the
file system and any one of them can be rerun alone.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import facies_classify as fc
from . import glcm_texture as gt
from . import latent_models as lm
from . import rbf_interp as ri
from . import render
from .config import ConfigError, PipelineConfig, load_config
from .volume_io import (
    FaciesMap,
    extract_slice,
    four_region_spec,
    generate_synthetic,
    load_facies_volume,
    load_volume,
    save_facies_volume,
    save_volume,
    slice_position,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

ARTIFACTS = {
    "attributes": "attributes.csv",
    "filled": "attributes_filled.csv",
    "report": "rbf_report.csv",
    "model": "gtm_model.json",
    "trace": "ll_trace.csv",
    "facies_csv": "facies.csv",
    "facies_volume": "facies",
    "legend": "legend.svg",
}
STAGES = ("attributes", "interpolate", "train", "classify", "render")


class StageError(RuntimeError):
    """A stage failed; the message names the stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


def artifact(config: PipelineConfig, key: str) -> Path:
    return config.output_dir / ARTIFACTS[key]


def ground_truth_path(config: PipelineConfig) -> Path:
    if config.paths.ground_truth is not None:
        return config.resolve(config.paths.ground_truth)
    return config.resolve(config.paths.volume + "_truth")


def _slice_index(header, orientation: str, index):
    if index is not None:
        return index
    il, xl, z = header.axis_values()
    axis = {"inline": il, "crossline": xl, "time": z}[orientation]
    mid = axis[len(axis) // 2]
    return int(mid) if float(mid).is_integer() else float(mid)


def _slice_tag(orientation: str, index) -> str:
    index = float(index)
    return f"{orientation}_{int(index) if index.is_integer() else index}"


def _attribute_slices(table: gt.AttributeTable, config: PipelineConfig, prefix: str) -> list[Path]:
    orientation = config.render.orientation
    index = _slice_index(table.header, orientation, config.render.index)
    pos = slice_position(table.header, orientation, index)
    cube = table.values.reshape(table.header.shape + (len(gt.ATTRIBUTES),))
    plane = {"inline": cube[pos], "crossline": cube[:, pos], "time": cube[:, :, pos]}[orientation]
    written = []
    for col, name in enumerate(gt.ATTRIBUTES):
        path = config.output_dir / f"{prefix}_{name}_{_slice_tag(orientation, index)}.ppm"
        render.write_ppm(path, render.attribute_raster(plane[..., col]))
        written.append(path)
    return written


# --------------------------------------------------------------------------
# stages


def cmd_synth(config: PipelineConfig) -> list[Path]:
    volume, truth = generate_synthetic(four_region_spec(tuple(config.synth.shape)), config.synth.seed)
    vol_path = config.resolve(config.paths.volume)
    save_volume(volume, vol_path)
    save_facies_volume(truth, ground_truth_path(config))
    return [vol_path, ground_truth_path(config)]


def cmd_attributes(config: PipelineConfig) -> list[Path]:
    volume = load_volume(config.resolve(config.paths.volume))
    g = config.glcm
    table = gt.compute_attribute_table(volume, g.window_half, g.offsets, g.levels, g.plane)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    out = artifact(config, "attributes")
    gt.write_attribute_csv(table, out)
    return [out, *_attribute_slices(table, config, "attribute")]


def cmd_interpolate(config: PipelineConfig) -> list[Path]:
    table = gt.read_attribute_csv(artifact(config, "attributes"))
    r = config.rbf
    rbf_config = ri.RBFConfig(
        width=r.width,
        regularization=r.regularization,
        split=r.split,
        seed=r.seed,
        max_centers=r.max_centers,
        proximity_scale=r.proximity_scale,
    )
    filled, report = ri.fill_missing(table, rbf_config)
    gt.write_attribute_csv(filled, artifact(config, "filled"))
    ri.write_report(report, artifact(config, "report"))
    return [artifact(config, "filled"), artifact(config, "report")]


def _standardize(values, mean, std):
    return (values - mean) / std


def cmd_train(config: PipelineConfig) -> list[Path]:
    table = gt.read_attribute_csv(artifact(config, "filled"))
    if table.n_missing:
        raise ValueError(f"{table.n_missing} rows are still missing; run interpolate first")
    mean = table.values.mean(axis=0)
    std = table.values.std(axis=0)
    flat = [name for name, s in zip(gt.ATTRIBUTES, std) if not s > 0]
    if flat:
        raise lm.DegenerateDataError(f"zero-variance attribute column(s): {', '.join(flat)}")
    g = config.gtm
    train_config = lm.TrainConfig(
        max_iterations=g.max_iterations,
        ll_tolerance=g.tolerance,
        map_regularization=g.map_regularization,
        seed=g.seed,
        subsample=g.subsample,
    )
    grid = lm.LatentGrid(*g.grid)
    basis = lm.BasisSet(g.basis[0], g.basis[1], sigma=g.sigma, sigma_scale=g.sigma_scale)
    model, trace = lm.train(_standardize(table.values, mean, std), grid, basis, train_config)
    extra = {
        "attributes": list(gt.ATTRIBUTES),
        "standardization": {"mean": [float(v) for v in mean], "std": [float(v) for v in std]},
        "volume_header": table.header.to_dict(),
    }
    lm.save_model(model, artifact(config, "model"), train_config, extra)
    lm.write_trace(trace, artifact(config, "trace"))
    return [artifact(config, "model"), artifact(config, "trace")]


def cmd_classify(config: PipelineConfig, out=sys.stdout) -> list[Path]:
    model, meta = lm.load_model(artifact(config, "model"))
    table = gt.read_attribute_csv(artifact(config, "filled"))
    if meta.get("volume_header") != table.header.to_dict():
        raise ValueError("geometry mismatch: the model was trained on a different volume than the attribute table")
    mean = np.asarray(meta["standardization"]["mean"])
    std = np.asarray(meta["standardization"]["std"])
    keep = ~table.missing
    proj = lm.project_in_chunks(model, _standardize(table.values[keep], mean, std))
    c = config.classify
    _, labels = fc.cluster_latent(proj, c.n_facies, c.seed, c.n_init)
    facies = fc.assemble_map(labels, table.missing, table.header, c.n_facies)
    fc.write_facies_csv(facies, artifact(config, "facies_csv"))
    save_facies_volume(facies, artifact(config, "facies_volume"))
    truth_path = ground_truth_path(config)
    if config.paths.ground_truth is not None or truth_path.with_name(truth_path.name + ".json").exists():
        truth = load_facies_volume(truth_path)
        if truth.header != facies.header:
            raise ValueError("geometry mismatch: ground-truth map does not match the attribute table")
        labeled = facies.labels.ravel() != 0
        ari = fc.adjusted_rand_index(facies.labels.ravel()[labeled], truth.labels.ravel()[labeled])
        print(f"ARI: {ari:.6f}", file=out)
    return [artifact(config, "facies_csv"), artifact(config, "facies_volume")]


def cmd_render(config: PipelineConfig) -> list[Path]:
    facies_stem = artifact(config, "facies_volume")
    orientation = config.render.orientation
    if facies_stem.with_name(facies_stem.name + ".json").exists():
        facies: FaciesMap = load_facies_volume(facies_stem)
        index = _slice_index(facies.header, orientation, config.render.index)
        view = extract_slice(facies, orientation, index)
        path = config.output_dir / f"facies_{_slice_tag(orientation, index)}.ppm"
        render.write_ppm(path, render.facies_raster(view.values))
        n_facies = max(facies.n_facies, config.classify.n_facies)
        render.write_legend(artifact(config, "legend"), n_facies)
        return [path, artifact(config, "legend")]
    if artifact(config, "filled").exists():
        table = gt.read_attribute_csv(artifact(config, "filled"))
        return _attribute_slices(table, config, "filled")
    raise FileNotFoundError(f"nothing to render: neither {facies_stem}.json nor {artifact(config, 'filled')} exists")


STAGE_FUNCS = {
    "attributes": cmd_attributes,
    "interpolate": cmd_interpolate,
    "train": cmd_train,
    "classify": cmd_classify,
    "render": cmd_render,
}


def run_stage(name: str, config: PipelineConfig, out=sys.stdout) -> list[Path]:
    func = cmd_synth if name == "synth" else STAGE_FUNCS[name]
    try:
        if name == "classify":
            return func(config, out=out)
        return func(config)
    except Exception as exc:
        raise StageError(name, exc) from exc


def cmd_pipeline(config: PipelineConfig, out=sys.stdout) -> list[Path]:
    written = []
    for name in STAGES:
        written.extend(run_stage(name, config, out))
        print(f"[{name}] done", file=out)
    return written


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facies-gtm", description="Seismic facies classification with a GTM.")
    parser.add_argument("command", choices=STAGES + ("pipeline", "synth", "show-config"))
    parser.add_argument("--config", required=True, help="path to the JSON configuration")
    parser.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="replace one config value; the value is parsed as JSON when possible",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "show-config":
        print(json.dumps(config.to_dict(), indent=2))
        return EXIT_OK
    try:
        if args.command == "pipeline":
            cmd_pipeline(config)
        else:
            run_stage(args.command, config)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
