"""``canopy-fuse`` command line: run, eval, synth, ablate.

Exit codes: 0 success, 2 bad usage/config/manifest, 1 anything else.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from .ingest import ManifestError, load_manifest
from .pipeline import ConfigError, PipelineConfig, evaluate, load_config, run_ablation, run_pipeline
from .synth import SynthParams, generate_scene

USAGE_ERRORS = (ConfigError, ManifestError, FileNotFoundError)


def _fail(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _load_inputs(manifest_path, config_path, workers=None):
    try:
        manifest = load_manifest(manifest_path)
        config = load_config(config_path) if config_path else PipelineConfig()
    except USAGE_ERRORS as exc:
        _fail(exc)
    if not manifest.entries:
        _fail(f"{manifest_path}: manifest has no entries")
    if workers is not None:
        config = replace(config, workers=workers)
    return manifest, config


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log per-query details.")
def main(verbose):
    """Multi-sensor deforestation mask fusion."""
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s %(message)s")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Pipeline config JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Override config workers.")
def run(manifest_path, config_path, out_dir, workers):
    """Fuse every query in MANIFEST and write one mask per query."""
    manifest, config = _load_inputs(manifest_path, config_path, workers)
    summary = run_pipeline(manifest, config, out_dir)
    doc = summary.to_json()
    click.echo(
        f"{doc['processed']}/{doc['queries']} queries fused, {doc['no_data_queries']} without data, "
        f"{doc['images_removed_by_cloud_screen']} images cloud-screened"
    )


@main.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path(file_okay=False))
@click.option("--gt", "gt_manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--per-query", is_flag=True, help="Include the per-query breakdown in the JSON.")
@click.option("--report", "report_dir", type=click.Path(file_okay=False), help="Write JSON, CSV and figure here.")
def eval_cmd(pred_dir, gt_manifest, per_query, report_dir):
    """Score predicted masks against label entries of a manifest."""
    try:
        manifest = load_manifest(gt_manifest)
        report = evaluate(pred_dir, manifest)
    except USAGE_ERRORS as exc:
        _fail(exc)
    except ValueError as exc:
        _fail(exc)
    click.echo(json.dumps(report.to_json(per_query=per_query), indent=1))
    if report.missing:
        click.echo(f"warning: {len(report.missing)} labelled queries had no prediction", err=True)
    if report_dir:
        from .report import write_metrics_report

        write_metrics_report(report, report_dir)


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--regions", type=int, default=10, show_default=True)
@click.option("--months", type=int, default=12, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--views", type=int, default=1, show_default=True, help="Views per month per satellite.")
@click.option("--size", type=int, default=64, show_default=True, help="Image side in pixels.")
@click.option("--noise-sigma", type=float, default=0.1, show_default=True)
@click.option("--black-failure-rate", type=float, default=0.1, show_default=True)
@click.option("--cloud-rate", type=float, default=0.2, show_default=True)
@click.option("--growth", type=float, default=0.02, show_default=True, help="New cleared fraction per month.")
@click.option("--missing-rate", type=float, default=0.0, show_default=True)
def synth(seed, regions, months, out_dir, views, size, noise_sigma, black_failure_rate, cloud_rate, growth, missing_rate):
    """Write a synthetic scene with ground truth."""
    try:
        params = SynthParams(
            seed=seed,
            regions=regions,
            months=months,
            views_per_month=views,
            size=size,
            noise_sigma=noise_sigma,
            black_failure_rate=black_failure_rate,
            cloud_rate=cloud_rate,
            deforestation_growth=growth,
            missing_rate=missing_rate,
        )
    except ValueError as exc:
        _fail(exc)
    scene = generate_scene(params, out_dir)
    click.echo(f"{len(scene.manifest.entries)} manifest entries written to {Path(out_dir) / 'manifest.json'}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def ablate(manifest_path, config_path, out_dir):
    """Compare no screening, cloud screening, and screening plus adjacent months."""
    from .report import format_table, write_ablation_report

    manifest, config = _load_inputs(manifest_path, config_path)
    if not manifest.of_kind("label"):
        _fail("ablation needs label entries in the manifest")
    rows = run_ablation(manifest, config, out_dir)
    write_ablation_report(rows, out_dir)
    click.echo(format_table(rows))


if __name__ == "__main__":
    main()
