"""Command-line entry points for the engine."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import corpus, fusion, geometry, keyframes as kf, metrics, search as search_mod
from .scene import (
    load_class_map,
    load_section_mask,
    save_class_map,
    save_section_mask,
)

INDEX_FILE = "index.npz"


def _parse_size(text: str) -> tuple[int, int]:
    w, _, h = text.partition("x")
    return int(w), int(h)


@click.group()
def main():
    """Segmentation fusion, frame search, and quiz authoring tools."""


@main.command("fuse")
@click.option("--class-map", "class_map_path", required=True, type=click.Path(exists=True))
@click.option("--sections", "sections_path", required=True, type=click.Path(exists=True))
@click.option("--out-class", required=True, type=click.Path())
@click.option("--out-sections", required=True, type=click.Path())
@click.option("--report", type=click.Path(), help="write per-section vote tallies as JSON")
def fuse_cmd(class_map_path, sections_path, out_class, out_sections, report):
    """Fuse a predicted class map with a section mask."""
    class_map = load_class_map(class_map_path)
    sections = load_section_mask(sections_path)
    assignment = fusion.vote_section_classes(class_map, sections)
    fused = fusion.fuse(class_map, sections)
    save_class_map(fused.class_map, out_class)
    save_section_mask(fused.section_mask, out_sections)
    if report:
        payload = {
            "input_sections": sections.n_sections,
            "output_sections": fused.section_mask.n_sections,
            "sections": [
                {
                    "id": i,
                    "class": int(assignment.classes[i]),
                    "tallies": [int(t) for t in assignment.tallies[i]],
                }
                for i in range(assignment.n_sections)
            ],
        }
        Path(report).write_text(json.dumps(payload, indent=1))
    click.echo(
        f"fused {sections.n_sections} sections into {fused.section_mask.n_sections}"
    )


@main.command("keyframes")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--window", default=kf.DEFAULT_WINDOW, show_default=True)
@click.option("--sep", default=kf.DEFAULT_MIN_SEPARATION, show_default=True)
@click.option("--prom", default=kf.DEFAULT_MIN_PROMINENCE, show_default=True)
@click.option("--out", type=click.Path(), help="write JSON here instead of stdout")
def keyframes_cmd(features_path, window, sep, prom, out):
    """Identify keyframes from a feature series file."""
    series = kf.load_features(features_path)
    refs = kf.keyframes(series, window=window, min_separation=sep, min_prominence=prom)
    payload = {
        "keyframes": [
            {"video": r.video_id, "index": r.frame_index, "timestamp_ms": r.timestamp_ms}
            for r in refs
        ]
    }
    text = json.dumps(payload, indent=1)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text)


@main.group("index")
def index_group():
    """Search index maintenance."""


@index_group.command("build")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--grid", default="80x45", show_default=True)
def index_build(project_path, grid):
    """Downsample every fused frame into the search index."""
    grid_w, grid_h = _parse_size(grid)
    project = corpus.load_project(project_path)
    entries = []
    for e in project.frames:
        fused = fusion.fuse(*project.load_pair(e.frame_id))
        entries.append((e.ref, fused))
    index = search_mod.build_index(entries, grid_w, grid_h)
    search_mod.save_index(index, project.path(INDEX_FILE))
    project.index_fingerprint = index.fingerprint
    project.index_grid = (grid_w, grid_h)
    corpus.save_project(project)
    click.echo(f"indexed {index.n_frames} frames at {grid_w}x{grid_h}")


@main.command("search")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True),
              help="polygon scene JSON")
@click.option("--k", default=search_mod.DEFAULT_K, show_default=True)
@click.option("--min-gap-ms", default=search_mod.DEFAULT_MIN_GAP_MS, show_default=True)
@click.option("--out", type=click.Path(), help="write JSON here instead of stdout")
def search_cmd(project_path, query_path, k, min_gap_ms, out):
    """Rank frames against an edited polygon scene."""
    project = corpus.load_project(project_path)
    index_path = project.path(INDEX_FILE)
    if index_path.is_file():
        index = search_mod.load_index(index_path)
    else:
        entries = [
            (e.ref, fusion.fuse(*project.load_pair(e.frame_id))) for e in project.frames
        ]
        index = search_mod.build_index(entries)
    scene = geometry.scene_from_wire(json.loads(Path(query_path).read_text()))
    result = search_mod.search(index, scene, k=k, min_gap_ms=min_gap_ms)
    payload = {
        "results": [
            {
                "video": ref.video_id,
                "index": ref.frame_index,
                "timestamp_ms": ref.timestamp_ms,
                "distance": dist,
            }
            for ref, dist in result.ranked
        ]
    }
    text = json.dumps(payload, indent=1)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text)


@main.group("eval")
def eval_group():
    """Evaluation harnesses."""


@eval_group.command("dice")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--truth", "truth_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_format", default="table", type=click.Choice(["table", "json"]),
              show_default=True)
def eval_dice(pred_dir, truth_dir, out_format):
    """Per-class and mean dice between matching PNG files in two directories."""
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    names = sorted(p.name for p in truth_dir.glob("*.png"))
    if not names:
        raise click.ClickException(f"no .png files under {truth_dir}")
    preds, truths = [], []
    for name in names:
        pred_path = pred_dir / name
        if not pred_path.is_file():
            raise click.ClickException(f"missing prediction {pred_path}")
        preds.append(load_class_map(pred_path))
        truths.append(load_class_map(truth_dir / name))
    report = metrics.dice_report(preds, truths)
    if out_format == "json":
        click.echo(
            json.dumps(
                {
                    "aggregation": report.aggregation,
                    "frames": report.n_frames,
                    "per_class": {
                        name: score for name, score in report.rows()[:-1]
                    },
                    "mean": report.mean,
                },
                indent=1,
            )
        )
    else:
        click.echo(f"Dice ({report.aggregation} over {report.n_frames} frames)")
        for name, score in report.rows():
            shown = "absent" if score is None else f"{score:.2f}"
            click.echo(f"{name:<24} {shown}")


@eval_group.command("a-at-n")
@click.option("--judgments", "judgments_path", required=True, type=click.Path(exists=True),
              help="JSON lines: {query_id, judgments: [bool; n]}")
@click.option("-n", "top_n", default=9, show_default=True)
def eval_a_at_n(judgments_path, top_n):
    """Top-n suggestion accuracy from rater judgment records."""
    rows = []
    for line in Path(judgments_path).read_text().splitlines():
        if line.strip():
            rows.append(json.loads(line)["judgments"])
    score = search_mod.evaluate_a_at_n(rows, top_n)
    click.echo(f"A@{top_n} = {score:.4f} over {len(rows)} queries")


@main.group("project")
def project_group():
    """Project lifecycle."""


@project_group.command("init")
@click.argument("path", type=click.Path())
@click.option("--canvas", default="854x480", show_default=True)
def project_init(path, canvas):
    corpus.init_project(path, _parse_size(canvas))
    click.echo(f"initialized project at {path}")


@project_group.command("validate")
@click.argument("path", type=click.Path(exists=True))
def project_validate(path):
    project = corpus.load_project(path, deep=True)
    click.echo(
        f"ok: {len(project.frames)} frames, {len(project.quiz_ids)} quizzes, "
        f"{len(project.videos)} video(s)"
    )


@main.group("import")
def import_group():
    """Dataset ingestion."""


@import_group.command("cholecseg")
@click.option("--project", "project_path", required=True, type=click.Path(exists=True))
@click.option("--src", "src_dir", required=True, type=click.Path(exists=True))
@click.option("--map", "mapping", default="cholecseg8k", show_default=True,
              help="builtin mapping name or config JSON path")
@click.option("--video-id", default="import", show_default=True)
@click.option("--strict", is_flag=True, help="fail on unmapped source classes")
def import_cholecseg(project_path, src_dir, mapping, video_id, strict):
    """Ingest annotation PNGs, remapping source classes to the 9-class scheme."""
    project = corpus.load_project(project_path)
    added, unmapped = corpus.import_dataset(
        project, src_dir, mapping, video_id=video_id, strict=strict
    )
    click.echo(f"imported {len(added)} frames")
    if unmapped:
        click.echo(f"warning: {unmapped} pixels had unmapped source classes -> Background")


@main.command("synth")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--frames", default=200, show_default=True)
@click.option("--noise", default=0.3, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--size", default="854x480", show_default=True)
@click.option("--no-images", is_flag=True, help="skip frame image/thumbnail rendering")
def synth_cmd(project_path, frames, noise, seed, size, no_images):
    """Generate a synthetic ground-truth project."""
    w, h = _parse_size(size)
    spec = corpus.SyntheticSpec(n_frames=frames, width=w, height=h, noise=noise, seed=seed)
    corpus.generate_synthetic(spec, project_path, render_images=not no_images)
    click.echo(f"generated {frames} synthetic frames at {project_path}")


@main.command("serve")
@click.option("--project", "project_path", envvar="SURGQ_PROJECT", required=True,
              type=click.Path(exists=True))
@click.option("--addr", envvar="SURGQ_ADDR", default=None, help="host:port")
@click.option("--inpaint-url", envvar="SURGQ_INPAINT_URL", default=None)
def serve_cmd(project_path, addr, inpaint_url):
    """Run the authoring HTTP service."""
    from .service import serve

    serve(project_path, addr, inpaint_url)


if __name__ == "__main__":
    main()
