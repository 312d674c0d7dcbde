"""
SVGA detector command implementations.

Each ``run_*`` function performs one CLI command and returns a JSON-friendly summary; the
argument parsing lives in ``scripts.svga.__main__``.

Functions:
    resolve_config: build the run configuration from a file, a class preset and CLI overrides
    run_train: train a detector and write checkpoints plus the metrics log
    run_eval: detect on labeled scenes and write AP tables (TSV and Excel)
    run_infer: write KITTI-format detection files
    run_bench: time the three pipeline stages
"""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from src.core.config import TrainConfig, load_config, save_config
from src.core.console_utils import print_header
from src.core.errors import ConfigurationError
from src.core.file_io import ensure_parent_dir
from src.core.profiler import StageTiming, benchmark_operation
from src.core.report_utils import load_metrics_log, summarize_metrics, write_excel_report
from src.kitti.calibration import Calibration
from src.kitti.dataset import KittiDataset, load_scenes
from src.kitti.labels import save_detections
from src.kitti.types import Scene
from src.network.detector import SVGANet
from src.tensor.tensor import no_grad
from src.training.evaluation import evaluate
from src.training.trainer import Trainer, load_model, predict_scenes

logger = logging.getLogger(__name__)


def resolve_config(
    config_path: Optional[Path] = None,
    class_group: Optional[str] = None,
    seed: Optional[int] = None,
    dataset_dir: Optional[Path] = None,
    split_file: Optional[Path] = None,
) -> TrainConfig:
    """Config file if given, else the class preset (car by default); CLI flags override both.

    Raises:
        ConfigurationError: if both a config file and a class preset are given
    """
    if config_path is not None and class_group is not None:
        raise ConfigurationError(
            f"--class {class_group} cannot be combined with --config; set preset = {class_group} in the file"
        )
    if config_path is not None:
        config = load_config(config_path)
    else:
        config = TrainConfig.for_class(class_group or "car")
    updates: Dict[str, Any] = {}
    if seed is not None:
        updates["seed"] = seed
    if dataset_dir is not None:
        updates["dataset_dir"] = str(dataset_dir)
    if split_file is not None:
        updates["split_file"] = str(split_file)
    return dataclasses.replace(config, **updates).validate()


def _model(config: TrainConfig, checkpoint: Optional[Path]) -> SVGANet:
    if checkpoint is None:
        logger.warning("No checkpoint given: using an untrained model")
        return SVGANet(config)
    return load_model(checkpoint, config)


def _calibration_lookup(config: TrainConfig):
    if config.dataset_dir:
        dataset = KittiDataset(Path(config.dataset_dir))
        return dataset.calibration
    default = Calibration.default()
    return lambda _scene_id: default


def run_train(config: TrainConfig, out_dir: Path) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    print_header(f"Training: {', '.join(config.classes)}")
    scenes = load_scenes(config)
    save_config(config, out_dir / "config.cfg")
    result = Trainer(config, scenes, out_dir).fit()
    summary = summarize_metrics(load_metrics_log(out_dir / "metrics.tsv"))
    print(f"Steps: {result.steps}  epochs: {result.epochs}")
    if result.steps:
        print(f"Total loss: {summary['first_total']:.4f} -> {summary['last_total']:.4f}")
    print(f"Checkpoint: {result.checkpoint}")
    return {"steps": result.steps, "epochs": result.epochs, "checkpoint": str(result.checkpoint), **summary}


def run_eval(
    config: TrainConfig, checkpoint: Optional[Path], out_dir: Path, scenes: Optional[List[Scene]] = None
) -> Dict[str, Any]:
    """Detect on every scene and write ``ap.tsv``, ``pr_curves.tsv`` and ``evaluation.xlsx``."""
    out_dir = Path(out_dir)
    print_header(f"Evaluation: {', '.join(config.classes)}")
    scenes = scenes if scenes is not None else load_scenes(config)
    model = _model(config, checkpoint)
    detections = predict_scenes(model, scenes, config.num_workers)
    ground_truths = {scene.scene_id: scene.labels for scene in scenes}
    report = evaluate(detections, ground_truths, config.classes, config.eval_metrics, n_points=config.ap_points)

    table = report.to_frame()
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "ap.tsv", sep="\t", index=False)
    report.curves_frame().to_csv(out_dir / "pr_curves.tsv", sep="\t", index=False)
    write_excel_report({"AP": table, "PR curves": report.curves_frame()}, out_dir / "evaluation.xlsx")

    for entry in report.entries:
        value = "n/a" if entry.ap is None else f"{entry.ap:.2f}"
        print(f"{entry.class_name:<12}{entry.difficulty:<10}{entry.metric:<4}@{entry.iou_threshold:.2f}  AP {value}")
    return {
        "scenes": len(scenes),
        "entries": [
            {"class": e.class_name, "difficulty": e.difficulty, "metric": e.metric, "ap": e.ap} for e in report.entries
        ],
    }


def run_infer(config: TrainConfig, checkpoint: Optional[Path], out_dir: Path) -> Dict[str, Any]:
    """Write ``<out_dir>/detections/<scene_id>.txt`` for every scene."""
    out_dir = Path(out_dir) / "detections"
    print_header("Inference")
    scenes = load_scenes(config)
    model = _model(config, checkpoint)
    detections = predict_scenes(model, scenes, config.num_workers)
    calibration_for = _calibration_lookup(config)
    for scene_id, scene_detections in detections.items():
        save_detections(out_dir, scene_id, scene_detections, calibration_for(scene_id))
    total = sum(len(items) for items in detections.values())
    print(f"Wrote {total} detections for {len(detections)} scenes to {out_dir}")
    return {"scenes": len(detections), "detections": total, "out_dir": str(out_dir)}


def run_bench(
    config: TrainConfig, checkpoint: Optional[Path] = None, n_scenes: int = 1, out_dir: Optional[Path] = None
) -> List[StageTiming]:
    """
    Time pre-processing, feature aggregation and box detection on the first ``n_scenes`` scenes.

    Timings are also written to ``<out_dir>/bench.tsv`` when ``out_dir`` is given.
    """
    print_header("Benchmark")
    model = _model(config, checkpoint)
    model.eval()

    def read_and_prepare() -> list:
        scenes = load_scenes(config)[:n_scenes]
        return [model.prepare(scene.points, scene.scene_id) for scene in scenes]

    prepare = benchmark_operation("data reading and pre-processing", read_and_prepare)
    timings = [prepare]
    if prepare.success:
        prepared = prepare.result

        def aggregate() -> list:
            with no_grad():
                return [model.bev_features(p) for p in prepared]

        features = benchmark_operation("feature aggregation", aggregate)
        detect = benchmark_operation("box detection", lambda: [model.predict_prepared(p) for p in prepared])
        timings += [features, detect]

    for timing in timings:
        status = "ok" if timing.success else f"failed: {timing.error}"
        print(f"{timing.name:<34}{timing.time_seconds:>9.4f}s {timing.memory_mb:>9.2f}MB  {status}")
    if out_dir is not None:
        bench_path = ensure_parent_dir(Path(out_dir) / "bench.tsv")
        pd.DataFrame([timing.to_dict() for timing in timings]).to_csv(bench_path, sep="\t", index=False)
    return timings
