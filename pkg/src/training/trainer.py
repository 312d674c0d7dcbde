"""
Training loop.

Batches are prepared (augmentation, voxelization, KNN graph, anchor matching) on worker threads
one batch ahead of the optimizer; every preparation is seeded from (seed, epoch, scene index), so
the loss trace depends only on the configuration.
"""

from __future__ import annotations

import logging
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.boxes.anchors import AnchorGrid, match_thresholds_for
from src.boxes.matching import AnchorAssignment, match_anchors
from src.core.config import TrainConfig, config_from_dict
from src.core.errors import NonFiniteError, TrainingDivergedError
from src.core.file_io import ensure_parent_dir
from src.kitti.types import Detection, Scene
from src.network.detector import PreparedScene, SVGANet, prepare_points
from src.tensor.checkpoint import load_checkpoint, save_checkpoint
from src.tensor.optim import Adam
from src.training.augment import AugmentConfig, augment
from src.training.losses import LossBreakdown, detection_loss
from src.training.schedule import lr_schedule

logger = logging.getLogger(__name__)

METRICS_HEADER = "step\tcls_loss\treg_loss\ttotal\tlr\n"


@dataclass
class TrainingExample:
    """One prepared scene with its matched anchors."""

    prepared: PreparedScene
    gt_boxes: np.ndarray
    assignment: AnchorAssignment


@dataclass
class TrainResult:
    history: List[LossBreakdown] = field(default_factory=list)
    steps: int = 0
    epochs: int = 0
    checkpoint: Optional[Path] = None


def prepare_example(
    scene: Scene, config: TrainConfig, anchors: AnchorGrid, augment_config: AugmentConfig, seed: Sequence[int]
) -> TrainingExample:
    """Augment, voxelize and match one scene; pure given ``seed``."""
    scene = augment(scene, np.random.default_rng(list(seed)), augment_config)
    gt_boxes, gt_class_ids = scene.boxes_for(config.classes)
    class_thresholds = match_thresholds_for(
        config.classes, (config.pos_iou_thresh, config.neg_iou_thresh), config.per_class_thresholds
    )
    assignment = match_anchors(
        anchors, gt_boxes, gt_class_ids, config.pos_iou_thresh, config.neg_iou_thresh, class_thresholds
    )
    return TrainingExample(prepare_points(scene.points, config, scene.scene_id), gt_boxes, assignment)


def train_step(batch: Sequence[TrainingExample], model: SVGANet, optimizer: Adam) -> LossBreakdown:
    """
    Forward, loss, backward and one ADAM update.

    Raises:
        TrainingDivergedError: the forward pass or loss became non-finite (first scene id attached)
    """
    config = model.config
    model.train()
    optimizer.zero_grad()
    scene_ids = ", ".join(example.prepared.scene_id for example in batch)
    try:
        logits, residuals = model([example.prepared for example in batch])
        total, breakdown = detection_loss(
            logits,
            residuals,
            [example.assignment for example in batch],
            model.anchors,
            [example.gt_boxes for example in batch],
            pos_weight=config.cls_pos_weight,
            neg_weight=config.cls_neg_weight,
            cls_weight=config.loss_cls_weight,
            reg_weight=config.loss_reg_weight,
            beta=config.smooth_l1_beta,
        )
    except NonFiniteError as e:
        raise TrainingDivergedError(f"non-finite values in scenes [{scene_ids}]: {e}", batch[0].prepared.scene_id) from e
    if not np.isfinite(breakdown.total):
        raise TrainingDivergedError(f"loss is {breakdown.total} in scenes [{scene_ids}]", batch[0].prepared.scene_id)
    total.backward()
    optimizer.step()
    return breakdown


class Trainer:
    """Epoch/step loop with seeded shuffling, prefetching, metrics log and checkpoints."""

    def __init__(
        self,
        config: TrainConfig,
        scenes: Sequence[Scene],
        out_dir: Optional[Path] = None,
        model: Optional[SVGANet] = None,
    ):
        if not scenes:
            raise ValueError("training needs at least one scene")
        self.config = config.validate()
        self.scenes = list(scenes)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.model = model if model is not None else SVGANet(config, np.random.default_rng(config.seed))
        self.optimizer = Adam(
            self.model.named_parameters(),
            learning_rate=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
            epsilon=config.adam_epsilon,
        )
        self.augment_config = AugmentConfig.from_train_config(config)
        self.metrics_path = self.out_dir / "metrics.tsv" if self.out_dir else None

    def _prepare_batch(self, pool: ThreadPoolExecutor, indices: Sequence[int], epoch: int) -> List[Future]:
        return [
            pool.submit(
                prepare_example,
                self.scenes[i],
                self.config,
                self.model.anchors,
                self.augment_config,
                (self.config.seed, epoch, int(i)),
            )
            for i in indices
        ]

    def _batches(self, epoch: int) -> List[np.ndarray]:
        order = np.random.default_rng([self.config.seed, epoch]).permutation(len(self.scenes))
        size = self.config.batch_size
        return [order[start: start + size] for start in range(0, len(order), size)]

    def _log_step(self, step: int, breakdown: LossBreakdown, lr: float) -> None:
        if self.metrics_path is None:
            return
        with open(self.metrics_path, "a", encoding="utf-8") as f:
            f.write(
                f"{step}\t{breakdown.cls_loss:.10g}\t{breakdown.regression_loss():.10g}\t{breakdown.total:.10g}\t{lr:.10g}\n"
            )

    def save(self, path: Path, step: int, epoch: int) -> Path:
        metadata = {"step": step, "epoch": epoch, "config": self.config.to_dict()}
        return save_checkpoint(path, self.model.state_dict(), metadata)

    def fit(self) -> TrainResult:
        """
        Run until ``epochs`` are done or ``max_steps`` (when > 0) updates were made.
        """
        config = self.config
        result = TrainResult()
        if self.metrics_path is not None:
            ensure_parent_dir(self.metrics_path).write_text(METRICS_HEADER, encoding="utf-8")

        logger.info(
            f"Training on {len(self.scenes)} scenes, {self.model.num_parameters()} parameters, "
            f"{len(self.model.anchors)} anchors"
        )
        step = 0
        with ThreadPoolExecutor(max_workers=max(1, config.num_workers)) as pool:
            for epoch in range(config.epochs):
                lr = lr_schedule(
                    epoch, config.learning_rate, config.lr_decay_start, config.lr_decay_every, config.lr_decay_factor
                )
                self.optimizer.set_learning_rate(lr)
                batches = self._batches(epoch)
                pending = self._prepare_batch(pool, batches[0], epoch)
                for batch_index in range(len(batches)):
                    batch = [future.result() for future in pending]
                    if batch_index + 1 < len(batches):
                        pending = self._prepare_batch(pool, batches[batch_index + 1], epoch)
                    breakdown = train_step(batch, self.model, self.optimizer)
                    step += 1
                    result.history.append(breakdown)
                    self._log_step(step, breakdown, lr)
                    logger.debug(
                        f"step {step}: total={breakdown.total:.4f} cls={breakdown.cls_loss:.4f} "
                        f"reg={breakdown.regression_loss():.4f} pos={breakdown.n_pos}"
                    )
                    if self.out_dir and config.checkpoint_every and step % config.checkpoint_every == 0:
                        self.save(self.out_dir / f"checkpoint_{step:06d}.ckpt", step, epoch)
                    if config.max_steps and step >= config.max_steps:
                        break
                result.epochs = epoch + 1
                logger.info(f"Epoch {epoch + 1}/{config.epochs} done: step {step}, lr {lr:g}")
                if config.max_steps and step >= config.max_steps:
                    break

        result.steps = step
        if self.out_dir is not None:
            result.checkpoint = self.save(self.out_dir / "model.ckpt", step, result.epochs)
        return result


def load_model(checkpoint_path: Path, config: Optional[TrainConfig] = None) -> SVGANet:
    """
    Rebuild a detector from a checkpoint; the stored config is used unless one is given.

    Raises:
        DataFormatError: checkpoint does not match the model layout
    """
    state, metadata = load_checkpoint(checkpoint_path)
    if config is None:
        config = config_from_dict(metadata.get("config", {}), str(checkpoint_path))
    model = SVGANet(config)
    model.load_state_dict(state)
    model.eval()
    logger.info(f"Loaded model from {checkpoint_path} (step {metadata.get('step', '?')})")
    return model


def predict_scenes(model: SVGANet, scenes: Sequence[Scene], max_workers: int = 2) -> Dict[str, List[Detection]]:
    """Detections per scene; voxelization runs on worker threads, the network forward in order."""
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        prepared = list(pool.map(lambda scene: model.prepare(scene.points, scene.scene_id), scenes))
    return {item.scene_id: model.predict_prepared(item) for item in prepared}
