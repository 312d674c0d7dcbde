"""Tests for the assembled detector."""

import logging

import numpy as np
import pytest

from src.kitti.synthetic import generate_synthetic
from src.kitti.types import Detection
from src.network.detector import (
    SVGANet,
    count_head_parameters,
    count_parameters,
    count_voxel_graph_parameters,
    prepare_points,
)
from tests.helpers import micro_config, micro_points, small_config, synthetic_for


class TestParameterCount:
    """Closed-form counts against the built model."""

    def test_micro_network_by_hand(self):
        """Widths of 4 everywhere: 226 voxel-graph and 1796 head parameters."""
        config = micro_config()
        assert count_voxel_graph_parameters(config) == 226
        assert count_head_parameters(config) == 1796
        assert SVGANet(config).num_parameters() == 2022

    def test_micro_variants_by_hand(self):
        """dr drops the three 4x4 alignment convolutions; no global attention drops MLP, gates and updates."""
        assert SVGANet(micro_config(head_variant="dr")).num_parameters() == 2022 - 48
        assert SVGANet(micro_config(global_attention=False)).num_parameters() == 140 + 1796

    @pytest.mark.parametrize("layers", [1, 2, 3, 4])
    @pytest.mark.parametrize("use_global", [True, False])
    @pytest.mark.parametrize("variant", ["sdr", "dr", "sr"])
    def test_matches_model(self, layers, use_global, variant):
        config = micro_config(num_attention_layers=layers, global_attention=use_global, head_variant=variant)
        assert count_parameters(config) == SVGANet(config).num_parameters()

    def test_ablation_counts_are_distinct(self):
        counts = [
            count_parameters(micro_config(num_attention_layers=n, global_attention=g, head_variant=v))
            for n in (1, 2, 3, 4)
            for g in (True, False)
            for v in ("sdr", "dr", "sr")
        ]
        assert len(set(counts)) == len(counts)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_knn_k_does_not_change_count(self, k):
        config = micro_config(knn_k=k, num_voxels=k + 1)
        assert SVGANet(config).num_parameters() == 2022

    def test_pedestrian_cyclist_anchors(self):
        """Two classes double the anchors per cell and the head outputs."""
        config = micro_config(classes=("Pedestrian", "Cyclist"))
        model = SVGANet(config)
        assert model.anchors.anchors_per_cell == 4
        assert count_parameters(config) == model.num_parameters()


class TestPreparePoints:
    """Voxelization and KNN graph construction."""

    def test_graph_over_centroids(self):
        prepared = prepare_points(micro_points(0, 30), micro_config(), "000001")
        assert prepared.scene_id == "000001"
        assert len(prepared.voxels) == 5
        assert prepared.graph.k == 2

    def test_k_reduced_for_sparse_scene(self, caplog):
        """Two voxels leave room for a single neighbor."""
        with caplog.at_level(logging.WARNING):
            prepared = prepare_points(micro_points(0, 2), micro_config(), "sparse")
        assert prepared.graph.k == 1
        assert "KNN k reduced to 1" in caplog.text

    def test_no_graph_without_global_attention(self):
        assert prepare_points(micro_points(0, 30), micro_config(global_attention=False)).graph is None


class TestSVGANet:
    """Forward shapes and inference."""

    def test_forward_batch_shapes(self):
        """M = (H/2) * (W/2) * A anchors per scene."""
        config = micro_config()
        model = SVGANet(config)
        scenes = [model.prepare(micro_points(seed, 30)) for seed in range(2)]
        logits, residuals = model(scenes)
        assert logits.shape == (2, 4 * 4 * 2)
        assert residuals.shape == (2, 32, 7)
        assert len(model.anchors) == 32

    @pytest.mark.parametrize("layers", [1, 4])
    @pytest.mark.parametrize("use_global", [True, False])
    @pytest.mark.parametrize("variant", ["sdr", "dr", "sr"])
    def test_ablations_run_forward_and_backward(self, layers, use_global, variant):
        """Every parameter receives a gradient array."""
        config = micro_config(num_attention_layers=layers, global_attention=use_global, head_variant=variant)
        model = SVGANet(config)
        logits, residuals = model([model.prepare(micro_points(seed, 30)) for seed in range(2)])
        (logits.sum() + residuals.sum()).backward()
        assert all(param.grad is not None for _, param in model.named_parameters())

    def test_same_seed_same_model(self):
        config = micro_config(seed=7)
        first, second = SVGANet(config), SVGANet(config)
        scene = first.prepare(micro_points(3, 30))
        np.testing.assert_array_equal(first([scene])[0].data, second([scene])[0].data)

    def test_predict_returns_sorted_detections(self):
        config = small_config(max_detections=5)
        model = SVGANet(config)
        scene = generate_synthetic(synthetic_for(config), 0)
        detections = model.predict(scene.points, scene.scene_id)
        assert 0 < len(detections) <= 5
        assert all(isinstance(detection, Detection) for detection in detections)
        scores = [detection.score for detection in detections]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= score <= 1.0 for score in scores)
        assert {detection.object_class.value for detection in detections} == {"Car"}

    def test_predict_restores_training_mode(self):
        model = SVGANet(micro_config(score_threshold=0.0))
        model.train()
        model.predict(micro_points(0, 30))
        assert model.training
        assert model.head.fuse.bn.training

    def test_score_threshold_filters_everything(self):
        """A threshold above every sigmoid score gives no detections."""
        model = SVGANet(micro_config(score_threshold=1.0))
        logits = np.full(len(model.anchors), -5.0)
        assert model.postprocess(logits, np.zeros((len(model.anchors), 7))) == []

    def test_postprocess_decodes_anchor(self):
        """A single confident anchor with zero residual decodes to the anchor box itself."""
        model = SVGANet(micro_config(score_threshold=0.5))
        logits = np.full(len(model.anchors), -10.0)
        target = model.anchors.flat_index(1, 2, 1)
        logits[target] = 4.0
        detections = model.postprocess(logits, np.zeros((len(model.anchors), 7)))
        assert len(detections) == 1
        np.testing.assert_allclose(detections[0].box.to_array(), model.anchors.boxes[target], atol=1e-12)
        assert detections[0].score == pytest.approx(1.0 / (1.0 + np.exp(-4.0)))
