import json

import pytest

from gaptal.config import EvalConfig, RunConfig, load_config
from gaptal.errors import ConfigError
from gaptal.losses import LossWeights
from gaptal.model import ModelConfig


class TestDefaults:
    def test_matching_cost_coefficients(self):
        w = LossWeights()
        assert (w.match_alpha, w.match_beta, w.match_gamma) == (5.0, 2.0, 2.0)

    def test_loss_balance_factors(self):
        w = LossWeights()
        assert (w.w_cls, w.w_l1, w.w_tiou) == (3.0, 5.0, 2.0)
        assert w.lambda_ad == 3.0

    def test_model_defaults(self):
        m = ModelConfig()
        assert m.dim == 512
        assert m.num_queries == 40
        assert m.roi_bins == 16
        assert (m.encoder_layers, m.decoder_layers) == (2, 5)

    def test_optimizer_defaults(self):
        c = RunConfig()
        assert c.optim.learning_rate == 1e-4
        assert c.optim.weight_decay == 1e-4
        assert c.optim.batch_size == 16

    def test_eval_grids(self):
        e = EvalConfig()
        assert e.map_iou_grid == [0.3, 0.4, 0.5, 0.6, 0.7]
        assert len(e.tiou_grid) == 11 and e.tiou_grid[0] == 0.5 and e.tiou_grid[-1] == 1.0
        assert e.an_grid == [10, 25, 40]
        assert e.an_max == 40


class TestLoading:
    def test_partial_document_fills_defaults(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"model": {"dim": 32, "attention_heads": 4}, "seed": 9}))
        config = load_config(p)
        assert config.model.dim == 32
        assert config.model.num_queries == 40
        assert config.seed == 9

    def test_seed_override(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 1}))
        assert load_config(p, seed_override=42).seed == 42

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"nonsense": {}}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"model": {"dims": 16}}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_unsorted_grid_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"eval": {"map_iou_grid": [0.7, 0.3]}}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_invalid_json_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "ghost.json")


class TestAblation:
    def test_switch_mapping(self):
        c = RunConfig()
        c.apply_ablation("no_rectify")
        assert not c.model.use_rectifying and c.model.use_actionness
        c.apply_ablation("no_rectify_no_actionness")
        assert not c.model.use_rectifying and not c.model.use_actionness
        c.apply_ablation("full")
        assert c.model.use_rectifying and c.model.use_actionness

    def test_unknown_ablation(self):
        with pytest.raises(ConfigError):
            RunConfig().apply_ablation("without_anything")
