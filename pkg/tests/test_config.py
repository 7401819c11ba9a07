import json

import pytest

from hadid.config import PipelineConfig, config_from_dict, load_config


def test_defaults():
    c = PipelineConfig()
    assert c.hidden_layers == (560, 560, 560, 560) and c.dropout == 0.5
    assert c.kfold == 5 and c.train.learning_rate == 0.01 and c.train.patience == 20


def test_overrides_route_training_fields():
    c = PipelineConfig().with_overrides(max_epochs=7, seed=3, kfold=None)
    assert c.train.max_epochs == 7 and c.seed == 3 and c.kfold == 5


def test_file_roundtrip(tmp_path):
    c = PipelineConfig().with_overrides(seed=9, node_k={"Bedouin": 5}, learning_rate=0.05)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(c.to_dict()))
    back = load_config(p)
    assert back == c


@pytest.mark.parametrize("bad", [dict(kfold=1), dict(f0_floor_hz=-5), dict(dropout=1.0),
                                 dict(silence_threshold_db=3)])
def test_validation(bad):
    with pytest.raises(ValueError):
        config_from_dict({**PipelineConfig().to_dict(), **bad})
