import os

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from bnn_align import config
from bnn_align.config import ConfigError, ExperimentConfig

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SHIPPED = [os.path.join(ROOT, "configs", n) for n in ("mnist_desk.yaml", "toy_regression.yaml")]


@pytest.mark.parametrize("path", SHIPPED)
def test_shipped_configs_parse_and_round_trip(path):
    cfg = config.load(path)
    cfg.validate(check_files=False)
    assert config.loads(cfg.to_yaml()) == cfg
    assert config.loads(cfg.to_yaml()).digest() == cfg.digest()


def test_desk_config_values():
    cfg = config.load(SHIPPED[0])
    assert cfg.model.widths == [784, 128, 128, 10]
    assert cfg.eval.n_mc_test == 32 and cfg.eval.n_taus == 25
    assert cfg.train.learning_rate == 3e-5
    assert os.path.isabs(cfg.data.path) and cfg.data.path.endswith(os.path.join("data", "mnist5k"))


@settings(max_examples=50)
@given(
    st.lists(st.integers(1, 50), min_size=2, max_size=5),
    st.floats(1e-8, 1.0),
    st.sampled_from(["wasserstein", "kl"]),
    st.integers(2, 50),
    st.one_of(st.none(), st.integers(2, 1000)),
)
def test_round_trip_property(widths, lr, cost, n_taus, size):
    raw = {
        "model": {"widths": widths},
        "train": {"learning_rate": lr},
        "align": {"cost": cost},
        "eval": {"n_taus": n_taus},
        "data": {"train_size": size},
    }
    cfg = config.from_dict(raw)
    again = config.loads(cfg.to_yaml())
    assert again == cfg
    assert again.to_yaml() == cfg.to_yaml()


def test_defaults():
    cfg = config.loads("")
    assert cfg == ExperimentConfig()
    assert cfg.slice.tau == 0.5


def test_scientific_notation_coerced():
    cfg = config.loads("train:\n  learning_rate: 3e-5\n  epochs: 10.0\n")
    assert cfg.train.learning_rate == 3e-5 and cfg.train.epochs == 10
    assert isinstance(cfg.train.epochs, int)


@pytest.mark.parametrize(
    "text,where",
    [
        ("modle: {}", "modle"),
        ("train: {lr: 1}", "train.lr"),
        ("train: {epochs: ten}", "train.epochs"),
        ("train: {epochs: 2.5}", "train.epochs"),
        ("align: {include_bias: 1}", "align.include_bias"),
        ("model: [1, 2]", "model"),
        ("model: {widths: [2, 2]}\n  bad: [", "YAML"),
    ],
)
def test_parse_errors_name_the_field(text, where):
    with pytest.raises(ConfigError) as e:
        config.loads(text)
    assert where in str(e.value)


@pytest.mark.parametrize(
    "raw,where",
    [
        ({"model": {"widths": [3]}}, "model.widths"),
        ({"model": {"task": "ranking"}}, "model.task"),
        ({"train": {"temperature": 0}}, "train"),
        ({"align": {"cost": "l2"}}, "align.cost"),
        ({"align": {"init": "random"}}, "align.init"),
        ({"eval": {"path": "line"}}, "eval.path"),
        ({"eval": {"n_taus": 1}}, "eval.n_taus"),
        ({"slice": {"tau": 2.0}}, "slice.tau"),
        ({"seeds": {"seed0": 3, "seed1": 3}}, "seeds"),
        ({"data": {"source": "csv"}}, "data.source"),
        ({"data": {"source": "synthetic", "train_size": 10, "test_size": 10}}, "data.source"),
    ],
)
def test_validation_errors(raw, where):
    with pytest.raises(ConfigError) as e:
        config.from_dict(raw).validate(check_files=False)
    assert any(err.startswith(where) for err in e.value.errors)


def test_missing_data_files(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"data": {"path": "nowhere"}}))
    cfg = config.load(p)
    assert cfg.data.path == str(tmp_path / "nowhere")
    with pytest.raises(ConfigError) as e:
        cfg.validate()
    assert e.value.errors[0].startswith("data.path")
    with pytest.raises(ConfigError):
        config.load(tmp_path / "absent.yaml")
