import io
import json

import numpy as np
import pytest

from conftest import blobs
from meetg.data import normalize_fit, one_hot
from meetg.mixture import (
    FORMAT_VERSION,
    MeetgConfig,
    ModelFormatError,
    ModelVersionError,
    load_model,
    model_to_dict,
    predict_meetg,
    save_model,
    train_meetg,
)


@pytest.fixture
def trained(rng):
    x, labels = blobs(rng, 20, [[0, 0], [2, 0], [0, 2]], sigma=0.7)
    cfg = MeetgConfig(n_experts=3, expert_hidden=9, gate_hidden=7, error_scale=0.8, base_seed=17)
    model = train_meetg(cfg, x, one_hot(labels, 3), label_map=["a", "b", "c"])
    return model, x


def test_round_trip_bit_identical(trained, tmp_path, rng):
    model, x = trained
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    test = rng.normal(1, 2, (50, 2))
    s0, l0 = predict_meetg(model, test)
    s1, l1 = predict_meetg(loaded, test)
    assert np.array_equal(s0, s1)
    assert np.array_equal(l0, l1)
    assert loaded.config == model.config
    assert loaded.label_map == ("a", "b", "c")


def test_stream_round_trip_and_stable_bytes(trained):
    model, _ = trained
    a, b = io.StringIO(), io.StringIO()
    save_model(model, a)
    save_model(load_model(io.StringIO(a.getvalue())), b)
    assert a.getvalue() == b.getvalue()


def test_file_fields(trained):
    model, _ = trained
    doc = model_to_dict(model)
    assert list(doc) == ["format_version", "config", "label_map", "experts", "gate"]
    assert doc["format_version"] == FORMAT_VERSION
    assert set(doc["experts"][0]) >= {"W", "b", "beta"}
    assert len(doc["experts"]) == 3
    assert np.array(doc["gate"]["beta"]).shape == (7, 3)


def test_normalizer_round_trip(trained, tmp_path):
    model, x = trained
    model.normalizer = normalize_fit(x)
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    assert np.array_equal(loaded.normalizer.minimum, model.normalizer.minimum)
    assert np.array_equal(loaded.normalizer.maximum, model.normalizer.maximum)


def test_truncated_file_is_parse_error(trained, tmp_path):
    model, _ = trained
    buf = io.StringIO()
    save_model(model, buf)
    path = tmp_path / "cut.json"
    path.write_text(buf.getvalue()[: len(buf.getvalue()) // 2])
    with pytest.raises(ModelFormatError, match="invalid JSON"):
        load_model(path)


def test_zero_experts_rejected(trained):
    model, _ = trained
    doc = model_to_dict(model)
    doc["config"]["n_experts"] = 0
    doc["experts"] = []
    with pytest.raises(ModelFormatError) as err:
        load_model(io.StringIO(json.dumps(doc)))
    assert err.value.path == "config"


def test_version_mismatch(trained):
    doc = model_to_dict(trained[0])
    doc["format_version"] = FORMAT_VERSION + 1
    with pytest.raises(ModelVersionError):
        load_model(io.StringIO(json.dumps(doc)))


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d["experts"][1].__setitem__("beta", [[1.0]]), "experts[1].beta"),
        (lambda d: d["gate"].pop("W"), "gate.W"),
        (lambda d: d["experts"][0].__setitem__("b", "oops"), "experts[0].b"),
        (lambda d: d.pop("label_map"), "label_map"),
        (lambda d: d["experts"].pop(), "experts"),
    ],
)
def test_malformed_fields_name_their_path(trained, mutate, path):
    doc = model_to_dict(trained[0])
    mutate(doc)
    with pytest.raises(ModelFormatError) as err:
        load_model(io.StringIO(json.dumps(doc)))
    assert err.value.path == path
