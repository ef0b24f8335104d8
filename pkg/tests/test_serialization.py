"""Tests for the on-disk formats."""

import json

import numpy as np
import pandas as pd
import pytest

from src.analysis.bounds import BoundInputs, BoundReport, joint_bound
from src.core.errors import ConfigInvalid
from src.core.graph import normalize
from src.models.label_model import make_noise_model, make_transition_noise_model
from src.models.spectral_engine import TrainConfig, gd_train
from src.tools.serialization import (
    load_factor,
    load_graph,
    load_report,
    load_world,
    noise_model_from_json,
    noise_model_to_json,
    read_matrix_csv,
    save_factor,
    save_graph,
    save_report,
    save_world,
    write_matrix_csv,
    write_rows_csv,
)


def test_matrix_csv_is_bit_stable(tmp_path, rng):
    m = rng.normal(size=(5, 3)) / 3.0
    write_matrix_csv(tmp_path / "m.csv", m)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv"), m)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_graph_files(tmp_path, world, fmt):
    path = save_graph(world.aug_graph, tmp_path / f"g.{fmt}", fmt=fmt)
    loaded = load_graph(path, mass_normalized=True)
    np.testing.assert_array_equal(loaded.weights, world.aug_graph.weights)


def test_world_directory(tmp_path, world):
    save_world(world, tmp_path / "w")
    manifest = json.loads((tmp_path / "w" / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["config"]["seed"] == world.config.seed

    loaded = load_world(tmp_path / "w")
    np.testing.assert_array_equal(loaded.aug_graph.weights, world.aug_graph.weights)
    np.testing.assert_array_equal(loaded.aug_dist, world.aug_dist)
    np.testing.assert_array_equal(loaded.posteriors.eta, world.posteriors.eta)
    np.testing.assert_array_equal(loaded.natural_of, world.natural_of)
    assert loaded.layout == world.layout


def test_tampered_world_is_rejected(tmp_path, world):
    directory = save_world(world, tmp_path / "w")
    with open(directory / "labels.csv", "a") as handle:
        handle.write("0,0\n")
    with pytest.raises(ConfigInvalid):
        load_world(directory)


def test_factor_checkpoint(tmp_path, world):
    fm = gd_train(normalize(world.aug_graph), 2, TrainConfig(max_iters=200, seed=4))
    save_factor(fm, tmp_path / "factor")
    loaded = load_factor(tmp_path / "factor")
    np.testing.assert_array_equal(loaded.F, fm.F)
    np.testing.assert_array_equal(loaded.degrees.values, fm.degrees.values)
    assert loaded.record.loss == fm.record.loss
    assert loaded.record.seed == 4


@pytest.mark.parametrize("nm", [make_noise_model(3, 0.2), make_transition_noise_model([[0.9, 0.1], [0.3, 0.7]])])
def test_noise_model_json(nm):
    restored = noise_model_from_json(json.loads(json.dumps(noise_model_to_json(nm))))
    np.testing.assert_allclose(restored.T, nm.T, atol=1e-15)
    assert restored.is_symmetric_noise == nm.is_symmetric_noise


def test_report_file(tmp_path):
    report = joint_bound(BoundInputs(delta_u=0.05, delta_s=0.0, nu=[1.0, 0.5, 0.2], k=1, n_U=3))
    loaded = load_report(BoundReport, save_report(report, tmp_path / "bound.json"))
    assert loaded.value == report.value
    assert loaded.regime == report.regime


def test_empty_rows_still_write_the_header(tmp_path):
    path = write_rows_csv(tmp_path / "rows.csv", [], ["gamma", "theta", "E"])
    assert path.read_text().strip() == "gamma,theta,E"
    assert list(pd.read_csv(path).columns) == ["gamma", "theta", "E"]


def test_rows_from_a_frame_follow_the_column_order(tmp_path):
    frame = pd.DataFrame({"E": [0.1], "gamma": [1 / 3], "extra": ["dropped"]})
    path = write_rows_csv(tmp_path / "rows.csv", frame, ["gamma", "E"])
    assert path.read_text().splitlines() == ["gamma,E", f"{1 / 3:.17g},0.10000000000000001"]
