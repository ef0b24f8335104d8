"""
File formats: matrices, posteriors, noise models, worlds, factor checkpoints
and reports. Floats are written with 17 significant digits and read back with
round-trip precision, so every save/load pair is bit-stable.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Type, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..core.errors import ConfigInvalid
from ..core.graph import DegreeVector, SymmetricGraph
from ..demo.world_generator import ScenarioConfig, World, load_scenario_config
from ..models.label_model import (
    NoiseModel,
    PosteriorMatrix,
    SemiSupervisedLayout,
    make_noise_model,
    make_transition_noise_model,
)
from ..models.spectral_engine import FactorMatrix, TrainingRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
WORLD_SCHEMA_VERSION = 1

PathLike = Union[str, Path]
ReportT = TypeVar("ReportT", bound=BaseModel)


def write_matrix_csv(path: PathLike, m) -> None:
    """Row-major CSV, no header."""
    pd.DataFrame(np.atleast_2d(np.asarray(m, dtype=float))).to_csv(
        path, header=False, index=False, float_format=FLOAT_FORMAT
    )


def read_matrix_csv(path: PathLike) -> np.ndarray:
    if Path(path).stat().st_size == 0:
        return np.zeros((0, 0))
    return pd.read_csv(path, header=None, float_precision="round_trip").to_numpy(dtype=float)


def graph_to_json(g: SymmetricGraph) -> Dict[str, Any]:
    return {"n": g.n, "mass_normalized": g.mass_normalized, "rows": g.weights.tolist()}


def graph_from_json(data: Dict[str, Any]) -> SymmetricGraph:
    rows = np.asarray(data["rows"], dtype=float).reshape(data["n"], data["n"])
    return SymmetricGraph(weights=rows, mass_normalized=bool(data.get("mass_normalized", False)))


def save_graph(g: SymmetricGraph, path: PathLike, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(graph_to_json(g)))
    else:
        write_matrix_csv(path, g.weights)
    return path


def load_graph(path: PathLike, mass_normalized: bool = False) -> SymmetricGraph:
    path = Path(path)
    if path.suffix == ".json":
        return graph_from_json(json.loads(path.read_text()))
    return SymmetricGraph(weights=read_matrix_csv(path), mass_normalized=mass_normalized)


def write_posteriors_csv(path: PathLike, y: PosteriorMatrix) -> None:
    """One row per labeled point, header row of class ids."""
    frame = pd.DataFrame(np.asarray(y.eta), columns=[str(c) for c in range(y.r)])
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_posteriors_csv(path: PathLike, class_balanced: bool = False) -> PosteriorMatrix:
    frame = pd.read_csv(path, float_precision="round_trip")
    return PosteriorMatrix(eta=frame.to_numpy(dtype=float).reshape(len(frame), len(frame.columns)),
                           class_balanced=class_balanced)


def noise_model_to_json(nm: NoiseModel) -> Dict[str, Any]:
    data = {"r": nm.r, "gamma": nm.gamma, "alpha": nm.alpha, "beta": nm.beta}
    if not nm.is_symmetric_noise:
        data["T"] = nm.T.tolist()
    return data


def noise_model_from_json(data: Dict[str, Any]) -> NoiseModel:
    if data.get("gamma") is None:
        return make_transition_noise_model(np.asarray(data["T"], dtype=float))
    return make_noise_model(int(data["r"]), float(data["gamma"]))


def content_hash(paths: Iterable[Path]) -> str:
    digest = hashlib.sha256()
    for path in sorted(paths, key=lambda p: p.name):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def file_sha256(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


_WORLD_FILES = ("aug_graph.csv", "aug_dist.csv", "labels.csv", "naturals.csv", "posteriors.csv", "layout.csv")


def save_world(w: World, directory: PathLike) -> Path:
    """Write a world as CSV files plus manifest.json with a content hash."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    write_matrix_csv(directory / "aug_graph.csv", w.aug_graph.weights)
    write_matrix_csv(directory / "aug_dist.csv", w.aug_dist)
    pd.DataFrame({"natural": w.natural_of, "label": w.point_labels}).to_csv(directory / "labels.csv", index=False)
    pd.DataFrame({"label": w.label_of_natural, "prior": w.natural_prior}).to_csv(
        directory / "naturals.csv", index=False, float_format=FLOAT_FORMAT
    )
    write_posteriors_csv(directory / "posteriors.csv", w.posteriors)
    pd.DataFrame({"n_L": [w.layout.n_L], "n_U": [w.layout.n_U]}).to_csv(directory / "layout.csv", index=False)

    manifest = {
        "schema_version": WORLD_SCHEMA_VERSION,
        "config": w.config.model_dump(),
        "files": list(_WORLD_FILES),
        "content_hash": content_hash(directory / name for name in _WORLD_FILES),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    logger.info("saved world (n=%d) to %s", w.n, directory)
    return directory


def load_world(directory: PathLike, verify: bool = True) -> World:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if verify:
        actual = content_hash(directory / name for name in manifest["files"])
        if actual != manifest["content_hash"]:
            raise ConfigInvalid(f"world at {directory} does not match its manifest hash")

    cfg: ScenarioConfig = load_scenario_config(manifest["config"])
    labels = pd.read_csv(directory / "labels.csv")
    naturals = pd.read_csv(directory / "naturals.csv", float_precision="round_trip")
    layout = pd.read_csv(directory / "layout.csv").iloc[0]
    n_L = int(layout["n_L"])
    posteriors = read_posteriors_csv(directory / "posteriors.csv", class_balanced=n_L > 0)

    return World(
        config=cfg,
        aug_graph=SymmetricGraph(weights=read_matrix_csv(directory / "aug_graph.csv"), mass_normalized=True),
        natural_of=labels["natural"].to_numpy(),
        label_of_natural=naturals["label"].to_numpy(),
        natural_prior=naturals["prior"].to_numpy(dtype=float),
        aug_dist=read_matrix_csv(directory / "aug_dist.csv"),
        posteriors=posteriors,
        layout=SemiSupervisedLayout(n_L=n_L, n_U=int(layout["n_U"])),
    )


def save_factor(fm: FactorMatrix, stem: PathLike) -> Path:
    """<stem>.csv holds F, <stem>.json holds {n, k, loss, iters, seed, degrees}."""
    stem = Path(stem)
    write_matrix_csv(stem.with_suffix(".csv"), fm.F)
    record = fm.record
    meta = {
        "n": fm.n,
        "k": fm.k,
        "loss": record.loss if record else None,
        "iters": record.iters if record else 0,
        "seed": record.seed if record else None,
        "degrees": fm.degrees.values.tolist(),
    }
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2))
    return stem


def load_factor(stem: PathLike) -> FactorMatrix:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    F = read_matrix_csv(stem.with_suffix(".csv")).reshape(meta["n"], meta["k"])
    record = None
    if meta.get("loss") is not None:
        record = TrainingRecord(loss=meta["loss"], iters=meta["iters"], seed=meta.get("seed"))
    return FactorMatrix(F=F, degrees=DegreeVector(values=meta["degrees"]), record=record)


def save_report(report: BaseModel, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(report.model_dump_json(indent=2))
    return path


def load_report(model: Type[ReportT], path: PathLike) -> ReportT:
    return model.model_validate_json(Path(path).read_text())


def write_rows_csv(path: PathLike, rows: Union[pd.DataFrame, Iterable[Dict[str, Any]]], columns: List[str]) -> Path:
    """Rows to CSV with a fixed column order; no rows still writes the header."""
    frame = rows.reindex(columns=columns) if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)
