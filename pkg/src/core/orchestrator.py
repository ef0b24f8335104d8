"""
Sweep orchestrator.
Runs (replicate, gamma, theta, k) sweeps over generated worlds with per-cell
status tracking, resumable partial output, routing between workflow nodes and
a run manifest.
"""

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from langgraph.graph import END, StateGraph
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..analysis.bounds import BoundInputs, joint_bound
from ..analysis.evaluation import compute_deltas, evaluate_embedding
from ..demo.world_generator import ScenarioConfig, bayes_labeler, gen_block_world
from ..models.joint_model import mix_graphs
from ..models.label_model import lemma41_closed_form, make_noise_model
from ..models.spectral_engine import top_k_factor
from ..tools.plotting import emit_plot_data
from ..tools.serialization import FLOAT_FORMAT, file_sha256, write_rows_csv
from .config import Settings, get_settings
from .errors import BoundError, ConfigInvalid, SpectralLabError
from .graph import compute_rho, eigh, normalize
from .state import CellStatus, SweepRow, SweepState

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

RESULT_COLUMNS = [
    "seed", "gamma", "theta", "k", "E", "vote_error", "delta_u", "delta_s",
    "probe_norm", "norm_cap", "bound", "gate", "replicate", "active_term",
]
SUMMARY_COLUMNS = [
    "gamma", "k", "best_theta", "error_theta0", "error_theta1", "min_over_grid", "baseline_gap", "replicates",
]
SORT_KEYS = ["replicate", "gamma", "theta", "k"]


class SweepConfig(BaseModel):
    """A full sweep; field names match the JSON config file."""
    scenario: ScenarioConfig
    theta_grid: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    gamma_grid: List[float] = Field(default_factory=lambda: [0.0])
    k_grid: List[int] = Field(default_factory=lambda: [2])
    master_seed: int = Field(default=0, ge=0)
    replicates: int = Field(default=1, ge=1)
    output_dir: str = "runs/sweep"
    ridge: float = Field(default=1e-8, ge=0.0)
    rho_slack: Optional[float] = Field(default=None, ge=0.0)
    workers: int = Field(default=1, ge=1)
    plot: bool = False

    @field_validator("theta_grid")
    @classmethod
    def _inject_endpoints(cls, value):
        if not value:
            raise ValueError("theta_grid must not be empty")
        if any(not 0.0 <= t <= 1.0 for t in value):
            raise ValueError("theta values must lie in [0, 1]")
        return sorted(set(float(t) for t in value) | {0.0, 1.0})

    @field_validator("gamma_grid", "k_grid")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("grids must not be empty")
        return value

    @model_validator(mode="after")
    def _check_against_scenario(self):
        r = self.scenario.r
        for gamma in self.gamma_grid:
            if not 0.0 <= gamma < (r - 1) / r:
                raise ValueError(f"gamma={gamma} outside [0, {(r - 1) / r})")
        n = self.scenario.n_points
        for k in self.k_grid:
            if not 1 <= k <= n:
                raise ValueError(f"k={k} outside 1..{n}")
        return self

    def config_hash(self) -> str:
        canonical = self.model_dump(exclude={"output_dir", "workers", "plot"})
        return hashlib.sha256(json.dumps(canonical, sort_keys=True).encode()).hexdigest()


def load_sweep_config(source: Union[str, Path, Dict[str, Any]]) -> SweepConfig:
    """Parse a sweep config from a JSON file or a dict."""
    try:
        if isinstance(source, dict):
            return SweepConfig.model_validate(source)
        return SweepConfig.model_validate_json(Path(source).read_text())
    except ValidationError as e:
        raise ConfigInvalid(f"invalid sweep config: {e}") from e


def derive_seed(master_seed: int, replicate: int, gamma_index: int) -> int:
    """Stable 63-bit seed per (master_seed, replicate, gamma index)."""
    digest = hashlib.blake2b(f"{master_seed}:{replicate}:{gamma_index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") & ((1 << 63) - 1)


def cell_key(replicate: int, gamma_index: int) -> str:
    return f"{replicate}:{gamma_index}"


def run_cell(cfg: SweepConfig, replicate: int, gamma_index: int,
             settings: Optional[Settings] = None) -> List[SweepRow]:
    """Every (theta, k) row of one world and noise rate."""
    settings = settings or get_settings()
    tol = settings.tolerances
    gamma = cfg.gamma_grid[gamma_index]
    seed = derive_seed(cfg.master_seed, replicate, gamma_index)

    world = gen_block_world(cfg.scenario.model_copy(update={"seed": seed, "gamma": gamma}))
    a0 = normalize(world.aug_graph)
    nu = eigh(a0.matrix, settings=settings).values
    slack = cfg.rho_slack if cfg.rho_slack is not None else tol.rho_slack
    rho = compute_rho(a0.source_degrees) + slack
    labels = bayes_labeler(world)
    delta_u, delta_s = compute_deltas(world, labels)

    nm = make_noise_model(world.r, gamma)
    a_star = lemma41_closed_form(world.posteriors, nm, world.layout, tol)

    rows = []
    for theta in cfg.theta_grid:
        mixed = mix_graphs(a0, a_star, theta)
        spectrum = eigh(mixed.matrix, settings=settings)
        for k in cfg.k_grid:
            fm = top_k_factor(mixed, k, spectrum=spectrum)
            bi = BoundInputs(
                delta_u=delta_u, delta_s=delta_s, rho=rho, nu=nu, k=k, theta=theta,
                alpha=nm.alpha, r=world.r, n_L=world.layout.n_L, n_U=world.layout.n_U,
            )
            report = evaluate_embedding(fm, world, labels, bound_inputs=bi, ridge=cfg.ridge, tol=tol)
            try:
                bound = joint_bound(bi, tol)
                bound_value, active, gate = bound.value, bound.active_term, report.gate
            except BoundError as e:
                logger.debug("bound unavailable at theta=%s k=%d: %s", theta, k, e)
                bound_value, active, gate = float("nan"), 0, "n/a"

            rows.append(SweepRow(
                seed=seed, replicate=replicate, gamma=gamma, theta=theta, k=k,
                E=report.per_aug_error, vote_error=report.natural_vote_error,
                delta_u=delta_u, delta_s=delta_s, probe_norm=report.probe_norm,
                norm_cap=report.theorem_norm_cap, bound=bound_value, active_term=active, gate=gate,
            ))
    return rows


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Per (gamma, k): replicate-mean error at each theta, its best theta and the endpoint comparison."""
    if results.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)

    mean_error = results.groupby(["gamma", "k", "theta"], sort=True)["E"].mean().reset_index()
    replicates = results.groupby(["gamma", "k"])["replicate"].nunique()
    summary = []
    for (gamma, k), group in mean_error.groupby(["gamma", "k"], sort=True):
        group = group.sort_values("theta")
        errors = group["E"].to_numpy()
        thetas = group["theta"].to_numpy()
        best = int(np.argmin(errors))
        error_0 = float(errors[thetas == 0.0][0])
        error_1 = float(errors[thetas == 1.0][0])
        summary.append({
            "gamma": gamma,
            "k": int(k),
            "best_theta": float(thetas[best]),
            "error_theta0": error_0,
            "error_theta1": error_1,
            "min_over_grid": float(errors[best]),
            "baseline_gap": float(errors[best]) - min(error_0, error_1),
            "replicates": int(replicates.loc[(gamma, k)]),
        })
    return pd.DataFrame(summary, columns=SUMMARY_COLUMNS)


class SweepResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    results: pd.DataFrame
    summary: pd.DataFrame
    state: SweepState
    output_dir: Path


class SweepOrchestrator:
    """
    Sweep workflow: prepare -> cells -> summarize -> manifest, with an error
    handler reachable from every routing decision.
    """

    def __init__(self, cfg: SweepConfig, settings: Optional[Settings] = None):
        self.cfg = cfg
        self.settings = settings or get_settings()
        self.out_dir = Path(cfg.output_dir)
        self.partial_path = self.out_dir / "results.partial.csv"
        self.partial_meta_path = self.out_dir / "results.partial.json"
        self.results: pd.DataFrame = pd.DataFrame(columns=RESULT_COLUMNS)
        self.summary: pd.DataFrame = pd.DataFrame(columns=SUMMARY_COLUMNS)
        self.workflow = self._create_workflow()
        self.app = self.workflow.compile()

    def _create_workflow(self) -> StateGraph:
        """Create the sweep workflow with conditional routing."""
        workflow = StateGraph(SweepState)

        workflow.add_node("prepare", self._prepare_node)
        workflow.add_node("cells", self._cells_node)
        workflow.add_node("summarize", self._summarize_node)
        workflow.add_node("manifest", self._manifest_node)
        workflow.add_node("error_handler", self._error_handler_node)

        workflow.set_entry_point("prepare")

        workflow.add_conditional_edges(
            "prepare", self._route_after_prepare, {"cells": "cells", "error": "error_handler"}
        )
        workflow.add_conditional_edges(
            "cells", self._route_after_cells, {"summarize": "summarize", "error": "error_handler"}
        )
        workflow.add_conditional_edges(
            "summarize", self._route_after_summarize, {"manifest": "manifest", "error": "error_handler"}
        )

        workflow.add_edge("manifest", END)
        workflow.add_edge("error_handler", END)
        return workflow

    def _all_cells(self) -> List[Tuple[int, int]]:
        return [(rep, gi) for rep in range(self.cfg.replicates) for gi in range(len(self.cfg.gamma_grid))]

    def _prepare_node(self, state: SweepState) -> SweepState:
        state.update_progress("prepare", 0.0, f"Preparing sweep in {self.out_dir}")
        state.routing_decisions.append("prepare")
        state.config_hash = self.cfg.config_hash()
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            done = self._load_partial(state.config_hash)
            for rep, gi in self._all_cells():
                key = cell_key(rep, gi)
                state.cell_statuses[key] = CellStatus.COMPLETED if key in done else CellStatus.PENDING
            if done:
                logger.info("resuming sweep: %d of %d cells already complete", len(done), len(state.cell_statuses))
        except Exception as e:
            logger.error("sweep preparation failed: %s", e)
            state.routing_decisions.append("prepare_failed")
        return state

    def _load_partial(self, config_hash: str) -> set:
        if not self.partial_path.exists():
            self.partial_meta_path.write_text(json.dumps({"config_hash": config_hash}))
            return set()
        meta = json.loads(self.partial_meta_path.read_text()) if self.partial_meta_path.exists() else {}
        if meta.get("config_hash") != config_hash:
            logger.warning("discarding partial results from a different config")
            self.partial_path.unlink()
            self.partial_meta_path.write_text(json.dumps({"config_hash": config_hash}))
            return set()
        partial = pd.read_csv(self.partial_path, float_precision="round_trip")
        return set(partial["cell"].astype(str))

    def _commit_cell(self, state: SweepState, key: str, rows: List[SweepRow], seconds: float) -> None:
        """Append one finished cell to the partial file; the single writer of sweep output."""
        frame = pd.DataFrame([row.model_dump() for row in rows], columns=RESULT_COLUMNS)
        frame.insert(0, "cell", key)
        frame.to_csv(self.partial_path, mode="a", header=not self.partial_path.exists(),
                     index=False, float_format=FLOAT_FORMAT)
        state.update_cell_status(key, CellStatus.COMPLETED, seconds=seconds)

    def _cells_node(self, state: SweepState) -> SweepState:
        state.routing_decisions.append("cells")
        pending = [(rep, gi) for rep, gi in self._all_cells()
                   if state.cell_statuses[cell_key(rep, gi)] == CellStatus.PENDING]
        total = max(len(state.cell_statuses), 1)
        logger.info("running %d cells (%d workers)", len(pending), self.cfg.workers)

        if self.cfg.workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=self.cfg.workers) as pool:
                started = time.perf_counter()
                futures = [pool.submit(run_cell, self.cfg, rep, gi, self.settings) for rep, gi in pending]
                for (rep, gi), future in zip(pending, futures):
                    self._finish_cell(state, rep, gi, future.result, started, total)
        else:
            for rep, gi in pending:
                started = time.perf_counter()
                self._finish_cell(state, rep, gi, lambda: run_cell(self.cfg, rep, gi, self.settings), started, total)
        return state

    def _finish_cell(self, state: SweepState, rep: int, gi: int, compute: Callable[[], List[SweepRow]],
                     started: float, total: int) -> None:
        key = cell_key(rep, gi)
        state.update_cell_status(key, CellStatus.RUNNING)
        try:
            rows = compute()
            self._commit_cell(state, key, rows, time.perf_counter() - started)
        except SpectralLabError as e:
            logger.error("cell %s failed: %s", key, e)
            state.update_cell_status(key, CellStatus.FAILED, error=str(e), seconds=time.perf_counter() - started)
        done = len(state.cells_with(CellStatus.COMPLETED)) + len(state.cells_with(CellStatus.FAILED))
        state.update_progress("cells", 90.0 * done / total, f"cell {key} finished")

    def _summarize_node(self, state: SweepState) -> SweepState:
        state.update_progress("summarize", 92.0, "Writing canonical result tables")
        state.routing_decisions.append("summarize")
        try:
            partial = pd.read_csv(self.partial_path, float_precision="round_trip", keep_default_na=False, na_values=[""])
            results = partial.drop(columns=["cell"])[RESULT_COLUMNS]
            results = results.sort_values(SORT_KEYS, kind="mergesort").reset_index(drop=True)
            self.results = results
            self.summary = summarize(results)

            write_rows_csv(self.out_dir / "results.csv", results, RESULT_COLUMNS)
            write_rows_csv(self.out_dir / "summary.csv", self.summary, SUMMARY_COLUMNS)
            emit_plot_data(results, self.out_dir / "plots", summary=self.summary, render=self.cfg.plot)
        except Exception as e:
            logger.error("summarizing failed: %s", e)
            state.routing_decisions.append("summarize_failed")
        return state

    def _manifest_node(self, state: SweepState) -> SweepState:
        state.routing_decisions.append("manifest")
        if not state.cells_with(CellStatus.FAILED):
            self.partial_path.unlink(missing_ok=True)
            self.partial_meta_path.unlink(missing_ok=True)
        status = "partial" if state.cells_with(CellStatus.FAILED) else "completed"
        state.update_progress("manifest", 100.0, f"Sweep {status}")
        state.current_step = status
        self._write_manifest(state, status=status)
        return state

    def _error_handler_node(self, state: SweepState) -> SweepState:
        state.routing_decisions.append("error_handler")
        failed = state.cells_with(CellStatus.FAILED)
        logger.error("sweep stopped with %d failed cells", len(failed))
        state.update_progress("error", state.completion_percentage, "Sweep stopped; partial results kept")
        state.current_step = "error_recovery"
        self._write_manifest(state, status="failed")
        return state

    def _route_after_prepare(self, state: SweepState) -> Literal["cells", "error"]:
        return "error" if "prepare_failed" in state.routing_decisions else "cells"

    def _route_after_cells(self, state: SweepState) -> Literal["summarize", "error"]:
        if not state.cells_with(CellStatus.COMPLETED):
            return "error"
        return "summarize"

    def _route_after_summarize(self, state: SweepState) -> Literal["manifest", "error"]:
        return "error" if "summarize_failed" in state.routing_decisions else "manifest"

    def _write_manifest(self, state: SweepState, status: str) -> None:
        files = {}
        for name in ("results.csv", "summary.csv"):
            path = self.out_dir / name
            if path.exists():
                files[name] = file_sha256(path)
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "status": status,
            "session_id": state.session_id,
            "config": self.cfg.model_dump(),
            "config_hash": state.config_hash,
            "files": files,
            "timings": {
                "total_seconds": (state.updated_at - state.created_at).total_seconds(),
                "cells": state.cell_timings,
            },
            "cells": {key: status.value for key, status in sorted(state.cell_statuses.items())},
            "errors": state.cell_errors,
            "routing": state.routing_decisions,
            "progress": state.progress_updates,
        }
        (self.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))

    def run(self) -> SweepResult:
        """Run the compiled workflow from prepare to END."""
        final = self.app.invoke(SweepState())
        # LangGraph hands back the channel values, not the model
        state = final if isinstance(final, SweepState) else SweepState(**final)
        return SweepResult(results=self.results, summary=self.summary, state=state, output_dir=self.out_dir)


def run_sweep(cfg: SweepConfig, settings: Optional[Settings] = None) -> SweepResult:
    return SweepOrchestrator(cfg, settings).run()
