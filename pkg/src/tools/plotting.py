"""
Plot data from sweep result tables.
Every figure is written as a CSV of the numbers it shows; rendering PNGs
is optional and uses the non-interactive Agg backend.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from .serialization import write_rows_csv

logger = logging.getLogger(__name__)

ENDPOINT_COLUMNS = ["gamma", "k", "error_theta0", "error_theta1", "best_endpoint_error", "endpoint_winner", "joint_best_theta", "joint_best_error"]
OPTIMAL_THETA_COLUMNS = ["gamma", "k", "bound_best_theta", "error_best_theta"]
BOUND_CURVE_COLUMNS = ["gamma", "k", "theta", "bound", "E"]
ERROR_VS_K_COLUMNS = ["gamma", "theta", "k", "E", "vote_error"]


def _argmin_theta(group: pd.DataFrame, column: str) -> float:
    """Smallest theta attaining the minimum of a column; NaN when the column is all NaN."""
    values = group[column].to_numpy(dtype=float)
    if np.all(np.isnan(values)):
        return float("nan")
    return float(group["theta"].to_numpy()[int(np.nanargmin(values))])


def plot_tables(results: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """Replicate-averaged tables, one per figure."""
    if results.empty:
        return {
            "endpoint_vs_joint": pd.DataFrame(columns=ENDPOINT_COLUMNS),
            "optimal_theta": pd.DataFrame(columns=OPTIMAL_THETA_COLUMNS),
            "bound_curves": pd.DataFrame(columns=BOUND_CURVE_COLUMNS),
            "error_vs_k": pd.DataFrame(columns=ERROR_VS_K_COLUMNS),
        }

    means = (results.groupby(["gamma", "k", "theta"], sort=True)[["E", "vote_error", "bound"]]
             .mean().reset_index())

    endpoint_rows, optimal_rows = [], []
    for (gamma, k), group in means.groupby(["gamma", "k"], sort=True):
        group = group.sort_values("theta")
        at = group.set_index("theta")
        bound_0, bound_1 = at.loc[0.0, "bound"], at.loc[1.0, "bound"]
        if np.isnan(bound_0) and np.isnan(bound_1):
            winner = float("nan")
        else:
            winner = 1.0 if np.isnan(bound_0) or bound_1 < bound_0 else 0.0
        best_theta = _argmin_theta(group, "E")
        endpoint_rows.append({
            "gamma": gamma, "k": k,
            "error_theta0": at.loc[0.0, "E"], "error_theta1": at.loc[1.0, "E"],
            "best_endpoint_error": min(at.loc[0.0, "E"], at.loc[1.0, "E"]),
            "endpoint_winner": winner,
            "joint_best_theta": best_theta, "joint_best_error": float(group["E"].min()),
        })
        optimal_rows.append({
            "gamma": gamma, "k": k,
            "bound_best_theta": _argmin_theta(group, "bound"), "error_best_theta": best_theta,
        })

    error_vs_k = (results.groupby(["gamma", "theta", "k"], sort=True)[["E", "vote_error"]]
                  .mean().reset_index())
    return {
        "endpoint_vs_joint": pd.DataFrame(endpoint_rows, columns=ENDPOINT_COLUMNS),
        "optimal_theta": pd.DataFrame(optimal_rows, columns=OPTIMAL_THETA_COLUMNS),
        "bound_curves": means[BOUND_CURVE_COLUMNS],
        "error_vs_k": error_vs_k[ERROR_VS_K_COLUMNS],
    }


def _render(tables: Dict[str, pd.DataFrame], out_dir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = tables["bound_curves"]
    for (gamma, k), group in curves.groupby(["gamma", "k"], sort=True):
        fig = plt.figure(figsize=(6, 4))
        plt.plot(group["theta"], group["E"], marker="o", label="probe error")
        plt.plot(group["theta"], group["bound"], marker="s", linestyle="--", label="bound")
        plt.xlabel("theta")
        plt.ylabel("error")
        plt.title(f"gamma={gamma:g}, k={k}")
        plt.legend(loc="best")
        fig.savefig(out_dir / f"bound_curves_g{gamma:g}_k{k}.png", dpi=120, bbox_inches="tight")
        plt.close(fig)

    optimal = tables["optimal_theta"]
    if not optimal.empty:
        fig = plt.figure(figsize=(6, 4))
        for k, group in optimal.groupby("k", sort=True):
            plt.plot(group["gamma"], group["bound_best_theta"], marker="o", label=f"bound, k={k}")
            plt.plot(group["gamma"], group["error_best_theta"], marker="x", linestyle=":", label=f"error, k={k}")
        plt.xlabel("gamma")
        plt.ylabel("best theta")
        plt.legend(loc="best")
        fig.savefig(out_dir / "optimal_theta.png", dpi=120, bbox_inches="tight")
        plt.close(fig)

    errors = tables["error_vs_k"]
    for gamma, group in errors.groupby("gamma", sort=True):
        fig = plt.figure(figsize=(6, 4))
        for theta, line in group.groupby("theta", sort=True):
            plt.plot(line["k"], line["E"], marker="o", label=f"theta={theta:g}")
        plt.xlabel("k")
        plt.ylabel("probe error")
        plt.legend(loc="best")
        fig.savefig(out_dir / f"error_vs_k_g{gamma:g}.png", dpi=120, bbox_inches="tight")
        plt.close(fig)


def emit_plot_data(results: pd.DataFrame, out_dir: Union[str, Path], summary: Optional[pd.DataFrame] = None,
                   render: bool = False) -> Dict[str, Path]:
    """Write one CSV per figure (headers only when there are no results) and optionally the PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = plot_tables(results)
    paths = {}
    for name, table in tables.items():
        paths[name] = write_rows_csv(out_dir / f"{name}.csv", table, list(table.columns))
    if summary is not None:
        paths["summary"] = write_rows_csv(out_dir / "summary.csv", summary, list(summary.columns))

    if render and not results.empty:
        _render(tables, out_dir)
        logger.info("rendered plots to %s", out_dir)
    return paths
