"""
Linear-probe evaluation of embeddings on explicit worlds.
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from sklearn.linear_model import Ridge

from ..core.config import Tolerances, resolve_tolerances
from ..core.errors import DimensionMismatch, SingularSystem
from ..demo.world_generator import World
from ..models.spectral_engine import FactorMatrix
from .bounds import BoundInputs, probe_norm_cap

logger = logging.getLogger(__name__)


class LinearProbe(BaseModel):
    """k x r downstream weights B."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    B: np.ndarray
    frobenius_norm: float

    @field_validator("B", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"probe weights must be k x r, got shape {arr.shape}")
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_weights(cls, B) -> "LinearProbe":
        B = np.asarray(B, dtype=float)
        return cls(B=B, frobenius_norm=float(np.linalg.norm(B)))


class EvalReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    per_aug_error: float = Field(ge=0.0, le=1.0)
    natural_vote_error: float = Field(ge=0.0, le=1.0)
    delta_u: float = Field(ge=0.0, le=1.0)
    delta_s: float = Field(ge=0.0, le=1.0)
    probe_norm: float
    theorem_norm_cap: float = math.inf

    @property
    def gate(self) -> str:
        return "pass" if self.probe_norm <= self.theorem_norm_cap else "fail"


def _clamp_unit(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


def _check_world(fm: FactorMatrix, w: World) -> None:
    if fm.n != w.n:
        raise DimensionMismatch(f"factor has {fm.n} rows, world has {w.n} points")


def aug_marginals(w: World) -> np.ndarray:
    """P(x) = sum_x̄ P(x̄) A(x|x̄)."""
    return w.joint_mass().sum(axis=0)


def fit_probe(fm: FactorMatrix, w: World, ridge: float = 1e-8, tol: Optional[Tolerances] = None) -> LinearProbe:
    """Weighted ridge regression of one-hot clean labels on the embeddings."""
    tol = resolve_tolerances(tol)
    _check_world(fm, w)
    X = fm.embeddings()
    targets = np.eye(w.r)[w.point_labels]
    weights = aug_marginals(w)

    normal = X.T @ (weights[:, None] * X) + ridge * np.eye(fm.k)
    condition = np.linalg.cond(normal)
    if not np.isfinite(condition) or condition > tol.singular_condition:
        raise SingularSystem(f"normal matrix condition number {condition:.3e}")

    model = Ridge(alpha=ridge, fit_intercept=False, solver="cholesky")
    model.fit(X, targets, sample_weight=weights)
    return LinearProbe.from_weights(model.coef_.T)


def predict_points(fm: FactorMatrix, probe: LinearProbe) -> np.ndarray:
    """argmax_c (B^T f(x))_c per augmented point, ties to the smallest class."""
    return np.argmax(fm.embeddings() @ probe.B, axis=1)


def per_aug_error(fm: FactorMatrix, probe: LinearProbe, w: World) -> float:
    """P over (x̄, x ~ A(.|x̄)) that the probe's prediction differs from y(x̄)."""
    _check_world(fm, w)
    wrong = predict_points(fm, probe)[None, :] != w.label_of_natural[:, None]
    return _clamp_unit(np.sum(w.joint_mass() * wrong))


def natural_vote_predict(fm: FactorMatrix, probe: LinearProbe, w: World) -> np.ndarray:
    """Most probable per-point prediction under each natural's augmentations."""
    _check_world(fm, w)
    votes = w.aug_dist @ np.eye(w.r)[predict_points(fm, probe)]
    return np.argmax(votes, axis=1)


def natural_vote_error(fm: FactorMatrix, probe: LinearProbe, w: World) -> float:
    wrong = natural_vote_predict(fm, probe, w) != w.label_of_natural
    return _clamp_unit(np.sum(w.natural_prior * wrong))


def compute_deltas(w: World, labels: Sequence[int]) -> Tuple[float, float]:
    """Tightest (δ_u, δ_s) for a labeling function given as one label per point."""
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (w.n,):
        raise DimensionMismatch(f"{labels.size} labels for {w.n} points")
    delta_u = np.sum(w.joint_mass() * (labels[None, :] != w.label_of_natural[:, None]))

    n_L = w.layout.n_L
    if n_L == 0:
        return _clamp_unit(delta_u), 0.0
    eta = w.posteriors.eta
    agree = eta[np.arange(n_L), labels[:n_L]]
    delta_s = np.sum(1.0 - agree) / n_L
    return _clamp_unit(delta_u), _clamp_unit(delta_s)


def evaluate_embedding(fm: FactorMatrix, w: World, labels: Sequence[int], bound_inputs: Optional[BoundInputs] = None,
                       ridge: float = 1e-8, tol: Optional[Tolerances] = None) -> EvalReport:
    """Fit a probe and collect every downstream number for one embedding."""
    probe = fit_probe(fm, w, ridge=ridge, tol=tol)
    delta_u, delta_s = compute_deltas(w, labels)
    cap = probe_norm_cap(bound_inputs) if bound_inputs is not None else math.inf
    report = EvalReport(
        per_aug_error=per_aug_error(fm, probe, w),
        natural_vote_error=natural_vote_error(fm, probe, w),
        delta_u=delta_u,
        delta_s=delta_s,
        probe_norm=probe.frobenius_norm,
        theorem_norm_cap=cap,
    )
    if report.gate == "fail":
        logger.warning("probe norm %.4g exceeds cap %.4g", report.probe_norm, cap)
    return report
