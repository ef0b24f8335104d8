"""
Spectral contrastive objective, its matrix-factorisation form, the exact
rank-k minimiser, and gradient / sampled trainers on the factor matrix.
"""

import logging
from typing import Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core.config import Settings
from ..core.errors import DimensionMismatch, Diverged, SamplerUnderflow
from ..core.graph import (
    DegreeVector,
    NormalizedGraph,
    Spectrum,
    SymmetricGraph,
    eigh,
    frobenius_sq,
    normalize,
)

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Settings for the factor-matrix trainers."""
    step_size: float = Field(default=0.05, gt=0)
    max_iters: int = Field(default=20000, ge=1)
    grad_tol: float = Field(default=1e-9, gt=0)
    batch_pairs: int = Field(default=4096, ge=1)
    seed: int = Field(default=0, ge=0)
    backtracking: bool = True
    max_halvings: int = Field(default=30, ge=0)
    diverge_patience: int = Field(default=50, ge=1)


class TrainingRecord(BaseModel):
    loss: float
    iters: int
    seed: Optional[int] = None
    converged: bool = False
    stalled: bool = False


class FactorMatrix(BaseModel):
    """n x k factor F whose rows are u_x = w_x^{1/2} f(x)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    F: np.ndarray
    degrees: DegreeVector
    record: Optional[TrainingRecord] = None

    @field_validator("F", mode="before")
    @classmethod
    def _check_f(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"factor must be n x k, got shape {arr.shape}")
        if arr.shape[1] > arr.shape[0]:
            raise ValueError(f"k={arr.shape[1]} exceeds n={arr.shape[0]}")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_degrees(self):
        if self.degrees.n != self.F.shape[0]:
            raise ValueError(f"{self.degrees.n} degrees for a factor with {self.F.shape[0]} rows")
        return self

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def k(self) -> int:
        return self.F.shape[1]

    def embeddings(self) -> np.ndarray:
        """f(x) = w_x^{-1/2} u_x, one row per vertex."""
        return self.F / np.sqrt(self.degrees.values)[:, None]

    def gram(self) -> np.ndarray:
        return self.F @ self.F.T


class MixedGraphSource(BaseModel):
    """
    Unnormalised edge weights D^{1/2} M D^{1/2} of a (mixed) normalised graph M,
    with D the degrees of the augmentation graph. Positive pairs are drawn from
    these weights and independent pairs from the marginals.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: np.ndarray
    marginals: DegreeVector

    @field_validator("weights", mode="before")
    @classmethod
    def _check_weights(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"edge weights must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_normalized(cls, ng: NormalizedGraph) -> "MixedGraphSource":
        root = np.sqrt(ng.source_degrees.values)
        return cls(weights=ng.matrix * np.outer(root, root), marginals=ng.source_degrees)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


EdgeSource = Union[SymmetricGraph, MixedGraphSource]


def _edge_weights(g: EdgeSource) -> np.ndarray:
    return g.weights


def _check_dims(fm: FactorMatrix, n: int) -> None:
    if fm.n != n:
        raise DimensionMismatch(f"factor has {fm.n} rows, graph has {n} vertices")


def population_spectral_loss(fm: FactorMatrix, g: EdgeSource) -> float:
    """
    -2 sum w_xx' f(x).f(x') + sum w_x w_x' (f(x).f(x'))^2

    Positive pairs are weighted by the edge weights of g, independent pairs by
    the factor's degree vector.
    """
    w = _edge_weights(g)
    _check_dims(fm, w.shape[0])
    f = fm.embeddings()
    inner = f @ f.T
    marg = fm.degrees.values
    return float(-2.0 * np.sum(w * inner) + np.sum(np.outer(marg, marg) * inner**2))


def matrix_factorization_loss(fm: FactorMatrix, ng: NormalizedGraph) -> float:
    """||Ā - F F^T||_F^2."""
    _check_dims(fm, ng.n)
    return frobenius_sq(ng.matrix - fm.gram())


def loss_gap(fm: FactorMatrix, g: SymmetricGraph) -> float:
    """L_mf(F) - L(F); equals ||Ā||_F^2 whatever F is."""
    return matrix_factorization_loss(fm, normalize(g)) - population_spectral_loss(fm, g)


def top_k_factor(ng: NormalizedGraph, k: int, spectrum: Optional[Spectrum] = None,
                 settings: Optional[Settings] = None) -> FactorMatrix:
    """Eckart-Young minimiser F = V_k diag(sqrt(max(lambda, 0)))."""
    if not 1 <= k <= ng.n:
        raise DimensionMismatch(f"k={k} must lie in 1..{ng.n}")
    spectrum = spectrum if spectrum is not None else eigh(ng.matrix, settings=settings)
    top = np.clip(spectrum.values[:k], 0.0, None)
    F = spectrum.vectors[:, :k] * np.sqrt(top)
    return FactorMatrix(F=F, degrees=ng.source_degrees)


def mf_gradient(fm: FactorMatrix, ng: NormalizedGraph) -> np.ndarray:
    """-4 (Ā - F F^T) F."""
    _check_dims(fm, ng.n)
    return -4.0 * (ng.matrix - fm.gram()) @ fm.F


def initial_factor(n: int, k: int, seed: int) -> np.ndarray:
    scale = 1.0 / np.sqrt(n * k)
    return np.random.default_rng(seed).uniform(-scale, scale, size=(n, k))


def _descend(loss_fn: Callable[[np.ndarray], float], grad_fn: Callable[[np.ndarray], np.ndarray],
             F0: np.ndarray, cfg: TrainConfig) -> Tuple[np.ndarray, TrainingRecord]:
    """Gradient descent with optional backtracking halving."""
    F = np.array(F0, dtype=float)
    loss = loss_fn(F)
    increases = 0
    converged = stalled = False
    iters = 0

    while iters < cfg.max_iters:
        grad = grad_fn(F)
        if np.linalg.norm(grad) <= cfg.grad_tol:
            converged = True
            break

        step = cfg.step_size
        candidate = F - step * grad
        candidate_loss = loss_fn(candidate)
        if cfg.backtracking:
            halvings = 0
            while not candidate_loss <= loss and halvings < cfg.max_halvings:
                step *= 0.5
                halvings += 1
                candidate = F - step * grad
                candidate_loss = loss_fn(candidate)
            if not candidate_loss <= loss:
                stalled = True
                break
        else:
            increases = increases + 1 if not candidate_loss <= loss else 0
            if increases >= cfg.diverge_patience:
                raise Diverged(f"loss increased for {increases} consecutive iterations (step={cfg.step_size})")

        F, loss = candidate, candidate_loss
        iters += 1

    if not np.isfinite(loss):
        raise Diverged(f"loss became non-finite after {iters} iterations")

    logger.debug("descent finished: iters=%d loss=%.3e converged=%s stalled=%s", iters, loss, converged, stalled)
    return F, TrainingRecord(loss=loss, iters=iters, seed=cfg.seed, converged=converged, stalled=stalled)


def gd_train(ng: NormalizedGraph, k: int, cfg: TrainConfig) -> FactorMatrix:
    """Full-gradient descent on ||Ā - F F^T||_F^2 from a seeded uniform start."""
    if not 1 <= k <= ng.n:
        raise DimensionMismatch(f"k={k} must lie in 1..{ng.n}")
    target = np.asarray(ng.matrix)

    def loss_fn(F):
        return frobenius_sq(target - F @ F.T)

    def grad_fn(F):
        return -4.0 * (target - F @ F.T) @ F

    F, record = _descend(loss_fn, grad_fn, initial_factor(ng.n, k, cfg.seed), cfg)
    return FactorMatrix(F=F, degrees=ng.source_degrees, record=record)


# Sampled estimator

def draw_positive_pairs(source: MixedGraphSource, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Exact categorical draws of (x, x') proportional to the edge weights."""
    mass = source.total_mass
    if mass < 1e-15:
        raise SamplerUnderflow(f"total positive-pair mass {mass:.3e} is too small to sample")
    probs = np.clip(source.weights.ravel(), 0.0, None)
    flat = rng.choice(probs.size, size=size, p=probs / probs.sum())
    return np.divmod(flat, source.n)


def _pair_terms(source: MixedGraphSource, fm: FactorMatrix, cfg: TrainConfig) -> np.ndarray:
    _check_dims(fm, source.n)
    rng = np.random.default_rng(cfg.seed)
    size = cfg.batch_pairs
    pos_i, pos_j = draw_positive_pairs(source, size, rng)

    marg = fm.degrees.values
    total = marg.sum()
    ind_i = rng.choice(source.n, size=size, p=marg / total)
    ind_j = rng.choice(source.n, size=size, p=marg / total)

    f = fm.embeddings()
    positive = np.einsum("ij,ij->i", f[pos_i], f[pos_j])
    independent = np.einsum("ij,ij->i", f[ind_i], f[ind_j])
    return -2.0 * source.total_mass * positive + total**2 * independent**2


def sample_pair_loss(w, mixed: MixedGraphSource, fm: FactorMatrix, cfg: TrainConfig) -> float:
    """Unbiased Monte-Carlo estimate of population_spectral_loss(fm, mixed)."""
    if w is not None and w.n != mixed.n:
        raise DimensionMismatch(f"world has {w.n} points, mixed graph has {mixed.n}")
    return float(np.mean(_pair_terms(mixed, fm, cfg)))


def sample_pair_loss_stats(mixed: MixedGraphSource, fm: FactorMatrix, cfg: TrainConfig) -> Tuple[float, float]:
    """(estimate, standard error) over cfg.batch_pairs pairs."""
    terms = _pair_terms(mixed, fm, cfg)
    stderr = float(np.std(terms, ddof=1) / np.sqrt(terms.size)) if terms.size > 1 else float("inf")
    return float(np.mean(terms)), stderr
