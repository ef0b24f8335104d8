"""
Seeded generator of desk-scale block worlds.
Natural points, their augmentation distributions A(.|x̄), the induced
augmentation graph w_xx' = E_x̄[A(x|x̄) A(x'|x̄)] and ground-truth labels.
"""

import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.errors import ConfigInvalid
from ..core.graph import SymmetricGraph
from ..models.label_model import PosteriorMatrix, SemiSupervisedLayout, one_hot

logger = logging.getLogger(__name__)


class ScenarioConfig(BaseModel):
    """Parameters of one block world."""
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, lt=2**64)
    r: int = Field(default=2, ge=2)
    naturals_per_class: int = Field(default=2, ge=1)
    augs_per_natural: int = Field(default=2, ge=1)
    intra_class_overlap: float = Field(default=0.2, ge=0.0, le=1.0)
    inter_class_overlap: float = Field(default=0.05, ge=0.0, le=1.0)
    class_priors: Optional[List[float]] = None
    labeled_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    gamma: float = Field(default=0.0, ge=0.0)
    label_softness: float = Field(default=0.0, ge=0.0, lt=1.0)
    overlap_jitter: float = Field(default=0.0, ge=0.0, lt=1.0)

    @field_validator("class_priors")
    @classmethod
    def _check_priors(cls, value):
        if value is None:
            return value
        if any(p < 0 for p in value) or abs(sum(value) - 1.0) > 1e-12:
            raise ValueError("class priors must be a probability vector")
        return value

    @model_validator(mode="after")
    def _check_overlaps(self):
        if self.inter_class_overlap > self.intra_class_overlap:
            raise ValueError("inter_class_overlap must not exceed intra_class_overlap")
        if self.intra_class_overlap + self.inter_class_overlap > 1.0:
            raise ValueError("overlap masses exceed 1")
        if self.class_priors is not None and len(self.class_priors) != self.r:
            raise ValueError(f"expected {self.r} class priors, got {len(self.class_priors)}")
        if self.gamma >= (self.r - 1) / self.r:
            raise ValueError(f"gamma={self.gamma} outside [0, {(self.r - 1) / self.r})")
        return self

    @property
    def n_naturals(self) -> int:
        return self.r * self.naturals_per_class

    @property
    def n_points(self) -> int:
        return self.n_naturals * self.augs_per_natural

    def priors(self) -> np.ndarray:
        if self.class_priors is None:
            return np.full(self.r, 1.0 / self.r)
        return np.asarray(self.class_priors, dtype=float)


def load_scenario_config(data: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigInvalid(f"invalid scenario config: {e}") from e


class World(BaseModel):
    """A generated world; augmented points are ordered labeled-first."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    config: ScenarioConfig
    aug_graph: SymmetricGraph
    natural_of: np.ndarray
    label_of_natural: np.ndarray
    natural_prior: np.ndarray
    aug_dist: np.ndarray
    posteriors: PosteriorMatrix
    layout: SemiSupervisedLayout

    @field_validator("natural_of", "label_of_natural", mode="before")
    @classmethod
    def _as_index_array(cls, value):
        arr = np.array(value, dtype=int)
        arr.setflags(write=False)
        return arr

    @field_validator("natural_prior", "aug_dist", mode="before")
    @classmethod
    def _as_float_array(cls, value):
        arr = np.array(value, dtype=float)
        arr.setflags(write=False)
        return arr

    @property
    def n(self) -> int:
        return self.aug_dist.shape[1]

    @property
    def n_naturals(self) -> int:
        return self.aug_dist.shape[0]

    @property
    def r(self) -> int:
        return self.config.r

    @property
    def point_labels(self) -> np.ndarray:
        """Clean label y(parent(x)) of every augmented point."""
        return self.label_of_natural[self.natural_of]

    def joint_mass(self) -> np.ndarray:
        """P(x̄) A(x|x̄) as an N x n matrix."""
        return self.natural_prior[:, None] * self.aug_dist


def _spread(row: np.ndarray, columns: np.ndarray, mass: float, jitter: float, rng) -> None:
    if columns.size == 0 or mass == 0.0:
        return
    shares = np.ones(columns.size)
    if jitter > 0:
        shares *= 1.0 + jitter * rng.uniform(-1.0, 1.0, size=columns.size)
    row[columns] += mass * shares / shares.sum()


def _augmentation_rows(cfg: ScenarioConfig, rng) -> np.ndarray:
    r, per_class, m = cfg.r, cfg.naturals_per_class, cfg.augs_per_natural
    N, n = cfg.n_naturals, cfg.n_points
    p_in, p_out = cfg.intra_class_overlap, cfg.inter_class_overlap
    point_class = np.repeat(np.arange(N) // per_class, m)
    point_natural = np.repeat(np.arange(N), m)

    rows = np.zeros((N, n))
    for j in range(N):
        own = np.flatnonzero(point_natural == j)
        cls = j // per_class
        same = np.flatnonzero((point_class == cls) & (point_natural != j))
        other = np.flatnonzero(point_class != cls)

        rows[j, own] = (1.0 - p_in - p_out) / m
        if same.size:
            _spread(rows[j], same, p_in, cfg.overlap_jitter, rng)
        else:
            rows[j, own] += p_in / m
        _spread(rows[j], other, p_out, cfg.overlap_jitter, rng)
    return rows


def _stratified_labeled(cfg: ScenarioConfig, point_class: np.ndarray, rng) -> np.ndarray:
    n_target = math.ceil(cfg.labeled_fraction * cfg.n_points)
    if n_target == 0:
        return np.zeros(0, dtype=int)
    class_size = cfg.naturals_per_class * cfg.augs_per_natural
    per_class = min(class_size, math.ceil(n_target / cfg.r))
    picks = [np.sort(rng.choice(np.flatnonzero(point_class == c), size=per_class, replace=False))
             for c in range(cfg.r)]
    return np.concatenate(picks)


def gen_block_world(cfg: ScenarioConfig) -> World:
    """Generate a world; identical configs give bit-identical worlds."""
    cfg = load_scenario_config(cfg.model_dump())
    rng = np.random.default_rng(cfg.seed)
    N, m = cfg.n_naturals, cfg.augs_per_natural

    label_of_natural = np.arange(N) // cfg.naturals_per_class
    natural_prior = cfg.priors()[label_of_natural] / cfg.naturals_per_class
    aug_dist = _augmentation_rows(cfg, rng)

    natural_of = np.repeat(np.arange(N), m)
    labeled = _stratified_labeled(cfg, label_of_natural[natural_of], rng)
    rest = np.setdiff1d(np.arange(cfg.n_points), labeled, assume_unique=True)
    order = np.concatenate([labeled, rest]).astype(int)
    aug_dist = aug_dist[:, order]
    natural_of = natural_of[order]

    weights = aug_dist.T @ (natural_prior[:, None] * aug_dist)
    weights = 0.5 * (weights + weights.T)

    n_L = labeled.size
    posteriors = one_hot(label_of_natural[natural_of[:n_L]], cfg.r, softness=cfg.label_softness)
    posteriors = PosteriorMatrix(eta=posteriors.eta, class_balanced=n_L > 0)

    logger.debug("generated world seed=%d N=%d n=%d n_L=%d", cfg.seed, N, cfg.n_points, n_L)
    return World(
        config=cfg,
        aug_graph=SymmetricGraph(weights=weights, mass_normalized=True),
        natural_of=natural_of,
        label_of_natural=label_of_natural,
        natural_prior=natural_prior,
        aug_dist=aug_dist,
        posteriors=posteriors,
        layout=SemiSupervisedLayout(n_L=n_L, n_U=cfg.n_points - n_L),
    )


def bayes_labeler(w: World) -> np.ndarray:
    """ŷ(x) = y(argmax_x̄ P(x̄) A(x|x̄)), ties to the lowest natural index."""
    parent = np.argmax(w.joint_mass(), axis=0)
    return w.label_of_natural[parent]
