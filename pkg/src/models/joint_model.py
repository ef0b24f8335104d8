"""
Joint training: the θ-weighted combination of the unsupervised and the
label-similarity factorisation losses, and the mixed graph it reduces to.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import DimensionMismatch, ThetaOutOfRange
from ..core.graph import NormalizedGraph, frobenius_sq, normalize
from .label_model import NoiseModel, lemma41_closed_form, make_noise_model
from .spectral_engine import FactorMatrix, MixedGraphSource, TrainConfig, _descend, initial_factor

logger = logging.getLogger(__name__)


class MixedGraphSpec(BaseModel):
    """Mixing weight and label setup of one mixed similarity graph."""
    model_config = ConfigDict(frozen=True)

    theta: float = Field(ge=0.0, le=1.0)
    gamma: float = Field(default=0.0, ge=0.0)
    n_L: int = Field(default=0, ge=0)
    n_U: int = Field(default=0, ge=0)
    r: int = Field(default=2, ge=2)

    @model_validator(mode="after")
    def _check_gamma(self):
        if self.gamma >= (self.r - 1) / self.r:
            raise ValueError(f"gamma={self.gamma} outside [0, {(self.r - 1) / self.r})")
        return self


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= 1.0:
        raise ThetaOutOfRange(f"theta={theta} outside [0, 1]")


def _check_pair(a0: NormalizedGraph, a_star: NormalizedGraph) -> None:
    if a0.n != a_star.n:
        raise DimensionMismatch(f"graphs have {a0.n} and {a_star.n} vertices")


def mix_graphs(a0: NormalizedGraph, a_star: NormalizedGraph, theta: float) -> NormalizedGraph:
    """(1 - θ) Ā₀ + θ Ā*, carrying the augmentation graph's degrees."""
    _check_theta(theta)
    _check_pair(a0, a_star)
    if theta == 0.0:
        matrix = np.array(a0.matrix)
    elif theta == 1.0:
        matrix = np.array(a_star.matrix)
    else:
        matrix = (1.0 - theta) * a0.matrix + theta * a_star.matrix
    return NormalizedGraph(matrix=matrix, source_degrees=a0.source_degrees)


def joint_mf_loss(fm: FactorMatrix, a0: NormalizedGraph, a_star: NormalizedGraph, theta: float) -> float:
    """(1 - θ) ||Ā₀ - F F^T||² + θ ||Ā* - F F^T||²."""
    _check_theta(theta)
    _check_pair(a0, a_star)
    if fm.n != a0.n:
        raise DimensionMismatch(f"factor has {fm.n} rows, graphs have {a0.n} vertices")
    gram = fm.gram()
    return (1.0 - theta) * frobenius_sq(a0.matrix - gram) + theta * frobenius_sq(a_star.matrix - gram)


def c0_constant(a0: NormalizedGraph, a_star: NormalizedGraph, theta: float) -> float:
    """
    (1-θ)||Ā₀||² + θ||Ā*||² - ||(1-θ)Ā₀ + θĀ*||², the part of the joint loss
    that does not depend on F. Algebraically θ(1-θ)||Ā₀ - Ā*||².
    """
    _check_theta(theta)
    _check_pair(a0, a_star)
    mixed = mix_graphs(a0, a_star, theta).matrix
    value = (1.0 - theta) * frobenius_sq(a0.matrix) + theta * frobenius_sq(a_star.matrix) - frobenius_sq(mixed)
    return max(0.0, value)


def joint_mf_gradient(fm: FactorMatrix, a0: NormalizedGraph, a_star: NormalizedGraph, theta: float) -> np.ndarray:
    _check_theta(theta)
    _check_pair(a0, a_star)
    gram = fm.gram()
    residual = (1.0 - theta) * (a0.matrix - gram) + theta * (a_star.matrix - gram)
    return -4.0 * residual @ fm.F


def train_joint(a0: NormalizedGraph, a_star: NormalizedGraph, theta: float, k: int,
                cfg: TrainConfig) -> FactorMatrix:
    """Gradient descent on the joint loss itself (not on the mixed graph)."""
    _check_theta(theta)
    _check_pair(a0, a_star)
    if not 1 <= k <= a0.n:
        raise DimensionMismatch(f"k={k} must lie in 1..{a0.n}")
    m0, m1 = np.asarray(a0.matrix), np.asarray(a_star.matrix)

    def loss_fn(F):
        gram = F @ F.T
        return (1.0 - theta) * frobenius_sq(m0 - gram) + theta * frobenius_sq(m1 - gram)

    def grad_fn(F):
        gram = F @ F.T
        return -4.0 * ((1.0 - theta) * (m0 - gram) + theta * (m1 - gram)) @ F

    F, record = _descend(loss_fn, grad_fn, initial_factor(a0.n, k, cfg.seed), cfg)
    return FactorMatrix(F=F, degrees=a0.source_degrees, record=record)


def build_mixed_graph(world, spec: MixedGraphSpec,
                      nm: Optional[NoiseModel] = None) -> Tuple[NormalizedGraph, MixedGraphSource]:
    """Ā₀ from the world's augmentation graph, Ā* from its labeled block, mixed at spec.theta."""
    if spec.n_L != world.layout.n_L or spec.n_U != world.layout.n_U:
        raise DimensionMismatch(f"spec layout ({spec.n_L}, {spec.n_U}) does not match the world's")
    nm = nm or make_noise_model(world.r, spec.gamma)
    a0 = normalize(world.aug_graph)
    a_star = lemma41_closed_form(world.posteriors, nm, world.layout)
    mixed = mix_graphs(a0, a_star, spec.theta)
    return mixed, MixedGraphSource.from_normalized(mixed)
