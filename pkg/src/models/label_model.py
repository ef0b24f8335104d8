"""
Label model: posterior matrices, symmetric label noise and the label-similarity
graphs built from them, including the closed-form normalised block graph.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core.config import Tolerances, get_settings, resolve_tolerances
from ..core.errors import (
    AsymmetricNoise,
    ConfigInvalid,
    DimensionMismatch,
    InvalidClassCount,
    NoiseRateOutOfRange,
    NotClassBalanced,
    ZeroDegree,
)
from ..core.graph import DegreeVector, NormalizedGraph, SymmetricGraph, normalize

logger = logging.getLogger(__name__)


class PosteriorMatrix(BaseModel):
    """n_L x r matrix of class posteriors eta[i][j] = eta_j(x_i)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eta: np.ndarray
    class_balanced: bool = False

    @field_validator("eta", mode="before")
    @classmethod
    def _check_eta(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"posterior matrix must be n_L x r, got shape {arr.shape}")
        tol = get_settings().tolerances
        if arr.size:
            if arr.min() < -tol.row_sum or arr.max() > 1.0 + tol.row_sum:
                raise ValueError("posterior entries must lie in [0, 1]")
            row_defect = np.max(np.abs(arr.sum(axis=1) - 1.0))
            if row_defect > tol.row_sum * max(1, arr.shape[1]):
                raise ValueError(f"posterior rows must sum to 1 (defect {row_defect:.3e})")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_balance(self):
        if self.class_balanced and not is_class_balanced(self):
            raise ValueError("class_balanced set but column sums are not n_L/r")
        return self

    @property
    def n_L(self) -> int:
        return self.eta.shape[0]

    @property
    def r(self) -> int:
        return self.eta.shape[1]


class NoiseModel(BaseModel):
    """
    Label transition model. For symmetric noise gamma, alpha and beta are set and
    T = (1 - gamma) I + gamma/(r-1) (11^T - I). A generic row-stochastic T leaves
    them as None.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    r: int = Field(ge=2)
    gamma: Optional[float] = None
    T: np.ndarray
    alpha: Optional[float] = None
    beta: Optional[float] = None

    @field_validator("T", mode="before")
    @classmethod
    def _check_t(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"transition matrix must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        return arr

    @property
    def is_symmetric_noise(self) -> bool:
        return self.gamma is not None


class SemiSupervisedLayout(BaseModel):
    """Labeled points occupy indices 0..n_L-1, unlabeled points follow."""
    model_config = ConfigDict(frozen=True)

    n_L: int = Field(ge=0)
    n_U: int = Field(ge=0)

    @property
    def n(self) -> int:
        return self.n_L + self.n_U


def one_hot(labels: Sequence[int], r: int, softness: float = 0.0) -> PosteriorMatrix:
    """Posteriors (1 - s) onehot + s/r for 0-based class labels."""
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= r):
        raise DimensionMismatch(f"labels must lie in 0..{r - 1}")
    eta = np.full((labels.size, r), softness / r)
    eta[np.arange(labels.size), labels] += 1.0 - softness
    return PosteriorMatrix(eta=eta)


def class_counts(y: PosteriorMatrix) -> np.ndarray:
    """Soft class counts n_l (posterior column sums)."""
    return y.eta.sum(axis=0)


def is_class_balanced(y: PosteriorMatrix, tol: Optional[Tolerances] = None) -> bool:
    tol = resolve_tolerances(tol)
    target = y.n_L / y.r
    return bool(np.all(np.abs(class_counts(y) - target) <= tol.class_balance * max(1.0, target)))


def make_noise_model(r: int, gamma: float) -> NoiseModel:
    if r < 2:
        raise InvalidClassCount(f"need at least two classes, got r={r}")
    limit = (r - 1) / r
    if not 0.0 <= gamma < limit:
        raise NoiseRateOutOfRange(f"gamma={gamma} outside [0, {limit})")

    off = gamma / (r - 1)
    T = np.full((r, r), off)
    np.fill_diagonal(T, 1.0 - gamma)
    shrink = 1.0 - r * off
    return NoiseModel(r=r, gamma=gamma, T=T, alpha=shrink**2, beta=off * (1.0 + shrink))


def noise_rate_from_alpha(r: int, alpha: float) -> float:
    """Inverse of the symmetric model's alpha on gamma in [0, (r-1)/r)."""
    if r < 2:
        raise InvalidClassCount(f"need at least two classes, got r={r}")
    if not 0.0 < alpha <= 1.0:
        raise NoiseRateOutOfRange(f"alpha={alpha} outside (0, 1]")
    return (1.0 - np.sqrt(alpha)) * (r - 1) / r


def make_transition_noise_model(T, tol: Optional[Tolerances] = None) -> NoiseModel:
    """Noise model from an arbitrary row-stochastic transition matrix."""
    tol = resolve_tolerances(tol)
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionMismatch(f"transition matrix must be square, got shape {T.shape}")
    r = T.shape[0]
    if r < 2:
        raise InvalidClassCount(f"need at least two classes, got r={r}")
    if T.min() < 0 or np.max(np.abs(T.sum(axis=1) - 1.0)) > tol.row_sum * r:
        raise ConfigInvalid("transition matrix must be row-stochastic")

    off = T[~np.eye(r, dtype=bool)]
    diag = np.diag(T)
    if np.ptp(off) <= tol.row_sum and np.ptp(diag) <= tol.row_sum:
        gamma = float(1.0 - diag[0])
        if gamma < (r - 1) / r:
            return make_noise_model(r, gamma)

    logger.debug("generic %dx%d transition matrix; closed forms unavailable", r, r)
    return NoiseModel(r=r, T=T)


def apply_noise(y: PosteriorMatrix, nm: NoiseModel) -> PosteriorMatrix:
    """Noisy posteriors Y T."""
    if y.r != nm.r:
        raise DimensionMismatch(f"posterior has r={y.r}, noise model r={nm.r}")
    noisy = y.eta @ nm.T
    return PosteriorMatrix(eta=noisy, class_balanced=y.class_balanced and nm.is_symmetric_noise)


def label_graph(y: PosteriorMatrix) -> SymmetricGraph:
    """A_L = Y Y^T."""
    gram = y.eta @ y.eta.T
    return SymmetricGraph(weights=0.5 * (gram + gram.T))


def noisy_label_graph(y: PosteriorMatrix, nm: NoiseModel) -> SymmetricGraph:
    """A*_L = Y T T^T Y^T, which is Y T^2 Y^T for symmetric noise."""
    return label_graph(apply_noise(y, nm))


def semi_block_graph(y: PosteriorMatrix, nm: NoiseModel, layout: SemiSupervisedLayout) -> SymmetricGraph:
    """block[Y T^2 Y^T, 0; 0, I_{n_U}]."""
    if layout.n_L != y.n_L:
        raise DimensionMismatch(f"layout has n_L={layout.n_L}, posteriors have {y.n_L}")
    weights = np.zeros((layout.n, layout.n))
    if layout.n_L:
        weights[: layout.n_L, : layout.n_L] = noisy_label_graph(y, nm).weights
    weights[layout.n_L:, layout.n_L:] = np.eye(layout.n_U)
    return SymmetricGraph(weights=weights)


def labeled_degrees(y: PosteriorMatrix, nm: NoiseModel) -> np.ndarray:
    """d_i = alpha sum_l eta_l(x_i) n_l + n_L beta (or Y T T^T n for generic T)."""
    counts = class_counts(y)
    if nm.is_symmetric_noise:
        return nm.alpha * (y.eta @ counts) + y.n_L * nm.beta
    return y.eta @ (nm.T @ nm.T.T @ counts)


def normalize_label_block(a_star: SymmetricGraph, y: PosteriorMatrix, nm: NoiseModel) -> NormalizedGraph:
    """Normalise a semi-supervised block graph using the analytic labeled degrees."""
    if a_star.n < y.n_L:
        raise DimensionMismatch(f"graph has {a_star.n} vertices, fewer than n_L={y.n_L}")
    if y.r != nm.r:
        raise DimensionMismatch(f"posterior has r={y.r}, noise model r={nm.r}")

    d = np.concatenate([labeled_degrees(y, nm), a_star.weights[y.n_L:].sum(axis=1)])
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise ZeroDegree(f"vertices {bad.tolist()[:10]} have non-positive degree")

    inv_sqrt = 1.0 / np.sqrt(d)
    return NormalizedGraph(
        matrix=a_star.weights * np.outer(inv_sqrt, inv_sqrt),
        source_degrees=DegreeVector(values=d),
    )


def lemma41_closed_form(y: PosteriorMatrix, nm: NoiseModel, layout: SemiSupervisedLayout,
                        tol: Optional[Tolerances] = None) -> NormalizedGraph:
    """block[alpha A_L + beta (r/n_L) 11^T ; I] assembled without forming T^2."""
    if not nm.is_symmetric_noise:
        raise AsymmetricNoise("closed form needs a symmetric noise model")
    if layout.n_L != y.n_L:
        raise DimensionMismatch(f"layout has n_L={layout.n_L}, posteriors have {y.n_L}")
    if y.r != nm.r:
        raise DimensionMismatch(f"posterior has r={y.r}, noise model r={nm.r}")

    n_L, r = layout.n_L, nm.r
    matrix = np.eye(layout.n)
    degrees = np.ones(layout.n)
    if n_L == 0:
        return NormalizedGraph(matrix=matrix, source_degrees=DegreeVector(values=degrees))

    if not is_class_balanced(y, tol):
        raise NotClassBalanced(f"class counts {class_counts(y).tolist()} differ from n_L/r={n_L / r}")

    a_bar = normalize(label_graph(y)).matrix
    matrix[:n_L, :n_L] = nm.alpha * a_bar + nm.beta * (r / n_L)
    degrees[:n_L] = n_L / r
    return NormalizedGraph(matrix=matrix, source_degrees=DegreeVector(values=degrees))
