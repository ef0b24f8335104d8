"""
Core graph representations shared by every other module.
Symmetric edge-weight graphs, degree normalisation D^{-1/2} A D^{-1/2},
and a dense symmetric eigensolver with a fixed ordering/sign contract.
"""

import logging
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .config import Settings, Tolerances, get_settings, resolve_tolerances
from .errors import DimensionMismatch, GraphTooLarge, NoConvergence, NotSymmetric, ZeroDegree

logger = logging.getLogger(__name__)


def _frozen_matrix(value, ndim: int = 2) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if ndim == 2 and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class SymmetricGraph(BaseModel):
    """Symmetric nonnegative edge-weight matrix (augmentation or label similarity)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weights: np.ndarray
    mass_normalized: bool = False

    @field_validator("weights", mode="before")
    @classmethod
    def _check_weights(cls, value):
        arr = _frozen_matrix(value)
        cap = get_settings().tolerances.max_vertices
        if arr.shape[0] > cap:
            raise GraphTooLarge(f"graph has {arr.shape[0]} vertices, cap is {cap}")
        return arr

    @property
    def n(self) -> int:
        return self.weights.shape[0]


class DegreeVector(BaseModel):
    """w_x = sum_x' w_xx' for every vertex; strictly positive."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        arr = _frozen_matrix(value, ndim=1)
        if arr.size and arr.min() <= 0:
            raise ValueError("degrees must be strictly positive")
        return arr

    @property
    def n(self) -> int:
        return self.values.shape[0]


class NormalizedGraph(BaseModel):
    """Normalised adjacency matrix together with the degrees it was built from."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    source_degrees: DegreeVector

    @field_validator("matrix", mode="before")
    @classmethod
    def _check_matrix(cls, value):
        return _frozen_matrix(value)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


class Spectrum(BaseModel):
    """Eigenvalues in descending order with orthonormal eigenvector columns."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    vectors: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        return _frozen_matrix(value, ndim=1)

    @field_validator("vectors", mode="before")
    @classmethod
    def _check_vectors(cls, value):
        return _frozen_matrix(value)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


class GraphValidationReport(BaseModel):
    symmetry_defect: float
    negativity_defect: float
    mass_defect: Optional[float] = None
    passed: bool
    problems: List[str] = Field(default_factory=list)


def validate_graph(g: SymmetricGraph, tol: Optional[Tolerances] = None) -> GraphValidationReport:
    """Report symmetry, negativity and mass defects. Never raises."""
    tol = resolve_tolerances(tol)
    w = g.weights
    if g.n == 0:
        return GraphValidationReport(symmetry_defect=0.0, negativity_defect=0.0, passed=True)

    symmetry_defect = float(np.max(np.abs(w - w.T)))
    negativity_defect = float(max(0.0, -w.min()))
    mass_defect = float(abs(w.sum() - 1.0)) if g.mass_normalized else None

    problems = []
    if symmetry_defect > tol.symmetry:
        problems.append(f"asymmetric: max |w_ij - w_ji| = {symmetry_defect:.3e}")
    if negativity_defect > 0:
        problems.append(f"negative entry: min weight = {-negativity_defect:.3e}")
    if mass_defect is not None and mass_defect > tol.mass:
        problems.append(f"total mass off by {mass_defect:.3e}")

    return GraphValidationReport(
        symmetry_defect=symmetry_defect,
        negativity_defect=negativity_defect,
        mass_defect=mass_defect,
        passed=not problems,
        problems=problems,
    )


def degrees(g: SymmetricGraph) -> DegreeVector:
    row_sums = g.weights.sum(axis=1)
    bad = np.flatnonzero(row_sums <= 0)
    if bad.size:
        raise ZeroDegree(f"vertices {bad.tolist()[:10]} have non-positive degree")
    return DegreeVector(values=row_sums)


def normalize(g: SymmetricGraph) -> NormalizedGraph:
    """D^{-1/2} A D^{-1/2}."""
    d = degrees(g)
    inv_sqrt = 1.0 / np.sqrt(d.values)
    return NormalizedGraph(matrix=g.weights * np.outer(inv_sqrt, inv_sqrt), source_degrees=d)


def compute_rho(d: DegreeVector) -> float:
    """Largest degree ratio max_i w_i / min_j w_j. Callers add their own slack."""
    return float(d.values.max() / d.values.min())


# Eigensolver

@lru_cache(maxsize=64)
def _round_robin_schedule(n: int) -> Tuple[Tuple[np.ndarray, np.ndarray], ...]:
    """Pairings covering every (p, q) once per sweep, each round disjoint."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    fixed, rest = players[0], players[1:]
    rounds = []
    for _ in range(m - 1):
        line = [fixed] + rest
        pairs = [(line[i], line[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append((np.array([p for p, _ in pairs], dtype=int), np.array([q for _, q in pairs], dtype=int)))
        rest = rest[-1:] + rest[:-1]
    return tuple(rounds)


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _jacobi(m: np.ndarray, tol: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi, round-robin ordering, all disjoint rotations of a round at once."""
    a = np.array(m, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    target = tol.eigh_offdiag_rel * np.linalg.norm(a)
    if n < 2 or target == 0:
        return np.diag(a).copy(), v

    cap = tol.eigh_rotation_factor * n * n
    rotations = 0
    sweeps = 0
    while _off_diagonal_norm(a) > target:
        for p_all, q_all in _round_robin_schedule(n):
            apq = a[p_all, q_all]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p_all[active], q_all[active], apq[active]
            with np.errstate(over="ignore"):
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p, col_q = a[:, p], a[:, q]
            a[:, p] = col_p * c - col_q * s
            a[:, q] = col_p * s + col_q * c
            row_p, row_q = a[p, :], a[q, :]
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0

            vec_p, vec_q = v[:, p], v[:, q]
            v[:, p] = vec_p * c - vec_q * s
            v[:, q] = vec_p * s + vec_q * c

            rotations += p.size
            if rotations > cap:
                raise NoConvergence(f"Jacobi exceeded {cap} rotations (n={n})")
        sweeps += 1

    logger.debug("jacobi converged: n=%d sweeps=%d rotations=%d", n, sweeps, rotations)
    return np.diag(a).copy(), v


def _pick_method(n: int, settings: Settings, method: Optional[str]) -> str:
    method = method or settings.eigen_method
    if method == "auto":
        return "jacobi" if n <= settings.jacobi_max_n else "lapack"
    return method


def eigh(m: np.ndarray, method: Optional[str] = None, settings: Optional[Settings] = None) -> Spectrum:
    """
    Full eigendecomposition of a symmetric matrix.

    Values come back in descending order; each eigenvector's first component
    with magnitude above the sign threshold is positive.
    """
    settings = settings or get_settings()
    tol = settings.tolerances
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"eigh needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return Spectrum(values=np.zeros(0), vectors=np.zeros((0, 0)))

    asym = float(np.max(np.abs(m - m.T)))
    if asym > tol.eigh_symmetry * max(1.0, float(np.max(np.abs(m)))):
        raise NotSymmetric(f"matrix is not symmetric (defect {asym:.3e})")
    sym = 0.5 * (m + m.T)

    if _pick_method(n, settings, method) == "jacobi":
        values, vectors = _jacobi(sym, tol)
    else:
        values, vectors = np.linalg.eigh(sym)

    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]

    for j in range(n):
        column = vectors[:, j]
        lead = np.flatnonzero(np.abs(column) > tol.sign_threshold)
        if lead.size and column[lead[0]] < 0:
            vectors[:, j] = -column

    return Spectrum(values=values, vectors=vectors)


def frobenius_sq(m: np.ndarray) -> float:
    return float(np.sum(np.square(m)))
