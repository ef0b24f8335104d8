"""
Closed-form spectral predictions and downstream error bounds.

Eigenvalue predictions for the noisy label graph and its mixture with the
augmentation graph, the joint-training error bound in its three k-regimes,
the noise-rate threshold that decides the optimal mixing endpoint, the
finite-sample variant and the labeling-disagreement mass phi.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from ..core.config import Tolerances, resolve_tolerances
from ..core.errors import (
    AsymmetricNoise,
    BoundPreconditionError,
    DegenerateDenominator,
    DimensionMismatch,
    EmptyKRange,
    IndexOutOfRange,
    NotClassBalanced,
    NotDeterministicScenario,
    ThetaOutOfRange,
    UndefinedThreshold,
)
from ..core.graph import Spectrum
from ..models.label_model import NoiseModel, PosteriorMatrix, SemiSupervisedLayout, is_class_balanced
from ..models.spectral_engine import MixedGraphSource

logger = logging.getLogger(__name__)

SpectrumLike = Union[Spectrum, Sequence[float], np.ndarray]


def _values(spectrum: SpectrumLike) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return np.asarray(spectrum.values)
    return np.asarray(spectrum, dtype=float)


def nu_at(nu: np.ndarray, j: int) -> float:
    """1-indexed eigenvalue with edge clamps: j < 1 gives nu_1, j > n gives 0."""
    if len(nu) == 0 or j > len(nu):
        return 0.0
    return float(nu[max(j, 1) - 1])


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= 1.0:
        raise ThetaOutOfRange(f"theta={theta} outside [0, 1]")


class BoundInputs(BaseModel):
    """Everything the error bounds are evaluated from."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    delta_u: float = Field(ge=0.0)
    delta_s: float = Field(ge=0.0)
    rho: float = Field(default=1.0, ge=1.0)
    nu: np.ndarray
    k: int = Field(ge=1)
    theta: float = 0.0
    alpha: float = Field(default=1.0, ge=0.0, le=1.0)
    r: int = Field(default=2, ge=2)
    n_L: int = Field(default=0, ge=0)
    n_U: int = Field(default=0, ge=0)

    @field_validator("nu", mode="before")
    @classmethod
    def _as_values(cls, value):
        arr = np.array(_values(value), dtype=float)
        if arr.ndim != 1:
            raise ValueError("nu must be a 1-d eigenvalue list")
        arr.setflags(write=False)
        return arr

    @field_serializer("nu")
    def _nu_list(self, value: np.ndarray) -> List[float]:
        return value.tolist()

    @model_validator(mode="after")
    def _warn_order(self):
        if self.delta_s > self.delta_u:
            logger.warning("delta_s=%.4g exceeds delta_u=%.4g", self.delta_s, self.delta_u)
        return self

    def nu_at(self, j: int) -> float:
        return nu_at(self.nu, j)

    def with_(self, **changes) -> "BoundInputs":
        return self.model_copy(update=changes)


class FiniteSampleInputs(BaseModel):
    """Complexity inputs of the finite-sample bound; n=None is the population limit."""
    rademacher: float = Field(default=0.0, ge=0.0)
    kappa: float = Field(default=1.0, gt=0.0)
    epsilon: float = Field(default=0.0, ge=0.0, lt=1.0)
    n: Optional[int] = Field(default=None, ge=1)
    c1: Optional[float] = Field(default=None, gt=0.0)
    c2: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_epsilon(self):
        if self.n is not None and self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive for a finite sample count")
        return self

    def constants(self, k: int) -> Tuple[float, float]:
        kap = self.kappa
        c1 = self.c1 if self.c1 is not None else k * k * kap * kap + k * kap
        c2 = self.c2 if self.c2 is not None else k * kap * kap + k * k * kap**4
        return c1, c2


class BoundReport(BaseModel):
    value: float
    active_term: int = 0
    lam: float = 0.0
    phi_hat: float = 0.0
    regime: str = ""
    k_prime: Optional[int] = None
    approximation_term: Optional[float] = None
    sample_term: Optional[float] = None
    inputs: BoundInputs


class EigenInterval(BaseModel):
    k: int
    lower: float
    upper: float

    def contains(self, value: float, slack: float = 1e-9) -> bool:
        return self.lower - slack <= value <= self.upper + slack


class EndpointReport(BaseModel):
    theta_star: float
    grid: List[float]
    values: List[float]
    violation: bool = False
    violation_margin: float = 0.0


# Label-graph spectra

def predict_label_spectrum(mu: SpectrumLike, nm: NoiseModel, layout: SemiSupervisedLayout,
                           y: Optional[PosteriorMatrix] = None, tol: Optional[Tolerances] = None) -> np.ndarray:
    """
    Spectrum of the normalised semi-supervised block graph from the spectrum mu
    of the normalised clean label graph: n_U + 1 ones, then alpha * mu_j for j >= 2.
    """
    tol = resolve_tolerances(tol)
    mu = np.sort(_values(mu))[::-1]
    if not nm.is_symmetric_noise:
        raise AsymmetricNoise("spectrum prediction needs a symmetric noise model")
    if layout.n_L == 0:
        return np.ones(layout.n_U)
    if mu.size != layout.n_L:
        raise DimensionMismatch(f"{mu.size} label-graph eigenvalues for n_L={layout.n_L}")
    if y is not None and not is_class_balanced(y, tol):
        raise NotClassBalanced("labeled block is not class balanced")
    if abs(mu[0] - 1.0) > 1e-8:
        raise NotClassBalanced(f"top label-graph eigenvalue {mu[0]:.6g} is not 1")

    predicted = np.concatenate([np.ones(layout.n_U + 1), nm.alpha * mu[1:]])
    return np.sort(predicted)[::-1]


def deterministic_label_spectrum(nm: NoiseModel, layout: SemiSupervisedLayout) -> np.ndarray:
    """{1 x (n_U + 1), alpha x (r - 1), 0 x (n_L - r)}."""
    if not nm.is_symmetric_noise:
        raise AsymmetricNoise("spectrum prediction needs a symmetric noise model")
    if layout.n_L == 0:
        return np.ones(layout.n_U)
    if layout.n_L < nm.r:
        raise NotClassBalanced(f"n_L={layout.n_L} cannot hold all {nm.r} classes")
    return np.concatenate([
        np.ones(layout.n_U + 1),
        np.full(nm.r - 1, nm.alpha),
        np.zeros(layout.n_L - nm.r),
    ])


def weyl_interval(nu_vals: SpectrumLike, mu_tilde_vals: SpectrumLike, theta: float, k: int) -> EigenInterval:
    """
    Weyl interval for lambda_{k+1} of (1-θ)A + θB, where A has eigenvalues nu and
    B has eigenvalues mu_tilde (both descending, same length).
    """
    _check_theta(theta)
    a = (1.0 - theta) * np.sort(_values(nu_vals))[::-1]
    b = theta * np.sort(_values(mu_tilde_vals))[::-1]
    n = a.size
    if b.size != n:
        raise DimensionMismatch(f"spectra have lengths {n} and {b.size}")
    t = k + 1
    if k < 0 or t > n:
        raise IndexOutOfRange(f"lambda_{t} requested from {n} eigenvalues")

    # 1-indexed: upper over i + j = t + 1, lower over i + j = n + t
    upper = min(a[i - 1] + b[t - i] for i in range(1, t + 1))
    lower = max(a[i - 1] + b[n + t - i - 1] for i in range(t, n + 1))
    return EigenInterval(k=k, lower=float(lower), upper=float(upper))


def _check_deterministic(mu: np.ndarray, r: int, n_L: int) -> None:
    if mu.size != n_L:
        raise DimensionMismatch(f"{mu.size} label-graph eigenvalues for n_L={n_L}")
    if n_L == 0:
        return
    expected = np.concatenate([np.ones(min(r, n_L)), np.zeros(max(n_L - r, 0))])
    if np.max(np.abs(np.sort(mu)[::-1] - expected)) > 1e-8:
        raise NotDeterministicScenario("label-graph spectrum is not r ones followed by zeros")


def mixed_eig_bounds(nu: SpectrumLike, mu: SpectrumLike, nm: NoiseModel, layout: SemiSupervisedLayout,
                     theta: float, k: int) -> EigenInterval:
    """Interval for lambda_{k+1} of (1-θ)Ā₀ + θĀ* in the deterministic scenario."""
    _check_theta(theta)
    nu = np.sort(_values(nu))[::-1]
    mu = _values(mu)
    n, n_L, n_U, r = layout.n, layout.n_L, layout.n_U, nm.r
    if not nm.is_symmetric_noise:
        raise AsymmetricNoise("eigenvalue bounds need a symmetric noise model")
    if nu.size != n:
        raise DimensionMismatch(f"{nu.size} augmentation eigenvalues for n={n}")
    if k < 1 or k + 1 > n:
        raise IndexOutOfRange(f"lambda_{k + 1} requested from {n} eigenvalues")
    _check_deterministic(mu, r, n_L)
    alpha = nm.alpha

    def v(j):
        return nu_at(nu, j)

    if n_L == 0:
        exact = theta + (1.0 - theta) * v(k + 1)
        return EigenInterval(k=k, lower=exact, upper=exact)

    if k <= n_U:
        lower = max(
            theta + (1.0 - theta) * v(n_L + k),
            (1.0 - theta) * v(k + 1),
            theta * alpha + (1.0 - theta) * v(n_L + k - r + 1),
        )
        upper = theta + (1.0 - theta) * v(k + 1)
        return EigenInterval(k=k, lower=lower, upper=upper)

    if k >= n_U + r:
        candidates = [
            theta + (1.0 - theta) * v(k + 1),
            theta * alpha + (1.0 - theta) * v(k - n_U),
        ]
        if n_L > r:
            candidates.append((1.0 - theta) * v(k + 1 - r - n_U))
        return EigenInterval(k=k, lower=(1.0 - theta) * v(k + 1), upper=min(candidates))

    return weyl_interval(nu, deterministic_label_spectrum(nm, layout), theta, k)


# Error bounds

def phi_hat_upper_bound(delta_u: float, delta_s: float, rho: float, alpha: float, theta: float) -> float:
    """2(1-θ)δ_u + θ[α(1+ρ)δ_s + (1-α)], which dominates the exact disagreement mass."""
    return 2.0 * delta_u + (alpha * (1.0 + rho) * delta_s - 2.0 * delta_u + (1.0 - alpha)) * theta


def _lambda_terms(bi: BoundInputs, k: int) -> Tuple[List[float], str]:
    theta, alpha = bi.theta, bi.alpha
    terms = [theta + (1.0 - theta) * bi.nu_at(k + 1)]
    if k <= bi.n_U:
        return terms, "semi"
    terms.append(theta * alpha + (1.0 - theta) * bi.nu_at(k - bi.n_U))
    if k < bi.n_U + bi.r:
        return terms, "middle"
    # the label graph has a zero eigenvalue only when n_L > r
    if bi.n_L > bi.r:
        terms.append((1.0 - theta) * bi.nu_at(k + 1 - bi.r - bi.n_U))
    return terms, "noisy"


def _lambda(bi: BoundInputs, k: int) -> Tuple[float, int, str]:
    terms, regime = _lambda_terms(bi, k)
    active = int(np.argmin(terms))
    return terms[active], active + 1, regime


def joint_bound(bi: BoundInputs, tol: Optional[Tolerances] = None) -> BoundReport:
    """2 phi / (1 - lambda) + 8 δ_u, with lambda chosen by the k-regime."""
    tol = resolve_tolerances(tol)
    _check_theta(bi.theta)
    phi = phi_hat_upper_bound(bi.delta_u, bi.delta_s, bi.rho, bi.alpha, bi.theta)
    lam, active, regime = _lambda(bi, bi.k)
    denominator = 1.0 - lam
    if denominator <= tol.degenerate_denominator:
        raise DegenerateDenominator(f"1 - lambda = {denominator:.3e} at theta={bi.theta}, k={bi.k}")
    return BoundReport(
        value=2.0 * phi / denominator + 8.0 * bi.delta_u,
        active_term=active,
        lam=lam,
        phi_hat=phi,
        regime=regime,
        inputs=bi,
    )


def semi_bound(bi: BoundInputs, tol: Optional[Tolerances] = None) -> BoundReport:
    """Clean labels (alpha = 1) with k <= n_U."""
    if abs(bi.alpha - 1.0) > 1e-12:
        raise BoundPreconditionError(f"semi-supervised bound needs alpha = 1, got {bi.alpha}")
    if bi.k > bi.n_U:
        raise BoundPreconditionError(f"semi-supervised bound needs k <= n_U, got k={bi.k}, n_U={bi.n_U}")
    return joint_bound(bi, tol)


def noisy_bound(bi: BoundInputs, tol: Optional[Tolerances] = None) -> BoundReport:
    """Fully labeled noisy case: n_U = 0 and k > r."""
    if bi.n_U != 0:
        raise BoundPreconditionError(f"noisy-label bound needs n_U = 0, got {bi.n_U}")
    if bi.k <= bi.r:
        raise BoundPreconditionError(f"noisy-label bound needs k > r, got k={bi.k}, r={bi.r}")
    return joint_bound(bi, tol)


def probe_norm_cap(bi: BoundInputs) -> float:
    """Largest probe norm the bound's existence argument allows."""
    theta = bi.theta
    if bi.n_U == 0:
        denominator = (1.0 - theta) * bi.nu_at(bi.k)
    else:
        denominator = max((1.0 - theta) * bi.nu_at(bi.k), theta + (1.0 - theta) * bi.nu_at(bi.n_L + bi.k - bi.r))
    return math.inf if denominator <= 0.0 else 1.0 / denominator


def gamma_threshold(bi: BoundInputs) -> float:
    """Noise rate below which θ = 1 beats θ = 0 in the noisy-label bound."""
    nu_next = bi.nu_at(bi.k + 1)
    label_term = 1.0 - (1.0 + bi.rho) * bi.delta_s
    if label_term <= 0.0:
        raise UndefinedThreshold(f"(1 + rho) delta_s = {1.0 - label_term:.4g} >= 1")
    if nu_next >= 1.0:
        raise UndefinedThreshold("nu_{k+1} = 1 leaves the unsupervised bound undefined")
    radicand = (1.0 - nu_next - 2.0 * bi.delta_u) / (label_term * (1.0 - nu_next))
    if radicand < 0.0:
        raise UndefinedThreshold(f"negative radicand {radicand:.4g}")
    return (bi.r - 1) / bi.r * (1.0 - math.sqrt(radicand))


def endpoint_argmin(bi: BoundInputs, theta_grid: Sequence[float],
                    tol: Optional[Tolerances] = None) -> EndpointReport:
    """Evaluate the noisy-label bound over a θ grid and locate its minimum."""
    tol = resolve_tolerances(tol)
    grid = [float(t) for t in theta_grid]
    if not grid or grid[0] != 0.0 or grid[-1] != 1.0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise BoundPreconditionError("theta grid must be strictly increasing from 0 to 1")

    values = [noisy_bound(bi.with_(theta=t), tol).value for t in grid]
    end_index = 0 if values[0] <= values[-1] else len(grid) - 1
    best_end = values[end_index]
    theta_star = grid[end_index]

    interior = values[1:-1]
    margin = 0.0
    violation = False
    if interior:
        i = int(np.argmin(interior))
        margin = best_end - interior[i]
        if margin > tol.endpoint_violation:
            violation = True
            theta_star = grid[i + 1]
            logger.warning("interior theta=%.4g beats the best endpoint by %.3e", theta_star, margin)

    return EndpointReport(theta_star=theta_star, grid=grid, values=values,
                          violation=violation, violation_margin=max(margin, 0.0))


def finite_sample_bound(bi: BoundInputs, fsi: FiniteSampleInputs, k_prime_range: Optional[Sequence[int]] = None,
                        tol: Optional[Tolerances] = None) -> BoundReport:
    """
    min over k' of 2 phi / (1 - lambda(k')) + 4 k' [c1 R + c2 (sqrt(log(2/eps)/n) + eps)]
    / ((1-θ) nu_{k'} - lambda(k))^2, plus 8 δ_u.
    """
    tol = resolve_tolerances(tol)
    _check_theta(bi.theta)
    top = bi.k + 1 - bi.r
    candidates = list(range(1, top + 1)) if k_prime_range is None else [int(kp) for kp in k_prime_range]
    candidates = sorted(kp for kp in set(candidates) if 1 <= kp <= top)
    if not candidates:
        raise EmptyKRange(f"no admissible k' in 1..{top}")

    c1, c2 = fsi.constants(bi.k)
    sample_rate = 0.0 if fsi.n is None else math.sqrt(math.log(2.0 / fsi.epsilon) / fsi.n)
    numerator_core = c1 * fsi.rademacher + c2 * (sample_rate + fsi.epsilon)
    phi = phi_hat_upper_bound(bi.delta_u, bi.delta_s, bi.rho, bi.alpha, bi.theta)
    lam_k, _, _ = _lambda(bi, bi.k)

    best = None
    for kp in candidates:
        lam, active, regime = _lambda(bi, kp)
        if 1.0 - lam <= tol.degenerate_denominator:
            raise DegenerateDenominator(f"1 - lambda = {1.0 - lam:.3e} at k'={kp}")
        approximation = 2.0 * phi / (1.0 - lam)

        sample = 0.0
        if numerator_core > 0.0:
            gap = (1.0 - bi.theta) * bi.nu_at(kp) - lam_k
            if gap <= tol.degenerate_denominator:
                logger.debug("skipping k'=%d: eigen-gap %.3e", kp, gap)
                continue
            sample = 4.0 * kp * numerator_core / gap**2

        total = approximation + sample
        if best is None or total < best[0]:
            best = (total, kp, approximation, sample, lam, active, regime)

    if best is None:
        raise DegenerateDenominator(f"no k' in {candidates} leaves a positive eigen-gap")
    total, kp, approximation, sample, lam, active, regime = best
    return BoundReport(
        value=total + 8.0 * bi.delta_u,
        active_term=active,
        lam=lam,
        phi_hat=phi,
        regime=regime,
        k_prime=kp,
        approximation_term=approximation,
        sample_term=sample,
        inputs=bi,
    )


def compute_phi_hat(source: MixedGraphSource, labels: Sequence[int]) -> float:
    """Exact mixed edge mass between points the labeler separates."""
    labels = np.asarray(labels)
    if labels.shape != (source.n,):
        raise DimensionMismatch(f"{labels.size} labels for {source.n} vertices")
    disagree = labels[:, None] != labels[None, :]
    return float(np.sum(source.weights[disagree]))
