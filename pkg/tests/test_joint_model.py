"""Tests for graph mixing, the joint loss and joint training."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import DimensionMismatch, ThetaOutOfRange
from src.core.graph import DegreeVector, NormalizedGraph, frobenius_sq, normalize
from src.models.joint_model import (
    MixedGraphSpec,
    build_mixed_graph,
    c0_constant,
    joint_mf_gradient,
    joint_mf_loss,
    mix_graphs,
    train_joint,
)
from src.models.label_model import lemma41_closed_form, make_noise_model
from src.models.spectral_engine import FactorMatrix, TrainConfig, matrix_factorization_loss, top_k_factor


@pytest.fixture
def pair(world):
    a0 = normalize(world.aug_graph)
    a_star = lemma41_closed_form(world.posteriors, make_noise_model(2, 0.2), world.layout)
    return a0, a_star


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.5, 0.9, 1.0])
def test_joint_loss_is_mixed_loss_plus_constant(pair, theta):
    a0, a_star = pair
    mixed = mix_graphs(a0, a_star, theta)
    for seed in range(3):
        F = np.random.default_rng(seed).normal(scale=0.3, size=(a0.n, 3))
        fm = FactorMatrix(F=F, degrees=a0.source_degrees)
        assert joint_mf_loss(fm, a0, a_star, theta) == pytest.approx(
            matrix_factorization_loss(fm, mixed) + c0_constant(a0, a_star, theta), rel=1e-10, abs=1e-12
        )


@pytest.mark.parametrize("theta", [0.0, 0.25, 0.5, 1.0])
def test_c0_variance_form(pair, theta):
    a0, a_star = pair
    c0 = c0_constant(a0, a_star, theta)
    assert c0 >= 0.0
    assert c0 == pytest.approx(theta * (1 - theta) * frobenius_sq(a0.matrix - a_star.matrix), abs=1e-12)


def test_mix_endpoints_are_exact_copies(pair):
    a0, a_star = pair
    np.testing.assert_array_equal(mix_graphs(a0, a_star, 0.0).matrix, a0.matrix)
    np.testing.assert_array_equal(mix_graphs(a0, a_star, 1.0).matrix, a_star.matrix)
    assert mix_graphs(a0, a_star, 1.0).source_degrees is a0.source_degrees


def test_mix_errors(pair):
    a0, a_star = pair
    with pytest.raises(ThetaOutOfRange):
        mix_graphs(a0, a_star, 1.5)
    with pytest.raises(ThetaOutOfRange):
        c0_constant(a0, a_star, -0.1)
    small = NormalizedGraph(matrix=np.eye(3), source_degrees=DegreeVector(values=np.ones(3)))
    with pytest.raises(DimensionMismatch):
        mix_graphs(a0, small, 0.5)


def test_joint_gradient_matches_finite_differences(pair):
    a0, a_star = pair
    F = np.random.default_rng(1).normal(scale=0.3, size=(a0.n, 2))
    fm = FactorMatrix(F=F, degrees=a0.source_degrees)
    grad = joint_mf_gradient(fm, a0, a_star, 0.4)
    eps = 1e-6
    for i, j in [(0, 0), (3, 1), (7, 0)]:
        bump = np.zeros_like(F)
        bump[i, j] = eps
        up = joint_mf_loss(FactorMatrix(F=F + bump, degrees=a0.source_degrees), a0, a_star, 0.4)
        down = joint_mf_loss(FactorMatrix(F=F - bump, degrees=a0.source_degrees), a0, a_star, 0.4)
        assert grad[i, j] == pytest.approx((up - down) / (2 * eps), rel=1e-5, abs=1e-8)


def test_train_joint_matches_mixed_graph_optimum(pair):
    a0, a_star = pair
    theta = 0.6
    fm = train_joint(a0, a_star, theta, 2, TrainConfig(step_size=0.1, seed=2))
    mixed = mix_graphs(a0, a_star, theta)
    best = matrix_factorization_loss(top_k_factor(mixed, 2), mixed) + c0_constant(a0, a_star, theta)
    assert fm.record.loss == pytest.approx(best, abs=1e-7)


def test_build_mixed_graph(world):
    spec = MixedGraphSpec(theta=0.0, gamma=0.1, n_L=world.layout.n_L, n_U=world.layout.n_U)
    mixed, source = build_mixed_graph(world, spec)
    np.testing.assert_allclose(source.weights, world.aug_graph.weights, atol=1e-15)
    assert source.total_mass == pytest.approx(1.0)
    assert mixed.n == world.n

    with pytest.raises(DimensionMismatch):
        build_mixed_graph(world, MixedGraphSpec(theta=0.5, n_L=world.layout.n_L + 1, n_U=world.layout.n_U))


def test_mixed_graph_spec_validation():
    with pytest.raises(ValidationError):
        MixedGraphSpec(theta=1.2)
    with pytest.raises(ValidationError):
        MixedGraphSpec(theta=0.5, gamma=0.5, r=2)
