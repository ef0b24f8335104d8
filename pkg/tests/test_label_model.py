"""Tests for posteriors, label noise and label-similarity graphs."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import (
    AsymmetricNoise,
    DimensionMismatch,
    InvalidClassCount,
    NoiseRateOutOfRange,
    NotClassBalanced,
)
from src.core.graph import eigh, normalize
from src.models.label_model import (
    PosteriorMatrix,
    SemiSupervisedLayout,
    apply_noise,
    class_counts,
    label_graph,
    labeled_degrees,
    lemma41_closed_form,
    make_noise_model,
    make_transition_noise_model,
    normalize_label_block,
    noise_rate_from_alpha,
    noisy_label_graph,
    one_hot,
    semi_block_graph,
)


def test_tiny_noise_constants(tiny_noise):
    assert tiny_noise.alpha == pytest.approx(0.25)
    assert tiny_noise.beta == pytest.approx(0.375)
    np.testing.assert_allclose(tiny_noise.T, [[0.75, 0.25], [0.25, 0.75]])


@pytest.mark.parametrize("r", [2, 3, 5, 10])
@pytest.mark.parametrize("fraction", [0.0, 0.3, 0.9])
def test_noise_model_is_stochastic_and_consistent(r, fraction):
    gamma = fraction * (r - 1) / r
    nm = make_noise_model(r, gamma)
    np.testing.assert_allclose(nm.T.sum(axis=1), 1.0, atol=1e-12)
    # alpha / beta describe T^2 = alpha I + beta 11^T
    np.testing.assert_allclose(nm.T @ nm.T, nm.alpha * np.eye(r) + nm.beta * np.ones((r, r)), atol=1e-12)


def test_noiseless_model():
    nm = make_noise_model(3, 0.0)
    assert nm.alpha == 1.0
    assert nm.beta == 0.0
    np.testing.assert_array_equal(nm.T, np.eye(3))


@pytest.mark.parametrize("r", [2, 3, 4, 5, 6])
def test_alpha_falls_and_beta_rises_with_noise(r):
    gammas = np.linspace(0.0, (r - 1) / r, 60, endpoint=False)
    models = [make_noise_model(r, g) for g in gammas]
    alphas = np.array([nm.alpha for nm in models])
    betas = np.array([nm.beta for nm in models])

    assert np.all(np.diff(alphas) < 0)
    assert np.all(np.diff(betas) > 0)
    np.testing.assert_allclose(alphas + r * betas, 1.0, atol=1e-12)
    np.testing.assert_allclose([noise_rate_from_alpha(r, a) for a in alphas], gammas, atol=1e-12)


def test_noise_rate_from_alpha_errors():
    with pytest.raises(NoiseRateOutOfRange):
        noise_rate_from_alpha(2, 0.0)
    with pytest.raises(InvalidClassCount):
        noise_rate_from_alpha(1, 0.5)


def test_noise_model_errors():
    with pytest.raises(NoiseRateOutOfRange):
        make_noise_model(2, 0.5)
    with pytest.raises(NoiseRateOutOfRange):
        make_noise_model(3, -0.1)
    with pytest.raises(InvalidClassCount):
        make_noise_model(1, 0.0)


def test_posterior_validation():
    with pytest.raises(ValidationError):
        PosteriorMatrix(eta=[[0.6, 0.6], [0.5, 0.5]])
    with pytest.raises(ValidationError):
        PosteriorMatrix(eta=[[1.0, 0.0], [1.0, 0.0]], class_balanced=True)
    assert class_counts(one_hot([0, 1, 1], 2)).tolist() == [1.0, 2.0]


def test_one_hot_softness():
    y = one_hot([0, 1], 2, softness=0.2)
    np.testing.assert_allclose(y.eta, [[0.9, 0.1], [0.1, 0.9]])
    with pytest.raises(DimensionMismatch):
        one_hot([0, 2], 2)


def test_apply_noise(tiny_y, tiny_noise):
    noisy = apply_noise(tiny_y, tiny_noise)
    np.testing.assert_allclose(noisy.eta[0], [0.75, 0.25])
    assert noisy.class_balanced
    with pytest.raises(DimensionMismatch):
        apply_noise(tiny_y, make_noise_model(3, 0.1))


def test_label_graphs(tiny_y, tiny_noise):
    np.testing.assert_allclose(label_graph(tiny_y).weights, np.kron(np.eye(2), np.ones((2, 2))))
    expected = tiny_y.eta @ tiny_noise.T @ tiny_noise.T @ tiny_y.eta.T
    np.testing.assert_allclose(noisy_label_graph(tiny_y, tiny_noise).weights, expected, atol=1e-15)
    assert noisy_label_graph(tiny_y, tiny_noise).weights[0, 0] == pytest.approx(0.625)
    assert noisy_label_graph(tiny_y, tiny_noise).weights[0, 3] == pytest.approx(0.375)


def test_labeled_degrees_match_row_sums(tiny_y, tiny_noise):
    np.testing.assert_allclose(labeled_degrees(tiny_y, tiny_noise), [2.0] * 4)
    np.testing.assert_allclose(labeled_degrees(tiny_y, tiny_noise),
                               noisy_label_graph(tiny_y, tiny_noise).weights.sum(axis=1), atol=1e-14)


def test_semi_block_graph_layout(tiny_y, tiny_noise, tiny_layout):
    g = semi_block_graph(tiny_y, tiny_noise, tiny_layout)
    assert g.n == 6
    np.testing.assert_array_equal(g.weights[4:, 4:], np.eye(2))
    assert np.all(g.weights[:4, 4:] == 0)
    with pytest.raises(DimensionMismatch):
        semi_block_graph(tiny_y, tiny_noise, SemiSupervisedLayout(n_L=3, n_U=2))


def test_closed_form_values(tiny_y, tiny_noise, tiny_layout):
    a_star = lemma41_closed_form(tiny_y, tiny_noise, tiny_layout)
    block = a_star.matrix[:4, :4]
    assert block[0, 1] == pytest.approx(0.3125)
    assert block[0, 2] == pytest.approx(0.1875)
    np.testing.assert_allclose(a_star.matrix[4:, 4:], np.eye(2))
    np.testing.assert_allclose(eigh(a_star.matrix).values, [1, 1, 1, 0.25, 0, 0], atol=1e-12)


def test_closed_form_matches_direct_normalisation(tiny_y, tiny_noise, tiny_layout):
    direct = normalize_label_block(semi_block_graph(tiny_y, tiny_noise, tiny_layout), tiny_y, tiny_noise)
    closed = lemma41_closed_form(tiny_y, tiny_noise, tiny_layout)
    np.testing.assert_allclose(closed.matrix, direct.matrix, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_closed_form_matches_direct_on_soft_balanced_posteriors(seed):
    rng = np.random.default_rng(seed)
    r = 3
    weights = rng.dirichlet(np.ones(4))
    perms = [np.eye(r)[rng.permutation(r)] for _ in range(4)]
    base = sum(w * p for w, p in zip(weights, perms))
    y = PosteriorMatrix(eta=np.vstack([base, base]), class_balanced=True)
    nm = make_noise_model(r, rng.uniform(0, 0.6))
    layout = SemiSupervisedLayout(n_L=6, n_U=2)

    direct = normalize_label_block(semi_block_graph(y, nm, layout), y, nm)
    closed = lemma41_closed_form(y, nm, layout)
    np.testing.assert_allclose(closed.matrix, direct.matrix, atol=1e-12)
    np.testing.assert_allclose(normalize(noisy_label_graph(y, nm)).matrix, closed.matrix[:6, :6], atol=1e-12)


def test_closed_form_without_labels(tiny_noise):
    y = PosteriorMatrix(eta=np.zeros((0, 2)))
    result = lemma41_closed_form(y, tiny_noise, SemiSupervisedLayout(n_L=0, n_U=3))
    np.testing.assert_array_equal(result.matrix, np.eye(3))


def test_closed_form_errors(tiny_noise):
    unbalanced = one_hot([0, 0, 0, 1], 2)
    with pytest.raises(NotClassBalanced):
        lemma41_closed_form(unbalanced, tiny_noise, SemiSupervisedLayout(n_L=4, n_U=0))

    generic = make_transition_noise_model([[0.9, 0.1], [0.3, 0.7]])
    assert not generic.is_symmetric_noise
    with pytest.raises(AsymmetricNoise):
        lemma41_closed_form(one_hot([0, 1], 2), generic, SemiSupervisedLayout(n_L=2, n_U=0))


def test_transition_noise_model():
    symmetric = make_transition_noise_model([[0.8, 0.2], [0.2, 0.8]])
    assert symmetric.gamma == pytest.approx(0.2)
    assert symmetric.alpha == pytest.approx(0.36)

    generic = make_transition_noise_model([[0.9, 0.1], [0.3, 0.7]])
    y = one_hot([0, 1], 2)
    np.testing.assert_allclose(apply_noise(y, generic).eta, [[0.9, 0.1], [0.3, 0.7]])
    np.testing.assert_allclose(labeled_degrees(y, generic),
                               noisy_label_graph(y, generic).weights.sum(axis=1), atol=1e-14)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_closed_form_battery(seed):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(2, 11))
    copies = int(rng.integers(1, 200 // r + 1))
    weights = rng.dirichlet(np.ones(r + 1))
    base = sum(w * np.eye(r)[rng.permutation(r)] for w in weights)
    y = PosteriorMatrix(eta=np.vstack([base] * copies), class_balanced=True)
    layout = SemiSupervisedLayout(n_L=y.n_L, n_U=int(rng.integers(0, 5)))
    for fraction in np.linspace(0.0, 0.9, 7):
        nm = make_noise_model(r, fraction * (r - 1) / r)
        direct = normalize_label_block(semi_block_graph(y, nm, layout), y, nm)
        closed = lemma41_closed_form(y, nm, layout)
        assert np.linalg.norm(closed.matrix - direct.matrix) <= 1e-10
