"""Tests for graphs, normalisation and the eigensolver."""

import itertools

import numpy as np
import pytest

import src.core.graph as graph_module
from src.core.config import Settings, Tolerances
from src.core.errors import DimensionMismatch, GraphTooLarge, NoConvergence, NotSymmetric, ZeroDegree
from src.core.graph import (
    SymmetricGraph,
    _round_robin_schedule,
    compute_rho,
    degrees,
    eigh,
    normalize,
    validate_graph,
)

PATH3 = np.array([[0.0, 1.0, 0.0],
                  [1.0, 0.0, 1.0],
                  [0.0, 1.0, 0.0]])


def test_validate_graph_reports_without_raising():
    w = np.array([[0.1, 0.2], [0.25, -0.05]])
    report = validate_graph(SymmetricGraph(weights=w, mass_normalized=True))
    assert not report.passed
    assert report.symmetry_defect == pytest.approx(0.05)
    assert report.negativity_defect == pytest.approx(0.05)
    assert report.mass_defect == pytest.approx(0.5)
    assert len(report.problems) == 3


def test_validate_graph_passes_generated_world(world):
    report = validate_graph(world.aug_graph)
    assert report.passed, report.problems
    assert report.mass_defect < 1e-12


def test_degrees_and_zero_degree():
    np.testing.assert_allclose(degrees(SymmetricGraph(weights=PATH3)).values, [1.0, 2.0, 1.0])
    isolated = np.zeros((3, 3))
    isolated[0, 1] = isolated[1, 0] = 1.0
    with pytest.raises(ZeroDegree):
        degrees(SymmetricGraph(weights=isolated))


def test_normalize_path_graph():
    ng = normalize(SymmetricGraph(weights=PATH3))
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(ng.matrix, [[0, s, 0], [s, 0, s], [0, s, 0]], atol=1e-15)
    spectrum = eigh(ng.matrix)
    np.testing.assert_allclose(spectrum.values, [1.0, 0.0, -1.0], atol=1e-12)
    top = np.sqrt(ng.source_degrees.values)
    np.testing.assert_allclose(spectrum.vectors[:, 0], top / np.linalg.norm(top), atol=1e-12)


def test_normalized_spectrum_lies_in_unit_interval(world):
    values = eigh(normalize(world.aug_graph).matrix).values
    assert values[0] == pytest.approx(1.0, abs=1e-9)
    assert values.min() >= -1e-9
    assert values.max() <= 1.0 + 1e-9


def test_compute_rho():
    assert compute_rho(degrees(SymmetricGraph(weights=PATH3))) == pytest.approx(2.0)
    assert compute_rho(degrees(SymmetricGraph(weights=np.ones((3, 3))))) == 1.0


@pytest.mark.parametrize("n", [2, 5, 8])
def test_round_robin_schedule_covers_each_pair_once(n):
    seen = []
    for p, q in _round_robin_schedule(n):
        members = np.concatenate([p, q])
        assert len(set(members.tolist())) == members.size
        seen.extend(zip(p.tolist(), q.tolist()))
    assert sorted(seen) == list(itertools.combinations(range(n), 2))


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
@pytest.mark.parametrize("n", [1, 3, 6, 11])
def test_eigh_contract(method, n, random_symmetric):
    m = random_symmetric(n)
    spectrum = eigh(m, method=method)

    np.testing.assert_allclose(spectrum.values, np.sort(np.linalg.eigvalsh(m))[::-1], atol=1e-10)
    assert np.all(np.diff(spectrum.values) <= 0)
    np.testing.assert_allclose(spectrum.vectors.T @ spectrum.vectors, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(spectrum.reconstruct(), m, atol=1e-10)
    for column in spectrum.vectors.T:
        lead = np.flatnonzero(np.abs(column) > 1e-12)[0]
        assert column[lead] > 0


def test_jacobi_and_lapack_agree(random_symmetric):
    m = random_symmetric(9)
    a, b = eigh(m, method="jacobi"), eigh(m, method="lapack")
    np.testing.assert_allclose(a.values, b.values, atol=1e-10)
    np.testing.assert_allclose(a.vectors, b.vectors, atol=1e-8)


def test_eigh_repeated_eigenvalues():
    spectrum = eigh(np.eye(4) * 0.5, method="jacobi")
    np.testing.assert_allclose(spectrum.values, [0.5] * 4)
    np.testing.assert_allclose(spectrum.vectors, np.eye(4))


def test_eigh_rejects_bad_input():
    with pytest.raises(NotSymmetric):
        eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        eigh(np.ones((2, 3)))
    assert eigh(np.zeros((0, 0))).n == 0


def test_eigh_tolerates_rounding_asymmetry():
    m = np.array([[2.0, 1.0], [1.0 + 1e-13, 2.0]])
    np.testing.assert_allclose(eigh(m).values, [3.0, 1.0], atol=1e-12)


def test_jacobi_rotation_cap(random_symmetric):
    settings = Settings(eigen_method="jacobi", tolerances=Tolerances(eigh_rotation_factor=1))
    with pytest.raises(NoConvergence):
        eigh(random_symmetric(8), settings=settings)


def test_vertex_cap(monkeypatch):
    capped = Settings(tolerances=Tolerances(max_vertices=3))
    monkeypatch.setattr(graph_module, "get_settings", lambda: capped)
    assert SymmetricGraph(weights=PATH3).n == 3
    with pytest.raises(GraphTooLarge):
        SymmetricGraph(weights=np.ones((4, 4)))


@pytest.mark.slow
def test_jacobi_battery():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(1, 51))
        a = rng.normal(size=(n, n))
        m = 0.5 * (a + a.T)
        spectrum = eigh(m, method="jacobi")

        assert np.all(np.diff(spectrum.values) <= 0)
        np.testing.assert_allclose(spectrum.values, np.sort(np.linalg.eigvalsh(m))[::-1], atol=1e-9)
        np.testing.assert_allclose(spectrum.vectors.T @ spectrum.vectors, np.eye(n), atol=1e-9)
        np.testing.assert_allclose(spectrum.reconstruct(), m, atol=1e-9)
        for column in spectrum.vectors.T:
            assert column[np.flatnonzero(np.abs(column) > 1e-12)[0]] > 0
