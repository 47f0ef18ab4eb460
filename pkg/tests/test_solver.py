import numpy as np
import pytest

from conftest import small_geometry
from fanct.projector import FanBeamProjector, forward_project, materialize
from fanct.scenarios import desk_geometry
from fanct.simulate import NoiseSpec, beads_phantom_spec, make_phantom, simulate_sinogram
from fanct.solver import (FistaConfig, QuadraticObjective, SolverError, fista_run, fista_solve,
                          gradient, map_reconstruct, objective_value)

C = 0.7


@pytest.fixture(scope="module")
def problem():
    geom = small_geometry(image_size=16, n_angles=12, n_detector=25)
    rng = np.random.default_rng(0)
    b = forward_project(rng.random(geom.image_shape), geom, C) + 0.1 * rng.standard_normal(geom.sinogram_shape)
    return geom, b, materialize(geom, C)


def dense_solution(a, b, lam, delta, xi=None):
    n = a.shape[1]
    rhs = lam * a.T @ b.ravel()
    if xi is not None:
        rhs += delta * xi.ravel()
    return np.linalg.solve(lam * a.T @ a + delta * np.eye(n), rhs)


def test_zero_is_fixed_point(geom16):
    obj = QuadraticObjective(geom16, 0.3, np.zeros(geom16.sinogram_shape), 2.0, 0.5)
    for k in (1, 7, 40):
        assert np.array_equal(fista_solve(obj, FistaConfig(k)), np.zeros(geom16.image_shape))


def test_unconstrained_matches_dense(problem):
    geom, b, a = problem
    lam, delta = 1.0, 5.0  # condition number about 40
    xi = np.random.default_rng(1).standard_normal(geom.image_shape)
    obj = QuadraticObjective(geom, C, b, lam, delta, xi_tilde=xi)
    x = fista_solve(obj, FistaConfig(2000))
    ref = dense_solution(a, b, lam, delta, xi)
    assert np.linalg.norm(x.ravel() - ref) <= 1e-6 * np.linalg.norm(ref)


def test_nonneg_all_negative_data_gives_zero(geom16):
    b = -forward_project(np.ones(geom16.image_shape), geom16, 0.0)
    obj = QuadraticObjective(geom16, 0.0, b, 1.0, 0.1, nonneg=True)
    x = fista_solve(obj, FistaConfig(50))
    assert np.array_equal(x, np.zeros(geom16.image_shape))
    g = gradient(obj, x)
    assert np.all(g >= 0)


def kkt_ok(obj, x, tol):
    g = gradient(obj, x)
    scale = np.max(np.abs(g))
    active = x > 0
    return (np.all(np.abs(g[active]) <= tol * scale) and np.all(g[~active] >= -tol * scale)), g


def test_nonneg_kkt(problem):
    geom, b, _ = problem
    rng = np.random.default_rng(2)
    # data from a half-negative image makes the constraint active on many pixels
    xs = rng.standard_normal(geom.image_shape)
    b2 = forward_project(xs, geom, C)
    obj = QuadraticObjective(geom, C, b2, 1.0, 1.0, nonneg=True)
    x = fista_solve(obj, FistaConfig(5000))
    assert np.all(x >= 0)
    assert 0 < np.count_nonzero(x) < x.size
    ok, _ = kkt_ok(obj, x, 1e-6)
    assert ok


def test_huge_alpha_gives_near_zero(geom16, rng):
    b = rng.random(geom16.sinogram_shape)
    norm_sq = FanBeamProjector(geom16).norm_squared(0.0)[0]
    alpha = 1e12 * norm_sq
    x = map_reconstruct(b, geom16, 0.0, alpha, nonneg=False, k_fista=50)
    atb = FanBeamProjector(geom16).back(b, 0.0)
    assert np.linalg.norm(x) <= np.linalg.norm(atb) / alpha


def test_alpha_zero_square_system():
    # 8x8 image with enough rays for a full-rank system
    geom = small_geometry(image_size=8, n_angles=16, n_detector=15)
    a = materialize(geom, 0.4)
    assert np.linalg.matrix_rank(a) == 64
    x_true = np.random.default_rng(3).random((8, 8))
    b = (a @ x_true.ravel()).reshape(geom.sinogram_shape)
    x = map_reconstruct(b, geom, 0.4, 0.0, nonneg=False, k_fista=20000)
    ref = np.linalg.lstsq(a, b.ravel(), rcond=None)[0]
    np.testing.assert_allclose(x.ravel(), ref, rtol=0, atol=1e-6 * np.abs(ref).max())


def test_map_beads_relative_error():
    geom = desk_geometry()
    spec = beads_phantom_spec()
    x_true = make_phantom(spec)
    b = simulate_sinogram(x_true, geom, 3.0, NoiseSpec(enabled=False), 2)
    x = map_reconstruct(b, geom, 3.0, alpha=1.0, nonneg=True, k_fista=500)
    rel = np.linalg.norm(x - x_true) / np.linalg.norm(x_true)
    assert rel <= 0.2


def test_objective_decreases_over_widely_separated_iterates(problem):
    geom, b, _ = problem
    for nonneg in (False, True):
        obj = QuadraticObjective(geom, C, b, 2.0, 0.3, nonneg=nonneg)
        for k in (5, 20, 50):
            f_k = objective_value(obj, fista_solve(obj, FistaConfig(k)))
            f_4k = objective_value(obj, fista_solve(obj, FistaConfig(4 * k)))
            assert f_4k <= f_k + 1e-9 * abs(f_k)


def test_warm_start_consistency(problem):
    geom, b, _ = problem
    obj = QuadraticObjective(geom, C, b, 1.0, 1.0, nonneg=True)
    cold = fista_solve(obj, FistaConfig(3000))
    warm = fista_solve(obj, FistaConfig(3000, warm_start=np.full(geom.image_shape, 5.0)))
    assert np.linalg.norm(cold - warm) <= 1e-6 * np.linalg.norm(cold)


def test_tracked_projection_is_exact(problem):
    geom, b, _ = problem
    obj = QuadraticObjective(geom, C, b, 1.0, 0.5, nonneg=True)
    x, ax = fista_run(obj, FistaConfig(30))
    np.testing.assert_allclose(ax, forward_project(x, geom, C), rtol=1e-10, atol=1e-10)


def test_no_hidden_state(problem):
    geom, b, _ = problem
    obj = QuadraticObjective(geom, C, b, 1.0, 0.5)
    proj = FanBeamProjector(geom)
    a = fista_solve(obj, FistaConfig(25), proj)
    fista_solve(QuadraticObjective(geom, -2.0, b * 3, 5.0, 0.1), FistaConfig(13), proj)
    assert np.array_equal(a, fista_solve(obj, FistaConfig(25), proj))


def test_projection_cost_per_iteration(problem):
    geom, b, _ = problem
    proj = FanBeamProjector(geom)
    obj = QuadraticObjective(geom, C, b, 1.0, 0.5)
    fista_run(obj, FistaConfig(17, step_size=1e-3), proj)
    assert proj.n_forward == 17 and proj.n_back == 17


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_bad_step_raises(problem):
    geom, b, _ = problem
    obj = QuadraticObjective(geom, C, b, 1.0, 0.5)
    with pytest.raises(SolverError):
        fista_solve(obj, FistaConfig(2000, step_size=10.0))


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(delta=-1.0), dict(c=100.0)])
def test_objective_validation(geom16, kw):
    args = dict(geom=geom16, c=0.0, b_tilde=np.zeros(geom16.sinogram_shape), lam=1.0, delta=1.0) | kw
    with pytest.raises(ValueError):
        QuadraticObjective(**args)


def test_config_validation():
    with pytest.raises(ValueError):
        FistaConfig(0)
    with pytest.raises(ValueError):
        FistaConfig(5, step_size=0.0)
    with pytest.raises(ValueError):
        map_reconstruct(np.zeros((2, 2)), small_geometry(), 0.0, alpha=-1.0)


def test_warm_start_shape_checked(geom16):
    obj = QuadraticObjective(geom16, 0.0, np.zeros(geom16.sinogram_shape), 1.0, 1.0)
    with pytest.raises(ValueError):
        fista_solve(obj, FistaConfig(3, warm_start=np.zeros((4, 4))))
