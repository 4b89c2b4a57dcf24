import math

import numpy as np
import pytest

import noisyei as ne


def test_normal_functions():
    assert ne.normal_cdf(0.0) == 0.5
    assert ne.inv_normal_cdf(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    with pytest.raises(ValueError):
        ne.inv_normal_cdf(0.0)


def test_sobol_points_are_stratified():
    pts = ne.SobolGenerator(3, 7).draw(64)
    assert pts.shape == (64, 3)
    for d in range(3):
        counts = np.bincount(np.floor(pts[:, d] * 64).astype(int), minlength=64)
        assert (counts == 1).all()


def test_gp_interpolates_exact_data():
    x = np.array([[0.1], [0.5], [0.9]])
    y = np.array([1.0, -1.0, 0.5])
    model = ne.GPModel(ne.KernelParams(np.array([0.3])), ne.NoisyDataset(x, y, np.zeros(3)))
    mean, cov = model.posterior(x)
    np.testing.assert_allclose(mean, y, atol=1e-8)
    assert np.abs(np.diag(cov)).max() < 1e-8


def test_fit_and_acquisition():
    rng = np.random.default_rng(0)
    x = rng.random((8, 2))
    y = np.sin(3 * x.sum(axis=1))
    data = ne.NoisyDataset(x, y, np.full(8, 0.1))
    params = ne.fit_map(data, ne.Bounds.unit_cube(2))
    assert params.lengthscales.shape == (2,)
    model = ne.GPModel(params, data)
    values = ne.nei_at(model, [], np.zeros((0, 2)), rng.random((5, 2)), samples=16, seed=1)
    assert values.shape == (5,)
    assert (values >= 0).all()

    opts = ne.BatchOptions()
    opts.bounds = ne.Bounds.unit_cube(2)
    opts.q = 2
    opts.samples = 8
    opts.restarts = 3
    batch = ne.generate_batch(model, [], np.zeros((0, 2)), opts)
    assert batch.shape == (2, 2)
    assert np.linalg.norm(batch[0] - batch[1]) > 1e-6


def test_closed_forms():
    assert ne.ei_analytic(0.0, 1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert ne.eix(2.0, 0.5, [(0.0, 1.0)], None, 10.0) == pytest.approx(4.0)


def test_problems():
    assert ne.problem_names() == ["gramacy", "hartmann6", "branin", "gardner"]
    info = ne.problem_info("branin")
    f, c = ne.evaluate_true("branin", info["optimum_x"])
    assert f == pytest.approx(0.397887, abs=1e-6)
    assert (c <= 0).all()
    with pytest.raises(ValueError):
        ne.problem_info("nope")


def test_study_round_trip(tmp_path):
    study = ne.Study([("a", 0.0, 1.0, False), ("b", -2.0, 2.0, False)], num_constraints=1, seed=3)
    xs = study.suggest(4)
    assert len(xs) == 4 and study.pending == 4
    for x in xs:
        study.tell(x, (float(x[0] + x[1]), 0.1), [(float(x[0] - 0.5), 0.1)])
    assert study.completed == 4 and study.pending == 0
    best = study.best()
    assert 0 <= best["trial"] < 4
    path = str(tmp_path / "s.json")
    study.save(path)
    again = ne.Study.load(path)
    assert again.to_json() == study.to_json()
    np.testing.assert_array_equal(np.array(again.suggest(2)), np.array(study.suggest(2)))


def test_benchmarks_are_deterministic():
    a = ne.run_qmc_study_csv(sample_sizes=[4, 8], replicates=2, optimize=False)
    b = ne.run_qmc_study_csv(sample_sizes=[4, 8], replicates=2, optimize=False)
    assert a == b
    assert a.splitlines()[0] == "problem,method,samples,replicate,relative_error,optimizer_distance"
    assert len(a.splitlines()) == 1 + 2 * 2 * 2
