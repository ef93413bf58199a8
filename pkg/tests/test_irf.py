import numpy as np
import pytest

from irfad.errors import ParameterError, ShapeError
from irfad.irf import MEAN_PATH, NOISY_STATE, irf_mean, irf_noisy
from irfad.net import EvalCounter, NoisePredictor
from irfad.rng import make_rng
from irfad.schedule import linear_schedule, mean_path


@pytest.fixture
def setup():
    schedule = linear_schedule(200)
    net = NoisePredictor.create(3, (16, 16), 8, schedule, seed=1)
    rng = make_rng(5, "test-irf")
    net.params = [rng.standard_normal(p.shape) * 0.2 for p in net.params]
    return schedule, net


def test_zero_eps_coincides_with_mean_path(setup):
    schedule, net = setup
    rng = make_rng(6, "test-irf-x")
    for t in (1, 100, 200):
        x0 = rng.standard_normal(3)
        noisy = irf_noisy(net, schedule, x0, t, np.zeros(3))
        mean = irf_mean(net, schedule, x0, t)
        assert np.array_equal(noisy.delta, mean.delta)
        assert noisy.input_kind == NOISY_STATE
        assert mean.input_kind == MEAN_PATH


def test_single_network_evaluation(setup):
    schedule, net = setup
    x0 = np.ones(3)
    assert irf_mean(net, schedule, x0, 10).nfe == 1
    assert irf_noisy(net, schedule, x0, 10, np.ones(3)).nfe == 1


def test_external_counter_accumulates(setup):
    schedule, net = setup
    counter = EvalCounter()
    for i in range(4):
        irf_mean(net, schedule, np.full(3, float(i)), 7, counter)
    assert counter.count == 4


def test_mean_path_deterministic(setup):
    schedule, net = setup
    x0 = make_rng(7, "test-irf-det").standard_normal(3)
    a = irf_mean(net, schedule, x0, 50)
    b = irf_mean(net, schedule, x0, 50)
    assert np.array_equal(a.delta, b.delta)


def test_field_shape_preserved(setup):
    schedule, net = setup
    x0 = make_rng(8, "test-irf-shape").standard_normal((3, 1, 1))
    res = irf_mean(net, schedule, x0, 20)
    assert res.delta.shape == (3, 1, 1)


def test_errors_propagate(setup):
    schedule, net = setup
    with pytest.raises(ParameterError):
        irf_mean(net, schedule, np.ones(3), 0)
    with pytest.raises(ParameterError):
        irf_mean(net, schedule, np.ones(3), 201)
    with pytest.raises(ShapeError):
        irf_noisy(net, schedule, np.ones(3), 5, np.ones(4))
    with pytest.raises(ShapeError):
        irf_mean(net, schedule, np.ones(5), 5)


def test_delta_matches_predict_on_mean_path(setup):
    schedule, net = setup
    from irfad.net import predict_noise

    x0 = make_rng(9, "test-irf-eq").standard_normal(3)
    res = irf_mean(net, schedule, x0, 33)
    assert np.array_equal(
        res.delta, predict_noise(net, mean_path(schedule, x0, 33), 33)
    )


# -- reference-run behaviour ---------------------------------------------------


def test_abnormal_deltas_dominate_normal(toy_run):
    amps = np.abs(toy_run.mean_table.deltas.reshape(-1))
    labels = toy_run.test.labels
    assert np.median(amps[labels == 1]) > np.median(amps[labels == 0])


def test_mean_path_deltas_centered_on_normal(toy_run):
    normal = toy_run.test.samples[toy_run.test.labels == 0]
    deltas = toy_run.mean_table.deltas.reshape(-1)[toy_run.test.labels == 0]
    assert deltas.shape[0] == normal.shape[0]
    assert abs(deltas.mean()) <= 0.1
