"""Shared fixtures: the reference toy and blob runs, trained once per session."""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from irfad import (
    BlobParams,
    EvalCounter,
    NoisePredictor,
    TrainConfig,
    evaluate_scorer,
    gen_blobs,
    gen_toy,
    linear_schedule,
    train,
)
from irfad.pipeline import IRF_MEAN, Scorer

# Acceptance criteria log: (criterion, passed, detail), printed after the run.
ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LOG:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")


@pytest.fixture(scope="session")
def toy_run():
    """Reference 1-D run: default schedule/net/training, seed 0."""
    schedule = linear_schedule()
    train_ds, test_ds = gen_toy(0)
    net = NoisePredictor.create(1, (128, 128, 128), 64, schedule, seed=0)
    tic = time.perf_counter()
    net, log = train(net, train_ds, schedule, TrainConfig(seed=0))
    counter = EvalCounter()
    mean_scorer = Scorer(IRF_MEAN, net, schedule, t_infer=250, batch_size=256)
    mean_table = mean_scorer(test_ds.samples, counter)
    seconds = time.perf_counter() - tic
    return SimpleNamespace(
        schedule=schedule,
        train=train_ds,
        test=test_ds,
        net=net,
        log=log,
        t_infer=250,
        mean_scorer=mean_scorer,
        mean_table=mean_table,
        mean_counter=counter,
        seconds=seconds,
    )


@pytest.fixture(scope="session")
def blob_run():
    """Reference feature-map run: default blob generator, wider net, seed 0."""
    schedule = linear_schedule()
    train_ds, test_ds = gen_blobs(512, 128, seed=0)
    d = int(np.prod(train_ds.sample_shape))
    net = NoisePredictor.create(d, (256, 256, 256), 64, schedule, seed=0)
    net, log = train(
        net, train_ds, schedule, TrainConfig(epochs=200, batch_size=64, seed=0)
    )
    scorer = Scorer(IRF_MEAN, net, schedule, t_infer=500, batch_size=256)
    report, table = evaluate_scorer(scorer, test_ds, upsample_to=(32, 32))
    return SimpleNamespace(
        schedule=schedule,
        train=train_ds,
        test=test_ds,
        net=net,
        log=log,
        t_infer=500,
        scorer=scorer,
        report=report,
        table=table,
    )
