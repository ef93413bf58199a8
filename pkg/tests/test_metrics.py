import numpy as np
import pytest

from irfad.errors import ParameterError, UndefinedMetricError
from irfad.metrics import (
    EvalReport,
    aupro,
    auroc,
    average_precision,
    f1_max,
    throughput,
)
from irfad.net import EvalCounter
from irfad.rng import make_rng

from oracles import ap_exhaustive, aupro_exhaustive, auroc_pairs, f1_exhaustive


def random_instance(rng, n_max=200, with_ties=True):
    n = int(rng.integers(4, n_max + 1))
    labels = rng.integers(0, 2, size=n)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    if with_ties and rng.random() < 0.5:
        scores = rng.integers(0, 8, size=n).astype(float)  # heavy ties
    else:
        scores = rng.standard_normal(n)
    return scores, labels


# -- auroc ---------------------------------------------------------------------


def test_auroc_perfect_separation():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.9, 0.8, 0.1, 0.2], [0, 0, 1, 1]) == 0.0


def test_auroc_chance_level():
    rng = make_rng(0, "test-auroc-chance")
    scores = rng.standard_normal(20_000)
    labels = rng.integers(0, 2, size=20_000)
    assert abs(auroc(scores, labels) - 0.5) < 0.02


def test_auroc_spec_instance_matches_pair_oracle():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [0, 0, 1, 1]
    assert auroc(scores, labels) == auroc_pairs(scores, labels)


def test_auroc_oracle_sweep():
    rng = make_rng(1, "test-auroc-sweep")
    for _ in range(60):
        scores, labels = random_instance(rng)
        assert auroc(scores, labels) == auroc_pairs(scores, labels)


def test_auroc_single_class_undefined():
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [0, 0])


def test_auroc_complement_for_tie_free_scores():
    rng = make_rng(2, "test-auroc-comp")
    scores = rng.standard_normal(101)
    labels = rng.integers(0, 2, size=101)
    labels[:2] = [0, 1]
    assert auroc(scores, labels) + auroc(-scores, labels) == 1.0


# -- average precision ---------------------------------------------------------


def test_ap_perfect_ranking():
    assert average_precision([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0


def test_ap_single_positive_ranked_last():
    n = 10
    scores = np.arange(n, dtype=float)
    labels = np.zeros(n, dtype=int)
    labels[0] = 1  # lowest score is the only positive
    assert average_precision(scores, labels) == 1.0 / n


def test_ap_oracle_sweep():
    rng = make_rng(3, "test-ap-sweep")
    for _ in range(60):
        scores, labels = random_instance(rng)
        assert average_precision(scores, labels) == ap_exhaustive(scores, labels)


def test_ap_no_positives_undefined():
    with pytest.raises(UndefinedMetricError):
        average_precision([0.4, 0.2], [0, 0])


# -- f1 max ---------------------------------------------------------------------


def test_f1_perfect_separation():
    assert f1_max([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0


def test_f1_lower_bounded_by_all_positive_threshold():
    rng = make_rng(4, "test-f1-bound")
    scores, labels = random_instance(rng)
    p = int(labels.sum())
    n = int(labels.size - p)
    assert f1_max(scores, labels) >= 2 * p / (p + n + p)


def test_f1_oracle_sweep():
    rng = make_rng(5, "test-f1-sweep")
    for _ in range(60):
        scores, labels = random_instance(rng)
        assert f1_max(scores, labels) == f1_exhaustive(scores, labels)


def test_f1_no_positives_undefined():
    with pytest.raises(UndefinedMetricError):
        f1_max([0.4, 0.2], [0, 0])


# -- invariance properties -------------------------------------------------------


def test_ranking_metrics_invariant_under_monotone_transforms():
    rng = make_rng(6, "test-invar")
    for _ in range(10):
        scores, labels = random_instance(rng, n_max=80)
        for transform in (np.exp, lambda s: 3.0 * s + 7.0):
            ts = transform(scores)
            assert auroc(ts, labels) == auroc(scores, labels)
            assert average_precision(ts, labels) == average_precision(scores, labels)
            assert f1_max(ts, labels) == f1_max(scores, labels)


# -- aupro ------------------------------------------------------------------------


def random_map_instance(rng, n_imgs=3, size=8):
    masks = (rng.random((n_imgs, size, size)) < 0.18).astype(np.uint8)
    if masks.sum() == 0:
        masks[0, 0, 0] = 1
    if rng.random() < 0.5:
        maps = rng.integers(0, 6, size=(n_imgs, size, size)).astype(float)
    else:
        maps = rng.standard_normal((n_imgs, size, size))
    return maps, masks


def test_aupro_perfect_detector():
    rng = make_rng(7, "test-aupro-perf")
    masks = (rng.random((2, 6, 6)) < 0.2).astype(np.uint8)
    masks[0, 0, 0] = 1
    assert aupro(masks.astype(float), masks, 0.3) == 1.0
    assert aupro(masks.astype(float), masks, 1.0) == 1.0


def test_aupro_chance_detector_near_half_limit():
    # an independent detector has PRO(fpr) ~ fpr, so the normalized area ~ limit/2
    rng = make_rng(8, "test-aupro-chance")
    masks = (rng.random((6, 16, 16)) < 0.15).astype(np.uint8)
    masks[0, 0, 0] = 1
    values = {1.0: [], 0.3: []}
    for _ in range(20):
        maps = rng.standard_normal(masks.shape)
        for limit in values:
            values[limit].append(aupro(maps, masks, limit))
    assert abs(np.mean(values[1.0]) - 0.5) < 0.05
    assert abs(np.mean(values[0.3]) - 0.15) < 0.05


def test_aupro_hand_enumerated_single_pixel_region():
    # one 1-pixel region on a 3x3 map, thresholds sweep the distinct values
    maps = np.array([[[0.9, 0.1, 0.2], [0.3, 0.8, 0.4], [0.5, 0.6, 0.7]]])
    masks = np.zeros((1, 3, 3), dtype=np.uint8)
    masks[0, 1, 1] = 1
    # curve points (theta desc): fpr = [1/8, 1/8, 2/8, ...], pro jumps to 1 at 0.8
    # theta=0.9: fp=1, pro=0; theta=0.8: fp=1, pro=1; then pro stays 1
    assert aupro(maps, masks, 1.0) == aupro_exhaustive(maps, masks, 1.0)
    got = aupro(maps, masks, 1.0)
    # hand integration: area = 0.125*0 + 0*0.5 + 0.875*1.0 = 0.875
    assert got == pytest.approx(0.875, abs=1e-12)


def test_aupro_oracle_sweep():
    rng = make_rng(9, "test-aupro-sweep")
    for _ in range(25):
        maps, masks = random_map_instance(rng)
        for limit in (0.3, 1.0):
            assert aupro(maps, masks, limit) == aupro_exhaustive(maps, masks, limit)


def test_aupro_monotone_in_fpr_limit():
    rng = make_rng(10, "test-aupro-mono")
    for _ in range(5):
        maps, masks = random_map_instance(rng)
        vals = [aupro(maps, masks, lim) for lim in (0.1, 0.3, 1.0)]
        assert vals[0] <= vals[1] + 1e-12
        assert vals[1] <= vals[2] + 1e-12


def test_aupro_no_regions_undefined():
    with pytest.raises(UndefinedMetricError):
        aupro(np.zeros((1, 4, 4)), np.zeros((1, 4, 4), dtype=np.uint8))


def test_aupro_bad_limit():
    masks = np.zeros((1, 4, 4), dtype=np.uint8)
    masks[0, 0, 0] = 1
    with pytest.raises(ParameterError):
        aupro(np.zeros((1, 4, 4)), masks, 0.0)


# -- report and throughput ---------------------------------------------------------


def test_eval_report_mad_averages_present_metrics():
    report = EvalReport(image_auroc=0.9, image_ap=0.8, image_f1=0.7)
    assert report.mad == pytest.approx((0.9 + 0.8 + 0.7) / 3)
    full = EvalReport(
        image_auroc=1.0,
        image_ap=1.0,
        image_f1=1.0,
        pixel_auroc=0.5,
        pixel_ap=0.5,
        pixel_f1=0.5,
        pixel_aupro=0.5,
    )
    assert full.mad == pytest.approx((3 * 1.0 + 4 * 0.5) / 7)


def test_throughput_counts_and_timing():
    calls = []

    def scorer(samples, counter: EvalCounter):
        calls.append(len(samples))
        counter.add(2 * len(samples))

    samples = np.zeros((40, 2))
    rate, nfe = throughput(scorer, samples, repeats=3)
    assert nfe == 80
    assert rate > 0
    assert len(calls) == 4  # warm-up + repeats


def test_throughput_empty_dataset_rejected():
    with pytest.raises(ParameterError):
        throughput(lambda s, c: None, np.zeros((0, 2)))
