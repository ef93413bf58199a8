"""Batched scoring pipelines shared by the score, eval, and bench commands.

A Scorer wraps one scoring rule behind a uniform callable interface
`scorer(samples, counter) -> ScoreTable`, processing the dataset in fixed
batches. The residual-field scorers also retain per-sample fields so
pixel-level score maps can be produced; the multi-step baselines return
image scores only.

Scoring a pass is deterministic for a given configuration: the noisy-state
scorer re-derives its noise stream from (seed, pass label) on every call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import baselines
from .data import Dataset
from .errors import ParameterError
from .metrics import (
    EvalReport,
    aupro,
    auroc,
    average_precision,
    f1_max,
    throughput,
)
from .net import EvalCounter, NoisePredictor, time_embedding
from .rng import make_rng
from .schedule import NoiseSchedule
from .scoring import ComponentStats, ImageScore, bilinear_upsample

IRF_MEAN = "irf-mean"
IRF_NOISY = "irf-noisy"
RECON = "recon"
DDIM = "ddim"
SCORER_KINDS = (IRF_MEAN, IRF_NOISY, RECON, DDIM)


@dataclass
class ScoreTable:
    """Per-sample image scores; components only exist for IRF scorers."""

    s: np.ndarray
    s_diff: np.ndarray | None = None
    s_nll: np.ndarray | None = None
    deltas: np.ndarray | None = None  # (n, c, h, w) residual fields


def _field_shape(sample_shape: tuple[int, ...]) -> tuple[int, int, int]:
    """Samples are (c, h, w) fields; 1-D vectors degenerate to (d, 1, 1)."""
    if len(sample_shape) == 3:
        return sample_shape
    if len(sample_shape) == 1:
        return (sample_shape[0], 1, 1)
    raise ParameterError(f"unsupported sample shape {sample_shape}")


class Scorer:
    """One scoring rule over batches; callable as scorer(samples, counter)."""

    def __init__(
        self,
        kind: str,
        net: NoisePredictor,
        schedule: NoiseSchedule,
        t_infer: int,
        batch_size: int = 256,
        noise_seed: int = 0,
        recon_t_start: int = baselines.DEFAULT_RECON_T_START,
        recon_steps: int = baselines.DEFAULT_RECON_STEPS,
        ddim_steps: int = baselines.DEFAULT_DDIM_STEPS,
    ):
        if kind not in SCORER_KINDS:
            raise ParameterError(f"unknown scorer {kind!r}, expected one of {SCORER_KINDS}")
        if batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        self.kind = kind
        self.net = net
        self.schedule = schedule
        self.t_infer = int(t_infer)
        self.batch_size = int(batch_size)
        self.noise_seed = int(noise_seed)
        self.recon_t_start = int(recon_t_start)
        self.recon_steps = int(recon_steps)
        self.ddim_steps = int(ddim_steps)
        if kind in (IRF_MEAN, IRF_NOISY):
            schedule.check_step(self.t_infer)

    def __call__(self, samples: np.ndarray, counter: EvalCounter | None = None) -> ScoreTable:
        samples = np.asarray(samples, dtype=np.float64)
        n = samples.shape[0]
        cshape = _field_shape(samples.shape[1:])
        X = samples.reshape(n, -1)
        if X.shape[1] != self.net.spec.d:
            raise ParameterError(
                f"dataset dim {X.shape[1]} != checkpoint dim {self.net.spec.d}"
            )
        if self.kind in (IRF_MEAN, IRF_NOISY):
            return self._score_irf(X, cshape, counter)
        return self._score_baseline(X, counter)

    def _batches(self, n: int):
        for start in range(0, n, self.batch_size):
            yield start, min(start + self.batch_size, n)

    def _score_irf(self, X, cshape, counter) -> ScoreTable:
        c, h, w = cshape
        n = X.shape[0]
        abar = self.schedule.alpha_bar(self.t_infer)
        emb = time_embedding(np.asarray(self.t_infer), self.net.spec.m)
        rng = (
            make_rng(self.noise_seed, "score-noisy")
            if self.kind == IRF_NOISY
            else None
        )
        deltas = np.empty((n,) + tuple(cshape))
        s_diff = np.empty(n)
        s_nll = np.empty(n)
        for start, stop in self._batches(n):
            xb = X[start:stop]
            state = np.sqrt(abar) * xb
            if rng is not None:
                state = state + np.sqrt(1.0 - abar) * rng.standard_normal(xb.shape)
            feats = np.concatenate(
                [state, np.broadcast_to(emb, (xb.shape[0], emb.size))], axis=1
            )
            out = self.net.forward_features(feats)
            if counter is not None:
                counter.add(xb.shape[0])
            fields = out.reshape(-1, c, h, w)
            amap = np.sqrt(np.sum(fields * fields, axis=1))
            s_diff[start:stop] = amap.max(axis=(1, 2)) - amap.min(axis=(1, 2))
            s_nll[start:stop] = 0.5 * np.sum(out * out, axis=1)
            deltas[start:stop] = fields
        return ScoreTable(s=s_diff + s_nll, s_diff=s_diff, s_nll=s_nll, deltas=deltas)

    def _score_baseline(self, X, counter) -> ScoreTable:
        n = X.shape[0]
        scores = np.empty(n)
        rng = make_rng(self.noise_seed, "score-recon") if self.kind == RECON else None
        for start, stop in self._batches(n):
            xb = X[start:stop]
            if self.kind == RECON:
                noise = baselines.draw_recon_noise(rng, xb.shape, self.recon_steps)
                scores[start:stop] = baselines.reconstruct_batch(
                    self.net,
                    self.schedule,
                    xb,
                    self.recon_t_start,
                    self.recon_steps,
                    noise,
                    counter,
                )
            else:
                scores[start:stop] = baselines.ddim_invert_batch(
                    self.net, self.schedule, xb, self.ddim_steps, counter
                )
        return ScoreTable(s=scores)


def pixel_maps(table: ScoreTable, target: tuple[int, int]) -> np.ndarray:
    """Upsampled (n, H, W) score maps from the retained residual fields."""
    if table.deltas is None:
        raise ParameterError("pixel maps require a residual-field scorer")
    fields = table.deltas
    amaps = np.sqrt(np.sum(fields * fields, axis=1))
    return bilinear_upsample(amaps, target[0], target[1])


def normalized_scores(table: ScoreTable, calibration: ScoreTable) -> np.ndarray:
    """Optional z-scored component sum against held-out normal statistics."""
    if table.s_diff is None or calibration.s_diff is None:
        raise ParameterError("component normalization requires IRF score tables")
    stats = ComponentStats.fit(
        [
            ImageScore(s=d + n, s_diff=d, s_nll=n)
            for d, n in zip(calibration.s_diff, calibration.s_nll)
        ]
    )
    return np.array(
        [
            stats.apply(ImageScore(s=d + n, s_diff=d, s_nll=n))
            for d, n in zip(table.s_diff, table.s_nll)
        ]
    )


def evaluate_scorer(
    scorer: Scorer,
    dataset: Dataset,
    fpr_limit: float = 0.3,
    upsample_to: tuple[int, int] | None = None,
    speed_repeats: int = 0,
) -> tuple[EvalReport, ScoreTable]:
    """Score a dataset and assemble the metric report.

    Pixel-level metrics are computed when the dataset carries masks and the
    scorer retains residual fields. speed_repeats > 0 additionally times
    throughput (median of that many passes after one warm-up).
    """
    counter = EvalCounter()
    table = scorer(dataset.samples, counter)
    report = EvalReport(
        image_auroc=auroc(table.s, dataset.labels),
        image_ap=average_precision(table.s, dataset.labels),
        image_f1=f1_max(table.s, dataset.labels),
        nfe=counter.count,
    )
    if dataset.masks is not None and table.deltas is not None:
        target = upsample_to if upsample_to is not None else dataset.masks.shape[1:]
        maps = pixel_maps(table, target)
        if maps.shape != dataset.masks.shape:
            raise ParameterError(
                f"score maps {maps.shape} do not match masks {dataset.masks.shape}"
            )
        flat_scores = maps.reshape(-1)
        flat_labels = dataset.masks.reshape(-1)
        report.pixel_auroc = auroc(flat_scores, flat_labels)
        report.pixel_ap = average_precision(flat_scores, flat_labels)
        report.pixel_f1 = f1_max(flat_scores, flat_labels)
        report.pixel_aupro = aupro(maps, dataset.masks, fpr_limit)
    if speed_repeats > 0:
        rate, nfe = throughput(scorer, dataset.samples, repeats=speed_repeats)
        report.samples_per_sec = rate
        report.nfe = nfe
    return report, table
