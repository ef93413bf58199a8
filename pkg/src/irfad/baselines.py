"""Multi-step diffusion baselines for the speed/accuracy comparison.

Two scorers, one per established paradigm:

* Reconstruction: jump a sample to x_{t_start} with the closed-form
  forward marginal, run ancestral reverse transitions back to an estimate
  of x_0, and score by the mean squared reconstruction error. Off-manifold
  samples reconstruct poorly, so the error separates classes.

* Deterministic inversion: drive the sample forward to x_T with DDIM
  inversion updates and score by how atypical x_T is under the standard
  Gaussian (its quadratic negative log-likelihood term).

Both run on a uniform sub-grid of the schedule, tau_k = round(k * span /
steps), and consume exactly `steps` network evaluations per sample. The
reverse transition mean uses the per-step factor (1 - beta_eff) under the
first root and the cumulative (1 - abar) under the second; the transition
variance is beta_eff, and the final reverse step injects no noise so the
chain ends deterministically.

The `*_batch` functions process (B, d) matrices and return one score per
row; the single-sample wrappers carry the per-call contract (scalar score,
NFE bookkeeping).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .net import EvalCounter, NoisePredictor, predict_noise
from .schedule import NoiseSchedule, q_sample

RECONSTRUCTION = "reconstruction"
DDIM_INVERSION = "ddim_inversion"

DEFAULT_RECON_T_START = 500
DEFAULT_RECON_STEPS = 50
DEFAULT_DDIM_STEPS = 3


@dataclass(frozen=True)
class BaselineResult:
    score: float
    nfe: int
    kind: str


def substep_grid(span: int, steps: int) -> np.ndarray:
    """Uniform sub-schedule 0 = tau_0 < ... < tau_steps = span."""
    if steps < 1 or steps > span:
        raise ParameterError(f"steps {steps} outside [1, {span}]")
    taus = np.round(np.arange(steps + 1) * (span / steps)).astype(np.intp)
    taus[0], taus[-1] = 0, span
    if np.any(np.diff(taus) < 1):
        raise ParameterError(f"steps {steps} too fine for span {span}")
    return taus


def _as_batch(net: NoisePredictor, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.spec.d:
        raise ShapeError(f"batch shape {x.shape} incompatible with d={net.spec.d}")
    return x


def reconstruct_batch(
    net: NoisePredictor,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    t_start: int,
    steps: int,
    noise: tuple[np.ndarray, list[np.ndarray]],
    counter: EvalCounter | None = None,
) -> np.ndarray:
    """Per-row mean squared reconstruction error of a (B, d) batch."""
    schedule.check_step(t_start)
    x0 = _as_batch(net, x0)
    taus = substep_grid(t_start, steps)
    jump_eps, zs = noise
    if jump_eps.shape != x0.shape or len(zs) != steps - 1:
        raise ShapeError("noise does not match batch shape or step count")
    xt = q_sample(schedule, x0, t_start, jump_eps)
    for k in range(steps, 0, -1):
        t_hi, t_lo = int(taus[k]), int(taus[k - 1])
        abar_hi = schedule.alpha_bar(t_hi)
        abar_lo = schedule.alpha_bar(t_lo)
        beta_eff = 1.0 - abar_hi / abar_lo
        eps_hat = predict_noise(net, xt, t_hi, counter)
        xt = (xt - beta_eff / np.sqrt(1.0 - abar_hi) * eps_hat) / np.sqrt(1.0 - beta_eff)
        if k > 1:
            xt = xt + np.sqrt(beta_eff) * zs[steps - k]
    return np.mean((x0 - xt) ** 2, axis=1)


def draw_recon_noise(
    rng: np.random.Generator, shape: tuple[int, int], steps: int
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Draw order: jump noise first, then one array per intermediate step."""
    jump_eps = rng.standard_normal(shape)
    return jump_eps, [rng.standard_normal(shape) for _ in range(steps - 1)]


def reconstruct_score(
    net: NoisePredictor,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    t_start: int = DEFAULT_RECON_T_START,
    steps: int = DEFAULT_RECON_STEPS,
    rng: np.random.Generator | None = None,
    noise: tuple[np.ndarray, list[np.ndarray]] | None = None,
    counter: EvalCounter | None = None,
) -> BaselineResult:
    """Perturb-then-denoise reconstruction error of one sample.

    Randomness is injected explicitly: either a generator `rng` or a
    `noise` tuple (jump_eps, [z_steps .. z_2]); the final step adds none.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    flat = x0.reshape(1, -1)
    if noise is None:
        if rng is None:
            raise ParameterError("reconstruct_score needs rng or explicit noise")
        noise = draw_recon_noise(rng, flat.shape, steps)
    else:
        jump_eps, zs = noise
        noise = (
            np.asarray(jump_eps, dtype=np.float64).reshape(1, -1),
            [np.asarray(z, dtype=np.float64).reshape(1, -1) for z in zs],
        )
    counter = counter if counter is not None else EvalCounter()
    before = counter.count
    scores = reconstruct_batch(net, schedule, flat, t_start, steps, noise, counter)
    return BaselineResult(
        score=float(scores[0]), nfe=counter.count - before, kind=RECONSTRUCTION
    )


def ddim_invert_batch(
    net: NoisePredictor,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    steps: int,
    counter: EvalCounter | None = None,
) -> np.ndarray:
    """Per-row score 0.5 * ||x_T||^2 after DDIM inversion of a (B, d) batch.

    Each update evaluates the predictor at the target step of the jump, so
    all evaluation times stay within [1, T].
    """
    x = _as_batch(net, x0).copy()
    taus = substep_grid(schedule.T, steps)
    for k in range(1, steps + 1):
        t_next, t_cur = int(taus[k]), int(taus[k - 1])
        abar_next = schedule.alpha_bar(t_next)
        abar_cur = schedule.alpha_bar(t_cur)
        eps_hat = predict_noise(net, x, t_next, counter)
        x0_hat = (x - np.sqrt(1.0 - abar_cur) * eps_hat) / np.sqrt(abar_cur)
        x = np.sqrt(abar_next) * x0_hat + np.sqrt(1.0 - abar_next) * eps_hat
    return 0.5 * np.sum(x * x, axis=1)


def ddim_invert_score(
    net: NoisePredictor,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    steps: int = DEFAULT_DDIM_STEPS,
    counter: EvalCounter | None = None,
) -> BaselineResult:
    """Deterministic inversion score of one sample."""
    x0 = np.asarray(x0, dtype=np.float64)
    counter = counter if counter is not None else EvalCounter()
    before = counter.count
    scores = ddim_invert_batch(net, schedule, x0.reshape(1, -1), steps, counter)
    return BaselineResult(
        score=float(scores[0]), nfe=counter.count - before, kind=DDIM_INVERSION
    )
