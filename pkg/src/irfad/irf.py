"""One-step inverse residual fields.

The residual field of a sample at step t is the noise the trained
predictor assigns to that sample's forward state: feeding the noisy state
x_t gives the noisy-state variant, feeding the noiseless forward mean
mu(x_t) = sqrt(abar_t) x_0 gives the mean-path variant. Either way the
field comes out of exactly one network evaluation; an evaluation counter
in the call context enforces this rather than trusting it.

Default inference steps: t=500 for feature-map data, t=250 for the 1-D
toy problem (both overridable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .net import EvalCounter, NoisePredictor, predict_noise
from .schedule import NoiseSchedule, mean_path, q_sample

DEFAULT_T_INFER_FEATURES = 500
DEFAULT_T_INFER_TOY = 250

NOISY_STATE = "noisy_state"
MEAN_PATH = "mean_path"


@dataclass(frozen=True)
class IrfResult:
    delta: np.ndarray
    input_kind: str
    t: int
    nfe: int

    def __post_init__(self):
        if self.nfe != 1:
            raise ContractError(f"IRF consumed {self.nfe} network evaluations, not 1")


def _flat(net: NoisePredictor, x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.size != net.spec.d:
        raise ShapeError(f"sample has {x0.size} entries, net expects {net.spec.d}")
    return x0.reshape(-1)


def irf_noisy(
    net: NoisePredictor,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    t: int,
    eps: np.ndarray,
    counter: EvalCounter | None = None,
) -> IrfResult:
    """Residual field under noisy-state input x_t = sqrt(abar) x0 + sqrt(1-abar) eps.

    The caller supplies eps explicitly and thereby controls the randomness;
    with eps = 0 this coincides with the mean-path variant.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.shape:
        raise ShapeError(f"eps shape {eps.shape} != x0 shape {x0.shape}")
    counter = counter if counter is not None else EvalCounter()
    before = counter.count
    xt = q_sample(schedule, _flat(net, x0), t, eps.reshape(-1))
    delta = predict_noise(net, xt, t, counter)
    return IrfResult(
        delta=delta.reshape(x0.shape),
        input_kind=NOISY_STATE,
        t=int(t),
        nfe=counter.count - before,
    )


def irf_mean(
    net: NoisePredictor,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    t: int,
    counter: EvalCounter | None = None,
) -> IrfResult:
    """Residual field under mean-path input mu(x_t) = sqrt(abar_t) x0.

    Deterministic: a pure function of (net, x0, t).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    counter = counter if counter is not None else EvalCounter()
    before = counter.count
    mu = mean_path(schedule, _flat(net, x0), t)
    delta = predict_noise(net, mu, t, counter)
    return IrfResult(
        delta=delta.reshape(x0.shape),
        input_kind=MEAN_PATH,
        t=int(t),
        nfe=counter.count - before,
    )
