"""Score maps and image-level anomaly scores from a residual field.

Pixel level: the feature-scale map takes the channel-wise L2 norm of the
residual field at each location, then bilinear upsampling brings it to
the evaluation resolution. Image level: the score is the sum of two
parts, the range (max - min) of the feature-scale map and the Gaussian
negative log-likelihood of the residual field dropped to its quadratic
term, 0.5 * sum(delta^2). The parts are summed raw; optional z-scoring
against held-out normal statistics is available but off by default.

Bilinear upsampling is corner-aligned: source corners map onto target
corners, so target pixel (I, J) reads the source at
(I*(h-1)/(H-1), J*(w-1)/(W-1)) and degenerate axes (h == 1) are constant.
Interpolated values never exceed the input extrema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError, ShapeError


def bilinear_upsample(a: np.ndarray, H: int, W: int) -> np.ndarray:
    """Corner-aligned bilinear upsample of (h, w) or (n, h, w) maps."""
    a = np.asarray(a, dtype=np.float64)
    squeeze = a.ndim == 2
    if squeeze:
        a = a[None]
    if a.ndim != 3:
        raise ShapeError(f"expected (h, w) or (n, h, w) map, got shape {a.shape}")
    h, w = a.shape[1], a.shape[2]
    if H < h or W < w or H < 1 or W < 1:
        raise ParameterError(f"target ({H}, {W}) must be >= source ({h}, {w})")

    def axis_coords(size_in: int, size_out: int):
        if size_out == 1:
            src = np.zeros(1)
        else:
            src = np.arange(size_out) * (size_in - 1) / (size_out - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, size_in - 1)
        return lo, hi, src - lo

    y0, y1, wy = axis_coords(h, H)
    x0, x1, wx = axis_coords(w, W)
    wy = wy[:, None]
    wx = wx[None, :]
    top = (1.0 - wx) * a[:, y0[:, None], x0[None, :]] + wx * a[:, y0[:, None], x1[None, :]]
    bot = (1.0 - wx) * a[:, y1[:, None], x0[None, :]] + wx * a[:, y1[:, None], x1[None, :]]
    out = (1.0 - wy) * top + wy * bot
    return out[0] if squeeze else out


@dataclass(frozen=True)
class ScoreMap:
    """Feature-scale map (channel-wise norms) and its upsampled version."""

    feature_scale: np.ndarray  # (h, w)
    full_scale: np.ndarray  # (H, W)
    dims: tuple[int, int, int, int, int]  # (c, h, w, H, W)


@dataclass(frozen=True)
class ImageScore:
    s: float
    s_diff: float
    s_nll: float


def _check_field(delta: np.ndarray) -> np.ndarray:
    delta = np.asarray(delta, dtype=np.float64)
    if delta.ndim != 3:
        raise ShapeError(f"residual field must be (c, h, w), got shape {delta.shape}")
    if not np.all(np.isfinite(delta)):
        raise NumericError("non-finite residual field")
    return delta


def feature_scale_map(delta: np.ndarray) -> np.ndarray:
    """Channel-wise L2 norm at each location: (c, h, w) -> (h, w)."""
    delta = _check_field(delta)
    return np.sqrt(np.sum(delta * delta, axis=0))


def score_map(delta: np.ndarray, target: tuple[int, int]) -> ScoreMap:
    """Pixel-level score map at feature scale, upsampled to `target`."""
    delta = _check_field(delta)
    c, h, w = delta.shape
    H, W = target
    fmap = feature_scale_map(delta)
    return ScoreMap(
        feature_scale=fmap,
        full_scale=bilinear_upsample(fmap, H, W),
        dims=(c, h, w, int(H), int(W)),
    )


def image_score(delta: np.ndarray) -> ImageScore:
    """Image-level score s = s_diff + s_nll.

    s_diff is the range of the feature-scale map; s_nll is the quadratic
    term of the standard-Gaussian negative log-likelihood of the field,
    0.5 * sum(delta^2) (the constant (c*h*w/2)*log(2*pi) is dropped so the
    score is non-negative and zero for a zero field).
    """
    delta = _check_field(delta)
    fmap = feature_scale_map(delta)
    s_diff = float(fmap.max() - fmap.min())
    s_nll = 0.5 * float(np.sum(delta * delta))
    return ImageScore(s=s_diff + s_nll, s_diff=s_diff, s_nll=s_nll)


@dataclass(frozen=True)
class ComponentStats:
    """Held-out normal statistics for optional component z-scoring."""

    diff_mean: float
    diff_std: float
    nll_mean: float
    nll_std: float

    @classmethod
    def fit(cls, scores: list[ImageScore]) -> "ComponentStats":
        if not scores:
            raise ParameterError("need at least one calibration score")
        diffs = np.array([sc.s_diff for sc in scores])
        nlls = np.array([sc.s_nll for sc in scores])
        return cls(
            diff_mean=float(diffs.mean()),
            diff_std=float(max(diffs.std(), 1e-12)),
            nll_mean=float(nlls.mean()),
            nll_std=float(max(nlls.std(), 1e-12)),
        )

    def apply(self, score: ImageScore) -> float:
        """Combined score with each component z-scored; replaces raw s."""
        zd = (score.s_diff - self.diff_mean) / self.diff_std
        zn = (score.s_nll - self.nll_mean) / self.nll_std
        return zd + zn
