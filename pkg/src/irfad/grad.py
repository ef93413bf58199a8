"""Minimal reverse-mode differentiation over dense float64 arrays.

Just enough autodiff to train the noise-prediction MLP: a tape is built
per training step (define-by-run, so creation order is already a
topological order), `backward` walks it once in reverse, and the only ops
provided are the ones the network needs. No broadcasting beyond the
bias-add inside `affine`, no convolutions, no GPU.

Numpy ndarrays are the tensor carrier (row-major float64); finiteness is
enforced at graph boundaries (`leaf`), interior ops trust their inputs.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import ContractError, NumericError, ShapeError


class Node:
    """One tape entry: an op, its value, and the ids of its inputs."""

    __slots__ = ("id", "op", "value", "parents", "backward_fn", "is_param")

    def __init__(self, id, op, value, parents, backward_fn, is_param=False):
        self.id = id
        self.op = op
        self.value = value
        self.parents = parents
        # backward_fn(grad_out) -> per-parent gradient arrays, aligned with parents
        self.backward_fn: Callable | None = backward_fn
        self.is_param = is_param


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


class Tape:
    """Single-owner computation tape; build, call backward, discard."""

    def __init__(self):
        self._nodes: list[Node] = []

    def _record(self, op, value, parents, backward_fn, is_param=False) -> Node:
        node = Node(len(self._nodes), op, value, tuple(p.id for p in parents),
                    backward_fn, is_param)
        self._nodes.append(node)
        return node

    def leaf(self, value, *, param: bool = False) -> Node:
        """Graph input. Finiteness is checked here, the graph boundary."""
        arr = _as_array(value)
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite value entering the tape")
        return self._record("param" if param else "input", arr, (), None, param)

    # -- elementwise ----------------------------------------------------

    def _check_same_shape(self, op, a: Node, b: Node):
        if a.value.shape != b.value.shape:
            raise ShapeError(f"{op}: shape {a.value.shape} != {b.value.shape}")

    def add(self, a: Node, b: Node) -> Node:
        self._check_same_shape("add", a, b)
        return self._record("add", a.value + b.value, (a, b), lambda g: (g, g))

    def sub(self, a: Node, b: Node) -> Node:
        self._check_same_shape("sub", a, b)
        return self._record("sub", a.value - b.value, (a, b), lambda g: (g, -g))

    def mul(self, a: Node, b: Node) -> Node:
        self._check_same_shape("mul", a, b)
        av, bv = a.value, b.value
        return self._record("mul", av * bv, (a, b), lambda g: (g * bv, g * av))

    def scale(self, a: Node, c: float) -> Node:
        c = float(c)
        return self._record("scale", c * a.value, (a,), lambda g: (c * g,))

    def silu(self, a: Node) -> Node:
        """Sigmoid-weighted activation x * sigmoid(x); smooth everywhere."""
        x = a.value
        sig = expit(x)
        out = x * sig

        def backward(g):
            return (g * (sig * (1.0 + x * (1.0 - sig))),)

        return self._record("silu", out, (a,), backward)

    # -- linear algebra -------------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        av, bv = a.value, b.value
        if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {av.shape} @ {bv.shape}")

        def backward(g):
            return (g @ bv.T, av.T @ g)

        return self._record("matmul", av @ bv, (a, b), backward)

    def affine(self, x: Node, w: Node, b: Node) -> Node:
        """x @ w + b with the bias broadcast over rows of x."""
        xv, wv, bv = x.value, w.value, b.value
        if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
            raise ShapeError(f"affine: incompatible shapes {xv.shape} @ {wv.shape}")
        if bv.shape != (wv.shape[1],):
            raise ShapeError(f"affine: bias shape {bv.shape} != ({wv.shape[1]},)")

        def backward(g):
            return (g @ wv.T, xv.T @ g, g.sum(axis=0))

        return self._record("affine", xv @ wv + bv, (x, w, b), backward)

    # -- reductions ------------------------------------------------------

    def reduce_sum(self, a: Node) -> Node:
        shape = a.value.shape
        return self._record(
            "reduce_sum",
            np.asarray(a.value.sum()),
            (a,),
            lambda g: (np.full(shape, float(g)),),
        )

    def mean_squared_error(self, a: Node, b: Node) -> Node:
        """Mean over all entries of (a - b)^2; the regression loss."""
        self._check_same_shape("mean_squared_error", a, b)
        diff = a.value - b.value
        n = diff.size
        out = np.asarray(np.mean(diff * diff))

        def backward(g):
            d = (2.0 / n) * float(g) * diff
            return (d, -d)

        return self._record("mse", out, (a, b), backward)

    # -- reverse pass ----------------------------------------------------

    def backward(self, root: Node) -> dict[int, np.ndarray]:
        """Gradients of the scalar `root` w.r.t. every parameter leaf.

        Deterministic: the tape is walked in fixed reverse creation order
        and contributions accumulate in that order.
        """
        if root.value.shape != ():
            raise ContractError(
                f"backward root must be scalar, got shape {root.value.shape}"
            )
        grads: list[np.ndarray | None] = [None] * len(self._nodes)
        grads[root.id] = np.asarray(1.0)
        for node in reversed(self._nodes[: root.id + 1]):
            g = grads[node.id]
            if g is None or node.backward_fn is None:
                continue
            for pid, pg in zip(node.parents, node.backward_fn(g)):
                # accumulation reassigns (never mutates), so sharing is safe
                grads[pid] = pg if grads[pid] is None else grads[pid] + pg
        out = {}
        for node in self._nodes:
            if node.is_param:
                g = grads[node.id]
                out[node.id] = np.zeros_like(node.value) if g is None else g
        return out
