"""Attribute augmentation: build the per-step input matrix E^t.

Column order is fixed (checkpoints depend on it)::

    [x_t | S | D_1[t-m], ..., D_1[t] | ... | D_w[t-m], ..., D_w[t]]

Dynamic history before the first time step is padded with the value at index 0.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import AttributeBundle, WindowedSample
from .errors import IndexOutOfRangeError, ShapeMismatchError


@dataclass(frozen=True)
class AugmentSpec:
    use_static: bool = True
    use_dynamic: bool = True
    window_m: int = 2

    def __post_init__(self):
        if self.window_m < 0:
            raise ValueError(f"window_m must be >= 0, got {self.window_m}")

    def width(self, p: int, w: int) -> int:
        return 1 + p * self.use_static + w * (self.window_m + 1) * self.use_dynamic

    @property
    def label(self) -> str:
        parts = [name for name, on in (("weather", self.use_dynamic), ("poi", self.use_static)) if on]
        return "+".join(parts) if parts else "TGCN"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "AugmentSpec":
        return cls(bool(d["use_static"]), bool(d["use_dynamic"]), int(d["window_m"]))


TGCN_SPEC = AugmentSpec(use_static=False, use_dynamic=False)


def _check_shapes(x, static, dynamic, spec):
    n = x.shape[0]
    if spec.use_static and (static is None or static.ndim != 2 or static.shape[0] != n):
        raise ShapeMismatchError(f"static attributes must be {n} x p, got "
                                 f"{None if static is None else static.shape}")
    if spec.use_dynamic and (dynamic is None or dynamic.ndim != 3 or dynamic.shape[1] != n):
        raise ShapeMismatchError(f"dynamic attributes must be T x {n} x w, got "
                                 f"{None if dynamic is None else dynamic.shape}")


def augment_step(x_t, static, dynamic, t: int, spec: AugmentSpec) -> np.ndarray:
    """Augmented matrix for one time step; ``x_t`` is n x 1 (or length n)."""
    x = np.asarray(x_t, dtype=np.float64).reshape(-1, 1)
    _check_shapes(x, static, dynamic, spec)
    cols = [x]
    if spec.use_static:
        cols.append(np.asarray(static, dtype=np.float64))
    if spec.use_dynamic:
        if not 0 <= t < dynamic.shape[0]:
            raise IndexOutOfRangeError(f"t={t} outside 0..{dynamic.shape[0] - 1}")
        lags = [max(t - k, 0) for k in range(spec.window_m, -1, -1)]
        for j in range(dynamic.shape[2]):
            cols.append(dynamic[lags, :, j].T)
    return np.concatenate(cols, axis=1)


def augment_series(x_norm, attrs: AttributeBundle | None, spec: AugmentSpec) -> np.ndarray:
    """Vectorised augment_step over every time step: returns T x n x F."""
    x = np.asarray(x_norm, dtype=np.float64)
    t_total, n = x.shape
    static = attrs.static_attrs if attrs is not None else None
    dynamic = attrs.dynamic_attrs if attrs is not None else None
    _check_shapes(x[0][:, None], static, dynamic, spec)
    cols = [x[:, :, None]]
    if spec.use_static:
        cols.append(np.broadcast_to(static, (t_total,) + static.shape))
    if spec.use_dynamic:
        if dynamic.shape[0] != t_total:
            raise ShapeMismatchError(f"dynamic attributes cover {dynamic.shape[0]} steps, "
                                     f"speeds cover {t_total}")
        m = spec.window_m
        padded = np.concatenate([np.repeat(dynamic[:1], m, axis=0), dynamic], axis=0)
        for j in range(dynamic.shape[2]):
            # lag k lives at padded[m - k + t]; ascending order runs k = m..0
            cols.extend(padded[m - k: m - k + t_total, :, j:j + 1] for k in range(m, -1, -1))
    return np.concatenate(cols, axis=2)


def augment_sequence(window: WindowedSample, x_norm, attrs: AttributeBundle | None,
                     spec: AugmentSpec) -> np.ndarray:
    """seq_len x n x F tensor for the input part of one window."""
    static = attrs.static_attrs if attrs is not None else None
    dynamic = attrs.dynamic_attrs if attrs is not None else None
    x = np.asarray(x_norm)
    return np.stack([augment_step(x[t][:, None], static, dynamic, t, spec)
                     for t in window.input_indices])
