"""Phase-sensitive masks and the anisotropic guidance field derived from them.

The guidance field ``g = 1 - mask`` is the diagonal of the (diagonal) noise
guidance matrix, kept on the ``(K, F)`` grid; every product with it is
element-wise.
"""

import numpy as np

from .errors import InvalidInputError


def _grid(a):
    return a.values if hasattr(a, "values") else np.asarray(a)


def _check_unit_range(v, what):
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{what} contains non-finite values")
    if np.any(v < 0) or np.any(v > 1):
        raise InvalidInputError(f"{what} values must lie in [0, 1]")
    return v


class Mask:
    """Per-bin speech proportion in [0, 1]."""

    def __init__(self, values):
        self.values = _check_unit_range(values, "mask")

    @property
    def shape(self):
        return self.values.shape


class GuidanceField:
    """Per-bin noise scale in [0, 1]; 1 means full diffusion noise."""

    def __init__(self, values):
        self.values = _check_unit_range(values, "guidance")

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def isotropic(cls, shape):
        return cls(np.ones(shape))


def phase_sensitive_mask(x0, y):
    """clip(cos(theta) * |x0| / |y|, 0, 1) per bin; 0 where |y| == 0.

    ``cos(theta) * |x0| / |y|`` equals ``Re(x0 * conj(y)) / |y|**2``, which
    avoids computing angles explicitly.
    """
    if hasattr(x0, "domain") and hasattr(y, "domain") and x0.domain != y.domain:
        raise InvalidInputError("x0 and y must share a domain tag")
    a, b = _grid(x0), _grid(y)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {b.shape}")
    # same operation order in both, so x0 == y gives a ratio of exactly 1
    power = b.real * b.real + b.imag * b.imag
    num = a.real * b.real + a.imag * b.imag
    safe = power > 0
    m = np.zeros(a.shape)
    m[safe] = num[safe] / power[safe]
    return Mask(np.clip(m, 0.0, 1.0))


def guidance_from_mask(m):
    v = m.values if isinstance(m, Mask) else _check_unit_range(m, "mask")
    return GuidanceField(1.0 - v)
