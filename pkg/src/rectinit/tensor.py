"""Dense float64 tensors, a few linear-algebra primitives and a seeded RNG.

Tensors are plain C-contiguous ``numpy.ndarray`` objects of dtype float64.
The helpers here enforce that contract and turn NaN/Inf into an exception
instead of letting them leak into downstream results.

The random source is :class:`RngStream`, a thin wrapper around numpy's
``PCG64`` bit generator. Gaussian draws use numpy's ziggurat sampler
(``Generator.standard_normal``), scaled and shifted. Streams are
reproducible within this implementation for a given seed and call sequence;
no bit-compatibility with other generators is promised.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "NonFiniteError",
    "RngStream",
    "as_tensor",
    "check_finite",
    "sample_gaussian",
    "matmul",
    "moments",
]


class ShapeError(ValueError):
    """Raised when tensor shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """Raised when a computation produced NaN or Inf."""


class RngStream:
    """Deterministic random stream seeded by a 64-bit unsigned integer.

    Not thread-safe: one stream must not be shared by concurrent callers.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(tuple(shape))

    def uniform(self, shape) -> np.ndarray:
        return self._gen.random(tuple(shape))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a C-contiguous float64 array (copying only if needed)."""
    return np.ascontiguousarray(x, dtype=np.float64)


def check_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return t


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ValueError(f"shape must be nonempty with positive dimensions, got {shape}")
    return shape


def sample_gaussian(shape, mean: float, std: float, rng: RngStream) -> np.ndarray:
    """Draw i.i.d. Gaussian values of the given shape.

    Parameters
    ----------
    shape : sequence of int
        Positive dimension sizes.
    mean, std : float
        Distribution parameters; ``std`` must be non-negative.
    rng : RngStream
        Advanced by ``prod(shape)`` normal draws.

    Returns
    -------
    numpy.ndarray
        float64 array. With ``std == 0`` every value equals ``mean``.
    """
    shape = _check_shape(shape)
    if not std >= 0:
        raise ValueError(f"std must be non-negative, got {std}")
    z = rng.standard_normal(shape)
    return as_tensor(mean + std * z)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rank-2 matrix product with an explicit shape check."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def moments(t: np.ndarray) -> tuple[float, float]:
    """Sample mean and population variance (divides by the count, not count-1)."""
    t = np.asarray(t, dtype=np.float64)
    if t.size == 0:
        raise ValueError("moments of an empty tensor are undefined")
    mean = float(t.mean())
    var = float(np.mean((t - mean) ** 2))
    return mean, var
