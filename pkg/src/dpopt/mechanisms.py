"""Seeded noise generation for private optimization runs.

Every draw goes through an explicit inverse-CDF transform on the uniform
stream of a PCG64 generator, so a (seed, stream) pair pins down the whole
noise sequence bit-for-bit on a given numpy/scipy build:

  * Gaussians apply the normal quantile function ``ndtri`` to uniforms,
  * Laplace draws invert the double-exponential CDF,
  * symmetric (Wigner) matrices fill the diagonal and upper triangle with
    i.i.d. Gaussians in row-major order and mirror the result.

The row-major triangle order is normative: it makes Wigner draws
reproducible across materialized and matrix-free code paths.  None of this
is cryptographically secure noise, and no floating-point side channels are
mitigated; both are documented limitations.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

# Tail constant A for symmetric sub-Gaussian random matrices,
# P(||E|| > A sqrt(d) * scale) <= small.  The constant is not pinned down by
# theory; 2.0 is an empirical calibration used by the sample-size advisors.
DEFAULT_WIGNER_TAIL_CONSTANT = 2.0

# smallest uniform fed to the quantile transforms; gen.random() can return
# exactly 0.0, which would map to -inf
_U_FLOOR = 2.0 ** -53


class SeededRng:
    """A reproducible uniform stream addressed by (seed, stream).

    Distinct stream ids (and child spawn paths) give statistically
    independent generators via numpy's SeedSequence.  A SeededRng is owned
    by one logical run; there is no locking.
    """

    def __init__(self, seed: int, stream: int = 0, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream = int(stream)
        self._path = tuple(int(p) for p in _path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,) + self._path)
        self.generator = np.random.Generator(np.random.PCG64(ss))
        self._children = 0

    def child(self) -> "SeededRng":
        """Derive an independent sub-stream (deterministic per call order)."""
        path = self._path + (self._children,)
        self._children += 1
        return SeededRng(self.seed, self.stream, _path=path)

    def fresh(self) -> "SeededRng":
        """A new generator replaying this stream from its initial state."""
        return SeededRng(self.seed, self.stream, _path=self._path)

    def uniform(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        u = self.generator.random(size)
        u = np.maximum(u, _U_FLOOR)
        return ndtri(u)

    def __repr__(self) -> str:  # pragma: no cover
        return f"SeededRng(seed={self.seed}, stream={self.stream}, path={self._path})"


def gaussian(scale: float, rng: SeededRng) -> float:
    """One N(0, scale^2) draw."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    return float(scale) * float(rng.standard_normal())


def gaussian_vector(d: int, scale: float, rng: SeededRng) -> np.ndarray:
    """d i.i.d. N(0, scale^2) entries; scale 0 gives the zero vector."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0.0:
        return np.zeros(d)
    return scale * rng.standard_normal(d)


def wigner_matrix(d: int, scale: float, rng: SeededRng) -> np.ndarray:
    """Symmetric d x d matrix, upper triangle (incl. diagonal) i.i.d. N(0, scale^2).

    Entries are drawn in row-major upper-triangle order; the lower triangle
    is an exact mirror, so the output is symmetric to the last bit.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    n_upper = d * (d + 1) // 2
    flat = gaussian_vector(n_upper, scale, rng) if scale > 0 else np.zeros(n_upper)
    out = np.zeros((d, d))
    iu = np.triu_indices(d)  # row-major over the upper triangle
    out[iu] = flat
    out.T[iu] = flat
    return out


def laplace(scale: float, rng: SeededRng) -> float:
    """One Laplace(scale) draw via inverse CDF on a single uniform.

    scale 0 is allowed and returns 0.0 (useful for zero-sensitivity queries).
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0.0:
        return 0.0
    u = float(rng.uniform())
    c = u - 0.5
    mag = min(2.0 * abs(c), 1.0 - _U_FLOOR)
    return -float(scale) * math.copysign(math.log1p(-mag), c)


def unit_vector(d: int, rng: SeededRng) -> np.ndarray:
    """Uniform random point on the unit sphere in R^d."""
    while True:
        v = rng.standard_normal(d)
        nrm = np.linalg.norm(v)
        if nrm > 0:
            return v / nrm


class WignerOperator:
    """Lazy view of one Wigner draw: dense matrix or matrix-free products.

    The draw is addressed by a dedicated child stream, so the same noise
    matrix can be materialized (d small) or re-generated row block by row
    block inside each matrix-vector product (d large) without storing d^2
    entries.  Both paths consume the identical row-major triangle sequence
    and therefore represent the same matrix.
    """

    def __init__(self, d: int, scale: float, source: SeededRng, materialize: bool = True):
        self.d = int(d)
        self.scale = float(scale)
        self._source = source
        self._dense = wigner_matrix(d, scale, source.fresh()) if materialize else None

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = wigner_matrix(self.d, self.scale, self._source.fresh())
        return self._dense

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense @ v
        if self.scale == 0.0:
            return np.zeros(self.d)
        gen = self._source.fresh()
        out = np.zeros(self.d)
        for i in range(self.d):
            seg = self.scale * gen.standard_normal(self.d - i)  # row i, cols i..d-1
            out[i] += seg @ v[i:]
            out[i + 1:] += seg[1:] * v[i]
        return out
