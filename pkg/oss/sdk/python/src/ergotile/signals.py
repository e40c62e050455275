"""Sampled functions on a dyadic window and the operations on them.

A :class:`SampledFunction` lives on the grid ``x_n = -2**a + n * 2**-b``,
``0 <= n < 2**(a+b+1)``. Its transform is sampled at ``xi_k = k / 2**(a+1)``
for ``-N/2 <= k < N/2`` and is normalized so that

    F(xi_k) = h * sum_n f(x_n) exp(-2 pi i x_n xi_k)

which makes Parseval read ``h * sum |f|^2 == sum |F|^2 / P``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
import numpy.typing as npt
from scipy import fft as sp_fft

from ergotile.exceptions import ParameterError
from ergotile.grids import Interval, union_measure
from ergotile.rng import SplitMix64

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

DEFAULT_A = 5
DEFAULT_B = 8


# ----------------------------------------------------------------------
# Smooth profiles shared by kernels and wave packets
# ----------------------------------------------------------------------


def smooth_step(t: npt.ArrayLike) -> FloatArray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t >= 1.0, 1.0, 0.0)
    inner = (t > 0.0) & (t < 1.0)
    ti = t[inner]
    # e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) written as a logistic
    expo = np.clip(1.0 / ti - 1.0 / (1.0 - ti), -700.0, 700.0)
    out[inner] = 1.0 / (1.0 + np.exp(expo))
    return out


def raised_step(t: npt.ArrayLike) -> FloatArray:
    """sin^2(pi/2 * smooth_step(t))."""
    return np.sin(0.5 * np.pi * smooth_step(t)) ** 2


def partition_bump(u: npt.ArrayLike) -> FloatArray:
    """Bump on [0, 2] whose integer translates sum to 1."""
    u = np.asarray(u, dtype=np.float64)
    rise = np.sin(0.5 * np.pi * smooth_step(u)) ** 2
    fall = np.cos(0.5 * np.pi * smooth_step(u - 1.0)) ** 2
    return np.where((u > 0.0) & (u <= 1.0), rise, np.where((u > 1.0) & (u < 2.0), fall, 0.0))


# ----------------------------------------------------------------------
# Sampled functions
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Complex samples on [-2^a, 2^a) with step 2^-b."""

    a: int
    b: int
    values: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.size,):
            raise ParameterError(f"expected {self.size} samples, got {vals.shape}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- grid ------------------------------------------------------------

    @property
    def size(self) -> int:
        return 2 ** (self.a + self.b + 1)

    @property
    def step(self) -> float:
        return 2.0**-self.b

    @property
    def period(self) -> float:
        return 2.0 ** (self.a + 1)

    @property
    def x(self) -> FloatArray:
        return sample_points(self.a, self.b)

    @property
    def xi(self) -> FloatArray:
        return frequency_points(self.a, self.b)

    # -- constructors ----------------------------------------------------

    @classmethod
    def zeros(cls, a: int = DEFAULT_A, b: int = DEFAULT_B) -> SampledFunction:
        return cls(a, b, np.zeros(2 ** (a + b + 1), dtype=np.complex128))

    @classmethod
    def from_callable(
        cls, fn: Callable[[FloatArray], npt.ArrayLike], a: int = DEFAULT_A, b: int = DEFAULT_B
    ) -> SampledFunction:
        return cls(a, b, np.asarray(fn(sample_points(a, b)), dtype=np.complex128))

    @classmethod
    def from_spectrum(cls, spectrum: npt.ArrayLike, a: int = DEFAULT_A, b: int = DEFAULT_B) -> SampledFunction:
        """Inverse of :meth:`spectrum` (centered frequency order)."""
        spec = np.asarray(spectrum, dtype=np.complex128)
        k = np.arange(-spec.size // 2, spec.size // 2)
        signs = np.where(k % 2 == 0, 1.0, -1.0)
        natural = sp_fft.ifftshift(spec * signs)
        return cls(a, b, sp_fft.ifft(natural) / 2.0**-b)

    def like(self, values: npt.ArrayLike) -> SampledFunction:
        return SampledFunction(self.a, self.b, np.asarray(values, dtype=np.complex128))

    # -- transform -------------------------------------------------------

    def spectrum(self) -> ComplexArray:
        """Samples of the Fourier transform at :attr:`xi` (centered order)."""
        natural = sp_fft.fft(self.values) * self.step
        centered = sp_fft.fftshift(natural)
        k = np.arange(-self.size // 2, self.size // 2)
        return centered * np.where(k % 2 == 0, 1.0, -1.0)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other: SampledFunction) -> SampledFunction:
        return self.like(self.values + other.values)

    def __sub__(self, other: SampledFunction) -> SampledFunction:
        return self.like(self.values - other.values)

    def __mul__(self, other: SampledFunction | complex | float) -> SampledFunction:
        if isinstance(other, SampledFunction):
            return self.like(self.values * other.values)
        return self.like(self.values * other)

    __rmul__ = __mul__

    def conj(self) -> SampledFunction:
        return self.like(np.conj(self.values))

    def modulus(self) -> FloatArray:
        return np.abs(self.values)

    # -- norms -----------------------------------------------------------

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.step)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.step))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def inner(self, other: SampledFunction) -> complex:
        """<self, other> = integral of self * conj(other)."""
        return complex(np.vdot(other.values, self.values) * self.step)

    # -- operators -------------------------------------------------------

    def modulate(self, theta: float) -> SampledFunction:
        """Mod_theta f(x) = exp(2 pi i theta x) f(x)."""
        return self.like(np.exp(2j * np.pi * theta * self.x) * self.values)

    def translate(self, shift: float) -> SampledFunction:
        """f(x - shift), zero-filled; shift must be a multiple of the step."""
        steps = shift / self.step
        n = int(round(steps))
        if abs(steps - n) > 1e-9:
            raise ParameterError(f"shift {shift} is not a multiple of the step {self.step}")
        out = np.zeros_like(self.values)
        if n >= 0:
            out[n:] = self.values[: self.size - n] if n < self.size else []
        else:
            out[: self.size + n] = self.values[-n:]
        return self.like(out)

    def regrid(self, j: int, p: float = 2.0) -> SampledFunction:
        """Dil^p_{2^j} f on the window [-2^(a+j), 2^(a+j)) with step 2^(j-b).

        The samples carry over, so this dilation is exact for every j.
        """
        norm = 2.0 ** (-j / p) if np.isfinite(p) else 1.0
        return SampledFunction(self.a + j, self.b - j, self.values * norm)

    def dilate(self, j: int, p: float = 1.0) -> SampledFunction:
        """Dil^p_s f(x) = s^(-1/p) f(x/s) for s = 2^j.

        Compression (j < 0) is exact on the sample grid; stretching
        (j > 0) is exact on the frequency grid.
        """
        norm = 2.0 ** (-j / p) if np.isfinite(p) else 1.0
        if j == 0:
            return self * norm
        if j < 0:
            stride = 2 ** (-j)
            n = np.arange(self.size)
            src = (n - self.size // 2) * stride + self.size // 2
            valid = (src >= 0) & (src < self.size)
            out = np.zeros(self.size, dtype=np.complex128)
            out[valid] = self.values[src[valid]]
            return self.like(out * norm)
        spec = self.spectrum()
        stride = 2**j
        k = np.arange(self.size) - self.size // 2
        src = k * stride + self.size // 2
        valid = (src >= 0) & (src < self.size)
        out = np.zeros(self.size, dtype=np.complex128)
        out[valid] = spec[src[valid]] * 2.0**j
        return SampledFunction.from_spectrum(out * norm, self.a, self.b)

    def wraparound_energy(self, margin: float = 0.125) -> float:
        """Fraction of L2 energy in the outer ``margin`` of the window."""
        total = float(np.sum(np.abs(self.values) ** 2))
        if total == 0.0:
            return 0.0
        edge = np.abs(self.x) >= (1.0 - margin) * 2.0**self.a
        return float(np.sum(np.abs(self.values[edge]) ** 2) / total)


def sample_points(a: int, b: int) -> FloatArray:
    n = np.arange(2 ** (a + b + 1), dtype=np.float64)
    return -(2.0**a) + n * 2.0**-b


def frequency_points(a: int, b: int) -> FloatArray:
    size = 2 ** (a + b + 1)
    return np.arange(-size // 2, size // 2, dtype=np.float64) / 2.0 ** (a + 1)


def transform_pair(f: SampledFunction) -> tuple[ComplexArray, SampledFunction]:
    """Forward transform and its inverse reconstruction."""
    spec = f.spectrum()
    return spec, SampledFunction.from_spectrum(spec, f.a, f.b)


def parseval_defect(f: SampledFunction) -> float:
    """| ||f||_2 - ||f^||_2 | with the frequency weight 1/P."""
    spec_norm = float(np.sqrt(np.sum(np.abs(f.spectrum()) ** 2) / f.period))
    return abs(f.l2_norm() - spec_norm)


# ----------------------------------------------------------------------
# Weak L1 and the maximal function
# ----------------------------------------------------------------------


def weak_l1_norm(values: npt.ArrayLike, step: float) -> float:
    """sup over thresholds of lambda * |{|F| > lambda}|.

    Thresholds run through the distinct sample moduli; the supremum at
    each modulus v is the left limit v * |{|F| >= v}|.
    """
    mod = np.sort(np.abs(np.asarray(values)).ravel())
    if mod.size == 0 or mod[-1] == 0.0:
        return 0.0
    at_least = mod.size - np.searchsorted(mod, mod, side="left")
    return float(np.max(mod * at_least) * step)


def weak_l1(f: SampledFunction) -> float:
    return weak_l1_norm(f.values, f.step)


def level_set_profile(values: npt.ArrayLike, step: float, lambdas: Sequence[float]) -> FloatArray:
    """lambda * |{|F| > lambda}| for each lambda in ``lambdas``."""
    mod = np.sort(np.abs(np.asarray(values)).ravel())
    lam = np.asarray(lambdas, dtype=np.float64)
    above = mod.size - np.searchsorted(mod, lam, side="right")
    return lam * above * step


def hl_maximal(f: SampledFunction) -> SampledFunction:
    """Centered Hardy-Littlewood maximal function over dyadic radii.

    Radius 0 gives |f|; radius R = 2^t samples averages |f| over the
    2R samples [n - R, n + R). The function is zero outside the window.
    """
    mod = f.modulus()
    size = f.size
    padded = np.concatenate([np.zeros(size), mod, np.zeros(size)])
    csum = np.concatenate([[0.0], np.cumsum(padded)])
    centre = np.arange(size) + size
    best = mod.copy()
    radius = 1
    while radius <= size:
        avg = (csum[centre + radius] - csum[centre - radius]) / (2 * radius)
        np.maximum(best, avg, out=best)
        radius *= 2
    return f.like(best)


# ----------------------------------------------------------------------
# Test classes X(E), X_2(E)
# ----------------------------------------------------------------------


def indicator(intervals: Sequence[Interval], a: int = DEFAULT_A, b: int = DEFAULT_B) -> SampledFunction:
    """1_E sampled on half-open cells [lo, hi)."""
    x = sample_points(a, b)
    mask = np.zeros(x.size, dtype=bool)
    for iv in intervals:
        lo, hi = iv.as_floats()
        mask |= (x >= lo) & (x < hi)
    return SampledFunction(a, b, mask.astype(np.complex128))


@dataclass(frozen=True)
class TestClassSpec:
    """A set E and the normalization of the class X(E) or X_2(E)."""

    intervals: tuple[Interval, ...]
    normalization: Literal["sup", "l2"] = "sup"

    __test__ = False

    def measure(self) -> float:
        return float(union_measure(self.intervals))


def random_test_function(
    spec: TestClassSpec, rng: SplitMix64, a: int = DEFAULT_A, b: int = DEFAULT_B
) -> SampledFunction:
    """Random element of X(E) (|h| <= 1_E) or X_2(E) (|h| <= |E|^(-1/2) 1_E).

    For X_2(E) the larger of the exact and the sampled measure of E is
    used, so ||h||_2 <= 1 holds on samples.
    """
    support = indicator(list(spec.intervals), a, b).values.real > 0
    count = int(np.count_nonzero(support))
    amp = np.asarray(rng.uniform(count))
    phase = np.exp(2j * np.pi * np.asarray(rng.uniform(count)))
    values = np.zeros(2 ** (a + b + 1), dtype=np.complex128)
    values[support] = amp * phase
    if spec.normalization == "l2":
        measure = max(spec.measure(), count * 2.0**-b)
        if measure > 0:
            values /= np.sqrt(measure)
    return SampledFunction(a, b, values)


def gaussian(a: int = DEFAULT_A, b: int = DEFAULT_B, center: float = 0.0, width: float = 1.0) -> SampledFunction:
    """exp(-pi ((x - center)/width)^2)."""
    return SampledFunction.from_callable(lambda x: np.exp(-np.pi * ((x - center) / width) ** 2), a, b)
