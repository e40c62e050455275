"""Kernel families, their validation, the frequency-side split and the
discrete transfer kernels.

Symbols are evaluated by composite Gauss-Legendre quadrature over the
compact part of each kernel; the 1/x tail of the Hilbert-type kernels has
the closed form -i pi sgn(xi) + 2i Si(2 pi xi).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field
from scipy.special import sici

from ergotile.exceptions import ParameterError, UnsupportedKernelError
from ergotile.signals import partition_bump, raised_step, smooth_step

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
RealFn = Callable[[FloatArray], npt.NDArray[np.generic]]

_GL_ORDER = 16
_CHUNK = 2048


# ----------------------------------------------------------------------
# Quadrature helpers
# ----------------------------------------------------------------------


def gauss_panels(lo: float, hi: float, panels: int, order: int = _GL_ORDER) -> tuple[FloatArray, FloatArray]:
    """Nodes and weights of composite Gauss-Legendre on [lo, hi]."""
    ref_x, ref_w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    return nodes, weights


def fourier_quadrature(
    values: npt.ArrayLike, nodes: FloatArray, weights: FloatArray, xi: npt.ArrayLike, sign: float = -1.0
) -> ComplexArray:
    """sum_q w_q v_q exp(sign * 2 pi i x_q xi), chunked over xi."""
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    wv = np.asarray(values) * weights
    out = np.empty(xi.size, dtype=np.complex128)
    for start in range(0, xi.size, _CHUNK):
        block = xi[start : start + _CHUNK]
        phase = np.exp(sign * 2j * np.pi * np.outer(block, nodes))
        out[start : start + _CHUNK] = phase @ wv
    return out


def _panel_count(width: float, xi_max: float) -> int:
    return 8 + int(math.ceil(2.0 * width * xi_max))


def _box_symbol(xi: FloatArray) -> ComplexArray:
    """Transform of 1_[0,1]."""
    z = 2j * np.pi * xi
    small = np.abs(xi) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, (1.0 - np.exp(-safe)) / safe)


# ----------------------------------------------------------------------
# Kernel families
# ----------------------------------------------------------------------


class KernelKind(str, Enum):
    AVERAGE = "average"
    HILBERT = "hilbert"
    CUSTOM = "custom"


def average_profile(x: npt.ArrayLike, m: float) -> FloatArray:
    """Smooth K_M with 1_[0,1] <= K_M <= 1_[-1/M, 1+1/M]."""
    x = np.asarray(x, dtype=np.float64)
    return smooth_step((x + 1.0 / m) * m) * (1.0 - smooth_step((x - 1.0) * m))


def hilbert_profile(x: npt.ArrayLike, m: float) -> FloatArray:
    """K_M(x) = sigma((|x| - 1 + 1/M) M) / x; equals 1/x for |x| >= 1."""
    x = np.asarray(x, dtype=np.float64)
    cut = smooth_step((np.abs(x) - 1.0 + 1.0 / m) * m)
    safe = np.where(x == 0.0, 1.0, x)
    return np.where(x == 0.0, 0.0, cut / safe)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel K with its spatial profile and symbol.

    ``spatial`` and ``symbol`` are vectorized callables; ``support`` is
    the radius outside which K vanishes (``inf`` for the 1/x kernels).
    """

    kind: KernelKind
    m: int
    spatial: RealFn = field(repr=False)
    symbol: Callable[[FloatArray], ComplexArray] = field(repr=False)
    support: float = math.inf
    name: str = ""

    def symbol_samples(self, xi_max: float | None = None, dxi: float = 1.0 / 32) -> tuple[FloatArray, ComplexArray]:
        """Symbol on the grid dxi * Z within [-xi_max, xi_max]."""
        xi_max = xi_max if xi_max is not None else 4.0 * max(self.m, 2)
        n = int(round(xi_max / dxi))
        xi = np.arange(-n, n + 1) * dxi
        return xi, self.symbol(xi)

    def spatial_samples(self, x: npt.ArrayLike) -> FloatArray:
        return np.asarray(self.spatial(np.asarray(x, dtype=np.float64)))

    def integral(self) -> float:
        """int K = K^(0); for odd kernels 0."""
        return float(np.real(self.symbol(np.array([0.0]))[0]))


def _average_symbol(m: int) -> Callable[[FloatArray], ComplexArray]:
    def symbol(xi: FloatArray) -> ComplexArray:
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        panels = _panel_count(1.0 / m, float(np.max(np.abs(xi), initial=0.0)))
        left_x, left_w = gauss_panels(-1.0 / m, 0.0, panels)
        right_x, right_w = gauss_panels(1.0, 1.0 + 1.0 / m, panels)
        out = _box_symbol(xi)
        out = out + fourier_quadrature(average_profile(left_x, m), left_x, left_w, xi)
        return out + fourier_quadrature(average_profile(right_x, m), right_x, right_w, xi)

    return symbol


def hilbert_tail_symbol(xi: npt.ArrayLike) -> ComplexArray:
    """Transform of (1/x) 1_{|x| >= 1}."""
    xi = np.asarray(xi, dtype=np.float64)
    si, _ = sici(2.0 * np.pi * np.abs(xi))
    return (np.sign(xi) * (-1j * np.pi + 2j * si)).astype(np.complex128)


def _hilbert_symbol(m: int) -> Callable[[FloatArray], ComplexArray]:
    def symbol(xi: FloatArray) -> ComplexArray:
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        panels = _panel_count(1.0 / m, float(np.max(np.abs(xi), initial=0.0)))
        nodes, weights = gauss_panels(1.0 - 1.0 / m, 1.0, panels)
        values = hilbert_profile(nodes, m)
        # D is odd, so its transform is -2i int_0^1 D(x) sin(2 pi x xi) dx
        compact = 2j * np.imag(fourier_quadrature(values, nodes, weights, xi))
        return compact + hilbert_tail_symbol(xi)

    return symbol


def make_kernel(kind: KernelKind | str, m: int) -> KernelSpec:
    """Build the smoothed averaging or Hilbert-type kernel K_M.

    Raises
    ------
    ParameterError
        If M < 2 or the kind is not a built-in family.
    """
    kind = KernelKind(kind)
    if m < 2:
        raise ParameterError(f"smoothing parameter M must be >= 2, got {m}")
    if kind is KernelKind.AVERAGE:
        return KernelSpec(
            kind, m, lambda x: average_profile(x, m), _average_symbol(m), 1.0 + 1.0 / m, f"average(M={m})"
        )
    if kind is KernelKind.HILBERT:
        return KernelSpec(kind, m, lambda x: hilbert_profile(x, m), _hilbert_symbol(m), math.inf, f"hilbert(M={m})")
    raise ParameterError("custom kernels are built with custom_kernel()")


def custom_kernel(
    symbol: Callable[[FloatArray], ComplexArray],
    spatial: RealFn | None = None,
    name: str = "custom",
    m: int = 2,
) -> KernelSpec:
    """Wrap a user supplied symbol (and optionally its spatial profile)."""

    def _no_spatial(x: FloatArray) -> FloatArray:
        raise ParameterError(f"kernel {name} has no spatial profile")

    return KernelSpec(KernelKind.CUSTOM, m, spatial or _no_spatial, symbol, math.inf, name)


def zero_kernel() -> KernelSpec:
    return custom_kernel(
        lambda xi: np.zeros(np.atleast_1d(xi).shape, dtype=np.complex128),
        lambda x: np.zeros(np.asarray(x).shape),
        name="zero",
    )


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------


class KernelReport(BaseModel):
    """Estimated constants of a kernel against the symbol majorants."""

    name: str
    constants: list[float] = Field(default_factory=list)
    vanishing_constant: float = 0.0
    vanishing_holds: bool = False
    limit_plus: complex = 0j
    limit_minus: complex = 0j

    def constant(self, order: int) -> float:
        return self.constants[order]


def _majorant(xi: FloatArray, order: int) -> FloatArray:
    a = np.abs(xi)
    if order == 0:
        return np.minimum(1.0, 1.0 / a)
    return a ** (-order) * np.minimum(a, 1.0 / a)


def one_sided_limits(kernel: KernelSpec, eps: float = 2.0**-14) -> tuple[complex, complex, float]:
    """Extrapolated limits of the symbol at 0+ and 0-, plus a stability defect.

    Uses 2 K^(eps) - K^(2 eps); the defect compares against the same
    extrapolation one octave up.
    """
    near_zero = np.array([eps, 2 * eps, 4 * eps, -eps, -2 * eps, -4 * eps])
    v = kernel.symbol(near_zero)
    plus = 2 * v[0] - v[1]
    minus = 2 * v[3] - v[4]
    plus_up = 2 * v[1] - v[2]
    minus_up = 2 * v[4] - v[5]
    scale = max(1.0, abs(plus), abs(minus))
    defect = max(abs(plus - plus_up), abs(minus - minus_up)) / scale
    return complex(plus), complex(minus), float(defect)


def validate_kernel(
    kernel: KernelSpec, order_max: int = 3, xi_max: float | None = None, dxi: float = 1.0 / 32
) -> KernelReport:
    """Sup of |d^n K^ / d xi^n| over the symbol majorants, n = 0..order_max.

    Finite differences are taken separately on xi > 0 and xi < 0 so a
    jump at the origin does not pollute the estimate. The vanishing
    condition |K^(xi)| <~ |xi| holds when both one-sided limits are 0.
    """
    xi, values = kernel.symbol_samples(xi_max, dxi)
    constants: list[float] = []
    for order in range(order_max + 1):
        best = 0.0
        for side in (xi > 0, xi < 0):
            xs, vs = xi[side], values[side]
            if order:
                vs = np.diff(vs, n=order) / dxi**order
                xs = xs[: xs.size - order] + 0.5 * order * dxi
            if vs.size:
                best = max(best, float(np.max(np.abs(vs) / _majorant(xs, order))))
        constants.append(best)
    plus, minus, _ = one_sided_limits(kernel)
    tol = 1e-6 * max(1.0, float(np.max(np.abs(values), initial=0.0)))
    holds = abs(plus) <= tol and abs(minus) <= tol
    nonzero = xi != 0
    vanishing = float(np.max(np.abs(values[nonzero]) / np.minimum(np.abs(xi[nonzero]), 1.0), initial=0.0))
    logger.debug("validated %s: constants=%s vanishing=%s", kernel.name, constants, holds)
    return KernelReport(
        name=kernel.name,
        constants=constants,
        vanishing_constant=vanishing,
        vanishing_holds=holds,
        limit_plus=plus,
        limit_minus=minus,
    )


# ----------------------------------------------------------------------
# Frequency-side split
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaProfile:
    """theta is 1 on |xi| <= low and 0 on |xi| >= high."""

    low: float = 1000.0
    high: float = 4000.0

    @classmethod
    def paper(cls) -> ThetaProfile:
        return cls(1000.0, 4000.0)

    @classmethod
    def test(cls) -> ThetaProfile:
        return cls(4.0, 16.0)

    def theta(self, xi: npt.ArrayLike) -> FloatArray:
        a = np.abs(np.asarray(xi, dtype=np.float64))
        return 1.0 - raised_step((a - self.low) / (self.high - self.low))

    def theta_i(self, i: int, xi: npt.ArrayLike) -> FloatArray:
        """theta(2^i xi) - theta(2^(i+1) xi), supported in [low/2, high] * 2^-i."""
        xi = np.asarray(xi, dtype=np.float64)
        return self.theta(2.0**i * xi) - self.theta(2.0 ** (i + 1) * xi)

    def annulus(self, i: int) -> tuple[float, float]:
        return 0.5 * self.low * 2.0**-i, self.high * 2.0**-i


def lp_piece(xi: npt.ArrayLike, j: int) -> FloatArray:
    """q(xi / 2^j), q(xi) = s(log2|xi| + 1); supported in 2^(j-1) <= |xi| <= 2^(j+1)."""
    a = np.abs(np.asarray(xi, dtype=np.float64))
    safe = np.where(a > 0, a, 1.0)
    return np.where(a > 0, partition_bump(np.log2(safe) - j + 1.0), 0.0)


@dataclass(frozen=True, eq=False)
class KernelSplit:
    """K = eta + sum_j g_j with eta^ constant near 0 on each side."""

    kernel: KernelSpec
    limit_plus: complex
    limit_minus: complex
    scales: tuple[int, ...]
    theta: ThetaProfile = field(default_factory=ThetaProfile.test)

    def eta_symbol(self, xi: npt.ArrayLike) -> ComplexArray:
        xi = np.asarray(xi, dtype=np.float64)
        taper = 1.0 - raised_step(2.0 * np.abs(xi) - 1.0)
        return np.where(xi > 0, self.limit_plus, np.where(xi < 0, self.limit_minus, 0.0)) * taper

    def residual_symbol(self, xi: npt.ArrayLike) -> ComplexArray:
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        return self.kernel.symbol(xi) - self.eta_symbol(xi)

    def piece_symbol(self, j: int, xi: npt.ArrayLike) -> ComplexArray:
        xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        return self.residual_symbol(xi) * lp_piece(xi, j)

    def eta_spatial(self, x: npt.ArrayLike) -> ComplexArray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        xp, wp = gauss_panels(0.0, 1.0, _panel_count(1.0, float(np.max(np.abs(x), initial=0.0))))
        pos = fourier_quadrature(self.eta_symbol(xp), xp, wp, x, sign=1.0)
        neg = fourier_quadrature(self.eta_symbol(-xp), -xp, wp, x, sign=1.0)
        return pos + neg

    def residual_kernel(self) -> KernelSpec:
        """The kernel K - eta."""
        base = self.kernel

        def spatial(x: FloatArray) -> FloatArray:
            return np.real(base.spatial_samples(x) - self.eta_spatial(x))

        return KernelSpec(KernelKind.CUSTOM, base.m, spatial, self.residual_symbol, math.inf, f"{base.name}-eta")

    def partition_defect(self, xi: npt.ArrayLike) -> float:
        """max |sum_j q(xi/2^j) - 1| over nonzero grid points in the covered band."""
        xi = np.asarray(xi, dtype=np.float64)
        lo, hi = 2.0 ** (self.scales[0] + 1), 2.0 ** (self.scales[-1] - 1)
        band = (np.abs(xi) >= lo) & (np.abs(xi) <= hi)
        total = sum(lp_piece(xi[band], j) for j in self.scales)
        return float(np.max(np.abs(np.asarray(total) - 1.0), initial=0.0))

    def reconstruction_defect(self, xi: npt.ArrayLike) -> float:
        """max |eta^ + sum_j g_j^ - K^| on the covered band."""
        xi = np.asarray(xi, dtype=np.float64)
        lo, hi = 2.0 ** (self.scales[0] + 1), 2.0 ** (self.scales[-1] - 1)
        band = xi[(np.abs(xi) >= lo) & (np.abs(xi) <= hi)]
        total = self.eta_symbol(band) + sum(self.piece_symbol(j, band) for j in self.scales)
        return float(np.max(np.abs(total - self.kernel.symbol(band)), initial=0.0))

    def decay_constant(self, j: int, exponent: int) -> float:
        """sup_x |u_j(x)| 2^|j| (1 + |x|)^exponent with u_j(x) = 2^-j g_j(x / 2^j)."""
        x_max = 4.0 * max(8.0, 2.0 ** abs(j))
        x = np.linspace(-x_max, x_max, int(16 * x_max) + 1)
        nodes, weights = gauss_panels(0.5, 2.0, _panel_count(1.5, x_max))
        total = np.zeros(x.size, dtype=np.complex128)
        for sign in (1.0, -1.0):
            s_nodes = sign * nodes
            values = self.residual_symbol(2.0**j * s_nodes) * lp_piece(s_nodes, 0)
            total += fourier_quadrature(values, s_nodes, weights, x, sign=1.0)
        return float(np.max(np.abs(total) * 2.0 ** abs(j) * (1.0 + np.abs(x)) ** exponent))


def split_kernel(kernel: KernelSpec, scales: range | None = None, theta: ThetaProfile | None = None) -> KernelSplit:
    """Split K into its low-frequency part eta and Littlewood-Paley pieces.

    Raises
    ------
    UnsupportedKernelError
        If the symbol has no one-sided limits at 0.
    """
    plus, minus, defect = one_sided_limits(kernel)
    if defect > 1e-3:
        raise UnsupportedKernelError(f"{kernel.name}: symbol has no one-sided limits at 0 (defect {defect:.3g})")
    scales = scales if scales is not None else range(-12, 12)
    logger.debug("split %s: limits %s / %s", kernel.name, plus, minus)
    return KernelSplit(kernel, plus, minus, tuple(scales), theta or ThetaProfile.test())


# ----------------------------------------------------------------------
# Discrete transfer kernels
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteKernels:
    """H_{k,M}, A_{k,M}, S_{k,M}, O_{k,M} as exact rationals.

    Values of K_M are taken as the exact rationals of their doubles, so
    the identity H_k - H_k' = O_k - O_k' holds exactly.
    """

    k: int
    m: int

    @cached_property
    def _inner(self) -> dict[int, Fraction]:
        n = 2**self.k
        idx = np.arange(-n, n)
        vals = hilbert_profile(idx / n, self.m) / n
        return {int(i): Fraction(float(v)) for i, v in zip(idx, vals)}

    def H(self, i: int) -> Fraction:  # noqa: N802
        if -(2**self.k) <= i <= 2**self.k - 1:
            return self._inner[i]
        return Fraction(1, i)

    def A(self, i: int) -> Fraction:  # noqa: N802
        return self.H(i) if abs(i) <= 2**self.k else Fraction(0)

    def S(self, i: int) -> Fraction:  # noqa: N802
        return Fraction(1, i) if 0 < abs(i) <= 2**self.k else Fraction(0)

    def O(self, i: int) -> Fraction:  # noqa: N802,E743
        return self.A(i) - self.S(i)

    def weight_sum(self) -> float:
        """sum_n |A_{k,M}(n)|."""
        n = 2**self.k
        return float(sum(abs(self.A(i)) for i in range(-n, n + 1)))

    def difference_sum(self) -> float:
        """sum_n |A_{k,M}(n) - S_{k,M}(n)| (grows like log 2^k)."""
        n = 2**self.k
        return float(sum(abs(self.O(i)) for i in range(-n, n + 1)))

    def comparison_ratio(self, spread: int = 4, resolution: int = 16) -> float:
        """sup_y |H(floor y) - Dil_(2^k) K_M(y)| / majorant(y).

        Majorant 2^(-2k) for |y| <= 2^k and y^-2 outside.
        """
        n = 2**self.k
        y = np.arange(-spread * n * resolution, spread * n * resolution) / resolution
        floor_y = np.floor(y).astype(np.int64)
        h_vals = np.array([float(self.H(int(i))) for i in floor_y])
        dil = hilbert_profile(y / n, self.m) / n
        majorant = np.where(np.abs(y) <= n, 4.0**-self.k, 1.0 / np.maximum(y * y, 1.0))
        return float(np.max(np.abs(h_vals - dil) / majorant))


def discrete_kernels(k: int, m: int) -> DiscreteKernels:
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if m < 2:
        raise ParameterError(f"smoothing parameter M must be >= 2, got {m}")
    return DiscreteKernels(k, m)


def error_weight_sum(m: int, r: float) -> float:
    """sum_n |K_M(n/r)/r - 1_{0 <= n < [r]}/[r]| for the averaging family."""
    floor_r = int(math.floor(r))
    n = np.arange(-int(math.ceil(r / m)) - 1, floor_r + int(math.ceil(r / m)) + 2)
    smooth = average_profile(n / r, m) / r
    plain = np.where((n >= 0) & (n < floor_r), 1.0 / floor_r, 0.0)
    return float(np.sum(np.abs(smooth - plain)))


def error_weight_ledger(m: int, r_values: Sequence[float]) -> list[float]:
    """error_weight_sum at every r, for the lacunary experiment's ledger."""
    return [error_weight_sum(m, r) for r in r_values]


def series_weight_ledger(k: int, m: int) -> float:
    """sum_n |A_{k,M}(n)|, bounded uniformly in k."""
    return discrete_kernels(k, m).weight_sum()
