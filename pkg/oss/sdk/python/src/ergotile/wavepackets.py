"""Wave packets: the window, per-scale frame expansions and bilinear packets.

The window has |psi^(xi)|^2 = s(5 xi) for the partition bump ``s`` on
[0, 2], so psi^ lives on [0, 2/5] and its 1/5-translates square-sum to 1.
Packets are built directly on the frequency grid:

    psi^_{i,m,l}(xi) = 2^(i/2) psi^(2^i xi - l/5) exp(-2 pi i m 2^i xi),

that is psi_{i,m,l}(x) = 2^(-i/2) psi(2^-i x - m) exp(2 pi i (2^-i x - m) l/5).
A packet is stored as a :class:`Band`: the few frequency indices where it
is nonzero and its values there. Indices are kept unwrapped; reduce them
modulo the sample count to address a spectrum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import numpy.typing as npt
from scipy import fft as sp_fft

from ergotile.exceptions import InvariantViolation, PreconditionError, RepresentationError, ResolutionError
from ergotile.grids import DyadicInterval, chi_weight
from ergotile.kernels import ThetaProfile, gauss_panels
from ergotile.signals import DEFAULT_A, DEFAULT_B, SampledFunction, partition_bump, raised_step
from ergotile.tiles import Multitile, TileSystem, Tree, is_lacunary

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

SHIFT = 5
SUPPORT = 2.0 / SHIFT


# ----------------------------------------------------------------------
# Window
# ----------------------------------------------------------------------


def window_hat(xi: npt.ArrayLike) -> FloatArray:
    """psi^(xi) = s(5 xi)^(1/2), zero phase."""
    return np.sqrt(partition_bump(SHIFT * np.asarray(xi, dtype=np.float64)))


@dataclass(frozen=True)
class Window:
    """The analysing window together with its measured invariants."""

    partition_error: float
    external_energy: float
    norm_squared: float

    def hat(self, xi: npt.ArrayLike) -> FloatArray:
        return window_hat(xi)

    def samples(self, a: int = DEFAULT_A, b: int = DEFAULT_B) -> SampledFunction:
        grid = SampledFunction.zeros(a, b)
        return SampledFunction.from_spectrum(window_hat(grid.xi), a, b)


def partition_sum(xi: npt.ArrayLike) -> FloatArray:
    """sum_l |psi^(xi - l/5)|^2 over the translates that can be nonzero."""
    xi = np.asarray(xi, dtype=np.float64)
    base = np.floor(SHIFT * xi)
    total = np.zeros_like(xi)
    for offset in (-2, -1, 0, 1):
        total += window_hat(xi - (base + offset) / SHIFT) ** 2
    return total


def make_window(resolution: int = 2**14) -> Window:
    xi = np.linspace(-2.0, 2.0, resolution, endpoint=False)
    partition_error = float(np.max(np.abs(partition_sum(xi) - 1.0)))
    wide = np.linspace(-1.0, 1.0, resolution, endpoint=False)
    energy = window_hat(wide) ** 2
    outside = (wide < 0.0) | (wide > SUPPORT)
    external = float(np.sum(energy[outside]) / np.sum(energy))
    nodes, weights = gauss_panels(0.0, SUPPORT, 64)
    norm_squared = float(np.sum(weights * window_hat(nodes) ** 2))
    window = Window(partition_error, external, norm_squared)
    logger.debug("window: partition error %.3g, norm^2 %.12f", partition_error, norm_squared)
    return window


# ----------------------------------------------------------------------
# Bands
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Band:
    """Frequency samples of a packet at unwrapped indices ``k`` (xi = k / P)."""

    a: int
    b: int
    indices: IntArray
    values: ComplexArray

    @property
    def size(self) -> int:
        return 2 ** (self.a + self.b + 1)

    @property
    def period(self) -> float:
        return 2.0 ** (self.a + 1)

    def natural(self) -> IntArray:
        return np.mod(self.indices, self.size)

    def spectrum(self) -> ComplexArray:
        """Full spectrum in centered order."""
        natural = np.zeros(self.size, dtype=np.complex128)
        np.add.at(natural, self.natural(), self.values)
        return sp_fft.fftshift(natural)

    def function(self) -> SampledFunction:
        return SampledFunction.from_spectrum(self.spectrum(), self.a, self.b)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) / self.period))

    def pair(self, natural_spectrum: ComplexArray) -> complex:
        """<F, packet> for F given by its spectrum in natural order."""
        return complex(np.sum(natural_spectrum[self.natural()] * np.conj(self.values)) / self.period)

    def energy_outside(self, lo: float, hi: float) -> float:
        """Relative energy at frequencies outside [lo, hi]."""
        xi = self.indices / self.period
        energy = np.abs(self.values) ** 2
        total = float(np.sum(energy))
        if total == 0.0:
            return 0.0
        return float(np.sum(energy[(xi < lo) | (xi > hi)]) / total)

    def scaled(self, factor: complex) -> Band:
        return Band(self.a, self.b, self.indices, self.values * factor)


def natural_spectrum(f: SampledFunction) -> ComplexArray:
    """Spectrum of ``f`` indexed by k mod N."""
    return sp_fft.ifftshift(f.spectrum())


def resolution_band(a: int, b: int) -> tuple[int, int]:
    """Scales i for which the frame expansion is exact on the sample grid."""
    return 1 - b, a - 1


def _check_scale(i: int, a: int, b: int) -> None:
    lo, hi = resolution_band(a, b)
    if not lo <= i <= hi:
        raise ResolutionError(f"scale {i} outside the resolvable band [{lo}, {hi}] for a={a}, b={b}")


def _band_indices(i: int, l: npt.ArrayLike, a: int) -> tuple[IntArray, FloatArray]:
    """Unwrapped indices covering psi^(2^i xi - l/5) and the window values there."""
    q = 2 ** (a + 1 - i)
    ls = np.atleast_1d(np.asarray(l, dtype=np.int64))
    width = (2 * q) // SHIFT + 3
    start = np.floor_divide(ls * q, SHIFT)
    k = start[:, None] + np.arange(width, dtype=np.int64)[None, :]
    u = k / q - ls[:, None] / SHIFT
    return k, window_hat(u)


def packet_band(i: int, m: int, l: int, a: int = DEFAULT_A, b: int = DEFAULT_B) -> Band:
    """psi_{i,m,l} as a band."""
    k, hat = _band_indices(i, l, a)
    q = 2 ** (a + 1 - i)
    phase = np.exp(-2j * np.pi * ((m * k[0]) % q) / q)
    return Band(a, b, k[0], 2.0 ** (i / 2) * hat[0] * phase)


@dataclass(frozen=True)
class Packet:
    """psi_{i,m,l} with its Heisenberg box and measured invariants."""

    i: int
    m: int
    l: int  # noqa: E741
    band: Band = field(repr=False)

    @property
    def interval(self) -> DyadicInterval:
        return DyadicInterval(self.i, self.m)

    @property
    def frequency(self) -> tuple[float, float]:
        lo = self.l / SHIFT * 2.0**-self.i
        return lo, lo + 2.0**-self.i

    def samples(self) -> SampledFunction:
        return self.band.function()

    def external_energy(self) -> float:
        return self.band.energy_outside(*self.frequency)

    def decay_constant(self, order: int = 4) -> float:
        """max |psi_{i,m,l}(x)| 2^(i/2) / chi_I(x)^order over the window."""
        f = self.samples()
        weight = chi_weight(self.interval, f.x, order)
        return float(np.max(f.modulus() * 2.0 ** (self.i / 2) / weight))


def make_packet(i: int, m: int, l: int, a: int = DEFAULT_A, b: int = DEFAULT_B) -> Packet:
    return Packet(i, m, l, packet_band(i, m, l, a, b))


# ----------------------------------------------------------------------
# Frame expansion at one scale
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PacketCoefficients:
    """<f, psi_{i,m,l}> on a full period of (m, l).

    ``values[p, q]`` belongs to ``l = l_values[p]`` and ``m = q - Q/2``.
    """

    i: int
    a: int
    b: int
    l_values: IntArray
    values: ComplexArray

    @property
    def m_values(self) -> IntArray:
        q = self.values.shape[1]
        return np.arange(-(q // 2), q - q // 2, dtype=np.int64)

    def get(self, m: int, l: int) -> complex:  # noqa: E741
        q = self.values.shape[1]
        row = int(l - self.l_values[0])
        return complex(self.values[row, m + q // 2])

    def as_dict(self, threshold: float = 0.0) -> dict[tuple[int, int], complex]:
        out: dict[tuple[int, int], complex] = {}
        for p, l in enumerate(self.l_values):
            for q, m in enumerate(self.m_values):
                value = complex(self.values[p, q])
                if abs(value) > threshold:
                    out[(int(m), int(l))] = value
        return out


def _l_period(i: int, b: int) -> IntArray:
    count = SHIFT * 2 ** (i + b)
    return np.arange(-count // 2, count - count // 2, dtype=np.int64)


def analyze(f: SampledFunction, i: int) -> PacketCoefficients:
    """All coefficients <f, psi_{i,m,l}> with (m, l) over one period of the sample grid.

    Raises
    ------
    ResolutionError
        If ``i`` is outside :func:`resolution_band`.
    """
    _check_scale(i, f.a, f.b)
    q = 2 ** (f.a + 1 - i)
    ls = _l_period(i, f.b)
    k, hat = _band_indices(i, ls, f.a)
    spec = natural_spectrum(f)
    folded = np.zeros((ls.size, q), dtype=np.complex128)
    rows = np.arange(ls.size)[:, None]
    folded[rows, np.mod(k, q)] = spec[np.mod(k, f.size)] * 2.0 ** (i / 2) * hat
    coeffs = 2.0**-i * sp_fft.ifft(folded, axis=1)
    return PacketCoefficients(i, f.a, f.b, ls, sp_fft.fftshift(coeffs, axes=1))


def synthesize(coeffs: PacketCoefficients) -> SampledFunction:
    """sum over (m, l) of c_{m,l} psi_{i,m,l}."""
    i, a, b = coeffs.i, coeffs.a, coeffs.b
    _check_scale(i, a, b)
    size = 2 ** (a + b + 1)
    q = 2 ** (a + 1 - i)
    k, hat = _band_indices(i, coeffs.l_values, a)
    summed = sp_fft.fft(sp_fft.ifftshift(coeffs.values, axes=1), axis=1)
    rows = np.arange(coeffs.l_values.size)[:, None]
    contrib = 2.0 ** (i / 2) * hat * summed[rows, np.mod(k, q)]
    natural = np.zeros(size, dtype=np.complex128)
    np.add.at(natural, np.mod(k, size).ravel(), contrib.ravel())
    return SampledFunction.from_spectrum(sp_fft.fftshift(natural), a, b)


def round_trip_error(f: SampledFunction, i: int) -> float:
    """Relative L2 error of synthesize(analyze(f, i))."""
    norm = f.l2_norm()
    if norm == 0.0:
        return 0.0
    return (synthesize(analyze(f, i)) - f).l2_norm() / norm


# ----------------------------------------------------------------------
# Bilinear packets
# ----------------------------------------------------------------------


def nonvanishing(e: int, theta: ThetaProfile) -> bool:
    """Whether theta_i can meet the difference of the two packet supports."""
    lo, hi = abs(e) / SHIFT - SUPPORT, abs(e) / SHIFT + SUPPORT
    return hi > theta.low / 2 and lo < theta.high


def _bilinear_values(
    i: int, d: int, l1: int, l2: int, theta: ThetaProfile, a: int, b: int
) -> tuple[IntArray, ComplexArray]:
    first = packet_band(i, d, l1, a, b)
    second = packet_band(i, 0, l2, a, b)
    period = 2.0 ** (a + 1)
    diff = (first.indices[:, None] - second.indices[None, :]) / period
    weights = first.values[:, None] * second.values[None, :] * theta.theta_i(i, diff)
    total = first.indices[:, None] + second.indices[None, :]
    base = int(total.min())
    out = np.zeros(int(total.max()) - base + 1, dtype=np.complex128)
    np.add.at(out, (total - base).ravel(), weights.ravel())
    return np.arange(base, base + out.size, dtype=np.int64), out * 2.0 ** (i / 2) / period


@dataclass(frozen=True)
class BilinearPacket:
    """phi_{i,(m1,m2),(l1,l2)}; its frequency box uses l3 = l1 + l2."""

    i: int
    m1: int
    m2: int
    l1: int
    l2: int
    band: Band = field(repr=False)

    @property
    def l3(self) -> int:
        return self.l1 + self.l2

    @property
    def interval(self) -> DyadicInterval:
        return DyadicInterval(self.i, math.floor((self.m1 + self.m2) / 2))

    @property
    def frequency(self) -> tuple[float, float]:
        lo = self.l3 / SHIFT * 2.0**-self.i
        return lo, lo + 2.0**-self.i

    def samples(self) -> SampledFunction:
        return self.band.function()

    def external_energy(self) -> float:
        return self.band.energy_outside(*self.frequency)

    def l2_norm(self) -> float:
        return self.band.l2_norm()


def bilinear_packet(
    i: int,
    m: tuple[int, int],
    l: tuple[int, int],  # noqa: E741
    theta: ThetaProfile,
    a: int = DEFAULT_A,
    b: int = DEFAULT_B,
) -> BilinearPacket:
    """phi^(xi) = 2^(i/2) integral psi^_1(eta) psi^_2(xi - eta) theta_i(2 eta - xi) d eta.

    The integral is the discrete convolution of the two packet bands; the
    (m1, m2) dependence factors into a translation by m2 2^i and the
    relative offset m1 - m2.
    """
    _check_scale(i, a, b)
    m1, m2 = m
    k, values = _bilinear_values(i, m1 - m2, l[0], l[1], theta, a, b)
    q = 2 ** (a + 1 - i)
    values = values * np.exp(-2j * np.pi * ((m2 * k) % q) / q)
    return BilinearPacket(i, m1, m2, l[0], l[1], Band(a, b, k, values))


@dataclass(frozen=True)
class DecayProfile:
    """||phi|| against |m1 - m2| and the fitted constants per decay order."""

    distances: tuple[int, ...]
    ratios: tuple[float, ...]
    constants: dict[int, float]

    @property
    def decreasing(self) -> bool:
        return all(x >= y for x, y in zip(self.ratios, self.ratios[1:]))


def bilinear_decay(
    i: int,
    l: tuple[int, int],  # noqa: E741
    theta: ThetaProfile,
    distances: Iterable[int] = (0, 1, 2, 4, 8, 16),
    orders: Iterable[int] = (2, 4),
    a: int = DEFAULT_A,
    b: int = DEFAULT_B,
) -> DecayProfile:
    """Relative norms ||phi_{(d,0)}|| / ||phi_{(0,0)}|| and C_M = max ratio (1+d)^M."""
    dist = tuple(sorted(set(distances) | {0}))
    reference = bilinear_packet(i, (0, 0), l, theta, a, b).l2_norm()
    if reference == 0.0:
        return DecayProfile(dist, tuple(0.0 for _ in dist), {order: 0.0 for order in orders})
    ratios = tuple(bilinear_packet(i, (d, 0), l, theta, a, b).l2_norm() / reference for d in dist)
    constants = {order: max(r * (1 + d) ** order for d, r in zip(dist, ratios)) for order in orders}
    return DecayProfile(dist, ratios, constants)


# ----------------------------------------------------------------------
# Packets attached to multitiles
# ----------------------------------------------------------------------


class PacketBank:
    """Caches the packets phi_{s,1}, phi_{s,2}, phi_{s,3} and psi_{s,3} of multitiles."""

    def __init__(self, theta: ThetaProfile, a: int = DEFAULT_A, b: int = DEFAULT_B) -> None:
        self.theta = theta
        self.a = a
        self.b = b
        self._bilinear: dict[tuple[int, int, int], tuple[IntArray, ComplexArray]] = {}

    def psi(self, i: int, m: int, l: int) -> Band:  # noqa: E741
        _check_scale(i, self.a, self.b)
        return packet_band(i, m, l, self.a, self.b)

    def phi(self, s: Multitile, j: int) -> Band:
        if j == 1:
            return self.psi(s.i, s.m, s.l1)
        if j == 2:
            return self.psi(s.i, s.m, s.l2)
        key = (s.i, s.l1, s.l2)
        if key not in self._bilinear:
            _check_scale(s.i, self.a, self.b)
            self._bilinear[key] = _bilinear_values(s.i, 0, s.l1, s.l2, self.theta, self.a, self.b)
        k, values = self._bilinear[key]
        q = 2 ** (self.a + 1 - s.i)
        return Band(self.a, self.b, k, values * np.exp(-2j * np.pi * ((s.m * k) % q) / q))

    def psi3(self, s: Multitile) -> Band:
        return self.psi(s.i, s.m, s.l3)

    def coefficients(self, f: SampledFunction, tiles: Iterable[Multitile], j: int) -> dict[Multitile, complex]:
        """<f, phi_{s,j}> for every tile."""
        spec = natural_spectrum(f)
        return {s: self.phi(s, j).pair(spec) for s in tiles}

    def combine(self, terms: Iterable[tuple[Band, complex]]) -> SampledFunction:
        """sum of c * packet over (band, c) pairs."""
        size = 2 ** (self.a + self.b + 1)
        natural = np.zeros(size, dtype=np.complex128)
        for band, c in terms:
            np.add.at(natural, band.natural(), c * band.values)
        return SampledFunction.from_spectrum(sp_fft.fftshift(natural), self.a, self.b)


# ----------------------------------------------------------------------
# Truncation of a lacunary tree by a frequency multiplier
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ZetaWindow:
    """zeta(u) = 1 on |u| <= inner, 0 on |u| >= outer."""

    inner: float
    outer: float

    @classmethod
    def for_gap(cls, e: int) -> ZetaWindow:
        inner = 2.0 * abs(e) / SHIFT + 6.0
        return cls(inner, 2.0 * inner)

    def __call__(self, u: npt.ArrayLike) -> FloatArray:
        a = np.abs(np.asarray(u, dtype=np.float64))
        return 1.0 - raised_step((a - self.inner) / (self.outer - self.inner))


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    direct: SampledFunction
    multiplier: SampledFunction
    relative_error: float


def tree_projection(
    tree: Tree,
    coefficients: Mapping[Multitile, complex],
    k: int,
    system: TileSystem,
    bank: PacketBank,
    zeta: ZetaWindow | None = None,
    tolerance: float = 1e-6,
) -> ProjectionResult:
    """sum over |I_s| >= 2^k of c_s psi_{s,3}, also written as a multiplier.

    The multiplier form applies zeta(2^k (xi - c(omega_{T,3}))) to the full
    sum. Every packet must sit where zeta is identically 1 (kept scales) or
    identically 0 (dropped scales).

    Raises
    ------
    PreconditionError
        If the tree is not 3-lacunary.
    RepresentationError
        If some packet straddles the transition band of zeta.
    InvariantViolation
        If the two forms differ by more than ``tolerance``.
    """
    if not is_lacunary(tree, 3, system):
        raise PreconditionError(f"tree with top {tree.top} is not 3-lacunary")
    window = zeta or ZetaWindow.for_gap(system.e)
    members = list(tree.members)
    kept = [s for s in members if s.i >= k]
    direct = bank.combine((bank.psi3(s), coefficients[s]) for s in kept)
    if not kept:
        return ProjectionResult(direct, direct, 0.0)
    center = float(tree.top.omega(3).center)
    scale = 2.0**k
    for s in members:
        lo = s.l3 / SHIFT * 2.0**-s.i
        hi = lo + SUPPORT * 2.0**-s.i
        u_lo, u_hi = scale * (lo - center), scale * (hi - center)
        nearest = 0.0 if u_lo <= 0.0 <= u_hi else min(abs(u_lo), abs(u_hi))
        farthest = max(abs(u_lo), abs(u_hi))
        if s.i >= k and farthest > window.inner:
            raise RepresentationError(f"{s} reaches |u| = {farthest:.3g} beyond the plateau {window.inner:g}")
        if s.i < k and nearest < window.outer:
            raise RepresentationError(f"{s} reaches |u| = {nearest:.3g} inside the cutoff {window.outer:g}")
    full = bank.combine((bank.psi3(s), coefficients[s]) for s in members)
    spec = full.spectrum() * window(scale * (full.xi - center))
    multiplier = SampledFunction.from_spectrum(spec, full.a, full.b)
    norm = direct.l2_norm()
    error = (multiplier - direct).l2_norm() / norm if norm else (multiplier - direct).l2_norm()
    if error > tolerance:
        raise InvariantViolation(f"multiplier form differs from the direct sum by {error:.3g}")
    return ProjectionResult(direct, multiplier, error)
