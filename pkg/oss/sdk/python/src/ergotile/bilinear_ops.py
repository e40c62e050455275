"""Continuous bilinear operators and discrete model sums.

B_k(f, g)(x) = int f(x + y) g(x - y) Dil_{d^k} K(y) dy is evaluated on the
periodic sample grid as the finite sum over y = m h of
f[n + m] g[n - m] K_k[m]. Compactly supported kernels use their spatial
samples; the others use the periodization obtained from the symbol,
K_k = ifft(K^(d^k xi)). There is no diagonalizing transform for this
twisted convolution, so the sum costs one pass over the sample grid per
kernel sample.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import numpy.typing as npt
import scipy.fft as sp_fft

from ergotile.config import parallel_map
from ergotile.exceptions import (
    InvariantViolation,
    KernelConditionError,
    ParameterError,
    PreconditionError,
    ScaleError,
)
from ergotile.kernels import KernelSpec, ThetaProfile, validate_kernel
from ergotile.selection import StoppingData, block_sums, root_sum_squares
from ergotile.signals import SampledFunction, weak_l1_norm
from ergotile.tiles import Multitile, rescale, rescale_coefficients
from ergotile.wavepackets import Band, PacketBank, bilinear_packet, natural_spectrum

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]

_BLOCK_ELEMENTS = 2**22


# ----------------------------------------------------------------------
# Scales
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleSequence:
    """u_1 < ... < u_J on the lattice d^k, d = 2^(1/n)."""

    u: tuple[int, ...]
    n: int = 1

    def __post_init__(self) -> None:
        if len(self.u) < 2:
            raise ParameterError(f"need at least two scales, got {self.u}")
        if any(x >= y for x, y in zip(self.u, self.u[1:])):
            raise ParameterError(f"scales must be strictly increasing, got {self.u}")
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")

    @property
    def J(self) -> int:  # noqa: N802
        return len(self.u)

    @property
    def d(self) -> float:
        return 2.0 ** (1.0 / self.n)

    @property
    def a(self) -> tuple[int, ...]:
        """a_j with a_j n <= u_j < (a_j + 1) n."""
        return tuple(u // self.n for u in self.u)

    @classmethod
    def consecutive(cls, start: int, count: int, n: int = 1) -> ScaleSequence:
        return cls(tuple(range(start, start + count)), n)


def resolvable_scales(a: int, b: int, n: int = 1) -> range:
    """k with 4 h <= 2^(k/n) <= P / 4 on the grid of window 2^(a+1) and step 2^-b."""
    return range((2 - b) * n, (a - 1) * n + 1)


def _check_resolvable(k: int, a: int, b: int, n: int) -> None:
    scales = resolvable_scales(a, b, n)
    if k not in scales:
        raise ScaleError(
            f"scale d^{k} (d = 2^(1/{n})) not resolvable for a={a}, b={b}; "
            f"allowed k in [{scales.start}, {scales.stop - 1}]"
        )


# ----------------------------------------------------------------------
# The operators B_k
# ----------------------------------------------------------------------


def _twisted_sum(
    f: ComplexArray, g: ComplexArray, offsets: npt.NDArray[np.int64], weights: ComplexArray
) -> ComplexArray:
    """out[n] = sum over offsets m of f[n + m] g[n - m] w[m], indices mod N."""
    size = f.size
    n = np.arange(size)
    out = np.zeros(size, dtype=np.complex128)
    block = max(1, _BLOCK_ELEMENTS // size)
    for start in range(0, offsets.size, block):
        m = offsets[start : start + block]
        w = weights[start : start + block]
        plus = f[(n[None, :] + m[:, None]) % size]
        minus = g[(n[None, :] - m[:, None]) % size]
        out += np.einsum("mn,mn,m->n", plus, minus, w)
    return out


def kernel_weights(kernel: KernelSpec, scale: float, a: int, b: int) -> tuple[npt.NDArray[np.int64], ComplexArray]:
    """Offsets m and weights h Dil_scale K(m h), periodized when K is not compactly supported."""
    step = 2.0**-b
    size = 2 ** (a + b + 1)
    period = 2.0 ** (a + 1)
    if math.isfinite(kernel.support) and scale * kernel.support < period / 2:
        reach = int(math.ceil(scale * kernel.support / step))
        offsets = np.arange(-reach, reach + 1, dtype=np.int64)
        values = kernel.spatial_samples(offsets * step / scale) * step / scale
        return offsets, values.astype(np.complex128)
    d = sp_fft.fftfreq(size, 1.0 / size)
    symbol = kernel.symbol(scale * d / period)
    return np.arange(size, dtype=np.int64), sp_fft.ifft(symbol)


class BilinearCache:
    """B_k(f, g) for one pair and one kernel, cached per k."""

    def __init__(self, f: SampledFunction, g: SampledFunction, kernel: KernelSpec, n: int = 1) -> None:
        if (f.a, f.b) != (g.a, g.b):
            raise ParameterError("f and g must share the sample grid")
        self.f = f
        self.g = g
        self.kernel = kernel
        self.n = n
        self._cache: dict[int, SampledFunction] = {}

    @property
    def d(self) -> float:
        return 2.0 ** (1.0 / self.n)

    def _compute(self, k: int) -> SampledFunction:
        _check_resolvable(k, self.f.a, self.f.b, self.n)
        offsets, weights = kernel_weights(self.kernel, self.d**k, self.f.a, self.f.b)
        return self.f.like(_twisted_sum(self.f.values, self.g.values, offsets, weights))

    def __call__(self, k: int) -> SampledFunction:
        if k not in self._cache:
            self._cache[k] = self._compute(k)
        return self._cache[k]

    def warm(self, ks: Iterable[int]) -> None:
        """Compute the missing B_k on the worker pool."""
        missing = [k for k in dict.fromkeys(ks) if k not in self._cache]
        for k, value in zip(missing, parallel_map(self._compute, missing)):
            self._cache[k] = value
        logger.debug("bilinear cache: %d scales computed", len(missing))


def bilinear_apply(f: SampledFunction, g: SampledFunction, kernel: KernelSpec, k: int, n: int = 1) -> SampledFunction:
    """B_k(f, g) with dilation d^k, d = 2^(1/n).

    Raises
    ------
    ScaleError
        If d^k is not resolvable at the sample resolution.
    """
    return BilinearCache(f, g, kernel, n)(k)


# ----------------------------------------------------------------------
# Bilinear maximal function
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MaximalResult:
    function: SampledFunction
    weak_l1: float
    norm_product: float

    @property
    def ratio(self) -> float:
        return self.weak_l1 / self.norm_product if self.norm_product else 0.0


def bilinear_maximal(f: SampledFunction, g: SampledFunction) -> MaximalResult:
    """sup over dyadic eps of (1/eps) int_{|y| < eps} |f(x + y) g(x - y)| dy.

    The y-integral is the trapezoid rule, so the endpoints y = +-eps carry
    half weight.
    """
    af, ag = np.abs(f.values), np.abs(g.values)
    size, step = af.size, f.step
    n = np.arange(size)
    radii = [2.0**k for k in range(1 - f.b, f.a)]
    running = af * ag
    best = np.zeros(size)
    m = 0
    for eps in radii:
        reach = int(round(eps / step))
        while m < reach - 1:
            m += 1
            running = running + af[(n + m) % size] * ag[(n - m) % size] + af[(n - m) % size] * ag[(n + m) % size]
        edge = af[(n + reach) % size] * ag[(n - reach) % size] + af[(n - reach) % size] * ag[(n + reach) % size]
        best = np.maximum(best, (running + 0.5 * edge) * step / eps)
    result = f.like(best)
    return MaximalResult(result, weak_l1_norm(best, step), f.l2_norm() * g.l2_norm())


# ----------------------------------------------------------------------
# Oscillation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class OscillationResult:
    function: SampledFunction
    weak_l1: float
    majorant: FloatArray | None = field(default=None, repr=False)
    splitting_constant: float = 1.0

    @property
    def values(self) -> FloatArray:
        return self.function.values.real


def _block_oscillation(values: Mapping[int, ComplexArray], u: Sequence[int]) -> FloatArray:
    total = np.zeros(next(iter(values.values())).size)
    for lo, hi in zip(u, u[1:]):
        end = values[hi]
        worst = np.zeros_like(total)
        for k in range(lo, hi):
            worst = np.maximum(worst, np.abs(values[k] - end))
        total += worst**2
    return np.sqrt(total)


def splitting_majorant(values: Mapping[int, ComplexArray], scales: ScaleSequence) -> FloatArray:
    """Integer-scale block oscillations of the n residue sequences plus their pairwise difference square functions.

    ``values[k]`` is the operator at scale 2^(k/n).
    """
    n = scales.n
    a = scales.a
    out = np.zeros(next(iter(values.values())).size)
    for i in range(n):
        shifted = {c: values[c * n + i] for c in range(a[0], a[-1] + 1)}
        out += _block_oscillation(shifted, a) if len(set(a)) > 1 else 0.0
    ks = range(a[0], a[-1] + 1)
    for i in range(n):
        for j in range(n):
            if i != j:
                out += np.sqrt(sum(np.abs(values[k * n + i] - values[k * n + j]) ** 2 for k in ks))
    return out


def oscillation_scales(scales: ScaleSequence) -> list[int]:
    """Every k the seminorm and (for n > 1) its majorant touch."""
    ks = set(range(scales.u[0], scales.u[-1] + 1))
    if scales.n > 1:
        a = scales.a
        ks |= {c * scales.n + i for c in range(a[0], a[-1] + 1) for i in range(scales.n)}
    return sorted(ks)


def oscillation(cache: BilinearCache, scales: ScaleSequence) -> OscillationResult:
    """(sum_j sup_{u_j <= k < u_{j+1}} |B_k - B_{u_{j+1}}|^2)^(1/2).

    Raises
    ------
    InvariantViolation
        If O exceeds 2 (J - 1)^(1/2) sup_k |B_k| or, for n > 1, sqrt(n)
        times the splitting majorant.
    """
    if scales.n != cache.n:
        raise ParameterError(f"scale lattice n={scales.n} differs from the cache (n={cache.n})")
    ks = oscillation_scales(scales)
    cache.warm(ks)
    values = {k: cache(k).values for k in ks}
    osc = _block_oscillation(values, scales.u)
    sup = np.max([np.abs(values[k]) for k in range(scales.u[0], scales.u[-1] + 1)], axis=0)
    if np.any(osc > 2.0 * math.sqrt(scales.J - 1) * sup * (1 + 1e-12) + 1e-15):
        raise InvariantViolation("oscillation exceeds the triangle-inequality bound")
    majorant = None
    constant = 1.0
    if scales.n > 1:
        majorant = splitting_majorant(values, scales)
        constant = math.sqrt(scales.n)
        if np.any(osc > constant * majorant * (1 + 1e-12) + 1e-15):
            raise InvariantViolation("oscillation exceeds sqrt(n) times the splitting majorant")
    fn = cache.f.like(osc)
    return OscillationResult(fn, weak_l1_norm(osc, cache.f.step), majorant, constant)


@dataclass(frozen=True)
class ScalingFit:
    j_values: tuple[int, ...]
    norms: tuple[float, ...]
    exponent: float


def j_scaling_experiment(
    pairs: Sequence[tuple[SampledFunction, SampledFunction]],
    kernel: KernelSpec,
    j_values: Sequence[int],
    start: int,
    n: int = 1,
) -> ScalingFit:
    """Worst normalized weak-L1(O) over the pairs for U = start, ..., start + J - 1, and its log-log slope."""
    norms = []
    caches = [BilinearCache(f, g, kernel, n) for f, g in pairs]
    for big_j in j_values:
        scales = ScaleSequence.consecutive(start, big_j, n)
        worst = 0.0
        for cache in caches:
            scale = cache.f.l2_norm() * cache.g.l2_norm()
            if scale == 0.0:
                continue
            worst = max(worst, oscillation(cache, scales).weak_l1 / scale)
        norms.append(worst)
    positive = [(j, v) for j, v in zip(j_values, norms) if v > 0.0]
    exponent = 0.0
    if len(positive) >= 2:
        xs, ys = np.log([p[0] for p in positive]), np.log([p[1] for p in positive])
        exponent = float(np.polyfit(xs, ys, 1)[0])
    logger.info("J-scaling: exponent %.3f over J=%s", exponent, list(j_values))
    return ScalingFit(tuple(j_values), tuple(norms), exponent)


# ----------------------------------------------------------------------
# Square function
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SquareFunctionResult:
    function: SampledFunction
    weak_l1: float
    scales: tuple[int, ...]
    tail_bound: float


def _spectral_moments(f: SampledFunction, g: SampledFunction) -> tuple[float, float]:
    """sum |F_p||G_q| |q - p| and sum over q != p of |F_p||G_q| / |q - p|."""
    fa = np.abs(f.spectrum())
    ga = np.abs(g.spectrum())
    corr = np.real(sp_fft.ifft(np.conj(sp_fft.fft(fa)) * sp_fft.fft(ga)))
    d = sp_fft.fftfreq(fa.size, 1.0 / fa.size)
    safe = np.where(d == 0, 1.0, np.abs(d))
    return float(np.sum(corr * np.abs(d))), float(np.sum(np.where(d == 0, 0.0, corr / safe)))


def square_function(
    f: SampledFunction, g: SampledFunction, kernel: KernelSpec, scales: Sequence[int] | None = None
) -> SquareFunctionResult:
    """(sum_k |B_k|^2)^(1/2) over resolvable dyadic k, with a pointwise bound on the omitted k.

    Raises
    ------
    KernelConditionError
        If K^ does not vanish at the origin.
    """
    report = validate_kernel(kernel)
    if not report.vanishing_holds:
        violation = max(abs(report.limit_plus), abs(report.limit_minus))
        raise KernelConditionError(f"{kernel.name}: |K^(xi)| <~ |xi| fails, K^(0+-) = {violation:.4g}", violation)
    ks = list(scales) if scales is not None else list(resolvable_scales(f.a, f.b))
    cache = BilinearCache(f, g, kernel)
    cache.warm(ks)
    total = np.sqrt(sum(np.abs(cache(k).values) ** 2 for k in ks))
    period = f.period
    near, far = _spectral_moments(f, g)
    # |B_k| <= P^-2 sum |F_p||G_q||K^(2^k (q - p) / P)|
    low = report.vanishing_constant * near / period**3 * 2.0 ** min(ks) * math.sqrt(1.0 / 3.0)
    high = report.constants[0] * far / period * 2.0 ** -max(ks) * math.sqrt(1.0 / 3.0)
    tail = math.hypot(low, high)
    return SquareFunctionResult(f.like(total), weak_l1_norm(total, f.step), tuple(ks), tail)


# ----------------------------------------------------------------------
# Model sums
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSum:
    blocks: tuple[SampledFunction, ...]
    values: FloatArray = field(repr=False)

    @property
    def function(self) -> SampledFunction:
        return self.blocks[0].like(self.values)


def _scale_partials(
    tiles: Iterable[Multitile],
    c1: Mapping[Multitile, complex],
    c2: Mapping[Multitile, complex],
    stopping: StoppingData,
    bank: PacketBank,
) -> list[dict[int, ComplexArray]]:
    """Per block, the contribution of each scale i."""
    grouped: dict[tuple[int, int], list[Multitile]] = {}
    for s in tiles:
        grouped.setdefault((stopping.block_of(s), s.i), []).append(s)
    keys = sorted(grouped)

    def combine(key: tuple[int, int]) -> ComplexArray:
        terms = ((bank.phi(s, 3), float(s.length) ** -0.5 * c1[s] * c2[s]) for s in grouped[key])
        return bank.combine(terms).values

    out: list[dict[int, ComplexArray]] = [{} for _ in range(stopping.blocks)]
    for (j, i), values in zip(keys, parallel_map(combine, keys)):
        out[j - 1][i] = values
    return out


def model_sum_from_coefficients(
    tiles: Sequence[Multitile],
    c1: Mapping[Multitile, complex],
    c2: Mapping[Multitile, complex],
    stopping: StoppingData,
    bank: PacketBank,
) -> ModelSum:
    """Blocks B_j and M(x) = (sum_j |B_j|^2)^(1/2); with stopping times, B_j keeps only |I_s| >= 2^kappa_j(x)."""
    if not stopping.kappas:
        blocks = block_sums(tiles, c1, c2, stopping, bank)
        return ModelSum(tuple(blocks), root_sum_squares(blocks))
    partials = _scale_partials(tiles, c1, c2, stopping, bank)
    zero = SampledFunction.zeros(bank.a, bank.b)
    blocks = []
    for j, by_scale in enumerate(partials):
        kappa = stopping.kappas[j]
        total = np.zeros(zero.size, dtype=np.complex128)
        for i, values in by_scale.items():
            total += np.where(kappa <= i, values, 0.0)
        blocks.append(zero.like(total))
    return ModelSum(tuple(blocks), root_sum_squares(blocks))


def model_sum(
    tiles: Sequence[Multitile],
    f: SampledFunction,
    g: SampledFunction,
    stopping: StoppingData,
    bank: PacketBank,
) -> ModelSum:
    """M_S(f, g) with c_1 = <f, phi_{s,1}> and c_2 = <g, phi_{s,2}>."""
    c1 = bank.coefficients(f, tiles, 1)
    c2 = bank.coefficients(g, tiles, 2)
    return model_sum_from_coefficients(tiles, c1, c2, stopping, bank)


@dataclass(frozen=True)
class SupFormResult:
    sup_form: FloatArray = field(repr=False)
    brute_force: FloatArray = field(repr=False)
    combinations: int

    @property
    def defect(self) -> float:
        return float(np.max(np.abs(self.sup_form - self.brute_force), initial=0.0))


def model_sum_sup_form(
    tiles: Sequence[Multitile],
    c1: Mapping[Multitile, complex],
    c2: Mapping[Multitile, complex],
    stopping: StoppingData,
    bank: PacketBank,
    max_combinations: int = 4096,
) -> SupFormResult:
    """(sum_j sup_{u_j <= kappa < u_{j+1}} |B_j^kappa|^2)^(1/2) against the pointwise max over constant stopping times.

    Raises
    ------
    ParameterError
        If the stopping-time grid has more than ``max_combinations`` points.
    InvariantViolation
        If the two forms differ by more than 1e-8.
    """
    partials = _scale_partials(tiles, c1, c2, stopping, bank)
    size = 2 ** (bank.a + bank.b + 1)
    ranges = [range(stopping.u[j], stopping.u[j + 1]) for j in range(stopping.blocks)]
    combinations = math.prod(len(r) for r in ranges)
    if combinations > max_combinations:
        raise ParameterError(f"{combinations} stopping-time combinations exceed {max_combinations}")
    suffix: list[dict[int, ComplexArray]] = []
    for j, by_scale in enumerate(partials):
        running = np.zeros(size, dtype=np.complex128)
        table: dict[int, ComplexArray] = {}
        for kappa in reversed(ranges[j]):
            running = running + by_scale.get(kappa, 0.0)
            table[kappa] = running
        suffix.append(table)
    sup = np.sqrt(sum(np.max([np.abs(v) ** 2 for v in table.values()], axis=0) for table in suffix))
    brute = np.zeros(size)
    for choice in itertools.product(*ranges):
        value = np.sqrt(sum(np.abs(suffix[j][kappa]) ** 2 for j, kappa in enumerate(choice)))
        brute = np.maximum(brute, value)
    result = SupFormResult(sup, brute, combinations)
    if result.defect > 1e-8 * max(1.0, float(np.max(sup, initial=0.0))):
        raise InvariantViolation(f"sup form and stopping-time form differ by {result.defect:.3g}")
    return result


# ----------------------------------------------------------------------
# Frequency-truncated operator at one scale
# ----------------------------------------------------------------------


def truncated_operator(
    f: SampledFunction, g: SampledFunction, i: int, theta: ThetaProfile, threshold: float = 1e-13
) -> SampledFunction:
    """Pi_i(f, g)^(xi) = int f^(eta) g^(xi - eta) theta_i(2 eta - xi) d eta on the sample grid.

    Spectral samples below ``threshold`` times the maximum are skipped.
    """
    F = natural_spectrum(f)
    G = natural_spectrum(g)
    size = F.size
    period = f.period
    k = sp_fft.fftfreq(size, 1.0 / size).astype(np.int64)
    p = np.flatnonzero(np.abs(F) > threshold * np.max(np.abs(F), initial=0.0))
    q = np.flatnonzero(np.abs(G) > threshold * np.max(np.abs(G), initial=0.0))
    out = np.zeros(size, dtype=np.complex128)
    if p.size and q.size:
        eta = k[p][:, None]
        zeta = k[q][None, :]
        weights = theta.theta_i(i, (eta - zeta) / period)
        np.add.at(out, (eta + zeta) % size, F[p][:, None] * G[q][None, :] * weights / period)
    return SampledFunction.from_spectrum(sp_fft.fftshift(out), f.a, f.b)


def packet_bridge(
    i: int, m: tuple[int, int], l: tuple[int, int], theta: ThetaProfile, a: int, b: int  # noqa: E741
) -> float:
    """Relative L2 distance between Pi_i(psi_1, psi_2) and 2^(-i/2) phi."""
    bank = PacketBank(theta, a, b)
    f = bank.psi(i, m[0], l[0]).function()
    g = bank.psi(i, m[1], l[1]).function()
    direct = truncated_operator(f, g, i, theta)
    packet = bilinear_packet(i, m, l, theta, a, b).samples() * 2.0 ** (-i / 2)
    norm = packet.l2_norm()
    if norm == 0.0:
        return direct.l2_norm()
    return (direct - packet).l2_norm() / norm


# ----------------------------------------------------------------------
# Discretization bridge and scale covariance
# ----------------------------------------------------------------------


def _frequency_extent(band: Band) -> tuple[float, float] | None:
    live = band.indices[np.abs(band.values) > 0.0]
    if live.size == 0:
        return None
    return float(live.min()) / band.period, float(live.max()) / band.period


def _meets(lo: float, hi: float, inner: float, outer: float) -> bool:
    """[lo, hi] against the open annulus inner < |x| < outer."""
    return (hi > inner and lo < outer) or (lo < -inner and hi > -outer)


def cross_interactions(tiles: Sequence[Multitile], bank: PacketBank) -> list[tuple[Multitile, Multitile, int]]:
    """Triples (s, t, i) where theta_i reaches supp phi^_{s,1} - supp phi^_{t,2}, other than t = s at i = i_s."""
    scales = sorted({s.i for s in tiles})
    first = {s: _frequency_extent(bank.phi(s, 1)) for s in tiles}
    second = {s: _frequency_extent(bank.phi(s, 2)) for s in tiles}
    out: list[tuple[Multitile, Multitile, int]] = []
    for s in tiles:
        for t in tiles:
            left, right = first[s], second[t]
            if left is None or right is None:
                continue
            lo, hi = left[0] - right[1], left[1] - right[0]
            for i in scales:
                if s == t and i == s.i:
                    continue
                if _meets(lo, hi, *bank.theta.annulus(i)):
                    out.append((s, t, i))
    return out


def two_scale_tiles(
    e: int, fine: int, gap: int, bank: PacketBank, per_scale: int = 1, m: int = 0, max_steps: int = 10_000
) -> list[Multitile]:
    """Tiles on the scales ``fine + gap`` and ``fine`` that pair only with themselves.

    Coarse tiles are placed first; each tile takes the lowest l_1 in 5 Z
    above the previous one for which :func:`cross_interactions` stays empty.

    Raises
    ------
    ParameterError
        If ``gap`` or ``per_scale`` is below 1.
    PreconditionError
        If a tile finds no placement within ``max_steps`` frequency steps.
    """
    if gap < 1 or per_scale < 1:
        raise ParameterError(f"need gap >= 1 and per_scale >= 1, got {gap} and {per_scale}")
    placed: list[Multitile] = []
    l1 = 0
    for i in [fine + gap] * per_scale + [fine] * per_scale:
        for _ in range(max_steps):
            candidate = Multitile(i, m, l1, e)
            l1 += 5
            if not cross_interactions([*placed, candidate], bank):
                placed.append(candidate)
                break
        else:
            raise PreconditionError(f"no isolated placement at scale {i} within {max_steps} steps")
    return placed


@dataclass(frozen=True)
class BridgeResult:
    scales: tuple[int, ...]
    relative_error: float
    model_norm: float


def discretization_bridge(
    tiles: Sequence[Multitile],
    c1: Mapping[Multitile, complex],
    c2: Mapping[Multitile, complex],
    bank: PacketBank,
    tolerance: float = 1e-3,
) -> BridgeResult:
    """sum over the tile scales of Pi_i(f, g) against the model sum of the tiles.

    f = sum c1 phi_{s,1} and g = sum c2 phi_{s,2}. Since Pi_i(psi_{s,1},
    psi_{s,2}) = |I_s|^(-1/2) phi_{s,3}, the two agree once no theta_i
    pairs packets of different tiles.

    Raises
    ------
    PreconditionError
        If the tiles interact across each other, or a packet reaches the
        Nyquist frequency of the bank.
    InvariantViolation
        If the relative L2 distance exceeds ``tolerance``.
    """
    if not tiles:
        raise PreconditionError("the bridge needs at least one tile")
    crossing = cross_interactions(tiles, bank)
    if crossing:
        s, t, i = crossing[0]
        raise PreconditionError(f"theta_{i} pairs {s} with {t} ({len(crossing)} crossings)")
    nyquist = 2.0 ** (bank.b - 1)
    for s in tiles:
        for j in (1, 2, 3):
            extent = _frequency_extent(bank.phi(s, j))
            if extent is not None and max(abs(extent[0]), abs(extent[1])) >= nyquist:
                raise PreconditionError(f"phi_{{s,{j}}} of {s} reaches the Nyquist frequency {nyquist:g}")
    f = bank.combine((bank.phi(s, 1), c1[s]) for s in tiles)
    g = bank.combine((bank.phi(s, 2), c2[s]) for s in tiles)
    scales = sorted({s.i for s in tiles})
    parts = parallel_map(lambda i: truncated_operator(f, g, i, bank.theta), scales)
    direct = parts[0]
    for part in parts[1:]:
        direct = direct + part
    stopping = StoppingData.single((scales[0], scales[-1] + 1), bank.a, bank.b)
    model = model_sum_from_coefficients(tiles, c1, c2, stopping, bank).blocks[0]
    norm = model.l2_norm()
    error = (direct - model).l2_norm() / norm if norm > 0.0 else direct.l2_norm()
    logger.debug("discretization bridge over scales %s: relative error %.3g", scales, error)
    if error > tolerance:
        raise InvariantViolation(f"truncated operator and model sum differ by {error:.3g} (relative L2)")
    return BridgeResult(tuple(scales), error, norm)


def _relative_defect(got: npt.ArrayLike, expected: npt.ArrayLike) -> float:
    x = np.asarray(got, dtype=np.complex128)
    y = np.asarray(expected, dtype=np.complex128)
    scale = float(np.max(np.abs(y), initial=0.0))
    diff = float(np.max(np.abs(x - y), initial=0.0))
    return diff / scale if scale > 0.0 else diff


@dataclass(frozen=True)
class CovarianceResult:
    k: int
    model_defect: float
    coefficient_defect: float
    operator_defects: dict[int, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.model_defect, self.coefficient_defect, *self.operator_defects.values())


def scale_covariance(
    tiles: Sequence[Multitile],
    f: SampledFunction,
    g: SampledFunction,
    stopping: StoppingData,
    theta: ThetaProfile,
    k: int,
    kernel: KernelSpec | None = None,
    operator_scales: Iterable[int] = (),
    tolerance: float = 1e-9,
) -> CovarianceResult:
    """Dilation by 2^k against the rescaled tiles s(k).

    On the regridded window the map x -> 2^k x keeps the sample index, and

        M_{S(k)}(Dil^2 f, Dil^2 g)(2^k x) = 2^-k M_S(f, g)(x),
        <Dil^inf f, phi_{s(k),1}> = 2^(k/2) <f, phi_{s,1}>,
        B_{j+k}(Dil^2 f, Dil^2 g)(2^k x) = 2^-k B_j(f, g)(x),

    each exact up to rounding.

    Raises
    ------
    InvariantViolation
        If any relative defect exceeds ``tolerance``.
    """
    bank = PacketBank(theta, f.a, f.b)
    moved = PacketBank(theta, f.a + k, f.b - k)
    scaled_tiles = rescale(tiles, k)
    f2, g2 = f.regrid(k), g.regrid(k)
    moved_stopping = StoppingData(
        tuple(u + k for u in stopping.u),
        tuple(w.regrid(k, math.inf) for w in stopping.weights),
        tuple(kappa + k for kappa in stopping.kappas),
    )
    base = model_sum(tiles, f, g, stopping, bank).values
    dilated = model_sum(scaled_tiles, f2, g2, moved_stopping, moved).values
    model_defect = _relative_defect(dilated, 2.0**-k * base)

    expected = rescale_coefficients(bank.coefficients(f, tiles, 1), k)
    got = moved.coefficients(f.regrid(k, math.inf), scaled_tiles, 1)
    coefficient_defect = _relative_defect([got[s] for s in scaled_tiles], [expected[s] for s in scaled_tiles])

    operator_defects: dict[int, float] = {}
    if kernel is not None:
        for j in operator_scales:
            original = bilinear_apply(f, g, kernel, j).values
            shifted = bilinear_apply(f2, g2, kernel, j + k).values
            operator_defects[j] = _relative_defect(shifted, 2.0**-k * original)
    result = CovarianceResult(k, model_defect, coefficient_defect, operator_defects)
    logger.debug("scale covariance k=%d: worst defect %.3g", k, result.worst)
    if result.worst > tolerance:
        raise InvariantViolation(f"dilation by 2^{k} breaks scale covariance: defect {result.worst:.3g}")
    return result
