"""Dynamical systems, bilinear ergodic averages and series, jump counting and
the transfer from the line to the integers.

Rotation orbits are computed in 96-bit fixed point: the rotation number is a
double, hence a dyadic rational that the fixed-point lattice represents
exactly, so x + n alpha mod 1 carries only the final rounding to a double.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import numpy.typing as npt

from ergotile.config import parallel_map
from ergotile.exceptions import InvariantViolation, ParameterError
from ergotile.kernels import average_profile, discrete_kernels, error_weight_ledger, error_weight_sum

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
Observable = Callable[[npt.NDArray[np.generic]], npt.ArrayLike]

DEFAULT_ALPHA = math.sqrt(2.0) - 1.0
FIXED_BITS = 96
ORBIT_ERROR = 2.0**-53
_LIMB = 16
_LIMBS = FIXED_BITS // _LIMB
_MASK = (1 << _LIMB) - 1


def _limbs(value: int) -> list[int]:
    return [(value >> (_LIMB * t)) & _MASK for t in range(_LIMBS)]


def fixed_orbit(start: int, step: int, k: npt.ArrayLike) -> FloatArray:
    """((start + k step) mod 2^96) / 2^96, correctly rounded, for int64 ``k``.

    The product is formed in 16-bit limbs held in uint64, so every column
    sum stays below 2^36 and the result matches exact integer arithmetic.
    """
    steps = np.asarray(k, dtype=np.int64)
    sign = steps >> 63
    digits = [
        (((steps >> (_LIMB * t)) if _LIMB * t < 63 else sign) & _MASK).astype(np.uint64) for t in range(_LIMBS)
    ]
    a, s = _limbs(start), _limbs(step)
    carry = np.zeros(steps.shape, dtype=np.uint64)
    out: list[npt.NDArray[np.uint64]] = []
    for t in range(_LIMBS):
        column = carry + np.uint64(a[t])
        for i in range(t + 1):
            column = column + digits[i] * np.uint64(s[t - i])
        out.append(column & np.uint64(_MASK))
        carry = column >> np.uint64(_LIMB)
    half = _LIMBS // 2
    lo = np.zeros(steps.shape, dtype=np.uint64)
    hi = np.zeros(steps.shape, dtype=np.uint64)
    for t in range(half):
        lo |= out[t] << np.uint64(_LIMB * t)
        hi |= out[half + t] << np.uint64(_LIMB * t)
    return hi.astype(np.float64) * 2.0 ** -(_LIMB * half) + lo.astype(np.float64) * 2.0**-FIXED_BITS



class SystemKind(str, Enum):
    ROTATION = "rotation"
    CYCLIC = "cyclic"


@dataclass(frozen=True)
class DynamicalSystem:
    """Circle rotation x -> x + alpha mod 1, or the shift x -> x + 1 on Z_P."""

    kind: SystemKind
    alpha: float = DEFAULT_ALPHA
    period: int = 0

    def __post_init__(self) -> None:
        if self.kind is SystemKind.CYCLIC and self.period < 1:
            raise ParameterError(f"cyclic system needs a period >= 1, got {self.period}")
        if self.kind is SystemKind.ROTATION and not math.isfinite(self.alpha):
            raise ParameterError(f"rotation number must be finite, got {self.alpha}")

    @classmethod
    def rotation(cls, alpha: float = DEFAULT_ALPHA) -> DynamicalSystem:
        return cls(SystemKind.ROTATION, alpha=alpha)

    @classmethod
    def cyclic(cls, period: int) -> DynamicalSystem:
        return cls(SystemKind.CYCLIC, period=period)

    def _fixed(self, value: float) -> int:
        return round(Fraction(value) * (1 << FIXED_BITS)) % (1 << FIXED_BITS)

    def orbit(self, x: float | int, n: npt.ArrayLike) -> npt.NDArray[np.generic]:
        """tau^n x for every integer in ``n``."""
        steps = np.asarray(n, dtype=np.int64)
        if self.kind is SystemKind.CYCLIC:
            return np.asarray((int(x) + steps) % self.period, dtype=np.int64)
        return fixed_orbit(self._fixed(float(x)), self._fixed(self.alpha), steps)

    def tau(self, x: float | int) -> float | int:
        return self.orbit(x, [1])[0].item()  # type: ignore[no-any-return]

    def tau_inverse(self, x: float | int) -> float | int:
        return self.orbit(x, [-1])[0].item()  # type: ignore[no-any-return]

    def states(self) -> npt.NDArray[np.int64]:
        """Every point of a cyclic system."""
        if self.kind is not SystemKind.CYCLIC:
            raise ParameterError("only cyclic systems have a finite state list")
        return np.arange(self.period, dtype=np.int64)


def character(p: int) -> Observable:
    """x -> e^(2 pi i p x) on the circle."""

    def fn(x: npt.NDArray[np.generic]) -> ComplexArray:
        return np.exp(2j * np.pi * p * np.asarray(x, dtype=np.float64))

    return fn


def table(values: npt.ArrayLike) -> Observable:
    """An observable on Z_P given by its values."""
    arr = np.asarray(values)

    def fn(x: npt.NDArray[np.generic]) -> npt.NDArray[np.generic]:
        return arr[np.asarray(x, dtype=np.int64)]

    return fn


def _orbit_products(
    sys: DynamicalSystem, f: Observable, g: Observable, x: float | int, n: npt.ArrayLike
) -> ComplexArray:
    steps = np.asarray(n, dtype=np.int64)
    forward = np.asarray(f(sys.orbit(x, steps)), dtype=np.complex128)
    backward = np.asarray(g(sys.orbit(x, -steps)), dtype=np.complex128)
    return forward * backward


# ----------------------------------------------------------------------
# Averages and series
# ----------------------------------------------------------------------


def bilinear_average(
    sys: DynamicalSystem, f: Observable, g: Observable, x: float | int, N: int,  # noqa: N803
) -> complex:
    """(1/N) sum_{n=0}^{N-1} f(tau^n x) g(tau^-n x)."""
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    return complex(np.sum(_orbit_products(sys, f, g, x, np.arange(N))) / N)


def bilinear_series(
    sys: DynamicalSystem, f: Observable, g: Observable, x: float | int, N: int,  # noqa: N803
) -> complex:
    """sum over 0 < |n| <= N of f(tau^n x) g(tau^-n x) / n."""
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    n = np.arange(1, N + 1)
    plus = _orbit_products(sys, f, g, x, n)
    minus = _orbit_products(sys, f, g, x, -n)
    return complex(np.sum((plus - minus) / n))


def average_sequence(
    sys: DynamicalSystem, f: Observable, g: Observable, x: float | int, N: int,  # noqa: N803
) -> ComplexArray:
    """A_1, ..., A_N at one point."""
    terms = _orbit_products(sys, f, g, x, np.arange(N))
    return np.cumsum(terms) / np.arange(1, N + 1)


def series_sequence(
    sys: DynamicalSystem, f: Observable, g: Observable, x: float | int, N: int,  # noqa: N803
) -> ComplexArray:
    """Partial sums S_1, ..., S_N at one point."""
    n = np.arange(1, N + 1)
    terms = (_orbit_products(sys, f, g, x, n) - _orbit_products(sys, f, g, x, -n)) / n
    return np.cumsum(terms)


def _frac_product(p: int, alpha: float) -> float:
    """{p alpha} computed exactly in fixed point."""
    one = 1 << FIXED_BITS
    return ((p * round(Fraction(alpha) * one)) % one) / one


def average_closed_form(p: int, q: int, alpha: float, x: float, N: int) -> complex:  # noqa: N803
    """Bilinear average of e^(2 pi i p .) and e^(2 pi i q .) under rotation by alpha."""
    carrier = np.exp(2j * np.pi * (p + q) * x)
    if p == q:
        return complex(carrier)
    beta = _frac_product(p - q, alpha)
    if beta == 0.0:
        return complex(carrier)
    ratio = np.exp(2j * np.pi * beta)
    power = np.exp(2j * np.pi * _frac_product(N * (p - q), alpha))
    return complex(carrier * (1 - power) / (1 - ratio) / N)


def series_limit(p: int, q: int, alpha: float, x: float) -> complex:
    """e^(2 pi i (p+q) x) i pi (1 - 2 {beta}) for beta = (p - q) alpha, or 0 when beta is an integer."""
    beta = _frac_product(p - q, alpha)
    if beta == 0.0:
        return 0j
    return complex(np.exp(2j * np.pi * (p + q) * x) * 1j * np.pi * (1 - 2 * beta))


def distance_to_integers(value: float) -> float:
    return abs(value - round(value))


@dataclass(frozen=True)
class EnvelopeFit:
    """C = max |S_N - limit| N dist(beta, Z) over the battery."""

    constant: float
    cases: int
    worst: tuple[int, int, int]


def series_envelope(
    battery: Sequence[tuple[int, int]], alpha: float, x: float, lengths: Sequence[int]
) -> EnvelopeFit:
    """Fit the constant of |S_N - limit| <= C / (N dist(beta, Z)) on (p, q) pairs."""
    sys = DynamicalSystem.rotation(alpha)
    best = 0.0
    worst = (0, 0, 0)
    for p, q in battery:
        beta = _frac_product(p - q, alpha)
        if beta == 0.0:
            continue
        limit = series_limit(p, q, alpha, x)
        partial = series_sequence(sys, character(p), character(q), x, max(lengths))
        dist = distance_to_integers(beta)
        for N in lengths:  # noqa: N806
            value = abs(partial[N - 1] - limit) * N * dist
            if value > best:
                best, worst = value, (p, q, N)
    return EnvelopeFit(best, len(battery), worst)


# ----------------------------------------------------------------------
# Jumps
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class JumpResult:
    """Disjoint alpha-jumps (s_j, t_j) and the scale sequence they define."""

    count: int
    pairs: tuple[tuple[int, int], ...]
    u: tuple[int, ...]
    oscillation: float


def jump_count(values: npt.ArrayLike, alpha: float, start: int = 0) -> JumpResult:
    """Greedy maximum family of disjoint pairs s < t with |W_s - W_t| > alpha.

    Pairs are taken by earliest finishing time t, each starting after the
    previous t. ``start`` is the index of the first value. The returned u
    sequence interleaves the pairs, and the block oscillation along it is at
    least sqrt(count) alpha.

    Raises
    ------
    InvariantViolation
        If the oscillation along the constructed u falls below sqrt(count) alpha.
    """
    w = np.asarray(values)
    pairs: list[tuple[int, int]] = []
    lo = 0
    for t in range(1, w.size):
        if lo < t and np.any(np.abs(w[lo:t] - w[t]) > alpha):
            s = lo + int(np.flatnonzero(np.abs(w[lo:t] - w[t]) > alpha)[0])
            pairs.append((s, t))
            lo = t + 1
    u = tuple(start + k for pair in pairs for k in pair)
    total = 0.0
    for lo_k, hi_k in zip(u, u[1:]):
        block = w[lo_k - start : hi_k - start]
        total += float(np.max(np.abs(block - w[hi_k - start]))) ** 2
    osc = math.sqrt(total)
    if osc < math.sqrt(len(pairs)) * alpha:
        raise InvariantViolation(f"oscillation {osc:.6g} below sqrt({len(pairs)}) * {alpha}")
    return JumpResult(len(pairs), tuple((start + s, start + t) for s, t in pairs), u, osc)


@dataclass(frozen=True)
class JumpStatistics:
    """For each J: the measure of {x : at least J jumps} and the implied lower bound for weak-L1."""

    counts: tuple[int, ...]
    rows: tuple[tuple[int, float, float], ...]


def jump_statistics(sequences: npt.ArrayLike, alpha: float, cell: float) -> JumpStatistics:
    """``sequences[x]`` holds W_k(x); every x carries mass ``cell``."""
    seqs = np.asarray(sequences)
    counts = tuple(jump_count(row, alpha).count for row in seqs)
    rows = []
    for big_j in sorted({c for c in counts if c > 0}):
        measure = cell * sum(1 for c in counts if c >= big_j)
        rows.append((big_j, measure, math.sqrt(big_j) * alpha * measure))
    return JumpStatistics(counts, tuple(rows))


# ----------------------------------------------------------------------
# Discrete transfer operators
# ----------------------------------------------------------------------


Sequence_ = Mapping[int, int | Fraction]


@dataclass(frozen=True)
class DiscreteBilinearResult:
    h_form: dict[int, Fraction]
    o_form: dict[int, Fraction]


def discrete_bilinear(phi: Sequence_, psi: Sequence_, k: int, k_prime: int, m: int) -> DiscreteBilinearResult:
    """a -> sum_b phi(a + b) psi(a - b) (H_k - H_k')(b), and the same with O_k - O_k'.

    Raises
    ------
    ParameterError
        If k >= k'.
    InvariantViolation
        If the two forms differ anywhere.
    """
    if k >= k_prime:
        raise ParameterError(f"need k < k', got {k}, {k_prime}")
    first, second = discrete_kernels(k, m), discrete_kernels(k_prime, m)
    h_form: dict[int, Fraction] = {}
    o_form: dict[int, Fraction] = {}
    for s, phi_s in phi.items():
        if not phi_s:
            continue
        for t, psi_t in psi.items():
            if not psi_t or (s + t) % 2:
                continue
            a, b = (s + t) // 2, (s - t) // 2
            weight = Fraction(phi_s) * Fraction(psi_t)
            h_form[a] = h_form.get(a, Fraction(0)) + weight * (first.H(b) - second.H(b))
            o_form[a] = o_form.get(a, Fraction(0)) + weight * (first.O(b) - second.O(b))
    if h_form != o_form:
        bad = next(a for a in h_form if h_form[a] != o_form.get(a))
        raise InvariantViolation(f"H-form and O-form differ at a={bad}")
    return DiscreteBilinearResult(h_form, o_form)


@dataclass(frozen=True)
class BridgeResult:
    discrete: dict[int, Fraction]
    sampled: dict[int, float]

    @property
    def max_error(self) -> float:
        keys = set(self.discrete) | set(self.sampled)
        return max(
            (abs(float(self.discrete.get(a, 0)) - self.sampled.get(a, 0.0)) for a in keys),
            default=0.0,
        )


def _cell_function(seq: Sequence_, index: npt.NDArray[np.int64], bits: int) -> FloatArray:
    """phi([t]) when {t} in [1/4, 1/2), else 0, for t = index 2^-bits."""
    cell = index >> bits
    frac = index & ((1 << bits) - 1)
    inside = (frac >= 1 << (bits - 2)) & (frac < 1 << (bits - 1))
    keys, where = np.unique(cell, return_inverse=True)
    values = np.array([float(seq.get(int(c), 0)) for c in keys])[where].reshape(cell.shape)
    return np.where(inside, values, 0.0)


def transfer_bridge(
    phi: Sequence_, psi: Sequence_, k: int, k_prime: int, m: int, bits: int = 10
) -> BridgeResult:
    """Sample the line construction and integrate it back to the integers.

    With f = phi([x]) and g = psi([x]) on [[x] + 1/4, [x] + 1/2) and the
    kernel (H_k - H_k')(floor(y + 1/2)), 32 times the double integral over
    x in [a + 1/4, a + 1/2) reproduces the discrete operator at a. On a grid
    of step 2^-bits the Riemann sum is exact up to rounding.
    """
    result = discrete_bilinear(phi, psi, k, k_prime, m)
    first, second = discrete_kernels(k, m), discrete_kernels(k_prime, m)
    unit = 1 << bits
    quarter = unit >> 2
    x_offsets = np.arange(quarter, 2 * quarter, dtype=np.int64)
    y_offsets = np.arange(-unit // 2, unit // 2, dtype=np.int64)
    h = 2.0**-bits
    sampled: dict[int, float] = {}
    for a in result.h_form:
        total = 0.0
        for s in phi:
            b = s - a
            if a - b not in psi or (first.H(b) - second.H(b)) == 0:
                continue
            xs = a * unit + x_offsets
            ys = b * unit + y_offsets
            plus = _cell_function(phi, xs[:, None] + ys[None, :], bits)
            minus = _cell_function(psi, xs[:, None] - ys[None, :], bits)
            total += float(np.sum(plus * minus)) * float(first.H(b) - second.H(b))
        sampled[a] = 32.0 * total * h * h
    return BridgeResult(result.h_form, sampled)


# ----------------------------------------------------------------------
# Exact identities on cyclic systems
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CyclicIdentity:
    lhs: Fraction
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs


def cyclic_average_identity(f: Sequence[int], g: Sequence[int]) -> CyclicIdentity:
    """sum_x A_P(f, g)(x) against its closed form on Z_P.

    For odd P the closed form is (sum f)(sum g) / P; for even P the
    doubling map hits each parity class twice, giving
    (2 / P) (sum_even f sum_even g + sum_odd f sum_odd g).
    """
    period = len(f)
    if len(g) != period or period < 1:
        raise ParameterError("f and g must be tables of the same positive length")
    lhs = Fraction(0)
    for x in range(period):
        lhs += Fraction(sum(f[(x + n) % period] * g[(x - n) % period] for n in range(period)), period)
    if period % 2:
        rhs = Fraction(sum(f) * sum(g), period)
    else:
        even = sum(f[0::2]) * sum(g[0::2])
        odd = sum(f[1::2]) * sum(g[1::2])
        rhs = Fraction(2 * (even + odd), period)
    return CyclicIdentity(lhs, rhs)


def relabeling_defect(sys: DynamicalSystem, f: Observable, g: Observable, N: int) -> float:  # noqa: N803
    """|sum_x A_N(tau x) - sum_x A_N(x)| over all states of a cyclic system."""
    states = sys.states()
    values = np.array([bilinear_average(sys, f, g, int(x), N) for x in states])
    shifted = np.array([bilinear_average(sys, f, g, int(sys.tau(int(x))), N) for x in states])
    return float(abs(np.sum(shifted) - np.sum(values)))


# ----------------------------------------------------------------------
# Weight ledgers and the lacunary experiment
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerReport:
    """sup_r sum_n |w_{r,n,M}| per M, and C fixed by the M = 4 pilot."""

    ledgers: dict[int, float]
    constant: float

    def within(self) -> bool:
        return all(v <= self.constant / m for m, v in self.ledgers.items())


def weight_ledger(m_values: Sequence[int], r_values: Sequence[float], pilot_slack: float = 1.25) -> LedgerReport:
    """Ledger of the averaging error family for r >= 8 M^2.

    Raises
    ------
    InvariantViolation
        If some M exceeds the pilot constant C / M.
    """
    def sup_over(m: int) -> float:
        usable = [r for r in r_values if r >= 8 * m * m]
        if not usable:
            raise ParameterError(f"no r >= 8 M^2 available for M={m}")
        return max(error_weight_sum(m, r) for r in usable)

    constant = sup_over(4) * 4 * pilot_slack
    ledgers = {m: sup_over(m) for m in m_values}
    report = LedgerReport(ledgers, constant)
    if not report.within():
        raise InvariantViolation(f"weight ledger exceeds C/M with C={constant:.4g}: {ledgers}")
    return report


def smoothed_average(
    sys: DynamicalSystem, f: Observable, g: Observable, x: float | int, r: float, m: int
) -> complex:
    """sum_n K_M(n / r) / r f(tau^n x) g(tau^-n x)."""
    reach = int(math.ceil(r / m)) + 1
    n = np.arange(-reach, int(math.floor(r)) + reach + 1)
    weights = average_profile(n / r, m) / r
    return complex(np.sum(weights * _orbit_products(sys, f, g, x, n)))


def _gap(values: npt.ArrayLike) -> float:
    v = np.asarray(values, dtype=np.complex128)
    if v.size == 0:
        return 0.0
    return float(max(np.ptp(v.real), np.ptp(v.imag)))


@dataclass(frozen=True)
class LacunaryRow:
    m: int
    n: int
    plain_gap: float
    smoothed_gap: float
    ledger: float
    bound: float
    margin: float = 0.0


@dataclass(frozen=True)
class TrendStep:
    """One step of the smoothed gap along the M or the n axis."""

    axis: str
    fixed: int
    start: int
    stop: int
    gap_start: float
    gap_stop: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.gap_stop <= (self.gap_start + self.tolerance) * (1 + 1e-12)


def smoothed_gap_trend(rows: Sequence[LacunaryRow]) -> tuple[TrendStep, ...]:
    """Consecutive steps of the worst smoothed gap over the (M, n) grid.

    Along M at fixed n the radii agree, and |S_r^M - A_[r]| is at most the
    ledger, so the gap grows by at most 2 (ledger(M) + ledger(M')). Along n
    at fixed M every finer radius lies within a factor d of a coarser one,
    which adds the coarse margin 4 (1 - 1/d + 1/N0) to that tolerance.
    """
    by_point = {(row.n, row.m): row for row in rows}
    steps: list[TrendStep] = []
    for n in sorted({row.n for row in rows}):
        ms = sorted(m for nn, m in by_point if nn == n)
        for m, m_next in itertools.pairwise(ms):
            a, b = by_point[(n, m)], by_point[(n, m_next)]
            steps.append(
                TrendStep("M", n, m, m_next, a.smoothed_gap, b.smoothed_gap, 2.0 * (a.ledger + b.ledger))
            )
    for m in sorted({row.m for row in rows}):
        ns = sorted(n for n, mm in by_point if mm == m)
        for n, n_next in itertools.pairwise(ns):
            a, b = by_point[(n, m)], by_point[(n_next, m)]
            tolerance = 2.0 * (a.ledger + b.ledger) + a.margin
            steps.append(TrendStep("n", m, n, n_next, a.smoothed_gap, b.smoothed_gap, tolerance))
    return tuple(steps)


@dataclass(frozen=True)
class LacunaryReport:
    rows: tuple[LacunaryRow, ...]
    trend: tuple[TrendStep, ...] = field(default=())
    series_gaps: tuple[float, ...] = field(default=())
    flagged: tuple[str, ...] = field(default=())


def lacunary_convergence_experiment(
    sys: DynamicalSystem,
    f: Observable,
    g: Observable,
    xs: Sequence[float | int],
    m_values: Sequence[int],
    n_values: Sequence[int],
    tail: tuple[int, int],
) -> LacunaryReport:
    """Oscillation of A_N over the tail against the lacunary smoothed averages.

    For d = 2^(1/n) and N_k = floor(d^k), with d^k running over 2^k0 .. 2^k1:
    plain gap = spread of A_N for N_{k0} <= N <= N_{k1}, smoothed gap =
    spread of S_{d^k}. With |f|, |g| <= 1 every x satisfies

        plain <= smoothed + 2 ledger(M) + 4 (1 - 1/d + 1/N_{k0}),

    which is asserted, together with the trend of the smoothed gap over the
    (M, n) grid (see ``smoothed_gap_trend``). Series partial sums along 2^k
    are reported as tail gaps, which are nonincreasing in the tail start.

    Raises
    ------
    InvariantViolation
        If the gap bound fails for some x, or the smoothed gap grows along M
        or n by more than its ledger tolerance.
    """
    k0, k1 = tail
    flagged: list[str] = []
    if k0 < 1:
        flagged.append(f"tail start k0={k0} < 1: series scales must be positive")
    rows: list[LacunaryRow] = []
    for n in sorted(n_values):
        d = 2.0 ** (1.0 / n)
        radii = [d**k for k in range(k0 * n, k1 * n + 1)]
        n0 = int(math.floor(radii[0]))
        n1 = int(math.floor(radii[-1]))
        plain = parallel_map(lambda x: average_sequence(sys, f, g, x, n1)[n0 - 1 :], xs)
        for m in sorted(m_values):
            ledger = max(error_weight_ledger(m, radii))

            def smoothed_gap(x: float | int, m: int = m) -> float:
                return _gap([smoothed_average(sys, f, g, x, r, m) for r in radii])

            smoothed = parallel_map(smoothed_gap, xs)
            margin = 4.0 * (1.0 - 1.0 / d + 1.0 / n0)
            worst_plain = worst_smoothed = worst_bound = 0.0
            for x, seq, sm in zip(xs, plain, smoothed):
                gap = _gap(seq)
                bound = sm + 2.0 * ledger + margin
                if gap > bound * (1 + 1e-12):
                    raise InvariantViolation(f"x={x}: gap {gap:.6g} exceeds bound {bound:.6g} (M={m}, n={n})")
                worst_plain = max(worst_plain, gap)
                worst_smoothed = max(worst_smoothed, sm)
                worst_bound = max(worst_bound, bound)
            rows.append(LacunaryRow(m, n, worst_plain, worst_smoothed, ledger, worst_bound, margin))
            logger.info("lacunary M=%d n=%d: gap %.4g <= %.4g", m, n, worst_plain, worst_bound)

    trend = smoothed_gap_trend(rows)
    for step in trend:
        if not step.holds:
            raise InvariantViolation(
                f"smoothed gap grows along {step.axis} from {step.start} to {step.stop}: "
                f"{step.gap_stop:.6g} > {step.gap_start:.6g} + {step.tolerance:.6g}"
            )

    series_gaps = []
    top = 2**k1
    partials = parallel_map(lambda x: series_sequence(sys, f, g, x, top), xs)
    for start in range(max(k0, 0), k1 + 1):
        idx = [2**k - 1 for k in range(start, k1 + 1)]
        series_gaps.append(max(_gap(p[idx]) for p in partials))
    return LacunaryReport(tuple(rows), trend, tuple(series_gaps), tuple(flagged))
