"""Experiment registry and batch runner.

Each experiment kind maps a parsed :class:`ExperimentConfig` to an
:class:`ExperimentResult`: one table (header row carrying units and target
values), summary lines, and the list of hard invariants that failed.
:func:`run_experiment` writes ``<kind>-seed<seed>.csv`` and
``<kind>-seed<seed>.txt`` and raises :class:`InvariantViolation` after
writing when any hard invariant failed.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ergotile.bilinear_ops import (
    bilinear_maximal,
    discretization_bridge,
    j_scaling_experiment,
    model_sum_sup_form,
    packet_bridge,
    resolvable_scales,
    scale_covariance,
    square_function,
    two_scale_tiles,
)
from ergotile.config import ExperimentConfig
from ergotile.ergodic import (
    DynamicalSystem,
    average_closed_form,
    bilinear_average,
    character,
    cyclic_average_identity,
    jump_statistics,
    lacunary_convergence_experiment,
    series_envelope,
    series_sequence,
    transfer_bridge,
    weight_ledger,
)
from ergotile.exceptions import ConfigError, InvariantViolation, PreconditionError
from ergotile.grids import (
    DyadicInterval,
    Grid,
    Interval,
    family_disjoint,
    is_sparse,
    nestedness_violations,
    sparsify_report,
)
from ergotile.kernels import make_kernel, series_weight_ledger, split_kernel, validate_kernel
from ergotile.rng import SplitMix64
from ergotile.selection import (
    StoppingData,
    bessel_decompose,
    full_decomposition,
    fixed_scale_gram,
    maximal_bessel_decompose,
    single_tree_check,
)
from ergotile.signals import SampledFunction, TestClassSpec, gaussian, random_test_function
from ergotile.tiles import Multitile, TileSystem, generate_multitiles, maximal_tree, order_battery
from ergotile.wavepackets import (
    PacketBank,
    bilinear_decay,
    bilinear_packet,
    make_packet,
    make_window,
    nonvanishing,
    resolution_band,
    round_trip_error,
)

logger = logging.getLogger(__name__)

Row = tuple[Any, ...]
Runner = Callable[[ExperimentConfig], "ExperimentResult"]

GENERIC_COLUMNS = ("quantity", "index", "value", "target")


@dataclass
class ExperimentResult:
    """Rows, summary lines and failed hard invariants of one run."""

    kind: str
    columns: tuple[str, ...] = GENERIC_COLUMNS
    rows: list[Row] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def add(self, *row: Any) -> None:
        self.rows.append(row)

    def note(self, line: str) -> None:
        self.summary.append(line)

    def check(self, ok: bool, message: str) -> None:
        if not ok:
            logger.warning("%s: %s", self.kind, message)
            self.failures.append(message)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class Experiment:
    """A named experiment kind with its documented knobs."""

    name: str
    description: str
    targets: str
    runner: Runner = field(repr=False)
    params: dict[str, Any] = field(default_factory=dict)


class ExperimentRegistry:
    """Registry of experiment kinds.

    Example
    -------
    >>> registry = ExperimentRegistry.default()
    >>> registry.get("lemma7").targets
    '0 violations'
    """

    def __init__(self) -> None:
        self._experiments: dict[str, Experiment] = {}

    def register(self, experiment: Experiment) -> None:
        """Register an experiment. Raises ValueError on duplicate names."""
        if experiment.name in self._experiments:
            raise ValueError(f"Experiment '{experiment.name}' already registered")
        self._experiments[experiment.name] = experiment

    def get(self, name: str) -> Experiment:
        if name not in self._experiments:
            known = ", ".join(sorted(self._experiments))
            raise ConfigError(f"unknown experiment kind '{name}' (known: {known})")
        return self._experiments[name]

    def names(self) -> list[str]:
        return sorted(self._experiments)

    def list_all(self) -> list[Experiment]:
        return [self._experiments[n] for n in self.names()]

    @classmethod
    def default(cls) -> ExperimentRegistry:
        """Registry pre-loaded with every built-in kind."""
        registry = cls()
        for experiment in _BUILTIN:
            registry.register(experiment)
        return registry


_BUILTIN: list[Experiment] = []


def _experiment(name: str, description: str, targets: str, **params: Any) -> Callable[[Runner], Runner]:
    def wrap(fn: Runner) -> Runner:
        _BUILTIN.append(Experiment(name, description, targets, fn, params))
        return fn

    return wrap


# ----------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, Fraction):
        return str(value)
    return str(value)


def render_table(result: ExperimentResult, seed: int) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("seed", *result.columns))
    for row in result.rows:
        writer.writerow((seed, *(_cell(v) for v in row)))
    return buffer.getvalue()


def render_summary(result: ExperimentResult, config: ExperimentConfig, experiment: Experiment) -> str:
    lines = [
        f"experiment: {result.kind}",
        f"seed: {config.seed}",
        f"profile: {config.profile}",
        f"targets: {experiment.targets}",
        "",
        *result.summary,
        "",
    ]
    if result.passed:
        lines.append("hard invariants: PASS")
    else:
        lines.append(f"hard invariants: FAIL ({len(result.failures)})")
        lines.extend(f"  - {message}" for message in result.failures)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunArtifacts:
    table: Path
    summary: Path
    result: ExperimentResult


def run_experiment(
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
    registry: ExperimentRegistry | None = None,
) -> RunArtifacts:
    """Run one experiment and write its table and summary.

    Raises
    ------
    ConfigError
        If the kind is unknown.
    InvariantViolation
        If a hard invariant failed; the artifacts are written first.
    """
    registry = registry or ExperimentRegistry.default()
    experiment = registry.get(config.kind)
    logger.info("running %s (seed %d, profile %s)", config.kind, config.seed, config.profile)
    result = experiment.runner(config)
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{config.kind}-seed{config.seed}"
    table = out / f"{stem}.csv"
    summary = out / f"{stem}.txt"
    table.write_text(render_table(result, config.seed), encoding="utf-8")
    summary.write_text(render_summary(result, config, experiment), encoding="utf-8")
    logger.info("%s finished: %d rows, %d failures", config.kind, len(result.rows), len(result.failures))
    if not result.passed:
        raise InvariantViolation(f"{config.kind}: {result.failures[0]}")
    return RunArtifacts(table, summary, result)


def describe(kind: str, registry: ExperimentRegistry | None = None) -> str:
    experiment = (registry or ExperimentRegistry.default()).get(kind)
    lines = [experiment.name, "", experiment.description, "", f"targets: {experiment.targets}"]
    if experiment.params:
        lines.append("params:")
        lines.extend(f"  {key}: {value!r}" for key, value in experiment.params.items())
    return "\n".join(lines)


# ----------------------------------------------------------------------
# Shared instance builders
# ----------------------------------------------------------------------


def _bank(config: ExperimentConfig) -> PacketBank:
    return PacketBank(config.theta(), config.resolution.a, config.resolution.b)


def _tile_scales(config: ExperimentConfig, system: TileSystem) -> list[int]:
    lo, hi = resolution_band(config.resolution.a, config.resolution.b)
    requested = config.param("tile_scales", system.scales(max(lo, -4), min(hi, 4)))
    scales = [i for i in requested if system.admits_scale(i) and lo <= i <= hi]
    if not scales:
        raise ConfigError(f"no admissible tile scale in {requested} for resolution band [{lo}, {hi}]")
    return scales


def _tile_pool(config: ExperimentConfig, system: TileSystem, scales: list[int], rng: SplitMix64) -> list[Multitile]:
    """Multitiles with I_s in the central half window and omega_1 in [0, 2^-min scale), subsampled."""
    limit = config.param("max_tiles", 400)
    half = Fraction(2) ** (config.resolution.a - 1)
    time_window = Interval(-half, half)
    frequency_window = Interval(Fraction(0), Fraction(2) ** -min(scales))
    pool = generate_multitiles(system, scales, time_window, frequency_window)
    if len(pool) > limit:
        order = rng.permutation(len(pool))
        pool = sorted(pool[int(k)] for k in order[:limit])
    return pool


def _test_function(config: ExperimentConfig, rng: SplitMix64, normalization: str = "l2") -> SampledFunction:
    """Random element of X_2(E) (or X(E)) with E a union of random unit intervals."""
    a, b = config.resolution.a, config.resolution.b
    reach = 2 ** (a - 1)
    pieces = int(rng.integers(1, 4))
    starts = sorted({int(v) for v in np.asarray(rng.integers(-reach, reach, pieces))})
    intervals = tuple(Interval(Fraction(s), Fraction(s + 1)) for s in starts)
    spec = TestClassSpec(intervals, normalization)  # type: ignore[arg-type]
    return random_test_function(spec, rng, a, b)


def _stopping(config: ExperimentConfig, rng: SplitMix64) -> StoppingData:
    return StoppingData.random(config.scales.U, rng, config.resolution.a, config.resolution.b)


def _within_blocks(tiles: list[Multitile], stopping: StoppingData) -> list[Multitile]:
    return [s for s in tiles if stopping.block(s.i) is not None]


# ----------------------------------------------------------------------
# Grids, kernels, packets
# ----------------------------------------------------------------------


@_experiment(
    "grids",
    "Nestedness of S, D_0..D_2 and every G_{N,t,L} (N in 3, 5, 7) over |i| <= scale_max in "
    "[-window, window); disjointness of the G_{5,t,.} families.",
    "0 violations; disjoint families",
    scale_max=8,
    window=64,
)
def _grids(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("grids", ("grid", "violations [count; target 0]"))
    scale_max = config.param("scale_max", 8)
    half = config.param("window", 64)
    window = Interval(Fraction(-half), Fraction(half))
    scales = list(range(-scale_max, scale_max + 1))
    family = [Grid.standard(), *(Grid.shifted(d) for d in (0, 1, 2))]
    family += [Grid.family(n, t, shift) for n in (3, 5, 7) for t in range(n - 1) for shift in range(n)]
    total = 0
    for grid in family:
        count = nestedness_violations(grid, scales, window)
        total += count
        result.add(grid.name, count)
    result.check(total == 0, f"{total} nestedness violations")
    for t in range(4):
        disjoint = family_disjoint([Grid.family(5, t, shift) for shift in range(5)], scales, window)
        result.add(f"G(5,{t},*) disjoint", 0 if disjoint else 1)
        result.check(disjoint, f"G(5,{t},L) members coincide across L")
    result.note(f"grids checked: {len(family)}; violations: {total}")
    return result


@_experiment(
    "kernel-validate",
    "Symbol constants of the configured kernel against the derivative majorants, the "
    "vanishing condition |K^(xi)| <~ |xi|, the Littlewood-Paley split defects and the "
    "discrete weight ledger sum |A_{k,M}|.",
    "constants finite; split defects <= 1e-8",
    k_max=8,
)
def _kernel_validate(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("kernel-validate")
    kernel = make_kernel(config.kernel.kind, config.kernel.M)
    report = validate_kernel(kernel)
    for order, constant in enumerate(report.constants):
        result.add("symbol_constant", order, constant, "finite")
        result.check(math.isfinite(constant), f"C_{order} is not finite")
    result.add("vanishing_condition", "", report.vanishing_holds, "true only for mean-zero symbols")
    result.add("limit_plus", "", abs(report.limit_plus), "")
    result.add("limit_minus", "", abs(report.limit_minus), "")
    split = split_kernel(kernel, theta=config.theta())
    xi = np.linspace(-2.0**10, 2.0**10, 2**14 + 1)
    partition = split.partition_defect(xi)
    reconstruction = split.reconstruction_defect(xi)
    result.add("partition_defect", "", partition, "<= 1e-8")
    result.add("reconstruction_defect", "", reconstruction, "<= 1e-8")
    result.check(partition <= 1e-8, f"Littlewood-Paley partition defect {partition:.3g}")
    result.check(reconstruction <= 1e-8, f"split reconstruction defect {reconstruction:.3g}")
    ledger = [series_weight_ledger(k, config.kernel.M) for k in range(1, config.param("k_max", 8) + 1)]
    for k, value in enumerate(ledger, start=1):
        result.add("sum_abs_A", k, value, "bounded in k")
    result.note(f"kernel {kernel.name}: constants {[f'{c:.4g}' for c in report.constants]}")
    result.note(f"vanishing condition holds: {str(report.vanishing_holds).lower()}")
    result.note(f"sum |A_k,M| over k: max {max(ledger):.4g} (bounded uniformly in k)")
    return result


@_experiment(
    "frame",
    "Partition of unity of the window translates and the per-scale analysis/synthesis "
    "round trip for five test functions and i in scales.",
    "partition error <= 1e-8; round trip <= 1e-6; ||psi||^2 = 1/5",
    scales=[-2, -1, 0, 1, 2],
)
def _frame(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("frame")
    a, b = config.resolution.a, config.resolution.b
    window = make_window()
    result.add("partition_error", "", window.partition_error, "<= 1e-8")
    result.add("norm_squared", "", window.norm_squared, "1/5")
    result.check(window.partition_error <= 1e-8, f"partition of unity error {window.partition_error:.3g}")
    rng = config.rng()
    functions = [
        gaussian(a, b),
        gaussian(a, b, center=2.0, width=0.5).modulate(1.5),
        gaussian(a, b, center=-3.0, width=2.0),
        _test_function(config, rng, "sup"),
        _test_function(config, rng, "l2"),
    ]
    worst = 0.0
    for i in config.param("scales", [-2, -1, 0, 1, 2]):
        for n, f in enumerate(functions):
            error = round_trip_error(f, i)
            worst = max(worst, error)
            result.add(f"round_trip_f{n}", i, error, "<= 1e-6")
    result.check(worst <= 1e-6, f"frame round trip error {worst:.3g}")
    result.note(f"partition error {window.partition_error:.3g}; worst round trip {worst:.3g}")
    return result


@_experiment(
    "packets",
    "External energy of random packets psi_{i,m,l} and phi_{i,(m1,m2),(l1,l2)}, norms of "
    "bilinear packets whose frequency gap misses theta_i, decay in |m1 - m2|, and the "
    "truncated-operator bridge on single packets and on a two-scale tile set, and dilation covariance.",
    "external energy <= 1e-6; violating norms <= 1e-8; decay decreasing; two-scale bridge <= 1e-3; "
    "covariance defects <= 1e-9",
    packets=200,
    violating_e=2,
    bridge_gap=4,
    covariance_k=1,
    covariance_m=4,
)
def _packets(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("packets")
    a, b = config.resolution.a, config.resolution.b
    theta = config.theta()
    rng = config.rng()
    lo, hi = resolution_band(a, b)
    gaps = (config.tiles.e, config.param("violating_e", 2))
    worst_single = worst_bilinear = worst_violating = worst_bridge = 0.0
    violating = 0
    for _ in range(config.param("packets", 200)):
        i = int(rng.integers(min(lo + 3, hi), hi + 1))
        bound = 5 * 2 ** (b - 1 + i) - 3
        m1, m2 = (int(v) for v in np.asarray(rng.integers(-4, 4, 2)))
        l = int(rng.integers(-bound, bound))  # noqa: E741
        worst_single = max(worst_single, make_packet(i, m1, l, a, b).external_energy())
        e = gaps[int(rng.integers(0, 2))]
        choices = [v for v in range(-bound, bound) if max(abs(v + e), abs(2 * v + e)) < bound]
        if not choices:
            continue
        l1 = choices[int(rng.integers(0, len(choices)))]
        packet = bilinear_packet(i, (m1, m2), (l1, l1 + e), theta, a, b)
        if nonvanishing(e, theta):
            worst_bilinear = max(worst_bilinear, packet.external_energy())
            worst_bridge = max(worst_bridge, packet_bridge(i, (m1, m2), (l1, l1 + e), theta, a, b))
        else:
            violating += 1
            worst_violating = max(worst_violating, packet.l2_norm())
    result.add("psi_external_energy", "", worst_single, "<= 1e-6")
    result.add("phi_external_energy", "", worst_bilinear, "<= 1e-6")
    result.add("violating_norm", violating, worst_violating, "<= 1e-8")
    result.add("bridge_relative_error", "", worst_bridge, "reported")
    result.check(worst_single <= 1e-6, f"psi external energy {worst_single:.3g}")
    result.check(worst_bilinear <= 1e-6, f"phi external energy {worst_bilinear:.3g}")
    result.check(worst_violating <= 1e-8, f"packet off the theta annulus has norm {worst_violating:.3g}")
    i0 = max(lo + 3, min(hi, 0))
    decay = bilinear_decay(i0, (0, config.tiles.e), theta, orders=(2,), a=a, b=b)
    for d, ratio in zip(decay.distances, decay.ratios):
        result.add("decay_ratio", d, ratio, "decreasing in |m1 - m2|")
    result.add("decay_constant_M2", "", decay.constants[2], "finite")
    result.check(decay.decreasing, "bilinear packet norms do not decrease in |m1 - m2|")
    result.check(math.isfinite(decay.constants[2]), "decay constant for M=2 is not finite")
    result.note(f"{violating} packets off the theta annulus; worst norm {worst_violating:.3g}")
    _two_scale_checks(config, result)
    return result


def _two_scale_checks(config: ExperimentConfig, result: ExperimentResult) -> None:
    a, b = config.resolution.a, config.resolution.b
    lo, hi = resolution_band(a, b)
    gap = config.param("bridge_gap", 4)
    fine = max(lo, min(0, hi - gap))
    bank = _bank(config)
    rng = config.rng().spawn(7)
    try:
        tiles = two_scale_tiles(config.tiles.e, fine, gap, bank)
        c1 = dict(zip(tiles, rng.complex_normal(len(tiles))))
        c2 = dict(zip(tiles, rng.complex_normal(len(tiles))))
        bridge = discretization_bridge(tiles, c1, c2, bank)
    except PreconditionError as exc:
        result.note(f"two-scale bridge skipped: {exc}")
        return
    except InvariantViolation as exc:
        result.check(False, str(exc))
        return
    result.add("two_scale_bridge", f"{fine}+{gap}", bridge.relative_error, "<= 1e-3")
    k = config.param("covariance_k", 1)
    f = bank.combine((bank.phi(s, 1), c) for s, c in c1.items()) + gaussian(a, b)
    g = bank.combine((bank.phi(s, 2), c) for s, c in c2.items()) + gaussian(a, b, center=0.5)
    stopping = StoppingData.single((fine, fine + gap + 1), a, b)
    kernel = make_kernel("average", config.param("covariance_m", 4))
    operator_scales = [
        j for j in (fine, fine + 1) if j in resolvable_scales(a, b) and j + k in resolvable_scales(a + k, b - k)
    ]
    try:
        covariance = scale_covariance(
            tiles, f, g, stopping, bank.theta, k, kernel=kernel, operator_scales=operator_scales
        )
    except InvariantViolation as exc:
        result.check(False, str(exc))
        return
    result.add("covariance_model", k, covariance.model_defect, "<= 1e-9")
    result.add("covariance_coefficients", k, covariance.coefficient_defect, "<= 1e-9")
    for j, defect in covariance.operator_defects.items():
        result.add("covariance_operator", f"{j}->{j + k}", defect, "<= 1e-9")


# ----------------------------------------------------------------------
# Tiles and selection
# ----------------------------------------------------------------------


@_experiment(
    "lemma7",
    "Random pairs s'_i < s_i at admissible scales; counts pairs where some s'_j <~' s_j fails.",
    "0 violations",
    pairs=20000,
    spread=64,
)
def _lemma7(config: ExperimentConfig) -> ExperimentResult:
    columns = ("pairs", "violations [count; target 0]", "separation_margin", "enlargement_margin")
    result = ExperimentResult("lemma7", columns)
    system = config.tile_system()
    separation, enlargement = system.margins()
    scales = system.scales(-2 * system.period, 2 * system.period)
    battery = order_battery(system, config.rng(), config.param("pairs", 20000), scales, config.param("spread", 64))
    result.add(battery.pairs, battery.violations, float(separation), float(enlargement))
    result.check(battery.violations == 0, f"{battery.violations} violations, e.g. {battery.witness}")
    result.note(f"{battery.pairs} pairs, {battery.violations} violations")
    return result


@_experiment(
    "sparsify",
    "Greedy (A, d)-sparse colouring of random dyadic intervals for each A in the sweep; every class is "
    "re-checked and the class count L is reported against A^2.",
    "every class sparse; L / A^2 <= ratio_bound",
    intervals=200,
    amplitudes=[1, 2, 4],
    scale_span=6,
    ratio_bound=16.0,
)
def _sparsify(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult(
        "sparsify", ("A", "intervals", "classes", "L_over_A2 [target <= ratio_bound]", "all_sparse")
    )
    span = config.param("scale_span", 6)
    bound = float(config.param("ratio_bound", 16.0))
    gap, sep = config.sparsity.gap_multiplier, config.sparsity.separation_multiplier
    worst = 0.0
    for n, amplitude in enumerate(config.param("amplitudes", [1, 2, 4])):
        rng = config.rng().spawn(n)
        family = [
            DyadicInterval(int(rng.integers(-span, span + 1)), int(rng.integers(-64, 64)))
            for _ in range(config.param("intervals", 200))
        ]
        report = sparsify_report(family, amplitude, gap, sep)
        covered = sorted(iv for cls in report.classes for iv in cls.intervals)
        result.check(covered == sorted(set(family)), f"A={amplitude}: classes do not partition the family")
        all_sparse = True
        for k, cls in enumerate(report.classes):
            check = is_sparse(list(cls.intervals), amplitude, cls.d, gap, sep)
            all_sparse = all_sparse and check.sparse
            result.check(check.sparse, f"A={amplitude}, class {k} is not sparse: {check.witness}")
        result.add(amplitude, report.intervals, len(report.classes), report.ratio, all_sparse)
        result.check(report.ratio <= bound, f"A={amplitude}: L/A^2 = {report.ratio:.3g} above {bound:g}")
        worst = max(worst, report.ratio)
    result.note(f"C = max L/A^2 = {worst:.3g} over the sweep")
    return result


@_experiment(
    "bessel",
    "Greedy j-size selection on random tile sets: strong disjointness, size halving and "
    "the ratio sum |I_T| sigma^2 / ||F||_2^2 against a pilot constant.",
    "disjoint forests; remainder size <= sigma/2; ratio <= pilot max",
    pilot_trials=5,
    max_tiles=400,
    j=1,
)
def _bessel(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult(
        "bessel",
        ("trial", "tiles", "trees", "remainder", "sigma", "remainder_size", "ratio [target <= pilot]"),
    )
    system = config.tile_system()
    bank = _bank(config)
    scales = _tile_scales(config, system)
    j = config.param("j", 1)

    def trial(rng: SplitMix64) -> tuple[float, Row]:
        tiles = _tile_pool(config, system, scales, rng)
        f = _test_function(config, rng)
        coefficients = bank.coefficients(f, tiles, j)
        out = bessel_decompose(tiles, j, coefficients, system, norm_squared=f.l2_norm() ** 2)
        row = (len(tiles), len(out.forest.trees), len(out.remainder), out.sigma, out.remainder_size, out.ratio)
        return out.ratio, row

    pilot = max(trial(config.rng().spawn(1000 + n))[0] for n in range(config.param("pilot_trials", 5)))
    rng = config.rng()
    exceed = 0
    for n in range(config.trials):
        ratio, row = trial(rng.spawn(n))
        exceed += ratio > pilot
        result.add(n, *row)
    result.note(f"pilot ratio max {pilot:.4g}; exceedances {exceed} of {config.trials} (target 0)")
    return result


@_experiment(
    "maximal-bessel",
    "3-size selection for H_s = h h_{j(s)} with random block weights; selected top mass "
    "against J^(1/8) sigma^-2 (sigma |E|^(1/2))^-eps.",
    "disjoint forests; ratio bounded",
    max_tiles=400,
)
def _maximal_bessel(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("maximal-bessel", ("trial", "tiles", "trees", "sigma", "eps", "ratio"))
    system = config.tile_system()
    bank = _bank(config)
    scales = _tile_scales(config, system)
    rng = config.rng()
    for n in range(config.trials):
        child = rng.spawn(n)
        stopping = _stopping(config, child)
        tiles = _within_blocks(_tile_pool(config, system, scales, child), stopping)
        h = _test_function(config, child, "sup")
        measure = float(np.count_nonzero(h.values)) * h.step
        out = maximal_bessel_decompose(tiles, h, stopping, bank, system, measure)
        for eps, ratio in out.ratios.items():
            result.add(n, len(tiles), len(out.result.forest.trees), out.result.sigma, eps, ratio)
    worst = max((row[-1] for row in result.rows), default=0.0)
    result.note(f"J = {len(config.scales.U)}; worst ratio {worst:.4g}")
    return result


@_experiment(
    "single-tree",
    "Random 3-lacunary trees: both sides of the single tree estimate and the covering of "
    "2 I_T by the boundary family.",
    "family covers 2 I_T; ratio bounded by pilot",
    max_tiles=400,
)
def _single_tree(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("single-tree", ("trial", "members", "lhs", "rhs", "ratio", "covered [target true]"))
    system = config.tile_system()
    bank = _bank(config)
    scales = _tile_scales(config, system)
    rng = config.rng()
    done = attempts = 0
    while done < config.trials and attempts < 20 * config.trials:
        child = rng.spawn(attempts)
        attempts += 1
        stopping = _stopping(config, child)
        tiles = _within_blocks(_tile_pool(config, system, scales, child), stopping)
        coarse = [s for s in tiles if s.i == max(t.i for t in tiles)] if tiles else []
        if not coarse:
            continue
        top = coarse[int(child.integers(0, len(coarse)))]
        tree = maximal_tree(tiles, top, 1)
        h = _test_function(config, child, "sup")
        exceptional = [Interval(Fraction(s), Fraction(s + 1)) for s in range(-2, 2) if child.uniform() < 0.5]
        try:
            check = single_tree_check(tree, exceptional, h, stopping, bank, system)
        except PreconditionError:
            continue
        result.add(done, len(tree.members), check.lhs, check.rhs, check.ratio, check.covered)
        result.check(check.covered, f"boundary family misses part of 2 I_T for top {tree.top}")
        done += 1
    finite = [row[4] for row in result.rows if math.isfinite(row[4])]
    result.note(f"{done} lacunary trees; worst finite ratio {max(finite, default=0.0):.4g}")
    return result


@_experiment(
    "full-decomposition",
    "The level decomposition of a tile set with every ledger: partition of S, exceptional "
    "measure, pairing identity on V, upper 3-size levels and the weak-L1 profile; plus the "
    "sup form of the model sum on a tile subset.",
    "levels partition S; |E| <= sum 2^-n |I_T|; pairing identity exact",
    max_tiles=200,
    sup_form_tiles=24,
)
def _full_decomposition(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("full-decomposition")
    system = config.tile_system()
    bank = _bank(config)
    scales = _tile_scales(config, system)
    rng = config.rng()
    stopping = _stopping(config, rng)
    tiles = _within_blocks(_tile_pool(config, system, scales, rng), stopping)
    f, g = _test_function(config, rng, "sup"), _test_function(config, rng, "sup")
    report = full_decomposition(tiles, f, g, stopping, bank, system)
    for level in report.levels:
        result.add("level_top_mass", level.n, level.top_mass, f"<= bound {level.bound:.4g}")
    for level in report.upper_levels:
        result.add("upper_level_top_mass", level.n, level.top_mass, f"<= bound {level.bound:.4g}")
    result.add("exceptional_measure", "", report.exceptional_measure, f"<= {report.exceptional_bound:.4g}")
    result.add("tail_l1", "", report.tail_l1, f"<= {report.tail_bound:.4g}")
    result.add("pairing_defect", "", report.pairing, "<= 1e-8")
    for lam, value in report.weak_l1:
        result.add("weak_l1", lam, value, "bounded by ||f|| ||g||")
    subset = tiles[: config.param("sup_form_tiles", 24)]
    c1 = bank.coefficients(f, subset, 1)
    c2 = bank.coefficients(g, subset, 2)
    sup_form = model_sum_sup_form(subset, c1, c2, stopping, bank)
    result.add("sup_form_defect", len(subset), sup_form.defect, "<= 1e-8")
    result.note(f"gamma {report.gamma}; {len(report.levels)} levels; unresolved {report.unresolved}")
    result.note(f"weak-L1 max {report.weak_l1_max:.4g}; norms {report.norms[0]:.4g}, {report.norms[1]:.4g}")
    return result


@_experiment(
    "gram",
    "Fixed-scale Gram matrix of psi_{s,3}: quadratic form against sum |a_s|^2, the Schur "
    "row-sum bound and the fitted off-diagonal decay exponent.",
    "ratio <= Schur bound; decay exponent >= 8 (10 at infinite resolution)",
    max_tiles=400,
)
def _gram(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("gram", ("trial", "scale", "tiles", "ratio", "schur", "decay_exponent [target >= 8]"))
    system = config.tile_system()
    bank = _bank(config)
    scales = _tile_scales(config, system)
    rng = config.rng()
    for n in range(config.trials):
        child = rng.spawn(n)
        k = scales[int(child.integers(0, len(scales)))]
        tiles = [s for s in _tile_pool(config, system, [k], child)]
        if not tiles:
            continue
        coefficients = list(child.complex_normal(len(tiles)))
        report = fixed_scale_gram(tiles, k, coefficients, bank)
        exponent = report.decay_exponent if report.decay_exponent is not None else math.nan
        result.add(n, k, len(tiles), report.ratio, report.schur, exponent)
    fitted = [row[-1] for row in result.rows if math.isfinite(row[-1])]
    result.note(f"{len(result.rows)} instances; smallest fitted exponent {min(fitted, default=math.nan):.3g}")
    return result


# ----------------------------------------------------------------------
# Bilinear operators
# ----------------------------------------------------------------------


@_experiment(
    "oscillation-scaling",
    "Normalized weak-L1 of the oscillation of B_k(f, g) over J consecutive scales for random "
    "pairs in X(E), and the fitted exponent of its growth in J.",
    "exponent <= 0.55 (trivial bound 1/2; sharp 1/4)",
    j_values=[2, 4, 8, 16],
    pairs=20,
    max_exponent=0.55,
)
def _oscillation_scaling(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("oscillation-scaling", ("J", "weak_l1_normalized"))
    kernel = make_kernel(config.kernel.kind, config.kernel.M)
    rng = config.rng()
    pairs = [
        (_test_function(config, rng, "sup"), _test_function(config, rng, "sup"))
        for _ in range(config.param("pairs", 20))
    ]
    n = config.scales.n
    resolvable = resolvable_scales(config.resolution.a, config.resolution.b, n)
    start = config.param("start", resolvable.start)
    available = resolvable.stop - start
    requested = config.param("j_values", [2, 4, 8, 16])
    j_values = [big_j for big_j in requested if big_j <= available]
    if len(j_values) < 2:
        raise ConfigError(f"only {available} resolvable scales from k={start}; J values {requested} need more")
    if len(j_values) < len(requested):
        result.note(f"J values above {available} skipped at this resolution")
    fit = j_scaling_experiment(pairs, kernel, j_values, start, n)
    for big_j, value in zip(fit.j_values, fit.norms):
        result.add(big_j, value)
    limit = config.param("max_exponent", 0.55)
    result.check(fit.exponent <= limit, f"J-exponent {fit.exponent:.3f} exceeds {limit}")
    result.note(f"J-exponent {fit.exponent:.4f} (target <= {limit}; sharp value 1/4)")
    return result


@_experiment(
    "square-function",
    "Square function (sum_k |B_k|^2)^(1/2) for the mean-zero part K - eta of the configured "
    "kernel, with the omitted-scale tail bound, and the bilinear maximal function.",
    "weak-L1 ratios bounded",
    pairs=5,
)
def _square_function(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("square-function")
    kernel = split_kernel(make_kernel(config.kernel.kind, config.kernel.M), theta=config.theta()).residual_kernel()
    rng = config.rng()
    for n in range(config.param("pairs", 5)):
        f, g = _test_function(config, rng, "sup"), _test_function(config, rng, "sup")
        norms = f.l2_norm() * g.l2_norm()
        if norms == 0.0:
            continue
        sq = square_function(f, g, kernel)
        result.add("square_weak_l1_ratio", n, sq.weak_l1 / norms, "bounded")
        result.add("square_tail_bound", n, sq.tail_bound, "pointwise bound on omitted scales")
        mx = bilinear_maximal(f, g)
        result.add("maximal_weak_l1_ratio", n, mx.ratio, "bounded")
    result.note(f"kernel {kernel.name}; {len(result.rows) // 3} pairs")
    return result


# ----------------------------------------------------------------------
# Ergodic side
# ----------------------------------------------------------------------


@_experiment(
    "ergodic",
    "Rotation by alpha: bilinear averages of characters against the geometric-sum closed "
    "form, the series against i pi (1 - 2{beta}) with a pilot-fitted envelope, the averaging "
    "weight ledger, jump statistics and exact cyclic identities.",
    "closed form within 1e-10; ledger <= C/M; cyclic identities exact",
    battery=[[1, 2], [2, 1], [3, -1], [1, 4], [5, 2], [-2, 3]],
    lengths=[100, 1000, 10000, 100000],
    ledger_m=[4, 8, 16],
    jump_alpha=0.05,
    jump_points=16,
)
def _ergodic(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("ergodic")
    alpha = config.param("alpha", math.sqrt(2.0) - 1.0)
    sys = DynamicalSystem.rotation(alpha)
    rng = config.rng()
    battery = [(int(p), int(q)) for p, q in config.param("battery", [[1, 2], [2, 1], [3, -1]])]
    lengths = config.param("lengths", [100, 1000, 10000, 100000])
    x = float(rng.uniform())
    worst = 0.0
    for p, q in battery:
        for length in lengths[:2]:
            got = bilinear_average(sys, character(p), character(q), x, length)
            worst = max(worst, abs(got - average_closed_form(p, q, alpha, x, length)))
    result.add("average_closed_form_error", "", worst, "<= 1e-10")
    result.check(worst <= 1e-10, f"averages differ from the closed form by {worst:.3g}")

    half = max(1, len(battery) // 2)
    fit = series_envelope(battery[:half], alpha, x, lengths)
    check = series_envelope(battery[half:], alpha, x, lengths) if battery[half:] else fit
    result.add("series_envelope_pilot", "", fit.constant, "C")
    result.add("series_envelope_check", "", check.constant, f"<= {1.25 * fit.constant:.4g}")
    result.note(f"series envelope C = {fit.constant:.4g} (pilot), {check.constant:.4g} on held-out pairs")

    m_values = config.param("ledger_m", [4, 8, 16])
    r_values = [float(8 * m * m * s) for m in m_values for s in (1, 2, 4)]
    ledger = weight_ledger(m_values, r_values)
    for m, value in ledger.ledgers.items():
        result.add("weight_ledger", m, value, f"<= {ledger.constant / m:.4g}")

    jump_alpha = config.param("jump_alpha", 0.05)
    xs = [float(v) for v in np.asarray(rng.uniform(config.param("jump_points", 16)))]
    dyadic = [2**k - 1 for k in range(13)]
    sequences = [series_sequence(sys, character(1), character(2), xx, 2**12)[dyadic] for xx in xs]
    stats = jump_statistics(sequences, jump_alpha, 1.0 / len(xs))
    for big_j, measure, lower in stats.rows:
        result.add("jump_measure", big_j, measure, f"sqrt(J) alpha measure = {lower:.4g}")

    table_f = [int(v) for v in np.asarray(rng.integers(-3, 4, 12))]
    table_g = [int(v) for v in np.asarray(rng.integers(-3, 4, 12))]
    for period in (11, 12):
        identity = cyclic_average_identity(table_f[:period], table_g[:period])
        result.add("cyclic_identity", period, str(identity.lhs), f"= {identity.rhs}")
        result.check(identity.holds, f"cyclic identity fails for P={period}")
    return result


@_experiment(
    "lacunary",
    "Oscillation of A_N over a tail of N against the lacunary smoothed averages along "
    "d = 2^(1/n), with the exact gap ledger; series tail gaps along 2^k.",
    "plain gap <= smoothed gap + 2 ledger + 4 (1 - 1/d + 1/N0); smoothed gap nonincreasing in M and n "
    "up to the ledger tolerance",
    m_values=[4, 8, 16],
    n_values=[1, 2],
    tail=[6, 13],
    points=4,
)
def _lacunary(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("lacunary", ("M", "n", "plain_gap", "smoothed_gap", "ledger", "bound"))
    sys = DynamicalSystem.rotation(config.param("alpha", math.sqrt(2.0) - 1.0))
    rng = config.rng()
    xs = [float(v) for v in np.asarray(rng.uniform(config.param("points", 4)))]
    tail = tuple(config.param("tail", [6, 13]))
    try:
        report = lacunary_convergence_experiment(
            sys,
            character(1),
            character(2),
            xs,
            config.param("m_values", [4, 8, 16]),
            config.param("n_values", [1, 2]),
            (int(tail[0]), int(tail[1])),
        )
    except InvariantViolation as exc:
        result.check(False, str(exc))
        return result
    for row in report.rows:
        result.add(row.m, row.n, row.plain_gap, row.smoothed_gap, row.ledger, row.bound)
    for step in report.trend:
        result.note(
            f"smoothed gap along {step.axis} at {'n' if step.axis == 'M' else 'M'}={step.fixed}: "
            f"{step.start} -> {step.stop}: {step.gap_start:.4g} -> {step.gap_stop:.4g} (tolerance {step.tolerance:.4g})"
        )
        result.check(step.holds, f"smoothed gap grows along {step.axis} from {step.start} to {step.stop}")
    for start, gap in enumerate(report.series_gaps, start=max(int(tail[0]), 0)):
        result.note(f"series tail gap from 2^{start}: {gap:.4g}")
    result.check(
        all(x >= y for x, y in zip(report.series_gaps, report.series_gaps[1:])),
        "series tail gaps increase with the tail start",
    )
    for line in report.flagged:
        result.note(f"flag: {line}")
    return result


@_experiment(
    "transfer-bridge",
    "Random finitely supported phi, psi and scales k < k': the discrete operator in H and O "
    "form against the sampled construction on the line.",
    "H and O forms equal exactly; sampled construction within 1e-4",
    cases=20,
    support=3,
)
def _transfer_bridge(config: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult("transfer-bridge", ("case", "k", "k_prime", "M", "points", "max_error [target <= 1e-4]"))
    rng = config.rng()
    worst = 0.0
    for case in range(config.param("cases", 20)):
        size = config.param("support", 3)
        phi = {int(s): int(v) for s, v in zip(rng.integers(-6, 7, size), rng.integers(-3, 4, size))}
        psi = {int(s): int(v) for s, v in zip(rng.integers(-6, 7, size), rng.integers(-3, 4, size))}
        k = int(rng.integers(1, 4))
        k_prime = k + int(rng.integers(1, 3))
        m = int(rng.integers(2, 9))
        bridge = transfer_bridge(phi, psi, k, k_prime, m)
        worst = max(worst, bridge.max_error)
        result.add(case, k, k_prime, m, len(bridge.discrete), bridge.max_error)
    result.check(worst <= 1e-4, f"sampled construction differs by {worst:.3g}")
    result.note(f"worst bridge error {worst:.3g} over {len(result.rows)} cases")
    return result
