"""Scenario-driven command line front end.

One flat YAML file describes a physical setup (nucleus, field, two-level
drive, coupling tensors, run lengths); subcommands turn it into
deterministic CSV output:

    onersim steady-state [--scenario s.yaml] [--out x.csv]
    onersim pulse        ...
    onersim spectrum     ...
    onersim rabi-map     ... [sweep-axis flags]
    onersim coupled      ...
    onersim efg-mesh     ... [--which excited] [--mesh-scale 1.0]
    onersim ingest-check [--table t.csv]

All numbers are printed with 17 significant digits so repeated runs are
byte-identical.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 data-ingestion error.

Unit modes: "physical" uses the scenario values as stated.  "scaled"
keeps the two-level parameters and compresses the spectator hierarchy:
the Zeeman splitting gamma*B0 is set to omega / zeeman_ratio and the
coupling tensors are rescaled so their largest component is gamma*B0 /
quad_ratio (in angular-frequency terms), preserving tensor shapes.
Ratios >= 30 keep each tier well separated while making coupled runs
tractable; all reported frequencies simply rescale.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import qdyn
from .constants import TWO_PI, NucleusRecord, get_nucleus
from .efg import (
    FRAME_E,
    NqiTable,
    NqiTensor,
    TableFormatError,
    TableRangeError,
    load_nqi_table,
    surface_mesh,
)
from .oner import (
    StatePairNqi,
    TwoLevelParams,
    ZeroAmplitudeError,
    fit_rabi,
    fourier_coefficients,
    plan,
    q0_q1,
    simulate_coupled,
    simulate_pulsed_two_level,
    steady_state,
)
from .spin import (
    HierarchyWarning,
    allowed_transitions,
    make_spin,
    transition_amplitude,
    transition_energy,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INGESTION = 4

UNIT_PHYSICAL = "physical"
UNIT_SCALED = "scaled"

TENSOR_KEY_ORDER = "xx, yy, zz, xy, xz, yz"


class ScenarioError(ValueError):
    """Scenario file or key set violates the configuration contract."""


@dataclass
class Scenario:
    """Flat configuration record backing every subcommand.

    Frequencies are ordinary frequencies in Hz; angles in radians;
    tensor components in kHz as 6-lists ordered xx, yy, zz, xy, xz, yz
    in the E frame.  Unused keys are harmless for any given subcommand;
    unknown keys are rejected to catch typos.
    """

    nucleus: str = "9Be"
    b0_tesla: float = 1.0
    theta_rad: float = math.pi / 4.0
    omega_hz: float = 1.0e9
    decay_hz: float = 4.0e8
    dephasing_hz: float = 0.0
    detuning_hz: float = 0.0
    duty: float = 0.5
    gamma_tau: float = 50.0
    tau_s: float | None = None
    qg_khz: list[float] | None = None
    qe_khz: list[float] | None = None
    qeg_khz: list[float] | None = None
    table_path: str | None = None
    table_field_au: float | None = None
    table_ground_state: str | None = None
    table_excited_state: str | None = None
    transition_from: float = 1.5
    transition_to: float = 0.5
    duration_rabi_periods: float = 2.0
    n_samples: int = 400
    n_periods: int = 6
    samples_per_period: int = 512
    fourier_n_max: int = 10
    unit_mode: str = UNIT_PHYSICAL
    zeeman_ratio: float = 30.0
    quad_ratio: float = 30.0
    base_dir: Path | None = field(default=None, compare=False, repr=False)

    _FLOAT_KEYS = (
        "b0_tesla", "theta_rad", "omega_hz", "decay_hz", "dephasing_hz",
        "detuning_hz", "duty", "gamma_tau", "transition_from", "transition_to",
        "duration_rabi_periods", "zeeman_ratio", "quad_ratio",
    )
    _OPTIONAL_FLOAT_KEYS = ("tau_s", "table_field_au")
    _INT_KEYS = ("n_samples", "n_periods", "samples_per_period", "fourier_n_max")

    def __post_init__(self) -> None:
        # YAML 1.1 floats need a signed exponent ("1.0e+9"); the common
        # unsigned spelling arrives as a string, so coerce everything
        for key in self._FLOAT_KEYS + self._OPTIONAL_FLOAT_KEYS + self._INT_KEYS:
            val = getattr(self, key)
            if val is None and key in self._OPTIONAL_FLOAT_KEYS:
                continue
            try:
                setattr(self, key, int(val) if key in self._INT_KEYS else float(val))
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"{key} must be a number, got {val!r}") from exc
        for key in ("omega_hz", "decay_hz", "dephasing_hz", "b0_tesla"):
            if getattr(self, key) < 0:
                raise ScenarioError(f"{key} must be >= 0, got {getattr(self, key)}")
        if not 0.0 < self.duty < 1.0:
            raise ScenarioError(f"duty must lie in (0, 1), got {self.duty}")
        if self.unit_mode not in (UNIT_PHYSICAL, UNIT_SCALED):
            raise ScenarioError(
                f"unit_mode must be {UNIT_PHYSICAL!r} or {UNIT_SCALED!r}, got {self.unit_mode!r}"
            )
        if self.zeeman_ratio <= 0 or self.quad_ratio <= 0:
            raise ScenarioError("zeeman_ratio and quad_ratio must be > 0")
        for key in ("n_samples", "n_periods", "samples_per_period", "fourier_n_max"):
            if getattr(self, key) < 1:
                raise ScenarioError(f"{key} must be >= 1, got {getattr(self, key)}")
        for key in ("qg_khz", "qe_khz", "qeg_khz"):
            val = getattr(self, key)
            if val is not None:
                if len(val) != 6:
                    raise ScenarioError(
                        f"{key} must list 6 components ({TENSOR_KEY_ORDER}), got {len(val)}"
                    )
                try:
                    setattr(self, key, [float(v) for v in val])
                except (TypeError, ValueError) as exc:
                    raise ScenarioError(f"{key} components must be numbers") from exc

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path | None = None) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError(f"scenario must be a mapping, got {type(data).__name__}")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {', '.join(unknown)}")
        try:
            return cls(base_dir=base_dir, **data)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc

    def to_mapping(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "base_dir":
                continue
            out[f.name] = getattr(self, f.name)
        return out

    @property
    def transition(self) -> tuple[float, float]:
        return (float(self.transition_from), float(self.transition_to))


def load_scenario(path) -> Scenario:
    p = Path(path)
    with open(p, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    return Scenario.from_mapping(data, base_dir=p.parent)


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(sc.to_mapping(), sort_keys=False)


def default_scenario() -> Scenario:
    """The packaged illustrative setup (see data/default_scenario.yaml)."""
    res = resources.files("onersim").joinpath("data/default_scenario.yaml")
    with resources.as_file(res) as p:
        return load_scenario(p)


@dataclass(frozen=True)
class SweepGrid:
    """Axis definitions for the orientation/field-strength sweep."""

    theta_min: float
    theta_max: float
    theta_count: int
    field_min: float
    field_max: float
    field_count: int

    def __post_init__(self) -> None:
        if self.theta_count < 2 or self.field_count < 2:
            raise ScenarioError("sweep axis counts must be >= 2")
        for v in (self.theta_min, self.theta_max, self.field_min, self.field_max):
            if not math.isfinite(v):
                raise ScenarioError("sweep axis ranges must be finite")

    @property
    def thetas(self) -> np.ndarray:
        return np.linspace(self.theta_min, self.theta_max, self.theta_count)

    @property
    def fields(self) -> np.ndarray:
        return np.linspace(self.field_min, self.field_max, self.field_count)


# ---------------------------------------------------------------------------
# scenario resolution


def _tensor_from_components(comps: list[float]) -> NqiTensor:
    xx, yy, zz, xy, xz, yz = comps
    mat = [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
    return NqiTensor.from_khz(mat, frame=FRAME_E)


def _resolve_table_path(sc: Scenario) -> Path:
    if sc.table_path is None:
        raise ScenarioError("scenario does not set table_path")
    p = Path(sc.table_path)
    if not p.is_absolute() and sc.base_dir is not None:
        p = sc.base_dir / p
    return p


def scenario_table(sc: Scenario) -> NqiTable:
    return ingest_efg_table(_resolve_table_path(sc))


def scenario_pair(sc: Scenario) -> StatePairNqi:
    """State-pair tensors from inline components or the ingested table."""
    if sc.qg_khz is not None or sc.qe_khz is not None:
        if sc.qg_khz is None or sc.qe_khz is None:
            raise ScenarioError("inline tensors need both qg_khz and qe_khz")
        qeg = None if sc.qeg_khz is None else _tensor_from_components(sc.qeg_khz)
        return StatePairNqi(
            qg=_tensor_from_components(sc.qg_khz),
            qe=_tensor_from_components(sc.qe_khz),
            qeg=qeg,
        )
    if sc.table_path is not None:
        if (
            sc.table_field_au is None
            or sc.table_ground_state is None
            or sc.table_excited_state is None
        ):
            raise ScenarioError(
                "table-backed tensors need table_field_au, table_ground_state "
                "and table_excited_state"
            )
        table = scenario_table(sc)
        return StatePairNqi(
            qg=table.interpolate(sc.table_ground_state, sc.table_field_au),
            qe=table.interpolate(sc.table_excited_state, sc.table_field_au),
        )
    raise ScenarioError("scenario provides neither inline tensors nor a table source")


def scenario_params(sc: Scenario, tau: float | None = None) -> TwoLevelParams:
    return TwoLevelParams.from_hz(
        omega_rabi_hz=sc.omega_hz,
        decay_hz=sc.decay_hz,
        detuning_hz=sc.detuning_hz,
        dephasing_hz=sc.dephasing_hz,
        tau=tau,
        duty=sc.duty,
    )


def pulse_period(sc: Scenario) -> float:
    """Pulse period for the two-level run: tau_s, else gamma_tau/Gamma."""
    if sc.tau_s is not None:
        if sc.tau_s <= 0:
            raise ScenarioError(f"tau_s must be > 0, got {sc.tau_s}")
        return float(sc.tau_s)
    if sc.decay_hz <= 0:
        raise ScenarioError("cannot derive the pulse period from gamma_tau with decay_hz = 0")
    return sc.gamma_tau / (TWO_PI * sc.decay_hz)


@dataclass(frozen=True)
class ResolvedSetup:
    """Scenario after unit-mode handling: what the simulators consume."""

    nucleus: NucleusRecord
    pair: StatePairNqi
    params: TwoLevelParams
    theta: float
    b0_tesla: float
    transition: tuple[float, float]


def _apply_unit_mode(
    sc: Scenario, nucleus: NucleusRecord, pair: StatePairNqi, unit_mode: str
) -> tuple[NucleusRecord, StatePairNqi]:
    if unit_mode == UNIT_PHYSICAL:
        return nucleus, pair
    gamma_b0_hz = sc.omega_hz / sc.zeeman_ratio
    scaled_nucleus = replace(
        nucleus,
        name=f"scaled:{nucleus.name}",
        gamma_mhz_per_t=gamma_b0_hz / 1e6 / sc.b0_tesla,
    )
    target_rad = TWO_PI * gamma_b0_hz / sc.quad_ratio
    current = max(pair.qg.norm, pair.qe.norm)
    if current == 0.0:
        return scaled_nucleus, pair
    factor = target_rad / current
    scaled_pair = StatePairNqi(
        qg=pair.qg.scaled(factor),
        qe=pair.qe.scaled(factor),
        qeg=None if pair.qeg is None else pair.qeg.scaled(factor),
    )
    return scaled_nucleus, scaled_pair


def resolve_setup(sc: Scenario, unit_mode: str | None = None) -> ResolvedSetup:
    mode = unit_mode or sc.unit_mode
    if mode not in (UNIT_PHYSICAL, UNIT_SCALED):
        raise ScenarioError(f"unknown unit mode {mode!r}")
    nucleus = get_nucleus(sc.nucleus)
    pair = scenario_pair(sc)
    nucleus, pair = _apply_unit_mode(sc, nucleus, pair, mode)
    return ResolvedSetup(
        nucleus=nucleus,
        pair=pair,
        params=scenario_params(sc),
        theta=sc.theta_rad,
        b0_tesla=sc.b0_tesla,
        transition=sc.transition,
    )


# ---------------------------------------------------------------------------
# deterministic CSV assembly


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _csv_block(header: list[str], rows: list[list[float]]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _m_label(m: float) -> str:
    return f"p_{m:g}"


# ---------------------------------------------------------------------------
# subcommand bodies (pure: scenario in, CSV text out)


def run_steady_state(sc: Scenario) -> str:
    rho_ee, rho_eg = steady_state(scenario_params(sc))
    logger.info("steady state: rho_ee = %.6f, rho_eg = %s", rho_ee, rho_eg)
    return _csv_block(
        ["rho_ee_inf", "rho_eg_re", "rho_eg_im"],
        [[rho_ee, rho_eg.real, rho_eg.imag]],
    )


def run_pulse(sc: Scenario) -> str:
    tau = pulse_period(sc)
    params = scenario_params(sc, tau=tau)
    traj = simulate_pulsed_two_level(params, sc.n_periods, sc.samples_per_period)
    rows = [
        [t, traj.rho_ee[k], traj.rho_eg[k].real, traj.rho_eg[k].imag]
        for k, t in enumerate(traj.times)
    ]
    series = _csv_block(["t", "rho_ee", "rho_eg_re", "rho_eg_im"], rows)
    t_last, p_last = traj.last_period_slice(sc.samples_per_period)
    co = fourier_coefficients(t_last, p_last, sc.fourier_n_max)
    fourier = _csv_block(
        ["n", "a_n", "b_n"],
        [[float(n), co.a[n], co.b[n]] for n in range(sc.fourier_n_max + 1)],
    )
    return series + "\n" + fourier


def _spectrum_rows(
    nucleus: NucleusRecord, b0: float, q0: NqiTensor
) -> list[list[float]]:
    spin = make_spin(nucleus.two_I)
    rows = []
    for m_from, m_to in allowed_transitions(spin):
        zeeman = abs(nucleus.gamma_hz_per_t * b0 * (m_to - m_from))
        total = abs(
            transition_energy(m_from, m_to, nucleus.gamma_hz_per_t, b0, q0.qzz_hz, spin)
        )
        rows.append([m_from, m_to, zeeman, total - zeeman, total])
    return rows


def run_spectrum(sc: Scenario, unit_mode: str | None = None) -> str:
    setup = resolve_setup(sc, unit_mode)
    rho_inf, _ = steady_state(setup.params)
    pair_b = setup.pair.rotated_about_x(setup.theta) if setup.pair.frame == FRAME_E else setup.pair
    q0, _ = q0_q1(pair_b, rho_inf)
    rows = _spectrum_rows(setup.nucleus, setup.b0_tesla, q0)
    return _csv_block(
        ["transition_from", "transition_to", "zeeman_hz", "correction_hz", "total_hz"],
        rows,
    )


def run_rabi_map(sc: Scenario, grid: SweepGrid, unit_mode: str | None = None) -> str:
    """Rabi frequency and energy correction over (theta, field) nodes.

    Requires a table-backed scenario; each node interpolates the ground
    and excited tensors at that field, rotates by theta, and evaluates
    every |delta m| in {1, 2} transition.  Transitions with no drivable
    amplitude carry rabi_hz = 0 rather than erroring, so full maps
    always emit.
    """
    mode = unit_mode or sc.unit_mode
    if sc.table_ground_state is None or sc.table_excited_state is None:
        raise ScenarioError("rabi-map needs table_ground_state and table_excited_state")
    table = scenario_table(sc)
    nucleus = get_nucleus(sc.nucleus)
    spin = make_spin(nucleus.two_I)
    params = scenario_params(sc)
    rho_inf, _ = steady_state(params)
    transitions = allowed_transitions(spin)
    rows = []
    for theta in grid.thetas:
        for field_au in grid.fields:
            pair = StatePairNqi(
                qg=table.interpolate(sc.table_ground_state, field_au),
                qe=table.interpolate(sc.table_excited_state, field_au),
            )
            nuc, pair = _apply_unit_mode(sc, nucleus, pair, mode)
            pair_b = pair.rotated_about_x(theta)
            q0, q1 = q0_q1(pair_b, rho_inf)
            for m_from, m_to in transitions:
                g = abs(transition_amplitude(m_from, m_to, q1, spin))
                if g <= 1e-9 * max(q1.norm, 1e-300):
                    g = 0.0
                total = transition_energy(
                    m_from, m_to, nuc.gamma_hz_per_t, sc.b0_tesla, q0.qzz_hz, spin
                )
                zeeman = abs(nuc.gamma_hz_per_t * sc.b0_tesla * (m_to - m_from))
                rows.append([theta, field_au, m_from, m_to, g / TWO_PI, abs(total) - zeeman])
    return _csv_block(
        ["theta_rad", "field_au", "transition_from", "transition_to", "rabi_hz", "correction_hz"],
        rows,
    )


def run_coupled(sc: Scenario, unit_mode: str | None = None) -> str:
    """Full coupled run: normalized spin populations plus a fit summary.

    The time column is in units of the predicted Rabi period (t *
    predicted_rabi_hz); when the plan predicts no oscillation the
    column falls back to pulse periods and the summary carries the
    no-oscillation sentinel (NaN fit values).
    """
    setup = resolve_setup(sc, unit_mode)
    try:
        the_plan = plan(
            setup.pair, setup.nucleus, setup.b0_tesla, setup.theta, setup.params,
            setup.transition,
        )
        predicted = the_plan.predicted_rabi_hz
    except ZeroAmplitudeError as exc:
        logger.info("zero-amplitude transition, running anyway: %s", exc)
        predicted = 0.0
    tau = None
    if predicted > 0:
        duration = sc.duration_rabi_periods / predicted
    else:
        # no oscillation to resolve; cover a fixed number of pulses
        spin = make_spin(setup.nucleus.two_I)
        rho_inf, _ = steady_state(setup.params)
        pair_b = (
            setup.pair.rotated_about_x(setup.theta)
            if setup.pair.frame == FRAME_E
            else setup.pair
        )
        q0, _ = q0_q1(pair_b, rho_inf)
        rep = abs(
            transition_energy(
                setup.transition[0], setup.transition[1], setup.nucleus.gamma_hz_per_t,
                setup.b0_tesla, q0.qzz_hz, spin,
            )
        )
        tau = 1.0 / rep
        duration = 200.0 * tau
    traj = simulate_coupled(
        setup.pair,
        setup.nucleus,
        setup.b0_tesla,
        setup.theta,
        setup.params,
        setup.transition,
        duration,
        n_samples=sc.n_samples,
        allow_zero_amplitude=True,
    )
    scale = predicted if predicted > 0 else 1.0 / tau
    header = ["t_normalized"] + [_m_label(m) for m in traj.m_values]
    rows = [
        [t * scale] + list(traj.spin_populations[k]) for k, t in enumerate(traj.times)
    ]
    series = _csv_block(header, rows)

    target = traj.population_of(setup.transition[1])
    fit = fit_rabi(traj.times, target, predicted)
    if not fit.oscillating:
        logger.info("no oscillation detected; summary carries the sentinel")
        deviation = float("nan")
    elif predicted > 0:
        deviation = abs(fit.frequency_hz - predicted) / predicted
    else:
        deviation = float("nan")
    summary = _csv_block(
        ["fit_rabi_hz", "predicted_rabi_hz", "relative_deviation"],
        [[fit.frequency_hz if fit.oscillating else float("nan"), predicted, deviation]],
    )
    return series + "\n" + summary


def run_efg_mesh(tensor, s: float, n_theta: int, n_phi: int) -> str:
    mesh = surface_mesh(tensor, s, n_theta, n_phi)
    rows = [list(row) for row in mesh.iter_rows()]
    return _csv_block(["theta_rad", "phi_rad", "radius", "sign"], rows)


def ingest_efg_table(path) -> NqiTable:
    """Load and validate an NQI-vs-field table (the CLI ingestion gate)."""
    try:
        return load_nqi_table(path)
    except FileNotFoundError as exc:
        raise TableFormatError(f"table file not found: {path}") from exc


def ingest_report(table: NqiTable) -> str:
    lines = [f"table ok: {len(table.states)} states, {table.n_rows()} rows"]
    for state in table.states:
        lo, hi = table.field_range(state)
        lines.append(f"  state {state}: field range [{_fmt(lo)}, {_fmt(hi)}] a.u.")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argparse front end


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario YAML (default: packaged example)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument(
        "--unit-mode",
        choices=[UNIT_PHYSICAL, UNIT_SCALED],
        help="override the scenario's unit_mode",
    )
    p.add_argument("--verbose", action="store_true", help="info-level notes on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onersim",
        description="Pulsed-modulation nuclear spin control: deterministic CSV runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady-state", help="driven two-level steady state")
    _add_common(p)
    p.set_defaults(func=_cmd_steady_state)

    p = sub.add_parser("pulse", help="pulsed two-level time series + Fourier block")
    _add_common(p)
    p.set_defaults(func=_cmd_pulse)

    p = sub.add_parser("spectrum", help="spin transition energies with Q0 corrections")
    _add_common(p)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("rabi-map", help="Rabi frequency sweep over theta and field")
    _add_common(p)
    p.add_argument("--theta-min", type=float, default=0.0)
    p.add_argument("--theta-max", type=float, default=math.pi / 2.0)
    p.add_argument("--theta-count", type=int, default=9)
    p.add_argument("--field-min", type=float, default=None, help="default: table minimum")
    p.add_argument("--field-max", type=float, default=None, help="default: table maximum")
    p.add_argument("--field-count", type=int, default=5)
    p.set_defaults(func=_cmd_rabi_map)

    p = sub.add_parser("coupled", help="full electron-nucleus density-matrix run")
    _add_common(p)
    p.set_defaults(func=_cmd_coupled)

    p = sub.add_parser("efg-mesh", help="radial surface map of a coupling tensor")
    _add_common(p)
    p.add_argument(
        "--which",
        choices=["ground", "excited", "difference"],
        default="excited",
        help="which scenario tensor to map",
    )
    p.add_argument("--mesh-scale", type=float, default=1.0)
    p.add_argument("--n-theta", type=int, default=24)
    p.add_argument("--n-phi", type=int, default=48)
    p.set_defaults(func=_cmd_efg_mesh)

    p = sub.add_parser("ingest-check", help="validate an NQI-vs-field table")
    _add_common(p)
    p.add_argument("--table", help="table path (default: scenario's table_path)")
    p.set_defaults(func=_cmd_ingest_check)

    return parser


def _scenario_for(args) -> Scenario:
    if args.scenario:
        return load_scenario(args.scenario)
    return default_scenario()


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_steady_state(args) -> int:
    _emit(args, run_steady_state(_scenario_for(args)))
    return EXIT_OK


def _cmd_pulse(args) -> int:
    _emit(args, run_pulse(_scenario_for(args)))
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    _emit(args, run_spectrum(_scenario_for(args), args.unit_mode))
    return EXIT_OK


def _cmd_rabi_map(args) -> int:
    sc = _scenario_for(args)
    fmin, fmax = args.field_min, args.field_max
    if fmin is None or fmax is None:
        table = scenario_table(sc)
        state = sc.table_ground_state or table.states[0]
        lo, hi = table.field_range(state)
        fmin = lo if fmin is None else fmin
        fmax = hi if fmax is None else fmax
    grid = SweepGrid(
        theta_min=args.theta_min,
        theta_max=args.theta_max,
        theta_count=args.theta_count,
        field_min=fmin,
        field_max=fmax,
        field_count=args.field_count,
    )
    _emit(args, run_rabi_map(sc, grid, args.unit_mode))
    return EXIT_OK


def _cmd_coupled(args) -> int:
    _emit(args, run_coupled(_scenario_for(args), args.unit_mode))
    return EXIT_OK


def _cmd_efg_mesh(args) -> int:
    sc = _scenario_for(args)
    pair = scenario_pair(sc)
    tensor = {"ground": pair.qg, "excited": pair.qe, "difference": pair.delta}[args.which]
    _emit(args, run_efg_mesh(tensor, args.mesh_scale, args.n_theta, args.n_phi))
    return EXIT_OK


def _cmd_ingest_check(args) -> int:
    if args.table:
        table = ingest_efg_table(args.table)
    else:
        table = scenario_table(_scenario_for(args))
    _emit(args, ingest_report(table))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # hierarchy notes must reach the user every time, not once per process
    warnings.simplefilter("always", HierarchyWarning)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (TableFormatError, TableRangeError) as exc:
        print(f"onersim: ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except qdyn.IntegrationFailureError as exc:
        print(f"onersim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RuntimeError as exc:
        print(f"onersim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"onersim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"onersim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
