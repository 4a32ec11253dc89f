"""Protocol core: pulsed two-level dynamics and quadupole-driven spin control.

A pulsed optical drive toggles an electronic two-level system between its
ground and excited states; because the two states see different electric
field gradients, the nuclear quadrupole coupling inherits the pulse
pattern.  At repetition rates resonant with a nuclear spin transition the
modulated part of the coupling drives coherent Rabi oscillations.

The pipeline implemented here:

1. steady_state / simulate_pulsed_two_level: the driven, decaying
   two-level system in the rotating frame, with collapse channels for
   spontaneous decay (sigma, rate Gamma) and pure dephasing (sigma_z,
   rate gamma_c / 2).
2. fourier_coefficients: harmonic content of the excited-state
   population over one pulse period.
3. q0_q1: the static tensor Q0 and the fundamental-harmonic amplitude
   Q1 of the effective coupling, built from the square-wave limit of the
   population (DC value rho_inf / 2, fundamental 2 rho_inf / pi).
4. plan: repetition rate from the first-order transition energy with
   Q0, predicted Rabi frequency |g(Q1)| / 2 pi from the transition
   amplitude.
5. simulate_spin_effective / simulate_coupled: the spin-only model with
   a harmonically modulated tensor, and the full 2 x (2I+1) density
   matrix with the operator-valued coupling, for cross-validation.

Angular frequencies (rad/s) internally; exported rates in Hz.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import qdyn
from .constants import TWO_PI, NucleusRecord
from .efg import FRAME_B, FRAME_E, NqiTensor, rotate_about_x
from .qdyn import CollapseChannel, DensityOperator, PropagationDiagnostics
from .spin import (
    HierarchyWarning,
    SpinSystem,
    make_spin,
    quadrupole_hamiltonian,
    transition_amplitude,
    transition_energy,
    zeeman_hamiltonian,
)

# two-level basis: index 0 = ground, 1 = excited
SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PROJ_G = np.diag([1.0, 0.0]).astype(complex)
PROJ_E = np.diag([0.0, 1.0]).astype(complex)

# "much greater" threshold for the pulse-rate hierarchy warning
HIERARCHY_MIN_PRODUCT = 10.0

# relative amplitude below which a transition counts as forbidden
ZERO_AMPLITUDE_RTOL = 1e-9


class NoSteadyStateError(ValueError):
    """Steady state requested for an undamped two-level system."""


class ZeroAmplitudeError(ValueError):
    """The requested transition has no drivable amplitude."""


@dataclass(frozen=True)
class TwoLevelParams:
    """Two-level drive and damping parameters, angular frequency units.

    Attributes:
        omega_rabi: drive amplitude Omega, rad/s.
        decay: spontaneous decay rate Gamma, rad/s.
        detuning: drive detuning Delta, rad/s (any sign).
        dephasing: pure dephasing rate gamma_c, rad/s.
        tau: pulse repetition period in seconds (None for continuous
            drive uses).
        duty: fraction of tau with the drive on.
    """

    omega_rabi: float
    decay: float
    detuning: float = 0.0
    dephasing: float = 0.0
    tau: float | None = None
    duty: float = 0.5

    def __post_init__(self) -> None:
        if self.omega_rabi < 0:
            raise ValueError(f"omega_rabi must be >= 0, got {self.omega_rabi}")
        if self.decay < 0 or self.dephasing < 0:
            raise ValueError("decay and dephasing rates must be >= 0")
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must lie in (0, 1), got {self.duty}")
        if self.tau is not None:
            if self.tau <= 0:
                raise ValueError(f"tau must be > 0, got {self.tau}")
            # the effective-tensor construction assumes many drive and
            # decay cycles per pulse half-period
            if (
                self.omega_rabi * self.tau < HIERARCHY_MIN_PRODUCT
                or self.decay * self.tau < HIERARCHY_MIN_PRODUCT
            ):
                warnings.warn(
                    f"pulse hierarchy weak: omega*tau = {self.omega_rabi * self.tau:.3g}, "
                    f"decay*tau = {self.decay * self.tau:.3g} "
                    f"(want both >> 1, at least {HIERARCHY_MIN_PRODUCT:g})",
                    HierarchyWarning,
                    stacklevel=3,
                )

    @classmethod
    def from_hz(
        cls,
        omega_rabi_hz: float,
        decay_hz: float,
        detuning_hz: float = 0.0,
        dephasing_hz: float = 0.0,
        tau: float | None = None,
        duty: float = 0.5,
    ) -> "TwoLevelParams":
        return cls(
            omega_rabi=TWO_PI * omega_rabi_hz,
            decay=TWO_PI * decay_hz,
            detuning=TWO_PI * detuning_hz,
            dephasing=TWO_PI * dephasing_hz,
            tau=tau,
            duty=duty,
        )

    @property
    def gamma_perp(self) -> float:
        """Transverse relaxation rate Gamma/2 + gamma_c."""
        return self.decay / 2.0 + self.dephasing


@dataclass(frozen=True)
class StatePairNqi:
    """NQI tensors of the electronic ground and excited states.

    The optional off-diagonal tensor qeg couples through the electronic
    coherence; it time-averages out at optical carrier frequencies and
    defaults to absent.
    """

    qg: NqiTensor
    qe: NqiTensor
    qeg: NqiTensor | None = None

    def __post_init__(self) -> None:
        frames = {self.qg.frame, self.qe.frame}
        if self.qeg is not None:
            frames.add(self.qeg.frame)
        if len(frames) != 1:
            raise ValueError(f"state-pair tensors must share one frame, got {sorted(frames)}")

    @property
    def frame(self) -> str:
        return self.qg.frame

    @property
    def delta(self) -> NqiTensor:
        """Difference tensor Qe - Qg."""
        return NqiTensor(self.qe.matrix - self.qg.matrix, frame=self.frame)

    def rotated_about_x(self, theta: float) -> "StatePairNqi":
        return StatePairNqi(
            qg=rotate_about_x(self.qg, theta),
            qe=rotate_about_x(self.qe, theta),
            qeg=None if self.qeg is None else rotate_about_x(self.qeg, theta),
        )


@dataclass(frozen=True)
class OnerPlan:
    """Resolved drive plan for one spin transition.

    repetition_rate_hz is |transition energy| evaluated with Q0, so the
    pulse train is resonant by construction; predicted_rabi_hz is
    |g(Q1)| / 2 pi, the full population-cycle frequency under the
    resonant rotating-wave treatment of a sin-modulated coupling.
    """

    q0: NqiTensor
    q1: NqiTensor
    transition: tuple[float, float]
    repetition_rate_hz: float
    predicted_rabi_hz: float


def steady_state(params: TwoLevelParams) -> tuple[float, complex]:
    """Long-time excited population and coherence of the driven system.

    Returns (rho_ee, rho_eg) with rho_eg the rotating-frame coherence
    <e|rho|g>.  Requires decay > 0; an undamped system keeps oscillating
    and has no steady state.
    """
    if params.decay <= 0:
        raise NoSteadyStateError("steady state requires a nonzero decay rate")
    gp = params.gamma_perp
    om, dl, gam = params.omega_rabi, params.detuning, params.decay
    denom = 1.0 + (dl / gp) ** 2 + om * om / (gp * gam)
    rho_ee = (om * om / (2.0 * gp * gam)) / denom
    rho_eg = (1j * om / (2.0 * gp)) * (1.0 + 1j * dl / gp) / denom
    return rho_ee, complex(rho_eg)


def drive_hamiltonian(params: TwoLevelParams, on: bool) -> np.ndarray:
    """Rotating-frame two-level Hamiltonian, drive on or off, rad/s."""
    h = np.zeros((2, 2), dtype=complex)
    h[1, 1] = -params.detuning
    if on:
        h[0, 1] = h[1, 0] = -params.omega_rabi / 2.0
    return h


def collapse_channels(params: TwoLevelParams) -> list[CollapseChannel]:
    """Decay (sigma, rate Gamma) and dephasing (sigma_z, rate gamma_c/2)."""
    out = []
    if params.decay > 0:
        out.append(CollapseChannel(SIGMA, params.decay))
    if params.dephasing > 0:
        out.append(CollapseChannel(SIGMA_Z, params.dephasing / 2.0))
    return out


def _merge_close(points: np.ndarray, tol: float) -> np.ndarray:
    """Ascending unique points, merging values closer than tol."""
    pts = np.sort(np.asarray(points, dtype=float))
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] > tol:
            keep.append(p)
    return np.array(keep)


def _run_piecewise(
    segments: Sequence[tuple[float, float, np.ndarray]],
    channels: Sequence[CollapseChannel],
    rho0: DensityOperator,
    sample_times: np.ndarray,
    *,
    max_step_phase: float,
) -> tuple[list[DensityOperator], PropagationDiagnostics]:
    """Propagate through contiguous constant-Hamiltonian segments.

    Collects the state at each requested sample time (all of which must
    fall inside the covered range).  Segment boundaries are integrated
    exactly: no RK4 stage ever samples across a discontinuity.
    """
    samples = np.asarray(sample_times, dtype=float)
    span = segments[-1][1] - segments[0][0]
    tol = 1e-12 * max(span, 1.0)
    diag = PropagationDiagnostics()
    collected: list[DensityOperator] = []
    idx = 0
    state = rho0
    for t0, t1, h in segments:
        inside = []
        while idx < samples.size and samples[idx] <= t1 + tol:
            inside.append(samples[idx])
            idx += 1
        grid = _merge_close(np.concatenate(([t0, t1], np.asarray(inside))), tol)
        res = qdyn.propagate(h, channels, state, grid, max_step_phase=max_step_phase)
        diag = diag.merge(res.diagnostics)
        for want in inside:
            k = int(np.argmin(np.abs(grid - want)))
            collected.append(res.states[k])
        state = res.states[-1]
    if idx != samples.size:
        raise ValueError("sample times extend beyond the final segment")
    return collected, diag


def _pulse_segment_list(
    params: TwoLevelParams, t_end: float, h_on: np.ndarray, h_off: np.ndarray
) -> list[tuple[float, float, np.ndarray]]:
    """Alternating on/off constant-H segments covering [0, t_end]."""
    tau, duty = params.tau, params.duty
    segments: list[tuple[float, float, np.ndarray]] = []
    k = 0
    t = 0.0
    while t < t_end - 1e-12 * t_end:
        on_end = (k + duty) * tau
        off_end = (k + 1.0) * tau
        segments.append((k * tau, min(on_end, t_end), h_on))
        if on_end < t_end:
            segments.append((on_end, min(off_end, t_end), h_off))
        t = off_end
        k += 1
    return segments


@dataclass
class TwoLevelTrajectory:
    """Sampled two-level state under the pulse train."""

    times: np.ndarray
    rho_ee: np.ndarray
    rho_eg: np.ndarray  # rotating-frame <e|rho|g>
    diagnostics: PropagationDiagnostics

    def last_period_slice(self, samples_per_period: int) -> tuple[np.ndarray, np.ndarray]:
        """(times, rho_ee) of the final full period, half-open [0, tau)."""
        t = self.times[-samples_per_period - 1 : -1]
        p = self.rho_ee[-samples_per_period - 1 : -1]
        return t, p


def simulate_pulsed_two_level(
    params: TwoLevelParams,
    n_periods: int,
    samples_per_period: int,
    *,
    rho0: DensityOperator | None = None,
    max_step_phase: float = qdyn.DEFAULT_MAX_STEP_PHASE,
) -> TwoLevelTrajectory:
    """Propagate the two-level system over an integer number of pulses.

    The drive is on for the first duty fraction of each period.  Output
    samples sit at uniform fractions j / samples_per_period of each
    period plus the final endpoint, so the last period provides exactly
    the half-open window fourier_coefficients expects.
    """
    if params.tau is None:
        raise ValueError("params.tau must be set for a pulsed simulation")
    if n_periods < 1 or samples_per_period < 2:
        raise ValueError("need n_periods >= 1 and samples_per_period >= 2")
    tau = params.tau
    samples = np.array(
        [(k + j / samples_per_period) * tau for k in range(n_periods) for j in range(samples_per_period)]
        + [n_periods * tau]
    )
    h_on = drive_hamiltonian(params, on=True)
    h_off = drive_hamiltonian(params, on=False)
    segments = _pulse_segment_list(params, n_periods * tau, h_on, h_off)
    if rho0 is None:
        rho0 = DensityOperator.pure(0, dim=2)
    states, diag = _run_piecewise(
        segments, collapse_channels(params), rho0, samples, max_step_phase=max_step_phase
    )
    rho_ee = np.array([s.population(1) for s in states])
    rho_eg = np.array([s.matrix[1, 0] for s in states])
    return TwoLevelTrajectory(times=samples, rho_ee=rho_ee, rho_eg=rho_eg, diagnostics=diag)


@dataclass
class FourierSeries:
    """Real Fourier coefficients; index n runs from 0 to n_max.

    The series convention is f(t) = a[0]/2 + sum_n (a[n] cos + b[n] sin),
    so a constant c appears as a[0] = 2c.  b[0] is fixed at 0.
    """

    a: np.ndarray
    b: np.ndarray

    @property
    def a0(self) -> float:
        return float(self.a[0])

    @property
    def n_max(self) -> int:
        return len(self.a) - 1


def fourier_coefficients(times, values, n_max: int) -> FourierSeries:
    """Fourier coefficients of one period of a sampled series.

    Args:
        times: uniform sample times covering exactly one period as a
            half-open window [t0, t0 + tau); the phase reference is
            times[0].
        values: series samples.
        n_max: highest harmonic index.

    Uses a_n = (2/tau) integral f cos(omega_n t) dt (and sin for b_n)
    with omega_n = 2 pi n / tau, evaluated by the trapezoid rule, which
    for uniform periodic samples reduces to the plain average.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.size < 2 or t.shape != v.shape:
        raise ValueError("times and values must be matching 1-D arrays, length >= 2")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
        raise ValueError("sampling must be uniform over the period")
    n = t.size
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if n_max >= n / 2:
        raise ValueError(f"n_max = {n_max} unresolvable with {n} samples per period")
    tau = n * float(dt[0])
    rel = t - t[0]
    a = np.empty(n_max + 1)
    b = np.zeros(n_max + 1)
    a[0] = 2.0 * float(np.mean(v))
    for k in range(1, n_max + 1):
        w = TWO_PI * k / tau
        a[k] = 2.0 * float(np.mean(v * np.cos(w * rel)))
        b[k] = 2.0 * float(np.mean(v * np.sin(w * rel)))
    return FourierSeries(a=a, b=b)


def effective_nqi_series(
    trajectory: TwoLevelTrajectory,
    pair: StatePairNqi,
    carrier_omega: float | None = None,
) -> list[NqiTensor]:
    """Electronic-state-averaged coupling tensor along a trajectory.

    <Q>(t) = rho_ee Qe + (1 - rho_ee) Qg + 2 Re{rho_eg(t)} Qeg.  The
    stored coherence is the rotating-frame one; when carrier_omega is
    given the optical phase factor is restored before taking the real
    part, which is what makes the Qeg term average out on spin
    timescales.
    """
    out = []
    qg, qe = pair.qg.matrix, pair.qe.matrix
    for k, t in enumerate(trajectory.times):
        p = trajectory.rho_ee[k]
        mat = p * qe + (1.0 - p) * qg
        if pair.qeg is not None:
            coh = trajectory.rho_eg[k]
            if carrier_omega is not None:
                coh = coh * np.exp(-1j * carrier_omega * t)
            mat = mat + 2.0 * np.real(coh) * pair.qeg.matrix
        out.append(NqiTensor(mat, frame=pair.frame))
    return out


def q0_q1(pair: StatePairNqi, rho_ee_inf: float) -> tuple[NqiTensor, NqiTensor]:
    """Static and fundamental-harmonic parts of the effective coupling.

    Q0 = Qg + (rho_inf / 2) (Qe - Qg) is the cycle-averaged tensor;
    Q1 = (2 rho_inf / pi) (Qe - Qg) is the amplitude of the sin term at
    the repetition rate, both from the square-wave limit of rho_ee(t).
    """
    if not -1e-6 <= rho_ee_inf <= 0.5 + 1e-6:
        raise ValueError(
            f"rho_ee_inf = {rho_ee_inf:.6g} outside the physical range [0, 1/2]"
        )
    dq = pair.qe.matrix - pair.qg.matrix
    q0 = NqiTensor(pair.qg.matrix + (rho_ee_inf / 2.0) * dq, frame=pair.frame)
    q1 = NqiTensor((2.0 * rho_ee_inf / math.pi) * dq, frame=pair.frame)
    return q0, q1


def _pair_in_b_frame(pair: StatePairNqi, theta: float) -> StatePairNqi:
    if pair.frame == FRAME_E:
        return pair.rotated_about_x(theta)
    if pair.frame == FRAME_B:
        return pair
    raise ValueError(f"state pair frame must be {FRAME_E!r} or {FRAME_B!r}, got {pair.frame!r}")


def plan(
    pair: StatePairNqi,
    nucleus: NucleusRecord,
    b0_tesla: float,
    theta: float,
    params: TwoLevelParams,
    transition: tuple[float, float],
    *,
    allow_zero_amplitude: bool = False,
) -> OnerPlan:
    """Resolve pulse-train parameters for one target spin transition.

    Rotates the state-pair tensors into the magnetic-field frame,
    computes Q0 and Q1 from the drive steady state, sets the repetition
    rate to the Q0-corrected transition energy, and predicts the Rabi
    frequency from the Q1 transition amplitude.  A transition whose
    amplitude vanishes (symmetry-forbidden, or suppressed by geometry
    such as a diagonal tensor at theta = 0) raises ZeroAmplitudeError
    unless allow_zero_amplitude, which instead records a zero predicted
    Rabi frequency (useful for deliberately off-target runs).
    """
    spin = make_spin(nucleus.two_I)
    m_from, m_to = transition
    pair_b = _pair_in_b_frame(pair, theta)
    rho_inf, _ = steady_state(params)
    q0, q1 = q0_q1(pair_b, rho_inf)
    rep_hz = abs(
        transition_energy(m_from, m_to, nucleus.gamma_hz_per_t, b0_tesla, q0.qzz_hz, spin)
    )
    g = transition_amplitude(m_from, m_to, q1, spin)
    if abs(g) <= ZERO_AMPLITUDE_RTOL * max(q1.norm, 1e-300):
        if not allow_zero_amplitude:
            raise ZeroAmplitudeError(
                f"transition {m_from:g} -> {m_to:g} cannot be driven: amplitude "
                f"|g| = {abs(g):.3e} rad/s vanishes relative to the modulated tensor "
                f"(norm {q1.norm:.3e}); either the geometric prefactor is identically "
                "zero for this level pair or the relevant tensor components vanish "
                "at this orientation"
            )
        g = 0.0
    return OnerPlan(
        q0=q0,
        q1=q1,
        transition=(float(m_from), float(m_to)),
        repetition_rate_hz=rep_hz,
        predicted_rabi_hz=abs(g) / TWO_PI,
    )


def detuned(plan_: OnerPlan, rate_offset_hz: float) -> OnerPlan:
    """Copy of a plan with the repetition rate shifted off resonance."""
    return replace(plan_, repetition_rate_hz=plan_.repetition_rate_hz + rate_offset_hz)


@dataclass
class SpinTrajectory:
    """Spin populations under the effective modulated coupling."""

    times: np.ndarray
    populations: np.ndarray  # shape (n_times, 2I+1), basis order of m_values
    m_values: np.ndarray
    diagnostics: PropagationDiagnostics

    def population_of(self, m: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.m_values - m)))
        if abs(self.m_values[idx] - m) > 1e-9:
            raise ValueError(f"no level with m = {m}")
        return self.populations[:, idx]


def _check_plan_consistency(plan_: OnerPlan, pair_b: StatePairNqi) -> None:
    """Verify the plan's tensors derive from this pair (any rho_inf)."""
    dq = pair_b.delta.matrix
    q1 = plan_.q1.matrix
    scale = max(float(np.max(np.abs(q1))), float(np.max(np.abs(dq))), 1e-300)
    # Q1 parallel to Qe - Qg
    cross = np.abs(np.outer(q1.ravel(), dq.ravel()) - np.outer(dq.ravel(), q1.ravel()))
    if float(np.max(cross)) > 1e-9 * scale * scale:
        raise ValueError("plan.q1 is not proportional to Qe - Qg of the supplied pair")
    # Q0 - Qg = (pi / 4) Q1 regardless of the steady-state value
    resid = plan_.q0.matrix - pair_b.qg.matrix - (math.pi / 4.0) * q1
    if float(np.max(np.abs(resid))) > 1e-9 * scale:
        raise ValueError("plan.q0 inconsistent with the supplied pair")


def simulate_spin_effective(
    plan_: OnerPlan,
    pair: StatePairNqi,
    nucleus: NucleusRecord,
    b0_tesla: float,
    theta: float,
    duration: float,
    *,
    initial_m: float | None = None,
    n_samples: int = 400,
    max_step_phase: float = qdyn.DEFAULT_MAX_STEP_PHASE,
) -> SpinTrajectory:
    """Unitary spin evolution under H(t) = H_zeeman + H_Q0 + H_Q1 sin(wt).

    The modulation frequency is the plan's repetition rate.  The spin
    starts in the pure level initial_m (default: the transition's source
    level).  No spin decoherence channels are applied.
    """
    spin = make_spin(nucleus.two_I)
    pair_b = _pair_in_b_frame(pair, theta)
    _check_plan_consistency(plan_, pair_b)
    if duration <= 0:
        raise ValueError("duration must be > 0")
    h0 = zeeman_hamiltonian(nucleus.gamma_hz_per_t, b0_tesla, spin) + quadrupole_hamiltonian(
        plan_.q0, spin
    )
    h1 = quadrupole_hamiltonian(plan_.q1, spin)
    omega_mod = TWO_PI * plan_.repetition_rate_hz
    if initial_m is None:
        initial_m = plan_.transition[0]
    rho0 = DensityOperator.pure(spin.index_of(initial_m), dim=spin.dim)
    grid = np.linspace(0.0, duration, n_samples + 1)
    res = qdyn.propagate_modulated(
        h0,
        h1,
        lambda t: math.sin(omega_mod * t),
        (),
        rho0,
        grid,
        envelope_bound=1.0,
        max_step_phase=max_step_phase,
    )
    return SpinTrajectory(
        times=grid,
        populations=res.populations(),
        m_values=spin.m_values,
        diagnostics=res.diagnostics,
    )


@dataclass
class CoupledTrajectory:
    """Spin and electronic observables of the full coupled simulation."""

    times: np.ndarray
    spin_populations: np.ndarray  # shape (n_times, 2I+1)
    m_values: np.ndarray
    rho_ee: np.ndarray  # excited-state population of the two-level factor
    plan: OnerPlan
    diagnostics: PropagationDiagnostics

    def population_of(self, m: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.m_values - m)))
        if abs(self.m_values[idx] - m) > 1e-9:
            raise ValueError(f"no level with m = {m}")
        return self.spin_populations[:, idx]


def simulate_coupled(
    pair: StatePairNqi,
    nucleus: NucleusRecord,
    b0_tesla: float,
    theta: float,
    params: TwoLevelParams,
    transition: tuple[float, float],
    duration: float,
    *,
    initial_m: float | None = None,
    n_samples: int = 400,
    max_step_phase: float = qdyn.DEFAULT_MAX_STEP_PHASE,
    max_substeps: float = 1e9,
    allow_zero_amplitude: bool = False,
) -> CoupledTrajectory:
    """Full 2 x (2I+1) density-matrix run of the pulsed coupled system.

    The Hamiltonian is H_2L(t) x 1 + 1 x H_zeeman + sum_uv Q_uv x I_u I_v
    with the operator-valued tensor taking the ground/excited (and
    optionally off-diagonal) block values; the two-level collapse
    channels act as c x 1.  The pulse period is set by the plan's
    repetition rate, so the train is resonant with the chosen
    transition.  Spin populations are reported from the partial trace.

    Physically scaled hierarchies (optical rates vs kHz couplings) can
    demand astronomically many substeps; the run then aborts with advice
    to use proportionally rescaled inputs, which leave the Rabi physics
    invariant.  Pass max_substeps=float("inf") to force a physical run.
    """
    the_plan = plan(
        pair, nucleus, b0_tesla, theta, params, transition,
        allow_zero_amplitude=allow_zero_amplitude,
    )
    spin = make_spin(nucleus.two_I)
    pair_b = _pair_in_b_frame(pair, theta)
    if duration <= 0:
        raise ValueError("duration must be > 0")
    tau = 1.0 / the_plan.repetition_rate_hz
    pulse_params = replace(params, tau=tau)

    d = spin.dim
    eye_s = np.eye(d, dtype=complex)
    h_spin = zeeman_hamiltonian(nucleus.gamma_hz_per_t, b0_tesla, spin)
    h_static = (
        qdyn.kron(np.eye(2), h_spin)
        + qdyn.kron(PROJ_G, quadrupole_hamiltonian(pair_b.qg, spin))
        + qdyn.kron(PROJ_E, quadrupole_hamiltonian(pair_b.qe, spin))
    )
    if pair_b.qeg is not None:
        h_static += qdyn.kron(SIGMA + SIGMA.conj().T, quadrupole_hamiltonian(pair_b.qeg, spin))
    h_on = h_static + qdyn.kron(drive_hamiltonian(pulse_params, on=True), eye_s)
    h_off = h_static + qdyn.kron(drive_hamiltonian(pulse_params, on=False), eye_s)

    channels = [
        CollapseChannel(qdyn.kron(ch.operator, eye_s), ch.rate)
        for ch in collapse_channels(pulse_params)
    ]

    scale = max(qdyn.total_rate(channels), float(np.max(np.abs(h_on))))
    est = duration * scale / max_step_phase
    if est > max_substeps:
        raise qdyn.IntegrationFailureError(
            f"run needs about {est:.2e} RK4 substeps (limit {max_substeps:.2e}); "
            "rescale the inputs proportionally (scaled-unit mode) so the rate "
            "hierarchy stays >= ~30 per tier without the optical-frequency gap"
        )

    if initial_m is None:
        initial_m = float(transition[0])
    # product basis |g> x |m>: ground block occupies indices [0, d)
    rho0 = DensityOperator.pure(spin.index_of(initial_m), dim=2 * d)

    samples = np.linspace(0.0, duration, n_samples + 1)
    segments = _pulse_segment_list(pulse_params, duration, h_on, h_off)
    states, diag = _run_piecewise(
        segments, channels, rho0, samples, max_step_phase=max_step_phase
    )
    spin_pops = np.empty((len(states), d))
    rho_ee = np.empty(len(states))
    for k, s in enumerate(states):
        reduced_spin = qdyn.partial_trace(s.matrix, (2, d), keep=1)
        spin_pops[k] = np.real(np.diag(reduced_spin))
        reduced_2l = qdyn.partial_trace(s.matrix, (2, d), keep=0)
        rho_ee[k] = float(np.real(reduced_2l[1, 1]))
    return CoupledTrajectory(
        times=samples,
        spin_populations=spin_pops,
        m_values=spin.m_values,
        rho_ee=rho_ee,
        plan=the_plan,
        diagnostics=diag,
    )


@dataclass
class RabiFit:
    """Result of fitting A sin^2(pi nu t) + c to a population trace."""

    frequency_hz: float
    amplitude: float
    offset: float
    peak: float
    oscillating: bool

    FLAT_THRESHOLD = 1e-6


def fit_rabi(times, populations, frequency_guess_hz: float) -> RabiFit:
    """Least-squares Rabi frequency from a population time trace.

    Fits p(t) = A sin^2(pi nu t) + c.  A flat trace (peak-to-peak below
    RabiFit.FLAT_THRESHOLD) returns the no-oscillation sentinel with
    frequency NaN rather than a fake fit.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float)
    if t.shape != p.shape or t.ndim != 1 or t.size < 8:
        raise ValueError("need matching 1-D arrays with at least 8 samples")
    span = float(np.ptp(p))
    peak = float(np.max(p))
    if span < RabiFit.FLAT_THRESHOLD or frequency_guess_hz <= 0:
        return RabiFit(
            frequency_hz=float("nan"),
            amplitude=0.0,
            offset=float(np.mean(p)),
            peak=peak,
            oscillating=False,
        )

    def model(tt, amp, nu, off):
        return amp * np.sin(np.pi * nu * tt) ** 2 + off

    popt, _ = curve_fit(
        model,
        t,
        p,
        p0=(span, frequency_guess_hz, float(np.min(p))),
        maxfev=20000,
    )
    amp, nu, off = popt
    return RabiFit(
        frequency_hz=abs(float(nu)),
        amplitude=float(amp),
        offset=float(off),
        peak=peak,
        oscillating=True,
    )
