"""Open-system density matrix dynamics.

Lindblad master equation for small dense Hilbert spaces (dim <= 8):

    drho/dt = -i [H, rho] + sum_a k_a (c_a rho c_a+ - 1/2 {c_a+ c_a, rho})

with H in angular-frequency units (hbar = 1).  Propagation is fixed-step
classical RK4; the substep is chosen so the phase advanced per step,
h * max(rate_total, spectral radius of H), stays below a small budget.
Fixed steps keep output grids, and therefore any emitted tables,
bit-stable across runs.

Because the equation is linear, RK4 with step h on a constant Hamiltonian
is exactly the degree-4 polynomial P4(h L) applied to the vectorized
state, with L the Liouvillian matrix.  The constant-Hamiltonian path
exploits this by powering P4 across each output interval; the map is
identical to stepwise RK4, only cheaper.  Time-dependent Hamiltonians
take a per-substep evaluation path.

Each stored output state is re-hermitized as (rho + rho+)/2 and trace
renormalized; pre-correction drifts are recorded as diagnostics so
integration quality stays observable instead of silently absorbed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10

# phase budget per internal RK4 substep; 0.05 is the documented accuracy
# bound, the default sits well below it so long runs keep eigenvalue
# error comfortably inside the 1e-8 positivity budget
DEFAULT_MAX_STEP_PHASE = 0.01
MAX_STEP_PHASE_LIMIT = 0.05

# pre-renormalization trace drift per output interval above which a run
# is considered broken
STEP_TRACE_DRIFT_LIMIT = 1e-6


class DimensionMismatchError(ValueError):
    """Operands of a composite-space operation have incompatible shapes."""

    def __init__(self, message: str, *, left=None, right=None):
        super().__init__(message)
        self.left = left
        self.right = right


class IntegrationFailureError(RuntimeError):
    """Propagation exceeded its trace-drift budget or step limit."""


def _as_complex_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


class DensityOperator:
    """Validated density matrix: hermitian, unit trace, near-positive.

    Args:
        matrix: square complex array.
        positivity_tol: most negative eigenvalue tolerated.  Constructed
            states use the strict default; propagator outputs pass a
            slightly looser bound to admit integrator-scale noise.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix, *, positivity_tol: float = POSITIVITY_TOL):
        arr = _as_complex_matrix(matrix, "density matrix")
        herm = float(np.max(np.abs(arr - arr.conj().T)))
        if herm > HERMITICITY_TOL:
            raise ValueError(f"density matrix not hermitian: max |rho - rho+| = {herm:.3e}")
        tr = complex(np.trace(arr))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr:.12g} differs from 1 beyond {TRACE_TOL:g}")
        arr = (arr + arr.conj().T) / 2.0
        w = np.linalg.eigvalsh(arr)
        if w[0] < -positivity_tol:
            raise ValueError(
                f"density matrix has eigenvalue {w[0]:.3e} below -{positivity_tol:g}"
            )
        arr.setflags(write=False)
        self._matrix = arr

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @classmethod
    def pure(cls, state, dim: int | None = None) -> "DensityOperator":
        """Density operator of a pure state, from a vector or basis index."""
        if isinstance(state, (int, np.integer)):
            if dim is None:
                raise ValueError("dim is required when constructing from a basis index")
            vec = np.zeros(dim, dtype=complex)
            vec[int(state)] = 1.0
        else:
            vec = np.asarray(state, dtype=complex).ravel()
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ValueError("zero state vector")
            vec = vec / norm
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)

    def population(self, index: int) -> float:
        return float(self._matrix[index, index].real)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self._matrix)).copy()

    def expectation(self, op) -> complex:
        return complex(np.trace(np.asarray(op) @ self._matrix))

    def __repr__(self) -> str:  # pragma: no cover
        return f"DensityOperator(dim={self.dim})"


@dataclass(frozen=True)
class CollapseChannel:
    """Lindblad jump operator with its rate (angular frequency units)."""

    operator: np.ndarray
    rate: float

    def __post_init__(self) -> None:
        arr = _as_complex_matrix(self.operator, "collapse operator").copy()
        arr.setflags(write=False)
        object.__setattr__(self, "operator", arr)
        if self.rate < 0:
            raise ValueError(f"collapse rate must be >= 0, got {self.rate}")


def lindblad_rhs(hamiltonian, channels: Sequence[CollapseChannel], rho) -> np.ndarray:
    """Right-hand side of the Lindblad master equation.

    hamiltonian in rad/s; rho may be a DensityOperator or a raw matrix.
    """
    h = _as_complex_matrix(hamiltonian, "hamiltonian")
    r = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    if h.shape != r.shape:
        raise DimensionMismatchError(
            f"hamiltonian {h.shape} and state {r.shape} dimensions differ",
            left=h.shape,
            right=r.shape,
        )
    out = -1j * (h @ r - r @ h)
    for ch in channels:
        c = ch.operator
        if c.shape != r.shape:
            raise DimensionMismatchError(
                f"collapse operator {c.shape} and state {r.shape} dimensions differ",
                left=c.shape,
                right=r.shape,
            )
        cdc = c.conj().T @ c
        out += ch.rate * (c @ r @ c.conj().T - 0.5 * (cdc @ r + r @ cdc))
    return out


@dataclass
class PropagationDiagnostics:
    """Pre-correction integration quality figures, extrema over the run."""

    max_step_trace_drift: float = 0.0
    max_hermiticity_residual: float = 0.0
    min_eigenvalue: float = np.inf
    n_substeps: int = 0

    def merge(self, other: "PropagationDiagnostics") -> "PropagationDiagnostics":
        return PropagationDiagnostics(
            max_step_trace_drift=max(self.max_step_trace_drift, other.max_step_trace_drift),
            max_hermiticity_residual=max(
                self.max_hermiticity_residual, other.max_hermiticity_residual
            ),
            min_eigenvalue=min(self.min_eigenvalue, other.min_eigenvalue),
            n_substeps=self.n_substeps + other.n_substeps,
        )


@dataclass
class PropagationResult:
    """States on the requested grid plus diagnostics; sequence-like."""

    times: np.ndarray
    states: list[DensityOperator] = field(default_factory=list)
    diagnostics: PropagationDiagnostics = field(default_factory=PropagationDiagnostics)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    def populations(self) -> np.ndarray:
        """Diagonal of every stored state, shape (n_times, dim)."""
        return np.array([s.populations() for s in self.states])


def liouvillian(hamiltonian, channels: Sequence[CollapseChannel]) -> np.ndarray:
    """Matrix L with vec(drho/dt) = L vec(rho), row-major vectorization."""
    h = _as_complex_matrix(hamiltonian, "hamiltonian")
    d = h.shape[0]
    eye = np.eye(d, dtype=complex)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in channels:
        c = ch.operator
        if c.shape != h.shape:
            raise DimensionMismatchError(
                f"collapse operator {c.shape} and hamiltonian {h.shape} dimensions differ",
                left=c.shape,
                right=h.shape,
            )
        cdc = c.conj().T @ c
        lv += ch.rate * (
            np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
        )
    return lv


def _rk4_step_matrix(lv: np.ndarray, h: float) -> np.ndarray:
    """One-step RK4 map for the linear system: P4(hL) acting on vec(rho)."""
    eye = np.eye(lv.shape[0], dtype=complex)
    hl = h * lv
    return eye + hl @ (eye + hl @ (eye / 2.0 + hl @ (eye / 6.0 + hl / 24.0)))


def _hamiltonian_norm(h) -> float:
    """Step-control scale of an operator: a bound on its spectral radius.

    Hermitian operators get the exact radius; anything else falls back
    to the Frobenius norm, which bounds the spectral norm from above.
    A max-entry norm is not enough here: it can undershoot the radius by
    a factor of the dimension and starve the step control.
    """
    arr = np.asarray(h, dtype=complex)
    if arr.size == 0:
        return 0.0
    scale = float(np.max(np.abs(arr)))
    if scale == 0.0:
        return 0.0
    if np.max(np.abs(arr - arr.conj().T)) <= 1e-12 * scale:
        w = np.linalg.eigvalsh(arr)
        return float(max(abs(w[0]), abs(w[-1])))
    return float(np.linalg.norm(arr))


def total_rate(channels: Sequence[CollapseChannel]) -> float:
    """Step-control rate scale: sum of rate * ||c+c||_max over channels."""
    tot = 0.0
    for ch in channels:
        cdc = ch.operator.conj().T @ ch.operator
        tot += ch.rate * float(np.max(np.abs(cdc)))
    return tot


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("t_grid must be a 1-D array with at least one point")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    return t


def _check_phase(max_step_phase: float) -> None:
    if not 0 < max_step_phase <= MAX_STEP_PHASE_LIMIT:
        raise ValueError(
            f"max_step_phase must lie in (0, {MAX_STEP_PHASE_LIMIT}], got {max_step_phase}"
        )


class _Recorder:
    """Shared output bookkeeping: hermitize, renormalize, track drift."""

    def __init__(self, rho0: DensityOperator, trace_drift_limit: float):
        self.diag = PropagationDiagnostics()
        w0 = np.linalg.eigvalsh(rho0.matrix)
        self.diag.min_eigenvalue = float(w0[0])
        self.states = [rho0]
        self.limit = trace_drift_limit

    def interval_drift(self, drift: float, t0: float, t1: float) -> None:
        self.diag.max_step_trace_drift = max(self.diag.max_step_trace_drift, drift)
        if drift > self.limit:
            raise IntegrationFailureError(
                f"trace drifted by {drift:.3e} over step [{t0:g}, {t1:g}] "
                f"(limit {self.limit:g}); reduce max_step_phase"
            )

    def record(self, mat: np.ndarray) -> DensityOperator:
        herm = float(np.max(np.abs(mat - mat.conj().T)))
        self.diag.max_hermiticity_residual = max(self.diag.max_hermiticity_residual, herm)
        fixed = (mat + mat.conj().T) / 2.0
        fixed = fixed / np.real(np.trace(fixed))
        w = np.linalg.eigvalsh(fixed)
        self.diag.min_eigenvalue = min(self.diag.min_eigenvalue, float(w[0]))
        state = DensityOperator(fixed, positivity_tol=1e-8)
        self.states.append(state)
        return state

    def record_pure(self, psi: np.ndarray) -> DensityOperator:
        # outer product of a normalized vector: hermitian and positive by
        # construction, so no residuals to accumulate
        state = DensityOperator(np.outer(psi, psi.conj()))
        self.states.append(state)
        return state


def _vec_trace(v: np.ndarray, d: int) -> float:
    return float(np.real(v[:: d + 1].sum()))


def _pure_state_of(rho: DensityOperator) -> np.ndarray | None:
    """Normalized state vector if rho is numerically pure, else None."""
    w, u = np.linalg.eigh(rho.matrix)
    if w[-1] < 1.0 - 1e-12:
        return None
    psi = u[:, -1].astype(complex)
    return psi / np.linalg.norm(psi)


def propagate(
    hamiltonian,
    channels: Sequence[CollapseChannel],
    rho0: DensityOperator,
    t_grid,
    *,
    max_step_phase: float = DEFAULT_MAX_STEP_PHASE,
    trace_drift_limit: float = STEP_TRACE_DRIFT_LIMIT,
) -> PropagationResult:
    """Propagate a density matrix over t_grid with fixed-step RK4.

    Args:
        hamiltonian: constant matrix, or a callable t -> matrix (rad/s).
            A callable must be smooth within every grid interval; place
            discontinuities on grid points and run each constant piece
            separately (see the pulsed simulators for the pattern).
        channels: Lindblad collapse channels.
        rho0: initial state.
        t_grid: strictly increasing sample times; the state is stored at
            every grid point.  Internal substeps subdivide each interval
            so that the phase advanced per substep, h times the larger
            of the total rate and the Hamiltonian spectral radius, stays
            at or below max_step_phase.
        max_step_phase: phase budget per substep, at most 0.05.
        trace_drift_limit: pre-renormalization trace drift per interval
            above which the run aborts.

    Returns:
        PropagationResult with per-grid-point states (re-hermitized,
        trace renormalized) and pre-correction drift diagnostics.
    """
    t = _check_grid(t_grid)
    _check_phase(max_step_phase)
    rate_tot = total_rate(channels)
    rec = _Recorder(rho0, trace_drift_limit)
    d = rho0.dim

    if callable(hamiltonian):
        r = rho0.matrix.copy()
        for i in range(t.size - 1):
            t0, t1 = float(t[i]), float(t[i + 1])
            dt = t1 - t0
            h_scale = max(
                _hamiltonian_norm(hamiltonian(t0)),
                _hamiltonian_norm(hamiltonian(t0 + dt / 2)),
                _hamiltonian_norm(hamiltonian(t1)),
            )
            scale = max(rate_tot, h_scale)
            n_sub = max(1, int(np.ceil(dt * scale / max_step_phase)))
            h = dt / n_sub
            tr0 = float(np.real(np.trace(r)))
            for j in range(n_sub):
                ta = t0 + j * h
                ha = hamiltonian(ta)
                hm = hamiltonian(ta + 0.5 * h)
                hb = hamiltonian(ta + h)
                k1 = lindblad_rhs(ha, channels, r)
                k2 = lindblad_rhs(hm, channels, r + 0.5 * h * k1)
                k3 = lindblad_rhs(hm, channels, r + 0.5 * h * k2)
                k4 = lindblad_rhs(hb, channels, r + h * k3)
                r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            rec.diag.n_substeps += n_sub
            rec.interval_drift(abs(float(np.real(np.trace(r))) - tr0), t0, t1)
            r = rec.record(r).matrix.copy()
        return PropagationResult(times=t, states=rec.states, diagnostics=rec.diag)

    h_const = _as_complex_matrix(hamiltonian, "hamiltonian")
    if h_const.shape[0] != d:
        raise DimensionMismatchError(
            f"hamiltonian {h_const.shape} and state dim {d} differ",
            left=h_const.shape,
            right=(d, d),
        )
    lv = liouvillian(h_const, channels)
    scale = max(rate_tot, _hamiltonian_norm(h_const))
    v = rho0.matrix.reshape(-1).copy()
    step_cache: dict[tuple[str, int], np.ndarray] = {}
    for i in range(t.size - 1):
        t0, t1 = float(t[i]), float(t[i + 1])
        dt = t1 - t0
        n_sub = max(1, int(np.ceil(dt * scale / max_step_phase))) if scale > 0 else 1
        h = dt / n_sub
        key = (h.hex(), n_sub)
        m_interval = step_cache.get(key)
        if m_interval is None:
            m_interval = np.linalg.matrix_power(_rk4_step_matrix(lv, h), n_sub)
            step_cache[key] = m_interval
        tr0 = _vec_trace(v, d)
        v = m_interval @ v
        rec.diag.n_substeps += n_sub
        rec.interval_drift(abs(_vec_trace(v, d) - tr0), t0, t1)
        v = rec.record(v.reshape(d, d)).matrix.reshape(-1).copy()
    return PropagationResult(times=t, states=rec.states, diagnostics=rec.diag)


def propagate_modulated(
    h_static,
    h_drive,
    envelope: Callable[[float], float],
    channels: Sequence[CollapseChannel],
    rho0: DensityOperator,
    t_grid,
    *,
    envelope_bound: float = 1.0,
    max_step_phase: float = DEFAULT_MAX_STEP_PHASE,
    trace_drift_limit: float = STEP_TRACE_DRIFT_LIMIT,
) -> PropagationResult:
    """Propagate under H(t) = h_static + envelope(t) * h_drive.

    Same stepping rule and bookkeeping as propagate, specialized to the
    linearly modulated form so the Liouvillian split L0 + f(t) L1 is
    assembled once.  envelope_bound must bound |envelope| over the run
    (used for step control).
    """
    t = _check_grid(t_grid)
    _check_phase(max_step_phase)
    if envelope_bound < 0:
        raise ValueError("envelope_bound must be >= 0")
    d = rho0.dim
    h0 = _as_complex_matrix(h_static, "h_static")
    h1 = _as_complex_matrix(h_drive, "h_drive")
    if h0.shape != (d, d) or h1.shape != (d, d):
        raise DimensionMismatchError(
            f"hamiltonian parts {h0.shape}/{h1.shape} and state dim {d} differ",
            left=h0.shape,
            right=(d, d),
        )
    scale = max(
        total_rate(channels),
        _hamiltonian_norm(h0) + envelope_bound * _hamiltonian_norm(h1),
    )
    rec = _Recorder(rho0, trace_drift_limit)

    if not channels:
        psi = _pure_state_of(rho0)
        if psi is not None:
            # channel-free evolution of a pure state: integrate the state
            # vector itself, which keeps the density matrix positive by
            # construction and shrinks the working dimension from d^2 to d
            a0 = -1j * h0
            a1 = -1j * h1
            for i in range(t.size - 1):
                t0, t1 = float(t[i]), float(t[i + 1])
                dt = t1 - t0
                n_sub = max(1, int(np.ceil(dt * scale / max_step_phase))) if scale > 0 else 1
                h = dt / n_sub
                for j in range(n_sub):
                    ta = t0 + j * h
                    ma = a0 + envelope(ta) * a1
                    mm = a0 + envelope(ta + 0.5 * h) * a1
                    mb = a0 + envelope(ta + h) * a1
                    k1 = ma @ psi
                    k2 = mm @ (psi + 0.5 * h * k1)
                    k3 = mm @ (psi + 0.5 * h * k2)
                    k4 = mb @ (psi + h * k3)
                    psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                norm2 = float(np.real(np.vdot(psi, psi)))
                rec.diag.n_substeps += n_sub
                rec.interval_drift(abs(norm2 - 1.0), t0, t1)
                psi = psi / np.sqrt(norm2)
                rec.record_pure(psi)
            return PropagationResult(times=t, states=rec.states, diagnostics=rec.diag)

    l0 = liouvillian(h0, channels)
    l1 = liouvillian(h1, ())  # drive part carries no dissipator
    v = rho0.matrix.reshape(-1).copy()
    for i in range(t.size - 1):
        t0, t1 = float(t[i]), float(t[i + 1])
        dt = t1 - t0
        n_sub = max(1, int(np.ceil(dt * scale / max_step_phase))) if scale > 0 else 1
        h = dt / n_sub
        tr0 = _vec_trace(v, d)
        for j in range(n_sub):
            ta = t0 + j * h
            la = l0 + envelope(ta) * l1
            lm = l0 + envelope(ta + 0.5 * h) * l1
            lb = l0 + envelope(ta + h) * l1
            k1 = la @ v
            k2 = lm @ (v + 0.5 * h * k1)
            k3 = lm @ (v + 0.5 * h * k2)
            k4 = lb @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rec.diag.n_substeps += n_sub
        rec.interval_drift(abs(_vec_trace(v, d) - tr0), t0, t1)
        v = rec.record(v.reshape(d, d)).matrix.reshape(-1).copy()
    return PropagationResult(times=t, states=rec.states, diagnostics=rec.diag)


def kron(a, b) -> np.ndarray:
    """Kronecker product of two operators on factor spaces A and B."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(rho, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite state.

    Args:
        rho: matrix on the product space, shape (dA*dB, dA*dB), factor A
            first (slow index).
        dims: (dA, dB).
        keep: 0 to keep factor A, 1 to keep factor B.
    """
    da, db = dims
    r = np.asarray(rho, dtype=complex)
    if r.shape != (da * db, da * db):
        raise DimensionMismatchError(
            f"state shape {r.shape} does not match factor dims {dims}",
            left=r.shape,
            right=(da * db, da * db),
        )
    if keep not in (0, 1):
        raise ValueError("keep must be 0 (factor A) or 1 (factor B)")
    t = r.reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    return np.einsum("iaib->ab", t)
