"""Time-ordered propagation of the lab-frame and effective Hamiltonians.

The integrator is piecewise-constant with midpoint sampling and an exact
matrix exponential per step (Hermitian eigendecomposition). Lab-frame steps
are processed in vectorized chunks; a whole batch of quasi-static noise
offsets can be propagated at once.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import SystemParams, charge_splitting, orbital_mixing
from .operators import (DIM, IDENT, TAU_Z, TAU_X, TAU_Y, S_Z, S_X, I_Z, I_X,
                        S_DOT_I, QUBIT_INDICES, orbital_transform,
                        basis_change_correction, frame_generator_diag)
from .pulses import PulseSchedule

DEFAULT_DT_LAB = 0.1e-12
DEFAULT_DT_LAB_NO_AC = 1e-12
DEFAULT_DT_EFFECTIVE = 0.05e-9

FRAMES = ("lab-position", "lab-orbital", "effective")


class TwoPhotonResonanceWarning(UserWarning):
    """The charge splitting crosses twice the electric drive frequency
    while the AC field is on; expect a sharp leakage resonance."""


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense operator with its basis and frame tags."""

    matrix: np.ndarray
    basis: str = "orbital"       # "position" or "orbital"
    frame: str = "lab"           # "lab", "rotating", "effective"

    def hermiticity_defect(self) -> float:
        m = self.matrix
        return float(np.abs(m - m.conj().T).max() / max(np.abs(m).max(), 1e-300))

    def unitarity_defect(self) -> float:
        m = self.matrix
        return float(np.abs(m.conj().T @ m - np.eye(m.shape[-1])).max())


@dataclass
class EvolutionResult:
    propagator: OperatorMatrix
    frame: str
    step_count: int
    max_unitarity_defect: float
    schedule: PulseSchedule
    noise_dE: float | np.ndarray = 0.0
    leakage_trace: np.ndarray | None = None   # columns (t, leakage)
    valid: bool = True

    def __post_init__(self):
        if self.max_unitarity_defect >= 1e-8:
            self.valid = False


def lab_hamiltonian(params: SystemParams, schedule: PulseSchedule, t: float,
                    noise_dE: float = 0.0, basis: str = "position",
                    include_correction: bool = False) -> OperatorMatrix:
    """Sample the lab-frame Hamiltonian of a schedule at time t."""
    dE, Ea, Ba = schedule.sample(t)
    dEn = float(dE) + noise_dE
    drive_E = float(Ea) * np.cos(schedule.omega_E * t)
    drive_B = float(Ba) * np.cos(schedule.omega_B * t)
    if basis == "position":
        H = _h_position(params, dEn + drive_E, drive_B)
    elif basis == "orbital":
        H = _h_orbital(params, dEn, drive_E, drive_B)
        if include_correction:
            rate = float(schedule.dE_envelope.derivative(t))
            H = H + basis_change_correction(params, dEn, rate)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return OperatorMatrix(H, basis=basis, frame="lab")


def _h_position(params: SystemParams, field_total, drive_B):
    """Position-basis lab Hamiltonian; field_total includes dE, noise and
    the instantaneous AC electric field."""
    donor = (IDENT - TAU_Z) / 2
    H = (-params.de_over_hbar * field_total / 2 * TAU_Z + params.Vt / 2 * TAU_X
         + params.B0 * params.gamma_e * (S_Z + params.delta_gamma * donor @ S_Z)
         - params.B0 * params.gamma_n * I_Z
         + drive_B * (params.gamma_e * S_X - params.gamma_n * I_X)
         + params.hyperfine_A * donor @ S_DOT_I)
    return H


def _h_orbital(params: SystemParams, dEn, drive_E, drive_B):
    """Orbital-basis lab Hamiltonian at static field dEn (the orbital basis
    is defined by the DC field; the AC drive is expanded in it)."""
    e0 = charge_splitting(params, dEn)
    c, s = orbital_mixing(params, dEn)
    tz_id = c * TAU_Z + s * TAU_X
    donor = (IDENT - tz_id) / 2
    H = (-e0 / 2 * TAU_Z - params.de_over_hbar * drive_E / 2 * tz_id
         + params.B0 * params.gamma_e * (S_Z + params.delta_gamma * donor @ S_Z)
         - params.B0 * params.gamma_n * I_Z
         + drive_B * (params.gamma_e * S_X - params.gamma_n * I_X)
         + params.hyperfine_A * donor @ S_DOT_I)
    return H


def _position_h_stack(params: SystemParams, schedule, tmid, noise_dE):
    """(n, S, 8, 8) Hamiltonian stack; noise_dE is scalar or (S,) array."""
    dE, Ea, Ba = schedule.sample(tmid)
    noise = np.atleast_1d(np.asarray(noise_dE, dtype=float))
    f_total = (dE[:, None] + noise[None, :]
               + (Ea * np.cos(schedule.omega_E * tmid))[:, None])
    drive_B = (Ba * np.cos(schedule.omega_B * tmid))[:, None]
    donor = (IDENT - TAU_Z) / 2
    H_const = (params.Vt / 2 * TAU_X
               + params.B0 * params.gamma_e * (S_Z + params.delta_gamma * donor @ S_Z)
               - params.B0 * params.gamma_n * I_Z
               + params.hyperfine_A * donor @ S_DOT_I)
    M_field = -params.de_over_hbar / 2 * TAU_Z
    M_b = params.gamma_e * S_X - params.gamma_n * I_X
    H = (H_const[None, None] + f_total[..., None, None] * M_field
         + drive_B[..., None, None] * M_b)
    return H


def _orbital_h_stack(params: SystemParams, schedule, tmid, noise_dE,
                     include_correction):
    dE, Ea, Ba = schedule.sample(tmid)
    noise = np.atleast_1d(np.asarray(noise_dE, dtype=float))
    dEn = dE[:, None] + noise[None, :]
    e0 = charge_splitting(params, dEn)
    x = params.de_over_hbar * dEn
    c = x / e0
    s = params.Vt / e0
    drive_E = (Ea * np.cos(schedule.omega_E * tmid))[:, None]
    drive_B = (Ba * np.cos(schedule.omega_B * tmid))[:, None]
    donorz = c / 2
    H = (-e0[..., None, None] / 2 * TAU_Z
         - (params.de_over_hbar * drive_E * c)[..., None, None] / 2 * TAU_Z
         - (params.de_over_hbar * drive_E * s)[..., None, None] / 2 * TAU_X
         + (params.B0 * params.gamma_e) * (S_Z
            + params.delta_gamma * (0.5 * S_Z
                                    - donorz[..., None, None] * (TAU_Z @ S_Z)
                                    - (s / 2)[..., None, None] * (TAU_X @ S_Z)))
         - params.B0 * params.gamma_n * I_Z
         + drive_B[..., None, None] * (params.gamma_e * S_X - params.gamma_n * I_X)
         + params.hyperfine_A * (0.5 * S_DOT_I
                                 - donorz[..., None, None] * (TAU_Z @ S_DOT_I)
                                 - (s / 2)[..., None, None] * (TAU_X @ S_DOT_I)))
    if include_correction:
        rate = schedule.dE_envelope.derivative(tmid)[:, None]
        coeff = -params.de_over_hbar * params.Vt / (2 * e0**2) * rate
        H = H + coeff[..., None, None] * TAU_Y
    return H


def _step_unitaries(H, dt):
    ev, V = np.linalg.eigh(H)
    phases = np.exp(-1j * ev * dt)
    return (V * phases[..., None, :]) @ V.conj().swapaxes(-1, -2)


def _ordered_product(Us):
    """Product U[n-1] @ ... @ U[0] along the leading axis, tree-reduced."""
    while Us.shape[0] > 1:
        if Us.shape[0] % 2 == 1:
            last = Us[-1:]
            Us = np.concatenate([np.matmul(Us[1:-1:2], Us[0:-1:2]), last])
        else:
            Us = np.matmul(Us[1::2], Us[0::2])
    return Us[0]


def check_two_photon_resonance(params: SystemParams, schedule: PulseSchedule,
                               n_samples: int = 2001) -> bool:
    """Warn when eps0(dE(t)) crosses 2*omega_E while the AC field is on."""
    ts = np.linspace(0, schedule.total_time, n_samples)
    dE, Ea, _ = schedule.sample(ts)
    # only meaningfully driven stretches matter (ignore envelope tails)
    active = np.abs(Ea) > 0.05 * (np.abs(Ea).max() + 1e-30)
    if not active.any():
        return False
    e0 = charge_splitting(params, dE[active])
    target = 2 * schedule.omega_E
    if e0.min() <= target <= e0.max():
        warnings.warn(
            f"charge splitting crosses 2*omega_E = {target:.4e} rad/s during "
            "the drive; two-photon leakage resonance expected",
            TwoPhotonResonanceWarning, stacklevel=2)
        return True
    return False


def evolve(params: SystemParams, schedule: PulseSchedule, noise_dE=0.0,
           frame: str = "lab-position", dt: float | None = None,
           include_correction: bool = True, t0: float = 0.0,
           t1: float | None = None, record_leakage: int = 0,
           check_resonance: bool = False, chunk: int = 16384) -> EvolutionResult:
    """Propagate a schedule from t0 to t1 (default: its full duration).

    noise_dE may be a scalar or a 1-D array of quasi-static offsets; with an
    array the result's propagator matrix has shape (S, 8, 8). The effective
    frame delegates Hamiltonian sampling to the Floquet-reduced model.
    """
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}")
    if t1 is None:
        t1 = schedule.total_time
    if dt is None:
        if frame == "effective":
            dt = DEFAULT_DT_EFFECTIVE
        elif schedule.Ea_envelope.is_zero() and schedule.Ba_envelope.is_zero():
            dt = DEFAULT_DT_LAB_NO_AC
        else:
            dt = DEFAULT_DT_LAB
    if dt <= 0:
        raise ValueError("dt must be positive")
    if check_resonance:
        check_two_photon_resonance(params, schedule)

    n = max(1, int(round((t1 - t0) / dt)))
    dt_eff = (t1 - t0) / n
    noise = np.asarray(noise_dE, dtype=float)
    batched = noise.ndim > 0
    nbatch = noise.size if batched else 1

    if frame == "effective":
        from .effective import effective_hamiltonian_batch
        U = np.broadcast_to(np.eye(DIM, dtype=complex), (nbatch, DIM, DIM)).copy()
        leak_rows = []
        sample_every = max(1, n // record_leakage) if record_leakage else 0
        step = max(1, min(n, 50_000 // nbatch))
        i = 0
        while i < n:
            m = min(step, n - i)
            tmid = t0 + (np.arange(i, i + m) + 0.5) * dt_eff
            dE, Ea, Ba = schedule.sample(tmid)
            dEn = dE[:, None] + np.atleast_1d(noise)[None, :]
            H = effective_hamiltonian_batch(params, dEn, Ea[:, None], Ba[:, None],
                                            schedule.omega_E, schedule.omega_B)
            Us = _step_unitaries(H, dt_eff)
            if record_leakage:
                for k in range(m):
                    U = np.matmul(Us[k], U)
                    if (i + k + 1) % sample_every == 0:
                        leak_rows.append((t0 + (i + k + 1) * dt_eff,
                                          _mean_leakage(U)))
            else:
                U = np.matmul(_ordered_product(Us), U)
            i += m
        trace = np.array(leak_rows) if leak_rows else None
        Umat = U if batched else U[0]
        defect = _max_unitarity_defect(U)
        return EvolutionResult(OperatorMatrix(Umat, "orbital", "rotating"),
                               frame, n, defect, schedule, noise_dE, trace)

    # lab frames: chunked vectorized exponentials
    U = np.broadcast_to(np.eye(DIM, dtype=complex), (nbatch, DIM, DIM)).copy()
    leak_rows = []
    sample_every = max(1, n // record_leakage) if record_leakage else 0
    chunk = max(1, min(chunk, 300_000 // nbatch))
    i = 0
    while i < n:
        m = min(chunk, n - i)
        tmid = t0 + (np.arange(i, i + m) + 0.5) * dt_eff
        if frame == "lab-position":
            H = _position_h_stack(params, schedule, tmid, noise)
        else:
            H = _orbital_h_stack(params, schedule, tmid, noise,
                                 include_correction)
        Us = _step_unitaries(H, dt_eff)          # (m, S, 8, 8)
        if record_leakage:
            for k in range(m):
                U = np.matmul(Us[k], U)
                if (i + k + 1) % sample_every == 0:
                    leak_rows.append((t0 + (i + k + 1) * dt_eff,
                                      _mean_leakage(U)))
        else:
            U = np.matmul(_ordered_product(Us), U)
        i += m
    trace = np.array(leak_rows) if leak_rows else None
    Umat = U if batched else U[0]
    defect = _max_unitarity_defect(U)
    basis = "position" if frame == "lab-position" else "orbital"
    return EvolutionResult(OperatorMatrix(Umat, basis, "lab"),
                           frame, n, defect, schedule, noise_dE, trace)


def _max_unitarity_defect(U):
    prod = np.matmul(np.conj(np.swapaxes(U, -1, -2)), U)
    return float(np.abs(prod - np.eye(DIM)).max())


def _mean_leakage(Ubatch):
    block = Ubatch[..., QUBIT_INDICES, :][..., :, QUBIT_INDICES]
    return float(np.mean(1 - (np.abs(block) ** 2).sum(axis=(-2, -1)) / 2))


def leakage(U: np.ndarray, subspace=QUBIT_INDICES) -> float:
    """Population lost from a subspace: 1 - Tr(P U P U+ P) / dim(P)."""
    idx = np.asarray(subspace)
    block = U[np.ix_(idx, idx)]
    return float(1 - (np.abs(block) ** 2).sum() / idx.size)


def to_lab_orbital(result: EvolutionResult, params: SystemParams) -> np.ndarray:
    """Express a propagator in the lab frame and orbital basis.

    Position-basis propagators are conjugated by the orbital transform at
    the endpoint fields; rotating-frame propagators get the inverse frame
    phase exp(+i T G).
    """
    U = result.propagator.matrix
    sched = result.schedule
    if result.frame == "lab-position":
        lam_end = orbital_transform(params, float(sched.dE_envelope.value(sched.total_time)))
        lam_start = orbital_transform(params, float(sched.dE_envelope.value(0.0)))
        return lam_end @ U @ lam_start.conj().T
    if result.frame == "lab-orbital":
        return U
    g = frame_generator_diag(params, sched.omega_E, sched.omega_B)
    phase = np.exp(1j * sched.total_time * g)
    return phase[..., :, None] * U


def convergence_check(params: SystemParams, schedule: PulseSchedule,
                      frame: str, dt: float, **kw) -> float:
    """Operator-norm change of the propagator under dt halving."""
    r1 = evolve(params, schedule, frame=frame, dt=dt, **kw)
    r2 = evolve(params, schedule, frame=frame, dt=dt / 2, **kw)
    return float(np.linalg.norm(r1.propagator.matrix - r2.propagator.matrix, 2))


def write_trace(result: EvolutionResult, path) -> None:
    """Dump the recorded (t, leakage) series as columnar text."""
    if result.leakage_trace is None:
        raise ValueError("evolution was run without record_leakage")
    header = f"# schedule = {result.schedule.label}\n# columns: t_s leakage\n"
    with open(path, "w") as fh:
        fh.write(header)
        for t, lk in result.leakage_trace:
            fh.write(f"{t:.9e} {lk:.9e}\n")
