"""Rotating-frame Hamiltonian, its harmonics, and the Floquet reduction.

In the frame Lambda_rot = exp[-i t G] with G = wE (tau_z/2 + Iz)
- wB (Sz + Iz), the Hamiltonian splits into a static part plus harmonics at
{+-wE, +-2wE, +-2wB, +-(2wB - wE)}:

    H~(t) = C_0 + sum_j [ C_j exp(-i w_j t) + C_j^dag exp(+i w_j t) ].

A 72x72 multi-frequency Floquet matrix (nine blocks, one order per
frequency) reduces to its central 8x8 block through second-order
quasi-degenerate perturbation theory, giving the static effective
Hamiltonian H' that drives the fast simulation path.

The harmonic attached to the block coupling row r to column c converts a
column-block state rotating at shift s_c into a row-block one at s_r, i.e.
frequency s_c - s_r; this orientation is pinned by the static-sample
propagation test against the exact rotating-frame evolution.

Internally every matrix is a fixed operator basis contracted with
sample-dependent real coefficients, so batches of envelope samples
assemble in single einsum passes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import SystemParams, charge_splitting
from .operators import (DIM, TAU_Z, TAU_X, TAU_P, S_Z, S_X, S_M, I_Z, I_M,
                        I_P, BASIS_LABELS)

# harmonic labels as integer (nE, nB) pairs: frequency = nE*wE + nB*wB
COMPONENT_LABELS = ((1, 0), (2, 0), (0, 2), (-1, 2))
# diagonal-block shifts of the nine-block Floquet matrix
BLOCK_SHIFTS = ((-2, 0), (0, -2), (-1, 0), (1, -2), (0, 0),
                (-1, 2), (1, 0), (0, 2), (2, 0))
CENTRAL_BLOCK = 4
DEGENERACY_GUARD = 2 * np.pi * 10e6       # rad/s
COUPLING_FLOOR = 2 * np.pi * 1e-3         # ignore couplings below ~mHz


class NearDegeneracyError(RuntimeError):
    """A coupled Floquet state is too close to the target block for the
    second-order reduction to be trusted."""


class RwaValidityWarning(UserWarning):
    """Drive frequencies far from the splittings they rotate out."""


@dataclass(frozen=True)
class FrequencyComponent:
    label: tuple            # (nE, nB)
    frequency: float        # rad/s
    matrix: np.ndarray      # coefficient of exp(-i*frequency*t)


@dataclass(frozen=True)
class FloquetBlock:
    floquet_matrix: np.ndarray          # 72x72
    shift_frequencies: np.ndarray       # 9 diagonal shifts, rad/s
    target_block: int
    effective_hamiltonian: np.ndarray   # 8x8 H'


# fixed operator stacks; comp0 terms are Hermitian, harmonic terms are not
_FLIPOP = TAU_P @ S_M.conj().T @ I_M     # |g up Dn><e dn Up| = tau+ S+ I-
_M0 = np.stack([
    TAU_Z,                       # (wE - e0)/2
    TAU_X,                       # -Ea de s / 4
    S_Z,                         # (B0 ge - wB) + B0 ge dgamma / 2
    I_Z,                         # -(B0 gn + wB - wE)
    TAU_Z @ S_Z,                 # -B0 ge dgamma c / 2
    S_X,                         # Ba ge / 2
    S_Z @ I_Z,                   # A/2
    TAU_Z @ S_Z @ I_Z,           # -A c / 2
    _FLIPOP + _FLIPOP.conj().T,  # -A s / 4
])

_M_WE = np.stack([
    S_M @ I_P,                   # A/4
    TAU_Z @ S_M @ I_P,           # -A c / 4
    I_P,                         # -Ba gn / 4
    TAU_P @ S_Z @ I_Z,           # -A s / 2
    TAU_P @ S_Z,                 # -B0 ge dgamma s / 2
    TAU_Z,                       # -de^2 dEn Ea / (4 e0)
])
_M_2WE = np.stack([
    TAU_P @ S_M @ I_P,           # -A s / 4
    TAU_P,                       # -de Ea s / 4
])
_M_2WB = S_M[None]               # Ba ge / 4
_M_2WBME = I_M[None]             # -Ba gn / 4

_OP_STACKS = {(1, 0): _M_WE, (2, 0): _M_2WE, (0, 2): _M_2WB,
              (-1, 2): _M_2WBME}
_SUPPORTS = {label: (np.abs(stack).sum(axis=0) > 1e-12)
             for label, stack in _OP_STACKS.items()}
_SUPPORTS_DAG = {label: supp.T for label, supp in _SUPPORTS.items()}


def _mixing(params: SystemParams, dEn):
    dEn = np.asarray(dEn, dtype=float)
    e0 = charge_splitting(params, dEn)
    x = params.de_over_hbar * dEn
    return e0, x / e0, params.Vt / e0


def _coeffs0(params, e0, c, s, Ea, Ba, omega_E, omega_B):
    gez = params.B0 * params.gamma_e
    A = params.hyperfine_A
    one = np.ones_like(e0)
    return np.stack([
        (omega_E - e0) / 2,
        -Ea * params.de_over_hbar * s / 4,
        (gez - omega_B + gez * params.delta_gamma / 2) * one,
        -(params.B0 * params.gamma_n + omega_B - omega_E) * one,
        -gez * params.delta_gamma * c / 2,
        Ba * params.gamma_e / 2 * one,
        A / 2 * one,
        -A * c / 2,
        -A * s / 4,
    ], axis=-1)


def _coeffs_harmonics(params, e0, c, s, dEn, Ea, Ba):
    gez = params.B0 * params.gamma_e
    A = params.hyperfine_A
    de = params.de_over_hbar
    one = np.ones_like(e0)
    c_we = np.stack([
        A / 4 * one,
        -A * c / 4,
        -Ba * params.gamma_n / 4 * one,
        -A * s / 2,
        -gez * params.delta_gamma * s / 2,
        -de**2 * dEn * Ea / (4 * e0),
    ], axis=-1)
    c_2we = np.stack([-A * s / 4, -de * Ea * s / 4 * one], axis=-1)
    c_2wb = (Ba * params.gamma_e / 4 * one)[..., None]
    c_2wbme = (-Ba * params.gamma_n / 4 * one)[..., None]
    return {(1, 0): c_we, (2, 0): c_2we, (0, 2): c_2wb, (-1, 2): c_2wbme}


def _assemble(coeffs, stack):
    return np.einsum("...k,kij->...ij", coeffs.astype(complex), stack)


def rwa_hamiltonian(params: SystemParams, dE, Ea, Ba, omega_E, omega_B,
                    noise_dE=0.0, warn: bool = False):
    """Static rotating-frame Hamiltonian H~0 (instantaneous envelopes).

    Broadcasts over leading array dimensions of dE/Ea/Ba.
    """
    dEn = np.asarray(dE, dtype=float) + noise_dE
    e0, c, s = _mixing(params, dEn)
    sh = np.broadcast(e0, np.asarray(Ea, float), np.asarray(Ba, float))
    e0, c, s = (np.broadcast_to(a, sh.shape) for a in (e0, c, s))
    Ea = np.broadcast_to(np.asarray(Ea, float), sh.shape)
    Ba = np.broadcast_to(np.asarray(Ba, float), sh.shape)
    if warn:
        scale = np.max(e0) / 10
        if np.max(np.abs(e0 - omega_E)) > scale or \
           abs(params.B0 * params.gamma_e - omega_B) > scale:
            warnings.warn("drive detunings exceed eps0/10; rotating-wave "
                          "treatment may be inaccurate", RwaValidityWarning,
                          stacklevel=2)
    return _assemble(_coeffs0(params, e0, c, s, Ea, Ba, omega_E, omega_B), _M0)


def frequency_components(params: SystemParams, dE, Ea, Ba, omega_E, omega_B,
                         noise_dE=0.0):
    """The four positive-frequency harmonics of H~(t) (exact).

    Each returned matrix multiplies exp(-i*frequency*t); negative-frequency
    harmonics are the Hermitian conjugates.
    """
    dEn = np.asarray(dE, dtype=float) + noise_dE
    e0, c, s = _mixing(params, dEn)
    sh = np.broadcast(e0, np.asarray(Ea, float), np.asarray(Ba, float))
    e0, c, s, dEn = (np.broadcast_to(a, sh.shape) for a in (e0, c, s, dEn))
    Ea = np.broadcast_to(np.asarray(Ea, float), sh.shape)
    Ba = np.broadcast_to(np.asarray(Ba, float), sh.shape)
    coeffs = _coeffs_harmonics(params, e0, c, s, dEn, Ea, Ba)
    out = []
    for label in COMPONENT_LABELS:
        freq = label[0] * omega_E + label[1] * omega_B
        out.append(FrequencyComponent(label, freq,
                                      _assemble(coeffs[label],
                                                _OP_STACKS[label])))
    return out


def reconstruct_rotating_hamiltonian(params: SystemParams, dE, Ea, Ba,
                                     omega_E, omega_B, t, noise_dE=0.0):
    """Sum the harmonics back into the exact rotating-frame Hamiltonian."""
    H = rwa_hamiltonian(params, dE, Ea, Ba, omega_E, omega_B, noise_dE)
    for comp in frequency_components(params, dE, Ea, Ba, omega_E, omega_B,
                                     noise_dE):
        phase = np.exp(-1j * comp.frequency * t)
        H = H + comp.matrix * phase + comp.matrix.conj().swapaxes(-1, -2) / phase
    return H


def exact_rotating_hamiltonian(params: SystemParams, schedule, t,
                               noise_dE=0.0):
    """Independent construction Lam H Lam^dag - i Lam dLam/dt^dag."""
    from .operators import frame_generator_diag
    from .propagation import lab_hamiltonian
    H = lab_hamiltonian(params, schedule, t, noise_dE, basis="orbital").matrix
    g = frame_generator_diag(params, schedule.omega_E, schedule.omega_B)
    phase = np.exp(-1j * t * g)
    return phase[:, None] * H * phase.conj()[None, :] + np.diag(g)


def floquet_hamiltonian(components, comp0, omega_E, omega_B):
    """Assemble the 72x72 truncated multi-frequency Floquet matrix."""
    lookup = {comp.label: comp.matrix for comp in components}
    HF = np.zeros(np.shape(comp0)[:-2] + (9 * DIM, 9 * DIM), dtype=complex)
    shifts = []
    for r, (nE, nB) in enumerate(BLOCK_SHIFTS):
        w_r = nE * omega_E + nB * omega_B
        shifts.append(w_r)
        HF[..., DIM*r:DIM*(r+1), DIM*r:DIM*(r+1)] = comp0 + w_r * np.eye(DIM)
        for cc, (mE, mB) in enumerate(BLOCK_SHIFTS):
            if r == cc:
                continue
            diff = (mE - nE, mB - nB)       # s_c - s_r
            if diff in lookup:
                HF[..., DIM*r:DIM*(r+1), DIM*cc:DIM*(cc+1)] = lookup[diff]
            elif (-diff[0], -diff[1]) in lookup:
                HF[..., DIM*r:DIM*(r+1), DIM*cc:DIM*(cc+1)] = \
                    lookup[(-diff[0], -diff[1])].conj().swapaxes(-1, -2)
    return HF, np.array(shifts)


_EXT = np.r_[0:DIM*CENTRAL_BLOCK, DIM*(CENTRAL_BLOCK+1):9*DIM]
_TGT = np.r_[DIM*CENTRAL_BLOCK:DIM*(CENTRAL_BLOCK+1)]


def schrieffer_wolff(HF: np.ndarray, guard: float = DEGENERACY_GUARD) -> np.ndarray:
    """Second-order reduction of a full Floquet matrix to its central block.

    H'_{mm'} = H~0_{mm'} + (1/2) sum_l V_{ml} V*_{m'l} [1/(E_m - E_l)
    + 1/(E_m' - E_l)] with E the full Floquet diagonal and l running over
    the 64 exterior states. Raises NearDegeneracyError when an exterior
    state with non-negligible coupling sits within `guard` of the block.
    """
    E = np.real(HF[..., np.arange(9*DIM), np.arange(9*DIM)])
    V = HF[..., _TGT, :][..., :, _EXT]                 # (..., 8, 64)
    Em = E[..., _TGT]
    El = E[..., _EXT]
    gap = Em[..., :, None] - El[..., None, :]
    coupled = np.abs(V) > COUPLING_FLOOR
    if guard and bool(np.any(coupled & (np.abs(gap) < guard))):
        bad = np.argwhere(coupled & (np.abs(gap) < guard))
        m, l = int(bad[0][-2]), int(bad[0][-1])
        raise NearDegeneracyError(
            f"Floquet state {l} lies within the degeneracy guard of target "
            f"state {BASIS_LABELS[m]}; the perturbative reduction is "
            "invalid here")
    with np.errstate(divide="ignore", invalid="ignore"):
        Dmat = np.where(coupled, 1.0 / np.where(coupled, gap, 1.0), 0.0)
    VD = V * Dmat
    H2 = 0.5 * (VD @ V.conj().swapaxes(-1, -2)
                + V @ VD.conj().swapaxes(-1, -2))
    H0 = HF[..., _TGT, :][..., :, _TGT]
    return H0 + H2


def build_floquet_block(params: SystemParams, dE, Ea, Ba, omega_E, omega_B,
                        noise_dE=0.0, guard: float = DEGENERACY_GUARD) -> FloquetBlock:
    comp0 = rwa_hamiltonian(params, dE, Ea, Ba, omega_E, omega_B, noise_dE)
    comps = frequency_components(params, dE, Ea, Ba, omega_E, omega_B, noise_dE)
    HF, shifts = floquet_hamiltonian(comps, comp0, omega_E, omega_B)
    Hp = schrieffer_wolff(HF, guard)
    return FloquetBlock(HF, shifts, CENTRAL_BLOCK, Hp)


def _effective_from_coeffs(comp0, harm_coeffs, omega_E, omega_B, guard):
    """Central-block H' straight from the harmonics (no 72x72 matrix).

    Equals the central block of schrieffer_wolff(floquet_hamiltonian(...)):
    only the central-row blocks and the diagonal shifts contribute there.
    """
    diag0 = np.real(comp0[..., np.arange(DIM), np.arange(DIM)])
    Vmats = {}
    for label in COMPONENT_LABELS:
        coeffs = harm_coeffs[label]
        if np.abs(coeffs).max() < COUPLING_FLOOR:
            Vmats[label] = None
            continue
        Vmats[label] = _assemble(coeffs, _OP_STACKS[label])
    acc = np.zeros_like(comp0)
    for (nE, nB) in BLOCK_SHIFTS:
        if nE == 0 and nB == 0:
            continue
        pos = (nE, nB) if (nE, nB) in Vmats else None
        neg = (-nE, -nB) if (-nE, -nB) in Vmats else None
        if pos is not None:
            V, supp = Vmats[pos], _SUPPORTS[pos]
        else:
            V, supp = Vmats[neg], _SUPPORTS_DAG[neg]
            V = None if V is None else V.conj().swapaxes(-1, -2)
        if V is None:
            continue
        shift = nE * omega_E + nB * omega_B
        gap = diag0[..., :, None] - (diag0[..., None, :] + shift)
        if guard:
            gsup = np.abs(gap[..., supp])
            if gsup.size and float(gsup.min()) < guard:
                raise NearDegeneracyError(
                    f"a Floquet state in the ({nE},{nB}) block lies within "
                    f"{guard/(2*np.pi):.2e} Hz of the target block while "
                    "coupled; the perturbative reduction is invalid here")
        D = np.where(supp, 1.0, 0.0) / np.where(supp, gap, 1.0)
        acc = acc + (V * D) @ V.conj().swapaxes(-1, -2)
    H2 = 0.5 * (acc + acc.conj().swapaxes(-1, -2))
    return comp0 + H2


def effective_hamiltonian(params: SystemParams, dE, Ea, Ba, omega_E, omega_B,
                          noise_dE=0.0, guard: float = DEGENERACY_GUARD):
    """H' for instantaneous envelope values (scalar inputs -> 8x8)."""
    return effective_hamiltonian_batch(params,
                                       np.asarray(dE, float) + noise_dE,
                                       Ea, Ba, omega_E, omega_B, guard)


def effective_hamiltonian_batch(params: SystemParams, dEn, Ea, Ba,
                                omega_E, omega_B,
                                guard: float = DEGENERACY_GUARD):
    """Vectorized H' over broadcastable arrays of envelope samples.

    dEn already includes any quasi-static noise offset.
    """
    dEn = np.asarray(dEn, dtype=float)
    e0, c, s = _mixing(params, dEn)
    sh = np.broadcast(e0, np.asarray(Ea, float), np.asarray(Ba, float))
    e0, c, s, dEn = (np.broadcast_to(a, sh.shape) for a in (e0, c, s, dEn))
    Eab = np.broadcast_to(np.asarray(Ea, float), sh.shape)
    Bab = np.broadcast_to(np.asarray(Ba, float), sh.shape)
    comp0 = _assemble(_coeffs0(params, e0, c, s, Eab, Bab, omega_E, omega_B),
                      _M0)
    harm = _coeffs_harmonics(params, e0, c, s, dEn, Eab, Bab)
    return _effective_from_coeffs(comp0, harm, omega_E, omega_B, guard)


def hprime_text(params: SystemParams, dE, Ea, Ba, omega_E, omega_B,
                noise_dE=0.0) -> str:
    """Human-readable dump of H' with basis labels (units 2pi MHz)."""
    Hp = effective_hamiltonian(params, dE, Ea, Ba, omega_E, omega_B, noise_dE)
    scale = 2 * np.pi * 1e6
    lines = [
        f"# effective Hamiltonian H' at dE={dE!r} V/m, Ea={Ea!r} V/m, "
        f"Ba={Ba!r} T",
        f"# omega_E={omega_E!r} rad/s, omega_B={omega_B!r} rad/s, "
        f"noise_dE={noise_dE!r} V/m",
        "# entries as (real imag) pairs in units of 2*pi MHz, rows/cols "
        "ordered " + " ".join(BASIS_LABELS),
    ]
    for i, row_label in enumerate(BASIS_LABELS):
        cells = []
        for j in range(DIM):
            z = Hp[i, j] / scale
            cells.append(f"{z.real:+.9e} {z.imag:+.9e}")
        lines.append(f"{row_label:7s} " + "  ".join(cells))
    return "\n".join(lines) + "\n"
