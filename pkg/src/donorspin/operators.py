"""Hilbert-space conventions and operator matrices.

Basis ordering is fixed package-wide: index = 4*orbital + 2*electron + nuclear
with orbital {g,e} (or position {i,d}), electron spin {dn,up}, nuclear
spin {Dn,Up}. The qubit is |up~> ~ |g,dn,Up> (index 1) and
|dn~> ~ |g,dn,Dn> (index 0).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemParams, charge_splitting, orbital_mixing

DIM = 8

BASIS_LABELS = tuple(
    f"{o}{e}{n}" for o in ("g", "e") for e in ("dn", "up") for n in ("Dn", "Up")
)
POSITION_LABELS = tuple(
    f"{o}{e}{n}" for o in ("i", "d") for e in ("dn", "up") for n in ("Dn", "Up")
)

QUBIT_UP_INDEX = 1   # |g dn Up>
QUBIT_DN_INDEX = 0   # |g dn Dn>
QUBIT_INDICES = (QUBIT_UP_INDEX, QUBIT_DN_INDEX)


@dataclass(frozen=True)
class BasisConvention:
    ordering: tuple = BASIS_LABELS
    qubit_subspace: tuple = QUBIT_INDICES


BASIS = BasisConvention()

_I2 = np.eye(2, dtype=complex)
_PZ = np.array([[1, 0], [0, -1]], dtype=complex)      # +1 on first basis state
_PX = np.array([[0, 1], [1, 0]], dtype=complex)
_PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
# spin-1/2 in (dn, up) ordering: Sz = diag(-1/2, +1/2), S+ = |up><dn|
_SZ = 0.5 * np.array([[-1, 0], [0, 1]], dtype=complex)
_SP = np.array([[0, 0], [1, 0]], dtype=complex)
_SM = _SP.conj().T
_SX = (_SP + _SM) / 2
_SY = (_SP - _SM) / 2j


def _k3(a, b, c):
    return np.kron(np.kron(a, b), c)


# orbital operators: eigenvalue +1 on g (position: +1 on i)
TAU_Z = _k3(_PZ, _I2, _I2)
TAU_X = _k3(_PX, _I2, _I2)
TAU_Y = _k3(_PY, _I2, _I2)
TAU_P = (TAU_X + 1j * TAU_Y) / 2    # |g><e|
TAU_M = (TAU_X - 1j * TAU_Y) / 2

S_Z = _k3(_I2, _SZ, _I2)
S_X = _k3(_I2, _SX, _I2)
S_Y = _k3(_I2, _SY, _I2)
S_P = _k3(_I2, _SP, _I2)
S_M = _k3(_I2, _SM, _I2)

I_Z = _k3(_I2, _I2, _SZ)
I_X = _k3(_I2, _I2, _SX)
I_Y = _k3(_I2, _I2, _SY)
I_P = _k3(_I2, _I2, _SP)
I_M = _k3(_I2, _I2, _SM)

S_DOT_I = S_X @ I_X + S_Y @ I_Y + S_Z @ I_Z
IDENT = np.eye(DIM, dtype=complex)

# |g up Dn><e dn Up| (hyperfine flip-flop between intermediate states)
FLIP_GUD_EDU = np.zeros((DIM, DIM), dtype=complex)
FLIP_GUD_EDU[2, 5] = 1.0

DONOR_PROJECTOR = (IDENT - TAU_Z) / 2   # position basis (1 - tau_z^id)/2


def orbital_transform(params: SystemParams, dE):
    """Unitary mapping position-basis amplitudes to orbital-basis ones.

    On the orbital factor: Lambda = a*1 - i*b*sigma_y with
    a = sqrt((1 + c)/2), b = sqrt((1 - c)/2), c = d e dE / hbar eps0, so
    |g> = a|i> - b|d> and |e> = b|i> + a|d>.
    """
    c, _ = orbital_mixing(params, dE)
    a = np.sqrt((1 + c) / 2)
    b = np.sqrt((1 - c) / 2)
    lam2 = a * _I2 - 1j * b * _PY
    return _k3(lam2, _I2, _I2)


def basis_change_correction(params: SystemParams, dE, dE_rate):
    """Hermitian term -i Lambda dLambda/dt^dag from the moving orbital basis.

    Equals -(d e Vt / 2 hbar eps0^2) * (d dE/dt) * sigma_y on the orbital
    factor; maximal in magnitude at dE = 0 and zero for a static field.
    """
    e0 = charge_splitting(params, dE)
    coeff = -params.de_over_hbar * params.Vt / (2 * e0**2) * dE_rate
    return coeff * TAU_Y


def frame_generator_diag(params: SystemParams, omega_E: float, omega_B: float):
    """Diagonal of G = wE (tau_z/2 + Iz) - wB (Sz + Iz).

    The rotating frame is Lambda_rot(t) = exp(-i t G); a rotating-frame
    propagator U maps to the lab (orbital) frame as exp(+i T G) U.
    """
    g = (omega_E * (np.diag(TAU_Z).real / 2 + np.diag(I_Z).real)
         - omega_B * (np.diag(S_Z).real + np.diag(I_Z).real))
    return g


def interface_projector(params: SystemParams, dE):
    """|i><i| (x) 1_spin expressed in the orbital basis at field dE."""
    c, s = orbital_mixing(params, dE)
    return (IDENT + c * TAU_Z + s * TAU_X) / 2
