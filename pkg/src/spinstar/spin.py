"""Spin operators for the central-spin / collective-ancilla star.

Basis conventions used throughout the package:

* central spin ordered as ``(|1>, |0>)``, i.e. ``S_z = diag(+1/2, -1/2)``;
  ``|0>`` is the ground state and ``S^- = |0><1|``;
* ancilla block is the spin ``I = N/2`` irrep in the ``I_z`` eigenbasis,
  ordered from ``m = +I`` down to ``m = -I``;
* composite operators are ``central (x) ancilla``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# index of |1> (excited) and |0> (ground) in the central-spin basis
EXCITED = 0
GROUND = 1

AXES = "xyz"


@dataclass(frozen=True)
class SpinStarParams:
    """Physical constants of the spin-star model.

    Frequencies are in units of ``J_xx``. ``J[a, b]`` couples ``S_a`` to
    ``I_b``. The measurement rate is parameterized by the reduced strength
    ``gamma_reduced`` with ``Gamma = gamma_reduced * N / 2``.
    """

    omega_c: float = 0.0
    omega_a: float = 0.0
    J: np.ndarray = field(default_factory=lambda: np.eye(3))
    gamma_reduced: float = 1.0
    N: int = 1

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        if J.shape != (3, 3):
            raise ValueError(f"coupling matrix must be 3x3, got shape {J.shape}")
        object.__setattr__(self, "J", J)
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"ancilla count N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        values = np.r_[self.omega_c, self.omega_a, self.gamma_reduced, J.ravel()]
        if not np.all(np.isfinite(values)):
            raise ValueError("spin-star parameters must be finite")
        if self.gamma_reduced <= 0:
            raise ValueError(f"gamma_reduced must be positive, got {self.gamma_reduced}")

    @property
    def total_spin(self) -> float:
        return self.N / 2

    @property
    def Gamma(self) -> float:
        return self.gamma_reduced * self.N / 2

    @property
    def gamma0(self) -> float:
        """Validity threshold ``max(|J_ij|, |omega_c|, |omega_a|)``."""
        return float(max(np.abs(self.J).max(), abs(self.omega_c), abs(self.omega_a)))

    def replace(self, **changes) -> "SpinStarParams":
        kw = dict(omega_c=self.omega_c, omega_a=self.omega_a, J=self.J,
                  gamma_reduced=self.gamma_reduced, N=self.N)
        kw.update(changes)
        return SpinStarParams(**kw)

    def to_dict(self) -> dict:
        return {
            "omega_c": float(self.omega_c),
            "omega_a": float(self.omega_a),
            "J": self.J.tolist(),
            "gamma_reduced": float(self.gamma_reduced),
            "N": self.N,
        }

    @classmethod
    def fig2(cls, N: int = 20, gamma_reduced: float = 15.0) -> "SpinStarParams":
        """Couplings used for the spectra: J_xx = J_yy = 1, J_zx = 0.01."""
        J = np.zeros((3, 3))
        J[0, 0] = 1.0
        J[1, 1] = 1.0
        J[2, 0] = 0.01
        return cls(omega_c=0.1, omega_a=0.01, J=J, gamma_reduced=gamma_reduced, N=N)

    @classmethod
    def anisotropic(cls, N: int, gamma_reduced: float, Omega: float,
                    J_xx: float = 1.0, omega_a: float = 0.0,
                    omega_c: float = 0.0) -> "SpinStarParams":
        """Coupling choice J_xx = J_yy, J_zz = 2 omega_a, J_zx = -2 Omega.

        With it the ancilla dynamics reduce to the driven Dicke model with
        drive ``Omega`` and ``kappa = J_xx**2 / gamma_reduced``.
        """
        J = np.zeros((3, 3))
        J[0, 0] = J_xx
        J[1, 1] = J_xx
        J[2, 2] = 2 * omega_a
        J[2, 0] = -2 * Omega
        return cls(omega_c=omega_c, omega_a=omega_a, J=J,
                   gamma_reduced=gamma_reduced, N=N)


@dataclass(frozen=True)
class CollectiveSpinSet:
    Ix: np.ndarray
    Iy: np.ndarray
    Iz: np.ndarray
    Iplus: np.ndarray
    Iminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.Iz.shape[0]

    @property
    def total_spin(self) -> float:
        return (self.dim - 1) / 2

    @property
    def vector(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.Ix, self.Iy, self.Iz


def collective_spin_operators(N: int) -> CollectiveSpinSet:
    """Spin-``N/2`` operators of dimension ``N + 1``, ordered ``m = I .. -I``."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    N = int(N)
    I = N / 2
    m = I - np.arange(N + 1)
    # <m+1|I+|m> = sqrt(I(I+1) - m(m+1)); row k holds m[k] = m[k+1] + 1
    ladder = np.sqrt(I * (I + 1) - m[1:] * (m[1:] + 1))
    Iplus = np.diag(ladder, 1).astype(complex)
    Iminus = Iplus.conj().T.copy()
    Ix = (Iplus + Iminus) / 2
    Iy = (Iplus - Iminus) / 2j
    Iz = np.diag(m).astype(complex)
    return CollectiveSpinSet(Ix=Ix, Iy=Iy, Iz=Iz, Iplus=Iplus, Iminus=Iminus)


def central_spin_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(S_x, S_y, S_z, S^-)`` for the central spin in the ``(|1>, |0>)`` basis."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex) / 2
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
    sz = np.array([[1, 0], [0, -1]], dtype=complex) / 2
    sminus = np.zeros((2, 2), dtype=complex)
    sminus[GROUND, EXCITED] = 1.0
    return sx, sy, sz, sminus


def spin_star_hamiltonian(params: SpinStarParams) -> np.ndarray:
    """``omega_c S_z + omega_a I_z + sum_ab J_ab S_a I_b`` on ``C^2 (x) C^(N+1)``."""
    spins = collective_spin_operators(params.N)
    S = central_spin_operators()[:3]
    I = spins.vector
    eye_c = np.eye(2)
    eye_a = np.eye(spins.dim)
    H = params.omega_c * np.kron(S[2], eye_a) + params.omega_a * np.kron(eye_c, spins.Iz)
    for a in range(3):
        for b in range(3):
            if params.J[a, b] != 0:
                H = H + params.J[a, b] * np.kron(S[a], I[b])
    return H


def is_hermitian(H: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(np.abs(H).max(), 1.0)
    return bool(np.abs(H - H.conj().T).max() <= rtol * scale)


def embed_ancilla(op: np.ndarray) -> np.ndarray:
    """``1_c (x) op``."""
    return np.kron(np.eye(2), op)


def embed_central(op: np.ndarray, n_ancilla: int) -> np.ndarray:
    """``op (x) 1_a``."""
    return np.kron(op, np.eye(n_ancilla + 1))


def _split_dims(dim: int) -> int:
    if dim % 2:
        raise ValueError(f"composite dimension must be even, got {dim}")
    return dim // 2


def partial_trace_central(state: np.ndarray) -> np.ndarray:
    """Trace out the central spin of a ``2(N+1)``-dimensional operator."""
    state = np.asarray(state)
    if state.ndim != 2 or state.shape[0] != state.shape[1]:
        raise ValueError("partial trace needs a square matrix")
    da = _split_dims(state.shape[0])
    return np.einsum("iaib->ab", state.reshape(2, da, 2, da))


def partial_trace_ancilla(state: np.ndarray) -> np.ndarray:
    """Trace out the ancilla block, leaving the 2x2 central-spin operator."""
    state = np.asarray(state)
    da = _split_dims(state.shape[0])
    return np.einsum("iaja->ij", state.reshape(2, da, 2, da))
