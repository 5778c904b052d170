"""Strong-measurement reduction of the spin star to an ancilla master equation.

Two independent routes are provided:

* a closed-form route through the eigensystem of the measured central spin
  (Hamiltonian components ``L_k``, Kossakowski matrix, Lamb shift), and
* :func:`numerical_zeno_projection`, which builds the projector onto the
  Zeno subspace and the reduced resolvent of the dissipator as explicit
  matrices and evaluates the second-order generator directly.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .liouvillian import SuperOperator, build_superoperator, devectorize, vectorize
from .spin import (EXCITED, GROUND, SpinStarParams, central_spin_operators, embed_central,
                   partial_trace_central, spin_star_hamiltonian)

VALIDITY_FACTOR = 10.0


class ReductionError(RuntimeError):
    pass


class ValidityWarning(UserWarning):
    pass


def _ket_bra(i, j):
    op = np.zeros((2, 2), dtype=complex)
    op[i, j] = 1.0
    return op


def measurement_dissipator(rho: np.ndarray) -> np.ndarray:
    """Unit-rate ``D[S^-]`` on a single central-spin operator."""
    sm = central_spin_operators()[3]
    sp = sm.conj().T
    return sm @ rho @ sp - 0.5 * (sp @ sm @ rho + rho @ sp @ sm)


@dataclass(frozen=True)
class DissipatorEigensystem:
    eigenvalues: np.ndarray
    right: tuple      # rho_k
    left: tuple       # pi_k, with Tr(pi_j^dag rho_k) = delta_jk

    def biorthogonality(self) -> np.ndarray:
        return np.array([[np.trace(p.conj().T @ r) for r in self.right] for p in self.left])


def dissipator_eigensystem() -> DissipatorEigensystem:
    """Eigen-triples of ``D[S^-]`` on the central spin.

    The eigenvalues are obtained by applying the dissipator to each right
    eigenvector. For ``rho_3 = |1><1| - |0><0|`` this gives -1 (a printed
    value of +1 for this triple cannot be an eigenvalue of a trace- and
    positivity-preserving generator).
    """
    g, e = GROUND, EXCITED
    right = (_ket_bra(g, g), _ket_bra(g, e), _ket_bra(e, g), _ket_bra(e, e) - _ket_bra(g, g))
    left = (np.eye(2, dtype=complex), _ket_bra(g, e), _ket_bra(e, g), _ket_bra(e, e))
    lams = []
    for rho, pi in zip(right, left):
        image = measurement_dissipator(rho)
        lam = np.trace(pi.conj().T @ image).real
        if np.abs(image - lam * rho).max() > 1e-12:
            raise ReductionError("central-spin eigenvector check failed")
        lams.append(lam)
    return DissipatorEigensystem(np.array(lams), right, left)


def hamiltonian_components(H_T: np.ndarray, eig: Optional[DissipatorEigensystem] = None,
                           tol: float = 1e-10) -> list[np.ndarray]:
    """Ancilla operators ``L_k = Tr_c[(rho_k (x) 1) H_T]``.

    Raises :class:`ReductionError` unless ``sum_k pi_k^dag (x) L_k``
    reproduces ``H_T``.
    """
    eig = eig or dissipator_eigensystem()
    H_T = np.asarray(H_T, dtype=complex)
    da = H_T.shape[0] // 2
    eye = np.eye(da)
    comps = [partial_trace_central(np.kron(rho, eye) @ H_T) for rho in eig.right]
    rebuilt = sum(np.kron(pi.conj().T, L) for pi, L in zip(eig.left, comps))
    err = np.abs(rebuilt - H_T).max()
    if err > tol * max(np.abs(H_T).max(), 1.0):
        raise ReductionError(f"Hamiltonian reconstruction failed (max error {err:.3g})")
    return comps


def effective_hamiltonian(components: list[np.ndarray]) -> np.ndarray:
    """Zeno Hamiltonian ``L_0`` with its identity component removed."""
    L0 = components[0]
    d = L0.shape[0]
    return L0 - np.trace(L0) / d * np.eye(d)


def kossakowski_and_lambshift(eig: DissipatorEigensystem, components: list[np.ndarray]):
    """``(A, k, H_L)`` of the second-order term.

    ``A_mn = -Tr(pi_m pi_n^dag rho_0) / conj(lambda_m)``, ``k = A + A^dag``,
    ``H_L = sum_mn h_mn L_m^dag L_n`` with ``h = (A - A^dag) / 2i``.
    For the measured central spin this yields ``A_11 = 2`` and ``k_11 = 4``.
    """
    lams = eig.eigenvalues
    if np.any(np.abs(lams[1:]) < 1e-14):
        raise ZeroDivisionError("dissipator has a zero eigenvalue outside the steady state")
    rho0 = eig.right[0]
    n = len(lams) - 1
    A = np.zeros((n, n), dtype=complex)
    for m in range(1, n + 1):
        for k in range(1, n + 1):
            A[m - 1, k - 1] = -np.trace(eig.left[m] @ eig.left[k].conj().T @ rho0) / np.conj(lams[m])
    kossakowski = A + A.conj().T
    h = (A - A.conj().T) / 2j
    d = components[0].shape[0]
    H_L = np.zeros((d, d), dtype=complex)
    for m in range(n):
        for k in range(n):
            if h[m, k] != 0:
                H_L += h[m, k] * components[m + 1].conj().T @ components[k + 1]
    return A, kossakowski, H_L


@dataclass
class EffectiveModel:
    H_eff: np.ndarray
    jump_terms: list            # [(operator, rate)]
    A_matrix: np.ndarray
    kossakowski: np.ndarray
    lamb_shift: np.ndarray
    Gamma: float
    n_ancilla: int
    params: Optional[SpinStarParams] = None
    validity_warning: Optional[str] = None
    order_note: str = "second order in H/Gamma; O(1/Gamma^2) generator terms neglected"
    kossakowski_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def superoperator(self) -> SuperOperator:
        return build_superoperator(self.H_eff, self.jump_terms, n_ancilla=self.n_ancilla)

    def to_dict(self) -> dict:
        def mat(x):
            x = np.asarray(x)
            return {"re": np.real(x).tolist(), "im": np.imag(x).tolist()}

        return {
            "schema": "spinstar.effective_model/1",
            "params": None if self.params is None else self.params.to_dict(),
            "Gamma": self.Gamma,
            "n_ancilla": self.n_ancilla,
            "H_eff": mat(self.H_eff),
            "jumps": [{"operator": mat(op), "rate": float(rate)} for op, rate in self.jump_terms],
            "A_matrix": mat(self.A_matrix),
            "kossakowski": mat(self.kossakowski),
            "lamb_shift": mat(self.lamb_shift),
            "validity_warning": self.validity_warning,
            "order_note": self.order_note,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def effective_lindbladian(params: SpinStarParams, psd_tol: float = 1e-10) -> EffectiveModel:
    """Second-order ancilla master equation for the measured spin star."""
    warning = None
    if params.gamma_reduced <= VALIDITY_FACTOR * params.gamma0:
        warning = (f"gamma_reduced={params.gamma_reduced:g} is not >> gamma0={params.gamma0:g}; "
                   "the effective description may be inaccurate")
        warnings.warn(warning, ValidityWarning, stacklevel=2)

    eig = dissipator_eigensystem()
    comps = hamiltonian_components(spin_star_hamiltonian(params), eig)
    H_Z = effective_hamiltonian(comps)
    A, k, H_L = kossakowski_and_lambshift(eig, comps)
    Gamma = params.Gamma

    w, U = np.linalg.eigh(k)
    if w.min() < -psd_tol:
        raise ReductionError(f"Kossakowski matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    jumps = []
    for j in range(len(w)):
        if w[j] <= psd_tol:
            continue
        op = sum(np.conj(U[n, j]) * comps[n + 1] for n in range(len(w)))
        if np.abs(op).max() < 1e-14:
            continue
        jumps.append((op, w[j] / Gamma))
    return EffectiveModel(H_eff=H_Z + H_L / Gamma, jump_terms=jumps, A_matrix=A,
                          kossakowski=k, lamb_shift=H_L, Gamma=Gamma, n_ancilla=params.N,
                          params=params, validity_warning=warning, kossakowski_eigenvalues=w)


@dataclass(frozen=True)
class ZenoProjection:
    """Explicit matrices of the projection route on ``C^2 (x) C^(N+1)``."""

    P: np.ndarray          # rho_0 (x) Tr_c
    Q: np.ndarray
    S: np.ndarray          # reduced resolvent of D on range(Q)
    D: np.ndarray          # unit-rate measurement dissipator
    embed: np.ndarray      # vec(rho_B) -> vec(rho_0 (x) rho_B)
    reduce: np.ndarray     # vec(X) -> vec(Tr_c X)


def zeno_projection(n_ancilla: int, rank_tol: float = 1e-10) -> ZenoProjection:
    da = n_ancilla + 1
    d = 2 * da
    rho0 = _ket_bra(GROUND, GROUND)
    basis_a = np.eye(da * da)
    embed = np.column_stack([vectorize(np.kron(rho0, devectorize(basis_a[:, j])))
                             for j in range(da * da)])
    basis = np.eye(d * d)
    reduce = np.column_stack([vectorize(partial_trace_central(devectorize(basis[:, j])))
                              for j in range(d * d)])
    P = embed @ reduce
    Q = np.eye(d * d) - P
    sminus = embed_central(central_spin_operators()[3], n_ancilla)
    D = build_superoperator(np.zeros((d, d)), [(sminus, 1.0)]).matrix
    pinv = np.linalg.pinv(D, rcond=rank_tol)
    rank = np.linalg.matrix_rank(D, tol=rank_tol * max(np.abs(D).max(), 1.0))
    if rank != d * d - da * da:
        raise ReductionError(f"dissipator rank {rank} differs from the expected {d * d - da * da}")
    # Moore-Penrose inverse restricted to range(Q) and mapped back onto it
    S = Q @ pinv @ Q
    return ZenoProjection(P=P, Q=Q, S=S, D=D, embed=embed, reduce=reduce)


def numerical_zeno_projection(L_full: SuperOperator, Gamma: float,
                              projection: Optional[ZenoProjection] = None) -> SuperOperator:
    """Ancilla generator ``Tr_c [P K P - P K Q S K P / Gamma] (rho_0 (x) .)``.

    ``K = L_full - Gamma D``. ``S`` is the inverse of ``D`` on range(Q), so
    the adiabatic elimination of the fast block carries a minus sign.
    """
    if L_full.n_ancilla is None or not L_full.has_central:
        raise ValueError("numerical projection needs a spin-star generator with a central spin")
    proj = projection or zeno_projection(L_full.n_ancilla)
    K = L_full.matrix - Gamma * proj.D
    KP = K @ proj.P
    L_eff = proj.P @ KP - proj.P @ K @ proj.Q @ proj.S @ KP / Gamma
    reduced = proj.reduce @ L_eff @ proj.embed
    return SuperOperator(reduced, L_full.n_ancilla + 1, n_ancilla=L_full.n_ancilla)
