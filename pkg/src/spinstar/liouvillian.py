"""Vectorized Lindblad generators and their spectra.

Vectorization stacks columns: entry ``(i, j)`` of a ``d x d`` matrix lands
at index ``j*d + i``, so ``vec(A X B) = (B^T (x) A) vec(X)``.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .spin import SpinStarParams, central_spin_operators, embed_central, spin_star_hamiltonian

STRIPE_HALF_WIDTH = 0.25
# stripe position s (units of Gamma/2) -> label mu; s = 1 folds mu = 1 and 2
STRIPE_LABELS = {0: 0, 1: 1, 2: 3}


class ConvergenceError(RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SteadyStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class SuperOperator:
    """Dense ``d^2 x d^2`` generator.

    ``n_ancilla`` and ``has_central`` describe the Hilbert-space layout when
    the generator comes from the spin-star model; they are ``None``/``False``
    for generic generators.
    """

    matrix: np.ndarray
    hilbert_dim: int
    n_ancilla: Optional[int] = None
    has_central: bool = False

    def __post_init__(self):
        shape = self.matrix.shape
        if shape != (self.hilbert_dim**2, self.hilbert_dim**2):
            raise ValueError(f"superoperator of shape {shape} does not act on d={self.hilbert_dim}")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return devectorize(self.matrix @ vectorize(rho))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 1))

    def trace_defect(self) -> float:
        """``max |vec(1)^dag L|`` scaled by the largest entry."""
        row = vectorize(np.eye(self.hilbert_dim)).conj() @ self.matrix
        return float(np.abs(row).max() / max(np.abs(self.matrix).max(), 1.0))


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"vectorize expects a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise ValueError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(d, d, order="F")


def _check_operator(op, d):
    op = np.asarray(op, dtype=complex)
    if op.shape != (d, d):
        raise ValueError(f"operator of shape {op.shape} does not match dimension {d}")
    return op


def build_superoperator(H: np.ndarray, jumps: Sequence[tuple[np.ndarray, float]] = (),
                        **layout) -> SuperOperator:
    """Generator of ``-i[H, rho] + sum_j rate_j D[O_j] rho``.

    ``jumps`` is a sequence of ``(O_j, rate_j)`` with non-negative rates.
    Extra keyword arguments are stored as layout metadata on the result.
    """
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    H = _check_operator(H, d)
    eye = np.eye(d)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for op, rate in jumps:
        op = _check_operator(op, d)
        if not np.isfinite(rate) or rate < 0:
            raise ValueError(f"jump rates must be finite and non-negative, got {rate}")
        if rate == 0:
            continue
        OdO = op.conj().T @ op
        L += rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, OdO) - 0.5 * np.kron(OdO.T, eye))
    return SuperOperator(L, d, **layout)


def lindblad_rhs(H, jumps, rho):
    """Direct evaluation of the master-equation right-hand side (no vectorization)."""
    out = -1j * (H @ rho - rho @ H)
    for op, rate in jumps:
        OdO = op.conj().T @ op
        out = out + rate * (op @ rho @ op.conj().T - 0.5 * (OdO @ rho + rho @ OdO))
    return out


def spin_star_liouvillian(params: SpinStarParams) -> SuperOperator:
    """Full generator of the spin star with the central spin measured at rate Gamma."""
    H = spin_star_hamiltonian(params)
    sminus = embed_central(central_spin_operators()[3], params.N)
    return build_superoperator(H, [(sminus, params.Gamma)],
                               n_ancilla=params.N, has_central=True)


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    right_vectors: Optional[np.ndarray] = None   # columns
    left_vectors: Optional[np.ndarray] = None    # columns, <<l_j|r_k>> = delta_jk
    residuals: Optional[np.ndarray] = None
    norm: float = 1.0
    hilbert_dim: int = 0
    defective: bool = False
    stripe_labels: Optional[np.ndarray] = None
    stripe_positions: Optional[np.ndarray] = None
    stripes_valid: Optional[bool] = None
    Gamma: Optional[float] = None
    notes: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.eigenvalues)

    def stripe(self, mu: int) -> np.ndarray:
        if self.stripe_labels is None:
            raise ValueError("spectrum has not been classified into stripes")
        return self.eigenvalues[self.stripe_labels == mu]

    @property
    def stripe_counts(self) -> dict:
        if self.stripe_labels is None:
            return {}
        return {mu: int(np.sum(self.stripe_labels == mu)) for mu in sorted(set(STRIPE_LABELS.values()))}


def _converged_index(message: str):
    match = re.search(r"(\d+)", message)
    return int(match.group(1)) if match else None


def eigendecompose(L: SuperOperator | np.ndarray, vectors: bool = True,
                   cond_limit: float = 1e10, left: bool = True) -> SpectralData:
    """Full eigensystem of a (non-Hermitian) generator.

    Right eigenvectors come from LAPACK ``geev`` with unit norm; the left
    set is the rows of ``R^{-1}``, which makes the pair biorthonormal even
    inside degenerate eigenspaces. A condition number of ``R`` above
    ``cond_limit`` marks the spectrum as (numerically) defective.
    ``left=False`` skips the left set (and the conditioning check) when only
    eigenvalues and residuals are needed.
    """
    if isinstance(L, SuperOperator):
        mat, d = L.matrix, L.hilbert_dim
    else:
        mat = np.asarray(L, dtype=complex)
        d = int(round(np.sqrt(mat.shape[0])))
    if not np.all(np.isfinite(mat)):
        raise ValueError("generator has non-finite entries")
    norm = float(np.linalg.norm(mat, 1))
    try:
        if not vectors:
            vals = sla.eigvals(mat, check_finite=False)
            return SpectralData(vals, norm=norm, hilbert_dim=d)
        vals, R = sla.eig(mat, right=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}", _converged_index(str(exc))) from exc

    residuals = np.linalg.norm(mat @ R - R * vals, axis=0)
    if not left:
        return SpectralData(vals, R, None, residuals, norm=norm, hilbert_dim=d)
    cond = np.linalg.cond(R)
    defective = bool(not np.isfinite(cond) or cond > cond_limit)
    notes = ()
    if defective:
        warnings.warn(f"eigenvector matrix is ill-conditioned (cond={cond:.3g}); "
                      "spectrum may be defective", RuntimeWarning, stacklevel=2)
        notes = (f"defective: cond(R) = {cond:.3g}",)
        left = np.linalg.pinv(R).conj().T
    else:
        left = np.linalg.inv(R).conj().T
    return SpectralData(vals, R, left, residuals, norm=norm, hilbert_dim=d,
                        defective=defective, notes=notes)


def classify_stripes(spec: SpectralData, Gamma: float,
                     half_width: float = STRIPE_HALF_WIDTH) -> SpectralData:
    """Label each eigenvalue by its stripe ``s = round(-2 Re(lambda) / Gamma)``."""
    if not Gamma > 0:
        raise ValueError(f"Gamma must be positive, got {Gamma}")
    x = -2 * spec.eigenvalues.real / Gamma
    s = np.clip(np.round(x), 0, 2).astype(int)
    labels = np.array([STRIPE_LABELS[k] for k in s], dtype=int)
    valid = bool(np.all(np.abs(x - s) < half_width))
    n12 = int(np.sum(s == 1))
    notes = spec.notes + (f"stripes mu=1 and mu=2 share Re = -Gamma/2; reported merged as mu=1 ({n12} eigenvalues)",)
    if not valid:
        notes += ("eigenvalues outside every stripe window; Gamma too small for stripe separation",)
    return replace(spec, stripe_labels=labels, stripe_positions=x, stripes_valid=valid,
                   Gamma=float(Gamma), notes=notes)


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    degenerate: bool
    kernel: tuple


def steady_state(spec: SpectralData, tol: float = 1e-8) -> SteadyState:
    """Stationary state from the kernel of the generator.

    A degenerate kernel returns the spectral projection of the maximally
    mixed state onto it, together with every (Hermitized) kernel vector.
    """
    if spec.right_vectors is None:
        raise SteadyStateError("steady state needs eigenvectors")
    zero = np.flatnonzero(np.abs(spec.eigenvalues) < tol * max(spec.norm, 1.0))
    if zero.size == 0:
        raise SteadyStateError("generator has no zero eigenvalue")
    d = spec.hilbert_dim
    kernel = []
    for k in zero:
        r = devectorize(spec.right_vectors[:, k])
        kernel.append((r + r.conj().T) / 2)
    if zero.size == 1:
        rho = kernel[0] / np.trace(kernel[0])
    else:
        mixed = vectorize(np.eye(d) / d)
        R = spec.right_vectors[:, zero]
        Lv = spec.left_vectors[:, zero]
        rho = devectorize(R @ (Lv.conj().T @ mixed))
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    min_eig = np.linalg.eigvalsh(rho).min()
    if min_eig < -tol:
        raise SteadyStateError(f"steady state is not positive (min eigenvalue {min_eig:.3g})")
    return SteadyState(rho, zero.size > 1, tuple(kernel))


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    D = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def matched_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance under the optimal one-to-one pairing of two equal-size sets."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"eigenvalue sets differ in size: {a.size} vs {b.size}")
    D = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(D)
    return float(D[rows, cols].max())
