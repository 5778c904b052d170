"""Time evolution of vectorized master equations and trajectory analysis."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .liouvillian import SuperOperator, devectorize, vectorize
from .spin import central_spin_operators, collective_spin_operators

RTOL = 1e-8
ATOL = 1e-10


class IntegrationError(RuntimeError):
    pass


class NonOscillatoryError(ValueError):
    pass


@dataclass
class Trajectory:
    """Observable time series on a fixed time grid.

    ``observables`` maps a column name to a real array aligned with
    ``times``; ``states`` holds density matrices at requested checkpoints.
    """

    times: np.ndarray
    observables: dict
    states: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.observables[name]

    @property
    def columns(self) -> list[str]:
        return list(self.observables)


def _observable_ops(gen: SuperOperator) -> dict:
    ops = {}
    N = gen.n_ancilla
    if N is None:
        return ops
    spins = collective_spin_operators(N)
    I = N / 2
    if gen.has_central:
        eye_c, eye_a = np.eye(2), np.eye(N + 1)
        lift = lambda op: np.kron(eye_c, op)
        S = central_spin_operators()[:3]
        central = {f"S_{a}": np.kron(op, eye_a) for a, op in zip("xyz", S)}
    else:
        lift = lambda op: op
        central = {}
    for a, op in zip("xyz", spins.vector):
        ops[f"m_{a}"] = lift(op) / I
    for a, op in zip("xyz", spins.vector):
        ops[f"mN_{a}"] = lift(op) / N
    ops["I2"] = lift(sum(op @ op for op in spins.vector))
    ops.update(central)
    return ops


def check_density_matrix(rho: np.ndarray, tol: float = 1e-8) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("initial state is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"initial state has trace {np.trace(rho).real:.12g}, expected 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise ValueError("initial state is not positive semidefinite")


def evolve(generator: SuperOperator, rho0: np.ndarray, t_grid: Sequence[float],
           rtol: float = RTOL, atol: float = ATOL, checkpoints: Sequence[float] = (),
           extra_observables: Optional[dict] = None, positivity: bool = True) -> Trajectory:
    """Integrate ``d|rho>>/dt = L|rho>>`` with the Dormand-Prince RK4(5) pair.

    Records ancilla magnetizations (``m_a = <I_a>/I`` and ``mN_a = <I_a>/N``),
    the Casimir ``I2 = Tr(rho I^2)``, central-spin expectations when present, the trace, the Hermiticity
    defect and the smallest eigenvalue of the Hermitized state.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing and start at 0")
    d = generator.hilbert_dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError(f"initial state of shape {rho0.shape} does not match d={d}")
    check_density_matrix(rho0)

    L = generator.matrix
    sol = solve_ivp(lambda t, y: L @ y, (0.0, t_grid[-1]), vectorize(rho0).astype(complex),
                    method="RK45", t_eval=t_grid, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1] if sol.t.size else 0:.6g}: {sol.message}")
    Y = sol.y

    ops = _observable_ops(generator)
    if extra_observables:
        ops.update(extra_observables)
    obs = {}
    for name, op in ops.items():
        obs[name] = np.real(vectorize(np.asarray(op).T) @ Y)
    obs["trace"] = np.real(vectorize(np.eye(d)) @ Y)
    herm = np.empty(Y.shape[1])
    min_eig = np.full(Y.shape[1], np.nan)
    for k in range(Y.shape[1]):
        rho = devectorize(Y[:, k])
        herm[k] = np.abs(rho - rho.conj().T).max()
        if positivity:
            min_eig[k] = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    obs["hermiticity"] = herm
    obs["min_eig"] = min_eig

    states = {}
    for tc in checkpoints:
        idx = int(np.argmin(np.abs(t_grid - tc)))
        if not np.isclose(t_grid[idx], tc, rtol=0, atol=1e-12 * max(1.0, abs(tc))):
            raise ValueError(f"checkpoint t={tc} is not on the time grid")
        states[float(t_grid[idx])] = devectorize(Y[:, idx]).copy()

    meta = {"method": "RK45", "rtol": rtol, "atol": atol, "nfev": int(sol.nfev),
            "hilbert_dim": d, "n_ancilla": generator.n_ancilla,
            "has_central": generator.has_central}
    return Trajectory(t_grid, obs, states, meta)


def polarized_dicke_state(N: int, direction: Sequence[float]) -> np.ndarray:
    """Spin-coherent state of the ``I = N/2`` irrep pointing along ``direction``."""
    n = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("direction must be a non-zero finite vector")
    n = n / norm
    theta = np.arccos(np.clip(n[2], -1.0, 1.0))
    phi = np.arctan2(n[1], n[0])
    spins = collective_spin_operators(N)
    top = np.zeros(N + 1, dtype=complex)
    top[0] = 1.0
    psi = sla.expm(-1j * phi * spins.Iz) @ (sla.expm(-1j * theta * spins.Iy) @ top)
    return np.outer(psi, psi.conj())


def central_state(which: str = "ground") -> np.ndarray:
    from .spin import EXCITED, GROUND

    rho = np.zeros((2, 2), dtype=complex)
    idx = {"ground": GROUND, "excited": EXCITED}[which]
    rho[idx, idx] = 1.0
    return rho


@dataclass(frozen=True)
class LifetimeFit:
    frequency: float
    decay_rate: float
    amplitude: float = 0.0
    phase: float = 0.0
    offset: float = 0.0
    residual: float = 0.0
    low_confidence: bool = False


def _damped_cos(t, A, k, w, phi, C):
    return A * np.exp(-k * t) * np.cos(w * t + phi) + C


def _damped_exp(t, A, k, C):
    return A * np.exp(-k * t) + C


def oscillation_lifetime(traj: Trajectory | tuple, observable: str = "m_z") -> LifetimeFit:
    """Fit ``A exp(-k t) cos(w t + phi) + C`` and return ``(w, k)`` with diagnostics.

    Initial guesses come from the extrema of the signal (spacing for ``w``,
    log-envelope slope for ``k``); signals with fewer than three extrema are
    treated as overdamped and fitted by ``A exp(-k t) + C`` with ``w = 0``.
    """
    if isinstance(traj, Trajectory):
        t, y = traj.times, np.asarray(traj[observable], dtype=float)
    else:
        t, y = (np.asarray(v, dtype=float) for v in traj)
    span = np.ptp(y)
    if span <= 1e-12 * max(1.0, np.abs(y).max()):
        return LifetimeFit(0.0, 0.0, offset=float(np.mean(y)))
    t = t - t[0]
    tail = max(len(y) // 10, 1)
    C0 = float(np.mean(y[-tail:]))
    dev = y - C0
    maxima, _ = find_peaks(dev)
    minima, _ = find_peaks(-dev)
    extrema = np.sort(np.r_[maxima, minima])

    if len(maxima) >= 2 and len(extrema) >= 3:
        w0 = 2 * np.pi / np.mean(np.diff(t[maxima]))
        env = np.abs(dev[extrema])
        good = env > 1e-14
        if good.sum() >= 2:
            k0 = max(-np.polyfit(t[extrema][good], np.log(env[good]), 1)[0], 0.0)
        else:
            k0 = 0.0
        A0 = np.abs(dev[extrema[0]]) * np.exp(k0 * t[extrema[0]])
        phi0 = -w0 * t[maxima[0]]
        phi0 = (phi0 + np.pi) % (2 * np.pi) - np.pi
        p0 = [A0, k0, w0, phi0, C0]
        lower = [0, 0, 0, -np.inf, -np.inf]
        upper = [np.inf, np.inf, np.inf, np.inf, np.inf]
        try:
            p, _ = curve_fit(_damped_cos, t, y, p0=p0, bounds=(lower, upper), maxfev=20000)
        except RuntimeError:
            p = np.array(p0)
        model = _damped_cos(t, *p)
        res = float(np.sqrt(np.mean((y - model) ** 2)))
        return LifetimeFit(float(p[2]), float(p[1]), float(p[0]), float(p[3]), float(p[4]),
                           res, res > 0.1 * span / 2)

    A0 = y[0] - C0
    k0 = 1.0 / max(t[-1] / 5, 1e-12)
    try:
        p, _ = curve_fit(_damped_exp, t, y, p0=[A0, k0, C0], maxfev=20000)
    except RuntimeError:
        p = np.array([A0, k0, C0])
    model = _damped_exp(t, *p)
    res = float(np.sqrt(np.mean((y - model) ** 2)))
    return LifetimeFit(0.0, float(abs(p[1])), float(p[0]), 0.0, float(p[2]), res,
                       res > 0.1 * span / 2)


def dominant_frequency(t: np.ndarray, y: np.ndarray, pad: int = 8,
                       contrast: float = 10.0) -> float:
    """Angular frequency of the strongest spectral line of a uniformly sampled signal.

    Hann window, zero padding and a parabolic fit to the log-magnitude peak.
    Raises :class:`NonOscillatoryError` when the peak is less than
    ``contrast`` times the median spectral background.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6, atol=0):
        raise ValueError("dominant_frequency needs a uniformly sampled signal")
    scale = max(np.abs(y).max(), 1.0)
    y = y - y.mean()
    if np.ptp(y) <= 1e-9 * scale:
        raise NonOscillatoryError("signal is constant")
    n = len(y)
    nfft = pad * n
    spec = np.abs(np.fft.rfft(y * np.hanning(n), nfft))
    freqs = 2 * np.pi * np.fft.rfftfreq(nfft, dt[0])
    k = int(np.argmax(spec[1:]) + 1)
    background = np.median(spec[1:])
    if spec[k] < contrast * max(background, 1e-300):
        raise NonOscillatoryError("no spectral peak above background")
    if k + 1 >= len(spec):
        return float(freqs[k])
    a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
    shift = 0.5 * (a - c) / (a - 2 * b + c) if (a - 2 * b + c) != 0 else 0.0
    return float(freqs[k] + shift * (freqs[1] - freqs[0]))
