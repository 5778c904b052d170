"""Phase-region scans over reduced measurement strength and ancilla number.

Labels are operational. At finite N a vanishing spectral gap marks the
unitary Zeno regime. Otherwise a late-time oscillation amplitude of ``m_z``
above ``order_threshold`` is a time crystal, and anything else relaxes
(``melted`` for the mean-field limit, ``dissipative`` at finite N).
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import evolve, oscillation_lifetime, polarized_dicke_state
from .liouvillian import SpectralData, build_superoperator, eigendecompose
from .meanfield import ReducedParams, integrate_meanfield
from .spin import SpinStarParams, collective_spin_operators
from .zeno import ValidityWarning, effective_lindbladian

MEAN_FIELD = None  # N sentinel for the thermodynamic limit
LABELS = ("dissipative", "unitary-zeno-like", "melted", "ZTC")
THREADS_ENV = "SPINSTAR_THREADS"


class LowConfidenceWarning(UserWarning):
    pass


def critical_gamma(params: SpinStarParams) -> float:
    """``J_xx^2 / Omega`` with ``Omega = -J_zx / 2``."""
    Omega = -params.J[2, 0] / 2
    if not Omega > 0:
        raise ValueError(f"critical gamma needs a positive drive Omega = -J_zx/2, got {Omega}")
    return float(params.J[0, 0] ** 2 / Omega)


def order_parameter(traj, window_fraction: float = 0.25, observable: str = "m_z") -> float:
    """Half the peak-to-peak range of ``observable`` over the final window."""
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    t, y = traj.times, np.asarray(traj[observable], dtype=float)
    start = t[-1] - window_fraction * (t[-1] - t[0])
    w = y[t >= start]
    amp = float((w.max() - w.min()) / 2)
    if amp > 1e-8:
        dev = w - w.mean()
        crossings = np.count_nonzero(np.diff(np.signbit(dev)))
        if crossings < 2:
            warnings.warn("order-parameter window is shorter than one period", LowConfidenceWarning,
                          stacklevel=2)
    return amp


def spectral_gap(spec: SpectralData, tol: float = 1e-9) -> float:
    """``-max Re(lambda)`` over the non-zero eigenvalues."""
    vals = spec.eigenvalues
    scale = max(np.abs(vals).max(), 1.0)
    nonzero = vals[np.abs(vals) > tol * scale]
    if nonzero.size == 0:
        return 0.0
    return float(max(-nonzero.real.max(), 0.0))


def stripe0_imaginary_pair(spec: SpectralData, rp: ReducedParams, N: int,
                           tol: float = 1e-9) -> tuple[complex, complex]:
    """Near-imaginary eigenvalue pair of the ancilla generator.

    Among eigenvalues with ``0 < Im <= |Omega|`` picks the smallest ``|Re|``
    (ties broken by the larger ``Im``) and returns it with its conjugate.
    """
    vals = spec.eigenvalues
    scale = max(abs(rp.Omega), rp.kappa)
    cand = vals[(vals.imag > tol * scale) & (vals.imag <= abs(rp.Omega) * (1 + 1e-9))]
    if cand.size == 0:
        raise ValueError(f"no oscillating eigenvalue pair below the drive scale (N={N})")
    order = np.lexsort((-cand.imag, np.round(np.abs(cand.real) / (tol * scale))))
    lam = complex(cand[order[0]])
    return lam, lam.conjugate()


@dataclass
class ScanConfig:
    gammas: Sequence[float]
    Ns: Sequence[Optional[int]]
    J_xx: float = 1.0
    Omega: float = 0.05
    omega_a: float = 0.0
    t_final: float = 200.0          # units of 1/Omega
    n_times: int = 2001
    order_threshold: float = 0.05
    window_fraction: float = 0.25
    gap_floor: float = 1e-6
    rtol: float = 1e-8
    atol: float = 1e-10
    mf_rtol: float = 1e-10
    mf_atol: float = 1e-12
    direction: Sequence[float] = (0.0, 0.0, 1.0)
    threads: int = 1

    def points(self) -> list[tuple[float, Optional[int]]]:
        pts = [(float(g), None if n in (None, "inf", "mf") else int(n))
               for g in self.gammas for n in self.Ns]
        return sorted(pts, key=_point_key)


def _point_key(pt):
    g, n = pt
    return (g, math.inf if n is None else n)


@dataclass
class PhasePoint:
    gamma_reduced: float
    N: Optional[int]
    order_parameter: float
    spectral_gap: float
    lifetime: float
    phase_label: str
    Omega_over_kappa: float
    error: Optional[str] = None

    def as_row(self) -> dict:
        return asdict(self)


def _time_grid(cfg: ScanConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_final / cfg.Omega, cfg.n_times)


def evaluate_point(cfg: ScanConfig, gamma: float, N: Optional[int]) -> PhasePoint:
    kappa = cfg.J_xx ** 2 / gamma if np.isfinite(gamma) else 0.0
    ratio = cfg.Omega / kappa if kappa > 0 else math.inf
    t = _time_grid(cfg)
    try:
        if N is None:
            if kappa == 0:
                raise ValueError("mean-field limit needs finite gamma")
            rp = ReducedParams(cfg.Omega, kappa)
            m0 = np.asarray(cfg.direction, dtype=float)
            traj = integrate_meanfield("reduced", m0 / np.linalg.norm(m0), t, rp,
                                       rtol=cfg.mf_rtol, atol=cfg.mf_atol)
            gap = math.nan
        else:
            if np.isfinite(gamma):
                params = SpinStarParams.anisotropic(N, gamma, cfg.Omega, J_xx=cfg.J_xx,
                                                    omega_a=cfg.omega_a)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ValidityWarning)
                    gen = effective_lindbladian(params).superoperator()
            else:
                spins = collective_spin_operators(N)
                gen = build_superoperator(cfg.Omega * spins.Ix, [], n_ancilla=N)
            gap = spectral_gap(eigendecompose(gen, vectors=False))
            rho0 = polarized_dicke_state(N, cfg.direction)
            traj = evolve(gen, rho0, t, rtol=cfg.rtol, atol=cfg.atol, positivity=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            op = order_parameter(traj, cfg.window_fraction)
            fit = oscillation_lifetime(traj, "m_z")
        if N is not None and gap < cfg.gap_floor * max(abs(cfg.Omega), kappa):
            label = "unitary-zeno-like"
        elif op > cfg.order_threshold:
            label = "ZTC"
        elif N is None:
            label = "melted"
        else:
            label = "dissipative"
        return PhasePoint(gamma, N, op, gap, fit.decay_rate, label, ratio)
    except Exception as exc:  # recorded per point, never fatal to the scan
        return PhasePoint(gamma, N, math.nan, math.nan, math.nan, "error", ratio,
                          error=f"{type(exc).__name__}: {exc}")


def _evaluate(args):
    return evaluate_point(*args)


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is not None:
        return max(int(threads), 1)
    env = os.environ.get(THREADS_ENV)
    return max(int(env), 1) if env else 1


def scan_grid(cfg: ScanConfig) -> list[PhasePoint]:
    """Evaluate every ``(gamma, N)`` point; results are ordered by ``(gamma, N)``."""
    pts = cfg.points()
    jobs = [(cfg, g, n) for g, n in pts]
    threads = resolve_threads(cfg.threads)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(j) for j in jobs]
    return sorted(results, key=lambda p: _point_key((p.gamma_reduced, p.N)))
