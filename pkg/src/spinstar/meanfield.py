"""Mean-field dynamics of the spin star and of its driven-Dicke reduction.

Ancilla variables are rescaled as ``m = <I>/I`` with ``I = N/2``; the
central spin enters through ``s = <S>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import IntegrationError, NonOscillatoryError, Trajectory, dominant_frequency
from .spin import SpinStarParams

RTOL = 1e-10
ATOL = 1e-12
Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class MeanFieldState:
    m: np.ndarray
    s: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.r_[self.m, self.s]

    @classmethod
    def from_vector(cls, v) -> "MeanFieldState":
        v = np.asarray(v, dtype=float)
        return cls(v[:3].copy(), v[3:6].copy())


@dataclass(frozen=True)
class ReducedParams:
    Omega: float
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def ratio(self) -> float:
        return self.Omega / self.kappa

    @classmethod
    def from_params(cls, params: SpinStarParams, atol: float = 1e-12) -> "ReducedParams":
        """``Omega = -J_zx / 2`` and ``kappa = J_xx^2 / gamma``.

        Only defined for the anisotropic coupling ``J_xx = J_yy``,
        ``J_zz = 2 omega_a`` with no other off-diagonal couplings.
        """
        J = params.J
        mask = np.ones((3, 3), dtype=bool)
        for i, j in [(0, 0), (1, 1), (2, 2), (2, 0)]:
            mask[i, j] = False
        if (abs(J[0, 0] - J[1, 1]) > atol or abs(J[2, 2] - 2 * params.omega_a) > atol
                or np.abs(J[mask]).max() > atol):
            raise ValueError("coupling matrix is not of the driven-Dicke form "
                             "(J_xx = J_yy, J_zz = 2 omega_a, only J_zx off-diagonal)")
        return cls(Omega=-J[2, 0] / 2, kappa=J[0, 0] ** 2 / params.gamma_reduced)


def full_rhs(state: MeanFieldState, params: SpinStarParams) -> MeanFieldState:
    """Factorized equations of motion for ``(m, s)`` of the measured spin star.

    Each spin precesses in the mean field of the other,
    ``dm/dt = (omega_a z + J^T s) x m`` and
    ``ds/dt = (omega_c z + I J m) x s`` plus measurement damping
    ``-Gamma/2`` on ``s_x, s_y`` and ``-Gamma (s_z + 1/2)`` on ``s_z``.
    """
    m = np.asarray(state.m, dtype=float)
    s = np.asarray(state.s, dtype=float)
    I = params.total_spin
    G = params.Gamma
    field_a = params.omega_a * Z + params.J.T @ s
    field_c = params.omega_c * Z + I * (params.J @ m)
    dm = np.cross(field_a, m)
    ds = np.cross(field_c, s) - np.array([G / 2 * s[0], G / 2 * s[1], G * (s[2] + 0.5)])
    return MeanFieldState(dm, ds)


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _full_rhs_vector(params: SpinStarParams):
    """Scalar-arithmetic form of :func:`full_rhs` on the flat ``(m, s)`` vector."""
    J = params.J.tolist()
    I, G = params.total_spin, params.Gamma
    wa, wc = float(params.omega_a), float(params.omega_c)

    def rhs(t, y):
        mx, my, mz, sx, sy, sz = y
        fa = (J[0][0] * sx + J[1][0] * sy + J[2][0] * sz,
              J[0][1] * sx + J[1][1] * sy + J[2][1] * sz,
              wa + J[0][2] * sx + J[1][2] * sy + J[2][2] * sz)
        fc = (I * (J[0][0] * mx + J[0][1] * my + J[0][2] * mz),
              I * (J[1][0] * mx + J[1][1] * my + J[1][2] * mz),
              wc + I * (J[2][0] * mx + J[2][1] * my + J[2][2] * mz))
        dm = _cross(fa, (mx, my, mz))
        ds = _cross(fc, (sx, sy, sz))
        return [dm[0], dm[1], dm[2], ds[0] - G / 2 * sx, ds[1] - G / 2 * sy, ds[2] - G * (sz + 0.5)]

    return rhs


def adiabatic_central_spin(m: Sequence[float], params: SpinStarParams) -> np.ndarray:
    """Large-Gamma stationary central spin slaved to the ancilla magnetization."""
    m = np.asarray(m, dtype=float)
    g = params.gamma_reduced
    return np.array([-params.J[1, 1] / g * m[1], params.J[0, 0] / g * m[0], -0.5])


def reduced_rhs(m: Sequence[float], rp: ReducedParams) -> np.ndarray:
    mx, my, mz = m
    k, W = rp.kappa, rp.Omega
    return np.array([k * mx * mz,
                     k * my * mz - W * mz,
                     -k * (mx * mx + my * my) + W * my])


def reduced_jacobian(m: Sequence[float], rp: ReducedParams) -> np.ndarray:
    mx, my, mz = m
    k, W = rp.kappa, rp.Omega
    return np.array([[k * mz, 0 * mz, k * mx],
                     [0 * mz, k * mz, k * my - W],
                     [-2 * k * mx, -2 * k * my + W, 0 * mz]])


def finite_difference_jacobian(f, m, h: float = 1e-6) -> np.ndarray:
    m = np.asarray(m)
    cols = []
    for j in range(len(m)):
        e = np.zeros(len(m), dtype=m.dtype)
        e[j] = h
        cols.append((f(m + e) - f(m - e)) / (2 * h))
    return np.column_stack(cols)


@dataclass(frozen=True)
class FixedPoint:
    family: int
    m: np.ndarray                # complex when the family is unphysical
    physical: bool
    jacobian_eigs: np.ndarray
    classification: str          # "saddle", "center" or "degenerate"
    stable: bool                 # all non-zero eigenvalues have negative real part

    def to_dict(self) -> dict:
        def cplx(x):
            return [[float(np.real(v)), float(np.imag(v))] for v in x]

        return {"family": self.family, "m": cplx(self.m), "physical": self.physical,
                "jacobian_eigs": cplx(self.jacobian_eigs),
                "classification": self.classification, "stable": self.stable}


def _classify(eigs, scale, tol=1e-9):
    nonzero = eigs[np.abs(eigs) > tol * scale]
    if nonzero.size == 0:
        return "degenerate", False
    stable = bool(np.all(nonzero.real < -tol * scale))
    if np.all(np.abs(nonzero.real) <= tol * scale):
        return "center", False
    return "saddle", stable


def fixed_points(rp: ReducedParams, fd_tol: float = 1e-6) -> list[FixedPoint]:
    """Fixed points of the reduced flow on the unit sphere.

    Family 1 (``m_z = 0``): ``(+-sqrt(1 - (kappa/Omega)^2), kappa/Omega, 0)``,
    physical for ``|Omega| >= kappa``. Family 2 (``m_x = 0``):
    ``(0, Omega/kappa, +-sqrt(1 - (Omega/kappa)^2))``, physical for
    ``|Omega| <= kappa``. The Jacobian is checked against central finite
    differences.
    """
    k, W = rp.kappa, rp.Omega
    r = W / k
    scale = max(abs(W), k)
    candidates = []
    out = []
    if W != 0:
        root = np.sqrt(complex(1 - (k / W) ** 2))
        candidates += [(1, np.array([sgn * root, k / W, 0], dtype=complex)) for sgn in (1, -1)]
    else:
        # family 1 sits at m_y = kappa/Omega and does not exist without drive
        nan = np.full(3, np.nan + 0j)
        out.append(FixedPoint(1, nan, False, nan, "degenerate", False))
    root = np.sqrt(complex(1 - r ** 2))
    candidates += [(2, np.array([0, r, sgn * root], dtype=complex)) for sgn in (1, -1)]

    for family, m in candidates:
        physical = bool(np.all(np.abs(m.imag) < 1e-14)) and abs(np.linalg.norm(m.real) - 1) < 1e-12
        point = m.real if physical else m
        J = reduced_jacobian(point, rp)
        J_fd = finite_difference_jacobian(lambda v: reduced_rhs(v, rp), point)
        if np.abs(J - J_fd).max() > fd_tol * max(scale, 1.0):
            raise ArithmeticError("analytic Jacobian disagrees with finite differences")
        eigs = np.linalg.eigvals(J.astype(complex))
        eigs = eigs[np.lexsort((eigs.imag, eigs.real))]
        cls, stable = _classify(eigs, scale)
        if abs(abs(r) - 1) < 1e-12:
            cls, stable = "degenerate", False
        out.append(FixedPoint(family, m, physical, eigs, cls, stable))
    return out


def fixed_point_report(rp: ReducedParams) -> dict:
    return {"schema": "spinstar.fixed_points/1", "Omega": rp.Omega, "kappa": rp.kappa,
            "ratio": rp.ratio, "fixed_points": [fp.to_dict() for fp in fixed_points(rp)]}


def integrate_meanfield(kind: str, initial, t_grid: Sequence[float], params,
                        rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """Integrate the reduced (``kind="reduced"``, ``params: ReducedParams``) or
    full (``kind="full"``, ``params: SpinStarParams``) mean-field equations.

    ``initial`` is ``m`` for the reduced flow and a :class:`MeanFieldState`
    (or a bare ``m``, starting the central spin in its ground state) for the
    full one.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if kind == "reduced":
        y0 = np.asarray(initial, dtype=float)
        k, W = params.kappa, params.Omega
        rhs = lambda t, y: [k * y[0] * y[2], k * y[1] * y[2] - W * y[2],
                            -k * (y[0] * y[0] + y[1] * y[1]) + W * y[1]]
    elif kind == "full":
        if not isinstance(initial, MeanFieldState):
            initial = MeanFieldState(np.asarray(initial, dtype=float), np.array([0.0, 0.0, -0.5]))
        y0 = initial.as_vector()
        rhs = _full_rhs_vector(params)
    else:
        raise ValueError(f"unknown mean-field kind {kind!r}")
    if np.linalg.norm(y0[:3]) > 1 + 1e-12:
        raise ValueError("initial magnetization must satisfy |m| <= 1")

    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), y0, method="RK45", t_eval=t_grid,
                    rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationError(f"mean-field integration failed: {sol.message}")
    obs = {f"m_{a}": sol.y[i] for i, a in enumerate("xyz")}
    if kind == "full":
        obs.update({f"S_{a}": sol.y[3 + i] for i, a in enumerate("xyz")})
    obs["norm_m"] = np.linalg.norm(sol.y[:3], axis=0)
    meta = {"kind": kind, "method": "RK45", "rtol": rtol, "atol": atol, "nfev": int(sol.nfev)}
    return Trajectory(t_grid, obs, metadata=meta)


def limit_cycle_frequency(traj: Trajectory, observable: str = "m_z") -> float:
    """Dominant angular frequency over the second half of a trajectory."""
    n = len(traj.times)
    half = slice(n // 2, n)
    return dominant_frequency(traj.times[half], traj[observable][half])


def linearized_frequency(rp: ReducedParams) -> float:
    """``sqrt(|Omega^2 - kappa^2|)``, the small-orbit frequency around the center."""
    return float(np.sqrt(abs(rp.Omega ** 2 - rp.kappa ** 2)))

