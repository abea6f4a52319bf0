"""Ground-truth tools: numerical integration and independent costate solvers.

Everything here deliberately avoids the basis/operator machinery so it can
serve as a cross-check on it: trajectories come from adaptive Runge-Kutta
on the polynomial right-hand side, the linear-model costates from a matrix
exponential in closed form, and the nonlinear costates from damped-Newton
shooting with finite-difference sensitivities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .ocp import AugmentedSystem
from .polynomial import PolyMap

try:
    _trapezoid = np.trapezoid
except AttributeError:  # numpy < 2
    _trapezoid = np.trapz


class OracleError(RuntimeError):
    """Raised when an oracle fails to produce a trustworthy answer."""


@dataclass
class Trajectory:
    """Sampled solution: times (T,) and states (T, d) with column names."""

    times: np.ndarray
    states: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] != self.times.shape[0]:
            raise ValueError("states must be (T, d) matching times")
        if not self.names:
            self.names = tuple(f"x{i}" for i in range(self.states.shape[1]))
        elif len(self.names) != self.states.shape[1]:
            raise ValueError("one name per state column required")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Write `t,<names...>` rows with 17 significant digits per value."""
        with open(path, "w") as fh:
            fh.write("t," + ",".join(self.names) + "\n")
            for t, row in zip(self.times, self.states):
                fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header[0] != "t":
                raise ValueError("first CSV column must be t")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1:], tuple(header[1:]))


def integrate(system: PolyMap, x0: Sequence[float],
              t_span: float | tuple[float, float],
              rtol: float = 1e-10, atol: float = 1e-12,
              t_eval: Sequence[float] | None = None,
              names: Sequence[str] = ()) -> Trajectory:
    """Integrate xd = system(x) with adaptive Runge-Kutta 4(5).

    ``t_span`` is either a final time (integration starts at 0) or an
    explicit (t0, tf) pair.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.num_vars_in,):
        raise ValueError(
            f"initial state must have {system.num_vars_in} components")
    if system.num_outputs != system.num_vars_in:
        raise ValueError("system must be square to integrate")
    if np.ndim(t_span) == 0:
        span = (0.0, float(t_span))
    else:
        span = (float(t_span[0]), float(t_span[1]))
    rhs_core = system.compiled()
    sol = solve_ivp(lambda t, x: rhs_core(x), span, x0,
                    method="RK45", rtol=rtol, atol=atol, t_eval=t_eval)
    if not sol.success:
        raise OracleError(f"integration failed: {sol.message}")
    return Trajectory(sol.t, sol.y.T, tuple(names))


def stm_costate_oracle(system: AugmentedSystem | np.ndarray,
                       x0: Sequence[float], xf: Sequence[float],
                       tf: float) -> tuple[np.ndarray, np.ndarray]:
    """Initial costates of the linear(ized) two-point problem, closed form.

    Propagates the state-transition matrix Phi = expm(A tf) of the linear
    part of the augmented dynamics and solves

        lam_0 = Phi_12^{-1} (x_f - Phi_11 x_0).

    Returns (lam_0, Phi).  Exact for linear dynamics; for nonlinear systems
    this is the linear-model answer, useful as a seed and a yardstick.
    """
    if isinstance(system, AugmentedSystem):
        A = system.linear_matrix()
    else:
        A = np.asarray(system, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or d % 2:
        raise ValueError("augmented matrix must be square with even dimension")
    m = d // 2
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    if x0.shape != (m,) or xf.shape != (m,):
        raise ValueError(f"boundary states must have {m} components")
    Phi = expm(A * float(tf))
    P11 = Phi[:m, :m]
    P12 = Phi[:m, m:]
    cond = np.linalg.cond(P12)
    if not np.isfinite(cond) or cond > 1e14:
        raise OracleError(
            f"transfer block is numerically singular (cond {cond:.3e}); "
            "the boundary problem is ill posed at this horizon")
    lam0 = np.linalg.solve(P12, xf - P11 @ x0)
    return lam0, Phi


def shooting_oracle(system: AugmentedSystem, x0: Sequence[float],
                    xf: Sequence[float], tf: float,
                    lam0_guess: Sequence[float] | None = None,
                    tol: float = 1e-9, max_iter: int = 50,
                    rtol: float = 1e-10, fd_step: float = 1e-6
                    ) -> tuple[np.ndarray, dict]:
    """Damped-Newton shooting for the nonlinear two-point problem.

    Unknowns are the initial costates; the residual is the terminal state
    miss.  The Jacobian comes from central finite differences, and each
    Newton step is halved (up to 20 times) until the residual decreases.
    Convergence is declared when the residual norm divided by
    max(1, |x0|_inf, |xf|_inf) drops below ``tol``.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    m = system.n_states
    if x0.shape != (m,) or xf.shape != (m,):
        raise ValueError(f"boundary states must have {m} components")
    if lam0_guess is None:
        lam = stm_costate_oracle(system, x0, xf, tf)[0]
    else:
        lam = np.asarray(lam0_guess, dtype=float).copy()
    scale = max(1.0, np.max(np.abs(x0)), np.max(np.abs(xf)))

    def residual(lam0: np.ndarray) -> np.ndarray:
        z0 = np.concatenate([x0, lam0])
        traj = integrate(system.dynamics, z0, tf, rtol=rtol, atol=rtol * 1e-2)
        return traj.final_state[:m] - xf

    r = residual(lam)
    history = [float(np.linalg.norm(r))]
    converged = history[-1] / scale <= tol
    iterations = 0
    while not converged and iterations < max_iter:
        iterations += 1
        J = np.empty((m, m))
        for j in range(m):
            h = fd_step * max(abs(lam[j]), 1e-6)
            bump = np.zeros(m)
            bump[j] = h
            J[:, j] = (residual(lam + bump) - residual(lam - bump)) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise OracleError(f"singular shooting Jacobian: {exc}") from exc
        alpha = 1.0
        for _ in range(20):
            trial = lam + alpha * step
            r_trial = residual(trial)
            if np.linalg.norm(r_trial) < np.linalg.norm(r):
                break
            alpha *= 0.5
        else:
            raise OracleError(
                "shooting line search stalled after 20 halvings "
                f"(residual {history[-1]:.3e})")
        lam = trial
        r = r_trial
        history.append(float(np.linalg.norm(r)))
        converged = history[-1] / scale <= tol
    if not converged:
        raise OracleError(
            f"shooting did not converge in {max_iter} iterations "
            f"(residual {history[-1]:.3e}, scale {scale:.3e})")
    info = {"iterations": iterations, "residuals": history,
            "residual": history[-1], "scale": scale, "converged": True}
    return lam, info


def control_effort(traj: Trajectory, tf: float) -> np.ndarray:
    """Per-costate effort (1/tf) * sqrt(integral of lam_i^2 dt).

    ``traj`` must hold an augmented trajectory spanning [0, tf]; the metric
    is computed for every costate column (the second half of the layout)
    with trapezoid quadrature on the sampled grid.
    """
    d = traj.states.shape[1]
    if d % 2:
        raise ValueError("augmented trajectory needs an even column count")
    tf = float(tf)
    if tf <= 0:
        raise ValueError("tf must be positive")
    t = traj.times
    if abs(t[0]) > 1e-9 * tf or abs(t[-1] - tf) > 1e-9 * max(tf, 1.0):
        raise ValueError(
            f"trajectory spans [{t[0]:g}, {t[-1]:g}], not [0, {tf:g}]")
    lam = traj.states[:, d // 2:]
    return np.array([
        math.sqrt(_trapezoid(lam[:, i] ** 2, t)) / tf
        for i in range(lam.shape[1])])


def terminal_error(traj: Trajectory, xf: Sequence[float]) -> dict[str, float]:
    """Terminal state miss, absolute and relative to the initial separation.

    ``xf`` may cover a prefix of the trajectory columns (the state part of
    an augmented layout); only those columns enter the norms.
    """
    xf = np.asarray(xf, dtype=float)
    m = xf.shape[0]
    if xf.ndim != 1 or m > traj.states.shape[1]:
        raise ValueError("target does not fit the trajectory layout")
    err = float(np.linalg.norm(traj.final_state[:m] - xf))
    sep = float(np.linalg.norm(traj.states[0, :m] - xf))
    return {"absolute": err, "relative": err / sep if sep > 0 else math.inf}
