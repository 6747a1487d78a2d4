"""Periodic steady state by shooting-Newton over a fixed trapezoidal grid.

The transient integrator is a fixed-step trapezoidal rule; the identical
scheme (in exactly differentiated form) is reused for all linear-response
and adjoint integrations so that the monodromy matrix is the exact Jacobian
of the discrete period map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AliasingError,
    DegenerateSolutionError,
    NoConvergenceError,
    RankDeficiencyError,
)
from .models import CircuitModel

__all__ = ["PssSolution", "integrate_transient", "transient_settle", "solve_pss", "pss_harmonics"]

_NEWTON_RTOL = 1e-13
_NEWTON_MAXIT = 30


@dataclass(frozen=True)
class PssSolution:
    """Periodic steady state sampled on a uniform grid.

    Attributes:
        period: oscillation period (s)
        omega0: angular frequency 2*pi/period (rad/s)
        grid: (M,) sample times in [0, period)
        states: (M, n) sampled limit-cycle trajectory
        harmonics: (2*nf+1, n) Fourier coefficients, row m+nf holds harmonic m
        nf: harmonic truncation of the stored coefficients
        defect: relative periodicity defect of the converged solve
    """

    period: float
    omega0: float
    grid: np.ndarray
    states: np.ndarray
    harmonics: np.ndarray
    nf: int
    defect: float

    @property
    def m(self) -> int:
        return self.grid.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def harmonic(self, m: int) -> np.ndarray:
        """Harmonic vector X_m; zero outside the stored truncation."""
        if abs(m) > self.nf:
            return np.zeros(self.n, dtype=complex)
        return self.harmonics[m + self.nf]


def _step(model, x, t, h, s_now, s_next):
    """One trapezoidal step of d/dt q(x) + i(x) + s(t) = 0.

    Chord Newton with the Jacobian frozen (and inverted once) at the left
    point; the iteration still drives the full implicit residual to the
    machine-level tolerance, so the accepted state is scheme-exact.
    """
    qx = model.q_fn(x)
    ix = model.i_fn(x)
    rhs_const = -qx + 0.5 * h * (ix + s_now + s_next)
    try:
        inv = np.linalg.inv(model.c_jac(x) + 0.5 * h * model.g_jac(x))
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(
            f"singular step Jacobian at t={t:.6g}", step_index=None
        ) from exc
    y = x - inv @ (h * ix + 0.5 * h * (s_now + s_next))
    scale = 1.0 + float(np.max(np.abs(x)))
    for _ in range(_NEWTON_MAXIT):
        res = model.q_fn(y) + 0.5 * h * model.i_fn(y) + rhs_const
        dy = -(inv @ res)
        y = y + dy
        if np.max(np.abs(dy)) <= _NEWTON_RTOL * scale:
            return y
    raise NoConvergenceError(
        f"step Newton stalled at t={t:.6g}", defect=float(np.max(np.abs(dy)))
    )


def integrate_transient(model: CircuitModel, x0, t0: float, h: float, steps: int) -> np.ndarray:
    """Integrate the deterministic model; returns (steps+1, n) samples."""
    x0 = np.asarray(x0, dtype=float)
    out = np.empty((steps + 1, model.n))
    out[0] = x0
    s_now = model.s_fn(t0)
    for j in range(steps):
        t = t0 + j * h
        s_next = model.s_fn(t + h)
        try:
            out[j + 1] = _step(model, out[j], t, h, s_now, s_next)
        except RankDeficiencyError as exc:
            raise RankDeficiencyError(str(exc), step_index=j) from exc
        s_now = s_next
    return out


def transient_settle(model: CircuitModel, x0, duration: float, steps_per_unit: int = 64) -> np.ndarray:
    """Coarse transient run used to relax into the basin of a limit cycle."""
    steps = max(int(round(duration * steps_per_unit)), 1)
    return integrate_transient(model, x0, 0.0, duration / steps, steps)[-1]


def _anchor_velocity(model, x0, component):
    c = model.c_jac(x0)
    rhs = -(model.i_fn(x0) + model.s_fn(0.0))
    return float(np.linalg.solve(c, rhs)[component])


def solve_pss(
    model: CircuitModel,
    guess: dict,
    m: int = 1024,
    tol: float = 1e-9,
    max_iter: int = 50,
    nf: int = 32,
    anchor_component: int = 0,
) -> PssSolution:
    """Shooting-Newton solve of the autonomous periodic steady state.

    ``guess`` must provide ``x0`` and ``t0_guess``.  The time-shift null
    direction of the shooting Jacobian is removed by pinning the anchor
    component's time derivative to zero at t = 0.

    The unknown is (x0, T0); the residual stacks the periodicity defect with
    the scaled anchor equation.  The shooting Jacobian combines the exact
    discrete state-transition matrix with finite differences for the period
    column and the anchor row.
    """
    if m < 4 or (m & (m - 1)) != 0:
        raise AliasingError(f"grid size m={m} must be a power of two >= 4")
    x0 = np.asarray(guess["x0"], dtype=float).copy()
    t_per = float(guess["t0_guess"])
    if x0.shape != (model.n,):
        raise NoConvergenceError(f"guess x0 has shape {x0.shape}, expected ({model.n},)")
    if t_per <= 0:
        raise DegenerateSolutionError("period guess must be positive")
    t_ref = t_per
    n = model.n
    tau = t_ref / (2.0 * np.pi)  # anchor scale: velocity units -> state units

    def residual(x0_, t_):
        traj = integrate_transient(model, x0_, 0.0, t_ / m, m)
        r = np.empty(n + 1)
        r[:n] = traj[-1] - x0_
        r[n] = _anchor_velocity(model, x0_, anchor_component) * tau
        return r, traj

    res, traj = residual(x0, t_per)
    for iteration in range(max_iter):
        amp = max(1.0, float(np.max(np.abs(traj))))
        if np.max(np.abs(res)) <= tol * amp:
            break
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = _discrete_stm(model, traj, t_per / m) - np.eye(n)
        # period column by finite differences
        dt = 1e-7 * t_per
        res_t, _ = residual(x0, t_per + dt)
        jac[:, n] = (res_t - res) / dt
        # anchor row by finite differences (no integration needed)
        base = res[n]
        for j in range(n):
            dx = 1e-7 * (1.0 + abs(x0[j]))
            xp = x0.copy()
            xp[j] += dx
            jac[n, j] = (_anchor_velocity(model, xp, anchor_component) * tau - base) / dx
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise DegenerateSolutionError(
                "singular shooting Jacobian (degenerate or non-isolated orbit)"
            ) from exc
        # damped update with step halving
        norm0 = float(np.linalg.norm(res))
        lam = 1.0
        for _ in range(8):
            x_try = x0 + lam * step[:n]
            t_try = t_per + lam * step[n]
            if t_try <= 0.05 * t_ref or t_try >= 20.0 * t_ref:
                raise DegenerateSolutionError(
                    f"period collapsed or ran away during Newton (T={t_try:.3g})"
                )
            res_try, traj_try = residual(x_try, t_try)
            if np.linalg.norm(res_try) < norm0 * (1.0 - 1e-4 * lam) or lam < 0.02:
                x0, t_per, res, traj = x_try, t_try, res_try, traj_try
                break
            lam *= 0.5
    else:
        raise NoConvergenceError(
            f"shooting Newton did not converge in {max_iter} iterations",
            defect=float(np.max(np.abs(res[:n]))),
        )

    states = traj[:m]
    amp = max(1.0, float(np.max(np.abs(states))))
    defect = float(np.max(np.abs(traj[-1] - traj[0]))) / float(np.max(np.abs(states)))
    nf_store = min(nf, m // 4)
    grid = np.arange(m) * (t_per / m)
    harm = _fft_harmonics(states, nf_store)
    return PssSolution(
        period=t_per,
        omega0=2.0 * np.pi / t_per,
        grid=grid,
        states=states,
        harmonics=harm,
        nf=nf_store,
        defect=defect,
    )


def _discrete_stm(model, traj, h):
    """Exact Jacobian of the discrete trapezoidal flow along a trajectory."""
    m = traj.shape[0] - 1
    phi = np.eye(model.n)
    c_prev, g_prev = model.c_jac(traj[0]), model.g_jac(traj[0])
    for j in range(m):
        c_next, g_next = model.c_jac(traj[j + 1]), model.g_jac(traj[j + 1])
        lhs = c_next + 0.5 * h * g_next
        rhs = (c_prev - 0.5 * h * g_prev) @ phi
        phi = np.linalg.solve(lhs, rhs)
        c_prev, g_prev = c_next, g_next
    return phi


def _fft_harmonics(samples, nf):
    m = samples.shape[0]
    coeff = np.fft.fft(samples, axis=0) / m
    idx = [(v % m) for v in range(-nf, nf + 1)]
    return coeff[idx]


def pss_harmonics(pss: PssSolution, nf: int) -> np.ndarray:
    """Fourier coefficients X_m of the sampled trajectory for m in [-nf, nf].

    Convention: X_m = (1/M) sum_j x(t_j) exp(-i 2 pi m j / M); row m+nf of
    the returned array holds harmonic m.
    """
    if pss.m < 4 * nf:
        raise AliasingError(f"grid size {pss.m} < 4*nf = {4 * nf}: raise m or lower nf")
    return _fft_harmonics(pss.states, nf)
