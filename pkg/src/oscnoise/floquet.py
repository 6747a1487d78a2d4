"""Floquet decomposition of the linearized periodic dynamics.

Builds the monodromy and adjoint monodromy matrices on the steady-state
grid, eigendecomposes them, pairs and biorthonormalizes the mode vectors,
filters the relevant (weakly damped) modes, and produces the periodic mode
series, the lambda series and their harmonics.

Discretization note: the forward propagation uses the exactly differentiated
trapezoidal step,

    [C_{j+1} + h/2 G_{j+1}] u_{j+1} = [C_j - h/2 G_j] u_j,

and the adjoint runs the exact discrete adjoint of that recursion backward
in time (a trapezoidal-class scheme for the adjoint equations in
conservation form).  This makes the forward and adjoint multiplier sets
coincide and conserves the grid biorthogonality v_i^T C u_j exactly, up to
linear-solve roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AliasingError,
    DegenerateSpectrumError,
    FloquetConsistencyError,
    ModeConsistencyError,
    NumericalError,
)
from .models import CircuitModel
from .pss import PssSolution

__all__ = [
    "FloquetSet",
    "integrate_lr",
    "calc_monodromy",
    "eigen_decompose",
    "pair_and_normalize",
    "count_relevant_modes",
    "floquet_time_series",
    "lambda_series",
    "harmonics",
    "floquet_decompose",
]

PAIRING_RTOL = 1e-6
ZERO_MODE_TOL = 1e-6
ENDPOINT_RTOL = 1e-5
RELEVANT_MODE_FACTOR = 10.0
_NULL_MULTIPLIER_RTOL = 1e-12


class _LrGrid:
    """Cached per-step matrices of the linear-response recursion."""

    def __init__(self, model: CircuitModel, pss: PssSolution):
        states = pss.states
        self.m = pss.m
        self.h = pss.period / pss.m
        self.c = model.c_jac(states)  # (M, n, n)
        self.g = model.g_jac(states)
        self.lhs = self.c + 0.5 * self.h * self.g  # at t_{j}
        self.rhs = self.c - 0.5 * self.h * self.g

    def lhs_at(self, j):
        return self.lhs[j % self.m]

    def rhs_at(self, j):
        return self.rhs[j % self.m]


def _propagate_forward(grid: _LrGrid, init_cols: np.ndarray) -> np.ndarray:
    """Propagate columns through one period; returns (M+1, n, ncols)."""
    m = grid.m
    out = np.empty((m + 1,) + init_cols.shape, dtype=np.result_type(init_cols, float))
    out[0] = init_cols
    for j in range(m):
        out[j + 1] = np.linalg.solve(grid.lhs_at(j + 1), grid.rhs_at(j) @ out[j])
    return out


def _propagate_adjoint(grid: _LrGrid, final_cols: np.ndarray) -> np.ndarray:
    """Backward adjoint propagation; ``final_cols`` holds v(T0) columns.

    Works in the conserved coordinates w = C^T v and returns v samples on
    the full grid, shape (M+1, n, ncols).
    """
    m = grid.m
    out = np.empty((m + 1,) + final_cols.shape, dtype=np.result_type(final_cols, float))
    w = grid.c[0].T @ final_cols
    out[m] = final_cols
    for j in range(m - 1, -1, -1):
        w = grid.rhs_at(j).T @ np.linalg.solve(grid.lhs_at(j + 1).T, w)
        out[j] = np.linalg.solve(grid.c[j % m].T, w)
    return out


def integrate_lr(model: CircuitModel, pss: PssSolution, init, adjoint: bool = False) -> np.ndarray:
    """Linear-response trajectory over one period on the steady-state grid.

    Forward mode propagates ``init`` from t = 0; adjoint mode interprets
    ``init`` as the value at t = T0 and integrates backward.  Either way the
    returned array has M+1 rows covering t_0 .. t_M = T0.
    """
    grid = _LrGrid(model, pss)
    cols = np.asarray(init)[:, None]
    if adjoint:
        return _propagate_adjoint(grid, cols)[:, :, 0]
    return _propagate_forward(grid, cols)[:, :, 0]


def calc_monodromy(model: CircuitModel, pss: PssSolution, adjoint: bool = False) -> np.ndarray:
    """Monodromy matrix (forward) or adjoint monodromy (backward) on the grid."""
    grid = _LrGrid(model, pss)
    eye = np.eye(model.n)
    if adjoint:
        return _propagate_adjoint(grid, eye)[0]
    return _propagate_forward(grid, eye)[-1]


def eigen_decompose(mm: np.ndarray, period: float | None = None):
    """Full eigendecomposition, sorted by |multiplier| descending.

    Returns (multipliers, exponents, vectors); vectors are columns.  Zero
    multipliers map to exponents with real part -inf.
    """
    if not np.all(np.isfinite(mm)):
        raise NumericalError("monodromy matrix contains non-finite entries")
    try:
        lam, vec = np.linalg.eig(mm)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("dense eigensolver did not converge") from exc
    lam = lam.astype(complex)
    vec = vec.astype(complex)
    order = np.argsort(-np.abs(lam), kind="stable")
    lam, vec = lam[order], vec[:, order]
    exponents = np.empty(lam.shape, dtype=complex)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    for i, l in enumerate(lam):
        if abs(l) <= _NULL_MULTIPLIER_RTOL * scale:
            exponents[i] = complex(-np.inf, 0.0)
        else:
            exponents[i] = np.log(l) if period is None else np.log(l) / period
    return lam, exponents, vec


def pair_and_normalize(fwd, adj, c0: np.ndarray):
    """Match forward/adjoint eigensets and rescale duals to v^T C0 u = 1.

    ``fwd`` and ``adj`` are (multipliers, vectors) tuples.  Null multipliers
    (singular-C modes) must be dropped by the caller beforehand.  Conjugate
    pairs are kept exactly conjugate.  Returns (multipliers, u0, v0) with
    vectors as columns, ordered by |multiplier| descending.
    """
    lam_f, u = fwd
    lam_a, v = adj
    nmodes = lam_f.shape[0]
    scale = float(np.max(np.abs(lam_f)))
    # collision check within the forward set
    for i in range(nmodes):
        for j in range(i + 1, nmodes):
            if abs(lam_f[i] - lam_f[j]) <= PAIRING_RTOL * scale:
                raise DegenerateSpectrumError(
                    f"multipliers {lam_f[i]:.6g} and {lam_f[j]:.6g} collide within "
                    f"the pairing tolerance; the mode expansion assumes simple spectra"
                )
    # greedy nearest matching of the adjoint set onto the forward order
    used = np.zeros(nmodes, dtype=bool)
    v_paired = np.empty_like(u)
    for i in range(nmodes):
        dist = np.abs(lam_a - lam_f[i])
        dist[used] = np.inf
        jbest = int(np.argmin(dist))
        if dist[jbest] > PAIRING_RTOL * scale:
            raise DegenerateSpectrumError(
                f"no adjoint multiplier matches {lam_f[i]:.6g} within tolerance "
                f"(closest off by {dist[jbest]:.3g})"
            )
        used[jbest] = True
        v_paired[:, i] = v[:, jbest]
    # enforce exact conjugate pairing of vectors
    done = np.zeros(nmodes, dtype=bool)
    for i in range(nmodes):
        if done[i] or abs(lam_f[i].imag) <= PAIRING_RTOL * scale:
            continue
        dist = np.abs(lam_f - np.conj(lam_f[i]))
        dist[done] = np.inf
        dist[i] = np.inf
        j = int(np.argmin(dist))
        if dist[j] > PAIRING_RTOL * scale:
            raise DegenerateSpectrumError(
                f"complex multiplier {lam_f[i]:.6g} lacks a conjugate partner"
            )
        u[:, j] = np.conj(u[:, i])
        v_paired[:, j] = np.conj(v_paired[:, i])
        done[i] = done[j] = True
    # biorthonormalization
    for i in range(nmodes):
        d = v_paired[:, i] @ (c0 @ u[:, i])
        if abs(d) < 1e-12:
            raise DegenerateSpectrumError(
                f"mode {i} is numerically defective (v^T C u = {d:.3g})"
            )
        v_paired[:, i] = v_paired[:, i] / d
    # cross-term sanity for simple spectra
    cross = v_paired.T @ c0 @ u - np.eye(nmodes)
    worst = float(np.max(np.abs(cross)))
    if worst > 1e-8:
        raise DegenerateSpectrumError(
            f"biorthogonality residual {worst:.3g} exceeds 1e-8; spectrum is near-defective"
        )
    return lam_f, u, v_paired


def count_relevant_modes(exponents: np.ndarray, omega0: float, k: int = 1) -> int:
    """Number of modes with |Re mu| <= 10 * omega0; null modes never count."""
    keep = np.isfinite(exponents.real) & (
        np.abs(exponents.real) <= RELEVANT_MODE_FACTOR * omega0
    )
    count = int(np.count_nonzero(keep))
    if count < k:
        raise ModeConsistencyError(
            f"only {count} relevant modes retained but the ensemble has k={k} "
            f"phase modes; steady state and model are inconsistent"
        )
    return count


def floquet_time_series(model, pss, u0, v0, exponents):
    """Periodic mode series by exponentially detrended propagation.

    The raw forward solution of a mode grows as exp(mu t); dividing it out
    leaves the periodic factor.  The adjoint series is detrended by
    exp(-mu (T0 - t)) analogously.  Returns (u_series, v_series) of shape
    (L, M, n) holding grid samples t_0 .. t_{M-1}; the wrap samples at T0
    are checked against t_0 and discarded.
    """
    grid = _LrGrid(model, pss)
    t_full = np.arange(pss.m + 1) * grid.h
    raw_u = _propagate_forward(grid, np.asarray(u0, dtype=complex))
    raw_v = _propagate_adjoint(grid, np.asarray(v0, dtype=complex))
    nmodes = u0.shape[1]
    u_series = np.empty((nmodes, pss.m, model.n), dtype=complex)
    v_series = np.empty_like(u_series)
    for i in range(nmodes):
        mu = exponents[i]
        u_i = raw_u[:, :, i] * np.exp(-mu * t_full)[:, None]
        v_i = raw_v[:, :, i] * np.exp(-mu * (pss.period - t_full))[:, None]
        for tag, series in (("u", u_i), ("v", v_i)):
            ref = float(np.linalg.norm(series[0]))
            gap = float(np.linalg.norm(series[-1] - series[0]))
            if gap > ENDPOINT_RTOL * ref:
                raise FloquetConsistencyError(
                    f"{tag}-series of mode {i} is not periodic "
                    f"(endpoint mismatch {gap / ref:.3g}); bad eigenpair or grid too coarse"
                )
        u_series[i] = u_i[:-1]
        v_series[i] = v_i[:-1]
    return u_series, v_series


def lambda_series(v_series: np.ndarray, pss: PssSolution, model: CircuitModel) -> np.ndarray:
    """Noise projections lambda_i(t_j) = v_i(t_j)^T B(x_s(t_j)), shape (L, M, p)."""
    b = model.b_fn(pss.states)  # (M, n, p)
    return np.einsum("imn,mnp->imp", v_series, b)


def harmonics(series: np.ndarray, nf: int) -> np.ndarray:
    """Per-mode Fourier coefficients for m in [-nf, nf], shape (L, 2*nf+1, dim)."""
    m = series.shape[1]
    if m < 4 * nf:
        raise AliasingError(f"grid size {m} < 4*nf = {4 * nf}: raise m or lower nf")
    coeff = np.fft.fft(series, axis=1) / m
    idx = [(v % m) for v in range(-nf, nf + 1)]
    return coeff[:, idx]


@dataclass(frozen=True)
class FloquetSet:
    """Retained Floquet modes of a solved oscillator.

    Mode 0 is the zero mode (exponent snapped to exactly 0, vector scaled to
    the steady-state velocity); the rest are ordered by damping.  Harmonic
    arrays are indexed m+nf for harmonic m.
    """

    exponents: np.ndarray      # (L,)
    u_series: np.ndarray       # (L, M, n)
    v_series: np.ndarray       # (L, M, n)
    lam_series: np.ndarray     # (L, M, p)
    u_harm: np.ndarray         # (L, 2*nf+1, n)
    lam_harm: np.ndarray       # (L, 2*nf+1, p)
    nf: int
    period: float
    omega0: float
    multipliers: np.ndarray    # all n multipliers, for diagnostics

    @property
    def L(self) -> int:
        return self.exponents.shape[0]

    @property
    def n(self) -> int:
        return self.u_series.shape[2]

    def u_h(self, i: int, m: int) -> np.ndarray:
        """Harmonic m of mode i (0-based); zero outside the truncation."""
        if abs(m) > self.nf:
            return np.zeros(self.n, dtype=complex)
        return self.u_harm[i, m + self.nf]

    def lam_h(self, i: int, m: int) -> np.ndarray:
        if abs(m) > self.nf:
            return np.zeros(self.lam_harm.shape[2], dtype=complex)
        return self.lam_harm[i, m + self.nf]


def floquet_decompose(
    model: CircuitModel, pss: PssSolution, k: int = 1, nf: int = 32
) -> FloquetSet:
    """Full mode extraction: monodromies, pairing, filtering, series, spectra.

    Validates the zero mode (|mu_1| * T0 <= 1e-6 before snapping it to 0)
    and rescales it so u_1(0) equals the steady-state velocity exactly,
    which fixes the diffusion constant's units to seconds.
    """
    mm_f = calc_monodromy(model, pss, adjoint=False)
    mm_a = calc_monodromy(model, pss, adjoint=True)
    lam_f, _, u_all = eigen_decompose(mm_f)
    lam_a, _, v_all = eigen_decompose(mm_a)

    scale = float(np.max(np.abs(lam_f)))
    keep_f = np.abs(lam_f) > _NULL_MULTIPLIER_RTOL * scale
    keep_a = np.abs(lam_a) > _NULL_MULTIPLIER_RTOL * scale
    lam, u0, v0 = pair_and_normalize(
        (lam_f[keep_f], u_all[:, keep_f]), (lam_a[keep_a], v_all[:, keep_a]), model.c_jac(pss.states[0])
    )

    # zero mode: validate, snap, rescale to the steady-state velocity
    i1 = int(np.argmin(np.abs(lam - 1.0)))
    mu1 = np.log(lam[i1]) / pss.period
    if abs(mu1) * pss.period > ZERO_MODE_TOL:
        raise ModeConsistencyError(
            f"no zero mode: closest exponent has |mu|*T0 = {abs(mu1) * pss.period:.3g}"
        )
    if i1 != 0:
        order = [i1] + [i for i in range(lam.shape[0]) if i != i1]
        lam, u0, v0 = lam[order], u0[:, order], v0[:, order]
    # Scale the zero mode onto the steady-state velocity (keeping the exact
    # eigen-direction) so the diffusion constant carries units of seconds.
    xdot0 = model.velocity(pss.states[0])
    c0 = model.c_jac(pss.states[0])
    e1 = u0[:, 0]
    beta = (np.conj(e1) @ xdot0) / (np.conj(e1) @ e1)
    u0[:, 0] = e1 * beta
    v0[:, 0] = v0[:, 0] / (v0[:, 0] @ (c0 @ u0[:, 0]))

    exponents = np.log(lam) / pss.period
    exponents[0] = 0.0
    L = count_relevant_modes(exponents, pss.omega0, k)
    lam_r, mu_r, u0_r, v0_r = lam[:L], exponents[:L], u0[:, :L], v0[:, :L]

    u_series, v_series = floquet_time_series(model, pss, u0_r, v0_r, mu_r)
    lam_ser = lambda_series(v_series, pss, model)
    return FloquetSet(
        exponents=mu_r,
        u_series=u_series,
        v_series=v_series,
        lam_series=lam_ser,
        u_harm=harmonics(u_series, nf),
        lam_harm=harmonics(lam_ser, nf),
        nf=nf,
        period=pss.period,
        omega0=pss.omega0,
        multipliers=lam_f,
    )
