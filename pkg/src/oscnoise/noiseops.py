"""Phase-diffusion constant and node-normalized noise operators.

All operators are harmonic double sums over the retained Floquet modes.
Only the observation node's diagonal element is ever needed, so the fast
path accumulates scalars; dense n-by-n builders (*_matrix) evaluate the
same sums by outer products and exist as an independent reference path for
validation.

Index conventions follow the closed-form spectra: mode numbers in the
formulas are 1-based with mode 1 the zero mode; arrays here are 0-based, so
"mode l+1" reads ``exponents[l]``.  Harmonic indices outside [-nf, nf]
contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DeadNodeError, InternalConsistencyError, ResonantDenominatorError
from .floquet import FloquetSet
from .pss import PssSolution

__all__ = [
    "NoiseOperators",
    "phase_diffusion",
    "normalize_diag",
    "omega_scalar",
    "theta_scalar",
    "pi_scalar",
    "psi_scalar",
    "xi_scalar",
    "omega_matrix",
    "theta_matrix",
    "pi_matrix",
    "psi_matrix",
    "xi_matrix",
    "build_operators",
]

DENOMINATOR_GUARD = 1e-12
DEAD_NODE_POWER = 1e-30


@dataclass(frozen=True)
class NoiseOperators:
    """Per-(node, harmonic) operator set reused across the whole sweep.

    theta/pi/xi rows are indexed l-1 for tensor index l; columns are
    rho + nf for rho in [-nf, nf].  ``exponents`` are the retained mode
    exponents needed by the spectrum kernels.
    """

    c: float
    nu: int
    node: str
    q: int
    carrier_power: float
    ab: complex                 # a + jb
    tu: complex                 # t + ju
    theta: np.ndarray           # (k-1, 2*nf+1) complex
    pi: np.ndarray              # (L-k, 2*nf+1) complex
    xi: np.ndarray              # (L-1, 2*nf+1) complex
    exponents: np.ndarray       # (L,)
    omega0: float
    nf: int

    @property
    def k(self) -> int:
        return self.theta.shape[0] + 1

    @property
    def L(self) -> int:
        return self.exponents.shape[0]


def phase_diffusion(lam1_harm: np.ndarray) -> float:
    """Diffusion constant c = sum_m ||Lambda_{1,m}||^2.

    By Parseval this equals the period average of ||lambda_1(t)||^2, the
    variance growth rate of the zero-mode phase increment.
    """
    c = float(np.sum(np.abs(lam1_harm) ** 2))
    if not np.isfinite(c) or c < 0.0:
        raise InternalConsistencyError(f"diffusion constant came out as {c!r}")
    return c


def normalize_diag(value: complex, q: int, x_harm: np.ndarray, nu: int, nf: int) -> complex:
    """Divide a diagonal operator element by the node's harmonic power.

    ``x_harm`` holds the steady-state harmonics indexed m+nf.
    """
    if abs(nu) > nf:
        raise DeadNodeError(f"harmonic {nu} outside the stored truncation {nf}")
    power = abs(x_harm[nu + nf, q]) ** 2
    if power < DEAD_NODE_POWER:
        raise DeadNodeError(
            f"node index {q} carries no power at harmonic {nu}; spectrum undefined there"
        )
    return value / power


def _guard(den: complex, omega0: float, mode: int, harm: int) -> complex:
    if abs(den) < DENOMINATOR_GUARD * omega0:
        raise ResonantDenominatorError(
            f"vanishing denominator for mode {mode}, harmonic {harm}: "
            f"degenerate mode configuration", mode=mode, harmonic=harm,
        )
    return den


def _lam_pair(fset: FloquetSet, i: int, a: int, j: int, b: int) -> complex:
    """Inner product Lambda_{i,a}^T conj(Lambda_{j,b}) with clamped harmonics."""
    nf = fset.nf
    if abs(a) > nf or abs(b) > nf:
        return 0.0 + 0.0j
    return complex(np.dot(fset.lam_harm[i, a + nf], np.conj(fset.lam_harm[j, b + nf])))


# ----------------------------------------------------------------------------
# fast path: observation-node diagonal elements
# ----------------------------------------------------------------------------


def omega_scalar(q: int, nu: int, fset: FloquetSet, pss: PssSolution, k: int) -> complex:
    """Normalized (q, q) element of the phase operator matrix; a+jb.

    Empty for k = 1 (the single-oscillator reduction has no correction).
    """
    w0 = fset.omega0
    val = 0.0 + 0.0j
    for m in range(1, k):
        mu_c = np.conj(fset.exponents[m])
        um_q = np.conj(fset.u_harm[m, :, q])
        for idx, p in enumerate(range(-fset.nf, fset.nf + 1)):
            s = _lam_pair(fset, 0, 0, m, nu - p)
            if s == 0.0:
                continue
            den = _guard(1j * w0 * (p - nu) - mu_c, w0, m + 1, p)
            val += fset.u_h(0, nu)[q] * s * um_q[idx] / den
    return normalize_diag(val, q, pss.harmonics, nu, pss.nf)


def theta_scalar(l: int, rho: int, q: int, nu: int, fset: FloquetSet, pss: PssSolution, k: int) -> complex:
    """Normalized (q, q) element of the phase tensor at (l, rho); Upsilon+jDelta."""
    if not 1 <= l <= k - 1:
        raise ValueError(f"theta index l={l} outside [1, {k - 1}]")
    w0 = fset.omega0
    mu_l = np.conj(fset.exponents[l])
    ul_q = np.conj(fset.u_h(l, nu)[q])
    den = _guard(1j * w0 * (nu - rho) - mu_l - 0.0, w0, l + 1, rho)
    val = fset.u_h(0, rho)[q] * _lam_pair(fset, 0, 0, l, rho - nu) * ul_q / den
    for i in range(1, k):
        mu_i = fset.exponents[i]
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, i, rho - p, l, rho - nu)
            if s == 0.0:
                continue
            den = _guard(1j * w0 * (nu - p) - mu_l - mu_i, w0, i + 1, p)
            val += fset.u_h(i, p)[q] * s * ul_q / den
    return normalize_diag(val, q, pss.harmonics, nu, pss.nf)


def pi_scalar(l: int, rho: int, q: int, nu: int, fset: FloquetSet, pss: PssSolution, k: int) -> complex:
    """Normalized (q, q) element of the amplitude tensor at (l, rho); W+jT."""
    L = fset.L
    if not 1 <= l <= L - k:
        raise ValueError(f"pi index l={l} outside [1, {L - k}]")
    w0 = fset.omega0
    la = l + k - 1  # array index of mode l+k
    mu_l = np.conj(fset.exponents[la])
    ul_q = np.conj(fset.u_h(la, nu)[q])
    val = 0.0 + 0.0j
    for i in range(k, L):
        mu_i = fset.exponents[i]
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, i, rho - p, la, rho - nu)
            if s == 0.0:
                continue
            den = _guard(1j * w0 * (nu - p) - mu_l - mu_i, w0, i + 1, p)
            val += fset.u_h(i, p)[q] * s * ul_q / den
    return normalize_diag(val, q, pss.harmonics, nu, pss.nf)


def psi_scalar(q: int, nu: int, fset: FloquetSet, pss: PssSolution, k: int) -> complex:
    """Normalized (q, q) element of the cross operator matrix; t+ju.

    Same structure as the phase operator but summed over amplitude modes.
    """
    w0 = fset.omega0
    val = 0.0 + 0.0j
    for m in range(k, fset.L):
        mu_c = np.conj(fset.exponents[m])
        um_q = np.conj(fset.u_harm[m, :, q])
        for idx, p in enumerate(range(-fset.nf, fset.nf + 1)):
            s = _lam_pair(fset, 0, 0, m, nu - p)
            if s == 0.0:
                continue
            den = _guard(1j * w0 * (p - nu) - mu_c, w0, m + 1, p)
            val += fset.u_h(0, nu)[q] * s * um_q[idx] / den
    return normalize_diag(val, q, pss.harmonics, nu, pss.nf)


def xi_scalar(l: int, rho: int, q: int, nu: int, fset: FloquetSet, pss: PssSolution, k: int) -> complex:
    """Normalized (q, q) element of the cross tensor at (l, rho); E+jZ.

    Two-branch definition: amplitude-mode sum for l <= k-1, zero-mode term
    plus phase-mode sum for l > k-1.
    """
    L = fset.L
    if not 1 <= l <= L - 1:
        raise ValueError(f"xi index l={l} outside [1, {L - 1}]")
    w0 = fset.omega0
    mu_l = np.conj(fset.exponents[l])
    ul_q = np.conj(fset.u_h(l, nu)[q])
    val = 0.0 + 0.0j
    if l <= k - 1:
        mode_range = range(k, L)
    else:
        den = _guard(1j * w0 * (nu - rho) - mu_l - 0.0, w0, l + 1, rho)
        val += fset.u_h(0, rho)[q] * _lam_pair(fset, 0, 0, l, rho - nu) * ul_q / den
        mode_range = range(1, k)
    for i in mode_range:
        mu_i = fset.exponents[i]
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, i, rho - p, l, rho - nu)
            if s == 0.0:
                continue
            den = _guard(1j * w0 * (nu - p) - mu_l - mu_i, w0, i + 1, p)
            val += fset.u_h(i, p)[q] * s * ul_q / den
    return normalize_diag(val, q, pss.harmonics, nu, pss.nf)


# ----------------------------------------------------------------------------
# dense reference path (unnormalized n-by-n matrices)
# ----------------------------------------------------------------------------


def omega_matrix(nu: int, fset: FloquetSet, k: int) -> np.ndarray:
    n = fset.n
    out = np.zeros((n, n), dtype=complex)
    w0 = fset.omega0
    for m in range(1, k):
        mu_c = np.conj(fset.exponents[m])
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, 0, 0, m, nu - p)
            den = _guard(1j * w0 * (p - nu) - mu_c, w0, m + 1, p)
            out += np.outer(fset.u_h(0, nu), np.conj(fset.u_h(m, p))) * (s / den)
    return out


def theta_matrix(l: int, rho: int, nu: int, fset: FloquetSet, k: int) -> np.ndarray:
    w0 = fset.omega0
    ul_row = np.conj(fset.u_h(l, nu))
    den = _guard(1j * w0 * (nu - rho) - np.conj(fset.exponents[l]), w0, l + 1, rho)
    out = np.outer(fset.u_h(0, rho), ul_row) * (_lam_pair(fset, 0, 0, l, rho - nu) / den)
    for i in range(1, k):
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, i, rho - p, l, rho - nu)
            den = _guard(
                1j * w0 * (nu - p) - np.conj(fset.exponents[l]) - fset.exponents[i],
                w0, i + 1, p,
            )
            out += np.outer(fset.u_h(i, p), ul_row) * (s / den)
    return out


def pi_matrix(l: int, rho: int, nu: int, fset: FloquetSet, k: int) -> np.ndarray:
    w0 = fset.omega0
    la = l + k - 1
    ul_row = np.conj(fset.u_h(la, nu))
    out = np.zeros((fset.n, fset.n), dtype=complex)
    for i in range(k, fset.L):
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, i, rho - p, la, rho - nu)
            den = _guard(
                1j * w0 * (nu - p) - np.conj(fset.exponents[la]) - fset.exponents[i],
                w0, i + 1, p,
            )
            out += np.outer(fset.u_h(i, p), ul_row) * (s / den)
    return out


def psi_matrix(nu: int, fset: FloquetSet, k: int) -> np.ndarray:
    n = fset.n
    out = np.zeros((n, n), dtype=complex)
    w0 = fset.omega0
    for m in range(k, fset.L):
        mu_c = np.conj(fset.exponents[m])
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, 0, 0, m, nu - p)
            den = _guard(1j * w0 * (p - nu) - mu_c, w0, m + 1, p)
            out += np.outer(fset.u_h(0, nu), np.conj(fset.u_h(m, p))) * (s / den)
    return out


def xi_matrix(l: int, rho: int, nu: int, fset: FloquetSet, k: int) -> np.ndarray:
    w0 = fset.omega0
    ul_row = np.conj(fset.u_h(l, nu))
    out = np.zeros((fset.n, fset.n), dtype=complex)
    if l <= k - 1:
        mode_range = range(k, fset.L)
    else:
        den = _guard(1j * w0 * (nu - rho) - np.conj(fset.exponents[l]), w0, l + 1, rho)
        out += np.outer(fset.u_h(0, rho), ul_row) * (_lam_pair(fset, 0, 0, l, rho - nu) / den)
        mode_range = range(1, k)
    for i in mode_range:
        for p in range(-fset.nf, fset.nf + 1):
            s = _lam_pair(fset, i, rho - p, l, rho - nu)
            den = _guard(
                1j * w0 * (nu - p) - np.conj(fset.exponents[l]) - fset.exponents[i],
                w0, i + 1, p,
            )
            out += np.outer(fset.u_h(i, p), ul_row) * (s / den)
    return out


# ----------------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------------


def build_operators(
    fset: FloquetSet, pss: PssSolution, node: str, q: int, nu: int, k: int
) -> NoiseOperators:
    """Assemble every operator a sweep needs for one (node, harmonic) pair."""
    L = fset.L
    nf = fset.nf
    rhos = range(-nf, nf + 1)
    theta = np.zeros((k - 1, 2 * nf + 1), dtype=complex)
    pi = np.zeros((L - k, 2 * nf + 1), dtype=complex)
    xi = np.zeros((L - 1, 2 * nf + 1), dtype=complex)
    for ridx, rho in enumerate(rhos):
        for l in range(1, k):
            theta[l - 1, ridx] = theta_scalar(l, rho, q, nu, fset, pss, k)
        for l in range(1, L - k + 1):
            pi[l - 1, ridx] = pi_scalar(l, rho, q, nu, fset, pss, k)
        for l in range(1, L):
            xi[l - 1, ridx] = xi_scalar(l, rho, q, nu, fset, pss, k)
    carrier = abs(pss.harmonic(nu)[q]) ** 2
    return NoiseOperators(
        c=phase_diffusion(fset.lam_harm[0]),
        nu=nu,
        node=node,
        q=q,
        carrier_power=carrier,
        ab=omega_scalar(q, nu, fset, pss, k),
        tu=psi_scalar(q, nu, fset, pss, k),
        theta=theta,
        pi=pi,
        xi=xi,
        exponents=fset.exponents.copy(),
        omega0=fset.omega0,
        nf=nf,
    )
