"""Phase, amplitude and cross-correlation spectra over a frequency sweep.

Each spectrum is a Lorentzian-like leading term plus a double sum of
mode/harmonic kernels driven by the precomputed noise operators.  Every
kernel denominator contains the diffusion floor (0.5 w0^2 rho^2 c)^2, so the
values stay finite at arbitrarily small carrier offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .noiseops import NoiseOperators

__all__ = [
    "SweepSpec",
    "SpectrumDataset",
    "generate_sweep",
    "pnoise_at",
    "anoise_at",
    "xnoise_at",
    "reduced_single_osc",
    "assemble_datasets",
]


@dataclass(frozen=True)
class SweepSpec:
    """Offset-frequency sweep; ``n_points`` is per decade for log sweeps."""

    start: float
    stop: float
    kind: str = "log"
    n_points: int = 10

    def __post_init__(self):
        if self.start <= 0:
            raise ConfigurationError("sweep start must be positive")
        if self.stop <= self.start:
            raise ConfigurationError("sweep stop must exceed start")
        if self.kind == "lin":
            if self.n_points < 10:
                raise ConfigurationError("linear sweeps need at least 10 points")
        elif self.kind == "log":
            if self.n_points < 3:
                raise ConfigurationError("log sweeps need at least 3 points per decade")
        else:
            raise ConfigurationError(f"sweep kind must be lin or log, got {self.kind!r}")


def generate_sweep(spec: SweepSpec) -> np.ndarray:
    """Offset frequencies in Hz, endpoints included."""
    if spec.kind == "lin":
        return np.linspace(spec.start, spec.stop, spec.n_points)
    decades = np.log10(spec.stop / spec.start)
    num = max(int(round(decades * spec.n_points)) + 1, 2)
    return np.geomspace(spec.start, spec.stop, num)


def _kernel_sum(omega_m, table, exponents, mode_offset, omega0, c):
    """Sum of operator kernels over (l, rho).

    ``table`` row l-1 (tensor index l) references the mode whose exponent
    sits at array index l-1+mode_offset; columns are rho + nf.
    """
    wm = np.asarray(omega_m, dtype=float)
    out = np.zeros(wm.shape)
    n_l, n_rho = table.shape
    nf = (n_rho - 1) // 2
    for li in range(n_l):
        mu = exponents[li + mode_offset]
        mur = abs(mu.real)
        mui = mu.imag
        for ridx in range(n_rho):
            val = table[li, ridx]
            if val == 0.0:
                continue
            rho = ridx - nf
            floor = 0.5 * omega0**2 * rho**2 * c
            num = val.real * (2.0 * mur + 2.0 * floor) + 2.0 * val.imag * (wm + mui)
            out += num / ((mur + floor) ** 2 + (wm + mui) ** 2)
    return out


def pnoise_at(omega_m, ops: NoiseOperators, fset, k: int):
    """Phase-noise density at offset omega_m (rad/s) around harmonic nu."""
    wm = np.asarray(omega_m, dtype=float)
    w0, nu, c = ops.omega0, ops.nu, ops.c
    s0 = 0.5 * w0**2 * nu**2 * c
    a, b = ops.ab.real, ops.ab.imag
    out = ((1.0 - a) * (2.0 * s0) - 2.0 * b * wm) / (s0**2 + wm**2)
    out = out + _kernel_sum(wm, ops.theta, ops.exponents, 1, w0, c)
    return out


def anoise_at(omega_m, ops: NoiseOperators, fset, k: int, L: int):
    """Amplitude-noise density; identically zero when no amplitude mode is retained."""
    wm = np.asarray(omega_m, dtype=float)
    return _kernel_sum(wm, ops.pi, ops.exponents, k, ops.omega0, ops.c)


def xnoise_at(omega_m, ops: NoiseOperators, fset, k: int, L: int):
    """Signed phase-amplitude cross-correlation density."""
    wm = np.asarray(omega_m, dtype=float)
    w0, nu, c = ops.omega0, ops.nu, ops.c
    s0 = 0.5 * w0**2 * nu**2 * c
    t, u = ops.tu.real, ops.tu.imag
    out = -(t * (2.0 * s0) + 2.0 * u * wm) / (s0**2 + wm**2)
    out = out + _kernel_sum(wm, ops.xi, ops.exponents, 1, w0, c)
    return out


def reduced_single_osc(omega_m, c: float, omega0: float, nu: int, ops: NoiseOperators):
    """Free-running (k = 1) closed forms, coded independently of the general path.

    Returns (phase, amplitude, cross) densities.
    """
    if ops.k != 1:
        raise ValueError(f"single-oscillator reduction called with k={ops.k}")
    wm = np.asarray(omega_m, dtype=float)
    half = 0.5 * omega0 * omega0 * nu * nu * c
    lorentz = (omega0 * omega0 * nu * nu * c) / (half * half + wm * wm)

    amp = np.zeros(wm.shape)
    cross = -(ops.tu.real * (omega0**2 * nu**2 * c) + 2.0 * ops.tu.imag * wm) / (
        half * half + wm * wm
    )
    n_l, n_rho = ops.xi.shape
    nf = (n_rho - 1) // 2
    for l in range(1, n_l + 1):
        mu = ops.exponents[l]
        for rho in range(-nf, nf + 1):
            wt = ops.pi[l - 1, rho + nf]
            ez = ops.xi[l - 1, rho + nf]
            src = omega0**2 * rho**2 * c
            den = (abs(mu.real) + 0.5 * src) ** 2 + (wm + mu.imag) ** 2
            amp = amp + (wt.real * (2.0 * abs(mu.real) + src) + 2.0 * wt.imag * (wm + mu.imag)) / den
            cross = cross + (ez.real * (2.0 * abs(mu.real) + src) + 2.0 * ez.imag * (wm + mu.imag)) / den
    return lorentz, amp, cross


@dataclass(frozen=True)
class SpectrumDataset:
    """Swept spectra of one observation node around one harmonic.

    pnoise/anoise are stored in dBc (1 Hz bandwidth, relative to the
    harmonic's carrier power); the signed cross spectrum is stored as a
    linear density plus a magnitude-in-dB convenience column.
    """

    node: str
    nu: int
    freqs: np.ndarray
    pnoise_dbc: np.ndarray
    anoise_dbc: np.ndarray
    xnoise_signed: np.ndarray
    xnoise_db: np.ndarray


def _to_dbc(lin):
    out = np.full(lin.shape, -np.inf)
    pos = lin > 0.0
    out[pos] = 10.0 * np.log10(lin[pos])
    return out


def assemble_datasets(nodes, freqs, ops_by_node, fset, k: int):
    """Evaluate all three spectra for every node over the sweep.

    ``freqs`` are offset frequencies in Hz; kernels run on omega_m = 2 pi f.
    """
    freqs = np.asarray(freqs, dtype=float)
    wm = 2.0 * np.pi * freqs
    out = []
    for node in nodes:
        ops = ops_by_node[node]
        pn = pnoise_at(wm, ops, fset, k)
        an = anoise_at(wm, ops, fset, k, fset.L)
        xn = xnoise_at(wm, ops, fset, k, fset.L)
        out.append(
            SpectrumDataset(
                node=node,
                nu=ops.nu,
                freqs=freqs,
                pnoise_dbc=_to_dbc(pn),
                anoise_dbc=_to_dbc(an),
                xnoise_signed=xn,
                xnoise_db=_to_dbc(np.abs(xn)),
            )
        )
    return out
