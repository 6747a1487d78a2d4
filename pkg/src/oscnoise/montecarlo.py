"""Brute-force validation path: noisy time-domain integration plus averaged
periodograms.

This module deliberately shares no numerics with the closed-form spectrum
pipeline except the model callbacks themselves.  Paths are stepped in a
batch with per-path counter-based RNG streams spawned from one master seed,
so runs are reproducible and paths stay independent of the batch layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConfigurationError, InstabilityError, NoConvergenceError
from .models import CircuitModel
from .pss import PssSolution

__all__ = [
    "McConfig",
    "SpectrumEstimate",
    "simulate_sde",
    "estimate_spectrum",
    "crossing_deviations",
    "estimate_c_from_phase",
    "estimate_c_from_linewidth",
    "band_average",
]

DEFAULT_SEED = 0x5EED
_CHUNK = 1 << 15
_DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo run parameters.

    ``window`` is the segment length (in stored samples) for periodogram
    averaging; 0 means one segment per path.  ``store_every`` thins the
    stored observation series; integration always runs at ``dt``.
    """

    n_paths: int
    dt: float
    duration: float
    seed: int = DEFAULT_SEED
    window: int = 0
    store_every: int = 1

    def validate(self, period: float) -> None:
        if self.dt > period / 200.0:
            raise ConfigurationError(
                f"dt={self.dt:.3g} too coarse; need dt <= T0/200 = {period / 200:.3g}"
            )
        if self.duration < 50.0 * period:
            raise ConfigurationError("duration must cover at least 50 periods")
        if self.n_paths < 8:
            raise ConfigurationError("need at least 8 paths")


def simulate_sde(model: CircuitModel, pss: PssSolution, cfg: McConfig, node: int = 0) -> np.ndarray:
    """Integrate the noisy model; returns (n_paths, n_samples) of one node.

    The deterministic part is stepped with the trapezoidal rule; the noise
    increment B(x_j) dW_j enters explicitly with dW ~ Normal(0, dt) per
    source (Euler-Maruyama treatment of the stochastic term).  All paths
    start on the limit cycle at x_s(0).
    """
    cfg.validate(pss.period)
    n_steps = int(round(cfg.duration / cfg.dt))
    p_paths, n, p = cfg.n_paths, model.n, model.p
    h = cfg.dt
    sqh = math.sqrt(h)
    gens = [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(cfg.seed).spawn(p_paths)]

    x = np.tile(pss.states[0], (p_paths, 1))
    limit = _DIVERGENCE_FACTOR * float(np.max(np.abs(pss.states)))
    s_const = model.s_fn(0.0)

    # constant-B fast path: hoist the matrix out of the step loop
    b_probe = model.b_fn(pss.states[:2])
    b_const = model.b_fn(pss.states[0]) if np.allclose(b_probe[0], b_probe[1]) else None

    n_keep = n_steps // cfg.store_every + 1
    out = np.empty((p_paths, n_keep), dtype=np.float32)
    out[:, 0] = x[:, node]
    kept = 1

    scale = 1.0 + float(np.max(np.abs(pss.states)))
    tol = 1e-10 * scale
    chunk_noise = None
    for j in range(n_steps):
        cj = j % _CHUNK
        if cj == 0:
            m = min(_CHUNK, n_steps - j)
            chunk_noise = np.stack([g.normal(0.0, sqh, (m, p)) for g in gens])
        w = chunk_noise[:, cj, :]
        if b_const is not None:
            forcing = w @ b_const.T
        else:
            forcing = np.einsum("pij,pj->pi", model.b_fn(x), w)
        ix = model.i_fn(x)
        const = -model.q_fn(x) + 0.5 * h * (ix + 2.0 * s_const) + forcing
        # chord Newton: Jacobian frozen at the left point, inverted once
        inv = np.linalg.inv(model.c_jac(x) + 0.5 * h * model.g_jac(x))
        y = x - np.einsum("pij,pj->pi", inv, h * (ix + s_const) + forcing)
        for it in range(24):
            res = model.q_fn(y) + 0.5 * h * model.i_fn(y) + const
            dy = -np.einsum("pij,pj->pi", inv, res)
            y = y + dy
            if np.max(np.abs(dy)) <= tol:
                break
        else:
            raise NoConvergenceError(f"stochastic step Newton stalled at step {j}")
        x = y
        if np.max(np.abs(x)) > limit:
            raise InstabilityError(
                f"path diverged at step {j}; reduce dt or the noise power"
            )
        if (j + 1) % cfg.store_every == 0:
            out[:, kept] = x[:, node]
            kept += 1
    return out[:, :kept]


@dataclass(frozen=True)
class SpectrumEstimate:
    """One-sided averaged periodogram around a carrier line, dBc/Hz."""

    offsets: np.ndarray       # positive offsets from the carrier (Hz)
    density: np.ndarray       # linear density relative to carrier power (1/Hz)
    density_dbc: np.ndarray
    f_carrier: float
    line_power: float
    df: float


def estimate_spectrum(series, dt: float, f0: float, nu: int = 1,
                      window: int = 0, band=None) -> SpectrumEstimate:
    """Welch-averaged PSD around the nu-th carrier harmonic.

    The spectrum is normalized to the carrier line power integrated over
    the comparison band, which makes the returned density directly dBc/Hz.
    The carrier frequency is re-estimated from the line centroid so that
    integrator frequency bias does not skew small offsets.
    """
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    n = series.shape[1]
    nperseg = n if window <= 0 else int(window)
    if n < nperseg or (window > 0 and n < 4 * nperseg):
        raise ConfigurationError("series too short for the requested segmenting")
    fs = 1.0 / dt
    fc_nom = nu * f0
    if band is not None:
        lo, hi = band
        if fc_nom + hi >= 0.5 * fs:
            raise ConfigurationError(
                f"band edge {fc_nom + hi:.3g} Hz outside Nyquist {0.5 * fs:.3g} Hz"
            )
    freqs, psd = signal.welch(
        series, fs=fs, window="hann", nperseg=nperseg,
        noverlap=nperseg // 2, detrend="constant", scaling="density", axis=1,
    )
    psd = np.mean(psd, axis=0)
    df = freqs[1] - freqs[0]
    if band is not None and band[0] < df:
        raise ConfigurationError(
            f"lowest requested offset {band[0]:.3g} Hz below the resolution {df:.3g} Hz"
        )

    # carrier recentering: centroid of the line core
    r_core = math.sqrt(band[0] * band[1]) if band is not None else 20.0 * df
    core = np.abs(freqs - fc_nom) <= r_core
    if not np.any(core):
        raise ConfigurationError("carrier line not resolved by the grid")
    f_carrier = float(np.sum(freqs[core] * psd[core]) / np.sum(psd[core]))
    ic = int(round(f_carrier / df))

    r_line = band[1] if band is not None else 100.0 * df
    line = np.abs(freqs - f_carrier) <= r_line
    line_power = float(np.trapezoid(psd[line], freqs[line]))

    k_max = min(ic - 1, len(freqs) - 1 - ic)
    if band is not None:
        k_max = min(k_max, int(np.ceil(band[1] / df)))
    k = np.arange(1, k_max + 1)
    dens = 0.5 * (psd[ic + k] + psd[ic - k]) / line_power
    with np.errstate(divide="ignore"):
        dbc = 10.0 * np.log10(dens)
    return SpectrumEstimate(
        offsets=k * df, density=dens, density_dbc=dbc,
        f_carrier=f_carrier, line_power=line_power, df=df,
    )


def _upward_crossings(x, dt):
    idx = np.nonzero((x[:-1] < 0.0) & (x[1:] >= 0.0))[0]
    frac = x[idx] / (x[idx] - x[idx + 1])
    return (idx + frac) * dt


def crossing_deviations(series, dt: float):
    """Per-path upward zero-crossing times, index-aligned across paths.

    Returns (t_mean, dev) where dev[p, k] is path p's deviation of the k-th
    crossing time from the ensemble mean t_mean[k].  Subtracting the
    ensemble mean removes the deterministic drift of the discrete solver,
    so the deviations measure pure phase wander in units of time.

    A short boxcar pre-smoothing (about a twentieth of the detected period)
    suppresses step-level noise chatter around the crossings; its group
    delay is common to every path and crossing, so it drops out of the
    deviations.
    """
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    # first pass on the raw mean-free signal just to estimate the period
    probe = series[0] - np.mean(series[0])
    raw = _upward_crossings(probe, dt)
    if raw.size < 4:
        raise ConfigurationError("too few zero crossings for a phase estimate")
    period_est = float(np.median(np.diff(raw)))
    width = max(int(round(period_est / dt / 20.0)), 1)
    kernel = np.full(width, 1.0 / width)

    all_times = []
    for x in series:
        x = x - np.mean(x)
        if width > 1:
            x = np.convolve(x, kernel, mode="valid")
        times = _upward_crossings(x, dt)
        if times.size >= 3:
            # debounce residual chatter: keep half-period spacing
            half = 0.5 * period_est
            keep = [times[0]]
            for t in times[1:]:
                if t - keep[-1] > half:
                    keep.append(t)
            times = np.asarray(keep)
        all_times.append(times)
    k_min = min(t.size for t in all_times)
    if k_min < 8:
        raise ConfigurationError("too few zero crossings for a phase estimate")
    stack = np.stack([t[:k_min] for t in all_times])
    t_mean = np.mean(stack, axis=0)
    return t_mean, stack - t_mean


def estimate_c_from_phase(series, dt: float) -> float:
    """Diffusion constant from the growth of the crossing-time variance.

    Fits Var[alpha](t) = c t + b by least squares; the intercept absorbs
    amplitude-noise jitter of the crossing detector.
    """
    t_mean, dev = crossing_deviations(series, dt)
    var = np.var(dev, axis=0, ddof=1)
    a = np.vstack([t_mean, np.ones_like(t_mean)]).T
    slope, _ = np.linalg.lstsq(a, var, rcond=None)[0]
    return float(slope)


def estimate_c_from_linewidth(est: SpectrumEstimate, omega0: float, nu: int = 1) -> float:
    """Diffusion constant from the Lorentzian half-width of the carrier line.

    Linear fit of 1/S against f^2 over the line core; the half-width f_h
    maps to c = 4 pi f_h / (nu^2 omega0^2).
    """
    s = est.density
    f = est.offsets
    plateau = float(np.mean(s[: max(2, len(s) // 50)]))
    below = np.nonzero(s < 0.5 * plateau)[0]
    if below.size == 0:
        raise ConfigurationError("half-power point outside the estimated band")
    fh_rough = f[below[0]]
    sel = f <= 4.0 * fh_rough
    a = np.vstack([np.ones(np.count_nonzero(sel)), f[sel] ** 2]).T
    coef = np.linalg.lstsq(a, 1.0 / s[sel], rcond=None)[0]
    fh = math.sqrt(abs(coef[0] / coef[1]))
    return 4.0 * math.pi * fh / (nu**2 * omega0**2)


def band_average(f, values, per_decade: int = 8):
    """Average a spectrum over log-spaced frequency bands.

    Returns (band_centers, band_means); empty bands are dropped.
    """
    f = np.asarray(f)
    values = np.asarray(values)
    lo, hi = float(np.min(f)), float(np.max(f))
    edges = np.geomspace(lo, hi, max(int(np.log10(hi / lo) * per_decade), 2) + 1)
    centers, means = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (f >= a) & (f < b)
        if np.any(sel):
            centers.append(math.sqrt(a * b))
            means.append(float(np.mean(values[sel])))
    return np.asarray(centers), np.asarray(means)
