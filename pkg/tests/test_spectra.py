import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad

from oscnoise import (
    SweepSpec,
    anoise_at,
    assemble_datasets,
    build_operators,
    generate_sweep,
    pnoise_at,
    reduced_single_osc,
    xnoise_at,
)
from oscnoise.errors import ConfigurationError


def test_sweep_linear():
    f = generate_sweep(SweepSpec(1e3, 1e4, "lin", 10))
    assert len(f) == 10
    assert f[0] == 1e3 and f[-1] == 1e4
    assert np.allclose(np.diff(f), f[1] - f[0])


def test_sweep_log_three_decades():
    f = generate_sweep(SweepSpec(1e3, 1e6, "log", 10))
    assert len(f) == 31
    assert f[0] == pytest.approx(1e3) and f[-1] == pytest.approx(1e6)
    assert np.allclose(np.diff(np.log10(f)), 0.1)


def test_sweep_log_single_step():
    f = generate_sweep(SweepSpec(1e3, 1e3 * 10 ** (1 / 10), "log", 10))
    assert len(f) == 2


def test_sweep_validation():
    with pytest.raises(ConfigurationError):
        SweepSpec(0.0, 1.0, "lin", 10)
    with pytest.raises(ConfigurationError):
        SweepSpec(2.0, 1.0, "log", 10)
    with pytest.raises(ConfigurationError):
        SweepSpec(1.0, 2.0, "lin", 9)
    with pytest.raises(ConfigurationError):
        SweepSpec(1.0, 2.0, "log", 2)
    with pytest.raises(ConfigurationError):
        SweepSpec(1.0, 2.0, "quad", 10)


def test_pnoise_zero_offset_limit(vdp_ops, vdp_fset):
    w0, c = vdp_ops.omega0, vdp_ops.c
    val = pnoise_at(np.array([0.0]), vdp_ops, vdp_fset, 1)[0]
    assert val == pytest.approx(4.0 / (w0**2 * c), rel=1e-14)


def test_pnoise_far_offset_asymptote(vdp_ops, vdp_fset):
    w0, c = vdp_ops.omega0, vdp_ops.c
    corner = 0.5 * w0**2 * c
    wm = 1e3 * corner
    val = pnoise_at(np.array([wm]), vdp_ops, vdp_fset, 1)[0]
    assert val == pytest.approx(w0**2 * c / wm**2, rel=1e-5)


def test_lorentzian_slope(vdp_ops, vdp_fset):
    w0, c = vdp_ops.omega0, vdp_ops.c
    fc = 0.5 * w0**2 * c / (2 * np.pi)
    f = np.geomspace(10 * fc, 1000 * fc, 50)
    pn = pnoise_at(2 * np.pi * f, vdp_ops, vdp_fset, 1)
    slope = np.polyfit(np.log10(f), 10 * np.log10(pn), 1)[0]
    assert slope == pytest.approx(-20.0, abs=0.2)


def test_lorentzian_total_power(vdp_ops, vdp_fset):
    # the normalized carrier line integrates to 2*pi over angular offsets
    w0, c = vdp_ops.omega0, vdp_ops.c
    corner = 0.5 * w0**2 * c

    def integrand(u):
        # offsets scaled by the corner so quad sees an O(1) integrand
        return corner * reduced_single_osc(np.array([corner * u]), c, w0, 1, vdp_ops)[0][0]

    total, _ = quad(integrand, -np.inf, np.inf, limit=200)
    assert total == pytest.approx(2 * np.pi, rel=1e-9)
    # and the quadrature integrand is the general-path curve
    assert reduced_single_osc(np.array([3 * corner]), c, w0, 1, vdp_ops)[0][0] == pytest.approx(
        pnoise_at(np.array([3 * corner]), vdp_ops, vdp_fset, 1)[0], rel=1e-12
    )


def _truncate(fset, keep):
    return dataclasses.replace(
        fset,
        exponents=fset.exponents[:keep],
        u_series=fset.u_series[:keep],
        v_series=fset.v_series[:keep],
        lam_series=fset.lam_series[:keep],
        u_harm=fset.u_harm[:keep],
        lam_harm=fset.lam_harm[:keep],
    )


def test_anoise_zero_without_amplitude_modes(vdp_fset, vdp_pss):
    only_phase = _truncate(vdp_fset, 1)
    ops = build_operators(only_phase, vdp_pss, "vout", 0, 1, 1)
    assert ops.pi.shape[0] == 0
    wm = np.geomspace(1e-6, 1.0, 7)
    assert np.all(anoise_at(wm, ops, only_phase, 1, 1) == 0.0)
    # k = 1 with no amplitude modes: cross spectrum vanishes identically
    assert np.all(xnoise_at(wm, ops, only_phase, 1, 1) == 0.0)


def test_anoise_flat_below_amplitude_corner(vdp_ops, vdp_fset):
    mu2 = abs(vdp_fset.exponents[1].real)
    lo = anoise_at(np.array([mu2 / 100]), vdp_ops, vdp_fset, 1, vdp_fset.L)[0]
    hi = anoise_at(np.array([mu2 / 10]), vdp_ops, vdp_fset, 1, vdp_fset.L)[0]
    assert lo > 0.0
    assert hi == pytest.approx(lo, rel=0.05)


def test_reduction_equivalence(vdp_ops, vdp_fset):
    w0, c = vdp_ops.omega0, vdp_ops.c
    rng = np.random.default_rng(23)
    wm = 10 ** rng.uniform(-6, 1, 50) * w0
    gen_p = pnoise_at(wm, vdp_ops, vdp_fset, 1)
    gen_a = anoise_at(wm, vdp_ops, vdp_fset, 1, vdp_fset.L)
    gen_x = xnoise_at(wm, vdp_ops, vdp_fset, 1, vdp_fset.L)
    red_p, red_a, red_x = reduced_single_osc(wm, c, w0, 1, vdp_ops)
    assert np.max(np.abs(gen_p / red_p - 1.0)) <= 1e-12
    assert np.max(np.abs(gen_a / red_a - 1.0)) <= 1e-12
    assert np.max(np.abs(gen_x / red_x - 1.0)) <= 1e-12


def test_reduction_rejects_ensembles(ilo_bundle):
    _, _, _, fset, ops_p, _ = ilo_bundle
    with pytest.raises(ValueError):
        reduced_single_osc(np.array([1.0]), ops_p.c, fset.omega0, 1, ops_p)


def test_half_power_corner(vdp_ops):
    w0, c = vdp_ops.omega0, vdp_ops.c
    corner = 0.5 * w0**2 * c
    val = reduced_single_osc(np.array([corner]), c, w0, 1, vdp_ops)[0][0]
    assert val == pytest.approx(0.5 * 4.0 / (w0**2 * c), rel=1e-12)


def test_finite_at_tiny_offsets(vdp_ops, vdp_fset, ilo_bundle):
    _, _, _, ifset, ops_p, ops_s = ilo_bundle
    for ops, fset, k in ((vdp_ops, vdp_fset, 1), (ops_p, ifset, 2), (ops_s, ifset, 2)):
        wm = np.array([1e-6 * fset.omega0])
        assert np.isfinite(pnoise_at(wm, ops, fset, k)[0])
        assert np.isfinite(anoise_at(wm, ops, fset, k, fset.L)[0])
        assert np.isfinite(xnoise_at(wm, ops, fset, k, fset.L)[0])


def _complex_assembly(wm, ops):
    """Reality oracle: rebuild the phase spectrum as z + conj(z) sums."""
    w0, nu, c = ops.omega0, ops.nu, ops.c
    s0 = 0.5 * w0**2 * nu**2 * c
    z = (1.0 - ops.ab) / (s0 + 1j * wm)
    total = z + np.conj(z)
    nf = ops.nf
    for li in range(ops.theta.shape[0]):
        mu = ops.exponents[li + 1]
        for ridx in range(2 * nf + 1):
            rho = ridx - nf
            sig = abs(mu.real) + 0.5 * w0**2 * rho**2 * c
            zz = ops.theta[li, ridx] / (sig + 1j * (wm + mu.imag))
            total = total + zz + np.conj(zz)
    return total


def test_reality_of_assembled_spectrum(ilo_bundle):
    _, _, _, fset, _, ops_s = ilo_bundle
    wm = np.array([1e-4, 1e-2, 0.3]) * fset.omega0
    total = _complex_assembly(wm, ops_s)
    assert np.max(np.abs(total.imag)) <= 1e-10 * np.max(np.abs(total.real))
    direct = pnoise_at(wm, ops_s, fset, 2)
    assert np.allclose(total.real, direct, rtol=1e-12)


def test_no_accidental_symmetrization(ilo_bundle):
    # the ensemble kernels are explicitly asymmetric in the offset sign
    _, _, _, fset, _, ops_s = ilo_bundle
    wm = 0.3 * abs(fset.exponents[1].real)
    plus = pnoise_at(np.array([wm]), ops_s, fset, 2)[0]
    minus = pnoise_at(np.array([-wm]), ops_s, fset, 2)[0]
    assert abs(plus - minus) > 1e-6 * abs(plus)
    # manual kernel evaluation at -wm reproduces the value
    w0, nu, c = ops_s.omega0, ops_s.nu, ops_s.c
    s0 = 0.5 * w0**2 * nu**2 * c
    a, b = ops_s.ab.real, ops_s.ab.imag
    ref = ((1 - a) * 2 * s0 - 2 * b * (-wm)) / (s0**2 + wm**2)
    nf = ops_s.nf
    for li in range(ops_s.theta.shape[0]):
        mu = ops_s.exponents[li + 1]
        for ridx in range(2 * nf + 1):
            rho = ridx - nf
            up, dl = ops_s.theta[li, ridx].real, ops_s.theta[li, ridx].imag
            src = w0**2 * rho**2 * c
            ref += (up * (2 * abs(mu.real) + src) + 2 * dl * (-wm + mu.imag)) / (
                (abs(mu.real) + 0.5 * src) ** 2 + (-wm + mu.imag) ** 2
            )
    assert minus == pytest.approx(ref, rel=1e-12)


def test_assemble_datasets(vdp_ops, vdp_fset):
    freqs = generate_sweep(SweepSpec(1e-5, 1e-2, "log", 10))
    ds = assemble_datasets(["vout"], freqs, {"vout": vdp_ops}, vdp_fset, 1)
    assert len(ds) == 1
    d = ds[0]
    assert len(d.freqs) == len(d.pnoise_dbc) == len(d.anoise_dbc) == len(d.xnoise_signed)
    assert np.all(np.isfinite(d.pnoise_dbc))
    assert np.all(np.isfinite(d.anoise_dbc))
    assert d.node == "vout" and d.nu == 1


def test_assemble_two_nodes(ilo_bundle):
    _, _, _, fset, ops_p, ops_s = ilo_bundle
    freqs = generate_sweep(SweepSpec(1e-6, 1e-3, "log", 5))
    ds = assemble_datasets(["v1", "v2"], freqs, {"v1": ops_p, "v2": ops_s}, fset, 2)
    assert len(ds) == 2
    assert not np.allclose(ds[0].pnoise_dbc, ds[1].pnoise_dbc)
