import numpy as np
import pytest

from oscnoise import (
    CouplingSpec,
    VdpParams,
    builtin_coupled_ensemble,
    builtin_vdp,
    build_operators,
    floquet_decompose,
    solve_pss,
)
from oscnoise.pss import transient_settle


@pytest.fixture(scope="session")
def vdp_model():
    return builtin_vdp()


@pytest.fixture(scope="session")
def vdp_pss(vdp_model):
    return solve_pss(vdp_model, {"x0": [2.0, 0.0], "t0_guess": 2 * np.pi}, m=1024)


@pytest.fixture(scope="session")
def vdp_pss_fine(vdp_model):
    return solve_pss(vdp_model, {"x0": [2.0, 0.0], "t0_guess": 2 * np.pi}, m=2048)


@pytest.fixture(scope="session")
def vdp_fset(vdp_model, vdp_pss):
    return floquet_decompose(vdp_model, vdp_pss, k=1, nf=32)


@pytest.fixture(scope="session")
def vdp_ops(vdp_fset, vdp_pss):
    return build_operators(vdp_fset, vdp_pss, "vout", 0, 1, 1)


# strongly driven variant used for Monte-Carlo spectrum work
MC_PARAMS = VdpParams(g1=1.5, g3=0.5 / 3.0, noise_power=0.08)
# weak-noise variant for phase-diffusion estimation
WEAK_PARAMS = VdpParams(g1=1.5, g3=0.5 / 3.0, noise_power=0.005)


def _solve_vdp(params, m=1024):
    model = builtin_vdp(params)
    pss = solve_pss(
        model, {"x0": params.initial_guess(), "t0_guess": params.period_estimate()}, m=m
    )
    return model, pss


@pytest.fixture(scope="session")
def mc_bundle():
    model, pss = _solve_vdp(MC_PARAMS)
    fset = floquet_decompose(model, pss, k=1, nf=32)
    ops = build_operators(fset, pss, "vout", 0, 1, 1)
    return model, pss, fset, ops


@pytest.fixture(scope="session")
def weak_bundle():
    model, pss = _solve_vdp(WEAK_PARAMS)
    fset = floquet_decompose(model, pss, k=1, nf=32)
    ops = build_operators(fset, pss, "vout", 0, 1, 1)
    return model, pss, fset, ops


ILO_PRM = VdpParams(g1=1.2, noise_power=5e-4)
ILO_SEC = VdpParams(g1=1.25, g3=0.25 / 3.0, noise_power=5e-2)
ILO_GM = 0.02


@pytest.fixture(scope="session")
def ilo_bundle():
    model, meta = builtin_coupled_ensemble([ILO_PRM, ILO_SEC], CouplingSpec.unilateral(ILO_GM))
    x0 = np.concatenate([ILO_PRM.initial_guess(), ILO_SEC.initial_guess()])
    xs = transient_settle(model, x0, 120 * ILO_PRM.period_estimate(), steps_per_unit=16)
    pss = solve_pss(model, {"x0": xs, "t0_guess": ILO_PRM.period_estimate()}, m=1024)
    fset = floquet_decompose(model, pss, k=2, nf=32)
    ops_p = build_operators(fset, pss, "v1", 0, 1, 2)
    ops_s = build_operators(fset, pss, "v2", 2, 1, 2)
    return model, meta, pss, fset, ops_p, ops_s
