import numpy as np
import pytest

from oscnoise import (
    CircuitModel,
    CouplingSpec,
    EnsembleMeta,
    VDP_RF,
    VdpParams,
    builtin_coupled_ensemble,
    builtin_vdp,
    eval_jacobians,
    eval_residual,
)
from oscnoise.errors import ConfigurationError, ModelDefinitionError, ParameterError


def linear_model(r=1.0, c0=1.0, source=0.0):
    """Single-node RC with optional DC current source."""
    return CircuitModel(
        n=1, p=0,
        q_fn=lambda x: c0 * x,
        i_fn=lambda x: x / r,
        s_fn=lambda t: np.array([source]),
        b_fn=lambda x: np.zeros(x.shape[:-1] + (1, 0)),
        c_jac=lambda x: np.broadcast_to(np.array([[c0]]), x.shape[:-1] + (1, 1)),
        g_jac=lambda x: np.broadcast_to(np.array([[1.0 / r]]), x.shape[:-1] + (1, 1)),
        node_names=("n1",),
    )


def test_residual_linear_rc():
    model = linear_model(r=1.0)
    assert eval_residual(model, np.array([1.0]), 0.0) == pytest.approx([1.0])


def test_residual_source_only():
    model = CircuitModel(
        n=1, p=0,
        q_fn=lambda x: x,
        i_fn=lambda x: np.zeros_like(x),
        s_fn=lambda t: np.array([-1.0]),
        b_fn=lambda x: np.zeros(x.shape[:-1] + (1, 0)),
        c_jac=lambda x: np.ones(x.shape[:-1] + (1, 1)),
        g_jac=lambda x: np.zeros(x.shape[:-1] + (1, 1)),
        node_names=("n1",),
    )
    assert eval_residual(model, np.array([7.3]), 1.0) == pytest.approx([-1.0])


def test_residual_vdp_origin():
    # hand evaluation of the cubic conductance at x = 0: every term vanishes
    model = builtin_vdp()
    assert eval_residual(model, np.array([0.0, 0.0]), 0.0) == pytest.approx([0.0, 0.0])


def test_residual_dimension_error():
    model = builtin_vdp()
    with pytest.raises(ModelDefinitionError):
        eval_residual(model, np.array([1.0, 2.0, 3.0]), 0.0)


def test_jacobian_linear_capacitor():
    model = linear_model(c0=1e-9, r=50.0)
    c, g = eval_jacobians(model, np.array([0.3]))
    assert c[0, 0] == pytest.approx(1e-9)
    assert g[0, 0] == pytest.approx(0.02)


def _fd_jacobians(model, x, eps=1e-6):
    n = model.n
    c = np.empty((n, n))
    g = np.empty((n, n))
    for j in range(n):
        dx = eps * (1.0 + abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += dx
        xm[j] -= dx
        c[:, j] = (model.q_fn(xp) - model.q_fn(xm)) / (2 * dx)
        g[:, j] = (model.i_fn(xp) - model.i_fn(xm)) / (2 * dx)
    return c, g


@pytest.mark.parametrize("case", ["vdp", "vdp_rf", "ilo2", "ring3"])
def test_jacobians_match_finite_differences(case):
    if case == "vdp":
        model = builtin_vdp()
        scale = 2.0
    elif case == "vdp_rf":
        model = builtin_vdp(VDP_RF)
        scale = 1.0
    elif case == "ilo2":
        model, _ = builtin_coupled_ensemble(
            [VdpParams(), VdpParams(g1=1.25, g3=0.25 / 3)], CouplingSpec.unilateral(0.02)
        )
        scale = 2.0
    else:
        model, _ = builtin_coupled_ensemble(
            [VdpParams(), VdpParams(g1=1.22), VdpParams(g1=1.24)], CouplingSpec.bilateral(50.0)
        )
        scale = 2.0
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = rng.normal(scale=scale, size=model.n)
        if case == "vdp_rf":
            x[1::2] *= VDP_RF.c / VDP_RF.l  # keep current states at a physical scale
        c, g = eval_jacobians(model, x)
        c_fd, g_fd = _fd_jacobians(model, x)
        ref_c = np.max(np.abs(c))
        ref_g = np.max(np.abs(g))
        assert np.max(np.abs(c - c_fd)) <= 1e-5 * ref_c
        assert np.max(np.abs(g - g_fd)) <= 1e-5 * ref_g


def test_noise_matrix_structure():
    model = builtin_vdp()
    b = model.b_fn(np.array([1.0, -2.0]))
    assert b.shape == (2, 1)
    assert b[1, 0] == 0.0  # inductor row carries no source
    quiet = builtin_vdp(VdpParams(noise_power=0.0))
    assert np.all(quiet.b_fn(np.array([1.0, 2.0])) == 0.0)


def test_vdp_construction_contract():
    model = builtin_vdp()
    assert (model.n, model.p) == (2, 1)
    assert model.node_names == ("vout", "il")


def test_vdp_parameter_errors():
    with pytest.raises(ParameterError):
        VdpParams(l=-1.0)
    with pytest.raises(ParameterError):
        VdpParams(c=0.0)


def test_ensemble_construction():
    model, meta = builtin_coupled_ensemble(
        [VdpParams(), VdpParams()], CouplingSpec.unilateral(50e-6)
    )
    assert (model.n, meta.k) == (4, 2)
    assert model.b_fn(np.zeros(4)).shape == (4, 2)
    ring, meta3 = builtin_coupled_ensemble(
        [VdpParams(), VdpParams(g1=1.22), VdpParams(g1=1.24)], CouplingSpec.bilateral(50.0)
    )
    assert (ring.n, meta3.k) == (6, 3)


def test_ensemble_topology_errors():
    with pytest.raises(ConfigurationError):
        builtin_coupled_ensemble(
            [VdpParams(), VdpParams(), VdpParams()], CouplingSpec.unilateral(0.01)
        )
    with pytest.raises(ConfigurationError):
        builtin_coupled_ensemble([VdpParams()], CouplingSpec.bilateral(10.0))


def test_decoupled_residual_concatenates():
    pa, pb = VdpParams(), VdpParams(g1=1.3, g3=0.1)
    pair, _ = builtin_coupled_ensemble([pa, pb], CouplingSpec.unilateral(0.0))
    ua, ub = builtin_vdp(pa), builtin_vdp(pb)
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.normal(size=4)
        combined = eval_residual(pair, x, 0.0)
        split = np.concatenate([eval_residual(ua, x[:2], 0.0), eval_residual(ub, x[2:], 0.0)])
        assert combined == pytest.approx(split, rel=1e-14, abs=1e-14)


def test_meta_validation():
    model = builtin_vdp()
    with pytest.raises(ConfigurationError):
        EnsembleMeta(k=1, observation_nodes=("nosuch",)).validate(model)
    with pytest.raises(ConfigurationError):
        EnsembleMeta(k=3, observation_nodes=("vout",)).validate(model)
    with pytest.raises(ConfigurationError):
        EnsembleMeta(k=1, observation_nodes=("vout",), harmonic_index=0).validate(model)


def test_node_index_lists_candidates():
    model = builtin_vdp()
    with pytest.raises(ConfigurationError, match="vout"):
        model.node_index("bogus")
