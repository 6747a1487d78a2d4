"""Circuit models in Modified Nodal Analysis form, plus built-in oscillators.

A model is a bundle of closed-form callbacks describing the noisy circuit
equations

    d/dt q(x) + i(x) + s(t) + B(x) xi(t) = 0

where ``q`` holds the reactive (charge/flux) contributions, ``i`` the
resistive ones, ``s`` the independent sources and ``B`` is the n-by-p noise
modulation matrix feeding p uncorrelated, zero-mean, unit-power white noise
sources into the state equations.  The Jacobians ``C = dq/dx`` and
``G = di/dx`` drive every linear-response computation downstream.

All callbacks must broadcast over leading batch axes (state shape
``(..., n)``); the built-in models do.  Models are immutable after
construction and safe to evaluate concurrently.

The built-in component values are repository constants chosen for
well-conditioned desk-scale experiments; they are not tied to any published
circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, EvaluationError, ModelDefinitionError, ParameterError

__all__ = [
    "CircuitModel",
    "EnsembleMeta",
    "VdpParams",
    "CouplingSpec",
    "VDP_NORMALIZED",
    "VDP_RF",
    "eval_residual",
    "eval_jacobians",
    "builtin_vdp",
    "builtin_coupled_ensemble",
]


@dataclass(frozen=True)
class CircuitModel:
    """Closed-form MNA circuit model.

    Attributes:
        n: state dimension
        p: number of white noise sources (columns of B)
        q_fn: state -> (..., n) reactive contributions
        i_fn: state -> (..., n) resistive contributions
        s_fn: time -> (n,) independent sources
        b_fn: state -> (..., n, p) noise modulation matrix
        c_jac: state -> (..., n, n) Jacobian dq/dx
        g_jac: state -> (..., n, n) Jacobian di/dx
        node_names: n unique labels, one per state entry
    """

    n: int
    p: int
    q_fn: Callable[[np.ndarray], np.ndarray]
    i_fn: Callable[[np.ndarray], np.ndarray]
    s_fn: Callable[[float], np.ndarray]
    b_fn: Callable[[np.ndarray], np.ndarray]
    c_jac: Callable[[np.ndarray], np.ndarray]
    g_jac: Callable[[np.ndarray], np.ndarray]
    node_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.node_names) != self.n:
            raise ModelDefinitionError(
                f"{self.n} states but {len(self.node_names)} node names"
            )
        if len(set(self.node_names)) != self.n:
            raise ModelDefinitionError("node names must be unique")

    def node_index(self, name: str) -> int:
        try:
            return self.node_names.index(name)
        except ValueError:
            raise ConfigurationError(
                f"unknown node {name!r}; available nodes: {', '.join(self.node_names)}"
            ) from None

    def velocity(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        """State derivative dx/dt = -C(x)^{-1} (i(x) + s(t)); C must be regular."""
        c = self.c_jac(x)
        rhs = -(self.i_fn(x) + self.s_fn(t))
        return np.linalg.solve(c, rhs[..., None])[..., 0] if rhs.ndim > 1 else np.linalg.solve(c, rhs)


@dataclass(frozen=True)
class EnsembleMeta:
    """Bookkeeping for a k-unit oscillator ensemble."""

    k: int
    observation_nodes: tuple[str, ...]
    harmonic_index: int = 1

    def validate(self, model: CircuitModel) -> None:
        if not 1 <= self.k <= model.n:
            raise ConfigurationError(f"oscillator-unit count k={self.k} outside [1, n={model.n}]")
        for name in self.observation_nodes:
            model.node_index(name)
        if self.harmonic_index < 1:
            raise ConfigurationError("harmonic index must be >= 1")


def eval_residual(model: CircuitModel, x: np.ndarray, t: float) -> np.ndarray:
    """Deterministic resistive residual i(x) + s(t); the noise term is excluded."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ModelDefinitionError(f"state has length {x.shape[-1]}, expected {model.n}")
    out = model.i_fn(x) + model.s_fn(t)
    if out.shape[-1] != model.n:
        raise ModelDefinitionError(
            f"i_fn/s_fn returned length {out.shape[-1]}, expected {model.n}"
        )
    return out


def eval_jacobians(model: CircuitModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (C, G) = (dq/dx, di/dx) at x, checking for non-finite entries."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ModelDefinitionError(f"state has length {x.shape[-1]}, expected {model.n}")
    c = np.asarray(model.c_jac(x), dtype=float)
    g = np.asarray(model.g_jac(x), dtype=float)
    for label, mat in (("C", c), ("G", g)):
        if not np.all(np.isfinite(mat)):
            rows = np.argwhere(~np.isfinite(mat))
            row = int(rows[0][-2])
            raise EvaluationError(
                f"non-finite {label} entry at row {row} (node {model.node_names[row]})"
            )
    return c, g


# ----------------------------------------------------------------------------
# Built-in Van der Pol oscillator
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class VdpParams:
    """Parallel-tank oscillator with cubic negative-conductance element.

    Tank node KCL:  c dv/dt + (g0 - g1) v + g3 v^3 + il + sqrt(noise_power) xi = 0
    Inductor:       l dil/dt - v = 0

    With c = l = 1 and g3 = (g1 - g0)/3 this is the classical Van der Pol
    equation with eps = g1 - g0 and limit-cycle amplitude close to 2.
    ``noise_power`` is the one-sided power density of a white current source
    at the tank node.
    """

    l: float = 1.0
    c: float = 1.0
    g0: float = 1.0
    g1: float = 1.2
    g3: float = 0.2 / 3.0
    noise_power: float = 8e-3

    def __post_init__(self):
        if self.l <= 0 or self.c <= 0:
            raise ParameterError(f"tank L and C must be positive (got L={self.l}, C={self.c})")
        if self.g3 <= 0:
            raise ParameterError("cubic coefficient g3 must be positive")
        if self.noise_power < 0:
            raise ParameterError("noise power must be non-negative")

    @property
    def delta(self) -> float:
        """Net small-signal negative conductance g1 - g0."""
        return self.g1 - self.g0

    def amplitude_estimate(self) -> float:
        """Quasi-harmonic limit-cycle amplitude 2*sqrt(delta/(3 g3))."""
        return 2.0 * math.sqrt(max(self.delta, 0.0) / (3.0 * self.g3))

    def period_estimate(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.l * self.c)

    def initial_guess(self) -> np.ndarray:
        return np.array([max(self.amplitude_estimate(), 1e-3), 0.0])


# Repository parameter sets: a normalized tank and an RF-scale tank.
VDP_NORMALIZED = VdpParams()
VDP_RF = VdpParams(
    l=5e-9,
    c=6.3e-12,
    g0=1e-3,
    g1=8.1e-3,
    g3=9.47e-3,
    noise_power=1.66e-23,
)


def _vdp_callbacks(p: VdpParams):
    sqp = math.sqrt(p.noise_power)

    def q_fn(x):
        return np.stack([p.c * x[..., 0], p.l * x[..., 1]], axis=-1)

    def i_fn(x):
        v = x[..., 0]
        return np.stack([(p.g0 - p.g1) * v + p.g3 * v**3 + x[..., 1], -v], axis=-1)

    def s_fn(t):
        return np.zeros(2)

    def b_fn(x):
        b = np.zeros(x.shape[:-1] + (2, 1))
        b[..., 0, 0] = sqp
        return b

    def c_jac(x):
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = p.c
        out[..., 1, 1] = p.l
        return out

    def g_jac(x):
        v = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = (p.g0 - p.g1) + 3.0 * p.g3 * v**2
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = -1.0
        return out

    return q_fn, i_fn, s_fn, b_fn, c_jac, g_jac


def builtin_vdp(params: VdpParams = VDP_NORMALIZED, node_names=("vout", "il")) -> CircuitModel:
    """Two-state Van der Pol tank with one white current noise source."""
    q_fn, i_fn, s_fn, b_fn, c_jac, g_jac = _vdp_callbacks(params)
    return CircuitModel(
        n=2, p=1,
        q_fn=q_fn, i_fn=i_fn, s_fn=s_fn, b_fn=b_fn,
        c_jac=c_jac, g_jac=g_jac,
        node_names=tuple(node_names),
    )


# ----------------------------------------------------------------------------
# Coupled ensembles
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingSpec:
    """Coupling network of an ensemble.

    kind="unilateral": buffer amplifier injecting gm * v_primary into the
    secondary tank (exactly two units).
    kind="bilateral": resistive ring; every adjacent tank pair shares a
    coupling resistor rc.
    """

    kind: str
    gm: float = 0.0
    rc: float = math.inf

    @staticmethod
    def unilateral(gm: float) -> "CouplingSpec":
        return CouplingSpec(kind="unilateral", gm=gm)

    @staticmethod
    def bilateral(rc: float) -> "CouplingSpec":
        if rc <= 0:
            raise ParameterError("coupling resistance must be positive")
        return CouplingSpec(kind="bilateral", rc=rc)


def builtin_coupled_ensemble(
    unit_params: Sequence[VdpParams], coupling: CouplingSpec
) -> tuple[CircuitModel, EnsembleMeta]:
    """Block-assemble k Van der Pol units into one CircuitModel.

    State ordering is [v1, il1, v2, il2, ...]; unit j owns noise column j.
    """
    k = len(unit_params)
    if k < 2:
        raise ConfigurationError("an ensemble needs at least 2 oscillator units")
    if coupling.kind == "unilateral" and k != 2:
        raise ConfigurationError("unilateral coupling requires exactly 2 units")
    if coupling.kind not in ("unilateral", "bilateral"):
        raise ConfigurationError(f"unknown coupling kind {coupling.kind!r}")

    n = 2 * k
    vrows = np.arange(0, n, 2)
    irows = vrows + 1
    # per-unit parameter vectors; unit evaluation is vectorized across units
    lv = np.array([p.l for p in unit_params])
    cv = np.array([p.c for p in unit_params])
    dg = np.array([p.g0 - p.g1 for p in unit_params])
    g3 = np.array([p.g3 for p in unit_params])
    sq = np.array([math.sqrt(p.noise_power) for p in unit_params])
    if coupling.kind == "bilateral":
        edges = sorted({tuple(sorted((j, (j + 1) % k))) for j in range(k)})
        gc = 1.0 / coupling.rc
    else:
        edges, gc = [], 0.0

    def q_fn(x):
        out = np.empty_like(x)
        out[..., vrows] = cv * x[..., vrows]
        out[..., irows] = lv * x[..., irows]
        return out

    def i_fn(x):
        v = x[..., vrows]
        out = np.empty_like(x)
        out[..., vrows] = dg * v + g3 * v**3 + x[..., irows]
        out[..., irows] = -v
        if coupling.kind == "unilateral":
            out[..., vrows[1]] -= coupling.gm * x[..., vrows[0]]
        else:
            for a, b in edges:
                dv = x[..., vrows[a]] - x[..., vrows[b]]
                out[..., vrows[a]] += gc * dv
                out[..., vrows[b]] -= gc * dv
        return out

    def s_fn(t):
        return np.zeros(n)

    def b_fn(x):
        out = np.zeros(x.shape[:-1] + (n, k))
        out[..., vrows, np.arange(k)] = sq
        return out

    def c_jac(x):
        out = np.zeros(x.shape[:-1] + (n, n))
        out[..., vrows, vrows] = cv
        out[..., irows, irows] = lv
        return out

    def g_jac(x):
        out = np.zeros(x.shape[:-1] + (n, n))
        out[..., vrows, vrows] = dg + 3.0 * g3 * x[..., vrows] ** 2
        out[..., vrows, irows] = 1.0
        out[..., irows, vrows] = -1.0
        if coupling.kind == "unilateral":
            out[..., vrows[1], vrows[0]] += -coupling.gm
        else:
            for a, b in edges:
                out[..., vrows[a], vrows[a]] += gc
                out[..., vrows[a], vrows[b]] -= gc
                out[..., vrows[b], vrows[b]] += gc
                out[..., vrows[b], vrows[a]] -= gc
        return out

    names = []
    for j in range(k):
        names += [f"v{j + 1}", f"il{j + 1}"]
    model = CircuitModel(
        n=n, p=k,
        q_fn=q_fn, i_fn=i_fn, s_fn=s_fn, b_fn=b_fn,
        c_jac=c_jac, g_jac=g_jac,
        node_names=tuple(names),
    )
    meta = EnsembleMeta(k=k, observation_nodes=tuple(f"v{j + 1}" for j in range(k)))
    meta.validate(model)
    return model, meta
