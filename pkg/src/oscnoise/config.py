"""Run configuration: INI-style key/value files and model registry.

Grammar (configparser INI):

    [model]                         ; built-in model and its parameters
    name = vdp | ilo2 | ring3
    l = 1.0                         ; vdp: tank values (see VdpParams)
    unit1_g1 = 1.2                  ; ensembles: per-unit overrides
    gm = 0.02                       ; ilo2 coupling transconductance (S)
    rc = 50.0                       ; ring3 coupling resistance (ohm)

    [sweep]
    start = 1e-4                    ; offset sweep in Hz
    stop = 1e-1
    kind = log                      ; lin | log
    points = 10                     ; total (lin) or per decade (log)

    [analysis]
    nf = 32                         ; harmonic truncation, >= 16
    noise_nodes = vout              ; comma separated observation nodes
    nu = 1                          ; comma separated harmonic indices
    k =                             ; optional ensemble-count override

    [pss]
    m = 1024                        ; grid size, power of two
    tol = 1e-9                      ; relative periodicity tolerance
    t0_guess =                      ; optional period guess (s)
    x0 =                            ; optional comma separated initial state
    settle_periods =                ; optional pre-shooting transient settle

    [mc]
    enabled = false                 ; Monte-Carlo overlay
    n_paths = 16
    steps_per_period = 200
    duration_periods = 2000
    seed = 24301
    window = 0                      ; periodogram segment length (samples)
    store_every = 1

    [output]
    dir = out
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .models import (
    CircuitModel,
    CouplingSpec,
    EnsembleMeta,
    VdpParams,
    builtin_coupled_ensemble,
    builtin_vdp,
)

__all__ = ["SimulationConfig", "McSettings", "parse_config", "build_model", "MODEL_NAMES"]

MODEL_NAMES = ("vdp", "ilo2", "ring3")

_VDP_FIELDS = ("l", "c", "g0", "g1", "g3", "noise_power")

# repository defaults for the coupled demos
_ILO2_UNITS = (
    VdpParams(g1=1.2, noise_power=5e-4),
    VdpParams(g1=1.25, g3=0.25 / 3.0, noise_power=5e-2),
)
_RING3_UNITS = (
    VdpParams(g1=1.2, g3=0.2 / 3.0),
    VdpParams(g1=1.22, g3=0.22 / 3.0),
    VdpParams(g1=1.24, g3=0.24 / 3.0),
)
_DEFAULT_SETTLE = {"vdp": 60, "ilo2": 120, "ring3": 120}


@dataclass(frozen=True)
class McSettings:
    enabled: bool = False
    n_paths: int = 16
    steps_per_period: int = 200
    duration_periods: int = 2000
    seed: int = 0x5EED
    window: int = 0
    store_every: int = 1


@dataclass(frozen=True)
class SimulationConfig:
    model_name: str
    model_params: dict
    sweep_start: float
    sweep_stop: float
    sweep_kind: str
    sweep_points: int
    nf: int
    noise_nodes: tuple[str, ...]
    nu_list: tuple[int, ...]
    k: int
    pss_m: int
    pss_tol: float
    t0_guess: float | None
    x0: np.ndarray | None
    settle_periods: int
    mc: McSettings
    output_dir: Path


def _unit_params(cfg_items: dict, defaults: tuple[VdpParams, ...]):
    units = []
    for j, base in enumerate(defaults):
        kw = {}
        for f in _VDP_FIELDS:
            key = f"unit{j + 1}_{f}"
            if key in cfg_items:
                kw[f] = float(cfg_items[key])
        units.append(
            VdpParams(**{**{f: getattr(base, f) for f in _VDP_FIELDS}, **kw})
        )
    return units


def build_model(name: str, params: dict):
    """Instantiate a built-in model; returns (model, meta, guess, settle_periods)."""
    if name == "vdp":
        kw = {f: float(params[f]) for f in _VDP_FIELDS if f in params}
        p = VdpParams(**kw)
        model = builtin_vdp(p)
        meta = EnsembleMeta(k=1, observation_nodes=("vout",))
        guess = {"x0": p.initial_guess(), "t0_guess": p.period_estimate()}
    elif name == "ilo2":
        units = _unit_params(params, _ILO2_UNITS)
        gm = float(params.get("gm", 0.02))
        model, meta = builtin_coupled_ensemble(units, CouplingSpec.unilateral(gm))
        guess = {
            "x0": np.concatenate([u.initial_guess() for u in units]),
            "t0_guess": units[0].period_estimate(),
        }
    elif name == "ring3":
        units = _unit_params(params, _RING3_UNITS)
        rc = float(params.get("rc", 50.0))
        model, meta = builtin_coupled_ensemble(units, CouplingSpec.bilateral(rc))
        guess = {
            "x0": np.concatenate([u.initial_guess() for u in units]),
            "t0_guess": units[0].period_estimate(),
        }
    else:
        raise ConfigurationError(
            f"unknown model {name!r}; built-ins: {', '.join(MODEL_NAMES)}"
        )
    return model, meta, guess, _DEFAULT_SETTLE[name]


def _get(cfg, section, key, fallback=None):
    if cfg.has_option(section, key):
        value = cfg.get(section, key).strip()
        return value if value else fallback
    return fallback


def parse_config(path) -> SimulationConfig:
    """Parse and fully validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cfg.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc

    name = _get(cfg, "model", "name")
    if name is None:
        raise ConfigurationError("missing [model] name")
    params = dict(cfg.items("model")) if cfg.has_section("model") else {}
    params.pop("name", None)
    model, meta, _, _ = build_model(name, params)

    start = float(_get(cfg, "sweep", "start", "1e-4"))
    stop = float(_get(cfg, "sweep", "stop", "1e-1"))
    kind = _get(cfg, "sweep", "kind", "log")
    points = int(_get(cfg, "sweep", "points", "10"))
    if start <= 0:
        raise ConfigurationError("sweep start must be positive")
    if start >= stop:
        raise ConfigurationError(f"sweep start {start:g} must be below stop {stop:g}")
    if kind not in ("lin", "log"):
        raise ConfigurationError(f"sweep kind must be lin or log, got {kind!r}")
    min_pts = 10 if kind == "lin" else 3
    if points < min_pts:
        raise ConfigurationError(f"{kind} sweep needs at least {min_pts} points")

    nf = int(_get(cfg, "analysis", "nf", "32"))
    if nf < 16:
        raise ConfigurationError(f"nf={nf} rejected: the harmonic truncation must be >= 16")
    nodes_raw = _get(cfg, "analysis", "noise_nodes", ",".join(meta.observation_nodes))
    nodes = tuple(s.strip() for s in nodes_raw.split(",") if s.strip())
    if not nodes:
        raise ConfigurationError("noise_nodes must name at least one observation node")
    for node in nodes:
        model.node_index(node)  # raises with the candidate list
    nu_list = tuple(
        int(s) for s in _get(cfg, "analysis", "nu", "1").split(",") if s.strip()
    )
    if any(nu < 1 for nu in nu_list):
        raise ConfigurationError("harmonic indices must be >= 1")
    k = int(_get(cfg, "analysis", "k", str(meta.k)))
    if k != meta.k:
        raise ConfigurationError(
            f"configured k={k} contradicts the {name} model's unit count {meta.k}"
        )

    pss_m = int(_get(cfg, "pss", "m", "1024"))
    pss_tol = float(_get(cfg, "pss", "tol", "1e-9"))
    t0_guess = _get(cfg, "pss", "t0_guess")
    x0_raw = _get(cfg, "pss", "x0")
    x0 = None
    if x0_raw is not None:
        x0 = np.array([float(s) for s in x0_raw.split(",")])
        if x0.shape != (model.n,):
            raise ConfigurationError(
                f"x0 has {x0.size} entries, model has {model.n} states"
            )
    settle = _get(cfg, "pss", "settle_periods")

    mc = McSettings(
        enabled=cfg.getboolean("mc", "enabled", fallback=False),
        n_paths=int(_get(cfg, "mc", "n_paths", "16")),
        steps_per_period=int(_get(cfg, "mc", "steps_per_period", "200")),
        duration_periods=int(_get(cfg, "mc", "duration_periods", "2000")),
        seed=int(_get(cfg, "mc", "seed", str(0x5EED)), 0),
        window=int(_get(cfg, "mc", "window", "0")),
        store_every=int(_get(cfg, "mc", "store_every", "1")),
    )

    out_dir = Path(_get(cfg, "output", "dir", "out"))
    return SimulationConfig(
        model_name=name,
        model_params=params,
        sweep_start=start,
        sweep_stop=stop,
        sweep_kind=kind,
        sweep_points=points,
        nf=nf,
        noise_nodes=nodes,
        nu_list=nu_list,
        k=k,
        pss_m=pss_m,
        pss_tol=pss_tol,
        t0_guess=float(t0_guess) if t0_guess is not None else None,
        x0=x0,
        settle_periods=int(settle) if settle is not None else -1,
        mc=mc,
        output_dir=out_dir,
    )
