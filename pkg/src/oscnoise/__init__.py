"""Noise spectra of free-running and coupled autonomous oscillators.

Pipeline: periodic steady state (shooting) -> Floquet decomposition ->
noise operators -> phase/amplitude/cross spectra, validated by an
independent Monte-Carlo path.
"""

from .errors import OscNoiseError
from .floquet import FloquetSet, floquet_decompose
from .models import (
    CircuitModel,
    CouplingSpec,
    EnsembleMeta,
    VDP_NORMALIZED,
    VDP_RF,
    VdpParams,
    builtin_coupled_ensemble,
    builtin_vdp,
    eval_jacobians,
    eval_residual,
)
from .montecarlo import McConfig, estimate_spectrum, simulate_sde
from .noiseops import NoiseOperators, build_operators, phase_diffusion
from .pipeline import RunSummary, emit_plot, run_pipeline
from .pss import PssSolution, pss_harmonics, solve_pss
from .spectra import (
    SpectrumDataset,
    SweepSpec,
    anoise_at,
    assemble_datasets,
    generate_sweep,
    pnoise_at,
    reduced_single_osc,
    xnoise_at,
)

__all__ = [
    "OscNoiseError",
    "CircuitModel",
    "CouplingSpec",
    "EnsembleMeta",
    "VdpParams",
    "VDP_NORMALIZED",
    "VDP_RF",
    "builtin_vdp",
    "builtin_coupled_ensemble",
    "eval_residual",
    "eval_jacobians",
    "PssSolution",
    "solve_pss",
    "pss_harmonics",
    "FloquetSet",
    "floquet_decompose",
    "NoiseOperators",
    "build_operators",
    "phase_diffusion",
    "SweepSpec",
    "SpectrumDataset",
    "generate_sweep",
    "pnoise_at",
    "anoise_at",
    "xnoise_at",
    "reduced_single_osc",
    "assemble_datasets",
    "McConfig",
    "simulate_sde",
    "estimate_spectrum",
    "RunSummary",
    "run_pipeline",
    "emit_plot",
]
