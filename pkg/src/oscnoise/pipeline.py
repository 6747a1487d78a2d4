"""Pipeline orchestration: steady state -> modes -> operators -> datasets.

Runs the three stages in order, verifies the steady state is periodic
before the mode extraction, and writes all output files atomically (a
staging directory is renamed into place only after every dataset exists,
so a failing stage leaves no partial outputs).
"""

from __future__ import annotations

import logging
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SimulationConfig, build_model
from .errors import OscNoiseError
from .floquet import floquet_decompose
from .models import CircuitModel
from .montecarlo import McConfig, estimate_spectrum, simulate_sde
from .noiseops import build_operators
from .pss import PssSolution, solve_pss, transient_settle
from .spectra import SpectrumDataset, SweepSpec, assemble_datasets, generate_sweep

__all__ = ["RunSummary", "StageError", "run_pipeline", "emit_plot"]

log = logging.getLogger("oscnoise")

_FMT = "%.16e"


class StageError(OscNoiseError):
    """Error annotated with the pipeline stage that raised it."""

    def __init__(self, stage: str, hint: str, cause: Exception):
        super().__init__(f"[{stage}] {cause} (hint: {hint})")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunSummary:
    """Quantities an engineer needs to sanity-check a run."""

    model_name: str
    period: float
    omega0: float
    c: float
    k: int
    L: int
    exponents: np.ndarray
    carrier_power: dict
    files: tuple[str, ...]

    def pretty(self) -> str:
        lines = [
            f"model           : {self.model_name}",
            f"period T0       : {self.period:.9e} s",
            f"omega0          : {self.omega0:.9e} rad/s",
            f"phase diffusion : c = {self.c:.6e} s",
            f"ensemble size k : {self.k}",
            f"retained modes  : L = {self.L}",
        ]
        for i, mu in enumerate(self.exponents):
            lines.append(f"  mu_{i + 1} = {mu.real:+.6e} {mu.imag:+.6e}j  1/s")
        for node, pw in self.carrier_power.items():
            lines.append(f"carrier power [{node}] = {pw:.6e}")
        lines.append("files: " + ", ".join(self.files))
        return "\n".join(lines)


def _stage(name, hint):
    class _Ctx:
        def __enter__(self):
            log.info("stage %s", name)
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, Exception):
                raise StageError(name, hint, exc) from exc
            return False

    return _Ctx()


def run_pipeline(
    config: SimulationConfig,
    mc: bool | None = None,
    nodes: tuple[str, ...] | None = None,
    out_dir: Path | None = None,
    plot: bool = False,
):
    """Execute the full analysis; returns (datasets, summary).

    ``mc``, ``nodes`` and ``out_dir`` override the corresponding config
    entries (command-line flags).
    """
    with _stage("model", "check the [model] section parameters"):
        model, meta, guess, settle_default = build_model(
            config.model_name, config.model_params
        )
        obs_nodes = nodes if nodes else config.noise_nodes
        node_idx = {nd: model.node_index(nd) for nd in obs_nodes}

    with _stage("pss", "adjust x0/t0_guess or raise settle_periods"):
        x0 = config.x0 if config.x0 is not None else guess["x0"]
        t0_guess = config.t0_guess if config.t0_guess is not None else guess["t0_guess"]
        settle = config.settle_periods if config.settle_periods >= 0 else settle_default
        if settle > 0:
            x0 = transient_settle(model, x0, settle * t0_guess, steps_per_unit=16)
        pss = solve_pss(model, {"x0": x0, "t0_guess": t0_guess},
                        m=config.pss_m, tol=config.pss_tol, nf=config.nf)
        if pss.defect > config.pss_tol:
            raise OscNoiseError(
                f"steady state failed the periodicity check: defect {pss.defect:.3g}"
            )

    with _stage("floquet", "raise the grid size m or inspect the mode table"):
        fset = floquet_decompose(model, pss, k=config.k, nf=config.nf)

    with _stage("operators", "check observation nodes carry the requested harmonic"):
        ops = {}
        for nu in config.nu_list:
            for nd in obs_nodes:
                ops[(nd, nu)] = build_operators(fset, pss, nd, node_idx[nd], nu, config.k)

    with _stage("spectra", "check the sweep specification"):
        sweep = SweepSpec(config.sweep_start, config.sweep_stop,
                          config.sweep_kind, config.sweep_points)
        freqs = generate_sweep(sweep)
        datasets = []
        for nu in config.nu_list:
            by_node = {nd: ops[(nd, nu)] for nd in obs_nodes}
            datasets.extend(assemble_datasets(obs_nodes, freqs, by_node, fset, config.k))

    mc_enabled = config.mc.enabled if mc is None else mc
    mc_overlays = {}
    if mc_enabled:
        with _stage("montecarlo", "reduce duration_periods or n_paths"):
            cfg = McConfig(
                n_paths=config.mc.n_paths,
                dt=pss.period / config.mc.steps_per_period,
                duration=config.mc.duration_periods * pss.period,
                seed=config.mc.seed,
                window=config.mc.window,
                store_every=config.mc.store_every,
            )
            band = (
                max(2.0 / cfg.duration, config.sweep_start),
                min(config.sweep_stop, 0.2 / (cfg.dt * cfg.store_every)),
            )
            for nd in obs_nodes:
                series = simulate_sde(model, pss, cfg, node=node_idx[nd])
                est = estimate_spectrum(
                    series, cfg.dt * cfg.store_every, 1.0 / pss.period,
                    nu=1, window=config.mc.window, band=band,
                )
                mc_overlays[nd] = est

    target = Path(out_dir) if out_dir is not None else config.output_dir
    with _stage("output", "check the output directory is writable"):
        files = _write_outputs(target, config.model_name, pss, fset, datasets, mc_overlays)
        if plot:
            files += emit_plot(datasets, target, mc_overlays)

    summary = RunSummary(
        model_name=config.model_name,
        period=pss.period,
        omega0=pss.omega0,
        c=next(iter(ops.values())).c,
        k=config.k,
        L=fset.L,
        exponents=fset.exponents,
        carrier_power={
            f"{nd}@{nu}": ops[(nd, nu)].carrier_power
            for nu in config.nu_list for nd in obs_nodes
        },
        files=files,
    )
    return datasets, summary


def _write_outputs(out_dir, model_name, pss, fset, datasets, mc_overlays):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".oscnoise-", dir=out_dir))
    names = []
    try:
        # steady-state trajectory
        pss_name = f"{model_name}.pss.csv"
        header = "t," + ",".join(f"x_{i + 1}" for i in range(pss.n))
        np.savetxt(staging / pss_name, np.column_stack([pss.grid, pss.states]),
                   delimiter=",", header=header, comments="", fmt=_FMT)
        names.append(pss_name)

        # mode table
        flq_name = f"{model_name}.floquet.csv"
        with open(staging / flq_name, "w") as fh:
            fh.write("i,re_mu,im_mu,abs_lambda,retained\n")
            for i, lam in enumerate(fset.multipliers):
                if abs(lam) > 0.0:
                    mu = np.log(lam) / fset.period
                    re, im = mu.real, mu.imag
                else:
                    re, im = -np.inf, 0.0
                retained = 1 if i < fset.L else 0
                fh.write(f"{i + 1},{re:.16e},{im:.16e},{abs(lam):.16e},{retained}\n")
        names.append(flq_name)

        for ds in datasets:
            stem = ds.node if ds.nu == 1 else f"{ds.node}.h{ds.nu}"
            pn = f"{stem}.pn.csv"
            np.savetxt(staging / pn, np.column_stack([ds.freqs, ds.pnoise_dbc]),
                       delimiter=",", header="f_offset_hz,pnoise_dbc", comments="", fmt=_FMT)
            an = f"{stem}.an.csv"
            np.savetxt(staging / an, np.column_stack([ds.freqs, ds.anoise_dbc]),
                       delimiter=",", header="f_offset_hz,anoise_dbc", comments="", fmt=_FMT)
            xn = f"{stem}.xn.csv"
            np.savetxt(staging / xn,
                       np.column_stack([ds.freqs, ds.xnoise_signed, ds.xnoise_db]),
                       delimiter=",", header="f_offset_hz,xnoise_signed,xnoise_db",
                       comments="", fmt=_FMT)
            names += [pn, an, xn]

        for nd, est in mc_overlays.items():
            mc_name = f"{nd}.mc.csv"
            np.savetxt(staging / mc_name,
                       np.column_stack([est.offsets, est.density_dbc]),
                       delimiter=",", header="f_offset_hz,pnoise_dbc", comments="", fmt=_FMT)
            names.append(mc_name)

        for nm in names:
            (staging / nm).replace(out_dir / nm)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return tuple(names)


def emit_plot(datasets, out_dir, mc_overlays=None):
    """Write a gnuplot script and an SVG figure of all spectra.

    Log-frequency x axis, dBc y axis; the first node is drawn dashed and
    the rest solid; Monte-Carlo overlays are dashed-dotted.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mc_overlays = mc_overlays or {}

    gp_lines = [
        "set logscale x",
        'set xlabel "offset frequency (Hz)"',
        'set ylabel "dBc (1 Hz)"',
        "set grid",
        'set datafile separator ","',
        "set key outside",
    ]
    plots = []
    first_node = datasets[0].node if datasets else None
    for ds in datasets:
        stem = ds.node if ds.nu == 1 else f"{ds.node}.h{ds.nu}"
        dash = "dashtype 2" if ds.node == first_node and len(datasets) > 1 else ""
        plots.append(f"'{stem}.pn.csv' using 1:2 skip 1 with lines {dash} title '{stem} pn'")
        if np.all(~np.isfinite(ds.anoise_dbc)):
            gp_lines.append(f"# note: {stem} amplitude spectrum is empty (no amplitude modes)")
        else:
            plots.append(f"'{stem}.an.csv' using 1:2 skip 1 with lines {dash} title '{stem} an'")
        plots.append(f"'{stem}.xn.csv' using 1:3 skip 1 with lines {dash} title '{stem} xn'")
    for nd in mc_overlays:
        plots.append(f"'{nd}.mc.csv' using 1:2 skip 1 with lines dashtype 4 title '{nd} mc'")
    gp_lines.append("plot \\\n  " + ", \\\n  ".join(plots))
    gp_path = out_dir / "spectra.gp"
    gp_path.write_text("\n".join(gp_lines) + "\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for ds in datasets:
        stem = ds.node if ds.nu == 1 else f"{ds.node}.h{ds.nu}"
        style = "--" if ds.node == first_node and len(datasets) > 1 else "-"
        ax.semilogx(ds.freqs, ds.pnoise_dbc, style, label=f"{stem} pn")
        if not np.all(~np.isfinite(ds.anoise_dbc)):
            ax.semilogx(ds.freqs, ds.anoise_dbc, style, alpha=0.7, label=f"{stem} an")
        ax.semilogx(ds.freqs, ds.xnoise_db, style, alpha=0.4, label=f"{stem} xn")
    for nd, est in mc_overlays.items():
        ax.semilogx(est.offsets, est.density_dbc, "-.", alpha=0.8, label=f"{nd} mc")
    ax.set_xlabel("offset frequency (Hz)")
    ax.set_ylabel("dBc (1 Hz)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    svg_path = out_dir / "spectra.svg"
    fig.savefig(svg_path)
    plt.close(fig)
    return (gp_path.name, svg_path.name)
