"""Experiment orchestration: recipes, sweeps, persistence, and plotting.

A recipe expands an :class:`ExperimentConfig` into a deterministic sequence
of jobs (channel realizations x sweep points x optimizers), collects rows in
one stable long-format schema, and writes ``results.csv`` (plus
``traces.csv`` when optimizers run) and a replay manifest.  Rerunning the
same recipe, seed, and config reproduces every output byte for byte.

Desk-scale recipes use calibrated large-scale gains (direct links 1/(2M),
surface links 1/(2M n_ref) with the aperture reference n_ref fixed across
element sweeps) so that the mean post-beamforming SNR at the base
configuration equals the swept rho/sigma^2 value; the substitution is
recorded in the manifest since absolute link gains are a free parameter of
the model.
"""

import csv
import hashlib
import json
import subprocess
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, streams
from .baselines import CANONICAL_DE, GA, RANDOM_RZF, BaselineConfig, run_baseline
from .channel import (
    Betas,
    RicianConfig,
    SystemDims,
    aggregate,
    corrupt_csi,
    gen_rayleigh,
    gen_rician,
)
from .de_opt import JOINT, PASSIVE_ONLY, OptimizerConfig, SerProblem, optimize
from .linkmath import RZF, LinkBudget, fitness_avg_ser, precode, ser_analytic, sinr_all
from .simulate import run_downlink

RESULT_FIELDS = (
    "recipe",
    "seed",
    "scheme",
    "M",
    "N",
    "K",
    "m",
    "rho_db",
    "sigma_e2",
    "S",
    "metric",
    "value",
)
TRACE_FIELDS = (
    "recipe",
    "seed",
    "scheme",
    "rho_db",
    "generation",
    "best",
    "worst",
    "mean",
    "lambda_g",
    "nfe",
)

IMPROVED_DE = "improved_de"
PASSIVE_RZF = "passive_rzf"


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings for one recipe run.

    ``snr_db`` sweeps rho/sigma^2 in dB; ``n_sweep`` (element counts),
    ``sigma_e2`` (CSI error variances), and ``specular`` (component counts)
    drive the recipes that vary those quantities.  Optimizer fields mirror
    :class:`~risbeam.de_opt.OptimizerConfig`.
    """

    recipe: str
    M: int = 16
    N: int = 32
    K: int = 4
    m: int = 16
    snr_db: tuple = (0.0, 5.0, 10.0)
    n_realizations: int = 10
    n_symbols: int = 100_000
    schemes: tuple = ("mrt", "zf", "rzf")
    channel: str = "rayleigh"
    specular: tuple = ()
    k_factor_offset_db: float = 0.0
    n_sweep: tuple = ()
    sigma_e2: tuple = ()
    optimizers: tuple = ()
    beta_mode: str = "calibrated"
    n_ref: int = 32
    pop_size: int = 40
    memory_size: int = 5
    f_init: float = 0.1
    cr_init: float = 0.9
    g_max: int = 350
    nfe_max: int = 35000
    sigma_local: float = 0.05

    def validate(self):
        if not self.snr_db:
            raise ValueError("snr_db sweep must not be empty")
        if self.n_realizations < 1:
            raise ValueError("need at least one channel realization")
        if self.channel not in ("rayleigh", "rician"):
            raise ValueError(f"unknown channel model {self.channel!r}")
        if self.beta_mode not in ("calibrated", "uniform"):
            raise ValueError(f"unknown beta mode {self.beta_mode!r}")
        SystemDims(M=self.M, N=self.N, K=self.K)

    @property
    def dims(self):
        return SystemDims(M=self.M, N=self.N, K=self.K)


def calibrated_betas(dims, n_ref=32):
    """Large-scale gains normalizing the mean aggregated-channel norm to one
    at N = n_ref: direct links carry half the power, surface links the rest."""
    return Betas(
        bs_ris=1.0,
        ris_user=np.full(dims.K, 1.0 / (2.0 * dims.M * n_ref)),
        bs_user=np.full(dims.K, 1.0 / (2.0 * dims.M)),
    )


def betas_for(cfg, dims):
    if cfg.beta_mode == "calibrated":
        return calibrated_betas(dims, cfg.n_ref)
    return Betas.uniform(dims)


def budget_for(snr_db):
    """Link budget at a swept rho/sigma^2 point: rho = pmax = 10^(dB/10)."""
    rho = 10.0 ** (snr_db / 10.0)
    return LinkBudget(rho=rho, sigma2=1.0, pmax=rho)


def subseed(seed, *tags):
    """Derived integer seed for one job, well separated across tags."""
    ss = np.random.SeedSequence((int(seed),) + tuple(int(t) for t in tags))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def _draw_channel(cfg, dims, betas, seed, s_count=None):
    if cfg.channel == "rician" or s_count is not None:
        s = cfg.specular[0] if s_count is None and cfg.specular else s_count
        s = 1 if s is None else s
        rc = RicianConfig(
            s_bs_user=s,
            s_ris_user=s,
            s_bs_ris=s,
            k_factor_offset_db=cfg.k_factor_offset_db,
        )
        return gen_rician(dims, rc, betas, seed)
    return gen_rayleigh(dims, betas, seed)


def _random_phases(dims, seed):
    rng = streams.substream(seed, streams.RANDOM_PHASES)
    return rng.uniform(-np.pi, np.pi, size=dims.N)


def _optimizer_config(cfg, seed, mode=JOINT):
    return OptimizerConfig(
        pop_size=cfg.pop_size,
        memory_size=cfg.memory_size,
        f_init=cfg.f_init,
        cr_init=cfg.cr_init,
        g_max=cfg.g_max,
        nfe_max=cfg.nfe_max,
        sigma_local=cfg.sigma_local,
        seed=seed,
        mode=mode,
        precoder=RZF,
    )


def _baseline_config(cfg, kind, seed):
    return BaselineConfig(
        kind=kind,
        pop_size=cfg.pop_size,
        g_max=cfg.g_max,
        nfe_max=cfg.nfe_max,
        de_f=cfg.f_init,
        de_cr=cfg.cr_init,
        seed=seed,
    )


def _row(cfg, seed, scheme, dims, rho_db, metric, value, sigma_e2=0.0, s_count=-1):
    return {
        "recipe": cfg.recipe,
        "seed": seed,
        "scheme": scheme,
        "M": dims.M,
        "N": dims.N,
        "K": dims.K,
        "m": cfg.m,
        "rho_db": float(rho_db),
        "sigma_e2": float(sigma_e2),
        "S": int(s_count),
        "metric": metric,
        "value": float(value),
    }


def _guard(rows, cfg, seed, dims, rho_db, job, **rowkw):
    """Run one job; on failure record an error row and keep going."""
    try:
        job()
    except Exception as exc:  # noqa: BLE001 - recorded per row by contract
        print(f"[risbeam] job failed ({cfg.recipe}, {rho_db} dB): {exc!r}", file=sys.stderr)
        rows.append(_row(cfg, seed, "error", dims, rho_db, "error", float("nan"), **rowkw))


def _run_optimizer_job(cfg, name, problem, seed):
    """Dispatch one optimizer/baseline by row name; returns (fitness, trace)."""
    if name == IMPROVED_DE:
        res = optimize(problem, _optimizer_config(cfg, seed, JOINT))
        return res.fitness, res.trace
    if name == PASSIVE_RZF:
        res = optimize(problem, _optimizer_config(cfg, seed, PASSIVE_ONLY))
        return res.fitness, res.trace
    if name in (CANONICAL_DE, GA, RANDOM_RZF):
        res = run_baseline(problem, _baseline_config(cfg, name, seed))
        return res.fitness, res.trace
    raise ValueError(f"unknown optimizer {name!r}")


# -- recipes -------------------------------------------------------------------


def _run_fig3(cfg, seed, rows, trace_rows):
    """Analytic vs Monte Carlo SER for the linear precoders, random phases."""
    dims = cfg.dims
    betas = betas_for(cfg, dims)
    for r in range(cfg.n_realizations):
        job_seed = subseed(seed, 3, r)
        ch = _draw_channel(cfg, dims, betas, job_seed)
        theta = _random_phases(dims, job_seed)
        agg = aggregate(ch, theta)
        for snr in cfg.snr_db:
            budget = budget_for(snr)
            for scheme in cfg.schemes:

                def job(scheme=scheme, snr=snr, budget=budget):
                    bf = precode(agg, scheme, budget)
                    analytic = float(
                        np.mean(ser_analytic(sinr_all(agg, bf, budget), cfg.m))
                    )
                    report = run_downlink(
                        ch, theta, bf, budget, cfg.m, cfg.n_symbols, job_seed
                    )
                    rows.append(_row(cfg, seed, scheme, dims, snr, "ser_analytic", analytic))
                    rows.append(_row(cfg, seed, scheme, dims, snr, "ser_mc", report.avg_ser))

                _guard(rows, cfg, seed, dims, snr, job)


def _run_fig5(cfg, seed, rows, trace_rows):
    """Convergence traces of the improved DE against canonical DE and GA."""
    dims = cfg.dims
    betas = betas_for(cfg, dims)
    snr = cfg.snr_db[0]
    budget = budget_for(snr)
    names = cfg.optimizers or (IMPROVED_DE, CANONICAL_DE, GA)
    for r in range(cfg.n_realizations):
        job_seed = subseed(seed, 5, r)
        ch = _draw_channel(cfg, dims, betas, job_seed)
        problem = SerProblem(ch=ch, budget=budget, m=cfg.m)
        for name in names:

            def job(name=name, problem=problem, job_seed=job_seed):
                fitness, trace = _run_optimizer_job(cfg, name, problem, job_seed)
                rows.append(_row(cfg, seed, name, dims, snr, "fitness", fitness))
                for t in trace:
                    trace_rows.append(
                        {
                            "recipe": cfg.recipe,
                            "seed": job_seed,
                            "scheme": name,
                            "rho_db": float(snr),
                            "generation": t.generation,
                            "best": t.best,
                            "worst": t.worst,
                            "mean": t.mean,
                            "lambda_g": t.lambda_g,
                            "nfe": t.nfe,
                        }
                    )

            _guard(rows, cfg, seed, dims, snr, job)


def _run_fig6(cfg, seed, rows, trace_rows):
    """Optimized average SER across the power sweep, against baselines."""
    dims = cfg.dims
    betas = betas_for(cfg, dims)
    names = cfg.optimizers or (IMPROVED_DE, RANDOM_RZF)
    for r in range(cfg.n_realizations):
        job_seed = subseed(seed, 6, r)
        ch = _draw_channel(cfg, dims, betas, job_seed)
        for snr in cfg.snr_db:
            problem = SerProblem(ch=ch, budget=budget_for(snr), m=cfg.m)
            for name in names:

                def job(name=name, problem=problem, snr=snr):
                    fitness, _ = _run_optimizer_job(cfg, name, problem, job_seed)
                    rows.append(_row(cfg, seed, name, dims, snr, "fitness", fitness))

                _guard(rows, cfg, seed, dims, snr, job)


def _run_fig7(cfg, seed, rows, trace_rows):
    """Average SER against the number of surface elements (RZF, random phases)."""
    snr = cfg.snr_db[0]
    budget = budget_for(snr)
    for n_el in cfg.n_sweep or (0, 32, 64, 128):
        dims = SystemDims(M=cfg.M, N=int(n_el), K=cfg.K)
        betas = betas_for(cfg, dims)
        for r in range(cfg.n_realizations):
            job_seed = subseed(seed, 7, r)

            def job(dims=dims, betas=betas, job_seed=job_seed):
                ch = _draw_channel(cfg, dims, betas, job_seed)
                agg = aggregate(ch, _random_phases(dims, job_seed))
                bf = precode(agg, RZF, budget)
                value = fitness_avg_ser(agg, bf, budget, cfg.m)
                rows.append(_row(cfg, seed, RZF, dims, snr, "ser_analytic", value))

            _guard(rows, cfg, seed, dims, snr, job)


def _run_fig8_csi(cfg, seed, rows, trace_rows):
    """SER degradation under channel-estimate errors of growing variance."""
    dims = cfg.dims
    betas = betas_for(cfg, dims)
    snr = cfg.snr_db[0]
    budget = budget_for(snr)
    for sig in cfg.sigma_e2 or (0.0,):
        for r in range(cfg.n_realizations):
            job_seed = subseed(seed, 8, r)

            def job(sig=sig, job_seed=job_seed):
                ch = _draw_channel(cfg, dims, betas, job_seed)
                agg_true = aggregate(ch, _random_phases(dims, job_seed))
                agg_est = corrupt_csi(agg_true, sig, job_seed)
                bf = precode(agg_est, RZF, budget)
                value = fitness_avg_ser(agg_true, bf, budget, cfg.m)
                rows.append(
                    _row(cfg, seed, RZF, dims, snr, "ser_analytic", value, sigma_e2=sig)
                )

            _guard(rows, cfg, seed, dims, snr, job, sigma_e2=sig)


def _run_fig9_rician(cfg, seed, rows, trace_rows):
    """Optimized SER against the number of specular components per link."""
    dims = cfg.dims
    betas = betas_for(cfg, dims)
    snr = cfg.snr_db[0]
    budget = budget_for(snr)
    for s_count in cfg.specular or (0, 1):
        for r in range(cfg.n_realizations):
            job_seed = subseed(seed, 9, r)

            def job(s_count=int(s_count), job_seed=job_seed):
                ch = _draw_channel(cfg, dims, betas, job_seed, s_count=s_count)
                problem = SerProblem(ch=ch, budget=budget, m=cfg.m)
                fitness, _ = _run_optimizer_job(cfg, PASSIVE_RZF, problem, job_seed)
                rows.append(
                    _row(cfg, seed, PASSIVE_RZF, dims, snr, "fitness", fitness, s_count=s_count)
                )

            _guard(rows, cfg, seed, dims, snr, job, s_count=int(s_count))


def _run_table1(cfg, seed, rows, trace_rows):
    """Joint active/passive design against passive-only with RZF precoding."""
    dims = cfg.dims
    betas = betas_for(cfg, dims)
    for snr in cfg.snr_db:
        budget = budget_for(snr)
        for r in range(cfg.n_realizations):
            job_seed = subseed(seed, 10, r)
            ch = _draw_channel(cfg, dims, betas, job_seed)
            problem = SerProblem(ch=ch, budget=budget, m=cfg.m)
            for name in (IMPROVED_DE, PASSIVE_RZF):

                def job(name=name, problem=problem, snr=snr, job_seed=job_seed):
                    fitness, _ = _run_optimizer_job(cfg, name, problem, job_seed)
                    label = "joint" if name == IMPROVED_DE else "passive_rzf"
                    rows.append(_row(cfg, seed, label, dims, snr, "fitness", fitness))

                _guard(rows, cfg, seed, dims, snr, job)


@dataclass(frozen=True)
class Recipe:
    name: str
    description: str
    defaults: ExperimentConfig
    runner: object


def _recipes():
    table = {}

    def add(name, description, runner, **kw):
        table[name] = Recipe(
            name=name,
            description=description,
            defaults=ExperimentConfig(recipe=name, **kw),
            runner=runner,
        )

    add(
        "fig3",
        "analytic vs Monte Carlo SER for MRT/ZF/RZF with random phases",
        _run_fig3,
        K=4,
        snr_db=tuple(float(x) for x in range(0, 21, 2)),
    )
    add(
        "fig5",
        "convergence traces: improved DE vs canonical DE vs GA",
        _run_fig5,
        K=2,
        snr_db=(5.0,),
    )
    add(
        "fig6",
        "optimized SER vs power: improved DE against the random-phase RZF draw",
        _run_fig6,
        K=2,
        snr_db=(0.0, 5.0, 10.0),
    )
    add(
        "fig7",
        "SER vs number of surface elements (RZF, random phases)",
        _run_fig7,
        K=4,
        snr_db=(10.0,),
        n_sweep=(0, 32, 64, 128),
    )
    add(
        "fig8_csi",
        "SER under channel-estimate errors of growing variance",
        _run_fig8_csi,
        K=4,
        snr_db=(10.0,),
        sigma_e2=(0.000625, 0.003125, 0.00625),
    )
    add(
        "fig9_rician",
        "optimized SER vs number of specular components (Rician fading)",
        _run_fig9_rician,
        K=2,
        snr_db=(10.0,),
        channel="rician",
        specular=(0, 1, 3, 5),
    )
    add(
        "table1",
        "joint active/passive optimization vs passive-only RZF",
        _run_table1,
        K=2,
        snr_db=(5.0, 15.0),
    )
    add(
        "fig3_paper",
        "paper-scale fig3 (M=100, N=256, K=10); expect a long runtime",
        _run_fig3,
        M=100,
        N=256,
        K=10,
        n_ref=256,
        snr_db=tuple(float(x) for x in range(0, 21, 2)),
    )
    add(
        "fig6_paper",
        "paper-scale optimizer comparison (M=100, N=256, K=2); expect hours",
        _run_fig6,
        M=100,
        N=256,
        K=2,
        n_ref=256,
        snr_db=(0.0, 10.0, 20.0),
    )
    return table


RECIPES = _recipes()


def list_recipes():
    return [(r.name, r.description) for r in RECIPES.values()]


def resolve_config(recipe, overrides=None):
    """Recipe defaults merged with override keys (config file and/or CLI)."""
    if recipe not in RECIPES:
        raise KeyError(f"unknown recipe {recipe!r}; see list-recipes")
    cfg = RECIPES[recipe].defaults
    if overrides:
        fields = {f for f in cfg.__dataclass_fields__}
        flat = dict(overrides)
        nested = flat.pop("optimizer", {})
        flat.update(nested)
        unknown = set(flat) - fields
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        for key in ("snr_db", "schemes", "specular", "n_sweep", "sigma_e2", "optimizers"):
            if key in flat and isinstance(flat[key], list):
                flat[key] = tuple(flat[key])
        cfg = replace(cfg, **flat)
    cfg.validate()
    return cfg


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
            check=False,
        )
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _config_record(cfg):
    rec = asdict(cfg)
    for key, value in rec.items():
        if isinstance(value, tuple):
            rec[key] = list(value)
    return rec


def write_manifest(cfg, seed, out_dir):
    record = _config_record(cfg)
    blob = json.dumps(record, sort_keys=True).encode()
    manifest = {
        "recipe": cfg.recipe,
        "seed": int(seed),
        "config": record,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "package_version": __version__,
        "git_describe": _git_describe(),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def run_experiment(cfg, seed, out_dir):
    """Run one recipe and persist results, traces, and the replay manifest.

    Per-job failures are recorded as metric="error" rows (value NaN, message
    on stderr) and the run continues.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, trace_rows = [], []
    RECIPES[cfg.recipe].runner(cfg, seed, rows, trace_rows)
    paths = []
    results_path = out / "results.csv"
    _write_csv(results_path, RESULT_FIELDS, rows)
    paths.append(results_path)
    if trace_rows:
        traces_path = out / "traces.csv"
        _write_csv(traces_path, TRACE_FIELDS, trace_rows)
        paths.append(traces_path)
    paths.append(write_manifest(cfg, seed, out))
    return paths


# -- plotting ------------------------------------------------------------------


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _sweep_column(rows):
    """Pick the x-axis: the sweep column with the most distinct values."""
    candidates = ("rho_db", "N", "sigma_e2", "S")
    counts = {c: len({row[c] for row in rows}) for c in candidates}
    best = max(candidates, key=lambda c: counts[c])
    return best if counts[best] > 1 else "rho_db"


def emit_plots(out_dir):
    """Render SER and convergence plots (deterministic SVG) from saved CSVs.

    Returns the list of written files; raises ``FileNotFoundError`` when the
    directory holds no results to plot.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "risbeam"

    out = Path(out_dir)
    written = []
    results_path = out / "results.csv"
    rows = _read_csv(results_path) if results_path.exists() else []
    rows = [r for r in rows if r["metric"] != "error"]
    if rows:
        xcol = _sweep_column(rows)
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        series = {}
        for row in rows:
            key = (row["scheme"], row["metric"])
            series.setdefault(key, {}).setdefault(float(row[xcol]), []).append(
                float(row["value"])
            )
        for (scheme, metric), per_x in sorted(series.items()):
            xs = sorted(per_x)
            ys = [np.mean(per_x[x]) for x in xs]
            style = "--o" if metric == "ser_mc" else "-s"
            ax.semilogy(xs, np.maximum(ys, 1e-300), style, label=f"{scheme} {metric}")
        ax.set_xlabel(xcol)
        ax.set_ylabel("average SER")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        recipe = rows[0]["recipe"]
        path = out / f"{recipe}_ser.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    traces_path = out / "traces.csv"
    trows = _read_csv(traces_path) if traces_path.exists() else []
    if trows:
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        series = {}
        for row in trows:
            gen = int(row["generation"])
            bucket = series.setdefault(row["scheme"], {}).setdefault(gen, ([], [], []))
            bucket[0].append(float(row["best"]))
            bucket[1].append(float(row["worst"]))
            bucket[2].append(float(row["mean"]))
        for scheme, per_gen in sorted(series.items()):
            gens = sorted(per_gen)
            for idx, label in ((0, "best"), (1, "worst"), (2, "avg")):
                ys = [np.mean(per_gen[g][idx]) for g in gens]
                ax.plot(gens, ys, label=f"{scheme} {label}", alpha=0.8)
        ax.set_xlabel("generation")
        ax.set_ylabel("fitness (average SER)")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        recipe = trows[0]["recipe"]
        path = out / f"{recipe}_convergence.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    if not written:
        raise FileNotFoundError(f"nothing to plot in {out_dir}")
    return written
