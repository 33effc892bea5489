"""Experiment pipeline behind the command line: generate, fit, summarize.

Output layout below the output directory::

    run_config.ini
    datasets/{local_01..local_11,wide}.csv|.json, datasets/manifest.json
    fits/<name>_chain.csv|.json, fits/<name>_mle.json
    summary/table.txt, summary/table.csv, summary/histograms/*.csv
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bayes, frequentist
from .config import ExperimentConfig, dump_config
from .excitation import calibrate_current_amplitude, generate_dataset, load_dataset, save_dataset
from .ioutil import atomic_write_text, format_csv
from .theta import REPORT_NAMES

log = logging.getLogger("spme_ident")

# named random sub-streams
STREAMS = {"dataset": 1, "chain": 2, "mle_init": 3}
WIDE_INDEX = 100


def substream_seed(master: int, stream: str, index: int) -> int:
    seq = np.random.SeedSequence([int(master), STREAMS[stream], int(index)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class DatasetJob:
    name: str
    index: int           # SoC point, or WIDE_INDEX
    wide: bool


def dataset_jobs(cfg: ExperimentConfig) -> list:
    jobs = []
    if cfg.run_local():
        jobs += [DatasetJob(f"local_{p:02d}", p, False) for p in sorted(set(cfg.points))]
    if cfg.run_wide():
        jobs.append(DatasetJob("wide", WIDE_INDEX, True))
    return jobs


def _paths(out: Path):
    return out / "datasets", out / "fits", out / "summary"


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -------------------------------------------------------------------- generate

def _generate_one(args):
    cfg, job, out = args
    params = cfg.params()
    truth = cfg.truth(params)
    if job.wide:
        signal = cfg.wide_signal()
        point = cfg.wide.start_point
        meta = {"kind": "wide", "point": point}
    else:
        point = job.index
        amplitude = calibrate_current_amplitude(cfg.local.target_amplitude, point, params,
                                                truth, cfg.local_signal(1.0), cfg.node_counts)
        signal = cfg.local_signal(amplitude)
        meta = {"kind": "local", "point": point, "current_amplitude": amplitude}
    ds = generate_dataset(signal, point, truth, params, cfg.noise_percent,
                          substream_seed(cfg.seed, "dataset", job.index),
                          response_amplitude=cfg.reference_amplitude,
                          node_counts=cfg.node_counts, label=job.name, metadata=meta)
    csv_path, json_path = save_dataset(ds, Path(out) / "datasets" / job.name)
    log.info("wrote %s", csv_path)
    return {"name": job.name, "kind": meta["kind"], "point": point,
            "x_n": ds.x_n0, "x_p": ds.x_p0, "seed": ds.seed, "sigma2": ds.sigma2,
            "n_samples": ds.n, "csv": csv_path.name, "sidecar": json_path.name}


def cmd_generate(cfg: ExperimentConfig) -> dict:
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "run_config.ini", dump_config(cfg))
    entries = _map(_generate_one, [(cfg, j, str(out)) for j in dataset_jobs(cfg)], cfg.workers)
    datasets_dir = out / "datasets"
    manifest_path = datasets_dir / "manifest.json"
    previous = {}
    if manifest_path.exists():
        previous = {e["name"]: e for e in json.loads(manifest_path.read_text())["datasets"]}
    previous.update({e["name"]: e for e in entries})
    manifest = {"datasets": [previous[k] for k in sorted(previous)]}
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ------------------------------------------------------------------------- fit

class MissingDatasetError(FileNotFoundError):
    pass


def _fit_one(args):
    cfg, job, out, method = args
    out = Path(out)
    datasets_dir, fits_dir, _ = _paths(out)
    stem = datasets_dir / job.name
    for suffix in (".csv", ".json"):
        if not stem.with_suffix(suffix).exists():
            raise MissingDatasetError(f"missing dataset file {stem.with_suffix(suffix)}")
    ds = load_dataset(stem)
    params = cfg.params()
    init = cfg.wide.chain_init if job.wide else cfg.local.chain_init
    written = []
    fim_result = None
    if method in ("mle", "both") or init == "mle":
        rng = np.random.default_rng(substream_seed(cfg.seed, "mle_init", job.index))
        theta0 = frequentist.random_initial_guess(ds.theta_true, rng, cfg.mle.init_spread)
        options = frequentist.MLEOptions(cfg.mle.xatol, cfg.mle.max_evaluations, cfg.mle.fd_step)
        fim_result = frequentist.fit_mle_crlb(ds, theta0, options, params)
        if not fim_result.converged:
            log.warning("%s: MLE hit the evaluation cap; keeping best point", job.name)
        if method in ("mle", "both"):
            path = fits_dir / f"{job.name}_mle.json"
            frequentist.save_fim_result(fim_result, path)
            written.append(str(path))
    if method in ("mcmc", "both"):
        m = cfg.mcmc
        chain_cfg = bayes.ChainConfig(iterations=m.iterations, burn_in=m.burn_in,
                                      seed=substream_seed(cfg.seed, "chain", job.index),
                                      sigma0_scale=m.sigma0_scale,
                                      target_acceptance=m.target_acceptance, gamma=m.gamma,
                                      max_init_tries=m.max_init_tries)
        posterior = bayes.Posterior(ds, params=params)
        initial, factor = None, None
        if init == "mle":
            initial = fim_result.theta_mle.as_array()
            factor = frequentist.proposal_factor(fim_result)
        chain = bayes.run_chain(posterior, chain_cfg, initial=initial, initial_factor=factor,
                                dataset_label=job.name)
        chain.metadata["init"] = init
        chain.metadata["proposal"] = "crlb" if factor is not None else "sigma0"
        path = fits_dir / f"{job.name}_chain.csv"
        bayes.save_chain(chain, path)
        written.append(str(path))
        log.info("%s: acceptance %.3f", job.name, chain.acceptance_rate())
    return written


def cmd_fit(cfg: ExperimentConfig, method: str | None = None) -> list:
    method = method or cfg.method
    out = cfg.resolved_output_dir()
    jobs = dataset_jobs(cfg)
    for job in jobs:
        stem = out / "datasets" / job.name
        for suffix in (".csv", ".json"):
            if not stem.with_suffix(suffix).exists():
                raise MissingDatasetError(f"missing dataset file {stem.with_suffix(suffix)}")
    (out / "fits").mkdir(parents=True, exist_ok=True)
    results = _map(_fit_one, [(cfg, j, str(out), method) for j in jobs], cfg.workers)
    return [p for r in results for p in r]


# ------------------------------------------------------------------- summarize

class NoFitOutputsError(FileNotFoundError):
    pass


ROWS = ("theta_MMSE", "sigma_MCMC", "theta_MLE", "sigma_CRLB")


def _column_order(name):
    return (1, 0) if name == "wide" else (0, int(name.split("_")[1]))


def collect_fits(out: Path) -> dict:
    """``name -> {"chain": Chain | None, "mle": FimResult | None}``."""
    fits_dir = out / "fits"
    found = {}
    if fits_dir.is_dir():
        for p in sorted(fits_dir.glob("*_chain.csv")):
            found.setdefault(p.name[:-len("_chain.csv")], {})["chain"] = bayes.load_chain(p)
        for p in sorted(fits_dir.glob("*_mle.json")):
            found.setdefault(p.name[:-len("_mle.json")], {})["mle"] = frequentist.load_fim_result(p)
    return {k: found[k] for k in sorted(found, key=_column_order)}


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    if math.isinf(v):
        return "inf"
    a = abs(v)
    if a != 0 and (a < 1e-2 or a >= 1e4):
        return f"{v:.2e}"
    return f"{v:.2f}" if a < 100 else f"{v:.0f}"


def build_table(fits: dict, bins: int):
    """Rows (parameter x estimate) by columns (experiment)."""
    columns = list(fits)
    values = {}
    summaries = {}
    for name, entry in fits.items():
        chain = entry.get("chain")
        fim = entry.get("mle")
        col = {}
        if chain is not None:
            s = bayes.summarize(chain, bins=bins)
            summaries[name] = s
            col["theta_MMSE"] = s.report_mmse
            col["sigma_MCMC"] = s.report_std
        if fim is not None:
            col["theta_MLE"] = fim.report_theta
            col["sigma_CRLB"] = fim.sigma_crlb
        values[name] = col
    return columns, values, summaries


def render_table(columns, values, out: Path) -> str:
    header = ["Parameter", "Estimate"] + [c.replace("local_", "") if c != "wide" else "Wide"
                                          for c in columns]
    soc = {}
    for c in columns:
        meta_path = out / "datasets" / f"{c}.json"
        if meta_path.exists():
            sp = json.loads(meta_path.read_text())["soc_point"]
            soc[c] = (sp["x_n"], sp["x_p"])
    rows = [header,
            ["", "c_ss_n"] + [f"{soc[c][0]:.2f}" if c in soc else "-" for c in columns],
            ["", "c_ss_p"] + [f"{soc[c][1]:.2f}" if c in soc else "-" for c in columns]]
    for i, pname in enumerate(REPORT_NAMES):
        for j, est in enumerate(ROWS):
            cells = []
            for c in columns:
                arr = values[c].get(est)
                cells.append(_fmt(float(arr[i])) if arr is not None else "-")
            rows.append([pname if j == 0 else "", est] + cells)
    widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
    lines = ["  ".join(cell.rjust(w) if k > 1 else cell.ljust(w)
                       for k, (cell, w) in enumerate(zip(r, widths))).rstrip() for r in rows]
    note = "sigma2 in units of 1e-9 V^2; diffusivities scaled by 1e14 (D_n), 1e13 (D_p), 1e10 (D_e)"
    return "\n".join(lines + ["", note]) + "\n"


def table_csv(columns, values) -> str:
    lines = ["parameter,estimate," + ",".join(columns)]
    for i, pname in enumerate(REPORT_NAMES):
        for est in ROWS:
            cells = []
            for c in columns:
                arr = values[c].get(est)
                cells.append("" if arr is None else repr(float(arr[i])))
            lines.append(f"{pname},{est}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def write_histograms(name, summary, hist_dir: Path) -> list:
    written = []
    for pname, (counts, edges) in summary.marginals.items():
        path = hist_dir / f"{name}_{pname}.csv"
        atomic_write_text(path, format_csv(("bin_left", "bin_right", "count"),
                                           [edges[:-1], edges[1:], counts],
                                           fmt=["%.17g", "%.17g", "%d"]))
        written.append(path)
    for (a, b), (H, xe, ye) in summary.joints.items():
        ix, iy = np.meshgrid(np.arange(H.shape[0]), np.arange(H.shape[1]), indexing="ij")
        ix, iy = ix.ravel(), iy.ravel()
        path = hist_dir / f"{name}_{a}_{b}.csv"
        atomic_write_text(path, format_csv(
            (f"{a}_left", f"{a}_right", f"{b}_left", f"{b}_right", "count"),
            [xe[ix], xe[ix + 1], ye[iy], ye[iy + 1], H.ravel()],
            fmt=["%.17g"] * 4 + ["%d"]))
        written.append(path)
    return written


def cmd_summarize(cfg: ExperimentConfig, bins: int | None = None) -> Path:
    out = cfg.resolved_output_dir()
    selected = {j.name for j in dataset_jobs(cfg)}
    fits = {k: v for k, v in collect_fits(out).items() if k in selected}
    if not fits:
        raise NoFitOutputsError(f"no fit outputs under {out / 'fits'}")
    bins = bins or cfg.bins
    columns, values, summaries = build_table(fits, bins)
    summary_dir = out / "summary"
    atomic_write_text(summary_dir / "table.txt", render_table(columns, values, out))
    atomic_write_text(summary_dir / "table.csv", table_csv(columns, values))
    stats = {}
    for name, s in summaries.items():
        write_histograms(name, s, summary_dir / "histograms")
        stats[name] = s.as_dict()
    atomic_write_text(summary_dir / "chains.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return summary_dir / "table.txt"
