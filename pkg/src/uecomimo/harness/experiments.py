"""Monte-Carlo experiment drivers.

Each driver maps a :class:`ScenarioSpec` to an :class:`ExperimentOutput`.
Trials are independent: every random quantity in trial ``t`` comes from a
generator derived from ``(seed, t, ...)``, so results do not depend on the
number of worker threads or on scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from uecomimo import __version__
from uecomimo.channel import derive_rng, fraunhofer_distance
from uecomimo.composite import PhaseConfig, RelayParams, Structure, build_h2, relay_s2, stack_channel
from uecomimo.harness.scenario import ScenarioSpec, TrialChannels, draw_trial, geometry, scaled
from uecomimo.metrics import average_snr, layer_se, rank_indicator, spectral_efficiency, throughput
from uecomimo.optimize import (
    Order,
    bg_optimize,
    closed_form_structure2,
    effective_first_hop,
    joint_es,
    relay_oracle,
    ris_oracle,
    separate_es,
)

HIST_BIN_WIDTH = 0.05
MATCH_RTOL = 1e-9
CDF_LEVELS = np.linspace(0.0, 1.0, 21)
# spawn-key offset for optimizer streams, clear of the link ids
OPT_STREAM = 100


@dataclass
class ExperimentOutput:
    """Per-trial records plus derived aggregates and plot tables."""

    name: str
    spec: ScenarioSpec
    columns: list
    records: list  # list of dicts keyed by ``columns``
    aggregates: dict = field(default_factory=dict)
    plotdata: dict = field(default_factory=dict)  # name -> (columns, rows)
    metadata: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.records])


def _metadata(spec: ScenarioSpec) -> dict:
    return {"seed": spec.seed, "trials": spec.trials, "toolkit_version": __version__}


def map_trials(fn, trials: int, threads: int = 1) -> list:
    """``[fn(t) for t in range(trials)]``, optionally on a thread pool (order kept)."""
    if threads <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def _is_match(a: float, b: float) -> bool:
    return abs(a - b) <= MATCH_RTOL * max(1.0, abs(a))


def _relay_params(spec: ScenarioSpec, structure: Structure) -> RelayParams:
    return RelayParams(rho=spec.rho, structure=structure, power_normalization=spec.power_normalization)


def _histogram_counts(values: np.ndarray) -> np.ndarray:
    return np.bincount(np.floor(np.asarray(values) / HIST_BIN_WIDTH).astype(np.int64))


def _add_counts(total: np.ndarray, extra: np.ndarray) -> np.ndarray:
    n = max(len(total), len(extra))
    out = np.zeros(n, dtype=np.int64)
    out[: len(total)] += total
    out[: len(extra)] += extra
    return out


def replay_se(spec: ScenarioSpec, trial: int, structure, label: str, snr_db: float | None = None) -> float:
    """SE of the stacked channel for a stored config label, regenerated from the trial seed."""
    structure = Structure.parse(structure)
    ch = scaled(draw_trial(spec, trial), spec.snr_db if snr_db is None else snr_db)
    cfg = PhaseConfig.from_label(label, spec.q)
    if cfg.kind is not structure:
        raise ValueError(f"label {label!r} is not a {structure.value} config")
    h2 = build_h2(ch.links.hp, ch.links.hc, cfg, _relay_params(spec, structure))
    return spectral_efficiency(stack_channel(ch.links.h1, h2))


# ---------------------------------------------------------------- histogram


def run_histogram_experiment(spec: ScenarioSpec, threads: int = 1) -> ExperimentOutput:
    """Joint ES against both separate-ES orders for Structure 2, per channel draw."""
    params = _relay_params(spec, Structure.S2)
    q, nc = spec.q, spec.nc
    geo = geometry(spec)

    def one(trial):
        ch = scaled(draw_trial(spec, trial, geo), spec.snr_db).links
        oracle = relay_oracle(ch.h1, ch.hc, ch.hp, params, Structure.S2, q)
        joint = joint_es(oracle, q, nc, Structure.S2, budget=spec.max_evaluations, keep_values=True)
        sep_t = separate_es(oracle.clone(), q, nc, Order.T_FIRST, budget=spec.max_evaluations)
        sep_r = separate_es(oracle.clone(), q, nc, Order.R_FIRST, budget=spec.max_evaluations)
        record = {
            "trial": trial,
            "joint_opt": joint.best_se,
            "sep_t_first_opt": sep_t.best_se,
            "sep_r_first_opt": sep_r.best_se,
            "match_t_first": int(_is_match(joint.best_se, sep_t.best_se)),
            "match_r_first": int(_is_match(joint.best_se, sep_r.best_se)),
            "joint_config": joint.best_config.label(),
            "sep_t_first_config": sep_t.best_config.label(),
            "sep_r_first_config": sep_r.best_config.label(),
            "evaluations": joint.evaluations + sep_t.evaluations + sep_r.evaluations,
        }
        counts = (
            _histogram_counts(joint.explored),
            _histogram_counts(sep_t.explored),
            _histogram_counts(sep_r.explored),
        )
        return record, counts

    results = map_trials(one, spec.trials, threads)
    records = [r for r, _ in results]
    hist = [np.zeros(0, dtype=np.int64)] * 3
    for _, counts in results:
        hist = [_add_counts(h, c) for h, c in zip(hist, counts)]
    n_bins = max(len(h) for h in hist)
    hist = [_add_counts(h, np.zeros(n_bins, dtype=np.int64)) for h in hist]
    first = int(min(np.flatnonzero(h)[0] for h in hist if h.any()))
    rows = [
        [b * HIST_BIN_WIDTH, (b + 1) * HIST_BIN_WIDTH, int(hist[0][b]), int(hist[1][b]), int(hist[2][b])]
        for b in range(first, n_bins)
    ]
    columns = list(records[0])
    out = ExperimentOutput("histogram", spec, columns, records, metadata=_metadata(spec))
    out.aggregates = {
        "mean_joint_opt": float(np.mean(out.column("joint_opt"))),
        "mean_sep_t_first_opt": float(np.mean(out.column("sep_t_first_opt"))),
        "mean_sep_r_first_opt": float(np.mean(out.column("sep_r_first_opt"))),
        "match_rate_t_first": float(np.mean(out.column("match_t_first"))),
        "match_rate_r_first": float(np.mean(out.column("match_r_first"))),
        "histogram_bin_width": HIST_BIN_WIDTH,
    }
    out.plotdata["histogram"] = (["bin_low", "bin_high", "joint", "sep_t_first", "sep_r_first"], rows)
    return out


# --------------------------------------------------------------- trajectory


def top_percent(population: np.ndarray, se) -> np.ndarray:
    """Share of ``population`` strictly better than ``se``, in percent."""
    pop = np.sort(np.asarray(population))
    se = np.atleast_1d(np.asarray(se, dtype=float))
    better = len(pop) - np.searchsorted(pop, se, side="right")
    return 100.0 * better / len(pop)


def run_trajectory_experiment(spec: ScenarioSpec, threads: int = 1) -> ExperimentOutput:
    """Rank every BG iterate against the configurations separate ES explores.

    For each order the reference population is that order's separate-ES
    enumeration (2 q^nc values); the optimum is the best of the population and
    the BG iterate.
    """
    params = _relay_params(spec, Structure.S2)
    q, nc = spec.q, spec.nc
    geo = geometry(spec)
    orders = (Order.T_FIRST, Order.R_FIRST)
    n_iter = 2 * nc * spec.rounds

    def one(trial):
        ch = scaled(draw_trial(spec, trial, geo), spec.snr_db).links
        oracle = relay_oracle(ch.h1, ch.hc, ch.hp, params, Structure.S2, q)
        record = {"trial": trial}
        for k, order in enumerate(orders):
            pop = separate_es(oracle.clone(), q, nc, order, budget=spec.max_evaluations)
            bg = bg_optimize(oracle.clone(), q, nc, Structure.S2, order, spec.rounds, spec.rms_trials,
                             rng=derive_rng(spec.seed, trial, OPT_STREAM + k))
            se = np.array([s for _, s in bg.trajectory])
            best = max(pop.best_se, float(se.max()))
            tops = top_percent(pop.explored, se)
            gaps = 100.0 * np.maximum(best - se, 0.0) / best
            tag = order.value
            record[f"{tag}.sep_opt"] = pop.best_se
            record[f"{tag}.bg_se"] = bg.best_se
            record[f"{tag}.bg_config"] = bg.best_config.label()
            record[f"{tag}.evaluations"] = bg.evaluations
            for i in range(n_iter + 1):
                record[f"{tag}.top@{i}"] = float(tops[i])
            for i in range(n_iter + 1):
                record[f"{tag}.gap@{i}"] = float(gaps[i])
        return record

    records = map_trials(one, spec.trials, threads)
    out = ExperimentOutput("trajectory", spec, list(records[0]), records, metadata=_metadata(spec))
    rows = []
    for order in orders:
        tag = order.value
        top_mean = [float(np.mean(out.column(f"{tag}.top@{i}"))) for i in range(n_iter + 1)]
        gap_mean = [float(np.mean(out.column(f"{tag}.gap@{i}"))) for i in range(n_iter + 1)]
        out.aggregates[f"{tag}.mean_top_percent"] = top_mean
        out.aggregates[f"{tag}.mean_gap_percent"] = gap_mean
        rows += [[i, tag, top_mean[i], 100.0 - top_mean[i], gap_mean[i]] for i in range(n_iter + 1)]
    out.plotdata["trajectory"] = (["iteration", "order", "mean_top_percent", "mean_percentile_rank",
                                   "mean_gap_percent"], rows)
    return out


# ------------------------------------------------------------------ sweeps

SNR_SYSTEMS = ("pr_ue_only", "s1_unity", "s1_bg", "s2_bg", "s2_closed_form", "benchmark", "ris_bg")
DISTANCE_SYSTEMS = ("pr_ue_only", "s1_bg", "s2_bg", "benchmark", "ris_bg")


def _system_channel(name: str, ch: TrialChannels, spec: ScenarioSpec, rng_for) -> np.ndarray:
    """Composite channel seen by the Pr-UE for one system."""
    links = ch.links
    h1, hc, hp = links.h1, links.hc, links.hp
    nc, q = hc.shape[0], spec.q
    if name == "pr_ue_only":
        return h1
    if name == "benchmark":
        return np.vstack([h1, ch.bench_extra])
    if name == "s1_unity":
        cfg = PhaseConfig.zeros(Structure.S1, nc, q)
        return stack_channel(h1, build_h2(hp, hc, cfg, _relay_params(spec, Structure.S1)))
    if name in ("s1_bg", "s2_bg"):
        structure = Structure.S1 if name == "s1_bg" else Structure.S2
        params = _relay_params(spec, structure)
        oracle = relay_oracle(h1, hc, hp, params, structure, q)
        res = bg_optimize(oracle, q, nc, structure, spec.order, spec.rounds, spec.rms_trials, rng=rng_for(name))
        return stack_channel(h1, build_h2(hp, hc, res.best_config, params))
    if name == "s2_closed_form":
        params = _relay_params(spec, Structure.S2)
        phi_t, phi_r = closed_form_structure2(hp, effective_first_hop(hc, h1))
        return stack_channel(h1, relay_s2(hp, hc, phi_r, phi_t, params))
    if name == "ris_bg":
        oracle = ris_oracle(h1, ch.g, hc, spec.rho, q)
        res = bg_optimize(oracle, q, nc, Structure.S1, spec.order, spec.rounds, spec.rms_trials, rng=rng_for(name))
        phi = np.exp(2j * np.pi * res.best_config.as_levels() / q)
        return h1 + math.sqrt(spec.rho) * (ch.g * phi[None, :]) @ hc
    raise ValueError(f"unknown system {name!r}")


def _ci(values: np.ndarray):
    n = len(values)
    mean = float(np.mean(values))
    half = 1.96 * float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return mean, mean - half, mean + half


def _sweep(name, spec, points, point_label, channels_for, systems, metrics, threads) -> ExperimentOutput:
    def one(trial):
        record = {"trial": trial}
        for p_idx, point in enumerate(points):
            ch = channels_for(trial, point)

            def rng_for(system, p_idx=p_idx):
                return derive_rng(spec.seed, trial, OPT_STREAM + SNR_SYSTEMS.index(system), p_idx)

            label = point_label(point)
            for system in systems:
                h = _system_channel(system, ch, spec, rng_for)
                se = spectral_efficiency(h)
                if "se" in metrics:
                    record[f"se:{system}:{label}"] = se
                if "snr" in metrics:
                    record[f"snr_db:{system}:{label}"] = average_snr(h)
                if "ri" in metrics or "tp" in metrics:
                    ri = rank_indicator(h)
                    record[f"ri:{system}:{label}"] = ri
                    record[f"tp_mbps:{system}:{label}"] = throughput(
                        layer_se(h, ri), spec.bandwidth_hz, spec.overhead)
        return record

    records = map_trials(one, spec.trials, threads)
    out = ExperimentOutput(name, spec, list(records[0]), records, metadata=_metadata(spec))
    metric_keys = [k for k in ("se", "snr_db", "ri", "tp_mbps") if any(
        c.startswith(k + ":") for c in out.columns)]
    for key in metric_keys:
        rows = []
        for point in points:
            label = point_label(point)
            for system in systems:
                mean, low, high = _ci(out.column(f"{key}:{system}:{label}").astype(float))
                out.aggregates[f"{key}:{system}:{label}"] = {"mean": mean, "ci_low": low, "ci_high": high}
                rows.append([point, system, mean, low, high])
        out.plotdata[f"{key}_vs_{name.split('-')[0]}"] = (["point", "system", "mean", "ci95_low", "ci95_high"],
                                                           rows)
    return out


def run_snr_sweep(spec: ScenarioSpec, threads: int = 1) -> ExperimentOutput:
    """Mean SE with 95% confidence intervals over the SNR list for every system.

    The same unit-power channel draws are reused at every SNR point.
    """
    geo = geometry(spec)

    def channels_for(trial, snr):
        return scaled(draw_trial(spec, trial, geo), snr)

    return _sweep("snr-sweep", spec, spec.snr_list, lambda s: f"{s:g}dB", channels_for,
                  SNR_SYSTEMS, ("se",), threads)


def distance_geometry_center(distance_m: float) -> np.ndarray:
    """Co-UE centre at ``distance_m`` along the (1, 1, 1) diagonal."""
    return np.full(3, distance_m / math.sqrt(3.0))


def run_distance_sweep(spec: ScenarioSpec, threads: int = 1) -> ExperimentOutput:
    """SNR, SE, proxy RI and proxy TP against Co-UE separation.

    Meant to run with ``path_loss`` on; with it off the sweep only moves the
    Co-UE and reproduces the fixed-position results.

    Quantiles of proxy TP at every distance are reported as a CDF table, and
    the far-field boundary of the Co-UE high-band array marks the grid.
    """
    geos = {d: geometry(spec, distance_geometry_center(d)) for d in spec.distances}

    def channels_for(trial, d):
        return scaled(draw_trial(spec, trial, geos[d]), spec.snr_db)

    out = _sweep("distance-sweep", spec, spec.distances, lambda d: f"{d:g}m", channels_for,
                 DISTANCE_SYSTEMS, ("se", "snr", "ri", "tp"), threads)
    aperture = geos[spec.distances[0]].co_high.aperture
    boundary = fraunhofer_distance(aperture, spec.wavelength_high) if aperture > 0 else 0.0
    out.aggregates["fraunhofer_distance_m"] = boundary
    out.plotdata["fraunhofer"] = (["distance_m", "beyond_fraunhofer"],
                                  [[d, int(d > boundary)] for d in spec.distances])
    rows = []
    for d in spec.distances:
        for system in DISTANCE_SYSTEMS:
            tp = out.column(f"tp_mbps:{system}:{d:g}m").astype(float)
            for level, value in zip(CDF_LEVELS, np.quantile(tp, CDF_LEVELS)):
                rows.append([d, system, float(level), float(value)])
    out.plotdata["tp_cdf"] = (["distance_m", "system", "cdf", "tp_mbps"], rows)
    return out
