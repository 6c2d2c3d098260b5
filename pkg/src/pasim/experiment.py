"""Experiment orchestration: seeded sweep execution over (source variant,
launch power, seed), shared propagation across the DSP combinations,
result persistence, and plot-data emission.

One propagation is run per (variant, power, seed) and reused by all
(compensation, carrier recovery) combinations. Every sweep point derives
its random streams from a SeedSequence keyed by (master_seed, variant
index, power index, seed), so results are bit-identical for any worker
count and are never shared across powers or variants.
"""

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import t as student_t

from . import qam
from .config import ExperimentConfig
from .dsp import BpsConfig, agc, bps, dbp, edc, mpr
from .fiber import propagate_link
from .frontend import channel_select, matched_filter, modulate, rrc_taps, \
    sample_symbols, wdm_mux
from .metrics import GmiEstimate, aggregate_rate, average_scoi_gmi, \
    estimate_gmi, fit_metric, optimize_launch_power
from .shaping import cached_trellis, default_alphabet, ess_encode, \
    interleave, mb_fit, mb_sample, min_emax, pas_map
from .signals import DualPolSymbolFrame

log = logging.getLogger("pasim")

RESULT_HEADER = ("variant", "N", "cpr", "comp", "power_dbm", "gmi_bits",
                 "ci95", "rate_gbps", "seed", "runtime_s")


@dataclass(frozen=True)
class SourceVariant:
    kind: str          # "ess" | "ess-int" | "mb"
    block_length: int  # DM block length in amplitudes; 0 for "mb"


@dataclass
class ResultRow:
    variant: str
    n_value: int
    cpr: str
    comp: str
    power_dbm: float
    gmi_bits: float
    ci95: float
    rate_gbps: float
    seed: int
    runtime_s: float

    @property
    def key(self):
        return (self.variant, self.n_value, self.cpr, self.comp, self.seed)

    def as_csv(self):
        return [self.variant, str(self.n_value), self.cpr, self.comp,
                repr(float(self.power_dbm)), repr(float(self.gmi_bits)),
                repr(float(self.ci95)), repr(float(self.rate_gbps)),
                str(self.seed), repr(float(self.runtime_s))]


def sweep_variants(cfg: ExperimentConfig) -> list:
    out = [SourceVariant("ess", n) for n in cfg.shaping.block_lengths]
    out += [SourceVariant("ess-int", n)
            for n in cfg.shaping.interleaved_lengths]
    if cfg.shaping.include_mb:
        out.append(SourceVariant("mb", 0))
    return out


# ---------------------------------------------------------------------------
# Source generation

def _ess_amplitudes(n_amps, block_length, k, trellis, rng):
    n_blocks = n_amps // block_length
    bits = rng.integers(0, 2, size=(n_blocks, k), dtype=np.uint8)
    return np.concatenate([ess_encode(bits[i], trellis)
                           for i in range(n_blocks)])


def _channel_frame(variant: SourceVariant, cfg: ExperimentConfig,
                   trellis, mb_prior, rng) -> DualPolSymbolFrame:
    """Source for one WDM channel: amplitudes, uniform signs, labels."""
    n_amps = 4 * cfg.sweep.n_symbols
    rate = cfg.shaping.rate_bits_per_amp
    if variant.kind == "mb":
        amps = mb_sample(mb_prior, default_alphabet(), n_amps, rng)
        pmf = mb_prior.pmf
        hx = 2.0 * (mb_prior.entropy_bits() + 1.0)
    elif variant.kind == "ess":
        k = round(rate * variant.block_length)
        amps = _ess_amplitudes(n_amps, variant.block_length, k, trellis, rng)
        pmf = np.bincount((amps - 1) // 2, minlength=qam.M_AMP) / n_amps
        hx = 2.0 * (k / variant.block_length + 1.0)
    elif variant.kind == "ess-int":
        blk = cfg.shaping.interleaver_block
        k = round(rate * blk)
        amps = _ess_amplitudes(n_amps, blk, k, trellis, rng)
        span = variant.block_length
        amps = np.concatenate([
            interleave([amps[s:s + span]], span, rng)
            for s in range(0, n_amps, span)])
        pmf = np.bincount((amps - 1) // 2, minlength=qam.M_AMP) / n_amps
        hx = 2.0 * (k / blk + 1.0)
    else:
        raise ValueError(f"unknown source variant {variant.kind!r}")
    signs = rng.integers(0, 2, size=n_amps, dtype=np.uint8)
    return pas_map(amps, signs, amp_pmf=pmf, hx_bits=hx)


def _variant_trellis(variant: SourceVariant, cfg: ExperimentConfig):
    if variant.kind == "mb":
        return None
    block = (variant.block_length if variant.kind == "ess"
             else cfg.shaping.interleaver_block)
    k = round(cfg.shaping.rate_bits_per_amp * block)
    alphabet = default_alphabet()
    e_max = min_emax(alphabet, block, k)
    return cached_trellis(alphabet, block, e_max, cfg.cache_dir)


# ---------------------------------------------------------------------------
# One sweep point: propagate once, evaluate every DSP combination

def _crop(frame: DualPolSymbolFrame, guard: int) -> DualPolSymbolFrame:
    if guard == 0:
        return frame
    sl = slice(guard, frame.n_symbols - guard)
    return replace(
        frame, x=frame.x[sl], y=frame.y[sl],
        bits_x=None if frame.bits_x is None else frame.bits_x[sl],
        bits_y=None if frame.bits_y is None else frame.bits_y[sl],
    )


def run_point(cfg: ExperimentConfig, variant_idx, power_idx, seed) -> dict:
    """Run one (variant, power, seed) point; returns {(comp, cpr):
    GmiEstimate} averaged over the measured channels."""
    variants = sweep_variants(cfg)
    variant = variants[variant_idx]
    power_dbm = cfg.sweep.powers_dbm[power_idx]
    root = np.random.SeedSequence(
        [cfg.master_seed, variant_idx, power_idx, seed])
    src_ss, link_ss = root.spawn(2)

    trellis = _variant_trellis(variant, cfg)
    mb_prior = mb_fit(default_alphabet(), cfg.shaping.rate_bits_per_amp)

    plan = cfg.grid
    sps = plan.samples_per_symbol_sim
    pulse = rrc_taps(plan.rolloff, sps, plan.span_symbols)
    p_ch = 1e-3 * 10.0 ** (power_dbm / 10.0)

    frames, scales, waves = [], [], []
    for ch_ss in src_ss.spawn(plan.n_channels):
        frame = _channel_frame(variant, cfg, trellis, mb_prior,
                               np.random.default_rng(ch_ss))
        wave = modulate(frame, pulse, sps)
        scale = math.sqrt(p_ch / wave.power())
        frames.append(frame)
        scales.append(scale)
        waves.append(wave.scaled(scale))
    wdm = wdm_mux(waves, plan)
    rx_wave = propagate_link(wdm, cfg.link, np.random.default_rng(link_ss))

    offsets = plan.channel_offsets()
    rx_pulse = rrc_taps(plan.rolloff, plan.samples_per_symbol_channel,
                        plan.span_symbols)
    total_disp = (cfg.link.span.beta2 * cfg.link.span.length_km * 1e3
                  * cfg.link.n_spans)

    per_combo = {key: [] for key in
                 [(comp, cpr) for comp in cfg.dsp.comp_modes
                  for cpr in cfg.dsp.cpr_modes]}
    for c in plan.scoi_indices():
        # Compensation runs on the raw channel slot (physical field);
        # matched filtering only afterwards, since backpropagation feeds
        # on |E|^2 and an RRC-weighted field would misestimate it.
        ch = channel_select(rx_wave, offsets[c],
                            plan.samples_per_symbol_channel, plan=plan)
        tx = frames[c]
        for comp in cfg.dsp.comp_modes:
            comped = edc(ch, total_disp) if comp == "edc" else dbp(ch, cfg.link)
            filt = matched_filter(comped, rx_pulse)
            raw = sample_symbols(filt, plan.samples_per_symbol_channel)
            rx = DualPolSymbolFrame(x=raw.x / scales[c], y=raw.y / scales[c])
            rx = agc(rx, float(np.mean(np.abs(tx.x) ** 2)),
                     float(np.mean(np.abs(tx.y) ** 2)))
            rx = mpr(rx, tx)
            for cpr in cfg.dsp.cpr_modes:
                if cpr == "bps":
                    bps_cfg = cfg.dsp.bps_config(comp)
                    rec, _track = bps(rx, bps_cfg)
                    guard = bps_cfg.half_window
                else:
                    rec, guard = rx, 0
                rec_c, tx_c = _crop(rec, guard), _crop(tx, guard)
                metric = fit_metric(rec_c, tx_c)
                est = estimate_gmi(rec_c, tx_c.bits_x, tx_c.bits_y,
                                   tx.amp_pmf, metric, tx.hx_bits,
                                   launch_power_dbm=power_dbm)
                per_combo[(comp, cpr)].append(est)
    return {key: average_scoi_gmi(ests) for key, ests in per_combo.items()}


def _job(args):
    cfg, vi, pi, seed = args
    t0 = time.perf_counter()
    try:
        estimates = run_point(cfg, vi, pi, seed)
        return (vi, pi, seed), estimates, time.perf_counter() - t0, None
    except Exception as exc:  # failure recorded per sweep point
        return (vi, pi, seed), None, time.perf_counter() - t0, repr(exc)


# ---------------------------------------------------------------------------
# Sweep driver with resume

def run_experiment(cfg: ExperimentConfig, out_path=None, workers=1,
                   progress=False) -> list:
    """Execute the configured sweep; returns ResultRows in deterministic
    order (variant, comp, cpr, seed). If out_path holds rows from an
    earlier partial run, only missing rows are computed."""
    variants = sweep_variants(cfg)
    powers = cfg.sweep.powers_dbm
    combos = [(comp, cpr) for comp in cfg.dsp.comp_modes
              for cpr in cfg.dsp.cpr_modes]

    existing = {}
    if out_path is not None and Path(out_path).exists():
        for row in load_results(out_path):
            existing[row.key] = row

    def row_key(vi, combo, seed):
        v = variants[vi]
        return (v.kind, v.block_length, combo[1], combo[0], seed)

    needed_points = []
    for vi in range(len(variants)):
        for seed in cfg.sweep.seeds:
            if any(row_key(vi, combo, seed) not in existing
                   for combo in combos):
                needed_points.extend(
                    (vi, pi, seed) for pi in range(len(powers)))

    jobs = [(cfg, vi, pi, seed) for vi, pi, seed in needed_points]
    cache, runtimes, failures = {}, {}, {}
    if jobs:
        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_job, jobs)
                for key, est, dt, err in results:
                    cache[key], runtimes[key], failures[key] = est, dt, err
                    if progress:
                        _report_progress(key, variants, powers, err)
        else:
            for args in jobs:
                key, est, dt, err = _job(args)
                cache[key], runtimes[key], failures[key] = est, dt, err
                if progress:
                    _report_progress(key, variants, powers, err)

    rows = []
    for vi, variant in enumerate(variants):
        for comp, cpr in combos:
            for seed in cfg.sweep.seeds:
                key = row_key(vi, (comp, cpr), seed)
                if key in existing:
                    rows.append(existing[key])
                    continue
                point_keys = [(vi, pi, seed) for pi in range(len(powers))]
                spent = sum(runtimes.get(k, 0.0) for k in point_keys)
                runtime = spent / len(combos)
                errs = [failures.get(k) for k in point_keys
                        if failures.get(k)]
                if errs:
                    log.warning("sweep point %s/%s/%s seed %s failed: %s",
                                variant.kind, comp, cpr, seed, errs[0])
                    rows.append(ResultRow(
                        variant.kind, variant.block_length, cpr, comp,
                        math.nan, math.nan, math.nan, math.nan, seed,
                        runtime))
                    continue
                runner = _CachedRunner(cache, powers, vi, seed, (comp, cpr))
                if len(powers) >= 3:
                    best_power, est, edge = optimize_launch_power(
                        runner, powers)
                else:  # fixed-power run, nothing to optimize
                    ests = [runner(p) for p in powers]
                    k = int(np.argmax([e.gmi for e in ests]))
                    best_power, est, edge = powers[k], ests[k], False
                if edge:
                    log.warning(
                        "launch power optimum at grid edge (%.2f dBm) for "
                        "%s/%s/%s seed %s", best_power, variant.kind, comp,
                        cpr, seed)
                rows.append(ResultRow(
                    variant.kind, variant.block_length, cpr, comp,
                    best_power, est.gmi, est.ci95,
                    aggregate_rate(est.gmi, baud_rate=cfg.grid.baud_rate),
                    seed, runtime))
    if out_path is not None:
        emit_results(rows, out_path)
    return rows


class _CachedRunner:
    """Launch-power runner backed by the shared per-point estimates."""

    def __init__(self, cache, powers, vi, seed, combo):
        self.cache = cache
        self.powers = list(powers)
        self.vi = vi
        self.seed = seed
        self.combo = combo

    def __call__(self, power_dbm):
        pi = self.powers.index(power_dbm)
        return self.cache[(self.vi, pi, self.seed)][self.combo]


def _report_progress(key, variants, powers, err):
    vi, pi, seed = key
    status = f"FAILED: {err}" if err else "done"
    log.info("point variant=%s power=%.2f dBm seed=%d: %s",
             variants[vi].kind + (f"-N{variants[vi].block_length}"
                                  if variants[vi].block_length else ""),
             powers[pi], seed, status)


# ---------------------------------------------------------------------------
# Result persistence

def emit_results(rows, path):
    """Write rows as CSV with the fixed header, UTF-8, LF line endings,
    full-precision decimals."""
    if not rows:
        raise ValueError("no result rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def load_results(path) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(RESULT_HEADER):
            raise ValueError(f"unexpected results header in {path}: {header}")
        for rec in reader:
            rows.append(ResultRow(
                variant=rec[0], n_value=int(rec[1]), cpr=rec[2], comp=rec[3],
                power_dbm=float(rec[4]), gmi_bits=float(rec[5]),
                ci95=float(rec[6]), rate_gbps=float(rec[7]),
                seed=int(rec[8]), runtime_s=float(rec[9])))
    return rows


# ---------------------------------------------------------------------------
# Seed aggregation and plot series

def aggregate_over_seeds(rows) -> dict:
    """Mean GMI per (variant, N, cpr, comp) across seeds; the CI is the
    Student-t 95% interval from the seed spread when several seeds are
    present (the normal quantile under-covers for a handful of seeds),
    else the single row's CI."""
    groups = {}
    for row in rows:
        if not math.isfinite(row.gmi_bits):
            continue
        groups.setdefault((row.variant, row.n_value, row.cpr, row.comp),
                          []).append(row)
    out = {}
    for key, members in groups.items():
        gmis = np.array([r.gmi_bits for r in members])
        mean = float(gmis.mean())
        if len(members) > 1:
            quantile = float(student_t.ppf(0.975, len(members) - 1))
            ci = float(quantile * gmis.std(ddof=1) / math.sqrt(len(members)))
        else:
            ci = members[0].ci95
        power = float(np.mean([r.power_dbm for r in members]))
        out[key] = GmiEstimate(mean, ci, len(members), power)
    return out


def plot_series(rows, figure) -> list:
    """Per-curve (comp, cpr, variant) series over N for the given figure
    layout; returns CSV-ready records."""
    if figure not in ("fig2", "fig3"):
        raise ValueError(f"unknown figure {figure!r} (use fig2 or fig3)")
    agg = aggregate_over_seeds(rows)
    records = []
    for (variant, n, cpr, comp), est in sorted(
            agg.items(), key=lambda kv: (kv[0][3], kv[0][2], kv[0][0],
                                         kv[0][1])):
        records.append({
            "figure": figure,
            "curve": f"{comp}-{cpr}-{variant}",
            "N": n,
            "gmi_bits": est.gmi,
            "ci95": est.ci95,
            "rate_gbps": aggregate_rate(est.gmi),
        })
    return records


def emit_plot_series(records, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["figure", "curve", "N", "gmi_bits", "ci95",
                     "rate_gbps"])
    for rec in records:
        writer.writerow([rec["figure"], rec["curve"], rec["N"],
                         repr(float(rec["gmi_bits"])),
                         repr(float(rec["ci95"])),
                         repr(float(rec["rate_gbps"]))])


# ---------------------------------------------------------------------------
# BPS window-size sweep

def sweep_nbps(cfg: ExperimentConfig, progress=False) -> list:
    """GMI versus BPS averaging half-window, per compensation mode, at the
    middle power of the grid. Shares one propagation per compensation
    mode, varying only the carrier recovery."""
    variants = sweep_variants(cfg)
    vi = next((i for i, v in enumerate(variants) if v.kind == "mb"),
              len(variants) - 1)
    variant = variants[vi]
    pi = len(cfg.sweep.powers_dbm) // 2
    power_dbm = cfg.sweep.powers_dbm[pi]
    seed = cfg.sweep.seeds[0]

    root = np.random.SeedSequence([cfg.master_seed, vi, pi, seed])
    src_ss, link_ss = root.spawn(2)
    trellis = _variant_trellis(variant, cfg)
    mb_prior = mb_fit(default_alphabet(), cfg.shaping.rate_bits_per_amp)
    plan = cfg.grid
    sps = plan.samples_per_symbol_sim
    pulse = rrc_taps(plan.rolloff, sps, plan.span_symbols)
    p_ch = 1e-3 * 10.0 ** (power_dbm / 10.0)

    frames, scales, waves = [], [], []
    for ch_ss in src_ss.spawn(plan.n_channels):
        frame = _channel_frame(variant, cfg, trellis, mb_prior,
                               np.random.default_rng(ch_ss))
        wave = modulate(frame, pulse, sps)
        scale = math.sqrt(p_ch / wave.power())
        frames.append(frame)
        scales.append(scale)
        waves.append(wave.scaled(scale))
    rx_wave = propagate_link(wdm_mux(waves, plan), cfg.link,
                             np.random.default_rng(link_ss))

    offsets = plan.channel_offsets()
    rx_pulse = rrc_taps(plan.rolloff, plan.samples_per_symbol_channel,
                        plan.span_symbols)
    total_disp = (cfg.link.span.beta2 * cfg.link.span.length_km * 1e3
                  * cfg.link.n_spans)

    records = []
    for comp in cfg.dsp.comp_modes:
        base_frames = []
        for c in plan.scoi_indices():
            ch = channel_select(rx_wave, offsets[c],
                                plan.samples_per_symbol_channel, plan=plan)
            comped = edc(ch, total_disp) if comp == "edc" \
                else dbp(ch, cfg.link)
            filt = matched_filter(comped, rx_pulse)
            raw = sample_symbols(filt, plan.samples_per_symbol_channel)
            rx = DualPolSymbolFrame(x=raw.x / scales[c], y=raw.y / scales[c])
            tx = frames[c]
            rx = agc(rx, float(np.mean(np.abs(tx.x) ** 2)),
                     float(np.mean(np.abs(tx.y) ** 2)))
            base_frames.append((mpr(rx, tx), tx))
        for nbps in cfg.dsp.nbps_grid:
            ests = []
            for rx, tx in base_frames:
                rec, _ = bps(rx, BpsConfig(half_window=nbps))
                rec_c, tx_c = _crop(rec, nbps), _crop(tx, nbps)
                metric = fit_metric(rec_c, tx_c)
                ests.append(estimate_gmi(
                    rec_c, tx_c.bits_x, tx_c.bits_y, tx.amp_pmf, metric,
                    tx.hx_bits, launch_power_dbm=power_dbm))
            est = average_scoi_gmi(ests)
            records.append({"comp": comp, "nbps": nbps, "gmi_bits": est.gmi,
                            "ci95": est.ci95})
            if progress:
                log.info("nbps sweep %s nbps=%d: gmi=%.4f", comp, nbps,
                         est.gmi)
    return records


def emit_nbps_series(records, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["comp", "nbps", "gmi_bits", "ci95"])
    for rec in records:
        writer.writerow([rec["comp"], rec["nbps"],
                         repr(float(rec["gmi_bits"])),
                         repr(float(rec["ci95"]))])
