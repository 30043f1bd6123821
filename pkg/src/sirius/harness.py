"""Monte-Carlo sweep runner, result persistence, and replay manifests.

One sweep point is (estimator set, SNR, velocity); every slot inside a
point is simulated from seeds derived deterministically from the master
seed, and every estimator at a point consumes the identical channel and
noise realizations. Slots are distributed over a worker pool; results
are aggregated in slot order, so output files are byte-identical for
any worker count.

File formats
------------
results.csv     one row per (estimator, snr, velocity):
                ``estimator,snr_db,speed_kmh,slots,nmse_db,ber``
                (floats at 6 significant digits).
manifest.txt    ``key = value`` lines mirroring the CLI flags plus
                provenance comments; feeding it back through
                ``--config`` reproduces the identical results.csv.
slot dumps      optional npz per slot with arrays ``tx``, ``rx``,
                ``pilot_mask``, ``h0``, ``hm1``, ``hp1`` and the derived
                ``seeds`` (channel, noise, tx, net).
net snapshots   see :func:`sirius.net.save_params`: npz of named arrays
                ``w0, b0, w1, b1, ...``.
"""

import csv
import hashlib
import io
import os
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from . import baseline, channel, estimator, metrics
from .grid import SlotConfig, random_data_grid

KNOWN_ESTIMATORS = ("ls", "ideal_lmmse", "robust_lmmse", "sirius", "perfect_csi")


@dataclass(frozen=True)
class SweepConfig:
    """Resolved sweep description (defaults give the desk-scale run)."""

    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    velocities_kmh: tuple = (100.0, 200.0)
    slots_per_point: int = 50
    estimators: tuple = KNOWN_ESTIMATORS
    master_seed: int = 1
    out_dir: str = "runs/default"
    workers: int = 1
    dump_slots: bool = False

    def __post_init__(self):
        if self.slots_per_point < 1:
            raise ValueError("slots_per_point must be >= 1")
        if len(self.snr_grid_db) == 0 or np.any(np.diff(self.snr_grid_db) <= 0):
            raise ValueError("snr grid must be non-empty and strictly increasing")
        for e in self.estimators:
            if e not in KNOWN_ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def fingerprint(self) -> str:
        return hashlib.sha256(config_text(self).encode()).hexdigest()[:16]


@dataclass
class RunResult:
    """Aggregated metrics for one (estimator, SNR, velocity) point."""

    estimator: str
    snr_db: float
    speed_kmh: float
    slots: int
    nmse_db: float
    ber: float
    bit_count: int
    fingerprint: str


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit stream seed from the master seed and context labels."""
    text = "/".join([str(master_seed)] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def simulate_slot(snr_db, velocity_kmh, slot_cfg: SlotConfig, seeds: dict):
    """Generate one slot: transmitted grid, channel, received grid, truth."""
    profile = channel.TdlProfile.tdl_c()
    f_d = channel.max_doppler(velocity_kmh / 3.6, slot_cfg.carrier_frequency)
    tx, bits = random_data_grid(slot_cfg, np.random.default_rng(seeds["tx"]))
    realization = channel.generate_realization(profile, f_d, slot_cfg, seeds["chan"])
    rx = channel.apply_channel(tx, realization, snr_db, slot_cfg, seeds["noise"])
    truth = channel.genie_taps(realization, slot_cfg)
    return tx, bits, realization, rx, truth


def _estimate(name, rx, tx, truth, snr_db, velocity_kmh, slot_cfg, net_seed):
    noise_var = channel.noise_variance(snr_db)
    if name == "ls":
        return baseline.ls_estimate(rx, tx.symbols)
    if name == "ideal_lmmse":
        profile = channel.TdlProfile.tdl_c()
        f_d = channel.max_doppler(velocity_kmh / 3.6, slot_cfg.carrier_frequency)
        corr = baseline.genie_correlation(profile, f_d, slot_cfg)
        return baseline.ideal_lmmse_estimate(rx, tx.symbols, corr, noise_var)
    if name == "robust_lmmse":
        return baseline.robust_lmmse_estimate(rx, tx.symbols, noise_var, slot_cfg)
    if name == "sirius":
        cfg = estimator.SiriusConfig(seed=net_seed)
        return estimator.estimate_slot(rx, tx.symbols, slot_cfg, cfg)
    if name == "perfect_csi":
        return truth
    raise ValueError(f"unknown estimator {name!r}")


def _run_slot_task(task):
    """One (point, slot) unit of work; returns per-estimator slot metrics."""
    snr_db, velocity_kmh, slot_idx, master_seed, estimators, dump_dir = task
    slot_cfg = SlotConfig()
    seeds = {
        stream: derive_seed(master_seed, velocity_kmh, snr_db, slot_idx, stream)
        for stream in ("tx", "chan", "noise", "net")
    }
    tx, bits, realization, rx, truth = simulate_slot(
        snr_db, velocity_kmh, slot_cfg, seeds
    )
    checksum = hashlib.sha256(
        np.ascontiguousarray(rx.symbols).tobytes()
        + np.ascontiguousarray(realization.tap_gains).tobytes()
    ).hexdigest()[:16]
    data_mask = ~rx.pilot_mask
    true_bits = bits[data_mask]
    out = {}
    for name in estimators:
        taps = _estimate(name, rx, tx, truth, snr_db, velocity_kmh, slot_cfg, seeds["net"])
        ratio = metrics.nmse_ratio(taps, truth)
        if name == "perfect_csi":
            decided = metrics.perfect_csi_bound(rx, truth, tx.symbols)
        else:
            decided = metrics.detect_bits(rx, taps)
        errors = int(np.sum(decided != true_bits))
        out[name] = (ratio, errors, true_bits.size)
    if dump_dir is not None:
        path = os.path.join(
            dump_dir, f"slot_v{velocity_kmh:g}_snr{snr_db:g}_{slot_idx:04d}.npz"
        )
        np.savez(
            path,
            tx=tx.symbols, rx=rx.symbols, pilot_mask=rx.pilot_mask,
            h0=truth.h0, hm1=truth.hm1, hp1=truth.hp1,
            seeds=np.array([seeds[s] for s in ("chan", "noise", "tx", "net")], dtype=np.uint64),
        )
    return checksum, out


def run_sweep(cfg: SweepConfig, on_point=None):
    """Simulate every sweep point; returns (results, diagnostics).

    on_point, when given, is called with each completed RunResult (in
    deterministic point order) for incremental persistence.
    """
    dump_dir = None
    if cfg.dump_slots:
        dump_dir = os.path.join(cfg.out_dir, "slots")
        os.makedirs(dump_dir, exist_ok=True)
    fingerprint = cfg.fingerprint()
    results = []
    diagnostics = []
    ctx = get_context("fork")
    with ctx.Pool(processes=cfg.workers) as pool:
        for velocity in cfg.velocities_kmh:
            for snr_db in cfg.snr_grid_db:
                tasks = [
                    (snr_db, velocity, i, cfg.master_seed, cfg.estimators, dump_dir)
                    for i in range(cfg.slots_per_point)
                ]
                slot_outputs = pool.map(_run_slot_task, tasks)
                point_results, issue = _aggregate_point(
                    cfg, snr_db, velocity, slot_outputs, fingerprint
                )
                if issue is not None:
                    diagnostics.append(issue)
                    continue
                results.extend(point_results)
                if on_point is not None:
                    for r in point_results:
                        on_point(r)
    return results, diagnostics


def _aggregate_point(cfg, snr_db, velocity, slot_outputs, fingerprint):
    per_est = {name: ([], 0, 0) for name in cfg.estimators}
    for _, slot_metrics in slot_outputs:
        for name in cfg.estimators:
            ratio, errors, nbits = slot_metrics[name]
            if not np.isfinite(ratio):
                return None, (
                    f"non-finite NMSE for {name} at snr={snr_db} v={velocity}; point aborted"
                )
            ratios, err_acc, bit_acc = per_est[name]
            ratios.append(ratio)
            per_est[name] = (ratios, err_acc + errors, bit_acc + nbits)
    out = []
    for name in cfg.estimators:
        ratios, errors, nbits = per_est[name]
        out.append(RunResult(
            estimator=name,
            snr_db=float(snr_db),
            speed_kmh=float(velocity),
            slots=cfg.slots_per_point,
            nmse_db=metrics.nmse_db(ratios),
            ber=errors / nbits,
            bit_count=nbits,
            fingerprint=fingerprint,
        ))
    return out, None


def realization_checksums(cfg: SweepConfig, snr_db, velocity) -> list:
    """Channel/noise checksums of a point's slots (pairing diagnostics)."""
    out = []
    for i in range(cfg.slots_per_point):
        task = (snr_db, velocity, i, cfg.master_seed, ("ls",), None)
        checksum, _ = _run_slot_task(task)
        out.append(checksum)
    return out


# --------------------------------------------------------------------------
# persistence: CSV rows, manifest round-trip, config files

CSV_HEADER = ["estimator", "snr_db", "speed_kmh", "slots", "nmse_db", "ber"]


def _fmt(x) -> str:
    return f"{x:.6g}"


def results_csv_text(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in results:
        writer.writerow([
            r.estimator, _fmt(r.snr_db), _fmt(r.speed_kmh), r.slots,
            _fmt(r.nmse_db), _fmt(r.ber),
        ])
    return buf.getvalue()


def config_text(cfg: SweepConfig) -> str:
    """Canonical key = value form; parseable by parse_config_text."""
    lines = [
        f"snr_min = {_fmt(cfg.snr_grid_db[0])}",
        f"snr_max = {_fmt(cfg.snr_grid_db[-1])}",
        f"snr_step = {_fmt(cfg.snr_grid_db[1] - cfg.snr_grid_db[0]) if len(cfg.snr_grid_db) > 1 else _fmt(1.0)}",
        "speeds = " + ",".join(_fmt(v) for v in cfg.velocities_kmh),
        f"slots = {cfg.slots_per_point}",
        "estimators = " + ",".join(cfg.estimators),
        f"seed = {cfg.master_seed}",
        f"out_dir = {cfg.out_dir}",
        f"workers = {cfg.workers}",
        f"dump_slots = {'true' if cfg.dump_slots else 'false'}",
    ]
    return "\n".join(lines) + "\n"


def manifest_text(cfg: SweepConfig, version: str) -> str:
    head = [
        "# sirius-ofdm run manifest (feed back via --config to reproduce)",
        f"# artifact_version = {version}",
        f"# config_fingerprint = {cfg.fingerprint()}",
        "# slot seeds = sha256(master_seed/velocity/snr/slot/stream), streams tx|chan|noise|net",
    ]
    return "\n".join(head) + "\n" + config_text(cfg)


def parse_config_text(text: str) -> dict:
    """Parse key = value lines; '#' starts a comment; returns raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def sweep_config_from_mapping(values: dict) -> SweepConfig:
    """Build a SweepConfig from string-valued config/CLI entries."""
    defaults = SweepConfig()
    snr_min = float(values.get("snr_min", defaults.snr_grid_db[0]))
    snr_max = float(values.get("snr_max", defaults.snr_grid_db[-1]))
    snr_step = float(values.get("snr_step", 5.0))
    if snr_step <= 0:
        raise ValueError("snr_step must be positive")
    n = int(round((snr_max - snr_min) / snr_step))
    grid = tuple(snr_min + i * snr_step for i in range(n + 1))
    if not grid or grid[-1] > snr_max + 1e-9:
        grid = tuple(g for g in grid if g <= snr_max + 1e-9)
    speeds = values.get("speeds", ",".join(_fmt(v) for v in defaults.velocities_kmh))
    if isinstance(speeds, str):
        speeds = tuple(float(s) for s in speeds.split(",") if s.strip())
    estimators = values.get("estimators", ",".join(defaults.estimators))
    if isinstance(estimators, str):
        estimators = tuple(e.strip() for e in estimators.split(",") if e.strip())
    dump = values.get("dump_slots", "false")
    if isinstance(dump, str):
        dump = dump.lower() in ("1", "true", "yes", "on")
    return SweepConfig(
        snr_grid_db=grid,
        velocities_kmh=speeds,
        slots_per_point=int(values.get("slots", defaults.slots_per_point)),
        estimators=estimators,
        master_seed=int(values.get("seed", defaults.master_seed)),
        out_dir=str(values.get("out_dir", defaults.out_dir)),
        workers=int(values.get("workers", defaults.workers)),
        dump_slots=dump,
    )


def emit_results(results, cfg: SweepConfig, version: str):
    """Write results.csv and manifest.txt under cfg.out_dir."""
    if not results:
        raise ValueError("no results to emit")
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, "results.csv")
    manifest_path = os.path.join(cfg.out_dir, "manifest.txt")
    try:
        with open(csv_path, "w") as f:
            f.write(results_csv_text(results))
        with open(manifest_path, "w") as f:
            f.write(manifest_text(cfg, version))
    except OSError as exc:
        raise OSError(f"failed writing results under {cfg.out_dir}: {exc}") from exc
    return csv_path, manifest_path
