"""Command-line interface: simulate sweeps, energy report, self tests."""

import argparse
import sys

import numpy as np

from . import __version__, harness


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sirius",
        description="Link-level OFDM channel-estimation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo sweep")
    sim.add_argument("--config", help="key = value config file; CLI flags override it")
    sim.add_argument("--snr-min", type=float, dest="snr_min")
    sim.add_argument("--snr-max", type=float, dest="snr_max")
    sim.add_argument("--snr-step", type=float, dest="snr_step")
    sim.add_argument("--speeds", help="comma-separated velocities in km/h")
    sim.add_argument("--slots", type=int, help="slots per sweep point")
    sim.add_argument("--estimators", help="comma-separated estimator ids")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--out-dir", dest="out_dir", help="output directory")
    sim.add_argument("--workers", type=int, help="worker processes")
    sim.add_argument("--dump-slots", action="store_true", dest="dump_slots",
                     default=None, help="write per-slot npz dumps")

    en = sub.add_parser("energy", help="tri-diagonal channel energy ratio")
    en.add_argument("--speed", type=float, default=200.0, help="velocity in km/h")
    en.add_argument("--realizations", type=int, default=20)
    en.add_argument("--seed", type=int, default=1)

    st = sub.add_parser("selftest", help="gradient and reception oracle checks")
    st.add_argument("--seed", type=int, default=1)
    return parser


def _cli_overrides(args) -> dict:
    keys = ("snr_min", "snr_max", "snr_step", "speeds", "slots", "estimators",
            "seed", "out_dir", "workers", "dump_slots")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def cmd_simulate(args) -> int:
    values = {}
    if args.config:
        try:
            with open(args.config) as f:
                values.update(harness.parse_config_text(f.read()))
        except OSError as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return 1
    values.update(_cli_overrides(args))
    try:
        cfg = harness.sweep_config_from_mapping(values)
    except (ValueError, KeyError) as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return 1

    def progress(r):
        print(
            f"{r.estimator:>12s}  snr={r.snr_db:5.1f} dB  v={r.speed_kmh:5.1f} km/h  "
            f"nmse={r.nmse_db:8.2f} dB  ber={r.ber:.3e}"
        )

    results, diagnostics = harness.run_sweep(cfg, on_point=progress)
    for d in diagnostics:
        print(f"diagnostic: {d}", file=sys.stderr)
    if not results:
        print("error: sweep produced no results", file=sys.stderr)
        return 2
    csv_path, manifest_path = harness.emit_results(results, cfg, __version__)
    print(f"wrote {csv_path} and {manifest_path}")
    return 2 if diagnostics else 0


def cmd_energy(args) -> int:
    from .channel import (TdlProfile, build_full_matrices, generate_realization,
                          max_doppler, tridiagonal_energy_ratio)
    from .grid import SlotConfig

    cfg = SlotConfig()
    profile = TdlProfile.tdl_c()
    f_d = max_doppler(args.speed / 3.6, cfg.carrier_frequency)
    ratios = []
    for i in range(args.realizations):
        seed = harness.derive_seed(args.seed, "energy", i)
        real = generate_realization(profile, f_d, cfg, seed)
        ratios.append(tridiagonal_energy_ratio(build_full_matrices(real, cfg)))
    mean = float(np.mean(ratios))
    print(f"speed {args.speed:g} km/h (max Doppler {f_d:.1f} Hz), "
          f"{args.realizations} realizations")
    print(f"tri-diagonal energy ratio: mean {mean:.4f}, "
          f"min {min(ratios):.4f}, max {max(ratios):.4f}")
    return 0 if np.isfinite(mean) else 2


def cmd_selftest(args) -> int:
    """Quick oracle checks: gradients vs finite differences, reception paths."""
    from . import channel as ch
    from . import net as nt
    from .grid import SlotConfig, random_data_grid

    failures = []
    rng = np.random.default_rng(args.seed)

    # finite-difference gradient check on a toy network
    toy = nt.siren_init(nt.SirenNetwork([2, 8, 6]), rng)
    X = rng.uniform(-1, 1, (5, 2))
    G = rng.standard_normal((5, 6))
    out, cache = nt.forward(toy, X, want_cache=True)
    grads = nt.backward(toy, cache, G)
    h = 1e-5
    worst = 0.0
    for p, g in zip(toy.parameters(), grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for idx in range(flat_p.size):
            orig = flat_p[idx]
            flat_p[idx] = orig + h
            lp = float(np.sum(nt.forward(toy, X) * G))
            flat_p[idx] = orig - h
            lm = float(np.sum(nt.forward(toy, X) * G))
            flat_p[idx] = orig
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(flat_g[idx]), 1e-12)
            worst = max(worst, abs(fd - flat_g[idx]) / denom)
    status = "ok" if worst < 1e-4 else "FAIL"
    print(f"gradient check: max rel err {worst:.2e} [{status}]")
    if worst >= 1e-4:
        failures.append("gradient")

    # reception oracle: time-domain chain vs full-matrix product
    cfg = SlotConfig()
    profile = ch.TdlProfile.tdl_c()
    f_d = ch.max_doppler(200 / 3.6, cfg.carrier_frequency)
    tx, _ = random_data_grid(cfg, rng)
    real = ch.generate_realization(profile, f_d, cfg, int(rng.integers(1 << 31)))
    rx = ch.apply_channel(tx, real, None, cfg, noise_seed=0)
    err = 0.0
    den = 0.0
    for n in range(cfg.symbols_per_slot):
        y = ch.build_full_matrix(real, cfg, n) @ tx.symbols[:, n]
        err += float(np.sum(np.abs(y - rx.symbols[:, n]) ** 2))
        den += float(np.sum(np.abs(y) ** 2))
    rel = np.sqrt(err / den)
    status = "ok" if rel < 1e-6 else "FAIL"
    print(f"reception oracle: rel err {rel:.2e} [{status}]")
    if rel >= 1e-6:
        failures.append("reception")

    # zero-Doppler degeneracy
    real0 = ch.generate_realization(profile, 0.0, cfg, 7)
    taps0 = ch.genie_taps(real0, cfg)
    ici = float(np.max(np.abs(taps0.hm1)) + np.max(np.abs(taps0.hp1)))
    status = "ok" if ici < 1e-12 else "FAIL"
    print(f"zero-Doppler degeneracy: max ICI tap {ici:.2e} [{status}]")
    if ici >= 1e-12:
        failures.append("degeneracy")

    if failures:
        print("selftest FAILED: " + ", ".join(failures), file=sys.stderr)
        return 2
    print("selftest passed")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    handlers = {
        "simulate": cmd_simulate,
        "energy": cmd_energy,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
