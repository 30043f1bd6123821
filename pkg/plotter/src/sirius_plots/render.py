"""Render BER-vs-SNR and NMSE-vs-SNR curves from a results CSV.

The CSV contract is the simulator's results.csv:
``estimator,snr_db,speed_kmh,slots,nmse_db,ber``. One figure shows one
metric at one velocity, one labelled curve per estimator. Rendering is
deterministic: fixed style, Agg backend, pinned PNG metadata, so
re-rendering identical input yields identical bytes.
"""

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("estimator", "snr_db", "speed_kmh", "nmse_db", "ber")
METRICS = ("ber", "nmse")

# stable curve order and styling per estimator id
ESTIMATOR_STYLE = {
    "ls": dict(color="tab:gray", marker="s", label="LS"),
    "robust_lmmse": dict(color="tab:orange", marker="v", label="Robust LMMSE"),
    "ideal_lmmse": dict(color="tab:green", marker="^", label="Ideal LMMSE"),
    "sirius": dict(color="tab:blue", marker="o", label="SIRIUS"),
    "perfect_csi": dict(color="black", marker="x", label="Perfect CSI bound"),
}

AXIS_LABEL = {"ber": "Uncoded BER", "nmse": "NMSE [dB]"}


@dataclass
class PlotSpec:
    """One figure request: metric and velocity slice of a results CSV."""

    csv_path: str
    metric: str
    speed_kmh: float
    out_path: str
    title: str = None
    label_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")


def load_results(csv_path):
    """Read the results CSV into a list of typed row dicts."""
    with open(csv_path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{csv_path}: missing columns {missing} (header {header})")
        rows = []
        for row in reader:
            rows.append({
                "estimator": row["estimator"],
                "snr_db": float(row["snr_db"]),
                "speed_kmh": float(row["speed_kmh"]),
                "nmse_db": float(row["nmse_db"]),
                "ber": float(row["ber"]),
            })
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    return rows


def _curves(rows, metric, speed_kmh):
    column = "ber" if metric == "ber" else "nmse_db"
    selected = [r for r in rows if r["speed_kmh"] == speed_kmh]
    if not selected:
        speeds = sorted({r["speed_kmh"] for r in rows})
        raise ValueError(
            f"no rows at speed {speed_kmh:g} km/h (available: {speeds})"
        )
    curves = {}
    for r in selected:
        curves.setdefault(r["estimator"], []).append((r["snr_db"], r[column]))
    for name in curves:
        curves[name] = sorted(curves[name])
    return curves


def render(spec: PlotSpec) -> str:
    """Write the figure for spec and return the output path."""
    rows = load_results(spec.csv_path)
    curves = _curves(rows, spec.metric, spec.speed_kmh)

    fig, ax = plt.subplots(figsize=(6.0, 4.2), dpi=150)
    order = [e for e in ESTIMATOR_STYLE if e in curves]
    order += sorted(set(curves) - set(order))
    for name in order:
        pts = curves[name]
        snr = [p[0] for p in pts]
        val = [p[1] for p in pts]
        style = dict(ESTIMATOR_STYLE.get(name, dict(marker=".")))
        style["label"] = spec.label_overrides.get(name, style.get("label", name))
        if spec.metric == "ber":
            ax.semilogy(snr, val, markersize=5, linewidth=1.4, **style)
        else:
            ax.plot(snr, val, markersize=5, linewidth=1.4, **style)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel(AXIS_LABEL[spec.metric])
    title = spec.title or f"{AXIS_LABEL[spec.metric]} at {spec.speed_kmh:g} km/h"
    ax.set_title(title)
    ax.grid(True, which="both", linewidth=0.4, alpha=0.5)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    # pinned metadata keeps the PNG byte-stable across renders
    fig.savefig(spec.out_path, metadata={"Software": "sirius-plot"})
    plt.close(fig)
    return spec.out_path
