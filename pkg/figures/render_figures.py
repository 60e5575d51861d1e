#!/usr/bin/env python3
"""Publication-style figure panels from sweep report CSVs.

Reads only the documented CSV outputs of the analysis pipeline (no physics is
recomputed here) and renders one panel per invocation:

    sxx            two-sided displacement PSD: emission vs absorption sideband
                   overlay with the zero-point difference shaded
    cooperativity  readout cooperativity vs damped linewidth
    ratios         damping and occupancy branch ratios vs damped linewidth
    cooling_curve  occupancy vs damped linewidth with the ideal cooling law
    asymmetry      corrected sideband asymmetry vs occupancy, with the quantum
                   (1/n) and classical (0) reference curves
    sidebands      linewidth-rescaled Stokes / anti-Stokes overlays per
                   representative sweep point, difference shaded

Usage:
    python render_figures.py --in REPORT_DIR --out panel.png --panel cooling_curve

--in accepts either the report directory or explicit CSV path(s). Rendering is
deterministic: identical inputs produce identical image bytes.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXIT_OK = 0
EXIT_INPUT = 2

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}

STOKES_COLOR = "#c0392b"
ANTI_STOKES_COLOR = "#2471a3"
SHADE_COLOR = "#f5b7b1"


class InputError(Exception):
    pass


def read_table(path: str, required: list[str]) -> dict[str, np.ndarray]:
    """Comma-separated table with a header row; checks the required columns."""
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines:
        raise InputError(f"empty CSV: {path}")
    header = lines[0].split(",")
    for column in required:
        if column not in header:
            raise InputError(f"{path}: missing column {column!r}")
    if len(lines) < 2:
        raise InputError(f"{path}: no data rows")
    columns: dict[str, list[float]] = {name: [] for name in header}
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(header):
            raise InputError(f"{path}: row width {len(cells)} != header width {len(header)}")
        for name, cell in zip(header, cells):
            try:
                columns[name].append(float(cell))
            except ValueError:
                columns[name].append(np.nan)
    return {name: np.asarray(values) for name, values in columns.items()}


def read_trace(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Trace-format CSV: '# key=value' line, 'frequency_hz,psd' header, rows."""
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    freqs: list[float] = []
    psd: list[float] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#") or line == "frequency_hz,psd":
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise InputError(f"{path}: malformed trace row {line!r}")
            freqs.append(float(cells[0]))
            psd.append(float(cells[1]))
    if len(freqs) < 8:
        raise InputError(f"{path}: too few trace rows")
    return np.asarray(freqs), np.asarray(psd)


def _finite(*arrays):
    mask = np.ones(arrays[0].shape, dtype=bool)
    for array in arrays:
        mask &= np.isfinite(array)
    return mask


def _half_max_window(nu: np.ndarray, psd: np.ndarray, widths: float = 10.0):
    """Index window spanning +/- widths half-max-widths around the tallest point."""
    floor = np.median(psd)
    peak = int(np.argmax(psd))
    half = floor + 0.5 * (psd[peak] - floor)
    n_above = max(int(np.count_nonzero(psd > half)), 2)
    span = int(widths * n_above)
    lo, hi = max(peak - span, 0), min(peak + span + 1, psd.size)
    return peak, slice(lo, hi)


def panel_sxx(paths: list[str], ax) -> None:
    nu, psd = read_trace(_single(paths, "table_sxx.csv"))
    upper = nu > 0
    lower = nu < 0
    peak_u, win_u = _half_max_window(nu[upper], psd[upper])
    peak_l, win_l = _half_max_window(nu[lower], psd[lower])
    offset_u = nu[upper][win_u] - nu[upper][peak_u]
    offset_l = nu[lower][win_l] - nu[lower][peak_l]
    emission = psd[upper][win_u]
    absorption = psd[lower][win_l][::-1]  # mirror onto the same offset axis
    common = np.linspace(
        max(offset_u[0], -offset_l[::-1][0]), min(offset_u[-1], -offset_l[::-1][-1]), 400
    )
    emission_i = np.interp(common, offset_u, emission)
    absorption_i = np.interp(common, -offset_l[::-1], absorption)
    ax.fill_between(common / 1e6, absorption_i, emission_i, color=SHADE_COLOR,
                    label="zero-point difference")
    ax.plot(common / 1e6, emission_i, color=STOKES_COLOR, label="emission (+$\\omega_m$)")
    ax.plot(common / 1e6, absorption_i, color=ANTI_STOKES_COLOR,
            label="absorption ($-\\omega_m$)")
    ax.set_xlabel("offset from resonance (MHz)")
    ax.set_ylabel("$S_{xx}$ (m$^2$/Hz)")
    ax.set_title("displacement noise: sideband asymmetry")
    ax.legend()


def panel_cooperativity(paths: list[str], ax) -> None:
    table = read_table(
        _single(paths, "table_cooperativity.csv"),
        ["gamma_bar_hz", "c_r_true", "c_r_est", "c_r_ci95"],
    )
    mask = _finite(table["gamma_bar_hz"], table["c_r_est"])
    ax.plot(table["gamma_bar_hz"] / 1e3, table["c_r_true"], "-", color="gray",
            label="model")
    ax.errorbar(
        table["gamma_bar_hz"][mask] / 1e3,
        table["c_r_est"][mask],
        yerr=table["c_r_ci95"][mask],
        fmt="o",
        color=ANTI_STOKES_COLOR,
        markersize=4,
        label="estimated",
    )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("damped linewidth $\\bar\\gamma/2\\pi$ (kHz)")
    ax.set_ylabel("readout cooperativity $C_r$")
    ax.set_title("readout backaction across the sweep")
    ax.legend()


def panel_ratios(paths: list[str], ax) -> None:
    table = read_table(
        _single(paths, "table_ratios.csv"),
        ["gamma_bar_hz", "gamma_ratio_true", "gamma_ratio_est", "occ_ratio_true", "occ_ratio_est"],
    )
    x = table["gamma_bar_hz"] / 1e3
    ax.plot(x, table["gamma_ratio_true"], "-", color="gray", label="model (both ratios)")
    mask_g = _finite(x, table["gamma_ratio_est"])
    mask_n = _finite(x, table["occ_ratio_est"])
    ax.plot(x[mask_g], table["gamma_ratio_est"][mask_g], "o", markersize=4,
            color=ANTI_STOKES_COLOR, label="$\\gamma_-/\\gamma_+$")
    ax.plot(x[mask_n], table["occ_ratio_est"][mask_n], "s", markersize=4,
            fillstyle="none", color=STOKES_COLOR, label="$n_+/n_-$")
    ax.set_xscale("log")
    ax.set_xlabel("damped linewidth $\\bar\\gamma/2\\pi$ (kHz)")
    ax.set_ylabel("branch ratio")
    ax.set_title("damping vs occupancy branch ratios")
    ax.legend()


def panel_cooling_curve(paths: list[str], ax) -> None:
    table = read_table(
        _single(paths, "table_cooling_curve.csv"),
        ["gamma_bar_hz", "n_c_true", "n_c_est", "n_c_ci95", "n_c_ideal"],
    )
    x = table["gamma_bar_hz"] / 1e3
    ax.plot(x, table["n_c_ideal"], "--", color="gray", label="ideal $\\gamma_i n_b/\\bar\\gamma$")
    mask = _finite(x, table["n_c_est"])
    ax.errorbar(
        x[mask], table["n_c_est"][mask], yerr=table["n_c_ci95"][mask],
        fmt="o", markersize=4, color=ANTI_STOKES_COLOR, label="estimated",
    )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("damped linewidth $\\bar\\gamma/2\\pi$ (kHz)")
    ax.set_ylabel("phonon occupancy $\\langle n \\rangle_c$")
    ax.set_title("backaction cooling curve")
    ax.legend()


def panel_asymmetry(paths: list[str], ax) -> None:
    table = read_table(
        _single(paths, "table_asymmetry.csv"),
        ["n_c_true", "eta_prime_est", "eta_prime_ci95", "quantum_prediction", "classical_prediction"],
    )
    order = np.argsort(table["n_c_true"])
    n = table["n_c_true"][order]
    ax.plot(n, table["quantum_prediction"][order], "-", color=STOKES_COLOR,
            label="quantum $1/\\langle n \\rangle_c$")
    ax.plot(n, table["classical_prediction"][order], "-", color=ANTI_STOKES_COLOR,
            label="classical 0")
    mask = _finite(n, table["eta_prime_est"][order])
    ax.errorbar(
        n[mask], table["eta_prime_est"][order][mask],
        yerr=table["eta_prime_ci95"][order][mask],
        fmt="o", markersize=4, color="black", label="measured",
    )
    ax.set_xscale("log")
    ax.set_xlabel("phonon occupancy $\\langle n \\rangle_c$")
    ax.set_ylabel("corrected asymmetry $\\eta'$")
    ax.set_title("motional sideband asymmetry")
    ax.legend()


def panel_sidebands(paths: list[str], fig) -> None:
    if len(paths) == 1 and os.path.isdir(paths[0]):
        files = sorted(glob.glob(os.path.join(paths[0], "sidebands_point_*.csv")))
    else:
        files = paths
    if not files:
        raise InputError("no sidebands_point_*.csv inputs found")
    axes = fig.subplots(len(files), 1, sharex=True)
    if len(files) == 1:
        axes = [axes]
    for ax, path in zip(axes, files):
        table = read_table(
            path,
            ["offset_linewidths", "stokes_rescaled", "antistokes_rescaled", "zero_point_difference"],
        )
        x = table["offset_linewidths"]
        ax.fill_between(x, table["antistokes_rescaled"], table["stokes_rescaled"],
                        color=SHADE_COLOR)
        ax.plot(x, table["stokes_rescaled"], color=STOKES_COLOR,
                label="Stokes $\\times\\, \\gamma_-$")
        ax.plot(x, table["antistokes_rescaled"], color=ANTI_STOKES_COLOR,
                label="anti-Stokes $\\times\\, \\gamma_+$")
        ax.set_ylabel("rescaled PSD")
        ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("offset (units of $\\gamma$)")
    axes[0].set_title("linewidth-rescaled sidebands, zero-point difference shaded")


AXIS_PANELS = {
    "sxx": (panel_sxx, "table_sxx.csv"),
    "cooperativity": (panel_cooperativity, "table_cooperativity.csv"),
    "ratios": (panel_ratios, "table_ratios.csv"),
    "cooling_curve": (panel_cooling_curve, "table_cooling_curve.csv"),
    "asymmetry": (panel_asymmetry, "table_asymmetry.csv"),
}


def _single(paths: list[str], default_name: str) -> str:
    if len(paths) == 1 and os.path.isdir(paths[0]):
        return os.path.join(paths[0], default_name)
    if len(paths) != 1:
        raise InputError(f"this panel takes exactly one input CSV, got {len(paths)}")
    return paths[0]


def render(panel: str, paths: list[str], out: str) -> None:
    with plt.rc_context(STYLE):
        if panel == "sidebands":
            fig = plt.figure(figsize=(6.0, 7.0))
            panel_sidebands(paths, fig)
        elif panel in AXIS_PANELS:
            fig, ax = plt.subplots()
            AXIS_PANELS[panel][0](paths, ax)
        else:
            raise InputError(f"unknown panel {panel!r}")
        fig.tight_layout()
        tmp = out + ".tmp"
        fig.savefig(tmp, format=os.path.splitext(out)[1].lstrip(".") or "png")
        os.replace(tmp, out)
        plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True,
        help="report directory or explicit CSV path(s)",
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--panel", required=True, choices=sorted([*AXIS_PANELS, "sidebands"]),
    )
    args = parser.parse_args(argv)
    try:
        render(args.panel, args.inputs, args.out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
