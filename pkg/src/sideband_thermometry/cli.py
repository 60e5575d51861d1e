"""Command-line entry point: simulate / fit / sweep / report workflows.

Exit codes are a stable contract: 0 success, 2 configuration error, 3 I/O or
parse error, 4 estimation failure (partial results are still written). Every
subcommand is deterministic given (config, seed); the only environment knob is
SIDEBAND_SEED, which overrides the config seed when --seed is not given.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from dataclasses import replace

from . import estimation, experiment, spectra
from .physics import TWO_PI, cooling_rate

log = logging.getLogger("sideband_thermometry")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ESTIMATION = 4


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SIDEBAND_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise experiment.ConfigError(f"SIDEBAND_SEED must be an integer, got {env!r}") from exc
    return None


def _load_scenario(args) -> experiment.Scenario:
    scenario = experiment.load_scenario(args.config)
    seed = _resolve_seed(args)
    if seed is not None:
        scenario = replace(scenario, noise=replace(scenario.noise, seed=seed))
    for warning in scenario.validate():
        log.warning("%s", warning)
    return scenario


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    os.makedirs(args.out, exist_ok=True)
    traces, truth = experiment.forward_traces(scenario, scenario.cooling_photons, 0)
    for sign, name in ((+1, "trace_plus.csv"), (-1, "trace_minus.csv")):
        spectra.write_trace_csv(traces[sign], os.path.join(args.out, name))
    back = truth["back"]
    sidecar = {
        "n_photons_cooling": scenario.cooling_photons,
        "gamma_c_hz": truth["gamma_c"] / TWO_PI,
        "gamma_plus_hz": back.gamma_plus / TWO_PI,
        "gamma_minus_hz": back.gamma_minus / TWO_PI,
        "c_r": back.C_r,
        "n_c": back.n_cooled,
        "n_plus": back.n_plus,
        "n_minus": back.n_minus,
        "i_plus": truth["i_plus_true"],
        "i_minus": truth["i_minus_true"],
    }
    estimation.write_records_json(sidecar, os.path.join(args.out, "truth.json"))
    log.info("simulated both detuning branches into %s", args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    traces = [spectra.read_trace_csv(path) for path in args.traces]
    if not 1 <= len(traces) <= 2:
        raise experiment.ConfigError("fit takes one or two trace CSVs")
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "fits.json")
    results: dict = {"fits": {}}
    exit_code = EXIT_OK
    fits: dict[int, estimation.LorentzianFit] = {}
    try:
        for trace in traces:
            sign = 1 if trace.metadata.detuning_hz >= 0 else -1
            key = "plus" if sign > 0 else "minus"
            fits[sign] = estimation.fit_lorentzian(trace)
            results["fits"][key] = fits[sign].to_dict()
        if len(traces) == 2:
            if set(fits) != {+1, -1}:
                raise experiment.ConfigError(
                    "two traces must carry opposite detuning_hz signs"
                )
            estimate = estimation.occupancy_from_asymmetry(fits[+1], fits[-1])
            results["occupancy"] = estimate.to_dict()
            print(
                f"n_c = {estimate.n_c_est:.4g} +/- {estimate.ci95_n_c:.2g}  "
                f"C_r = {estimate.C_r_est:.4g}  eta_prime = {estimate.eta_prime:.4g}"
            )
    except (estimation.FitError, estimation.NonPositiveAsymmetry) as exc:
        results["error"] = f"{type(exc).__name__}: {exc}"
        print(f"estimation failed: {results['error']}", file=sys.stderr)
        exit_code = EXIT_ESTIMATION
    estimation.write_records_json(results, out_path)
    return exit_code


def cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    os.makedirs(args.out, exist_ok=True)
    traces_dir = os.path.join(args.out, "traces")
    os.makedirs(traces_dir, exist_ok=True)
    records, summary = experiment.run_sweep(scenario, jobs=args.jobs, traces_dir=traces_dir)
    experiment.write_records_csv(records, os.path.join(args.out, "records.csv"))
    experiment.write_summary_json(summary, os.path.join(args.out, "summary.json"))

    # displacement PSD of the terminal operating point, for the S_xx figure
    n_terminal = scenario.sweep[-1]
    mech = scenario.mech_at(n_terminal)
    gamma_c = cooling_rate(scenario.cooling_mode, scenario.cooling_drive(n_terminal))
    gamma_total = mech.gamma_i + gamma_c
    n_c = records[-1].n_c_true
    grid = spectra.default_sxx_grid(mech, gamma_total)
    sxx = spectra.displacement_psd(mech, n_c, gamma_total, grid)
    spectra.write_trace_csv(sxx, os.path.join(args.out, "sxx.csv"))

    failed = summary["n_failed"]
    log.info(
        "sweep finished: %d points, %d failed, terminal n_c_est = %.4g",
        summary["n_points"], failed, summary["terminal_n_c_est"],
    )
    print(
        f"terminal point: n_c_true = {summary['terminal_n_c_true']:.4g}, "
        f"n_c_est = {summary['terminal_n_c_est']:.4g} ({failed} failed points)"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    records_path = os.path.join(args.in_dir, "records.csv")
    if not os.path.exists(records_path):
        raise experiment.ConfigError(f"no records.csv in {args.in_dir}")
    records = experiment.read_records_csv(records_path)
    traces_dir = os.path.join(args.in_dir, "traces")
    written = experiment.report(
        records, args.out, traces_dir if os.path.isdir(traces_dir) else None
    )
    sxx_path = os.path.join(args.in_dir, "sxx.csv")
    if os.path.exists(sxx_path):
        target = os.path.join(args.out, "table_sxx.csv")
        tmp = target + ".tmp"
        shutil.copyfile(sxx_path, tmp)
        os.replace(tmp, target)
        written.append(target)
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sideband-thermo",
        description=(
            "Simulate motional-sideband spectra of a laser-cooled nanomechanical "
            "oscillator and infer its phonon occupancy from the sideband asymmetry."
        ),
    )
    parser.add_argument("--verbose", action="store_true", help="enable info logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write both detuning-branch traces + truth sidecar")
    p_sim.add_argument("--config", required=True, help="scenario TOML file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_fit = sub.add_parser("fit", help="fit trace CSVs and estimate the occupancy")
    p_fit.add_argument("traces", nargs="+", help="one or two trace CSV files")
    p_fit.add_argument("--out", required=True, help="output directory")

    p_sweep = sub.add_parser("sweep", help="run the cooling-power sweep")
    p_sweep.add_argument("--config", required=True, help="scenario TOML file")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sweep.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")

    p_rep = sub.add_parser("report", help="reduce sweep records to analysis tables")
    p_rep.add_argument("in_dir", help="sweep output directory")
    p_rep.add_argument("--out", required=True, help="report directory")

    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (experiment.ConfigError, spectra.GainUnderdetermined) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except spectra.TraceParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (estimation.FitError, estimation.NonPositiveAsymmetry) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
