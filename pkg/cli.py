import argparse
import logging
import sys

from config import configure_logging, parse_config
from errors import ConfigError, SimulationError, VerificationError
from protocols import efficiency_scan, run_configured
from stability import eigenvalues, is_stable_eigen, is_stable_routh_hurwitz, linearize
from steady_state import solve_operating_point, spectrum_sweep
from verify import run_verification
from writer import (
    FLOAT_FORMAT,
    memory_summary_frame,
    plot_frame,
    scan_frame,
    stability_frame,
    sweep_frame,
    trajectory_frame,
    transduction_summary_frame,
    verify_frame,
    write_csv,
    write_resolved_config,
)

SUBCOMMANDS = ("spectrum", "stability", "memory", "transduce", "scan", "verify")


def _write(frame, config, stem, suffix, plot_data):
    write_csv(frame, config.out_dir, f"{stem}_{suffix}.csv")
    if plot_data:
        write_csv(plot_frame(frame), config.out_dir, f"{stem}_{suffix}_plot.csv")


def dispatch(subcommand, config, plot_data=False):
    """Run one subcommand and write its CSV outputs next to the resolved config. Returns the exit status."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}")
    stem = f"{subcommand}_{config.config_hash()}"
    write_resolved_config(config, config.out_dir)
    logging.info(f"Running {subcommand} into {config.out_dir} (stem {stem})")

    if subcommand == "spectrum":
        rows = spectrum_sweep(config.system_params(), config.drive_config(), config.sweep_range, config.n_points)
        _write(sweep_frame(rows), config, stem, "sweep", plot_data)

    elif subcommand == "stability":
        params = config.system_params()
        system = linearize(params, solve_operating_point(params, config.drive_config()))
        frame = stability_frame(is_stable_routh_hurwitz(system), eigenvalues(system), is_stable_eigen(system))
        write_csv(frame, config.out_dir, f"{stem}_stability.csv")
        print(frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"), end="")

    elif subcommand == "memory":
        result = run_configured(config, "memory")
        _write(trajectory_frame(result.trajectory), config, stem, "trajectory", plot_data)
        write_csv(memory_summary_frame(result, config.config_hash()), config.out_dir, f"{stem}_summary.csv")

    elif subcommand == "transduce":
        result = run_configured(config, "transduction")
        _write(trajectory_frame(result.trajectory), config, stem, "trajectory", plot_data)
        write_csv(transduction_summary_frame(result, config.config_hash()), config.out_dir, f"{stem}_summary.csv")

    elif subcommand == "scan":
        if config.scan_key is None:
            raise ConfigError("the scan subcommand needs scan_key and scan_values", key="scan_key")
        rows = efficiency_scan(config, config.scan_key, config.scan_value_list())
        write_csv(scan_frame(rows, config.scan_key), config.out_dir, f"{stem}_scan.csv")

    else:
        checks = run_verification(config)
        write_csv(verify_frame(checks), config.out_dir, f"{stem}_verify.csv")
        failed = [check.name for check in checks if not check.passed]
        if failed:
            raise VerificationError(f"{len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        description="Double-cavity optomechanical memory and transduction simulator"
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--dt", type=float, help="integration step in seconds (overrides dt_s)")
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="replace one config key; repeatable",
    )
    parser.add_argument("--plot-data", action="store_true", help="also write downsampled series for plotting")
    return parser


def error_line(error):
    message = " ".join(str(error).split())
    return f"error code={error.exit_code} kind={type(error).__name__} message={message}"


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging()
    overrides = list(args.override)
    if args.dt is not None:
        overrides.append(f"dt_s={args.dt!r}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    try:
        config = parse_config(args.config, overrides)
        return dispatch(args.subcommand, config, plot_data=args.plot_data)
    except SimulationError as e:
        logging.error(f"{args.subcommand} failed: {e}")
        print(error_line(e), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
