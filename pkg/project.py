import sys
import argparse
import logging
from models.model import State2, State3
from models.equilibria import analyze_model
from models.simulate import (
    IntegrationOptions, integrate, basin_map, write_trajectory_csv, read_trajectory_csv,
    write_basin_csv, read_basin_csv,
)
from services.report import load_model_spec, build_report, write_report, load_report
from services.plotting import plot_report, plot_trajectories, plot_basin
from helpers.utils import setup_logging, parse_state
from helpers.errors import SirfError, EXIT_OK, EXIT_VALIDATION
from helpers.constants import (
    APP_NAME, LOG_FILE, LOG_LEVEL, GRID_POINTS, RK4_STEP, BASIN_STEP, BASIN_T_END, WORKERS,
)


def analyze(model_path, grid_points=GRID_POINTS, out=None):
    """
    Analyze the model in a spec file and write the JSON report.

    Args:
        model_path (str): Model specification file.
        grid_points (int): Root-search grid intervals.
        out (str, optional): Report destination; stdout when omitted.

    Returns:
        dict: The report.
    """
    spec = load_model_spec(model_path)
    analysis = analyze_model(spec.model, grid_points=grid_points)
    report = build_report(analysis, spec)
    text = write_report(report, out)
    if out is None:
        sys.stdout.write(text)
    return report


def simulate(model_path, init, t_end, step=RK4_STEP, method='rk4', stride=1, out=None):
    """
    Integrate one trajectory and write it as CSV.

    Args:
        init (str): "I,R" for the reduced system or "S,I,R" for the full one.

    Returns:
        Trajectory: The integrated trajectory with its terminal status.
    """
    spec = load_model_spec(model_path)
    values = parse_state(init)
    state = State2(*values) if len(values) == 2 else State3(*values)
    analysis = analyze_model(spec.model)
    opts = IntegrationOptions(method=method, step=step, stride=stride)
    traj = integrate(spec.model, state, t_end, opts, equilibria=analysis.equilibria)
    if out:
        write_trajectory_csv(traj, out)
    final = ', '.join(f"{name}={value:.10g}" for name, value in zip(traj.columns[1:], traj.final))
    print(f"{traj.status}{' to ' + traj.limit_id if traj.limit_id else ''} at tau={traj.times[-1]:g}: {final}")
    return traj


def basin(model_path, n, t_end=BASIN_T_END, step=BASIN_STEP, workers=WORKERS, out=None):
    """Map basins of attraction on an n x n lattice over Omega and write them as CSV."""
    spec = load_model_spec(model_path)
    analysis = analyze_model(spec.model)
    result = basin_map(spec.model, analysis, n, t_end=t_end, step=step, workers=workers)
    if out:
        write_basin_csv(result, out)
    summary = ', '.join(f"{outcome}={count}" for outcome, count in result.counts.items())
    print(f"{len(result.cells)} cells: {summary}")
    return result


def plot(out, report_path=None, basin_path=None, traj_paths=None):
    """Render exactly one of a report, a basin CSV or trajectory CSVs to SVG."""
    if report_path:
        plot_report(load_report(report_path), out)
    elif basin_path:
        plot_basin(read_basin_csv(basin_path), out)
    else:
        plot_trajectories([read_trajectory_csv(path) for path in traj_paths], out)
    return out


def run_command(func, *args, **kwargs):
    """
    Run a command and map failures to exit codes.

    Returns:
        int: 0 on success, 2 for validation errors, 3 for numeric failures.
    """
    try:
        func(*args, **kwargs)
        return EXIT_OK
    except SirfError as e:
        logging.error(f"{func.__name__} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logging.error(f"{func.__name__} could not access a file: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


def cmd_analyze(args):
    return run_command(analyze, args.model, args.grid, args.out)


def cmd_simulate(args):
    return run_command(simulate, args.model, args.init, args.t_end, args.step, args.method, args.stride, args.out)


def cmd_basin(args):
    return run_command(basin, args.model, args.grid, args.t_end, args.step, args.workers, args.out)


def cmd_plot(args):
    return run_command(plot, args.out, args.report, args.basin, args.traj)


def build_parser():
    parser = argparse.ArgumentParser(prog='sirf', description=f"{APP_NAME}: SIR models with a recovery-dependent infection rate")
    parser.add_argument('--verbose', action='store_true', help='also log to stderr')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('analyze', help='find and classify equilibria, issue certificates')
    p.add_argument('--model', required=True, help='model specification JSON')
    p.add_argument('--grid', type=int, default=GRID_POINTS, help='root-search grid intervals')
    p.add_argument('--out', help='report JSON (stdout when omitted)')
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser('simulate', help='integrate one trajectory')
    p.add_argument('--model', required=True)
    p.add_argument('--init', required=True, help='"I,R" or "S,I,R"')
    p.add_argument('--t-end', type=float, required=True)
    p.add_argument('--step', type=float, default=RK4_STEP)
    p.add_argument('--method', choices=('rk4', 'rkf45'), default='rk4')
    p.add_argument('--stride', type=int, default=1, help='keep every stride-th step')
    p.add_argument('--out', help='trajectory CSV')
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser('basin', help='map basins of attraction')
    p.add_argument('--model', required=True)
    p.add_argument('--grid', type=int, required=True, help='lattice points per axis')
    p.add_argument('--t-end', type=float, default=BASIN_T_END)
    p.add_argument('--step', type=float, default=BASIN_STEP)
    p.add_argument('--workers', type=int, default=WORKERS)
    p.add_argument('--out', help='basin CSV')
    p.set_defaults(handler=cmd_basin)

    p = sub.add_parser('plot', help='render a report, basin map or trajectories as SVG')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--report')
    source.add_argument('--basin')
    source.add_argument('--traj', nargs='+')
    p.add_argument('--out', required=True, help='SVG file')
    p.set_defaults(handler=cmd_plot)
    return parser


def main(argv=None):
    """
    Parse the command line, set up logging and dispatch to the sub-command.

    Returns:
        int: The process exit code.
    """
    args = build_parser().parse_args(argv)
    setup_logging(LOG_LEVEL, LOG_FILE, verbose=args.verbose)
    logging.info(f"{APP_NAME} command: {args.command}")
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
