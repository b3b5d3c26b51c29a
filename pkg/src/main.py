import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from analysis.exactness_analysis import check_exactness
from analysis.trajectory_simulator import SimulationError, consistency_report, simulate, simulate_trajectory
from data_acquisition.rolling_stock import InputDataError, load_rolling_stock
from data_acquisition.route_data import DiscretizationError, discretize, load_route
from model.conic_program import ProgramBuildError
from model.eetc_program import (JOULES_PER_KWH, InfeasibleTimeError, TimeMode, build_program,
                                extract_trajectory)
from solver.interior_point import SolverSettings, SolverStatus, solve
from utils.io_utils import (RunReport, read_trajectory_csv, speed_points, write_run_report,
                            write_trajectory_csv)
from utils.sample_data import SYNTHETIC_JOURNEY_TIME_S, sample_route, sample_stock

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

STATUS_EXIT_CODES = {
    SolverStatus.OPTIMAL: EXIT_OK,
    SolverStatus.PRIMAL_INFEASIBLE: EXIT_INFEASIBLE,
    SolverStatus.DUAL_INFEASIBLE: EXIT_INFEASIBLE,
    SolverStatus.ITERATION_LIMIT: EXIT_NUMERICAL,
    SolverStatus.NUMERICAL_ERROR: EXIT_NUMERICAL,
}

DEFAULT_SEGMENTS_LIST = '25,50,100,250,500,1000,2500,5000,10000'
DEFAULT_BENCH_TIME_LIMIT_S = 100.0
TIMEOUT_STATUS = 'TIMEOUT'
BENCH_COLUMNS = ['N', 'status', 'objective_kWh', 'iterations', 'wall_s', 'repeats', 'parallel']


class UsageError(Exception):
    """Bad command-line usage."""


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which is the infeasible code here
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='eetc', description='Energy-efficient train control by convex optimization')
    sub = parser.add_subparsers(dest='command', required=True)

    p_solve = sub.add_parser('solve', help='Solve one instance and verify the result')
    p_solve.add_argument('--route', required=True, help='Route JSON file')
    p_solve.add_argument('--stock', required=True, help='Rolling-stock JSON file')
    p_solve.add_argument('--time', type=float, required=True, help='Scheduled running time T (s)')
    p_solve.add_argument('--segments', type=int, required=True, help='Number of segments N')
    p_solve.add_argument('--mode', choices=[m.value for m in TimeMode], default=TimeMode.ENDPOINT.value)
    p_solve.add_argument('--gap-tol', type=float, default=SolverSettings.gap_tol)
    p_solve.add_argument('--start-speed', type=float, default=0.0, help='Departure speed (m/s)')
    p_solve.add_argument('--end-speed', type=float, default=None,
                         help='Arrival speed (m/s); default 0 in trapezoidal mode, free in endpoint mode')
    p_solve.add_argument('--free-end-speed', action='store_true', help='Leave the arrival speed free')
    p_solve.add_argument('--rotated-cones', action='store_true', help='Emit rotated second-order cones')
    p_solve.add_argument('--verbose', action='store_true', help='Log every solver iteration')
    p_solve.add_argument('--out', help='Trajectory CSV output')
    p_solve.add_argument('--report', help='RunReport JSON output')
    p_solve.set_defaults(handler=cmd_solve)

    p_verify = sub.add_parser('verify', help='Recompute energy and time of a trajectory CSV')
    p_verify.add_argument('--trajectory', required=True)
    p_verify.add_argument('--stock', required=True)
    p_verify.add_argument('--route', required=True)
    p_verify.set_defaults(handler=cmd_verify)

    p_bench = sub.add_parser('bench', help='Solver time against the segment count')
    p_bench.add_argument('--segments-list', default=DEFAULT_SEGMENTS_LIST)
    p_bench.add_argument('--time-limit', type=float, default=DEFAULT_BENCH_TIME_LIMIT_S,
                         help='Rows slower than this (s) are marked TIMEOUT')
    p_bench.add_argument('--time', type=float, default=SYNTHETIC_JOURNEY_TIME_S)
    p_bench.add_argument('--mode', choices=[m.value for m in TimeMode], default=TimeMode.ENDPOINT.value)
    p_bench.add_argument('--route', help='Route JSON file (synthetic flat route if omitted)')
    p_bench.add_argument('--stock', help='Rolling-stock JSON file (reference suburban stock if omitted)')
    p_bench.add_argument('--repeats', type=int, default=1)
    p_bench.add_argument('--parallel', action='store_true', help='Run the solves concurrently')
    p_bench.add_argument('--out', help='CSV output (stdout if omitted)')
    p_bench.set_defaults(handler=cmd_bench)
    return parser


def _end_speed(args, mode: TimeMode) -> Optional[float]:
    if args.free_end_speed:
        if args.end_speed is not None:
            raise UsageError("--end-speed and --free-end-speed are mutually exclusive")
        return None
    if args.end_speed is not None:
        return args.end_speed
    if mode is TimeMode.ENDPOINT:
        logger.warning("Endpoint mode: arrival speed left free (alpha_N = 1/v_N needs v_N > 0)")
        return None
    return 0.0


def cmd_solve(args) -> int:
    stock = load_rolling_stock(args.stock)
    route = load_route(args.route)
    mode = TimeMode(args.mode)
    disc = discretize(route, args.segments, (args.start_speed, _end_speed(args, mode)))
    program, vmap = build_program(stock, disc, args.time, mode, rotated_cones=args.rotated_cones)

    settings = SolverSettings(gap_tol=args.gap_tol, verbose=args.verbose)
    solution = solve(program, settings)
    if solution.status is not SolverStatus.OPTIMAL:
        logger.error(f"Solver stopped with status {solution.status.value}")
        return STATUS_EXIT_CODES[solution.status]

    traj = extract_trajectory(solution, vmap, disc)
    sim = simulate_trajectory(traj, stock, route)
    exactness = check_exactness(traj)
    consistency = consistency_report(traj, sim, args.time)

    print(consistency.format_table())
    print(f"Max relaxation deviation: alpha {exactness.max_alpha_dev_rel:.3e} (point {exactness.alpha_argmax}), "
          f"beta {exactness.max_beta_dev_rel:.3e} (point {exactness.beta_argmax})")
    print(f"Solver: {solution.iterations} iterations, gap {solution.gap:.2e}")

    if args.out:
        write_trajectory_csv(traj, args.out)
    if args.report:
        report = RunReport(
            distance_m=disc.total_distance_m,
            journey_time_s=args.time,
            n_segments=disc.n_segments,
            mode=mode.value,
            start_speed_mps=disc.start_speed_m_per_s,
            end_speed_mps=disc.end_speed_m_per_s,
            status=solution.status.value,
            objective_kWh=traj.objective_kWh,
            simulated_energy_kWh=sim.energy_kWh,
            simulated_time_s=sim.running_time_s,
            energy_difference_kWh=consistency.energy_difference_kWh,
            time_difference_s=consistency.time_difference_s,
            max_alpha_dev_rel=exactness.max_alpha_dev_rel,
            max_beta_dev_rel=exactness.max_beta_dev_rel,
            iterations=solution.iterations,
            gap=solution.gap,
            solver_wall_time_s=solution.wall_time_s,
        )
        write_run_report(report, args.report)
    return EXIT_OK


def cmd_verify(args) -> int:
    stock = load_rolling_stock(args.stock)
    route = load_route(args.route)
    frame = read_trajectory_csv(args.trajectory)
    sim = simulate(speed_points(frame), stock, route)
    print(f"t = {sim.running_time_s:.3f} s, e = {sim.energy_kWh:.4f} kWh")
    return EXIT_OK


def parse_segments_list(text: str) -> List[int]:
    items = [item.strip() for item in text.split(',') if item.strip()]
    if not items:
        raise UsageError("--segments-list is empty")
    try:
        return [int(item) for item in items]
    except ValueError as e:
        raise UsageError(f"--segments-list must be a comma-separated list of integers: {e}") from e


def _bench_row(n: int, stock, route, args, parallel: bool) -> dict:
    disc = discretize(route, n, (0.0, 0.0 if args.mode == TimeMode.TRAPEZOIDAL.value else None))
    program, _ = build_program(stock, disc, args.time, args.mode)
    settings = SolverSettings(time_limit_s=args.time_limit)

    walls, solution = [], None
    for _ in range(args.repeats):
        start = time.perf_counter()
        solution = solve(program, settings)
        walls.append(time.perf_counter() - start)
    wall = float(np.median(walls))

    status = solution.status.value
    if wall > args.time_limit:
        status = TIMEOUT_STATUS
    objective = (solution.primal_objective / JOULES_PER_KWH
                 if solution.status is SolverStatus.OPTIMAL else np.nan)
    logger.info(f"N = {n}: {status} in {wall:.3f} s")
    return {
        'N': n,
        'status': status,
        'objective_kWh': objective,
        'iterations': solution.iterations,
        'wall_s': wall,
        'repeats': args.repeats,
        'parallel': parallel,
    }


def cmd_bench(args) -> int:
    segments = parse_segments_list(args.segments_list)
    if args.repeats < 1:
        raise UsageError(f"--repeats must be at least 1, got {args.repeats}")
    if not args.time_limit > 0:
        raise UsageError(f"--time-limit must be positive, got {args.time_limit}")
    stock = load_rolling_stock(args.stock) if args.stock else sample_stock()
    route = load_route(args.route) if args.route else sample_route()

    if args.parallel:
        with ThreadPoolExecutor() as pool:
            rows = list(pool.map(lambda n: _bench_row(n, stock, route, args, True), segments))
    else:
        rows = [_bench_row(n, stock, route, args, False) for n in segments]

    table = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    if args.out:
        table.to_csv(args.out, index=False)
        logger.info(f"Benchmark results written to {args.out}")
    else:
        print(table.to_csv(index=False), end='')
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except InfeasibleTimeError as e:
        logger.error(f"Infeasible instance: {e}")
        return EXIT_INFEASIBLE
    except (UsageError, InputDataError, DiscretizationError, ProgramBuildError,
            SimulationError, OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
