#!/usr/bin/env python3
"""
Command-line interface for cccharts.

Subcommands: chart, ball, distance, norms, scaling, flow, verify.
Exit codes: 0 success, 1 pipeline or invariant failure, 2 usage or config error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .ccmetric import ball_volume, cc_distance
from .chart import build_chart, chart_to_json, sample_Y, uniform_ball_points
from .config import Config, load_config, load_settings
from .density import Density, change_of_variables_check, g_ratio_sweep, weighted_ball_measure
from .errors import CCChartsError, ConfigError, ExprSyntaxError, FlowError
from .fields import Box
from .flows import FlowOptions, flow_trajectory
from .funcspaces import (adapted_holder_norm, adapted_zygmund_norm, cml_norm, holder_norm, inclusion_check,
                         zygmund_norm)
from .output import write_csv, write_json
from .scaling import (DOUBLING_HEADER, VOLUME_HEADER, doubling_ladder, doubling_rows, jacobian_band, nsw_chart,
                      volume_vs_lambda)
from .suites import SUITES, run_suites, write_junit

logger = logging.getLogger('cccharts')

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
PULLBACK_LIMIT = 1e-4
BALL_HEADER = ('center', 'delta', 'volume', 'stderr', 'samples', 'seed', 'weight')


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def point(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def delta_range(text: str) -> List[float]:
    """START:END:COUNT -> COUNT evenly spaced deltas in (0, 1]."""
    try:
        start, end, count = text.split(':')
        start, end, count = float(start), float(end), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"deltas must read START:END:COUNT, got {text!r}")
    if count < 1 or not 0.0 < start <= end <= 1.0:
        raise argparse.ArgumentTypeError(f"need 0 < START <= END <= 1 and COUNT >= 1, got {text!r}")
    return [start] if count == 1 else np.linspace(start, end, count).tolist()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help="Experiment TOML file")
    common.add_argument('--out', type=Path, help="Output directory (default CCCHARTS_OUTPUT_DIR)")
    common.add_argument('--seed', type=int, help="Random seed")
    common.add_argument('--samples', type=positive_int, help="Monte-Carlo samples")
    common.add_argument('--grid', type=positive_int, help="Grid resolution (odd)")
    common.add_argument('--tol', type=float, help="Solver tolerance")
    common.add_argument('--threads', type=positive_int, help="Worker threads (default CCCHARTS_THREADS)")
    common.add_argument('--verbose', action='store_true', help="Enable verbose logging")

    parser = argparse.ArgumentParser(prog='cccharts',
                                     description="Canonical coordinate charts for systems of vector fields")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('chart', parents=[common], help="Build and verify the chart at the base point")
    p.add_argument('--sample-y', type=positive_int, help="Also write Y_j at this many sampled t")
    p.add_argument('--radii', action='store_true', help="Estimate the ball radii xi1, xi2")

    p = sub.add_parser('ball', parents=[common], help="Monte-Carlo volume of a Carnot-Caratheodory ball")
    p.add_argument('--delta', type=float, default=1.0, help="Ball radius")
    p.add_argument('--graded', action='store_true', help="Use the field degrees (graded ball)")

    p = sub.add_parser('distance', parents=[common], help="Upper estimate of rho between two points")
    p.add_argument('--to', type=point, required=True, help="Target point, comma separated")
    p.add_argument('--from', dest='origin', type=point, help="Start point (default base point)")

    p = sub.add_parser('norms', parents=[common], help="Function-space norm estimates")
    p.add_argument('--function', required=True, help="Expression in x1..xn")
    p.add_argument('--family', default='zygmund',
                   choices=['holder', 'zygmund', 'adapted-holder', 'adapted-zygmund', 'cml', 'inclusion'])
    p.add_argument('--s', type=float, default=1.0, help="Smoothness exponent")
    p.add_argument('--m', type=int, default=0, help="Derivative order")
    p.add_argument('--radius', type=float, default=1.0, help="Half width of the box around the base point")

    p = sub.add_parser('scaling', parents=[common], help="Volume law Vol(B(x, delta)) against Lambda(x, delta)")
    p.add_argument('--deltas', type=delta_range, default=delta_range('0.2:1.0:5'), help="START:END:COUNT")
    p.add_argument('--doubling', action='store_true', help="Also write the doubling ladder")
    p.add_argument('--maps', action='store_true', help="Also build the scaling charts at each delta")

    p = sub.add_parser('flow', parents=[common], help="RK4 trajectory of one field")
    p.add_argument('--field', default='1', help="Field name or 1-based index")
    p.add_argument('--time', type=float, required=True, help="Flow time")
    p.add_argument('--from', dest='origin', type=point, help="Start point (default base point)")

    p = sub.add_parser('verify', parents=[common], help="Run the invariant suites on the built-in systems")
    p.add_argument('--suite', action='append', choices=list(SUITES), help="Suite to run (repeatable)")
    return parser


def _load(args, settings) -> Config:
    if args.config is None:
        raise ConfigError(f"--config is required for {args.command}")
    config = load_config(args.config, threads=settings['threads'])
    return config.with_solver(seed=args.seed, samples=args.samples, grid=args.grid, tol=args.tol,
                              threads=args.threads)


def _out(args, settings) -> Path:
    return Path(args.out or settings['output_directory'])


def _start(config: Config, origin: Optional[Sequence[float]]) -> np.ndarray:
    x = np.asarray(config.base_point if origin is None else origin, dtype=float)
    if x.shape != (config.n,):
        raise ConfigError(f"point {x.tolist()} has {x.size} coordinates, expected {config.n}")
    return x


def cmd_chart(args, settings) -> int:
    config = _load(args, settings)
    chart_config = config.solver.chart_config()
    if args.radii:
        chart_config = replace(chart_config, estimate_radii=True)
    chart, diagnostics = build_chart(config.system, config.base_point, config=chart_config)
    out = _out(args, settings)
    chart_to_json(chart, diagnostics, out / 'chart.json')

    if args.sample_y:
        rng = np.random.default_rng(config.solver.seed)
        T = uniform_ball_points(rng, args.sample_y, chart.n, chart.radii.eta1)
        Y = sample_Y(chart, T)
        header = ['t'] + [f"Y{j + 1}" for j in range(chart.S.q)]
        write_csv(out / 'chart_Y.csv', header, ([t] + list(y) for t, y in zip(T, Y)))

    if config.density is not None:
        nu = Density.from_expr(config.density, config.n)
        write_json(out / 'chart_density.json', {
            'change_of_variables': change_of_variables_check(chart, nu, seed=config.solver.seed),
            'g_ratio': g_ratio_sweep(chart, nu, seed=config.solver.seed),
        })

    bounds = diagnostics.residuals['A_bound']
    pullback = diagnostics.residuals['pullback']['max']
    if not (bounds['half_bound_ok'] and bounds['sixteenth_bound_ok']):
        logger.error(f"A violates its explicit bounds: {bounds}")
        return 1
    if pullback > PULLBACK_LIMIT:
        logger.error(f"dPhi Y - X o Phi residual {pullback:.3g} exceeds {PULLBACK_LIMIT:g}")
        return 1
    return 0


def cmd_ball(args, settings) -> int:
    config = _load(args, settings)
    solver = config.solver
    degrees = config.graded().degrees if args.graded else None
    est = ball_volume(config.system, config.base_point, args.delta, solver.samples, solver.seed,
                      solver.cc_params(), degrees)
    rows = [est.to_row() + ['lebesgue']]
    if config.density is not None:
        nu = Density.from_expr(config.density, config.n)
        system = config.graded().scaled_system(args.delta) if args.graded else config.system
        radius = 1.0 if args.graded else args.delta
        w = weighted_ball_measure(system, config.base_point, radius, nu, solver.samples, solver.seed,
                                  solver.cc_params())
        rows.append([list(config.base_point), args.delta, w.value, w.stderr, w.samples, solver.seed, w.tag])
    write_csv(_out(args, settings) / 'ball.csv', BALL_HEADER, rows)
    logger.info(f"ball volume {est.volume:.6g} +- {est.stderr:.2g}")
    return 0


def cmd_distance(args, settings) -> int:
    config = _load(args, settings)
    x = _start(config, args.origin)
    y = _start(config, args.to)
    est = cc_distance(config.system, x, y, config.solver.cc_params())
    write_json(_out(args, settings) / 'distance.json', {'from': x, 'to': y, 'estimate': est})
    logger.info(f"rho estimate {est.value:.6g}{' (unreachable)' if est.unreachable else ''}")
    return 0


def cmd_norms(args, settings) -> int:
    config = _load(args, settings)
    region = Box.around(config.base_point, args.radius).intersect(config.system.domain)
    grid = config.solver.grid if args.grid else 33
    params = config.solver.cc_params()
    if args.family == 'holder':
        report = holder_norm(args.function, region, args.m, args.s, grid)
    elif args.family == 'zygmund':
        report = zygmund_norm(args.function, region, args.s, grid)
    elif args.family == 'adapted-holder':
        report = adapted_holder_norm(args.function, config.system, region, args.m, args.s, grid, params)
    elif args.family == 'adapted-zygmund':
        report = adapted_zygmund_norm(args.function, config.system, region, args.s, grid, params)
    elif args.family == 'cml':
        report = cml_norm(args.function, args.m, 2, args.s, region, grid)
    else:
        report = inclusion_check(args.function, region, min(args.s, 0.5), args.s, args.m, grid)
    write_json(_out(args, settings) / 'norms.json', {'function': args.function, 'report': report})
    return 0


def cmd_scaling(args, settings) -> int:
    config = _load(args, settings)
    G = config.graded()
    solver = config.solver
    x = np.asarray(config.base_point)
    report = volume_vs_lambda(G, x, args.deltas, solver.samples, solver.seed, solver.cc_params())
    out = _out(args, settings)
    write_csv(out / 'scaling.csv', VOLUME_HEADER, report.to_rows())
    summary = report.to_dict()
    del summary['rows']
    if report.slope is None:
        del summary['slope'], summary['intercept']
    if args.doubling:
        ladder = doubling_ladder(G, x, args.deltas, solver.samples, solver.seed, solver.cc_params())
        write_csv(out / 'doubling.csv', DOUBLING_HEADER, doubling_rows(ladder))
    if args.maps:
        summary['maps'] = []
        for delta in args.deltas:
            nsw = nsw_chart(G, x, delta, solver.chart_config())
            summary['maps'].append({'delta': delta, 'lambda': nsw.lam, 'J': list(nsw.J),
                                    'jacobian_band': jacobian_band(nsw, seed=solver.seed)})
    write_json(out / 'scaling.json', summary)
    return 0


def cmd_flow(args, settings) -> int:
    config = _load(args, settings)
    S = config.system
    names = [f.name for f in S.fields]
    if args.field in names:
        X = S.fields[names.index(args.field)]
    elif args.field.isdigit() and 1 <= int(args.field) <= S.q:
        X = S.fields[int(args.field) - 1]
    else:
        raise ConfigError(f"unknown field {args.field!r}; fields are {names}")
    x0 = _start(config, args.origin)
    opts = FlowOptions(steps_per_unit=config.solver.rk4_steps, domain=S.domain)
    times, states = flow_trajectory(X, x0, args.time, opts)
    header = ['t'] + [f"x{i + 1}" for i in range(S.n)]
    write_csv(_out(args, settings) / 'flow.csv', header, ([t] + list(s) for t, s in zip(times, states)))
    if abs(times[-1]) < abs(args.time) * (1.0 - 1e-12):
        raise FlowError(f"flow of {X.name!r} stopped at t={times[-1]:.6g}", times[-1], states[-1], 'exit')
    logger.info(f"flow endpoint {states[-1].tolist()}")
    return 0


def cmd_verify(args, settings) -> int:
    seed = 0 if args.seed is None else args.seed
    results = run_suites(args.suite, seed)
    out = _out(args, settings)
    write_junit(results, out / 'verify.xml')
    write_json(out / 'verify.json', {'seed': seed, 'suites': results})
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"suites with failures: {failed}")
        return 1
    return 0


COMMANDS = {
    'chart': cmd_chart,
    'ball': cmd_ball,
    'distance': cmd_distance,
    'norms': cmd_norms,
    'scaling': cmd_scaling,
    'flow': cmd_flow,
    'verify': cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        settings = load_settings()
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    if not args.verbose:
        logging.getLogger().setLevel(settings['log_level'])

    try:
        return COMMANDS[args.command](args, settings)
    except (ConfigError, ExprSyntaxError) as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except CCChartsError as e:
        logger.error(f"Error: {e}")
        return 1
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
