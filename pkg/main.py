#!/usr/bin/env python3
"""
FastQM - Quadratic Manifold Model Reduction Entry Point

Commands:
1. svd             Center snapshots and compute the candidate basis
2. fit             Fit a POD, POD-QM, greedy or Riemannian quadratic manifold
3. eval            Measure the relative reconstruction error on test snapshots
4. sweep           Fit and evaluate a grid of (r, q, m, gamma) values
5. synth           Generate synthetic snapshot data
6. rotation-sweep  Error landscape over rotations of a 2-D data set

Usage:
    python main.py synth --output data/parabola.csv
    python main.py svd --input data/parabola.csv --output out/basis.fqm --centering zero
    python main.py fit --basis out/basis.fqm --method riemannian --r 1 --q 1 --output out/model.fqm
    python main.py --help

Exit codes: 0 success, 1 usage or input error, 2 I/O error, 3 numerical failure.
"""

import argparse
import sys
from dataclasses import fields

import numpy as np

from src import __version__
from src.reduction_pipeline import ReductionPipeline
from src.utils.config import CENTERING_MODES, METHODS, SVD_METHODS, SYNTH_KINDS, RunConfig
from src.utils.errors import FastQMError, NumericalError
from src.utils.logger import set_level, setup_logger

logger = setup_logger()

RUN_FIELDS = {f.name for f in fields(RunConfig)}


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _banner(title: str) -> None:
    print("\n" + "=" * 70)
    print(f"📊 FASTQM - {title}")
    print("=" * 70)


def print_svd(results) -> None:
    _banner("CANDIDATE BASIS")
    print(f"   • Snapshots: {results['n_dofs']} × {results['n_snapshots']}")
    print(f"   • Candidate modes m: {results['m']}")
    print(f"   • Leading singular values: "
          f"{', '.join(f'{s:.6g}' for s in results['leading_sigma'])}")
    print(f"   • POD error with all m modes: {results['pod_error_m']:.6e}")
    print(f"\n💾 Basis written to {results['output']}")
    print(f"⏱️  Duration: {results['duration_seconds']:.2f} seconds")
    print("=" * 70)


def print_fit(results) -> None:
    _banner("FIT SUMMARY")
    print(f"   • Method: {results['method']} (r={results['r']}, q={results['q']}, m={results['m']})")
    if results['termination']:
        print(f"   • Iterations: {results['iterations']} ({results['termination']})")
    if results['selected_modes']:
        print(f"   • Selected modes: {results['selected_modes']}")
    print(f"\n✅ Training relative error: {results['train_error']:.6e}")
    print(f"💾 Model written to {results['output']}")
    print(f"⏱️  Duration: {results['duration_seconds']:.2f} seconds")
    print("=" * 70)


def print_eval(results) -> None:
    _banner("EVALUATION")
    print(f"   • Test snapshots: {results['n_snapshots']}")
    for method, error in results['errors'].items():
        print(f"✅ {method}: relative error {error:.6e}")
    print(f"\n💾 Report written to {results['output']}")
    print(f"💾 Error series written to {results['series_output']}")
    print("=" * 70)


def print_sweep(results) -> None:
    _banner("SWEEP SUMMARY")
    print(f"   • Grid points: {results['rows']}")
    for status, count in results['status_counts'].items():
        icon = {'ok': '✅', 'infeasible': '⏭️', 'failed': '❌'}.get(status, '•')
        print(f"   {icon} {status}: {count}")
    print(f"\n💾 Table written to {results['output']}")
    if results['figure_output']:
        print(f"💾 Figure table written to {results['figure_output']}")
    print(f"⏱️  Duration: {results['duration_seconds']:.2f} seconds")
    print("=" * 70)


def print_synth(results) -> None:
    _banner("SYNTHETIC DATA")
    print(f"   • Shape: {results['shape'][0]} × {results['shape'][1]}")
    for path in results['files']:
        print(f"💾 Written {path}")
    print("=" * 70)


def print_rotation(results) -> None:
    _banner("ROTATION LANDSCAPE")
    print(f"   • Angles scanned: {results['points']}")
    print(f"   • Error at first angle: {results['error_at_start']:.6f}")
    print(f"\n✅ Minimum error {results['best_error']:.6f} at θ = {results['best_theta']:.4f}")
    print(f"💾 Table written to {results['output']}")
    print("=" * 70)


COMMANDS = {
    'svd': (ReductionPipeline.run_svd, print_svd),
    'fit': (ReductionPipeline.run_fit, print_fit),
    'eval': (ReductionPipeline.run_eval, print_eval),
    'sweep': (ReductionPipeline.run_sweep, print_sweep),
    'synth': (ReductionPipeline.run_synth, print_synth),
    'rotation-sweep': (ReductionPipeline.run_rotation_sweep, print_rotation),
}


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--gamma', type=float, help='Regularization γ >= 0 (default 0)')
    parser.add_argument('--grad-tol', dest='grad_tol', type=float,
                        help='Stop when the Riemannian gradient norm falls below this (default 2e-4)')
    parser.add_argument('--max-iters', dest='max_iters', type=int,
                        help='Maximum optimizer iterations (default 500)')
    parser.add_argument('--cg-restart-period', dest='cg_restart_period', type=int,
                        help='Restart conjugate gradients every this many iterations (default 50)')
    parser.add_argument('--threads', type=int,
                        help='Worker threads for sweeps and greedy selection (default FASTQM_THREADS)')


def build_parser() -> ArgumentParser:
    """Argument parser with one subcommand per pipeline stage"""
    parser = ArgumentParser(
        description="FastQM - quadratic manifold model reduction",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py synth --kind parabola --output data/parabola.csv
  python main.py svd --input data/parabola.csv --output out/basis.fqm --centering zero
  python main.py fit --basis out/basis.fqm --method riemannian --r 1 --q 1 --output out/model.fqm
  python main.py eval --model out/model.fqm --test data/parabola.csv --output out/eval.csv
  python main.py sweep --basis out/basis.fqm --r-values 1,2,3 --q 2 --output out/sweep.csv

For more information, see README.md
        """
    )
    parser.add_argument('--config', help='Flat key=value file with run parameters (flags win)')
    parser.add_argument('--log-level', dest='log_level',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    parser.add_argument('--version', action='version', version=f'FastQM v{__version__}')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    svd = commands.add_parser('svd', help='Compute the candidate basis of a snapshot matrix')
    svd.add_argument('--input', help='Snapshot matrix (CSV or FQM1), one column per snapshot; '
                     'comma separated files are concatenated')
    svd.add_argument('--output', help='Basis container to write (FQM1)')
    svd.add_argument('--m', type=int, help='Number of candidate modes (default min(N, K))')
    svd.add_argument('--centering', choices=CENTERING_MODES, help='Reference state (default mean)')
    svd.add_argument('--reference', help='Reference vector file for --centering custom')
    svd.add_argument('--svd-method', dest='svd_method', choices=SVD_METHODS,
                     help='Thin SVD route (default auto)')

    fit = commands.add_parser('fit', help='Fit a quadratic manifold on a candidate basis')
    fit.add_argument('--basis', help='Basis container written by svd')
    fit.add_argument('--output', help='Model container to write (FQM1)')
    fit.add_argument('--method', choices=METHODS, help='Fitting method (default riemannian)')
    fit.add_argument('--r', type=int, help='Reduced dimension')
    fit.add_argument('--q', type=int, help='Number of quadratic modes (default 1, ignored for pod)')
    fit.add_argument('--m', type=int, help='Use only the m leading candidate modes')
    fit.add_argument('--modes', help='Also write the optimized frame [V_r V_q] to this file')
    _add_solver_flags(fit)

    evaluate = commands.add_parser('eval', help='Evaluate a model on test snapshots')
    evaluate.add_argument('--model', help='Model container written by fit; comma separated '
                          'models are compared on the same test data')
    evaluate.add_argument('--test', help='Test snapshot matrix (CSV or FQM1)')
    evaluate.add_argument('--output', help='Error report CSV')

    sweep = commands.add_parser('sweep', help='Fit and evaluate a parameter grid')
    sweep.add_argument('--basis', help='Basis container of the training data')
    sweep.add_argument('--test', help='Optional test snapshots for test errors')
    sweep.add_argument('--output', help='Sweep table CSV')
    sweep.add_argument('--methods', help=f"Comma separated subset of {','.join(METHODS)}")
    sweep.add_argument('--r', type=int, help='Fixed r when --r-values is not given')
    sweep.add_argument('--q', type=int, help='Fixed q when --q-values is not given')
    sweep.add_argument('--r-values', dest='r_values', help='Comma separated r grid')
    sweep.add_argument('--q-values', dest='q_values', help='Comma separated q grid')
    sweep.add_argument('--m-values', dest='m_values', help='Comma separated m grid')
    sweep.add_argument('--gamma-values', dest='gamma_values', help='Comma separated γ grid')
    _add_solver_flags(sweep)

    synth = commands.add_parser('synth', help='Generate synthetic snapshots')
    synth.add_argument('--kind', choices=SYNTH_KINDS, help='Data set (default parabola)')
    synth.add_argument('--output', help='Snapshot file to write (.csv or FQM1)')
    synth.add_argument('--samples', type=int, help='Number of snapshots (default 25)')
    synth.add_argument('--n', type=int, help='State dimension of the poly data set')
    synth.add_argument('--r-true', dest='r_true', type=int, help='Intrinsic dimension of poly data')
    synth.add_argument('--quadratic-scale', dest='quadratic_scale', type=float,
                       help='Scale of the quadratic coefficients of poly data')
    synth.add_argument('--seed', type=int, help='Random seed')
    synth.add_argument('--split', action='store_const', const=True,
                       help='Write interleaved <stem>_train and <stem>_test files')

    rotation = commands.add_parser('rotation-sweep', help='Error over rotated 2-D frames')
    rotation.add_argument('--input', help='Two-dimensional snapshots (default: parabola)')
    rotation.add_argument('--output', help='Landscape CSV')
    rotation.add_argument('--samples', type=int, help='Parabola samples when no input is given')
    rotation.add_argument('--centering', choices=CENTERING_MODES, help='Centering of the input')
    rotation.add_argument('--reference', help='Reference vector file for --centering custom')
    rotation.add_argument('--gamma', type=float, help='Regularization γ')
    rotation.add_argument('--theta-start', dest='theta_start', type=float, help='First angle')
    rotation.add_argument('--theta-stop', dest='theta_stop', type=float, help='Last angle')
    rotation.add_argument('--theta-step', dest='theta_step', type=float, help='Angle spacing')

    return parser


def main(argv=None) -> int:
    """Main entry point with argument parsing"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.log_level:
        set_level(args.log_level)

    try:
        overrides = {k: v for k, v in vars(args).items() if k in RUN_FIELDS}
        config = RunConfig.from_sources(args.config, overrides)
        run, report = COMMANDS[args.command]
        logger.info(f"Starting '{args.command}' via main.py")
        results = run(ReductionPipeline(config))
        report(results)
        return 0

    except KeyboardInterrupt:
        print("\n\n⚠️  Interrupted by user")
        logger.warning("Interrupted by user")
        return 130

    except FastQMError as e:
        print(f"\n❌ Error: {e}", file=sys.stderr)
        logger.error(f"'{args.command}' failed: {e}", exc_info=True)
        return e.exit_code

    except np.linalg.LinAlgError as e:
        print(f"\n❌ Numerical error: {e}", file=sys.stderr)
        logger.error(f"'{args.command}' failed: {e}", exc_info=True)
        return NumericalError.exit_code

    except Exception as e:
        print(f"\n❌ Error: {e}", file=sys.stderr)
        logger.error(f"Main execution failed: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
