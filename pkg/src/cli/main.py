"""
extlab command line
Runs verification tasks from spec files and writes JSON or CSV reports

Exit codes: 0 pass, 1 fail or inconclusive, 2 spec error, 3 numeric failure
"""

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from cli import __version__
from models.ode_oscillator import OdeParams
from processors.verifier import FAIL, PASS, create_verifier, worst_verdict
from utils.errors import EigenConvergenceError, SpecError
from utils.report_writer import ReportWriter
from utils.spec_parser import EXAMPLE_ODE, SpecDocument, parse_complex, parse_spec

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_SPEC = 2
EXIT_NUMERIC = 3

ZERO_ODE_SPEC = SpecDocument(EXAMPLE_ODE, (0j, 0j, 0j, 0j), 200, ('solve-system',))


def _grid_range(text: str) -> Tuple[float, float, int]:
    """lo:hi:steps"""
    parts = text.split(':')
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise argparse.ArgumentTypeError(f"Expected lo:hi:steps, got '{text}'")
    if len(parts) != 3 or steps < 1 or not np.isfinite([lo, hi]).all():
        raise argparse.ArgumentTypeError(f"Expected lo:hi:steps with steps >= 1, got '{text}'")
    return lo, hi, steps


def _grid_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("Empty grid list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='extlab',
        description="Verify correct and normal extensions built from finite-rank perturbed inverses",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--out', default=None, help='Write the report to this path instead of stdout')
    parser.add_argument('--no-timestamp', action='store_true', help='Omit timestamps and wall times')
    parser.add_argument('--threads', type=int, default=None, help='Worker threads (default: EXTLAB_THREADS or CPU count)')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging on stderr')

    sub = parser.add_subparsers(dest='command', required=True)

    verify = sub.add_parser('verify', help='Run every criterion on a spec (JSON report)')
    verify.add_argument('spec', help='Spec file')
    verify.add_argument('--grids', type=_grid_list, default=None, help='Ascending grid sizes, e.g. 100,200,400')

    solve = sub.add_parser('solve-system', help='Newton solutions of the four-equation system (CSV)')
    solve.add_argument('spec', nargs='?', default=None, help='Optional ode spec (its parameters become a seed)')
    solve.add_argument('--seeds', default=None, help='File with one seed per line: a11, a12, a21, a22')
    solve.add_argument('--random', type=int, default=0, help='Number of random seeds')
    solve.add_argument('--seed', type=int, default=0, help='RNG seed for --random')

    sweep = sub.add_parser('sweep', help='Commutator norms over kernel amplitudes (CSV)')
    sweep.add_argument('spec', help='Cauchy-Riemann spec file')
    sweep.add_argument('--grid-re', type=_grid_range, default=None, help='lo:hi:steps for a1')
    sweep.add_argument('--grid-im', type=_grid_range, default=None, help='lo:hi:steps for a2')
    sweep.add_argument('--progress', action='store_true', help='Progress bar on stderr')

    spectrum = sub.add_parser('spectrum', help='Smallest eigenvalues with oracle distances (CSV)')
    spectrum.add_argument('spec', help='Spec file')
    spectrum.add_argument('--count', type=int, default=10, help='Number of eigenvalues')

    run = sub.add_parser('run', help="Run every task listed in the spec (JSON report)")
    run.add_argument('spec', help='Spec file')

    return parser


def load_spec(path: str) -> SpecDocument:
    """
    Read and parse a spec file

    Raises:
        SpecError: on any parse error or unreadable file
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise SpecError(f"Cannot read spec file {path}: {e}") from e
    return parse_spec(data)


def load_seeds(path: str) -> List[OdeParams]:
    """One seed per line as four comma-separated complex literals, '#' comments"""
    try:
        lines = Path(path).read_text(encoding='utf-8').splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise SpecError(f"Cannot read seed file {path}: {e}") from e
    seeds = []
    for number, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split(',')
        if len(fields) != 4:
            raise SpecError(f"Expected 4 values, got {len(fields)}", line=number, column=1)
        seeds.append(OdeParams.from_vector([parse_complex(f, number) for f in fields]))
    return seeds


def _task_entry(result: Dict, timestamps: bool) -> Dict:
    entry = {
        'name': result['name'],
        'verdict': result['verdict'],
        'residuals': result.get('residuals', {}),
        'grids': result.get('grids', []),
        'wall_ms': result['wall_ms'] if timestamps else None,
    }
    for key in ('failures', 'details', 'error', 'rows'):
        if key in result:
            entry[key] = result[key]
    return entry


def build_envelope(doc: SpecDocument, results: Sequence[Dict], timestamps: bool) -> Dict:
    """
    Report envelope around task results

    Args:
        doc: spec document
        results: task result dicts from the verifier
        timestamps: include wall times and the generation time

    Returns:
        dict: {version, spec, tasks, summary[, generated_at]}
    """
    verdicts = [r['verdict'] for r in results]
    envelope = {
        'version': __version__,
        'spec': doc.to_dict(),
        'tasks': [_task_entry(r, timestamps) for r in results],
        'summary': {
            'verdict': worst_verdict(verdicts),
            'counts': {v: verdicts.count(v) for v in sorted(set(verdicts))},
        },
    }
    if timestamps:
        envelope['generated_at'] = datetime.now(timezone.utc).isoformat()
    return envelope


def _exit_code(results: Sequence[Dict]) -> int:
    if any(not r.get('success', False) for r in results):
        return EXIT_NUMERIC
    return EXIT_PASS if worst_verdict([r['verdict'] for r in results]) == PASS else EXIT_FAIL


def _run_command(args: argparse.Namespace) -> int:
    timestamps = not args.no_timestamp

    if args.command == 'solve-system':
        doc = load_spec(args.spec) if args.spec else ZERO_ODE_SPEC
        if doc.example != EXAMPLE_ODE:
            raise SpecError(f"solve-system needs an '{EXAMPLE_ODE}' spec, got '{doc.example}'")
        seeds = load_seeds(args.seeds) if args.seeds else []
        if args.spec:
            seeds = [OdeParams.from_vector(doc.params)] + seeds
        verifier = create_verifier(doc, threads=args.threads)
        result = verifier.run('solve-system', seeds=seeds, random_count=args.random, seed=args.seed)
        return _write_table(result, args.out)

    doc = load_spec(args.spec)
    verifier = create_verifier(doc, threads=args.threads)

    if args.command == 'verify':
        result = verifier.run('verify', grids=args.grids)
        with ReportWriter(args.out) as writer:
            writer.write_json(build_envelope(doc, [result], timestamps))
        return _exit_code([result])

    if args.command == 'sweep':
        result = verifier.run('sweep', grid_re=args.grid_re, grid_im=args.grid_im, progress=args.progress)
        return _write_table(result, args.out)

    if args.command == 'spectrum':
        result = verifier.run('spectrum', count=args.count)
        return _write_table(result, args.out)

    results = [verifier.run(task) for task in doc.tasks]
    with ReportWriter(args.out) as writer:
        writer.write_json(build_envelope(doc, results, timestamps))
    return _exit_code(results)


def _write_table(result: Dict, out: Optional[str]) -> int:
    if not result['success']:
        logger.error(result.get('error', 'task failed'))
        return EXIT_NUMERIC
    with ReportWriter(out) as writer:
        writer.write_csv(result['rows'], result['columns'])
    return EXIT_PASS if result['verdict'] != FAIL else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    CLI entry point

    Args:
        argv: arguments (defaults to sys.argv[1:])

    Returns:
        int: process exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    try:
        return _run_command(args)
    except SpecError as e:
        logger.error(f"Spec error: {e}")
        return EXIT_SPEC
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_SPEC
    except (EigenConvergenceError, np.linalg.LinAlgError, RuntimeError) as e:
        logger.error(f"Numeric failure: {e}", exc_info=True)
        return EXIT_NUMERIC


if __name__ == '__main__':
    sys.exit(main())
