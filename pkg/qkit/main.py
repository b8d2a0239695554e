"""
Command-line entry point: python -m qkit <command> ...
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Tuple

from qkit import __version__
from qkit.config import DEFAULTS, EXIT_CODES, TRANSPORT, setup_logging
from qkit.core import analysis, extraction, tcf
from qkit.core.protocol import ProtocolId
from qkit.core.provers import PROVER_KINDS, Device
from qkit.core.rng import derive_stream
from qkit.error_handler import handle_cli_errors
from qkit.harness import certify, reports, runner, transport

logger = logging.getLogger(__name__)

PROTOCOLS = [p.value for p in ProtocolId]


def c_hat_pair(text: str) -> Tuple[int, int]:
    """'+1,-1' → (1, -1)."""
    try:
        values = tuple(int(part) for part in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two ±1 values, got {text!r}")
    if len(values) != 2 or any(v not in (-1, 1) for v in values):
        raise argparse.ArgumentTypeError(f"expected two ±1 values, got {text!r}")
    return values


def float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit(payload: dict):
    print(json.dumps(payload, indent=2, default=str))


def _add_run_options(parser: argparse.ArgumentParser, seed_required: bool = True):
    parser.add_argument('--protocol', choices=PROTOCOLS, required=True)
    parser.add_argument('--prover', default='honest',
                        help=f"one of {sorted(PROVER_KINDS)} or a device .json file")
    parser.add_argument('--tcf', choices=[f.value for f in tcf.TcfFamily], default=DEFAULTS['tcf'])
    parser.add_argument('--n-bits', type=int, default=DEFAULTS['n_bits'])
    parser.add_argument('--trials', type=int, default=DEFAULTS['trials'])
    parser.add_argument('--seed', type=int, required=seed_required)
    parser.add_argument('--output', help='transcript JSONL path')
    parser.add_argument('--confidence', type=float, default=DEFAULTS['confidence'])


def _config(args, **overrides) -> runner.RunConfig:
    fields = dict(
        protocol=args.protocol,
        prover=args.prover,
        tcf=args.tcf,
        n_bits=args.n_bits,
        trials=args.trials,
        seed=args.seed,
        output_path=args.output,
        confidence=args.confidence,
    )
    fields.update(overrides)
    return runner.build_config(**fields)


def _summary_exit(summary) -> int:
    _emit(summary.to_dict())
    if summary.reasons.get('protocol_violation'):
        return EXIT_CODES['protocol_violation']
    return EXIT_CODES['ok']


@handle_cli_errors
def cmd_run(args) -> int:
    config = _config(args, workers=args.workers, c_hat=args.c_hat)
    summary = runner.cli_run(config)
    if args.summary:
        reports.write_json(summary.to_dict(), args.summary)
    return _summary_exit(summary)


@handle_cli_errors
def cmd_certify(args) -> int:
    result = certify.certify_classical_ceiling(args.protocol, args.n_bits, args.view)
    _emit(result.to_dict())
    return EXIT_CODES['ok']


@handle_cli_errors
def cmd_analyze(args) -> int:
    device = Device.load(args.device)
    result = reports.analyze_device(device, *args.c_hat)
    reports.write_device_report(result, args.output, args.csv)
    _emit({'soundness': result.soundness.to_dict(), 'success': result.report.success,
           'p_xor': result.report.p_xor, 'anticommutator': result.anticommutator.dense,
           'deviation_moments': result.moments})
    return EXIT_CODES['ok']


@handle_cli_errors
def cmd_bounds(args) -> int:
    scan = analysis.trig_scan(args.grid_points)
    trend = analysis.qubit_test_trend(args.trend_eps)
    payload = {'trig_scan': scan.to_dict(), 'qubit_test_trend': trend}
    if args.output:
        reports.write_json(payload, args.output)
    if args.csv:
        reports.trend_frame(trend).to_csv(args.csv, index=False)
    _emit(payload)
    return EXIT_CODES['ok']


@handle_cli_errors
def cmd_extract(args) -> int:
    key, trapdoor = tcf.gen(args.n_bits, tcf.TcfFamily.TOY, derive_stream(args.seed, 0, 'harness'))
    if args.protocol == ProtocolId.SIMPLIFIED.value:
        adversary = extraction.trapdoor_simplified_adversary(trapdoor, args.delta)
        run = lambda rng: extraction.claw_from_simplified(adversary, key, rng, trapdoor)
        bound = 4 * args.delta ** 2
    else:
        build = (extraction.work_coupled_kcvy_adversary if args.work_coupled
                 else extraction.trapdoor_kcvy_adversary)
        adversary = build(trapdoor, args.delta, args.kappa)
        run = lambda rng: extraction.claw_from_kcvy(adversary, key, rng)
        bound = extraction.kcvy_disturbance_bound(args.delta, args.kappa)
    stats = extraction.extraction_frequency(run, derive_stream(args.seed, 0, 'prover'), args.trials)
    _emit(dict(stats, protocol=args.protocol, n_bits=key.n_bits, delta=args.delta,
               kappa=args.kappa, lower_bound=bound))
    return EXIT_CODES['ok']


@handle_cli_errors
def cmd_serve(args) -> int:
    config = _config(args)
    server = transport.VerifierServer(args.listen)
    host, port = server.address
    logger.info(f"Verifier listening on {host}:{port}")
    return _summary_exit(server.serve(config, args.accept_timeout))


@handle_cli_errors
def cmd_prove(args) -> int:
    session = transport.connect_prover(args.connect, args.protocol, args.prover, args.seed, args.timeout)
    _emit({'trials': session.trials, 'accepts': session.accepts, 'flags': session.flags})
    return EXIT_CODES['ok']


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='qkit', description='Test-of-quantumness protocol toolkit')
    parser.add_argument('--version', action='version', version=f"qkit {__version__}")
    parser.add_argument('--log-level', help='overrides QKIT_LOG')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('run', help='seeded Monte-Carlo protocol runs')
    _add_run_options(p)
    p.add_argument('--workers', type=int, default=DEFAULTS['workers'])
    p.add_argument('--c-hat', type=c_hat_pair, help='fixed ĉ pair for device replay, e.g. +1,+1')
    p.add_argument('--summary', help='also write the run summary as JSON')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('certify-classical', help='exhaustive classical ceiling')
    p.add_argument('--protocol', choices=PROTOCOLS, required=True)
    p.add_argument('--n-bits', type=int, default=2)
    p.add_argument('--view', choices=certify.VIEWS, default='ideal')
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser('analyze', help='Jordan analysis of a device file')
    p.add_argument('device')
    p.add_argument('--c-hat', type=c_hat_pair, default=(1, 1))
    p.add_argument('--output', help='JSON report path')
    p.add_argument('--csv', help='per-block CSV path')
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser('bounds', help='trigonometric inequality scan and qubit-test trend')
    p.add_argument('--grid-points', type=int, default=10 ** 6)
    p.add_argument('--trend-eps', type=float_list, default=[0.001, 0.01, 0.05])
    p.add_argument('--output', help='JSON report path')
    p.add_argument('--csv', help='trend CSV path')
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser('extract', help='claw extraction from a trapdoor-assisted guesser')
    p.add_argument('--protocol', choices=[ProtocolId.SIMPLIFIED.value, ProtocolId.KCVY.value], required=True)
    p.add_argument('--n-bits', type=int, default=3)
    p.add_argument('--trials', type=int, default=1000)
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--delta', type=float, default=0.5, help='guesser advantage')
    p.add_argument('--kappa', type=float, default=0.0, help='preimage-piece error (kcvy)')
    p.add_argument('--work-coupled', action='store_true',
                   help='equation error controlled by the claw workspace (kcvy)')
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser('serve', help='run the verifier over TCP')
    p.add_argument('--listen', default=f"127.0.0.1:{TRANSPORT['default_port']}")
    p.add_argument('--accept-timeout', type=float)
    _add_run_options(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser('prove', help='run a prover against a remote verifier')
    p.add_argument('--connect', default=f"127.0.0.1:{TRANSPORT['default_port']}")
    p.add_argument('--protocol', choices=PROTOCOLS, required=True)
    p.add_argument('--prover', choices=sorted(PROVER_KINDS), default='honest')
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--timeout', type=float)
    p.set_defaults(func=cmd_prove)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return args.func(args)


if __name__ == '__main__':
    sys.exit(main())
