"""
Command-line entry point
python functions/main.py <subcommand> [--config PATH] [--seed N] [--jobs N] [--out DIR]

Each subcommand lives in its own directory with a main.py handler that
returns (payload, exit_code).
"""

import argparse
import importlib.util
import json
import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from shared import __version__, config
from shared.artifacts import to_jsonable

logger = logging.getLogger(__name__)

# subcommand -> (handler directory, handler function)
COMMANDS = {
    'simulate': ('simulate', 'simulate'),
    'estimate': ('estimate', 'estimate'),
    'cv-g': ('cv_g', 'cv_g'),
    'cv-f': ('cv_f', 'cv_f'),
    'select': ('select', 'select'),
    'full-run': ('full_run', 'full_run'),
    'report': ('report', 'report'),
    'print-config': ('print_config', 'print_config'),
}


def _load_handler(command):
    directory, function = COMMANDS[command]
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), directory, 'main.py')
    spec = importlib.util.spec_from_file_location(f'pdmp_{directory}_handler', path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return getattr(module, function)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='pdmp-rate',
        description='Simulation and jump-rate estimation for piecewise-deterministic Markov processes',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument('--log-level', default=config.LOG_LEVEL,
                         choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
        if name == 'report':
            cmd.add_argument('paths', nargs='+', help='report JSON files')
            continue
        cmd.add_argument('--config', default=None, help='RunConfig JSON file')
        cmd.add_argument('--seed', type=int, default=None)
        cmd.add_argument('--jobs', type=int, default=None)
        cmd.add_argument('--out', default=None, help='output directory')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )

    handler = _load_handler(args.command)
    payload, exit_code = handler(args)

    if payload.get('status') == 'success' and 'text' in payload:
        print(payload['text'])
    else:
        print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))
    return exit_code


if __name__ == '__main__':
    sys.exit(main())
