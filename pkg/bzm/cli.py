"""
Command line entry point

    bzm <command> [--config FILE] [--seed N] [--out DIR] [--log-level LEVEL]

Exit status is 0 on success, 2 when a monitor threshold stopped the run
and 1 on any error.
"""

import sys
import logging
import argparse
from typing import Optional, List

from bzm.experiment import Experiment, commands, exit_error
from bzm.io import read_config, default_config
from bzm.errors import BZMError

logger = logging.getLogger('bzm')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='bzm', description='Besov analysis and zero-Mach flow experiments')
    parser.add_argument('command', choices=commands)
    parser.add_argument('--config', default=None, help='key = value configuration file')
    parser.add_argument('--seed', type=int, default=None, help='random seed, overrides run.seed')
    parser.add_argument('--out', default=None, help='output folder, overrides run.out')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse the arguments, run one command and return its exit status"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        config = read_config(args.config, verbose=False) if args.config else default_config()
        status = Experiment(config, args.out, args.seed).run(args.command)
    except (BZMError, OSError, ValueError) as error:
        logger.error('%s failed: %s', args.command, error)
        diagnostics = getattr(error, 'diagnostics', None)
        if diagnostics:
            logger.error('%s diagnostics: %s', type(error).__name__, diagnostics)
        return exit_error
    logger.info('%s finished with status %d', args.command, status)
    return status


if __name__ == '__main__':
    sys.exit(main())
