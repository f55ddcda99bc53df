#!/usr/bin/env python
'''
HodgeOrbit command line: load a registered family or a JSON manifest, run
decompositions and asymptotic checks, and write JSON/CSV/HDF5 reports.

Exit codes: 0 every check passed, 1 usage or I/O error, 2 contract
violation, 3 verification failure.
'''
import argparse
import logging
import os
import sys

import numpy as np

from hodgeorbit import __version__
from hodgeorbit.families import REGISTRY, UnknownFamilyError, load_family, read_manifest
from hodgeorbit.monodromy import decompose
from hodgeorbit.numlin import ContractError, ConvergenceError, VerificationError
from hodgeorbit.report import report_document, write_archive, write_json, write_samples_csv
from hodgeorbit.verify import (
    DECAY_SAMPLES,
    DECAY_WINDOW,
    DEFAULT_SEED,
    SCHMID_SAMPLES,
    SCHMID_WINDOW,
    CheckResult,
    check_extension,
    check_grading,
    check_orbit_horizontality,
    check_splitting,
    distance_decay,
    family_orbit,
    frame_norm_bounds,
    merge_tolerances,
    orbit_threshold,
    periodic_reduction,
    run_suite,
    schmid_growth_check,
)
from hodgeorbit.vhs import limit_filtration, ray_gaps, untwisted_map

LOGGER = logging.getLogger(__name__)
PACKAGE_LOGGER = logging.getLogger('hodgeorbit')

COMMANDS = ('decompose', 'untwist', 'orbit-check', 'decay', 'weights', 'suite')

EXIT_PASSED = 0
EXIT_USAGE = 1
EXIT_CONTRACT = 2
EXIT_FAILED = 3

UNTWIST_RADII = tuple(2.0 ** -k for k in range(2, 27))


class CheckCountHandler(logging.Handler):
    '''
    Count warning and error records emitted while a command runs.
    '''
    def __init__(self):
        super(CheckCountHandler, self).__init__()
        self.errors = 0
        self.warnings = 0

    def emit(self, record):
        if record.levelno >= logging.ERROR:
            self.errors += 1
        elif record.levelno == logging.WARN:
            self.warnings += 1

    def get_error_counts(self):
        return {'warnings': self.warnings, 'errors': self.errors}


def log_title(title, line='=', section=True):
    '''Add visual breaks in the logging for main sections.'''
    if section:
        LOGGER.info('%s', '_' * 80)
    LOGGER.info(title)
    LOGGER.info('%s', line * len(title))


def log_subtitle(subtitle):
    '''Add visual breaks in the logging for sub sections.'''
    log_title(subtitle, line='-', section=False)


def parse_tolerance(text):
    '''
    ``KEY=VALUE`` -> (key, float value).
    '''
    key, sep, value = text.partition('=')
    if not sep or not key:
        raise argparse.ArgumentTypeError('expected KEY=VALUE, got %r' % text)
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError('tolerance %s is not a number: %r' % (key, value))


class RunConfig(object):
    '''
    Everything a command needs, independent of argparse.

    :ivar command: One of ``COMMANDS``.
    :ivar family: Registry name or manifest path.
    :ivar alpha: Window values or None for the family default.
    :ivar x_range: (lo, hi) overriding a command's default window, or None.
    :ivar samples: Sample count overriding a command's default, or None.
    :ivar tolerances: Overrides of ``hodgeorbit.verify.DEFAULT_TOLERANCES``.
    '''
    def __init__(self, command, family, alpha=None, seed=DEFAULT_SEED, threads=None, x_range=None, samples=None,
                 output=None, csv=None, archive=None, tolerances=None):
        if command not in COMMANDS:
            raise ContractError('unknown command %r' % (command,))
        self.command = command
        self.family = family
        self.alpha = alpha
        self.seed = seed
        self.threads = threads
        self.x_range = tuple(x_range) if x_range else None
        self.samples = samples
        self.output = output
        self.csv = csv
        self.archive = archive
        self.tolerances = dict(tolerances or {})

    def __repr__(self):
        return '%s(%r, %r)' % (self.__class__.__name__, self.command, self.family)

    @classmethod
    def from_args(cls, args):
        return cls(args.command, args.family, alpha=args.alpha, seed=args.seed, threads=args.threads,
                   x_range=args.x_range, samples=args.samples, output=args.output, csv=args.csv,
                   archive=args.archive, tolerances=dict(args.tolerance or []))

    def window(self, default):
        return self.x_range or default

    def count(self, default):
        return self.samples or default


def _alpha(config, family):
    if config.alpha is None:
        return family.alpha
    return np.atleast_1d(np.asarray(config.alpha, dtype=float))


def command_decompose(config, family, tolerances):
    dec = decompose(family.monodromy, _alpha(config, family))
    result = check_splitting(family.monodromy, dec, tolerances)
    return {'decomposition': dec.to_json(), 'family_data': family.to_json()}, [result], dec


def command_untwist(config, family, tolerances):
    dec = decompose(family.monodromy, _alpha(config, family))
    psi = untwisted_map(family, dec)
    report = limit_filtration(psi, tol=tolerances['ray_agreement'])
    gaps = ray_gaps(psi, report.limit, UNTWIST_RADII)
    limit = CheckResult('untwist', True, report.to_dict(), [(float(np.log(r)), 0.0, 0.0, gap) for r, gap in gaps],
                        'gap_to_limit')
    return {}, [limit, check_extension(family, dec, tolerances=tolerances)], dec


def command_orbit_check(config, family, tolerances):
    dec = decompose(family.monodromy, _alpha(config, family))
    orbit = family_orbit(family, dec)
    results = [check_orbit_horizontality(orbit, tolerances=tolerances)]
    if orbit.count == 1:
        kwargs = {}
        if config.x_range:
            kwargs['x_range'] = config.x_range
        if config.samples:
            kwargs['samples'] = config.samples
        results.append(orbit_threshold(orbit, family.phd, tolerances=tolerances, **kwargs))
    return {'orbit': orbit.to_json()}, results, dec


def command_decay(config, family, tolerances):
    dec = decompose(family.monodromy, _alpha(config, family))
    orbit = family_orbit(family, dec)
    decay = distance_decay(family, dec, orbit, x_range=config.window(DECAY_WINDOW),
                           samples=config.count(DECAY_SAMPLES), tolerances=tolerances, threads=config.threads)[0]
    schmid = schmid_growth_check(family, dec, x_range=config.window(SCHMID_WINDOW),
                                 samples=config.count(SCHMID_SAMPLES), tolerances=tolerances, threads=config.threads)
    return {}, [decay, schmid, periodic_reduction(family, dec, orbit, tolerances=tolerances)], dec


def command_weights(config, family, tolerances):
    dec = decompose(family.monodromy, _alpha(config, family))
    grading = check_grading(family, dec, tolerances=tolerances)
    return {}, [grading, frame_norm_bounds(family, dec, tolerances=tolerances)], dec


def command_suite(config, family, tolerances):
    alpha = _alpha(config, family)
    report = run_suite(family, alpha=alpha, seed=config.seed, tolerances=tolerances, threads=config.threads)
    return {'alpha': report.alpha, 'seed': report.seed}, report.checks, decompose(family.monodromy, alpha)


COMMAND_FUNCTIONS = {
    'decompose': command_decompose,
    'untwist': command_untwist,
    'orbit-check': command_orbit_check,
    'decay': command_decay,
    'weights': command_weights,
    'suite': command_suite,
}


def _load(config):
    '''
    :raises UnknownFamilyError: For unregistered names.
    :raises ContractError: For malformed manifests (usage errors).
    '''
    name = config.family
    params = {}
    if name.endswith('.json') or os.path.isfile(name):
        name, params = read_manifest(name)
    if name not in REGISTRY:
        raise UnknownFamilyError(name)
    return name, params


def run(config):
    '''
    Execute one command and write its reports.

    :type config: RunConfig
    :returns: Exit code.
    :rtype: int
    '''
    try:
        tolerances = merge_tolerances(config.tolerances)
        name, params = _load(config)
    except UnknownFamilyError as err:
        LOGGER.error('%s', err)
        return EXIT_USAGE
    except (ContractError, IOError) as err:
        LOGGER.error('Invalid configuration: %s', err)
        return EXIT_USAGE

    log_title('%s %s' % (config.command, name))
    try:
        family = load_family(name, params)
        payload, results, dec = COMMAND_FUNCTIONS[config.command](config, family, tolerances)
    except VerificationError as err:
        LOGGER.error('Verification failed: %s', err)
        document = report_document(config.command, name, False, {
            'error': str(err),
            'report': err.report.to_dict() if err.report is not None else None,
        })
        return _write(config, document, []) or EXIT_FAILED
    except (ContractError, ConvergenceError, FloatingPointError) as err:
        LOGGER.error('Contract violation: %s', err)
        return EXIT_CONTRACT

    log_subtitle('Checks')
    for result in results:
        LOGGER.info('%-22s %s', result.name, 'passed' if result.passed else 'FAILED')
    passed = all(result.passed for result in results)
    payload = dict(payload, checks=[result.to_dict() for result in results])
    document = report_document(config.command, name, passed, payload)
    code = _write(config, document, results, dec=dec, family=family)
    if code:
        return code
    return EXIT_PASSED if passed else EXIT_FAILED


def _write(config, document, results, dec=None, family=None):
    '''
    Write the requested outputs; the JSON goes to stdout without ``--output``.

    :returns: ``EXIT_USAGE`` on I/O errors, otherwise None.
    '''
    try:
        if config.output:
            write_json(document, config.output)
        else:
            sys.stdout.write(write_json(document) + '\n')
        if config.csv:
            write_samples_csv(results, config.csv)
        if config.archive:
            write_archive(config.archive, results, dec=dec, family=family)
    except (IOError, OSError) as err:
        LOGGER.error('Could not write report: %s', err)
        return EXIT_USAGE
    return None


class ArgumentParser(argparse.ArgumentParser):
    '''Exit with EXIT_USAGE rather than 2 on bad arguments.'''
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '%s: error: %s\n' % (self.prog, message))


def build_parser():
    parser = ArgumentParser(
        description='Nilpotent orbit and Deligne extension checks for polarized variations of Hodge structure.')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('command', choices=COMMANDS, help='What to run.')
    parser.add_argument(
        '-f', '--family',
        required=True,
        help='Registered family (%s) or a JSON manifest {"example": name, "params": {...}}.'
             % ', '.join(REGISTRY),
    )
    parser.add_argument('--alpha', type=float, nargs='+', help='Window parameters, one per log coordinate.')
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED, help='Seed of randomized checks.')
    parser.add_argument('--threads', type=int, default=os.cpu_count(), help='Threads for grid evaluation.')
    parser.add_argument('--x-range', type=float, nargs=2, metavar=('LO', 'HI'), help='Re z window of fits.')
    parser.add_argument('--samples', type=int, help='Samples in the Re z window.')
    parser.add_argument('-o', '--output', metavar='JSON', help='Write the report here instead of stdout.')
    parser.add_argument('--csv', metavar='CSV', help='Dump sampled values as CSV.')
    parser.add_argument('--archive', metavar='HDF5', help='Write sampled arrays to an HDF5 archive.')
    parser.add_argument(
        '-t', '--tolerance',
        type=parse_tolerance,
        action='append',
        metavar='KEY=VALUE',
        help='Override a verification threshold; may be repeated.',
    )
    parser.add_argument(
        '-e', '--show-only-errors',
        help='Display only errors on screen.',
        action='store_true',
    )
    parser.add_argument('--log-file', metavar='LOG', help='Saves all log messages to a file.')
    parser.add_argument(
        '-l', '--log-level',
        metavar='LEVEL',
        choices=['DEBUG', 'INFO', 'WARN', 'WARNING', 'ERROR'],
        help='Set logging level. [DEBUG|INFO|WARN|ERROR]',
    )
    return parser


def setup_logging(args):
    '''
    Terminal handler, optional file handler and a counting handler on the
    package logger.

    :returns: The handlers added.
    '''
    fmtr = logging.Formatter(r'%(levelname)-9s: %(message)s')
    log_lvl = None
    if args.log_level:
        lvl = logging.getLevelName(args.log_level)
        log_lvl = lvl if isinstance(lvl, int) else None

    handlers = []
    if args.log_file:
        file_hdlr = logging.FileHandler(args.log_file, mode='w')
        file_hdlr.setLevel(log_lvl or logging.DEBUG)
        handlers.append(file_hdlr)

    term_hdlr = logging.StreamHandler()
    if args.show_only_errors:
        term_hdlr.setLevel(logging.ERROR)
    else:
        term_hdlr.setLevel(log_lvl or logging.INFO)
    handlers.append(term_hdlr)

    count_hdlr = CheckCountHandler()
    count_hdlr.setLevel(logging.INFO)
    handlers.append(count_hdlr)

    for handler in handlers:
        handler.setFormatter(fmtr)
        PACKAGE_LOGGER.addHandler(handler)
    PACKAGE_LOGGER.setLevel(logging.DEBUG)
    return handlers


def main(argv=None):
    '''Main'''
    args = build_parser().parse_args(argv)
    handlers = setup_logging(args)
    try:
        LOGGER.debug('Arguments: %s', args)
        code = run(RunConfig.from_args(args))
        counts = [h for h in handlers if isinstance(h, CheckCountHandler)][0].get_error_counts()
        log_title('Results')
        msg = 'Finished with exit code %d, %s errors and %s warnings' % (code, counts['errors'], counts['warnings'])
        LOGGER.info(msg)
        if args.show_only_errors:
            print(msg, file=sys.stderr)
    finally:
        for handler in handlers:
            PACKAGE_LOGGER.removeHandler(handler)
            handler.close()
    sys.exit(code)


if __name__ == '__main__':
    main()
