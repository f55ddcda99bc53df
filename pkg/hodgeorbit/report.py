'''
Writers for check reports: a JSON document, a CSV dump of the sampled
values and an optional HDF5 archive of the sampled arrays.

Documents contain no timestamps so that reruns with the same seed produce
identical files.
'''
import csv
import logging
import os

import h5py
import numpy as np
import simplejson

from hodgeorbit.numlin import ContractError, matrix_to_json

LOGGER = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = '%.17g'
CSV_COLUMNS = ('check', 'quantity', 're_z', 'im_z', 'abs_w', 'value')


def _default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return matrix_to_json(np.atleast_2d(obj))
        return obj.tolist()
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, 'to_json'):
        return obj.to_json()
    if hasattr(obj, 'to_dict'):
        return obj.to_dict()
    raise TypeError('%r is not JSON serializable' % (obj,))


def report_document(command, family, passed, payload):
    '''
    The top-level report object.

    :param family: Family name or None.
    :param payload: Command specific content, merged into the document.
    :type payload: dict
    :rtype: dict
    '''
    document = {
        'schema_version': REPORT_SCHEMA_VERSION,
        'command': command,
        'family': family,
        'passed': bool(passed),
    }
    overlap = set(document) & set(payload)
    if overlap:
        raise ContractError('payload may not override %s' % sorted(overlap))
    document.update(payload)
    return document


def dumps(document):
    '''
    Serialize with sorted keys; NaN and infinities become null.
    '''
    return simplejson.dumps(document, sort_keys=True, indent=2, ignore_nan=True, default=_default)


def write_json(document, path=None):
    '''
    Write a report document, or return it as text when ``path`` is None.
    '''
    text = dumps(document)
    if path is None:
        return text
    with open(path, 'w') as fh:
        fh.write(text)
        fh.write('\n')
    LOGGER.info('Wrote report to %s', path)
    return text


def sample_rows(results):
    '''
    ``(check, quantity, Re z, Im z, |w|, value)`` for every sample of every
    check result.
    '''
    for result in results:
        for re_z, im_z, abs_w, value in result.samples:
            yield (result.name, result.quantity or 'value', re_z, im_z, abs_w, value)


def write_samples_csv(results, path):
    '''
    Dump sampled values as CSV with full float precision.

    :type results: list of hodgeorbit.verify.CheckResult
    :returns: Number of rows written.
    '''
    count = 0
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\r\n')
        writer.writerow(CSV_COLUMNS)
        for check, quantity, re_z, im_z, abs_w, value in sample_rows(results):
            writer.writerow([check, quantity] + [CSV_FLOAT_FORMAT % float(v) for v in (re_z, im_z, abs_w, value)])
            count += 1
    LOGGER.info('Wrote %d sample rows to %s', count, path)
    return count


class report_archive(object):
    '''
    usage example:
    with report_archive('path/to/run.h5') as archive:
        archive.write_check(result)

    layout
    archive['checks']['distance_decay']['samples'] (float array, one row per sample)
    archive['checks']['distance_decay'].attrs['details'] (json)
    archive['decomposition'].attrs['json'] (json)
    '''
    # Archive settings should be consistent, therefore hardcoding defaults.
    DATASET_KWARGS = {'compression': 'gzip', 'compression_opts': 6}

    def __repr__(self):
        if not self.hdf.id:
            return '<Closed report archive %s>' % self.file_path
        return '<Open report archive (%d checks) %s>' % (len(self.keys()), self.file_path)

    def __init__(self, file_path, create=True):
        '''
        :param create: Allow creation of the file if it does not exist.
        :type create: bool
        :raises IOError: If the file does not exist and ``create`` is False.
        '''
        exists = os.path.isfile(file_path)
        if not create and not exists:
            raise IOError('File not found: %s' % file_path)
        self.file_path = os.path.abspath(file_path)
        self.hdf = h5py.File(self.file_path, mode='w' if create else 'r')
        if create:
            self.hdf.attrs['schema_version'] = REPORT_SCHEMA_VERSION
            self.hdf.create_group('checks', track_order=True)
        elif self.hdf.attrs.get('schema_version') != REPORT_SCHEMA_VERSION:
            raise ContractError('archive %s has schema version %s' % (file_path,
                                                                      self.hdf.attrs.get('schema_version')))

    def __enter__(self):
        return self

    def __exit__(self, a_type, value, traceback):
        self.close()

    def __getitem__(self, name):
        '''
        :returns: (samples, details) of a stored check.
        '''
        group = self.hdf['checks'][name]
        return group['samples'][()], simplejson.loads(group.attrs['details'])

    def keys(self):
        return list(self.hdf['checks'].keys())

    def close(self):
        if self.hdf.id:
            self.hdf.flush()
            self.hdf.close()

    def write_check(self, result):
        '''
        Store the samples and details of one check result, replacing an
        earlier one of the same name.
        '''
        checks = self.hdf['checks']
        if result.name in checks:
            del checks[result.name]
        group = checks.create_group(result.name)
        samples = np.array(result.samples, dtype=float).reshape(-1, 4)
        # Empty datasets cannot be chunked.
        kwargs = self.DATASET_KWARGS if len(samples) else {}
        group.create_dataset('samples', data=samples, track_times=False, **kwargs)
        group.attrs['quantity'] = result.quantity or 'value'
        group.attrs['passed'] = 1 if result.passed else 0
        group.attrs['details'] = dumps(result.to_dict())

    def write_decomposition(self, dec):
        '''
        Store the semisimple and nilpotent parts and the block basis.
        '''
        if 'decomposition' in self.hdf:
            del self.hdf['decomposition']
        group = self.hdf.create_group('decomposition')
        group.create_dataset('semisimple', data=np.array(dec.semisimple), track_times=False, **self.DATASET_KWARGS)
        group.create_dataset('nilpotent', data=np.array(dec.nilpotent), track_times=False, **self.DATASET_KWARGS)
        group.create_dataset('block_basis', data=dec.block_basis(), track_times=False, **self.DATASET_KWARGS)
        group.attrs['json'] = dumps(dec.to_json())

    def write_family(self, family):
        self.hdf.attrs['family'] = dumps(family.to_json())


def write_archive(path, results, dec=None, family=None):
    '''
    Write an archive in one go.

    :returns: Path of the archive.
    '''
    with report_archive(path) as archive:
        if family is not None:
            archive.write_family(family)
        if dec is not None:
            archive.write_decomposition(dec)
        for result in results:
            archive.write_check(result)
    LOGGER.info('Wrote %d checks to archive %s', len(results), path)
    return path
