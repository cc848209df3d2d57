# Licensed under GPL version 3 - see LICENSE.rst
'''Helpers shared by the file formats.'''
import json
import os
import tempfile
from contextlib import contextmanager

import jsonschema

from ..utils import DatasetError

__all__ = ['atomic_path', 'load_schema', 'validate_json', 'read_json', 'write_json']

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'schemas')


@contextmanager
def atomic_path(filename):
    '''Temporary file name that is renamed to ``filename`` on success.

    Anything that is written to the temporary name only becomes visible
    under ``filename`` once the ``with`` block finishes without an
    exception, so readers never see a partially written file.

    Examples
    --------
    >>> import os, tempfile
    >>> name = os.path.join(tempfile.mkdtemp(), 'out.txt')
    >>> with atomic_path(name) as tmp:
    ...     with open(tmp, 'w') as f:
    ...         n = f.write('done')
    >>> open(name).read()
    'done'
    '''
    filename = os.path.abspath(filename)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(filename),
                               prefix='.' + os.path.basename(filename) + '.', suffix='.tmp')
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, filename)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def load_schema(name):
    with open(os.path.join(SCHEMA_DIR, name + '.json')) as f:
        return json.load(f)


def validate_json(data, schema, source, error=DatasetError):
    '''Validate ``data`` against the package schema ``schema``.

    Raises
    ------
    error
        With the path of the offending field in the message.
    '''
    try:
        jsonschema.validate(data, load_schema(schema))
    except jsonschema.ValidationError as e:
        path = '/'.join(str(p) for p in e.absolute_path) or '(top level)'
        raise error('{0}: invalid field {1}: {2}'.format(source, path, e.message)) from None


def read_json(filename, schema, error=DatasetError):
    '''Read and validate a JSON file.'''
    try:
        with open(filename) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise error('{0}: not valid JSON (line {1}, column {2}): {3}'.format(
            filename, e.lineno, e.colno, e.msg)) from None
    validate_json(data, schema, filename, error)
    return data


def write_json(data, filename, schema=None):
    '''Validate (if ``schema`` is given) and atomically write a JSON file.'''
    if schema is not None:
        validate_json(data, schema, filename, ValueError)
    with atomic_path(filename) as tmp:
        with open(tmp, 'w') as f:
            json.dump(data, f, indent=1)
