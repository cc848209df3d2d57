# Licensed under GPL version 3 - see LICENSE.rst
'''Body models as JSON files.

Skinning weights and the joint regressor are mostly zero and are stored as
sparse ``(rows, cols, values)`` triplets.
'''
from collections import OrderedDict

import numpy as np
from scipy import sparse

from ..body import BodyModel
from ..utils import BodyModelError
from .utils import read_json, write_json

__all__ = ['body_to_dict', 'body_from_dict', 'read_body', 'write_body']


def _to_sparse(array):
    coo = sparse.coo_matrix(array)
    return OrderedDict([('shape', list(array.shape)), ('rows', coo.row.tolist()),
                        ('cols', coo.col.tolist()), ('values', coo.data.tolist())])


def _from_sparse(d):
    if not (len(d['rows']) == len(d['cols']) == len(d['values'])):
        raise BodyModelError('Sparse matrix needs the same number of rows, cols and values.')
    return sparse.coo_matrix((d['values'], (d['rows'], d['cols'])),
                             shape=tuple(d['shape'])).toarray()


def body_to_dict(body):
    out = OrderedDict([('format', 'posesplat-body'), ('version', 1),
                       ('vertices', body.template_vertices.tolist()),
                       ('faces', body.faces.tolist()),
                       ('joints', body.joint_rest_positions.tolist()),
                       ('parents', body.parents.tolist()),
                       ('joint_names', list(body.joint_names)),
                       ('skinning_weights', _to_sparse(body.skinning_weights))])
    if body.n_shape > 0:
        out['shape_dirs'] = body.shape_dirs.tolist()
    if body.joint_regressor is not None:
        out['joint_regressor'] = _to_sparse(body.joint_regressor)
    out['canonical_pose'] = body.canonical_pose.tolist()
    return out


def body_from_dict(d):
    try:
        return BodyModel(d['vertices'], d['faces'], d['joints'], d['parents'],
                         _from_sparse(d['skinning_weights']),
                         shape_dirs=d.get('shape_dirs'),
                         joint_regressor=_from_sparse(d['joint_regressor'])
                         if 'joint_regressor' in d else None,
                         canonical_pose=d.get('canonical_pose'),
                         joint_names=d.get('joint_names'))
    except ValueError as e:
        # e.g. sparse indices outside of the declared shape
        raise BodyModelError(str(e)) from None


def read_body(filename):
    '''Read a body model.

    Raises
    ------
    posesplat.utils.BodyModelError
        If the file does not follow the schema or does not describe a
        valid body.
    '''
    return body_from_dict(read_json(filename, 'body', BodyModelError))


def write_body(body, filename):
    write_json(body_to_dict(body), filename, schema='body')
