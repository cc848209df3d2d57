# Licensed under GPL version 3 - see LICENSE.rst
import json

import numpy as np
import pytest

from ...body import procedural_body
from ...utils import BodyModelError
from ..bodyfile import body_to_dict, body_from_dict, read_body, write_body

body = procedural_body(ring_spacing=0.15, ring_vertices=5)


def test_round_trip(tmp_path):
    name = str(tmp_path / 'body.json')
    write_body(body, name)
    new = read_body(name)
    for attr in ['template_vertices', 'faces', 'joint_rest_positions', 'parents',
                 'skinning_weights', 'shape_dirs', 'joint_regressor', 'canonical_pose']:
        assert np.all(getattr(new, attr) == getattr(body, attr))
    assert new.joint_names == body.joint_names


def test_weights_are_sparse():
    d = body_to_dict(body)
    w = d['skinning_weights']
    assert w['shape'] == [body.n_vertices, body.n_joints]
    assert len(w['values']) == np.count_nonzero(body.skinning_weights)


def test_schema_violation(tmp_path):
    d = body_to_dict(body)
    d['parents'] = 'root'
    name = str(tmp_path / 'body.json')
    with open(name, 'w') as f:
        json.dump(d, f)
    with pytest.raises(BodyModelError) as e:
        read_body(name)
    assert 'invalid field parents' in str(e.value)


def test_sparse_index_out_of_range():
    d = body_to_dict(body)
    d['skinning_weights']['rows'][0] = body.n_vertices + 5
    with pytest.raises(BodyModelError):
        body_from_dict(d)


def test_inconsistent_body():
    d = body_to_dict(body)
    d['parents'] = d['parents'][:-1]
    with pytest.raises(BodyModelError):
        body_from_dict(d)
