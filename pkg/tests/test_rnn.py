import numpy as np
import pytest

from xdocvec import tensor as T
from xdocvec.errors import DimensionError
from xdocvec.rnn import GruParams, gru_scan, gru_step


def _zero_gru(input_dim, d):
    rng = np.random.default_rng(0)
    p = GruParams.create(input_dim, d, rng, init_scale=0.0)
    return p


def test_zero_weights_keep_states_zero():
    p = _zero_gru(3, 4)
    xs = T.Tensor(np.random.default_rng(1).standard_normal((5, 3)))
    out = gru_scan(p, xs)
    np.testing.assert_array_equal(out.data, np.zeros((5, 4)))


def test_forward_scan_causality():
    rng = np.random.default_rng(2)
    p = GruParams.create(2, 3, rng)
    xs = rng.standard_normal((6, 2))
    changed = xs.copy()
    changed[4:] += 1.0
    a = gru_scan(p, T.Tensor(xs)).data
    b = gru_scan(p, T.Tensor(changed)).data
    np.testing.assert_array_equal(a[:4], b[:4])
    assert not np.allclose(a[4:], b[4:])


def test_reverse_scan_suffix_property():
    rng = np.random.default_rng(3)
    p = GruParams.create(2, 3, rng)
    xs = rng.standard_normal((6, 2))
    changed = xs.copy()
    changed[:2] += 1.0
    a = gru_scan(p, T.Tensor(xs), reverse=True).data
    b = gru_scan(p, T.Tensor(changed), reverse=True).data
    np.testing.assert_array_equal(a[2:], b[2:])


def test_single_frame_equals_single_step():
    rng = np.random.default_rng(4)
    p = GruParams.create(2, 3, rng)
    x = rng.standard_normal((1, 2))
    scan = gru_scan(p, T.Tensor(x)).data
    step = gru_step(p, T.Tensor(x), T.Tensor(np.zeros((1, 3)))).data
    np.testing.assert_array_equal(scan, step)


def test_dimension_guards():
    p = _zero_gru(3, 4)
    with pytest.raises(DimensionError):
        gru_step(p, T.Tensor(np.zeros((1, 2))), T.Tensor(np.zeros((1, 4))))
    with pytest.raises(DimensionError):
        gru_scan(p, T.Tensor(np.zeros((5, 2))))
