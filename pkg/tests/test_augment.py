import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astgcn.augment import TGCN_SPEC, AugmentSpec, augment_sequence, augment_series, augment_step
from astgcn.dataset import AttributeBundle, WindowedSample
from astgcn.errors import IndexOutOfRangeError, ShapeMismatchError


def bundle(rng, T, n, p, w):
    return AttributeBundle(rng.random((n, p)), rng.random((T, n, w)))


def test_both_off_is_identity():
    out = augment_step([[5], [6]], None, None, 0, TGCN_SPEC)
    assert out.tolist() == [[5], [6]]


def test_concatenation_example():
    S = np.array([[0.1], [0.2]])
    D = np.zeros((2, 2, 1))
    D[0, :, 0] = [0.3, 0.4]
    D[1, :, 0] = [0.5, 0.6]
    out = augment_step([[5], [6]], S, D, 1, AugmentSpec(True, True, 1))
    assert out.tolist() == [[5, 0.1, 0.3, 0.5], [6, 0.2, 0.4, 0.6]]


def test_edge_padding_at_start():
    rng = np.random.default_rng(0)
    D = rng.random((5, 3, 2))
    out = augment_step(np.ones(3), None, D, 0, AugmentSpec(False, True, 2))
    for j in range(2):
        cols = out[:, 1 + 3 * j: 4 + 3 * j]
        assert np.array_equal(cols, np.repeat(D[0, :, j:j + 1], 3, axis=1))


@pytest.mark.parametrize("use_static,use_dynamic,m",
                         list(itertools.product([False, True], [False, True], [0, 1, 2, 3])))
def test_width_formula(use_static, use_dynamic, m):
    rng = np.random.default_rng(m)
    n, p, w, T = 4, 3, 2, 6
    b = bundle(rng, T, n, p, w)
    spec = AugmentSpec(use_static, use_dynamic, m)
    expected = 1 + p * use_static + w * (m + 1) * use_dynamic
    assert spec.width(p, w) == expected
    assert augment_step(rng.random(n), b.static_attrs, b.dynamic_attrs, 3, spec).shape == (n, expected)
    assert augment_series(rng.random((T, n)), b, spec).shape == (T, n, expected)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 9999), n=st.integers(1, 5), p=st.integers(0, 3), w=st.integers(0, 3),
       m=st.integers(0, 4), T=st.integers(1, 8), s=st.booleans(), d=st.booleans())
def test_series_matches_stepwise(seed, n, p, w, m, T, s, d):
    rng = np.random.default_rng(seed)
    b = bundle(rng, T, n, p, w)
    x = rng.random((T, n))
    spec = AugmentSpec(s, d, m)
    full = augment_series(x, b, spec)
    for t in range(T):
        step = augment_step(x[t], b.static_attrs, b.dynamic_attrs, t, spec)
        assert np.array_equal(full[t], step)
        assert np.array_equal(step[:, 0], x[t])


def test_sequence_static_constant_and_off_case():
    rng = np.random.default_rng(1)
    T, n = 12, 3
    b = bundle(rng, T, n, 2, 1)
    x = rng.random((T, n))
    win = WindowedSample(5, 4, 1)
    seq = augment_sequence(win, x, b, AugmentSpec(True, True, 2))
    assert seq.shape == (4, n, AugmentSpec(True, True, 2).width(2, 1))
    for k in range(4):
        assert np.array_equal(seq[k, :, 1:3], b.static_attrs)
    off = augment_sequence(win, x, b, TGCN_SPEC)
    assert np.array_equal(off[..., 0], x[5:9])


def test_errors():
    D = np.zeros((3, 2, 1))
    with pytest.raises(IndexOutOfRangeError):
        augment_step(np.ones(2), None, D, 3, AugmentSpec(False, True, 1))
    with pytest.raises(ShapeMismatchError):
        augment_step(np.ones(3), None, D, 0, AugmentSpec(False, True, 1))
    with pytest.raises(ShapeMismatchError):
        augment_step(np.ones(2), np.ones((3, 1)), None, 0, AugmentSpec(True, False))
    with pytest.raises(ValueError):
        AugmentSpec(window_m=-1)


def test_labels_and_round_trip():
    assert [AugmentSpec(s, d).label for s, d in [(0, 0), (1, 0), (0, 1), (1, 1)]] == \
        ["TGCN", "poi", "weather", "weather+poi"]
    spec = AugmentSpec(True, False, 3)
    assert AugmentSpec.from_dict(spec.to_dict()) == spec
