import numpy as np
import pytest

from simgcf.synthetic import two_block_dataset
from simgcf.variants import VARIANTS, build_filter, resolve_variant


def test_quadrant_names_resolve():
    assert resolve_variant("I").quadrant == "I" and not resolve_variant("I").space_flip
    assert resolve_variant("iii").space_flip
    assert resolve_variant("II").quadrant == "II"
    with pytest.raises(ValueError):
        resolve_variant("jgcf-x")


def test_i_and_iii_differ_only_in_signs_and_flip():
    a = build_filter(resolve_variant("I"))
    b = build_filter(resolve_variant("III"))
    assert np.allclose(np.abs(a.propagation_coefficients()), np.abs(b.propagation_coefficients()))
    assert np.array_equal(np.sign(b.propagation_coefficients()), [-1, 1, -1, 1])
    assert resolve_variant("III").space_flip != resolve_variant("I").space_flip


def test_ablations():
    sf = VARIANTS["jgcf-h-sf"]
    assert sf.space_flip and not sf.use_scaler and build_filter(sf).scaler is None
    assert not VARIANTS["jgcf-h"].space_flip
    assert np.allclose(build_filter(VARIANTS["lightgcn"]).propagation_coefficients(), 0.25)


def test_two_block_dataset_shape():
    ds = two_block_dataset(200, 100, 20, seed=0, window=30)
    assert (ds.user_count, ds.item_count, ds.interaction_count) == (200, 100, 4000)
    for u, items in enumerate(ds.user_items()):
        assert len(items) == 20
        assert np.all(items < 50) if u < 100 else np.all(items >= 50)
    with pytest.raises(ValueError):
        two_block_dataset(per_user=40, window=30)
