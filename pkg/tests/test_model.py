import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binreg.model import (
    Instance,
    ModelParams,
    generate_instance,
    generate_pure_noise,
    load_instance,
    save_instance,
)


def test_noiseless_response_is_exact_column_sum():
    inst = generate_instance(ModelParams(p=10, k=3, n=5, sigma2=0.0, seed=1))
    assert np.all(inst.noise == 0.0)
    cols = inst.design[:, list(inst.planted_support)].sum(axis=1)
    assert np.array_equal(inst.response, cols)


def test_design_mean_within_clt_bound():
    inst = generate_instance(ModelParams(p=60, k=4, n=20, sigma2=1.0, seed=7))
    bound = 4.0 / math.sqrt(20 * 60)
    assert abs(inst.design.mean()) <= bound


def test_same_seed_bit_identical():
    params = ModelParams(p=25, k=5, n=12, sigma2=2.0, seed=99)
    a, b = generate_instance(params), generate_instance(params)
    assert a.planted_support == b.planted_support
    for field in ("design", "noise", "response"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


def test_reconstruction_identity_exact():
    for seed in range(5):
        inst = generate_instance(ModelParams(p=30, k=4, n=10, sigma2=1.5, seed=seed))
        assert np.max(np.abs(inst.response - inst.reconstructed_response())) == 0.0


def test_planted_support_shape():
    params = ModelParams(p=40, k=6, n=8, sigma2=1.0, seed=3)
    inst = generate_instance(params)
    assert len(inst.planted_support) == 6
    assert inst.planted_support == tuple(sorted(inst.planted_support))
    assert all(0 <= i < 40 for i in inst.planted_support)
    assert not inst.is_pure_noise


def test_pure_noise_sigma_zero_gives_zero_response():
    inst = generate_pure_noise(ModelParams(p=20, k=3, n=7, sigma2=0.0, seed=5))
    assert np.all(inst.response == 0.0)
    assert inst.is_pure_noise


def test_pure_noise_sample_variance_concentrates():
    inst = generate_pure_noise(ModelParams(p=50, k=3, n=30, sigma2=9.0, seed=2))
    assert abs(np.var(inst.response, ddof=1) - 9.0) <= 4.5


def test_pure_noise_determinism():
    params = ModelParams(p=18, k=2, n=9, sigma2=4.0, seed=11)
    a, b = generate_pure_noise(params), generate_pure_noise(params)
    assert np.array_equal(a.response, b.response)
    assert np.array_equal(a.design, b.design)


def test_pure_noise_response_independent_of_p():
    base = dict(k=3, n=15, sigma2=2.5, seed=77)
    small = generate_pure_noise(ModelParams(p=10, **base))
    large = generate_pure_noise(ModelParams(p=500, **base))
    assert np.array_equal(small.response, large.response)


def test_planted_response_independent_of_y_stream_dimensions():
    # noise stream keyed by seed alone: W identical across p
    a = generate_instance(ModelParams(p=10, k=2, n=8, sigma2=1.0, seed=13))
    b = generate_instance(ModelParams(p=40, k=2, n=8, sigma2=1.0, seed=13))
    assert np.array_equal(a.noise, b.noise)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(p=5, k=6, n=3, sigma2=1.0, seed=0),   # k > p
        dict(p=5, k=2, n=0, sigma2=1.0, seed=0),   # n = 0
        dict(p=0, k=1, n=3, sigma2=1.0, seed=0),   # p = 0
        dict(p=5, k=0, n=3, sigma2=1.0, seed=0),   # k = 0
        dict(p=5, k=2, n=3, sigma2=-0.5, seed=0),  # negative variance
        dict(p=5, k=2, n=3, sigma2=1.0, seed=-1),  # seed below range
        dict(p=5, k=2, n=3, sigma2=1.0, seed=2**64),
    ],
)
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**64 - 1))
def test_determinism_property(seed):
    params = ModelParams(p=12, k=3, n=6, sigma2=1.0, seed=seed)
    a, b = generate_instance(params), generate_instance(params)
    assert np.array_equal(a.design, b.design)
    assert np.array_equal(a.response, b.response)
    assert a.planted_support == b.planted_support


def test_save_load_round_trip(tmp_path):
    inst = generate_instance(ModelParams(p=17, k=4, n=9, sigma2=3.0, seed=21))
    path = str(tmp_path / "inst.bin")
    save_instance(inst, path)
    back = load_instance(path)
    assert back.params == inst.params
    assert back.planted_support == inst.planted_support
    assert np.array_equal(back.design, inst.design)
    assert np.array_equal(back.noise, inst.noise)
    assert np.array_equal(back.response, inst.response)
    sidecar = (tmp_path / "inst.bin.json").read_text()
    assert '"p": 17' in sidecar


def test_save_load_pure_noise_round_trip(tmp_path):
    inst = generate_pure_noise(ModelParams(p=9, k=2, n=4, sigma2=1.0, seed=5))
    path = str(tmp_path / "pn.bin")
    save_instance(inst, path)
    back = load_instance(path)
    assert back.is_pure_noise
    assert np.array_equal(back.response, inst.response)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "garbage.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_instance(str(path))


def test_load_rejects_truncation(tmp_path):
    inst = generate_instance(ModelParams(p=8, k=2, n=4, sigma2=1.0, seed=1))
    path = str(tmp_path / "cut.bin")
    save_instance(inst, path)
    blob = open(path, "rb").read()
    open(path, "wb").write(blob[:-8])
    with pytest.raises(ValueError):
        load_instance(path)


def test_arrays_are_read_only():
    inst = generate_instance(ModelParams(p=8, k=2, n=4, sigma2=1.0, seed=1))
    with pytest.raises(ValueError):
        inst.design[0, 0] = 0.0
