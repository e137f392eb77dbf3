import numpy as np
import pytest

from ppmlink import DecodeFailure, RSCodec, rs_codec_roundtrip
from ppmlink.rs import GF2m

from rs_trials import run_trials


def test_field_axioms_gf16():
    gf = GF2m(4)
    for a in range(1, 16):
        assert gf.mul(a, gf.inv(a)) == 1
        for b in range(1, 16):
            assert gf.div(gf.mul(a, b), b) == a
    assert len({gf.pow_alpha(e) for e in range(15)}) == 15


def test_identity_without_corruption():
    msg = list(range(1, 12))
    assert rs_codec_roundtrip(4, 15, 11, msg) == msg
    codec = RSCodec(8, 255, 223)
    assert not any(codec.syndromes(codec.encode(list(range(223)))))


def test_gf256_sixteen_errors():
    rng = np.random.default_rng(1)
    msg = rng.integers(0, 256, 223).tolist()
    pos = rng.choice(255, 16, replace=False)
    errors = {int(p): int(rng.integers(1, 256)) for p in pos}
    assert rs_codec_roundtrip(8, 255, 223, msg, errors=errors) == msg


def test_gf256_beyond_radius_fails():
    rng = np.random.default_rng(2)
    msg = rng.integers(0, 256, 223).tolist()
    pos = rng.choice(255, 17, replace=False)
    errors = {int(p): int(rng.integers(1, 256)) for p in pos[:16]}
    erasures = {int(pos[16]): 0x5A}
    try:
        out = rs_codec_roundtrip(8, 255, 223, msg, errors=errors, erasures=erasures)
    except DecodeFailure:
        return
    assert out != msg


def test_erasures_only_up_to_redundancy():
    msg = [3, 1, 4, 1, 5]
    assert rs_codec_roundtrip(4, 15, 5, msg, erasures={i: 7 for i in range(10)}) == msg
    with pytest.raises(DecodeFailure):
        rs_codec_roundtrip(4, 15, 5, msg, erasures=range(11))


def test_randomized_predicate_agreement():
    agree, total = run_trials(10_000, seed=5)
    assert agree == total


@pytest.mark.parametrize("args", [(13, 10, 5), (4, 16, 5), (4, 15, 15), (4, 15, 0)])
def test_codec_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        RSCodec(*args)


def test_roundtrip_rejects_bad_patterns():
    with pytest.raises(ValueError):
        rs_codec_roundtrip(4, 15, 5, [1] * 5, errors={0: 0})
    with pytest.raises(ValueError):
        rs_codec_roundtrip(4, 15, 5, [1] * 5, errors={0: 1}, erasures=[0])
