import pytest

from twinpai.errors import InvalidArgument, ThresholdDecryptionFailure
from twinpai.fastpai import dec, enc, enc_with_r
from twinpai.modmath import RandomSource
from twinpai.threshold import (
    PartialDecryption,
    PartialKey,
    SplitParams,
    combined_exponent,
    pdec,
    shares_consistent,
    split_key,
    tdec,
)


def test_combined_exponent_toy(toy_keys):
    _, sk = toy_keys
    delta = combined_exponent(sk)
    assert delta % 30 == 0 and delta % 5633 == 1
    assert delta == pow(30, -1, 5633) * 30


@pytest.mark.parametrize("eta", [0, 1, 2])
def test_toy_split_and_recombine(toy_keys, eta):
    pk, sk = toy_keys
    rs = RandomSource.seeded(eta)
    k1, k2 = split_key(sk, pk, SplitParams(sigma=8, eta=eta), rs)
    assert k1.share.bit_length() == 8
    assert shares_consistent(sk, k1, k2)
    assert k1.share + k2.share == combined_exponent(sk) + eta * 30 * 5633
    for m in range(0, 5633, 131):
        c = enc_with_r(pk, m, rs.getrandbits(12))
        assert tdec(pdec(k1, c), pdec(k2, c)) == m
        assert tdec(pdec(k2, c), pdec(k1, c)) == m


@pytest.mark.parametrize("eta", [0, 1])
def test_split_1024(keys1024, eta):
    pk, sk = keys1024.pk, keys1024.sk
    rs = RandomSource.seeded(100 + eta)
    k1, k2 = split_key(sk, pk, SplitParams(128, eta), rs)
    assert k1.share.bit_length() == 128
    assert shares_consistent(sk, k1, k2)
    for _ in range(10):
        c = enc(pk, rs.randbelow(pk.N), rs)
        assert tdec(pdec(k1, c), pdec(k2, c)) == dec(sk, c)


def test_sigma_too_large_for_toy(toy_keys):
    pk, sk = toy_keys
    with pytest.raises(InvalidArgument):
        split_key(sk, pk, SplitParams(sigma=64), RandomSource.seeded(1))


def test_tdec_rejects_misuse(toy_keys):
    pk, sk = toy_keys
    k1, k2 = split_key(sk, pk, SplitParams(sigma=8), RandomSource.seeded(2))
    c = enc_with_r(pk, 5, 3)
    with pytest.raises(InvalidArgument):
        tdec(pdec(k1, c), pdec(k1, c))
    with pytest.raises(InvalidArgument):
        tdec(pdec(k1, c), PartialDecryption(2, 1, 7))
    bad = PartialKey(2, k2.share + 1, pk.N)
    assert not shares_consistent(sk, k1, bad)
    with pytest.raises(ThresholdDecryptionFailure):
        for r in range(1, 50):  # some r give h^r = 1, so scan until the wrong share shows
            ct = enc_with_r(pk, 5, r)
            tdec(pdec(k1, ct), pdec(bad, ct))


def test_partial_key_validation():
    with pytest.raises(InvalidArgument):
        PartialKey(3, 1, 7)
    with pytest.raises(InvalidArgument):
        PartialKey(1, -1, 7)
    with pytest.raises(InvalidArgument):
        SplitParams(eta=-1)
