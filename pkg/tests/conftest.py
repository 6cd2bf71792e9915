import pytest

from twinpai.fastpai import SecurityParams, keys_from_witness, make_witness
from twinpai.keyfile import KeySet
from twinpai.modmath import RandomSource
from twinpai.protocols import make_s0_context, make_s1_context


@pytest.fixture
def rs():
    return RandomSource.seeded(20240917)


@pytest.fixture(scope="session")
def toy_witness():
    # P = 2*3*7 + 1 = 43, Q = 2*5*13 + 1 = 131
    return make_witness(3, 5, 7, 13)


@pytest.fixture(scope="session")
def toy_keys(toy_witness):
    return keys_from_witness(toy_witness, RandomSource.seeded(7), r_bits=12)


@pytest.fixture(scope="session")
def keys1024():
    return KeySet.generate(SecurityParams.for_bits(1024), RandomSource.seeded(1024))


@pytest.fixture(scope="session")
def keys2048():
    return KeySet.generate(SecurityParams.for_bits(2048), RandomSource.seeded(2048))


@pytest.fixture(scope="session")
def parties1024(keys1024):
    rs = RandomSource.seeded(11)
    ctx1 = make_s1_context(keys1024.pk, keys1024.share2, keys1024.params, rs)
    ctx0 = make_s0_context(keys1024.pk, keys1024.share1, keys1024.params, rs, table=ctx1.table)
    return ctx0, ctx1
