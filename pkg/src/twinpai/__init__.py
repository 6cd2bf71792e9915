"""Twin-server secure computation over a fast Paillier variant."""

from .fastpai import (
    Ciphertext,
    PrivateKey,
    PublicKey,
    SecurityParams,
    dec,
    decode,
    enc,
    encode,
    hom_add,
    hom_scal,
    hom_sub,
    keygen,
)
from .keyfile import KeySet, load_keyset, write_keyset
from .modmath import RandomSource
from .offline import build_table, enc_fast, refresh
from .protocols import local_session, make_s0_context, make_s1_context, scmp, sdiv, smul, ssba
from .threshold import PartialKey, SplitParams, pdec, split_key, tdec
from .transport import connect_tcp, listen_tcp, pair_inmemory

__version__ = "0.1.0"

__all__ = [
    "Ciphertext",
    "KeySet",
    "PartialKey",
    "PrivateKey",
    "PublicKey",
    "RandomSource",
    "SecurityParams",
    "SplitParams",
    "build_table",
    "connect_tcp",
    "dec",
    "decode",
    "enc",
    "enc_fast",
    "encode",
    "hom_add",
    "hom_scal",
    "hom_sub",
    "keygen",
    "listen_tcp",
    "load_keyset",
    "local_session",
    "make_s0_context",
    "make_s1_context",
    "pair_inmemory",
    "pdec",
    "refresh",
    "scmp",
    "sdiv",
    "smul",
    "split_key",
    "ssba",
    "tdec",
    "write_keyset",
]
