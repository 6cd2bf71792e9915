"""Exception hierarchy shared by all twinpai modules."""

from __future__ import annotations


class TwinPaiError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(TwinPaiError, ValueError):
    pass


class NotInvertibleError(InvalidArgument):
    def __init__(self, value: int, modulus: int, gcd: int) -> None:
        super().__init__(f"{value} is not invertible modulo {modulus} (gcd={gcd})")
        self.value = value
        self.modulus = modulus
        self.gcd = gcd


class GenerationFailure(TwinPaiError):
    pass


class EncodeRangeError(InvalidArgument):
    pass


class WidthError(InvalidArgument):
    pass


class CryptoError(TwinPaiError):
    """Decryption-side failures: bad ciphertexts, mismatched key material."""


class MalformedCiphertext(CryptoError):
    pass


class ThresholdDecryptionFailure(CryptoError):
    pass


class ProtocolError(TwinPaiError):
    pass


class RemoteError(ProtocolError):
    """The peer answered with an ERROR frame."""


class InternalInvariantError(ProtocolError):
    pass


class TransportError(TwinPaiError):
    pass


class FrameDecodeError(TransportError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ClosedChannelError(TransportError):
    """Operation attempted on a locally closed channel."""


class EndOfChannel(TransportError):
    """The peer closed the channel; no more frames will arrive."""


class HandshakeError(TransportError):
    pass


class KeyFileError(TwinPaiError):
    pass
