"""Two-party protocols on FastPai ciphertexts: SMUL, SCMP, SSBA and SDIV.

S0 holds the encrypted operands, the first key share and the mask tuple; it
drives every session. S1 holds the second key share, a tuple of encrypted
constants and the fixed-base table, and answers single requests without
keeping per-session state.
"""

from __future__ import annotations

import contextlib
import logging
import threading
from dataclasses import dataclass, field
from typing import Iterator

from .errors import (
    EndOfChannel,
    InternalInvariantError,
    InvalidArgument,
    ProtocolError,
    TransportError,
    TwinPaiError,
)
from .fastpai import (
    Ciphertext,
    PublicKey,
    SecurityParams,
    hom_add,
    hom_neg,
    hom_scal,
    hom_sub,
)
from .modmath import RandomSource
from .offline import (
    PrecompTable,
    TupleS0,
    TupleS1,
    build_table,
    build_tuple_s0,
    build_tuple_s1,
    draw_cmp_masks,
    draw_constants,
    draw_mul_masks,
    draw_one,
    enc_fast,
)
from .threshold import PartialDecryption, PartialKey, pdec, tdec
from .transport import (
    ERROR,
    HELLO,
    SCMP_REQ,
    SCMP_RESP,
    SMUL_REQ,
    SMUL_RESP,
    Channel,
    Frame,
    TcpAcceptor,
    pair_inmemory,
)

logger = logging.getLogger(__name__)

S0 = "S0"
S1 = "S1"

# keeps additive masks positive except with probability 2^-40
MASK_MARGIN_BITS = 40

CIPHERTEXTS_PER_ROUND = 3


@dataclass
class PartyContext:
    role: str
    pk: PublicKey
    partial: PartialKey
    params: SecurityParams
    tuple_s0: TupleS0 | None = None
    tuple_s1: TupleS1 | None = None
    table: PrecompTable | None = None
    range_l: int = 32
    L_const: int | None = None
    rs: RandomSource = field(default_factory=RandomSource, repr=False)

    def __post_init__(self) -> None:
        sigma = self.params.sigma
        if self.L_const is None:
            self.L_const = 1 << (sigma + 2)
        if self.L_const < 1 << (sigma + 2):
            raise InvalidArgument("L must be at least 2^(sigma+2)")
        if self.range_l < 1 or self.range_l > sigma - MASK_MARGIN_BITS:
            raise InvalidArgument(f"range l must lie in [1, sigma - {MASK_MARGIN_BITS}]")
        if 2 * self.L_const * ((1 << sigma) + (1 << self.range_l) + 1) >= self.pk.N:
            raise InvalidArgument("modulus too small to pack two masked operands")
        if self.partial.N != self.pk.N:
            raise InvalidArgument("key share and public key moduli differ")
        if self.role == S0:
            if self.tuple_s0 is None or self.partial.index != 1:
                raise InvalidArgument("S0 needs a mask tuple and key share 1")
        elif self.role == S1:
            if self.tuple_s1 is None or self.table is None or self.partial.index != 2:
                raise InvalidArgument("S1 needs a constant tuple, a table and key share 2")
        else:
            raise InvalidArgument(f"unknown role {self.role!r}")


def make_s0_context(
    pk: PublicKey,
    partial: PartialKey,
    params: SecurityParams,
    rs: RandomSource | None = None,
    range_l: int = 32,
    table: PrecompTable | None = None,
) -> PartyContext:
    """Build S0's offline material. ``table`` only speeds up the tuple build."""
    rs = rs or RandomSource()
    return PartyContext(
        S0, pk, partial, params, tuple_s0=build_tuple_s0(pk, params, rs, table), range_l=range_l, rs=rs
    )


def make_s1_context(
    pk: PublicKey,
    partial: PartialKey,
    params: SecurityParams,
    rs: RandomSource | None = None,
    range_l: int = 32,
    table: PrecompTable | None = None,
) -> PartyContext:
    rs = rs or RandomSource()
    if table is None:
        table = build_table(pk, params.table_block, params.table_len)
    return PartyContext(
        S1, pk, partial, params, tuple_s1=build_tuple_s1(pk, rs, table), table=table, range_l=range_l, rs=rs
    )


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str  # "S0->S1" or "S1->S0"
    msg_type: int
    ciphertexts: int
    nbytes: int


@dataclass
class ProtocolTranscript:
    protocol: str
    messages: list[TranscriptEntry] = field(default_factory=list)

    @property
    def ciphertext_count(self) -> int:
        return sum(m.ciphertexts for m in self.messages)

    @property
    def payload_bytes(self) -> int:
        return sum(m.nbytes for m in self.messages)


def _magnitudes(values: list[int]) -> int:
    return sum((v.bit_length() + 7) // 8 for v in values)


def _round_trip(
    channel: Channel,
    session_id: int,
    req_type: int,
    values: list[int],
    resp_type: int,
    transcript: ProtocolTranscript,
) -> int:
    reply = channel.exchange(Frame.with_values(req_type, session_id, values), resp_type)
    transcript.messages.append(TranscriptEntry("S0->S1", req_type, len(values), _magnitudes(values)))
    out = reply.values()
    if len(out) != 1:
        raise ProtocolError(f"expected one ciphertext in reply, got {len(out)}")
    transcript.messages.append(TranscriptEntry("S1->S0", resp_type, 1, _magnitudes(out)))
    return out[0]


def _check_s0(ctx: PartyContext) -> TupleS0:
    if ctx.role != S0 or ctx.tuple_s0 is None:
        raise InvalidArgument("protocol sessions are driven by S0")
    return ctx.tuple_s0


def _session(channel: Channel, session_id: int | None) -> int:
    return channel.new_session_id() if session_id is None else session_id


def smul(
    ctx0: PartyContext,
    channel: Channel,
    cx: Ciphertext,
    cy: Ciphertext,
    *,
    transcript: ProtocolTranscript | None = None,
    session_id: int | None = None,
) -> Ciphertext:
    """[x*y] from [x] and [y]."""
    tup = _check_s0(ctx0)
    pk = ctx0.pk
    transcript = transcript if transcript is not None else ProtocolTranscript("smul")
    sid = _session(channel, session_id)
    r1, r2, enc_r1, enc_r2, enc_neg_r1r2 = draw_mul_masks(tup, pk)
    X = hom_add(pk, cx, enc_r1)
    Y = hom_add(pk, cy, enc_r2)
    C = hom_add(pk, hom_scal(pk, X, ctx0.L_const), Y)
    C1 = pdec(ctx0.partial, C)
    masked_product = Ciphertext(
        _round_trip(channel, sid, SMUL_REQ, [C.value, C1.value], SMUL_RESP, transcript)
    )
    neg_r2x = hom_scal(pk, hom_neg(pk, cx), r2)
    neg_r1y = hom_scal(pk, hom_neg(pk, cy), r1)
    out = hom_add(pk, masked_product, neg_r2x)
    out = hom_add(pk, out, neg_r1y)
    return hom_add(pk, out, enc_neg_r1r2)


def split_masked(t: int, L: int) -> tuple[int, int]:
    """Recover (x + r1, y + r2) from L*(x + r1) + y + r2."""
    return divmod(t, L)


def smul_serve_step(ctx1: PartyContext, C: Ciphertext, C1: PartialDecryption) -> Ciphertext:
    pk = ctx1.pk
    t = tdec(C1, pdec(ctx1.partial, C))
    # a wrapped (negative) mask would land in the upper half of Z_N
    assert 2 * t < pk.N, "masked operand left the packing range"
    a, b = split_masked(t, ctx1.L_const)
    return enc_fast(pk, ctx1.table, a * b % pk.N, ctx1.rs)


def scmp(
    ctx0: PartyContext,
    channel: Channel,
    cx: Ciphertext,
    cy: Ciphertext,
    *,
    pi: int | None = None,
    transcript: ProtocolTranscript | None = None,
    session_id: int | None = None,
) -> Ciphertext:
    """[mu] with mu = 0 iff x >= y, else 1."""
    tup = _check_s0(ctx0)
    pk = ctx0.pk
    transcript = transcript if transcript is not None else ProtocolTranscript("scmp")
    sid = _session(channel, session_id)
    r1, r2, enc_r1_plus_r2, enc_r2 = draw_cmp_masks(tup, pk)
    if pi is None:
        pi = ctx0.rs.getrandbits(1)
    if pi not in (0, 1):
        raise InvalidArgument("pi must be 0 or 1")
    if pi == 0:
        D = hom_add(pk, hom_scal(pk, hom_sub(pk, cx, cy), r1), enc_r1_plus_r2)
    else:
        D = hom_add(pk, hom_scal(pk, hom_sub(pk, cy, cx), r1), enc_r2)
    D1 = pdec(ctx0.partial, D)
    mu0 = Ciphertext(_round_trip(channel, sid, SCMP_REQ, [D.value, D1.value], SCMP_RESP, transcript))
    if pi == 0:
        return mu0
    return hom_sub(pk, draw_one(tup, pk), mu0)


def scmp_serve_step(ctx1: PartyContext, D: Ciphertext, D1: PartialDecryption) -> Ciphertext:
    pk = ctx1.pk
    d = tdec(D1, pdec(ctx1.partial, D))
    zero, one = draw_constants(ctx1.tuple_s1, pk)
    return zero if 2 * d > pk.N else one


def ssba(
    ctx0: PartyContext,
    channel: Channel,
    cx: Ciphertext,
    *,
    transcript: ProtocolTranscript | None = None,
    session_id: int | None = None,
) -> tuple[Ciphertext, Ciphertext]:
    """([s_x], [|x|]) with s_x the sign bit of x."""
    tup = _check_s0(ctx0)
    pk = ctx0.pk
    transcript = transcript if transcript is not None else ProtocolTranscript("ssba")
    sid = _session(channel, session_id)
    zero, one = draw_constants(tup, pk)
    s = scmp(ctx0, channel, cx, zero, transcript=transcript, session_id=sid)
    one_minus_2s = hom_sub(pk, one, hom_scal(pk, s, 2))
    magnitude = smul(ctx0, channel, one_minus_2s, cx, transcript=transcript, session_id=sid)
    return s, magnitude


def sdiv(
    ctx0: PartyContext,
    channel: Channel,
    cx: Ciphertext,
    cy: Ciphertext,
    l: int | None = None,
    *,
    transcript: ProtocolTranscript | None = None,
    session_id: int | None = None,
) -> tuple[Ciphertext, Ciphertext]:
    """([q], [e]) with x = q*y + e, for x in [0, 2^l] and y in (0, 2^l].

    y = 0 cannot be detected under encryption; the caller guarantees y > 0.
    """
    tup = _check_s0(ctx0)
    pk = ctx0.pk
    l = ctx0.range_l if l is None else l
    if not 0 <= l <= ctx0.params.sigma - MASK_MARGIN_BITS or 2 * l > ctx0.params.sigma:
        raise InvalidArgument("l too large: 2^l * y must stay below 2^sigma")
    transcript = transcript if transcript is not None else ProtocolTranscript("sdiv")
    start = transcript.ciphertext_count
    sid = _session(channel, session_id)
    zero, one = draw_constants(tup, pk)
    q = zero
    for i in range(l, -1, -1):
        c = hom_scal(pk, cy, 1 << i)
        mu = scmp(ctx0, channel, cx, c, transcript=transcript, session_id=sid)
        mu_prime = hom_sub(pk, one, mu)
        q = hom_add(pk, q, hom_scal(pk, mu_prime, 1 << i))
        m = smul(ctx0, channel, mu_prime, c, transcript=transcript, session_id=sid)
        cx = hom_sub(pk, cx, m)
    used = transcript.ciphertext_count - start
    if used != 2 * CIPHERTEXTS_PER_ROUND * (l + 1):
        raise InternalInvariantError(f"sdiv exchanged {used} ciphertexts, expected {6 * (l + 1)}")
    return q, cx


def expected_ciphertexts(protocol: str, l: int = 0) -> int:
    return {
        "smul": 3,
        "scmp": 3,
        "ssba": 6,
        "sdiv": 6 * (l + 1),
    }[protocol]


def _handle(ctx1: PartyContext, frame: Frame) -> Frame:
    N = ctx1.pk.N
    if frame.msg_type in (SMUL_REQ, SCMP_REQ):
        values = frame.values()
        if len(values) != 2:
            raise ProtocolError(f"request carries {len(values)} values, expected 2")
        n2 = N * N
        if not all(0 < v < n2 for v in values):
            raise ProtocolError("request value outside Z_{N^2}")
        ct = Ciphertext(values[0])
        part = PartialDecryption(1, values[1], N)
        if frame.msg_type == SMUL_REQ:
            return Frame.with_values(SMUL_RESP, frame.session_id, [smul_serve_step(ctx1, ct, part).value])
        return Frame.with_values(SCMP_RESP, frame.session_id, [scmp_serve_step(ctx1, ct, part).value])
    raise ProtocolError(f"unknown message type 0x{frame.msg_type:02x}")


def serve(ctx1: PartyContext, channel: Channel) -> None:
    """Answer S0 requests until the channel closes."""
    if ctx1.role != S1:
        raise InvalidArgument("serve runs on S1")
    sessions: set[int] = set()
    while True:
        try:
            frame = channel.recv()
        except EndOfChannel:
            break
        except TwinPaiError as exc:
            if channel.closed:
                break
            logger.warning("dropping undecodable frame: %s", exc)
            channel.send(Frame.error(0, f"malformed frame: {exc}"))
            continue
        if frame.msg_type in (HELLO, ERROR):
            continue
        sessions.add(frame.session_id)
        try:
            reply = _handle(ctx1, frame)
        except (TwinPaiError, AssertionError) as exc:
            logger.warning("session %d aborted: %s", frame.session_id, exc)
            reply = Frame.error(frame.session_id, str(exc) or type(exc).__name__)
        try:
            channel.send(reply)
        except TransportError:
            break
    stats = channel.stats()
    logger.info(
        "channel done: %d sessions, %d frames in, %d frames out, %d ciphertexts",
        len(sessions), stats.frames_received, stats.frames_sent, stats.ciphertexts,
    )


def run_server(ctx1: PartyContext, acceptor: TcpAcceptor, stop: threading.Event) -> None:
    """Accept connections until ``stop`` is set; one serve loop per connection."""
    digest = ctx1.pk.digest()
    workers = []
    while not stop.is_set():
        try:
            channel = acceptor.accept(digest, timeout=0.2)
        except TransportError as exc:
            if "timed out" not in str(exc):
                logger.error("connection rejected: %s", exc)
            continue
        logger.info("accepted connection from %s", channel.peer)
        worker = threading.Thread(target=serve, args=(ctx1, channel), daemon=True)
        worker.start()
        workers.append((worker, channel))
    for worker, channel in workers:
        channel.close()
        worker.join(timeout=5)
    acceptor.close()


@contextlib.contextmanager
def local_session(ctx1: PartyContext) -> Iterator[Channel]:
    """In-process S1 serving on one end of a memory channel pair."""
    mine, theirs = pair_inmemory()
    worker = threading.Thread(target=serve, args=(ctx1, theirs), daemon=True)
    worker.start()
    try:
        yield mine
    finally:
        mine.close()
        worker.join(timeout=10)


def oracle_mul(x: int, y: int) -> int:
    return x * y


def oracle_cmp(x: int, y: int) -> int:
    return 0 if x >= y else 1


def oracle_ssba(x: int) -> tuple[int, int]:
    return (0, x) if x >= 0 else (1, -x)


def oracle_divmod(x: int, y: int) -> tuple[int, int]:
    if y == 0:
        raise InvalidArgument("division by zero")
    return divmod(x, y)
