"""The alternating bit protocol as executable machines.

A sender tags each payload with a bit that flips per acknowledged message,
pushes it through a lossy data medium, and a receiver echoes the bit back
through an equally lossy acknowledgement medium while writing fresh payloads
to its output.  Loss is driven by *oracles*: boolean streams deciding, per
message, whether a medium passes or drops it.  Composed with a one-tick
startup delay on the acknowledgement wire, the whole system is the identity
on untimed message histories -- that property is what the test kit checks.

States are plain values so they compare structurally: the sender state is
``(bit, buffer tuple)``, the receiver state is the expected bit, a medium
state is its oracle cursor.  Signed messages are ``(bit, payload)`` pairs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Tuple

from .runtime import (
    FromA,
    FromB,
    ModelError,
    MsgI,
    MsgO,
    NetworkSpec,
    SetTimer,
    TimeoutEvent,
    attach_timer,
    demux_timed,
    lift_timed,
    machine_stream,
    merge_timed,
)
from .streams import Tick, TimedStream

# Slots the sender waits for an acknowledgement before resending.
RESEND_TIMEOUT = 3

INITIAL_BIT = True


class OracleExhausted(Exception):
    """An explicit finite oracle ran out of bits."""


@dataclass(frozen=True)
class OracleSpec:
    """A medium behavior prediction stream, in one of three finite forms.

    explicit  -- a fixed bit list, error past the end;
    cyclic    -- a fixed bit list repeated forever (must contain a pass);
    bernoulli -- seeded independent draws with pass probability > 0.

    Each form reduces to a pure cursor, so medium runs replay exactly.
    """

    kind: str
    bits: Tuple[bool, ...] = ()
    pass_probability: float = 1.0
    seed: int = 0

    @classmethod
    def explicit(cls, bits) -> "OracleSpec":
        return cls(kind="explicit", bits=tuple(bool(b) for b in bits))

    @classmethod
    def cyclic(cls, bits) -> "OracleSpec":
        bits = tuple(bool(b) for b in bits)
        if not bits:
            raise ValueError("cyclic oracle needs at least one bit")
        if not any(bits):
            raise ValueError("cyclic oracle must contain a pass bit (fairness)")
        return cls(kind="cyclic", bits=bits)

    @classmethod
    def bernoulli(cls, pass_probability: float, seed: int) -> "OracleSpec":
        if not 0.0 < pass_probability <= 1.0:
            raise ValueError("pass probability must be in (0, 1] (fairness)")
        return cls(kind="bernoulli", pass_probability=pass_probability, seed=seed)

    def bit_at(self, position: int) -> bool:
        if self.kind == "explicit":
            if position >= len(self.bits):
                raise OracleExhausted(f"explicit oracle of {len(self.bits)} bits, bit {position} requested")
            return self.bits[position]
        if self.kind == "cyclic":
            return self.bits[position % len(self.bits)]
        return random.Random(f"{self.seed}:{position}").random() < self.pass_probability

    def cursor(self) -> "OracleCursor":
        return OracleCursor(self, 0)

    def to_dict(self) -> dict:
        if self.kind in ("explicit", "cyclic"):
            return {"kind": self.kind, "bits": list(self.bits)}
        return {"kind": "bernoulli", "pass_probability": self.pass_probability, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "OracleSpec":
        try:
            kind = data["kind"]
        except (TypeError, KeyError):
            raise ValueError("oracle: missing field 'kind'") from None
        if kind == "explicit":
            return cls.explicit(data.get("bits", ()))
        if kind == "cyclic":
            return cls.cyclic(data.get("bits", ()))
        if kind == "bernoulli":
            try:
                return cls.bernoulli(data["pass_probability"], int(data["seed"]))
            except KeyError as missing:
                raise ValueError(f"oracle: missing field {missing.args[0]!r}") from None
        raise ValueError(f"oracle: unknown kind {kind!r}")

    def fairness_warning(self) -> Optional[str]:
        """Explicit oracles are only fairness-checkable against a horizon;
        one whose remaining decisions are all drops deserves a warning up
        front, because no retransmission can ever get through them."""
        if self.kind != "explicit":
            return None
        if not any(self.bits):
            return "explicit oracle contains no pass bits; nothing can ever be delivered"
        trailing = 0
        for bit in reversed(self.bits):
            if bit:
                break
            trailing += 1
        if trailing:
            return f"explicit oracle ends in {trailing} drop bit(s); messages reaching that tail are lost"
        return None


@dataclass(frozen=True)
class OracleCursor:
    """Pure read position into an oracle: consuming a bit returns the next
    cursor rather than mutating."""

    spec: OracleSpec
    position: int

    def next_bit(self) -> Tuple[bool, "OracleCursor"]:
        return self.spec.bit_at(self.position), OracleCursor(self.spec, self.position + 1)

    def peek_bit(self) -> bool:
        return self.spec.bit_at(self.position)


def make_sender_delta(timeout: int = RESEND_TIMEOUT):
    """The sender transition function over the merged input algebra.

    State is (bit, buffer): the bit signs the in-flight message (the buffer
    head) and flips once that message is acknowledged.  Inputs are payloads
    (FromA), acknowledgement bits (FromB), or the timer's timeout event.
    """

    def sender_delta(state, event):
        bit, buffer = state
        if event is TimeoutEvent:
            if not buffer:
                return (bit, buffer), ()
            return (bit, buffer), (MsgO((bit, buffer[0])), SetTimer(timeout))
        if isinstance(event, MsgI):
            inner = event.payload
            if isinstance(inner, FromA):
                payload = inner.payload
                if not buffer:
                    return (bit, (payload,)), (MsgO((bit, payload)), SetTimer(timeout))
                return (bit, buffer + (payload,)), ()
            if isinstance(inner, FromB):
                ack = inner.payload
                if not buffer or ack != bit:
                    return (bit, buffer), ()
                if len(buffer) == 1:
                    return (not bit, ()), (SetTimer(-1),)
                rest = buffer[1:]
                return (not bit, rest), (MsgO((not bit, rest[0])), SetTimer(timeout))
        raise ModelError(f"sender has no transition for state {state!r} and input {event!r}")

    return sender_delta


sender_delta = make_sender_delta()


def sender_component(
    inputs: TimedStream,
    acks: TimedStream,
    *,
    timeout: int = RESEND_TIMEOUT,
    initial_bit: bool = INITIAL_BIT,
) -> TimedStream:
    """Signed-message stream produced by the sender machine run over the
    merged payload and acknowledgement streams, timer initially disabled."""
    start = ((initial_bit, ()), -1)
    delta = attach_timer(make_sender_delta(timeout))
    return machine_stream(start, delta, merge_timed(inputs, acks))


def medium_delta(state: OracleCursor, payload):
    """Consume one oracle bit per message: pass emits the message unchanged,
    drop emits nothing.  Ticks never reach this delta (time insensitivity is
    added by lift_timed)."""
    bit, rest = state.next_bit()
    return rest, ((payload,) if bit else ())


def medium_component(oracle: OracleSpec, inputs: TimedStream) -> TimedStream:
    return machine_stream(oracle.cursor(), lift_timed(medium_delta), inputs)


def receiver_delta(expected: bool, message):
    """(new expected bit, acknowledgements, delivered payloads).

    The received bit is always echoed back; the payload is delivered only
    when the bit matches the expected one (otherwise it is a stale
    retransmission the sender has not yet seen acknowledged).
    """
    bit, payload = message
    if bit == expected:
        return (not expected), (bit,), (payload,)
    return expected, (bit,), ()


def receiver_delta_tagged(expected: bool, message):
    """receiver_delta with both output channels folded into one sequence:
    acknowledgements tagged FromA, delivered payloads FromB."""
    new_expected, acks, delivered = receiver_delta(expected, message)
    outputs = tuple(FromA(b) for b in acks) + tuple(FromB(p) for p in delivered)
    return new_expected, outputs


def receiver_component(
    inputs: TimedStream, *, initial_bit: bool = INITIAL_BIT
) -> Tuple[TimedStream, TimedStream]:
    """(acknowledgement stream, delivered payload stream)."""
    merged = machine_stream(initial_bit, lift_timed(receiver_delta_tagged), inputs)
    return demux_timed(merged)


def build_abp_network(
    data_oracle: OracleSpec,
    ack_oracle: OracleSpec,
    *,
    timeout: int = RESEND_TIMEOUT,
    sender_bit: bool = INITIAL_BIT,
    receiver_bit: bool = INITIAL_BIT,
) -> NetworkSpec:
    """The four-component wiring: sender -> data medium -> receiver, with
    acknowledgements fed back through the ack medium.  The feedback wire
    `am` starts with a single tick so the cycle has a productive schedule.

    The external wire is `input`; delivered payloads appear on `out`.
    """
    net = NetworkSpec()
    net.add_machine(
        "sender",
        ((sender_bit, ()), -1),
        attach_timer(make_sender_delta(timeout)),
        inputs=["input", "am"],
        outputs=["ds"],
    )
    net.add_machine(
        "data_medium",
        data_oracle.cursor(),
        lift_timed(medium_delta),
        inputs=["ds"],
        outputs=["dm"],
    )
    net.add_machine(
        "receiver",
        receiver_bit,
        lift_timed(receiver_delta_tagged),
        inputs=["dm"],
        outputs=["as", "out"],
    )
    net.add_machine(
        "ack_medium",
        ack_oracle.cursor(),
        lift_timed(medium_delta),
        inputs=["as"],
        outputs=["am"],
    )
    net.initialize("am", [Tick])
    return net


def abp_compose(
    oracles: Tuple[OracleSpec, OracleSpec],
    inputs: TimedStream,
    *,
    timeout: int = RESEND_TIMEOUT,
    sender_bit: bool = INITIAL_BIT,
    receiver_bit: bool = INITIAL_BIT,
) -> TimedStream:
    """Delivered-payload stream of the composed protocol.  Production is
    demand driven: each observation runs a fresh network engine slot by
    slot for as long as the input stream provides slots."""
    from .runtime import NetworkEngine
    from .streams import Msg

    data_oracle, ack_oracle = oracles

    def produce():
        net = build_abp_network(
            data_oracle,
            ack_oracle,
            timeout=timeout,
            sender_bit=sender_bit,
            receiver_bit=receiver_bit,
        )
        engine = NetworkEngine(net, {"input": inputs})
        slot = 0
        while engine.advance_slot():
            for payload in engine.history["out"][slot]:
                yield Msg(payload)
            yield Tick
            slot += 1

    return TimedStream(produce, horizon=inputs.horizon)
