"""Execution runtime for stream-processing state machines.

Machines are pure transition functions ``delta(state, input) -> (state,
outputs)`` with a finite output sequence per step.  The runtime supplies
everything the hand-written models are executed against: machine execution
over item streams, lifting untimed machines to tick-aware ones, timer
attachment, slot-synchronous channel merge/demux, and a deterministic
per-slot scheduler that runs component networks with feedback wires.

Timer semantics (fixed here, relied on everywhere else): ``SetTimer n``
arms a countdown of n ticks; each subsequent tick decrements; the timeout
event is delivered to the inner machine during the n-th tick, before that
tick is emitted, and a ``SetTimer`` issued by the timeout handler re-arms
the counter.  ``SetTimer -1`` disables the timer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .streams import Msg, Tick, TimedStream

# A transition function: (state, input) -> (new state, output sequence).
Delta = Callable[[Any, Any], Tuple[Any, Sequence[Any]]]

DISABLED = -1


class InvalidTimerValue(Exception):
    """SetTimer carried a value that is neither >= 1 nor exactly -1."""


class ModelError(Exception):
    """A model delta was applied to a (state, input) pair it does not cover,
    or a component broke the one-tick-per-slot discipline."""


class DeadlockDetected(Exception):
    """A network cycle has no tick-bearing initializer, so no schedule can
    make progress."""


@dataclass(frozen=True)
class FromA:
    """Message tagged as coming from the first of two merged channels."""

    payload: Any


@dataclass(frozen=True)
class FromB:
    """Message tagged as coming from the second of two merged channels."""

    payload: Any


@dataclass(frozen=True)
class MsgI:
    """Ordinary input to a timer-owning machine."""

    payload: Any


class _TimeoutEvent:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TimeoutEvent"


TimeoutEvent = _TimeoutEvent()


@dataclass(frozen=True)
class MsgO:
    """Ordinary output of a timer-owning machine."""

    payload: Any


@dataclass(frozen=True)
class SetTimer:
    """Arm the ambient timer for `slots` ticks; -1 disables it."""

    slots: int


def exec_machine(start, delta: Delta, inputs: Iterable[Any]) -> Iterator[Any]:
    """Run a machine over an input sequence, yielding the concatenation of
    per-step outputs.  Evaluation is demand driven: the outputs for input k
    are available before input k+1 is consumed, which is what lets feedback
    compositions make progress.
    """
    state = start
    for item in inputs:
        state, outputs = delta(state, item)
        yield from outputs


def run_machine(start, delta: Delta, inputs: Iterable[Any]):
    """Eager variant of exec_machine returning (final state, outputs)."""
    state = start
    collected: List[Any] = []
    for item in inputs:
        state, outputs = delta(state, item)
        collected.extend(outputs)
    return state, tuple(collected)


def lift_timed(delta: Delta) -> Delta:
    """Make an untimed machine tick-aware: ticks pass through unchanged
    (state untouched), messages run the inner machine with Msg wrapping."""

    def timed(state, item):
        if item is Tick:
            return state, (Tick,)
        new_state, outputs = delta(state, item.payload)
        return new_state, tuple(Msg(o) for o in outputs)

    return timed


def attach_timer(delta: Delta) -> Delta:
    """Wrap a machine that speaks MsgI/TimeoutEvent and MsgO/SetTimer into a
    tick-aware machine owning a countdown timer.

    State becomes ``(inner state, counter)`` with counter -1 when disabled.
    On a message, inner outputs are emitted in order; each SetTimer is
    absorbed into the counter (last one wins).  On a tick, the counter is
    decremented; when it would hit zero the inner machine receives
    TimeoutEvent within the same slot, its outputs are processed the same
    way, and the tick is emitted last.
    """

    def apply_outputs(inner_outputs, counter):
        emitted = []
        for out in inner_outputs:
            if isinstance(out, SetTimer):
                if out.slots == 0 or out.slots < DISABLED:
                    raise InvalidTimerValue(f"SetTimer({out.slots})")
                counter = out.slots
            elif isinstance(out, MsgO):
                emitted.append(Msg(out.payload))
            else:
                raise ModelError(f"timer machine produced {out!r}, expected MsgO or SetTimer")
        return counter, emitted

    def timed(state_counter, item):
        state, counter = state_counter
        if item is Tick:
            emitted: List[Any] = []
            if counter >= 2:
                counter -= 1
            elif counter == 1:
                counter = DISABLED
                state, inner_outputs = delta(state, TimeoutEvent)
                counter, emitted = apply_outputs(inner_outputs, counter)
            emitted.append(Tick)
            return (state, counter), tuple(emitted)
        state, inner_outputs = delta(state, MsgI(item.payload))
        counter, emitted = apply_outputs(inner_outputs, counter)
        return (state, counter), tuple(emitted)

    return timed


def machine_stream(start, delta: Delta, inputs: TimedStream) -> TimedStream:
    """The output stream of a tick-aware machine run over `inputs`.  The
    machine is restarted from `start` on every observation, so the result
    is as pure as its input."""
    return TimedStream(lambda: exec_machine(start, delta, inputs.items()), horizon=inputs.horizon)


def _slot_iter(s: TimedStream) -> Iterator[tuple]:
    current: List[Any] = []
    for item in s.items():
        if item is Tick:
            yield tuple(current)
            current = []
        else:
            current.append(item.payload)
    if current:
        raise ModelError("timed stream ended inside a slot (trailing messages without a tick)")


def merge_timed(a: TimedStream, b: TimedStream) -> TimedStream:
    """Slot-synchronous merge: per slot, all of a's messages tagged FromA,
    then all of b's tagged FromB, then one tick.  Runs for as many slots as
    both streams provide."""

    def produce():
        for slot_a, slot_b in zip(_slot_iter(a), _slot_iter(b)):
            for payload in slot_a:
                yield Msg(FromA(payload))
            for payload in slot_b:
                yield Msg(FromB(payload))
            yield Tick

    horizons = [h for h in (a.horizon, b.horizon) if h is not None]
    horizon = min(horizons) if horizons else None
    return TimedStream(produce, horizon=horizon)


def demux_timed(s: TimedStream) -> Tuple[TimedStream, TimedStream]:
    """Split a merged stream back into its two channels.  FromA payloads go
    to the first output, FromB to the second; every tick goes to both."""

    def route(tag):
        def produce():
            for item in s.items():
                if item is Tick:
                    yield Tick
                elif isinstance(item.payload, tag):
                    yield Msg(item.payload.payload)
                elif isinstance(item.payload, (FromA, FromB)):
                    continue
                else:
                    raise ModelError(f"demux saw untagged payload {item.payload!r}")

        return TimedStream(produce, horizon=s.horizon)

    return route(FromA), route(FromB)


@dataclass
class _Component:
    name: str
    start: Any
    delta: Delta
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]


class NetworkSpec:
    """A static wiring of named machines.

    Wires are named channels; a wire is produced by exactly one component
    output (or arrives as an external input) and may feed any number of
    component inputs.  Feedback is legal as long as every cycle passes
    through a wire carrying a tick-bearing initializer, which delays the
    cycle by at least one slot.

    Machines must be tick-aware (e.g. built with lift_timed/attach_timer).
    A machine with two input ports sees its inputs merged FromA/FromB in
    port order; a machine with two output ports must emit FromA/FromB
    payloads, which are routed to the first and second port respectively.
    """

    def __init__(self):
        self._components: Dict[str, _Component] = {}
        self._producers: Dict[str, str] = {}
        self._initializers: Dict[str, tuple] = {}
        self._wire_order: List[str] = []

    def add_machine(self, name: str, start, delta: Delta, *, inputs: Sequence[str], outputs: Sequence[str]):
        if name in self._components:
            raise ValueError(f"duplicate component {name!r}")
        if not 1 <= len(inputs) <= 2 or not 1 <= len(outputs) <= 2:
            raise ValueError("components support one or two ports per direction")
        comp = _Component(name, start, delta, tuple(inputs), tuple(outputs))
        for wire in comp.inputs:
            self._note_wire(wire)
        for wire in comp.outputs:
            if wire in self._producers:
                raise ValueError(f"wire {wire!r} already produced by {self._producers[wire]!r}")
            self._producers[wire] = name
            self._note_wire(wire)
        self._components[name] = comp
        return self

    def initialize(self, wire: str, items: Sequence[Any]):
        """Prepend items (messages and ticks) to a wire, ahead of whatever
        its producer emits.  An initializer containing a tick delays every
        reader of the wire by one slot per tick."""
        self._note_wire(wire)
        self._initializers[wire] = tuple(items)
        return self

    def _note_wire(self, wire: str):
        if wire not in self._wire_order:
            self._wire_order.append(wire)

    @property
    def wire_order(self) -> Tuple[str, ...]:
        return tuple(self._wire_order)

    def external_wires(self) -> Tuple[str, ...]:
        return tuple(w for w in self._wire_order if w not in self._producers)

    def _schedule(self) -> List[_Component]:
        # Edges along wires without a tick-bearing initializer; initialized
        # wires provide their first slot(s) up front and so do not constrain
        # the order within a round.
        def delayed(wire):
            return any(item is Tick for item in self._initializers.get(wire, ()))

        consumers: Dict[str, List[str]] = {}
        for comp in self._components.values():
            for wire in comp.inputs:
                consumers.setdefault(wire, []).append(comp.name)

        blocking: Dict[str, List[str]] = {name: [] for name in self._components}
        for wire, producer in self._producers.items():
            if delayed(wire):
                continue
            for consumer in consumers.get(wire, []):
                blocking[consumer].append(producer)

        order: List[str] = []
        placed = set()
        pending = list(self._components)
        while pending:
            progressed = False
            for name in list(pending):
                if all(dep in placed for dep in blocking[name]):
                    order.append(name)
                    placed.add(name)
                    pending.remove(name)
                    progressed = True
            if not progressed:
                raise DeadlockDetected(
                    f"components {sorted(pending)} form a cycle with no tick-bearing initializer"
                )
        return [self._components[name] for name in order]


@dataclass
class NetworkRun:
    """Recorded wire histories of a network run: per wire, one payload tuple
    per slot, truncated uniformly to the requested horizon."""

    wire_order: Tuple[str, ...]
    slots: Dict[str, List[tuple]]
    horizon: int

    def stream(self, wire: str) -> TimedStream:
        from .streams import inject_ticks

        return inject_ticks(self.slots[wire])

    def records(self) -> Iterator[Tuple[int, str, tuple]]:
        """(slot index, wire name, payloads), slots ascending and wires in
        declaration order within each slot."""
        for slot in range(self.horizon):
            for wire in self.wire_order:
                yield slot, wire, self.slots[wire][slot]


class NetworkEngine:
    """Incremental per-slot evaluator of a NetworkSpec.

    One call to advance_slot() runs every component for one slot, stepping
    them in topological order of the initializer-broken wiring graph; a
    component reading a wire slot that has not been produced yet indicates
    insufficient feedback delay and raises DeadlockDetected.
    """

    def __init__(self, spec: NetworkSpec, external: Dict[str, TimedStream]):
        missing = [w for w in spec.external_wires() if w not in external]
        if missing:
            raise ValueError(f"no stream supplied for external wire(s) {missing}")
        unknown = [w for w in external if w not in spec.external_wires()]
        if unknown:
            raise ValueError(f"streams supplied for non-external wire(s) {unknown}")

        self._spec = spec
        self._order = spec._schedule()
        self._external = {name: _slot_iter(stream) for name, stream in external.items()}
        self._states = {comp.name: comp.start for comp in self._order}
        self.history: Dict[str, List[tuple]] = {w: [] for w in spec.wire_order}
        self._pending: Dict[str, List[Any]] = {w: [] for w in spec.wire_order}
        for wire, items in spec._initializers.items():
            for item in items:
                self._push(wire, item)
        self.round = 0

    def _push(self, wire: str, item):
        if item is Tick:
            self.history[wire].append(tuple(self._pending[wire]))
            self._pending[wire].clear()
        else:
            self._pending[wire].append(item.payload if isinstance(item, Msg) else item)

    def _read(self, wire: str, index: int) -> tuple:
        history = self.history[wire]
        if index >= len(history):
            raise DeadlockDetected(
                f"wire {wire!r} has no slot {index} yet; cycle lacks sufficient initial delay"
            )
        return history[index]

    def advance_slot(self) -> bool:
        """Run one slot round. Returns False (without stepping anything)
        once an external input has no further slot."""
        external_slots = {}
        for name, it in self._external.items():
            try:
                external_slots[name] = next(it)
            except StopIteration:
                return False
        for name, slot in external_slots.items():
            self.history[name].append(slot)

        index = self.round
        for comp in self._order:
            in_slots = [self._read(wire, index) for wire in comp.inputs]
            out_slots = self._step_component(comp, in_slots)
            for wire, slot in zip(comp.outputs, out_slots):
                for payload in slot:
                    self._push(wire, Msg(payload))
                self._push(wire, Tick)
        self.round += 1
        return True

    def _step_component(self, comp: _Component, in_slots: List[tuple]) -> List[tuple]:
        if len(comp.inputs) == 1:
            items = [Msg(p) for p in in_slots[0]]
        else:
            items = [Msg(FromA(p)) for p in in_slots[0]]
            items += [Msg(FromB(p)) for p in in_slots[1]]
        items.append(Tick)

        state = self._states[comp.name]
        produced: List[Any] = []
        for item in items:
            state, outputs = comp.delta(state, item)
            produced.extend(outputs)
        self._states[comp.name] = state

        ticks = sum(1 for item in produced if item is Tick)
        if ticks != 1 or produced[-1] is not Tick:
            raise ModelError(
                f"component {comp.name!r} emitted {ticks} tick(s) in one slot; "
                "expected exactly one, last"
            )
        payloads = [item.payload for item in produced[:-1]]

        if len(comp.outputs) == 1:
            return [tuple(payloads)]
        routed: List[List[Any]] = [[], []]
        for payload in payloads:
            if isinstance(payload, FromA):
                routed[0].append(payload.payload)
            elif isinstance(payload, FromB):
                routed[1].append(payload.payload)
            else:
                raise ModelError(
                    f"component {comp.name!r} has two output ports but emitted "
                    f"untagged payload {payload!r}"
                )
        return [tuple(routed[0]), tuple(routed[1])]

    def run_snapshot(self, horizon: int) -> NetworkRun:
        slots = {}
        for wire in self._spec.wire_order:
            recorded = self.history[wire]
            if len(recorded) < horizon:
                raise ModelError(f"wire {wire!r} has only {len(recorded)} of {horizon} slots")
            slots[wire] = list(recorded[:horizon])
        return NetworkRun(self._spec.wire_order, slots, horizon)


def run_network(spec: NetworkSpec, external: Dict[str, TimedStream], slots: int) -> NetworkRun:
    """Evaluate the network over the first `slots` slots and record every
    wire's history.  Identical spec, inputs and slot count give identical
    histories."""
    engine = NetworkEngine(spec, external)
    for _ in range(slots):
        if not engine.advance_slot():
            raise ModelError(
                f"external input ended after {engine.round} slots, {slots} requested"
            )
    return engine.run_snapshot(slots)
