"""Lifecycle of disconnected transactions and the class-dispatching commit.

A transaction reads (each read also returns the item's version; blind
writes are impossible), optionally disconnects, then submits its complete
write set and runs the commit pipeline, which dispatches every written
item to the mechanism of the class it was read under:

* O: snapshot read now, backward validation of the read version at commit.
* P: exclusive lock at read time; the write is guaranteed, deadlocks are
  prevented by refusing cycle-closing waits during the read phase.
* R: delta intents replayed on the latest committed state; only constraint
  violations abort.
* E: the intended delta is reserved at read time; the commit cannot fail.

The engine is callback-oriented where an operation can suspend: a read of
a locked P item returns a WAITING outcome and the supplied continuation
fires when the lock is granted (or the item is flushed back to optimistic
control).  Continuations must not re-enter the engine synchronously;
schedule follow-up work instead.  Submissions and commits complete within
the calling event.  Termination fans out to registered sinks, which is
where the adaptation controller and metrics collection hook in.

Read-only transactions never lock or reserve and always commit; each of
their reads is served from the latest committed state, so a multi-item
read-only transaction is not conflict-ordered against updaters.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from . import sg
from .locks import AcquireStatus, LockManager
from .semantic import EscrowLedger, reconcile_check, reconcile_commit
from .store import CCClass, ConstraintViolationError, Store


class Phase(Enum):
    READING = "reading"
    DISCONNECTED = "disconnected"
    WRITING = "writing"
    COMMITTED = "committed"
    ABORTED = "aborted"


class AbortReason(Enum):
    VALIDATION = "validation"
    CONSTRAINT = "constraint"
    DEADLOCK = "deadlock"
    RECLASSIFICATION = "reclassification"


class ReadStatus(Enum):
    DONE = "done"
    WAITING = "waiting"
    ABORTED = "aborted"


class EngineError(Exception):
    pass


class PhaseError(EngineError):
    pass


class BlindWriteError(EngineError):
    pass


class IntentError(EngineError):
    pass


@dataclass(frozen=True)
class ReadOutcome:
    status: ReadStatus
    value: object = None
    version: int = 0
    granted: bool = False  # escrow reads: reservation granted
    abort_reason: Optional[AbortReason] = None


@dataclass(frozen=True)
class ReadRecord:
    value: object
    version: int
    class_at_read: CCClass
    escrow: bool = False


@dataclass(frozen=True)
class WriteIntent:
    """Absolute replacement for O/P items, delta for R/E items."""

    kind: str  # "absolute" | "delta"
    amount: object

    @staticmethod
    def absolute(value: object) -> "WriteIntent":
        return WriteIntent("absolute", value)

    @staticmethod
    def delta(amount: float) -> "WriteIntent":
        return WriteIntent("delta", amount)


@dataclass
class Txn:
    txn_id: int
    read_only: bool
    arrival_ms: float
    phase: Phase = Phase.READING
    read_set: dict[str, ReadRecord] = field(default_factory=dict)
    write_set: dict[str, WriteIntent] = field(default_factory=dict)
    first_read_ms: Optional[float] = None
    write_submit_ms: Optional[float] = None
    termination_ms: Optional[float] = None
    abort_reason: Optional[AbortReason] = None
    waiting_on: Optional[str] = None
    _pending_cb: Optional[Callable[[ReadOutcome], None]] = None

    @property
    def terminated(self) -> bool:
        return self.phase in (Phase.COMMITTED, Phase.ABORTED)


@dataclass(frozen=True)
class TerminationRecord:
    """Fan-out payload for the termination lane."""

    txn_id: int
    outcome: str  # "commit" | "abort"
    abort_reason: Optional[AbortReason]
    arrival_ms: float
    first_read_ms: Optional[float]
    write_submit_ms: Optional[float]
    termination_ms: float
    items: tuple[tuple[str, CCClass], ...]  # (item id, class at read)
    queue_snapshots: dict[str, int]  # wait-queue length per P lock released

    @property
    def read_write_span_ms(self) -> Optional[float]:
        if self.first_read_ms is None or self.write_submit_ms is None:
            return None
        return self.write_submit_ms - self.first_read_ms

    @property
    def response_time_ms(self) -> float:
        return self.termination_ms - self.arrival_ms


def _wall_clock_ms(_start=time.monotonic()) -> float:
    return (time.monotonic() - _start) * 1000.0


class Engine:
    """Transaction engine over a Store; one instance per store."""

    def __init__(self, store: Store, clock: Optional[Callable[[], float]] = None) -> None:
        self.store = store
        self.locks = LockManager()
        self.escrow = EscrowLedger(store)
        self.clock = clock or _wall_clock_ms
        self.trace: list[sg.ScheduleEvent] = []
        self.termination_sinks: list[Callable[[TerminationRecord], None]] = []
        self._mutex = threading.RLock()
        self._next_txn_id = 1
        self._active: dict[int, Txn] = {}

    # -- trace helpers -----------------------------------------------------

    def _emit(self, txn_id: int, op: str, item: str = "", detail: str = "") -> None:
        self.trace.append(
            sg.ScheduleEvent(int(self.clock()), txn_id, op, item, detail)
        )

    # -- lifecycle ---------------------------------------------------------

    def begin(self, read_only: bool = False) -> Txn:
        with self._mutex:
            txn = Txn(self._next_txn_id, read_only, arrival_ms=self.clock())
            self._next_txn_id += 1
            self._active[txn.txn_id] = txn
            return txn

    def read(
        self,
        txn: Txn,
        item_id: str,
        on_complete: Optional[Callable[[ReadOutcome], None]] = None,
    ) -> ReadOutcome:
        """Read an item in the read phase.

        O/R and plain E reads return the latest committed value at once.
        P reads acquire the exclusive lock and may return WAITING; the
        continuation then fires at grant time with the value read there.
        A wait that would deadlock aborts this transaction instead.
        """
        with self._mutex:
            if txn.phase is not Phase.READING:
                raise PhaseError(f"txn {txn.txn_id} cannot read in phase {txn.phase}")
            if item_id in txn.read_set:
                rec = txn.read_set[item_id]
                return ReadOutcome(ReadStatus.DONE, rec.value, rec.version)
            item = self.store.item(item_id)
            if item.current_class is CCClass.P and not txn.read_only:
                status = self.locks.acquire(txn.txn_id, item_id)
                if status is AcquireStatus.QUEUED:
                    txn.waiting_on = item_id
                    txn._pending_cb = on_complete
                    return ReadOutcome(ReadStatus.WAITING)
                if status is AcquireStatus.DEADLOCK_REFUSED:
                    self._terminate(txn, Phase.ABORTED, AbortReason.DEADLOCK)
                    return ReadOutcome(
                        ReadStatus.ABORTED, abort_reason=AbortReason.DEADLOCK
                    )
                self._emit(txn.txn_id, sg.LOCK, item_id, "P")
            return self._record_read(txn, item_id)

    def read_escrow(
        self, txn: Txn, item_id: str, intended_delta: float
    ) -> ReadOutcome:
        """Read an E item announcing the intended delta.

        A granted reservation guarantees the later commit of that delta; a
        refusal aborts the transaction with reason CONSTRAINT.
        """
        with self._mutex:
            if txn.phase is not Phase.READING:
                raise PhaseError(f"txn {txn.txn_id} cannot read in phase {txn.phase}")
            if txn.read_only:
                raise IntentError("read-only transactions reserve nothing")
            item = self.store.item(item_id)
            if item.current_class is not CCClass.E:
                raise IntentError(f"{item_id} is not escrow-controlled")
            if not self.escrow.request(item_id, txn.txn_id, intended_delta):
                self._terminate(txn, Phase.ABORTED, AbortReason.CONSTRAINT)
                return ReadOutcome(
                    ReadStatus.ABORTED, abort_reason=AbortReason.CONSTRAINT
                )
            outcome = self._record_read(txn, item_id, escrow=True)
            return ReadOutcome(
                ReadStatus.DONE, outcome.value, outcome.version, granted=True
            )

    def _record_read(self, txn: Txn, item_id: str, escrow: bool = False) -> ReadOutcome:
        item = self.store.item(item_id)
        value, version = item.committed_value, item.version
        txn.read_set[item_id] = ReadRecord(value, version, item.current_class, escrow)
        if txn.first_read_ms is None:
            txn.first_read_ms = self.clock()
        self._emit(txn.txn_id, sg.READ, item_id, f"v{version}@{item.current_class}")
        return ReadOutcome(ReadStatus.DONE, value, version)

    def disconnect(self, txn: Txn) -> None:
        """End the read phase; locks and reservations persist."""
        if txn.phase is not Phase.READING:
            raise PhaseError(f"txn {txn.txn_id} cannot disconnect in phase {txn.phase}")
        if txn.waiting_on is not None:
            raise PhaseError(f"txn {txn.txn_id} still waits on {txn.waiting_on}")
        txn.phase = Phase.DISCONNECTED

    def submit_write_set(self, txn: Txn, writes: dict[str, WriteIntent]) -> None:
        """Hand in the complete write set; every target must have been read."""
        with self._mutex:
            if txn.phase not in (Phase.READING, Phase.DISCONNECTED):
                raise PhaseError(f"txn {txn.txn_id} cannot write in phase {txn.phase}")
            if txn.waiting_on is not None:
                raise PhaseError(f"txn {txn.txn_id} still waits on {txn.waiting_on}")
            if txn.read_only and writes:
                raise IntentError("read-only transaction submitted writes")
            for item_id, intent in writes.items():
                rec = txn.read_set.get(item_id)
                if rec is None:
                    raise BlindWriteError(f"{item_id} was not read by txn {txn.txn_id}")
                if rec.class_at_read in (CCClass.R, CCClass.E):
                    if intent.kind != "delta":
                        raise IntentError(f"{item_id} ({rec.class_at_read}) needs a delta")
                    if rec.class_at_read is CCClass.E:
                        granted = self.escrow.granted_delta(item_id, txn.txn_id)
                        if granted is None or granted != intent.amount:
                            raise IntentError(
                                f"{item_id}: delta {intent.amount} has no matching reservation"
                            )
                elif intent.kind != "absolute":
                    raise IntentError(f"{item_id} ({rec.class_at_read}) needs an absolute value")
            txn.write_set = dict(writes)
            txn.write_submit_ms = self.clock()
            txn.phase = Phase.WRITING

    def commit_pipeline(self, txn: Txn) -> tuple[Phase, Optional[AbortReason]]:
        """Run the atomic commit sequence; all items install or none do.

        Check order inside the critical section: semantic constraints
        first (a reconciliation that can never succeed outranks everything
        else), then backward validation of optimistic reads, then the
        reclassification rule for items that changed class mid-flight, and
        only then the per-item installs in canonical id order.
        """
        with self._mutex:
            if txn.phase is not Phase.WRITING:
                raise PhaseError(f"txn {txn.txn_id} cannot commit in phase {txn.phase}")
            if not txn.read_only:
                reason = self._validate(txn)
                if reason is not None:
                    self._terminate(txn, Phase.ABORTED, reason)
                    return Phase.ABORTED, reason
                self._apply(txn)
            self._terminate(txn, Phase.COMMITTED, None)
            return Phase.COMMITTED, None

    def _validate(self, txn: Txn) -> Optional[AbortReason]:
        # Semantic constraints: R deltas against the latest committed state,
        # absolute intents against their item constraint.  E deltas hold a
        # read-time guarantee and cannot fail here.
        for item_id in sorted(txn.write_set):
            intent = txn.write_set[item_id]
            rec = txn.read_set[item_id]
            try:
                if rec.class_at_read is CCClass.R:
                    reconcile_check(self.store, item_id, intent.amount)
                elif intent.kind == "absolute":
                    item = self.store.item(item_id)
                    if item.constraint is not None and not item.constraint.satisfied(
                        intent.amount
                    ):
                        raise ConstraintViolationError(item_id)
            except ConstraintViolationError:
                return AbortReason.CONSTRAINT

        # Backward validation spans the whole optimistic read set, even for
        # entries the transaction never writes.
        for item_id, rec in txn.read_set.items():
            if rec.class_at_read is not CCClass.O:
                continue
            item = self.store.item(item_id)
            if item.current_class is CCClass.O and item.version != rec.version:
                return AbortReason.VALIDATION

        # A residual lock on an item now under optimistic control marks a
        # holder whose write is still guaranteed; installing over it would
        # bypass that guarantee, so treat it like a validation failure.
        for item_id in txn.write_set:
            item = self.store.item(item_id)
            if item.current_class is CCClass.O:
                holder = self.locks.holder(item_id)
                if holder is not None and holder != txn.txn_id:
                    return AbortReason.VALIDATION

        # Items read optimistically that meanwhile moved under locking make
        # the transaction an unavoidable crash; the opposite direction is
        # safe because the lock is held since read time.
        for item_id, rec in txn.read_set.items():
            if rec.class_at_read is CCClass.O:
                if self.store.item(item_id).current_class is CCClass.P:
                    return AbortReason.RECLASSIFICATION
        return None

    def _apply(self, txn: Txn) -> None:
        for item_id in sorted(txn.write_set):
            intent = txn.write_set[item_id]
            rec = txn.read_set[item_id]
            if rec.class_at_read is CCClass.E:
                self.escrow.commit(item_id, txn.txn_id)
            elif rec.class_at_read is CCClass.R:
                reconcile_commit(self.store, item_id, intent.amount)
            elif rec.class_at_read is CCClass.O:
                self.store.install_version(item_id, intent.amount, rec.version)
            else:  # P: the lock held since read time is the commit right
                self.store.install_version(item_id, intent.amount)
            item = self.store.item(item_id)
            self._emit(
                txn.txn_id, sg.WRITE, item_id, f"v{item.version}@{rec.class_at_read}"
            )

    def abort(self, txn: Txn, reason: Optional[AbortReason] = None) -> bool:
        """Abort from any non-terminal phase; a no-op on terminated txns."""
        with self._mutex:
            if txn.terminated:
                return False
            self._terminate(txn, Phase.ABORTED, reason)
            return True

    def _terminate(self, txn: Txn, phase: Phase, reason: Optional[AbortReason]) -> None:
        txn.phase = phase
        txn.abort_reason = reason
        txn.termination_ms = self.clock()
        if phase is Phase.COMMITTED:
            self._emit(txn.txn_id, sg.COMMIT)
        else:
            self._emit(txn.txn_id, sg.ABORT, "", reason.value if reason else "")
        if txn.waiting_on is not None:
            self.locks.withdraw(txn.txn_id, txn.waiting_on)
            txn.waiting_on = None
            txn._pending_cb = None
        snapshots = {i: self.locks.queue_len(i) for i in self.locks.held_by(txn.txn_id)}
        _, grants = self.locks.release_all(txn.txn_id)
        self.escrow.release_all(txn.txn_id)
        self._active.pop(txn.txn_id, None)
        for grant in grants:
            self._complete_grant(grant.item_id, grant.txn_id)
        record = TerminationRecord(
            txn_id=txn.txn_id,
            outcome="commit" if phase is Phase.COMMITTED else "abort",
            abort_reason=reason,
            arrival_ms=txn.arrival_ms,
            first_read_ms=txn.first_read_ms,
            write_submit_ms=txn.write_submit_ms,
            termination_ms=txn.termination_ms,
            items=tuple((i, r.class_at_read) for i, r in txn.read_set.items()),
            queue_snapshots=snapshots,
        )
        for sink in self.termination_sinks:
            sink(record)

    def _complete_grant(self, item_id: str, txn_id: int) -> None:
        txn = self._active.get(txn_id)
        if txn is None or txn.phase is not Phase.READING or txn.waiting_on != item_id:
            # The waiter died between queueing and grant; pass the lock on.
            grant = self.locks.release(txn_id, item_id)
            if grant is not None:
                self._complete_grant(grant.item_id, grant.txn_id)
            return
        txn.waiting_on = None
        cb = txn._pending_cb
        txn._pending_cb = None
        self._emit(txn.txn_id, sg.LOCK, item_id, "P")
        outcome = self._record_read(txn, item_id)
        if cb is not None:
            cb(outcome)

    # -- run-time reclassification ------------------------------------------

    def reclassify_item(self, item_id: str, to_class: CCClass) -> None:
        """Switch an adaptable item between O and P.

        Moving to O flushes the lock wait queue: every waiter completes its
        read optimistically at the switch instant (the current holder keeps
        its lock, and with it the guarantee for its pending write).
        """
        with self._mutex:
            item = self.store.item(item_id)
            was = item.current_class
            self.store.set_current_class(item_id, to_class)
            if was is CCClass.P and to_class is CCClass.O:
                for txn_id in self.locks.drain_queue(item_id):
                    txn = self._active.get(txn_id)
                    if txn is None or txn.waiting_on != item_id:
                        continue
                    txn.waiting_on = None
                    cb = txn._pending_cb
                    txn._pending_cb = None
                    outcome = self._record_read(txn, item_id)
                    if cb is not None:
                        cb(outcome)
