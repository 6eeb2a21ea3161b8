"""Exclusive locks for class-P items with FIFO queues and deadlock prevention.

Locks are acquired at read time and held until the owning transaction
terminates.  A request that cannot be granted joins a FIFO wait queue
unless queueing would close a cycle in the waits-for relation, in which
case the request is refused and the caller is expected to abort the
requester.  All mutations happen under one internal mutex, mirroring a
dedicated graph-maintenance lane.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class AcquireStatus(Enum):
    GRANTED = "granted"
    QUEUED = "queued"
    DEADLOCK_REFUSED = "deadlock_refused"


class LockError(Exception):
    pass


@dataclass(frozen=True)
class Grant:
    """Emitted by release when a queued waiter becomes the holder.

    ``queue_len_at_release`` counts the transactions still waiting when the
    previous holder let go (including the one being granted); the adaptation
    controller uses it as its wait-queue snapshot.
    """

    item_id: str
    txn_id: int
    queue_len_at_release: int


class LockManager:
    """Per-item exclusive lock table plus the waits-for graph over waiters."""

    def __init__(self) -> None:
        self._holders: dict[str, int] = {}
        self._queues: dict[str, deque[int]] = {}
        self._mutex = threading.RLock()

    # -- queries ---------------------------------------------------------

    def holder(self, item_id: str) -> Optional[int]:
        return self._holders.get(item_id)

    def queue(self, item_id: str) -> tuple[int, ...]:
        return tuple(self._queues.get(item_id, ()))

    def queue_len(self, item_id: str) -> int:
        return len(self._queues.get(item_id, ()))

    def held_by(self, txn_id: int) -> tuple[str, ...]:
        return tuple(sorted(i for i, t in self._holders.items() if t == txn_id))

    def wfg_edges(self) -> set[tuple[int, int]]:
        """Waits-for edges: each waiter waits for the holder and everyone
        queued ahead of it (FIFO order makes those effective predecessors)."""
        edges: set[tuple[int, int]] = set()
        for item_id, queue in self._queues.items():
            holder = self._holders.get(item_id)
            ahead: list[int] = [holder] if holder is not None else []
            for waiter in queue:
                for blocker in ahead:
                    edges.add((waiter, blocker))
                ahead.append(waiter)
        return edges

    def _would_deadlock(self, txn_id: int, item_id: str) -> bool:
        # The new edges would run txn_id -> holder and every queued txn.
        # A cycle appears iff one of those can already reach txn_id.
        adjacency: dict[int, set[int]] = {}
        for waiter, blocker in self.wfg_edges():
            adjacency.setdefault(waiter, set()).add(blocker)
        targets = [self._holders[item_id]] + list(self._queues.get(item_id, ()))
        seen: set[int] = set()
        stack = list(targets)
        while stack:
            node = stack.pop()
            if node == txn_id:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(adjacency.get(node, ()))
        return False

    # -- mutations -------------------------------------------------------

    def acquire(self, txn_id: int, item_id: str) -> AcquireStatus:
        """Grant the lock, queue the request, or refuse a cycle-closing wait."""
        with self._mutex:
            holder = self._holders.get(item_id)
            if holder is None:
                self._holders[item_id] = txn_id
                return AcquireStatus.GRANTED
            if holder == txn_id:
                return AcquireStatus.GRANTED  # re-entrant
            if txn_id in self._queues.get(item_id, ()):
                raise LockError(f"txn {txn_id} already queued on {item_id}")
            if self._would_deadlock(txn_id, item_id):
                return AcquireStatus.DEADLOCK_REFUSED
            self._queues.setdefault(item_id, deque()).append(txn_id)
            return AcquireStatus.QUEUED

    def release(self, txn_id: int, item_id: str) -> Optional[Grant]:
        """Hand the lock to the queue head, if any. Returns the grant made."""
        with self._mutex:
            if self._holders.get(item_id) != txn_id:
                raise LockError(f"txn {txn_id} does not hold {item_id}")
            queue = self._queues.get(item_id)
            if not queue:
                del self._holders[item_id]
                self._queues.pop(item_id, None)
                return None
            queue_len = len(queue)
            next_holder = queue.popleft()
            if not queue:
                self._queues.pop(item_id, None)
            self._holders[item_id] = next_holder
            return Grant(item_id, next_holder, queue_len)

    def withdraw(self, txn_id: int, item_id: str) -> bool:
        """Remove a queued (not granted) request; its WFG edges vanish."""
        with self._mutex:
            queue = self._queues.get(item_id)
            if queue and txn_id in queue:
                queue.remove(txn_id)
                if not queue:
                    self._queues.pop(item_id, None)
                return True
            return False

    def release_all(self, txn_id: int) -> tuple[int, list[Grant]]:
        """Termination path: drop every hold (canonical order) and queued
        request of the transaction. Returns (locks released, grants made)."""
        with self._mutex:
            grants: list[Grant] = []
            released = 0
            for item_id in self.held_by(txn_id):
                grant = self.release(txn_id, item_id)
                released += 1
                if grant is not None:
                    grants.append(grant)
            for item_id in sorted(self._queues):
                self.withdraw(txn_id, item_id)
            return released, grants

    def drain_queue(self, item_id: str) -> list[int]:
        """Empty an item's wait queue without granting (used when the item
        leaves class P); the current holder keeps its lock."""
        with self._mutex:
            queue = self._queues.pop(item_id, None)
            return list(queue) if queue else []

    def dump_lines(self) -> list[str]:
        """Diagnostic dump, one ``item,holder,queue...`` line per locked item."""
        with self._mutex:
            lines = []
            for item_id in sorted(set(self._holders) | set(self._queues)):
                parts = [item_id, str(self._holders.get(item_id, ""))]
                parts.extend(str(t) for t in self._queues.get(item_id, ()))
                lines.append(",".join(parts))
            return lines
