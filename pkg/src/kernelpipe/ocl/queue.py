"""In-order command queue with completion events and access statistics.

Three command kinds exist: kernel launches, host<->global memory transfers,
and synchronization markers.  Every command carries a completion event and
an optional wait-list; a command never starts before every event in its
wait-list has fired.  The queue is in-order, so a wait on an event attached
to a later command (or to no command) can never be satisfied and is reported
as a deadlock instead of hanging.

``run`` returns one :class:`CommandRecord` per command: the start order plus
global-memory traffic, counted two ways -- raw load/store bytes, and
first-touch unique bytes (the cached-global convention the performance model
consumes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelDef, execute_kernel
from .memory import Buffer, GLOBAL, CONSTANT
from .ndrange import NdRange


class QueueError(RuntimeError):
    pass


class QueueDeadlockError(QueueError):
    """Event dependencies cannot be satisfied by in-order execution."""


class Event:
    _next_id = 0

    def __init__(self, queue: "CommandQueue"):
        self.queue = queue
        self.id = Event._next_id
        Event._next_id += 1
        self.command_index: int | None = None  # position of the attached command
        self.fired = False

    def __repr__(self):
        return f"Event(id={self.id}, command={self.command_index}, fired={self.fired})"


@dataclass
class CommandRecord:
    index: int
    kind: str
    name: str
    wait_positions: tuple[int, ...]
    bytes_read: int = 0
    bytes_written: int = 0
    unique_bytes_read: int = 0
    unique_bytes_written: int = 0
    macs: int = 0
    data: np.ndarray | None = None  # device->host reads only


@dataclass
class _Command:
    kind: str  # "kernel" | "write" | "read" | "marker"
    name: str
    waits: tuple[Event, ...]
    event: Event
    kernel: KernelDef | None = None
    ndrange: NdRange | None = None
    buffer: Buffer | None = None
    host_data: np.ndarray | None = None
    touched: tuple[Buffer, ...] = field(default=())


class CommandQueue:
    """In-order queue over one emulated device.

    ``lane_budget`` caps lanes x cu_count per kernel; ``debug`` enables
    memory-region visibility enforcement during execution.
    """

    def __init__(self, lane_budget: int = 64, debug: bool = True):
        self.lane_budget = lane_budget
        self.debug = debug
        self._commands: list[_Command] = []
        self._ran = False

    # -- events ----------------------------------------------------------

    def reserve_event(self) -> Event:
        """Create an event to attach to a future command (enables wait-lists
        that reference commands not yet enqueued)."""
        return Event(self)

    def _resolve_event(self, event: Event | None) -> Event:
        if event is None:
            return Event(self)
        if event.queue is not self:
            raise QueueError("completion event belongs to a different queue")
        if event.command_index is not None:
            raise QueueError("event is already attached to a command")
        return event

    def _check_waits(self, waits) -> tuple[Event, ...]:
        waits = tuple(waits)
        for ev in waits:
            if not isinstance(ev, Event) or ev.queue is not self:
                raise QueueError(f"wait-list event {ev!r} belongs to a different queue context")
        return waits

    # -- enqueue ---------------------------------------------------------

    def enqueue_kernel(self, kernel: KernelDef, ndrange: NdRange,
                       waits=(), event: Event | None = None) -> Event:
        waits = self._check_waits(waits)
        lanes = kernel.mode.lanes * kernel.mode.cu_count
        if lanes > self.lane_budget:
            raise QueueError(
                f"kernel {kernel.name!r}: lanes x CUs = {lanes} exceeds budget {self.lane_budget}"
            )
        for buf in kernel.bindings.values():
            if buf.kind == CONSTANT:
                buf.freeze()
        event = self._resolve_event(event)
        event.command_index = len(self._commands)
        touched = tuple(b for b in kernel.bindings.values() if b.kind == GLOBAL)
        self._commands.append(_Command("kernel", kernel.name, waits, event,
                                       kernel=kernel, ndrange=ndrange, touched=touched))
        return event

    def enqueue_write(self, buffer: Buffer, host_data,
                      waits=(), event: Event | None = None) -> Event:
        """Host -> device copy; data is snapshotted at enqueue time."""
        waits = self._check_waits(waits)
        event = self._resolve_event(event)
        event.command_index = len(self._commands)
        touched = (buffer,) if buffer.kind == GLOBAL else ()
        self._commands.append(_Command("write", f"write:{buffer.name}", waits, event,
                                       buffer=buffer,
                                       host_data=np.array(host_data, copy=True),
                                       touched=touched))
        return event

    def enqueue_read(self, buffer: Buffer, waits=(), event: Event | None = None) -> Event:
        """Device -> host copy; the copy lands in the command's record."""
        waits = self._check_waits(waits)
        event = self._resolve_event(event)
        event.command_index = len(self._commands)
        touched = (buffer,) if buffer.kind == GLOBAL else ()
        self._commands.append(_Command("read", f"read:{buffer.name}", waits, event,
                                       buffer=buffer, touched=touched))
        return event

    def enqueue_marker(self, waits=(), event: Event | None = None) -> Event:
        """Synchronization point; in an in-order queue it fires once every
        earlier command has completed."""
        waits = self._check_waits(waits)
        event = self._resolve_event(event)
        event.command_index = len(self._commands)
        self._commands.append(_Command("marker", "marker", waits, event))
        return event

    # -- execution ---------------------------------------------------------

    def run(self) -> list[CommandRecord]:
        """Execute all commands in order, honoring wait-lists.

        Raises :class:`QueueDeadlockError` when a wait-list references an
        event no earlier command will fire (a dependency cycle, or a reserved
        event that was never attached).
        """
        if self._ran:
            raise QueueError("queue has already run")
        if not self._commands:
            raise QueueError("queue is empty")
        self._ran = True

        records: list[CommandRecord] = []
        for index, cmd in enumerate(self._commands):
            for ev in cmd.waits:
                if not ev.fired:
                    attached = (
                        f"command #{ev.command_index}" if ev.command_index is not None
                        else "no command"
                    )
                    raise QueueDeadlockError(
                        f"command #{index} ({cmd.name}) waits on event {ev.id} "
                        f"attached to {attached}; an in-order queue cannot satisfy it"
                    )
            record = CommandRecord(
                index=index, kind=cmd.kind, name=cmd.name,
                wait_positions=tuple(ev.command_index for ev in cmd.waits),
            )
            for buf in cmd.touched:
                buf.begin_epoch()

            if cmd.kind == "kernel":
                macs = [0]
                execute_kernel(cmd.kernel, cmd.ndrange, macs, debug=self.debug)
                record.macs = macs[0]
            elif cmd.kind == "write":
                cmd.buffer.write(Ellipsis, cmd.host_data)
            elif cmd.kind == "read":
                record.data = np.array(cmd.buffer.read(Ellipsis), copy=True)
            # markers execute nothing

            for buf in cmd.touched:
                r, w, ur, uw = buf.epoch_stats()
                record.bytes_read += r
                record.bytes_written += w
                record.unique_bytes_read += ur
                record.unique_bytes_written += uw
            cmd.event.fired = True
            records.append(record)
        return records
