"""Kernel definitions and work-item execution.

A kernel body is a host-registered Python callable invoked once per
work-item with a :class:`WorkItemCtx`.  A plain function runs straight
through; a generator function may ``yield`` at any point, and every
``yield`` is a work-group barrier: no work-item of the group proceeds past
it until all have reached it.  Items of a group advance in lexicographic
local-id order between barriers, so execution is fully deterministic.

Parallelism modes (none / unroll / simd) plus the compute-unit replication
count never change computed values; they widen the modeled datapath (lanes)
and, for multiple CUs, permute the order work-groups are scheduled in.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field

from .memory import Buffer, PRIVATE, AccessScope, RegionHandle, CONSTANT, LOCAL
from .ndrange import NdRange

MODE_NONE = "none"
MODE_UNROLL = "unroll"
MODE_SIMD = "simd"


class BarrierDivergenceError(RuntimeError):
    """A barrier was reached by only a subset of a work-group's items."""


@dataclass(frozen=True)
class ParallelMode:
    """How a kernel's datapath is widened.

    ``amount`` is the unroll factor or SIMD width; ``cu_count`` replicates
    the whole compute unit.  Lanes (the compute-throughput multiplier) come
    from the mode only; CU replication multiplies global-memory contention
    instead.
    """

    kind: str = MODE_NONE
    amount: int = 1
    cu_count: int = 1

    def __post_init__(self):
        if self.kind not in (MODE_NONE, MODE_UNROLL, MODE_SIMD):
            raise ValueError(f"unknown parallelism mode {self.kind!r}")
        if self.amount < 1 or self.cu_count < 1:
            raise ValueError("unroll factor / simd width / cu_count must be >= 1")
        if self.kind == MODE_NONE and self.amount != 1:
            raise ValueError("mode 'none' has no width")

    @property
    def lanes(self) -> int:
        return 1 if self.kind == MODE_NONE else self.amount

    def __str__(self):
        base = self.kind if self.kind == MODE_NONE else f"{self.kind}({self.amount})"
        return base if self.cu_count == 1 else f"{base}x{self.cu_count}cu"


@dataclass
class KernelDef:
    """A named body plus its region bindings and parallelism mode.

    ``bindings`` maps region names to global/constant buffers shared by all
    work-items.  ``local_specs``/``private_specs`` map names to element
    counts allocated fresh per work-group / per work-item (int64-backed).
    """

    name: str
    body: object
    bindings: dict[str, Buffer] = field(default_factory=dict)
    local_specs: dict[str, int] = field(default_factory=dict)
    private_specs: dict[str, int] = field(default_factory=dict)
    mode: ParallelMode = field(default_factory=ParallelMode)

    def __post_init__(self):
        for name, buf in self.bindings.items():
            if not isinstance(buf, Buffer):
                raise TypeError(f"binding {name!r} is not a Buffer")
            if buf.kind in (LOCAL, PRIVATE):
                raise ValueError(
                    f"binding {name!r}: local/private regions are declared via specs"
                )

    @property
    def is_generator_body(self) -> bool:
        return inspect.isgeneratorfunction(self.body)


class WorkItemCtx:
    """Per-work-item view: ids, visible regions, and a MAC counter."""

    __slots__ = ("global_id", "local_id", "group_id", "regions", "_macs")

    def __init__(self, global_id, local_id, group_id, regions, macs):
        self.global_id = global_id
        self.local_id = local_id
        self.group_id = group_id
        self.regions = regions
        self._macs = macs

    def count_macs(self, n: int):
        self._macs[0] += n


def group_schedule(nd: NdRange, cu_count: int) -> list[tuple[int, ...]]:
    """Work-group execution order under ``cu_count`` compute units.

    Groups are partitioned contiguously across CUs and executed in
    round-robin rounds, emulating replicated CUs draining their shares in
    lockstep.  With one CU this is plain lexicographic order.
    """
    groups = list(nd.group_ids())
    if cu_count <= 1 or len(groups) <= 1:
        return groups
    per_cu = -(-len(groups) // cu_count)  # ceil
    shares = [groups[k * per_cu:(k + 1) * per_cu] for k in range(cu_count)]
    order = []
    for round_idx in range(per_cu):
        for share in shares:
            if round_idx < len(share):
                order.append(share[round_idx])
    return order


def execute_kernel(kdef: KernelDef, nd: NdRange, macs: list, debug: bool = True):
    """Run every work-item of the NDRange; returns nothing, mutates buffers."""
    shared_regions = {}
    for name, buf in kdef.bindings.items():
        if buf.kind == CONSTANT:
            shared_regions[name] = RegionHandle(buf, AccessScope("item"), debug)
        else:
            shared_regions[name] = buf  # global: unrestricted, counted internally

    generator_body = kdef.is_generator_body
    for group_id in group_schedule(nd, kdef.mode.cu_count):
        regions = shared_regions
        if kdef.local_specs:
            regions = dict(shared_regions)
            for name, count in kdef.local_specs.items():
                local_buf = Buffer(name, count, kind=LOCAL, owner_group=group_id)
                regions[name] = RegionHandle(
                    local_buf, AccessScope("item", group_id=group_id), debug
                )
        ctxs = []
        for local_id in nd.local_ids():
            gid = nd.global_id(group_id, local_id)
            item_regions = regions
            if kdef.private_specs:
                item_regions = dict(regions)
                for name, count in kdef.private_specs.items():
                    priv = Buffer(name, count, kind=PRIVATE, owner_item=gid)
                    item_regions[name] = RegionHandle(
                        priv, AccessScope("item", group_id=group_id, item_id=gid), debug
                    )
            ctxs.append(WorkItemCtx(gid, local_id, group_id, item_regions, macs))

        if not generator_body:
            for ctx in ctxs:
                kdef.body(ctx)
            continue

        # Barrier-phase execution: each yield is a barrier; advance all items
        # one phase at a time and require them to agree on every barrier.
        gens = [kdef.body(ctx) for ctx in ctxs]
        alive = list(range(len(gens)))
        while alive:
            at_barrier, finished = [], []
            for idx in alive:
                try:
                    next(gens[idx])
                    at_barrier.append(idx)
                except StopIteration:
                    finished.append(idx)
            if at_barrier and finished:
                raise BarrierDivergenceError(
                    f"kernel {kdef.name!r} group {group_id}: "
                    f"{len(at_barrier)} of {len(alive)} items reached the barrier"
                )
            alive = at_barrier
