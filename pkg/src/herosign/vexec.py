"""Virtual-block execution: cooperative lanes over byte-addressable scratch.

A virtual block is up to 1024 lanes sharing a scratch region, stepped in
level-synchronous phases with an explicit barrier between levels (so the
synchronization count of a fused run is directly observable). Fused FORS
processing keeps F sets' scratch resident at once: the same lanes serve every
fused set between two barriers, which divides the barrier count by F.

Node placement is compact: each level's nodes sit at the front of the tree's
sub-region, and every level's loads complete before its stores, so children
are always consumed before a parent overwrites their slot. With relax
enabled, each lane builds two leaves in lane-local storage and writes only
their parent, halving the bottom-layer scratch footprint.

All outputs are byte-identical for any worker count and any scheduling of
independent blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil
from types import MappingProxyType

from .address import ADDR_FORS_ROOTS, ADDR_FORS_TREE, ADDR_HASHTREE, Address
from .banksim import AccessTrace, ConflictReport, access_steps, count_conflicts
from .errors import ConfigError
from .hashes import KERNEL_FORS, KERNEL_TREE, HashContext
from .params import DerivedParams
from .wots import wots_gen_leaf

DEFAULT_SCRATCH_BYTES = 49152
MAX_LANES = 1024


class Region:
    """Named sub-range of a block's scratch with node-granular, bounds-checked IO."""

    __slots__ = ("name", "_scratch", "offset", "size", "node_bytes")

    def __init__(self, name: str, scratch: bytearray, offset: int, size: int, node_bytes: int):
        self.name = name
        self._scratch = scratch
        self.offset = offset
        self.size = size
        self.node_bytes = node_bytes

    @property
    def nodes(self) -> int:
        return self.size // self.node_bytes

    @property
    def base_word(self) -> int:
        return self.offset // 4

    def _span(self, slot: int) -> tuple[int, int]:
        start = slot * self.node_bytes
        if slot < 0 or start + self.node_bytes > self.size:
            raise ConfigError(
                f"region {self.name}: node slot {slot} outside [0, {self.nodes})"
            )
        return self.offset + start, self.offset + start + self.node_bytes

    def write_node(self, slot: int, value: bytes) -> None:
        if len(value) != self.node_bytes:
            raise ConfigError(
                f"region {self.name}: node must be {self.node_bytes} bytes"
            )
        lo, hi = self._span(slot)
        self._scratch[lo:hi] = value

    def read_node(self, slot: int) -> bytes:
        lo, hi = self._span(slot)
        return bytes(self._scratch[lo:hi])


class VirtualBlock:
    """Lanes plus scratch plus a read-only pool, with a barrier counter."""

    def __init__(
        self,
        lane_count: int,
        scratch_bytes: int = DEFAULT_SCRATCH_BYTES,
        readonly_pool: dict | None = None,
    ):
        if not 1 <= lane_count <= MAX_LANES:
            raise ConfigError(f"lane count {lane_count} outside 1..{MAX_LANES}")
        self.lane_count = lane_count
        self.scratch_bytes = scratch_bytes
        self.scratch = bytearray(scratch_bytes)
        self.region_map: dict[str, Region] = {}
        self.readonly_pool = MappingProxyType(dict(readonly_pool or {}))
        self.sync_points = 0
        self._alloc_offset = 0

    def add_region(self, name: str, size: int, node_bytes: int) -> Region:
        if name in self.region_map:
            raise ConfigError(f"region {name!r} already allocated")
        if self._alloc_offset + size > self.scratch_bytes:
            raise ConfigError(
                f"region {name!r} ({size} bytes at {self._alloc_offset}) exceeds "
                f"scratch capacity {self.scratch_bytes}"
            )
        region = Region(name, self.scratch, self._alloc_offset, size, node_bytes)
        self.region_map[name] = region
        self._alloc_offset += size
        return region

    def barrier(self) -> None:
        self.sync_points += 1


@dataclass
class RelaxConfig:
    """Bottom-layer relaxation: one lane builds two leaves in private storage.

    lane_buffer_bytes caps the per-lane buffer (R_t); the scheme needs exactly
    two nodes' worth, which is the default.
    """

    enabled: bool = False
    lane_buffer_bytes: int | None = None

    def budget(self, n: int) -> int:
        return 2 * n if self.lane_buffer_bytes is None else self.lane_buffer_bytes


@dataclass(frozen=True)
class FusedSetLayout:
    """How FORS trees map onto fused virtual-block sets.

    trees_per_set trees share one set of lanes_per_set lanes (one lane per
    leaf); sets_fused sets occupy one block's scratch simultaneously. The
    offset map assigns each (pass, set slot) its base index into the global
    tree array; slots past the last tree are inactive.
    """

    trees_per_set: int
    lanes_per_set: int
    sets_fused: int
    tree_count: int
    tree_leaves: int
    node_bytes: int

    def __post_init__(self):
        if self.lanes_per_set != self.trees_per_set * self.tree_leaves:
            raise ConfigError(
                f"lanes_per_set {self.lanes_per_set} != trees_per_set "
                f"{self.trees_per_set} * t {self.tree_leaves}"
            )
        if min(self.trees_per_set, self.sets_fused, self.tree_count) < 1:
            raise ConfigError("layout counts must be positive")

    @property
    def sets_total(self) -> int:
        return ceil(self.tree_count / self.trees_per_set)

    @property
    def passes(self) -> int:
        return ceil(self.sets_total / self.sets_fused)

    def offset_map(self) -> list[list[int]]:
        """Per pass, the base tree index of each active fused-set slot."""
        bases = [s * self.trees_per_set for s in range(self.sets_total)]
        return [
            bases[p * self.sets_fused:(p + 1) * self.sets_fused]
            for p in range(self.passes)
        ]

    @classmethod
    def from_candidate(cls, candidate, p: DerivedParams) -> "FusedSetLayout":
        return cls(
            trees_per_set=candidate.trees_per_set,
            lanes_per_set=candidate.lanes_per_set,
            sets_fused=candidate.sets_fused,
            tree_count=p.k,
            tree_leaves=p.fors_t,
            node_bytes=p.n,
        )


@lru_cache(maxsize=None)
def _default_candidate(set_id: str):
    from .params import derive
    from .tuner import TuneInput, tree_tune

    return tree_tune(TuneInput(derive(set_id))).best


def default_layout(p: DerivedParams) -> FusedSetLayout:
    """Fusion layout from the tuning search at default constraints."""
    return FusedSetLayout.from_candidate(_default_candidate(p.id), p)


def default_relax(p: DerivedParams) -> RelaxConfig:
    """Relax is the default bottom-layer mode only for the largest set."""
    return RelaxConfig(enabled=(p.id == "256f"))


class Instrumentation:
    """Aggregates bank-conflict accounting and sync counts across phases.

    Merging is purely additive (plus max for the way metric), so per-worker
    instances can be combined in any order.
    """

    def __init__(self, padding=None):
        self.padding = padding
        self.by_label: dict[str, dict] = {}
        self.sync_points = 0

    def record_steps(self, steps) -> None:
        report = count_conflicts(AccessTrace(list(steps)), self.padding)
        for step in steps:
            label = step.label
            break
        else:
            return
        bucket = self.by_label.setdefault(
            label, {"loads": 0, "stores": 0, "max_way": 0, "steps": 0}
        )
        bucket["loads"] += report.load_conflicts
        bucket["stores"] += report.store_conflicts
        bucket["max_way"] = max(bucket["max_way"], report.max_way)
        bucket["steps"] += report.steps

    def record_sync(self, count: int) -> None:
        self.sync_points += count

    def merge(self, other: "Instrumentation") -> None:
        for label, b in other.by_label.items():
            mine = self.by_label.setdefault(
                label, {"loads": 0, "stores": 0, "max_way": 0, "steps": 0}
            )
            mine["loads"] += b["loads"]
            mine["stores"] += b["stores"]
            mine["max_way"] = max(mine["max_way"], b["max_way"])
            mine["steps"] += b["steps"]
        self.sync_points += other.sync_points

    def report(self) -> dict:
        total = ConflictReport(
            load_conflicts=sum(b["loads"] for b in self.by_label.values()),
            store_conflicts=sum(b["stores"] for b in self.by_label.values()),
            max_way=max((b["max_way"] for b in self.by_label.values()), default=0),
            steps=sum(b["steps"] for b in self.by_label.values()),
        )
        return {
            "sync_points": self.sync_points,
            "total": {
                "load_conflicts": total.load_conflicts,
                "store_conflicts": total.store_conflicts,
                "max_way": total.max_way,
            },
            "levels": dict(sorted(self.by_label.items())),
        }

    def fork(self) -> "Instrumentation":
        return Instrumentation(self.padding)


def reduce_level(
    region: Region,
    level: int,
    child_count: int,
    hash_pair,
    *,
    base_slot: int = 0,
    lane_base: int = 0,
    instrument: Instrumentation | None = None,
) -> None:
    """One level of the compact in-place reduction.

    Children occupy node slots [base_slot, base_slot + child_count); parent j
    is hash_pair(j, child_2j, child_2j+1) and lands at slot base_slot + j.
    Loads for the whole level complete before stores begin, so every child is
    consumed before a parent claims its slot.
    """
    if level < 1:
        raise ConfigError("reduce_level needs level >= 1")
    parents = child_count // 2
    nw = region.node_bytes // 4
    children = [
        (region.read_node(base_slot + 2 * j), region.read_node(base_slot + 2 * j + 1))
        for j in range(parents)
    ]
    if instrument is not None:
        word0 = region.base_word + base_slot * nw
        label = f"level{level}"
        left = [(lane_base + j, word0 + 2 * j * nw) for j in range(parents)]
        right = [(lane_base + j, word0 + (2 * j + 1) * nw) for j in range(parents)]
        instrument.record_steps(access_steps(left, nw, "load", label))
        instrument.record_steps(access_steps(right, nw, "load", label))
    for j, (left_node, right_node) in enumerate(children):
        region.write_node(base_slot + j, hash_pair(j, left_node, right_node))
    if instrument is not None:
        store = [(lane_base + j, word0 + j * nw) for j in range(parents)]
        instrument.record_steps(access_steps(store, nw, "store", label))


@dataclass
class FusedForsResult:
    secrets: list          # k secret values (n bytes each)
    auth_paths: list       # k auth bundles (log_t * n bytes each)
    roots: list            # k roots
    sync_points: int
    block: VirtualBlock = field(repr=False, default=None)

    def signature_bytes(self) -> bytes:
        parts = []
        for sk, auth in zip(self.secrets, self.auth_paths):
            parts.append(sk)
            parts.append(auth)
        return b"".join(parts)


def run_fused_fors(
    ctx: HashContext,
    layout: FusedSetLayout,
    relax: RelaxConfig,
    indices: list[int],
    wots_adrs: Address,
    *,
    scratch_bytes: int = DEFAULT_SCRATCH_BYTES,
    instrument: Instrumentation | None = None,
) -> FusedForsResult:
    """All k FORS trees through fused virtual-block passes.

    Byte-identical to the sequential per-tree oracle. The block's barrier
    count is passes * log_t without relax (one barrier after the leaf phase
    and one after each non-final level), one fewer per pass with relax.
    """
    p = ctx.params
    t = layout.tree_leaves
    n = layout.node_bytes
    log_t = t.bit_length() - 1
    k = layout.tree_count
    if len(indices) != k:
        raise ConfigError(f"expected {k} leaf indices, got {len(indices)}")

    cap = t // 2 if relax.enabled else t  # node slots per tree in scratch
    lanes_per_tree = t // 2 if relax.enabled else t
    lanes = layout.trees_per_set * lanes_per_tree
    if lanes > MAX_LANES:
        raise ConfigError(f"layout needs {lanes} lanes; blocks hold at most {MAX_LANES}")
    per_set_bytes = layout.trees_per_set * cap * n
    need = layout.sets_fused * per_set_bytes
    if need > scratch_bytes:
        raise ConfigError(
            f"layout needs {need} scratch bytes "
            f"({layout.sets_fused} x {per_set_bytes}); capacity is {scratch_bytes}"
        )
    if relax.enabled and relax.budget(n) < 2 * n:
        raise ConfigError(
            f"relax lane buffer {relax.budget(n)} bytes cannot hold two {n}-byte leaves"
        )

    block = VirtualBlock(
        lanes,
        scratch_bytes,
        readonly_pool={"pk_seed": ctx.pk_seed, "sk_seed": ctx.sk_seed or b""},
    )
    regions = [
        block.add_region(f"set{s}", per_set_bytes, n)
        for s in range(layout.sets_fused)
    ]

    fors_adrs = Address()
    fors_adrs.copy_keypair_from(wots_adrs)
    fors_adrs.set_type(ADDR_FORS_TREE)

    secrets: list = [None] * k
    auths: list = [[None] * log_t for _ in range(k)]
    roots: list = [None] * k
    nw = n // 4

    for slot_bases in layout.offset_map():
        active = []  # (slot, tree_local, g)
        for slot, base in enumerate(slot_bases):
            for tree_local in range(layout.trees_per_set):
                g = base + tree_local
                if g < k:
                    active.append((slot, tree_local, g))

        # Leaf phase: every lane produces its leaf (or leaf pair) for each
        # fused set in turn; with relax the pair collapses to its parent
        # before touching scratch.
        for slot, tree_local, g in active:
            region = regions[slot]
            sel = indices[g]
            idx_offset = g * t
            tree_base = tree_local * cap
            if relax.enabled:
                for j in range(t // 2):
                    pair = []
                    for leaf in (2 * j, 2 * j + 1):
                        fors_adrs.set_tree_height(0)
                        fors_adrs.set_tree_index(idx_offset + leaf)
                        sk = ctx.prf(fors_adrs, KERNEL_FORS)
                        leaf_val = ctx.thash(fors_adrs, sk, KERNEL_FORS)
                        pair.append((sk, leaf_val))
                        if leaf == sel:
                            secrets[g] = sk
                    lane_buf = pair[0][1] + pair[1][1]
                    assert len(lane_buf) <= relax.budget(n)
                    if sel >> 1 == j:
                        auths[g][0] = pair[1 - (sel & 1)][1]
                    fors_adrs.set_tree_height(1)
                    fors_adrs.set_tree_index(j + (idx_offset >> 1))
                    region.write_node(tree_base + j, ctx.thash(fors_adrs, lane_buf, KERNEL_FORS))
                if instrument is not None:
                    starts = [
                        (tree_local * lanes_per_tree + j,
                         region.base_word + (tree_base + j) * nw)
                        for j in range(t // 2)
                    ]
                    instrument.record_steps(access_steps(starts, nw, "store", "level1"))
            else:
                for leaf in range(t):
                    fors_adrs.set_tree_height(0)
                    fors_adrs.set_tree_index(idx_offset + leaf)
                    sk = ctx.prf(fors_adrs, KERNEL_FORS)
                    if leaf == sel:
                        secrets[g] = sk
                    region.write_node(tree_base + leaf, ctx.thash(fors_adrs, sk, KERNEL_FORS))
                if instrument is not None:
                    starts = [
                        (tree_local * lanes_per_tree + leaf,
                         region.base_word + (tree_base + leaf) * nw)
                        for leaf in range(t)
                    ]
                    instrument.record_steps(access_steps(starts, nw, "store", "level0"))
        block.barrier()

        first_level = 2 if relax.enabled else 1
        for level in range(first_level, log_t + 1):
            # Auth extraction for the level below, before its nodes are overwritten.
            for slot, tree_local, g in active:
                prev = level - 1
                if auths[g][prev] is None:
                    sibling = (indices[g] >> prev) ^ 1
                    auths[g][prev] = regions[slot].read_node(tree_local * cap + sibling)
            child_count = t >> (level - 1)
            for slot, tree_local, g in active:
                idx_offset = g * t

                def hash_pair(j, left, right, _g=g, _lvl=level, _off=idx_offset):
                    fors_adrs.set_tree_height(_lvl)
                    fors_adrs.set_tree_index(j + (_off >> _lvl))
                    return ctx.thash(fors_adrs, left + right, KERNEL_FORS)

                reduce_level(
                    regions[slot], level, child_count, hash_pair,
                    base_slot=tree_local * cap,
                    lane_base=tree_local * lanes_per_tree,
                    instrument=instrument,
                )
            if level < log_t:
                block.barrier()
        for slot, tree_local, g in active:
            roots[g] = regions[slot].read_node(tree_local * cap)

    if instrument is not None:
        instrument.record_sync(block.sync_points)
    return FusedForsResult(
        secrets=secrets,
        auth_paths=[b"".join(a) for a in auths],
        roots=roots,
        sync_points=block.sync_points,
        block=block,
    )


def fors_public_key(ctx: HashContext, roots: list, wots_adrs: Address) -> bytes:
    """Compress the k roots into the FORS public key."""
    pk_adrs = Address()
    pk_adrs.copy_keypair_from(wots_adrs)
    pk_adrs.set_type(ADDR_FORS_ROOTS)
    return ctx.thash(pk_adrs, b"".join(roots), KERNEL_FORS)


@dataclass
class TreeLayerResult:
    layer: int
    root: bytes
    auth_path: bytes
    sync_points: int


def run_tree_layer(
    ctx: HashContext,
    layer: int,
    tree: int,
    leaf_idx: int,
    *,
    instrument: Instrumentation | None = None,
) -> TreeLayerResult:
    """One hypertree subtree as a single virtual block, one lane per leaf.

    Lanes each run a full WOTS leaf generation, then the block reduces the
    leaves with per-level barriers and extracts the auth path for leaf_idx.
    """
    p = ctx.params
    leaves = p.subtree_leaves
    n = p.n
    height = p.subtree_height
    tree_adrs = Address()
    tree_adrs.set_layer(layer)
    tree_adrs.set_tree(tree)
    tree_adrs.set_type(ADDR_HASHTREE)

    block = VirtualBlock(
        leaves,
        scratch_bytes=leaves * n,
        readonly_pool={"pk_seed": ctx.pk_seed, "sk_seed": ctx.sk_seed or b""},
    )
    region = block.add_region("subtree", leaves * n, n)
    nw = n // 4

    for leaf in range(leaves):
        region.write_node(leaf, wots_gen_leaf(ctx, tree_adrs, leaf, KERNEL_TREE))
    if instrument is not None:
        starts = [(leaf, region.base_word + leaf * nw) for leaf in range(leaves)]
        instrument.record_steps(access_steps(starts, nw, "store", "level0"))
    block.barrier()

    auth = [None] * height
    for level in range(1, height + 1):
        sibling = (leaf_idx >> (level - 1)) ^ 1
        auth[level - 1] = region.read_node(sibling)

        def hash_pair(j, left, right, _lvl=level):
            tree_adrs.set_tree_height(_lvl)
            tree_adrs.set_tree_index(j)
            return ctx.thash(tree_adrs, left + right, KERNEL_TREE)

        reduce_level(
            region, level, leaves >> (level - 1), hash_pair, instrument=instrument
        )
        if level < height:
            block.barrier()
    if instrument is not None:
        instrument.record_sync(block.sync_points)
    return TreeLayerResult(
        layer=layer,
        root=region.read_node(0),
        auth_path=b"".join(auth),
        sync_points=block.sync_points,
    )


class Executor:
    """Fixed-width worker pool over independent blocks.

    Results land in submission order regardless of completion order, so any
    worker count yields identical output bytes.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ConfigError(f"worker count must be >= 1, got {workers}")
        self.workers = workers

    def map(self, fn, items: list) -> list:
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, items))
