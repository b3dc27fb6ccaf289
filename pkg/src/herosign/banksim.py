"""Shared-memory bank model: 32 banks x 4 bytes, with padding remaps.

Words are 4-byte units. A padding scheme inserts one spare word after every
128*R data bytes (32*R words), shifting every later word by one bank per
region. Conflicts are counted per warp-step: a step is one word-wide access
issued by up to 32 lanes together; distinct words landing in the same bank
serialize, identical words broadcast for free.

Traces describe the exact lane-to-word access sequences the virtual-block
reduction performs, so the counts here are the model's verdict on the
executor's real memory pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, UsageError

BANKS = 32
BANK_WIDTH = 4  # bytes
TRANSACTION_BYTES = 128


@dataclass(frozen=True)
class BankModel:
    """Bank geometry; fixed by the hardware model."""

    banks: int = BANKS
    bank_width: int = BANK_WIDTH
    rows_per_region: int = 1


@dataclass(frozen=True)
class PaddingScheme:
    """Solution of 128*R = B_n * 4 * T_h plus the induced word remapping.

    access_bytes: per-lane access width; banks_per_access B_n = width/4;
    lane_interval T_h: lanes between padding banks; rows_per_region R:
    contiguous 128-byte rows forming one transaction region. lane_interval
    may be math.inf for the no-padding identity scheme.
    """

    access_bytes: int
    banks_per_access: int
    lane_interval: float
    rows_per_region: int

    def __post_init__(self):
        if math.isinf(self.lane_interval):
            return
        lhs = TRANSACTION_BYTES * self.rows_per_region
        rhs = self.banks_per_access * BANK_WIDTH * self.lane_interval
        if lhs != rhs:
            raise ConfigError(
                f"padding scheme inconsistent: 128*{self.rows_per_region} != "
                f"{self.banks_per_access}*4*{self.lane_interval}"
            )

    @property
    def words_per_region(self) -> int:
        return BANKS * self.rows_per_region

    @classmethod
    def for_width(cls, access_bytes: int, rows_per_region: int) -> "PaddingScheme":
        """Scheme for a given access width and region size.

        The lane interval follows from the transaction equation and may be
        fractional when the region size does not fit the width (that mismatch
        is what the extended region formula exists to avoid).
        """
        if access_bytes % BANK_WIDTH:
            raise UsageError(f"access width must be a multiple of 4, got {access_bytes}")
        b_n = access_bytes // BANK_WIDTH
        t_h = TRANSACTION_BYTES * rows_per_region / (b_n * BANK_WIDTH)
        if t_h == int(t_h):
            t_h = int(t_h)
        return cls(access_bytes, b_n, t_h, rows_per_region)


NO_PADDING = PaddingScheme(
    access_bytes=0, banks_per_access=0, lane_interval=math.inf, rows_per_region=1
)


def padded_index(word: int, pad: "PaddingScheme | None") -> int:
    """Remapped word index: one spare word after every 32*R data words."""
    if pad is None or math.isinf(pad.lane_interval):
        return word
    return word + word // (BANKS * pad.rows_per_region)


def bank_of(word: int, pad: "PaddingScheme | None" = None) -> int:
    return padded_index(word, pad) % BANKS


@dataclass
class WarpStep:
    """One word-wide access step by the lanes of a single warp."""

    op: str  # "load" | "store"
    accesses: list  # (lane 0..31, word_index)
    label: str = ""


@dataclass
class AccessTrace:
    steps: list = field(default_factory=list)

    def extend(self, steps) -> None:
        self.steps.extend(steps)

    def labels(self) -> list[str]:
        seen = []
        for s in self.steps:
            if s.label not in seen:
                seen.append(s.label)
        return seen


def access_steps(
    starts: list[tuple[int, int]],
    words_per_lane: int,
    op: str,
    label: str = "",
) -> list[WarpStep]:
    """Expand (lane, first_word) pairs into per-word warp-steps.

    Each lane touches words_per_lane consecutive words; word i of every lane
    in a warp is issued together, which is how a multi-word access drains
    through the banks.
    """
    steps = []
    warps: dict[int, list[tuple[int, int]]] = {}
    for lane, start in starts:
        warps.setdefault(lane // BANKS, []).append((lane % BANKS, start))
    for warp_id in sorted(warps):
        lanes = warps[warp_id]
        for i in range(words_per_lane):
            steps.append(
                WarpStep(op=op, accesses=[(l, s + i) for l, s in lanes], label=label)
            )
    return steps


@dataclass(frozen=True)
class ConflictReport:
    load_conflicts: int
    store_conflicts: int
    max_way: int
    steps: int

    @property
    def total_conflicts(self) -> int:
        return self.load_conflicts + self.store_conflicts


def count_conflicts(trace: AccessTrace, pad: "PaddingScheme | None") -> ConflictReport:
    """Tally serialized accesses per warp-step under the padding remap.

    Per step, each bank's cost is (distinct word addresses - 1); lanes reading
    the same word broadcast and cost nothing. Order within a step is
    irrelevant. Loads and stores are tallied separately.
    """
    totals = {"load": 0, "store": 0}
    max_way = 0
    for step in trace.steps:
        banks: dict[int, set[int]] = {}
        for _lane, word in step.accesses:
            p = padded_index(word, pad)
            banks.setdefault(p % BANKS, set()).add(p)
        if not banks:
            continue
        way = max(len(words) for words in banks.values())
        max_way = max(max_way, way)
        totals[step.op] += sum(len(words) - 1 for words in banks.values())
    return ConflictReport(
        load_conflicts=totals["load"],
        store_conflicts=totals["store"],
        max_way=max_way,
        steps=len(trace.steps),
    )


def conflicts_by_label(trace: AccessTrace, pad) -> dict[str, ConflictReport]:
    """Per-label (per-level) conflict breakdown."""
    out = {}
    for label in trace.labels():
        sub = AccessTrace([s for s in trace.steps if s.label == label])
        out[label] = count_conflicts(sub, pad)
    return out


def warp_linear_trace(access_bytes: int, lanes: int = 32, op: str = "load") -> AccessTrace:
    """Canonical flat pattern: each lane touches its own access_bytes-wide node."""
    if access_bytes % BANK_WIDTH:
        raise UsageError(f"access width must be a multiple of 4, got {access_bytes}")
    words = access_bytes // BANK_WIDTH
    starts = [(lane, lane * words) for lane in range(lanes)]
    return AccessTrace(access_steps(starts, words, op, label="linear"))


def reduction_trace(
    height: int,
    n: int,
    relax: bool = False,
    base_word: int = 0,
) -> AccessTrace:
    """Lane-to-word access sequence of one tree's bottom-up reduction.

    Mirrors the executor exactly: nodes of each level sit compactly at the
    front of the region; lane j loads children 2j and 2j+1 and stores parent
    j. Without relax, level 0 is the leaf store by t lanes; with relax, lanes
    build leaf pairs privately and the first scratch traffic is the level-1
    store by t/2 lanes (half the bottom-layer footprint).
    """
    if height < 1:
        raise UsageError("reduction needs height >= 1")
    if n % BANK_WIDTH:
        raise UsageError(f"node size must be a multiple of 4, got {n}")
    nw = n // BANK_WIDTH
    t = 1 << height
    trace = AccessTrace()
    if relax:
        starts = [(j, base_word + j * nw) for j in range(t // 2)]
        trace.extend(access_steps(starts, nw, "store", label="level1"))
        first_level = 2
    else:
        starts = [(lane, base_word + lane * nw) for lane in range(t)]
        trace.extend(access_steps(starts, nw, "store", label="level0"))
        first_level = 1
    for level in range(first_level, height + 1):
        parents = t >> level
        label = f"level{level}"
        left = [(j, base_word + (2 * j) * nw) for j in range(parents)]
        right = [(j, base_word + (2 * j + 1) * nw) for j in range(parents)]
        store = [(j, base_word + j * nw) for j in range(parents)]
        trace.extend(access_steps(left, nw, "load", label=label))
        trace.extend(access_steps(right, nw, "load", label=label))
        trace.extend(access_steps(store, nw, "store", label=label))
    return trace
