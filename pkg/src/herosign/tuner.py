"""Offline tuning: fusion search, occupancy estimate, padding solver, profiling.

The fusion search enumerates block shapes for the FORS stage: how many trees
share one virtual block (a set), and how many sets fuse into the block's
scratch so that one barrier covers all of them. Candidates are ranked by
synchronization cost, then lane and scratch utilization.

Two boundary rules beyond the structural capacity checks: blocks that
saturate both lanes and scratch are excluded, and so are blocks whose scratch
demand lands exactly on the per-block limit; in practice both shapes contend
rather than fill. Lane utilization below the alpha floor is pruned as
pathological underfill. These rules reproduce the reference search results
(128f: 704 lanes, F=3, utilization 0.6875; 192f: 768 lanes, F=2, 0.75).
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, gcd

from .backends import KERNELS, BackendSelection, HashBackend
from .banksim import BANK_WIDTH, TRANSACTION_BYTES, PaddingScheme
from .errors import TuningError, UsageError
from .params import PARAMETER_SETS, DerivedParams, derive

DEFAULT_SEME = 49152  # per-block scratch capacity, bytes
DEFAULT_T_MAX = 1024
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class TuneInput:
    params: DerivedParams
    seme_per_block: int = DEFAULT_SEME
    t_max: int = DEFAULT_T_MAX
    alpha: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class FusionCandidate:
    """One feasible fusion shape with its utilization and sync scores."""

    lanes_per_set: int        # T_set
    sets_fused: int           # F
    trees_per_set: int        # N_tree
    lane_utilization: float   # U_T = T_set / t_max
    scratch_utilization: float  # U_S = F * S_set / S_max
    sync_score: float         # log_t * ceil(k / N_tree) / F

    def sort_key(self, p: DerivedParams):
        sync = Fraction(p.log_t * ceil(Fraction(p.k, self.trees_per_set)), self.sets_fused)
        return (sync, -self.lane_utilization, -self.scratch_utilization,
                self.lanes_per_set, self.sets_fused)


@dataclass(frozen=True)
class TuneResult:
    best: FusionCandidate
    candidates: list[FusionCandidate] = field(default_factory=list)


def is_feasible(c: FusionCandidate, inp: TuneInput) -> bool:
    """Re-check every feasibility predicate independently of the search loop."""
    p = inp.params
    t = p.fors_t
    t_min = t
    if c.lanes_per_set % t_min or c.lanes_per_set > inp.t_max:
        return False
    if c.trees_per_set != c.lanes_per_set // t_min:
        return False
    s_set = c.trees_per_set * t * p.n
    s_used = c.sets_fused * s_set
    if c.sets_fused < 1 or s_used >= inp.seme_per_block:
        return False
    if c.sets_fused > p.k // c.trees_per_set:
        return False
    u_t = c.lanes_per_set / inp.t_max
    u_s = s_used / inp.seme_per_block
    if u_t < inp.alpha or (u_t == 1.0 and u_s == 1.0):
        return False
    return (
        c.lane_utilization == u_t
        and c.scratch_utilization == u_s
        and c.sync_score == p.log_t * ceil(p.k / c.trees_per_set) / c.sets_fused
    )


def tree_tune(inp: TuneInput) -> TuneResult:
    """Enumerate fusion shapes and pick the arg-min of (sync, -U_T, -U_S).

    Residual ties break toward fewer lanes, then fewer fused sets. Raises
    TuningError when no tree fits the scratch budget or when the boundary
    rules eliminate every shape (the diagnostic lists what pruned them).
    """
    p = inp.params
    t = p.fors_t
    t_min = t  # minimum lanes to cover one tree, one lane per leaf
    s_tree = t * p.n
    if inp.seme_per_block < s_tree:
        raise TuningError(
            f"no tree fits: one {p.id} FORS tree needs {s_tree} scratch bytes, "
            f"budget is {inp.seme_per_block}"
        )
    candidates: list[FusionCandidate] = []
    pruned = {"alpha": 0, "saturated": 0, "exact_fit": 0}
    for lanes in range(t_min, inp.t_max + 1, t_min):
        n_tree = lanes // t_min
        s_set = n_tree * s_tree
        if s_set > inp.seme_per_block:
            continue
        f_max = min(inp.seme_per_block // s_set, p.k // n_tree)
        for f in range(1, f_max + 1):
            s_used = f * s_set
            if lanes > inp.t_max or s_used > inp.seme_per_block:
                continue
            u_t = lanes / inp.t_max
            u_s = s_used / inp.seme_per_block
            if u_t == 1.0 and u_s == 1.0:
                pruned["saturated"] += 1
                continue
            if u_s == 1.0:
                pruned["exact_fit"] += 1
                continue
            if u_t < inp.alpha:
                pruned["alpha"] += 1
                continue
            sync = p.log_t * ceil(p.k / n_tree) / f
            candidates.append(
                FusionCandidate(lanes, f, n_tree, u_t, u_s, sync)
            )
    if not candidates:
        raise TuningError(
            f"no feasible fusion shape for {p.id} "
            f"(budget {inp.seme_per_block}, t_max {inp.t_max}, alpha {inp.alpha}); "
            f"pruned: {pruned['alpha']} below alpha, "
            f"{pruned['exact_fit']} at the exact scratch limit, "
            f"{pruned['saturated']} fully saturated"
        )
    best = min(candidates, key=lambda c: c.sort_key(p))
    return TuneResult(best=best, candidates=candidates)


def occupancy(r_total: int, r_thread: int, t_block: int, w_max: int) -> float:
    """Register-limited warp occupancy estimate.

    (1/w_max) * floor(r_total / (r_thread * t_block)) * (t_block / 32),
    with the floor saturating to zero when no block's registers fit.
    """
    if min(r_total, r_thread, t_block, w_max) <= 0:
        raise UsageError("occupancy inputs must all be positive")
    return (r_total // (r_thread * t_block)) * (t_block / 32) / w_max


def padding_solve(access_bytes: int) -> PaddingScheme:
    """Minimal positive integer solution of 128*R = B_n * 4 * T_h."""
    if access_bytes <= 0 or access_bytes % BANK_WIDTH:
        raise UsageError(
            f"access width must be a positive multiple of 4, got {access_bytes}"
        )
    b_n = access_bytes // BANK_WIDTH
    r = b_n // gcd(TRANSACTION_BYTES // BANK_WIDTH, b_n)
    t_h = TRANSACTION_BYTES * r // (b_n * BANK_WIDTH)
    return PaddingScheme(
        access_bytes=access_bytes,
        banks_per_access=b_n,
        lane_interval=t_h,
        rows_per_region=r,
    )


# -- hash-backend profiling ---------------------------------------------------


def _trimmed_mean(samples: list[float]) -> float:
    if len(samples) < 3:
        return statistics.fmean(samples)
    ordered = sorted(samples)
    return statistics.fmean(ordered[1:-1])


def select_backends(
    profile_runs: dict,
    reps: int = 10,
    tie_tolerance: float = 0.02,
) -> BackendSelection:
    """Pick the faster backend per (kernel, set) cell from timing samples.

    profile_runs maps (kernel, set_id) -> {backend name -> [seconds]}. Each
    cell needs at least `reps` samples per backend. Comparison uses trimmed
    means (min and max dropped); a tie within tie_tolerance of the baseline
    keeps the baseline.
    """
    missing = []
    for kernel in KERNELS:
        for set_id in PARAMETER_SETS:
            cell = profile_runs.get((kernel, set_id))
            if cell is None:
                missing.append((kernel, set_id))
                continue
            for backend in HashBackend:
                if len(cell.get(backend.value, ())) < reps:
                    missing.append((kernel, set_id))
                    break
    if missing:
        raise TuningError(f"profile incomplete; uncovered cells: {sorted(set(missing))}")
    mapping = {}
    for kernel in KERNELS:
        for set_id in PARAMETER_SETS:
            cell = profile_runs[(kernel, set_id)]
            base = _trimmed_mean(cell[HashBackend.BASELINE.value])
            tuned = _trimmed_mean(cell[HashBackend.TUNED.value])
            if tuned < base * (1.0 - tie_tolerance):
                mapping[(kernel, set_id)] = HashBackend.TUNED
            else:
                mapping[(kernel, set_id)] = HashBackend.BASELINE
    return BackendSelection.from_dict(mapping)


def profile_kernels(
    set_ids=None,
    reps: int = 10,
    seed: bytes = b"\x42" * 32,
) -> dict:
    """Time each component kernel's workload under both backends (pure mode).

    Workloads are one representative unit each: a single FORS tree build, one
    WOTS leaf generation, one WOTS signature. Runs serially so samples do not
    contaminate each other.
    """
    from .address import ADDR_FORS_TREE, ADDR_HASHTREE, Address
    from .hashes import KERNEL_FORS, KERNEL_TREE, KERNEL_WOTS, HashContext
    from .oracle import fors_leaf_gen, treehash
    from .wots import wots_gen_leaf, wots_sign

    set_ids = list(set_ids or PARAMETER_SETS)
    runs: dict = {}
    for set_id in set_ids:
        p = derive(set_id)
        for backend in HashBackend:
            # Selection pinning every kernel to this backend for the run.
            sel = BackendSelection.from_dict(
                {(k, s): backend for k in KERNELS for s in PARAMETER_SETS}
            )
            ctx = HashContext(p, seed[: p.n], seed[: p.n], selection=sel, pure=True)

            def fors_unit():
                adrs = Address()
                adrs.set_type(ADDR_FORS_TREE)
                treehash(ctx, fors_leaf_gen(ctx, adrs), p.log_t, adrs, kernel=KERNEL_FORS)

            def tree_unit():
                adrs = Address()
                adrs.set_type(ADDR_HASHTREE)
                wots_gen_leaf(ctx, adrs, 0, KERNEL_TREE)

            def wots_unit():
                adrs = Address()
                wots_sign(ctx, seed[: p.n], adrs, KERNEL_WOTS)

            for kernel, unit in (
                (KERNEL_FORS, fors_unit),
                (KERNEL_TREE, tree_unit),
                (KERNEL_WOTS, wots_unit),
            ):
                cell = runs.setdefault((kernel, set_id), {})
                samples = cell.setdefault(backend.value, [])
                for _ in range(reps):
                    t0 = time.perf_counter()
                    unit()
                    samples.append(time.perf_counter() - t0)
    return runs
