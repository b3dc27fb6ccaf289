"""Parallel signing path: FORS fusion, per-layer tree blocks, chain-level WOTS.

The FORS stage runs as fused virtual-block passes; the d hypertree subtrees
are independent blocks dispatched to the worker pool; WOTS signing starts
once the FORS public key and every subtree root are known, one lane per
chain. Output bytes are identical to the sequential oracle for any layout,
relax setting, and worker count.
"""

from __future__ import annotations

from .address import ADDR_WOTS, Address
from .errors import ConfigError
from .hashes import KERNEL_WOTS, HashContext
from .sigcore import SigningState
from .vexec import (
    DEFAULT_SCRATCH_BYTES,
    Executor,
    FusedSetLayout,
    Instrumentation,
    RelaxConfig,
    default_layout,
    default_relax,
    fors_public_key,
    run_fused_fors,
    run_tree_layer,
)
from .wots import chain_lengths, wots_sign_chain


def run_wots_block(
    ctx: HashContext,
    schedule: list[tuple[int, int, int]],
    messages: list[bytes],
) -> list[bytes]:
    """WOTS signatures for every hypertree layer, one lane per chain.

    schedule carries (layer, tree, leaf_idx) per layer; messages[i] is the
    value layer i signs (the FORS public key, then each subtree root).
    Requires every root up front, which is what makes this stage a single
    dependent node in the batch graph.
    """
    p = ctx.params
    if len(messages) != len(schedule):
        raise ConfigError("one message per hypertree layer required")
    sigs = []
    for (layer, tree, leaf_idx), msg_n in zip(schedule, messages):
        wots_adrs = Address()
        wots_adrs.set_layer(layer)
        wots_adrs.set_tree(tree)
        wots_adrs.set_type(ADDR_WOTS)
        wots_adrs.set_keypair(leaf_idx)
        digits = chain_lengths(msg_n, p)
        chains = [
            wots_sign_chain(ctx, lane, digits[lane], wots_adrs, KERNEL_WOTS)
            for lane in range(p.wots_len)
        ]
        sigs.append(b"".join(chains))
    return sigs


def sign_parallel(
    ctx: HashContext,
    randomizer: bytes,
    state: SigningState,
    *,
    fusion: FusedSetLayout | None = None,
    relax: RelaxConfig | None = None,
    workers: int = 1,
    scratch_bytes: int = DEFAULT_SCRATCH_BYTES,
    instrument: Instrumentation | None = None,
) -> bytes:
    """Assemble a signature through the virtual-block executor."""
    p = ctx.params
    layout = fusion if fusion is not None else default_layout(p)
    relax_cfg = relax if relax is not None else default_relax(p)

    wots_adrs = Address()
    wots_adrs.set_tree(state.tree)
    wots_adrs.set_type(ADDR_WOTS)
    wots_adrs.set_keypair(state.leaf_idx)

    fors = run_fused_fors(
        ctx, layout, relax_cfg, state.indices, wots_adrs,
        scratch_bytes=scratch_bytes, instrument=instrument,
    )
    fors_pk = fors_public_key(ctx, fors.roots, wots_adrs)

    schedule = state.layer_schedule(p)
    executor = Executor(workers)

    def layer_task(args):
        layer, tree, leaf_idx = args
        child_ctx = ctx.fork()
        child_inst = instrument.fork() if instrument is not None else None
        result = run_tree_layer(child_ctx, layer, tree, leaf_idx, instrument=child_inst)
        return result, child_ctx, child_inst

    outcomes = executor.map(layer_task, schedule)
    layer_results = []
    for result, child_ctx, child_inst in outcomes:
        layer_results.append(result)
        ctx.merge_counts(child_ctx)
        if instrument is not None and child_inst is not None:
            instrument.merge(child_inst)

    roots = [r.root for r in layer_results]
    wots_sigs = run_wots_block(ctx, schedule, [fors_pk] + roots[:-1])

    parts = [randomizer, fors.signature_bytes()]
    for wsig, layer in zip(wots_sigs, layer_results):
        parts.append(wsig)
        parts.append(layer.auth_path)
    return b"".join(parts)
