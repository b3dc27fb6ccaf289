"""Naive sequential signer: the ground truth the parallel path is checked against.

Everything here is single-threaded, allocation-light, and structured exactly
like the textbook algorithms (stack-based treehash, layer-by-layer hypertree
walk). It ships in the artifact rather than living test-side, because every
equivalence property is defined relative to it.
"""

from __future__ import annotations

from typing import Callable

from .address import (
    ADDR_FORS_ROOTS,
    ADDR_FORS_TREE,
    ADDR_HASHTREE,
    ADDR_WOTS,
    Address,
)
from .hashes import KERNEL_FORS, KERNEL_TREE, KERNEL_WOTS, HashContext
from .params import DerivedParams
from .wots import wots_gen_leaf, wots_sign

LeafGen = Callable[[HashContext, int], bytes]


def treehash(
    ctx: HashContext,
    leaf_gen: LeafGen,
    height: int,
    adrs: Address,
    leaf_idx: int = 0,
    idx_offset: int = 0,
    kernel: str = KERNEL_TREE,
) -> tuple[bytes, bytes]:
    """Merkle root plus authentication path for leaf_idx, stack algorithm.

    leaf_gen(ctx, global_leaf_index) produces leaves; idx_offset positions
    this tree inside a forest sharing one index space (FORS trees).
    Returns (root, auth_path) with height sibling nodes, bottom first.
    """
    n = ctx.params.n
    stack: list[bytes] = []
    heights: list[int] = []
    auth = [b""] * height
    for idx in range(1 << height):
        stack.append(leaf_gen(ctx, idx + idx_offset))
        heights.append(0)
        if (leaf_idx ^ 1) == idx:
            auth[0] = stack[-1]
        while len(stack) >= 2 and heights[-1] == heights[-2]:
            tree_idx = idx >> (heights[-1] + 1)
            adrs.set_tree_height(heights[-1] + 1)
            adrs.set_tree_index(tree_idx + (idx_offset >> (heights[-1] + 1)))
            node = ctx.thash(adrs, stack[-2] + stack[-1], kernel)
            stack.pop()
            heights.pop()
            stack[-1] = node
            heights[-1] += 1
            if heights[-1] < height and ((leaf_idx >> heights[-1]) ^ 1) == tree_idx:
                auth[heights[-1]] = node
    assert len(stack) == 1 and len(stack[0]) == n
    return stack[0], b"".join(auth)


def compute_root(
    ctx: HashContext,
    leaf: bytes,
    leaf_idx: int,
    idx_offset: int,
    auth_path: bytes,
    height: int,
    adrs: Address,
) -> bytes:
    """Walk an authentication path from a leaf back up to the root."""
    n = ctx.params.n
    if leaf_idx & 1:
        buf = auth_path[:n] + leaf
    else:
        buf = leaf + auth_path[:n]
    off = n
    for i in range(height - 1):
        leaf_idx >>= 1
        idx_offset >>= 1
        adrs.set_tree_height(i + 1)
        adrs.set_tree_index(leaf_idx + idx_offset)
        node = ctx.thash(adrs, buf)
        if leaf_idx & 1:
            buf = auth_path[off:off + n] + node
        else:
            buf = node + auth_path[off:off + n]
        off += n
    adrs.set_tree_height(height)
    adrs.set_tree_index((leaf_idx >> 1) + (idx_offset >> 1))
    return ctx.thash(adrs, buf)


# -- FORS ------------------------------------------------------------------


def fors_leaf_gen(ctx: HashContext, fors_adrs: Address, kernel: str = KERNEL_FORS) -> LeafGen:
    """Leaf generator for FORS trees: hash of the PRF-derived secret."""

    def gen(c: HashContext, global_idx: int) -> bytes:
        fors_adrs.set_tree_height(0)
        fors_adrs.set_tree_index(global_idx)
        sk = c.prf(fors_adrs, kernel)
        return c.thash(fors_adrs, sk, kernel)

    return gen


def fors_sign(
    ctx: HashContext,
    mhash: bytes,
    indices: list[int],
    wots_adrs: Address,
) -> tuple[bytes, bytes]:
    """Sign the digest slice: per tree a secret value plus its auth path.

    Returns (fors_sig, fors_pk); fors_pk is the compression of the k roots.
    """
    p = ctx.params
    fors_adrs = Address()
    fors_adrs.copy_keypair_from(wots_adrs)
    fors_adrs.set_type(ADDR_FORS_TREE)
    pk_adrs = Address()
    pk_adrs.copy_keypair_from(wots_adrs)
    pk_adrs.set_type(ADDR_FORS_ROOTS)

    sig = bytearray()
    roots = bytearray()
    gen = fors_leaf_gen(ctx, fors_adrs)
    for i in range(p.k):
        idx_offset = i * p.fors_t
        fors_adrs.set_tree_height(0)
        fors_adrs.set_tree_index(indices[i] + idx_offset)
        sig += ctx.prf(fors_adrs, KERNEL_FORS)
        root, auth = treehash(
            ctx, gen, p.log_t, fors_adrs,
            leaf_idx=indices[i], idx_offset=idx_offset, kernel=KERNEL_FORS,
        )
        sig += auth
        roots += root
    pk = ctx.thash(pk_adrs, bytes(roots), KERNEL_FORS)
    return bytes(sig), pk


def fors_pk_from_sig(
    ctx: HashContext,
    sig: bytes,
    indices: list[int],
    wots_adrs: Address,
) -> bytes:
    """Recompute the FORS public key from a signature (verification side)."""
    p = ctx.params
    n = p.n
    fors_adrs = Address()
    fors_adrs.copy_keypair_from(wots_adrs)
    fors_adrs.set_type(ADDR_FORS_TREE)
    pk_adrs = Address()
    pk_adrs.copy_keypair_from(wots_adrs)
    pk_adrs.set_type(ADDR_FORS_ROOTS)

    roots = bytearray()
    off = 0
    for i in range(p.k):
        idx_offset = i * p.fors_t
        fors_adrs.set_tree_height(0)
        fors_adrs.set_tree_index(indices[i] + idx_offset)
        leaf = ctx.thash(fors_adrs, sig[off:off + n])
        off += n
        roots += compute_root(
            ctx, leaf, indices[i], idx_offset, sig[off:off + n * p.log_t],
            p.log_t, fors_adrs,
        )
        off += n * p.log_t
    return ctx.thash(pk_adrs, bytes(roots))


# -- hypertree ---------------------------------------------------------------


def merkle_sign(
    ctx: HashContext,
    root_to_sign: bytes,
    layer: int,
    tree: int,
    leaf_idx: int,
) -> tuple[bytes, bytes, bytes]:
    """One hypertree layer: WOTS-sign the value below, then build this tree.

    Returns (wots_sig, auth_path, root) where root feeds the layer above.
    """
    p = ctx.params
    tree_adrs = Address()
    tree_adrs.set_layer(layer)
    tree_adrs.set_tree(tree)
    tree_adrs.set_type(ADDR_HASHTREE)

    wots_adrs = Address()
    wots_adrs.copy_subtree_from(tree_adrs)
    wots_adrs.set_type(ADDR_WOTS)
    wots_adrs.set_keypair(leaf_idx)
    sig = wots_sign(ctx, root_to_sign, wots_adrs, KERNEL_WOTS)

    def gen(c: HashContext, idx: int) -> bytes:
        return wots_gen_leaf(c, tree_adrs, idx, KERNEL_TREE)

    root, auth = treehash(
        ctx, gen, p.subtree_height, tree_adrs, leaf_idx=leaf_idx, kernel=KERNEL_TREE
    )
    return sig, auth, root


def top_tree_root(ctx: HashContext, p: DerivedParams) -> bytes:
    """Root of the topmost subtree; this is the public-key root."""
    tree_adrs = Address()
    tree_adrs.set_layer(p.d - 1)
    tree_adrs.set_type(ADDR_HASHTREE)

    def gen(c: HashContext, idx: int) -> bytes:
        return wots_gen_leaf(c, tree_adrs, idx, KERNEL_TREE)

    root, _ = treehash(ctx, gen, p.subtree_height, tree_adrs, leaf_idx=0, kernel=KERNEL_TREE)
    return root


def sign_oracle(
    ctx: HashContext,
    randomizer: bytes,
    mhash: bytes,
    tree: int,
    leaf_idx: int,
    indices: list[int],
) -> bytes:
    """Assemble a full signature sequentially: FORS, then d hypertree layers."""
    p = ctx.params
    wots_adrs = Address()
    wots_adrs.set_tree(tree)
    wots_adrs.set_type(ADDR_WOTS)
    wots_adrs.set_keypair(leaf_idx)

    parts = [randomizer]
    fors_sig, root = fors_sign(ctx, mhash, indices, wots_adrs)
    parts.append(fors_sig)

    mask = p.subtree_leaves - 1
    for layer in range(p.d):
        wsig, auth, root = merkle_sign(ctx, root, layer, tree, leaf_idx)
        parts.append(wsig)
        parts.append(auth)
        # Index update law: the next layer's leaf is the low bits of tree.
        leaf_idx = tree & mask
        tree >>= p.subtree_height
        assert leaf_idx < p.subtree_leaves
    return b"".join(parts)
