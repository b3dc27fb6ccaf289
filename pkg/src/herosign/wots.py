"""WOTS+ one-time signatures: base-w digits, hash chains, leaves.

Each signature is wots_len independent chains; chain i stops at the base-w
digit of the message (plus checksum digits). Chains only ever advance, so the
verifier completes them to w-1 and compresses the endpoints into the leaf.
"""

from __future__ import annotations

from .address import ADDR_WOTS, ADDR_WOTS_PK, Address
from .errors import UsageError
from .hashes import KERNEL_WOTS, HashContext
from .params import DerivedParams


def base_w(data: bytes, out_len: int, lg_w: int) -> list[int]:
    """First out_len base-w digits of the byte string, most significant first."""
    out = []
    total = 0
    bits = 0
    idx = 0
    mask = (1 << lg_w) - 1
    while len(out) < out_len:
        if bits == 0:
            total = data[idx]
            idx += 1
            bits = 8
        bits -= lg_w
        out.append((total >> bits) & mask)
    return out


def chain_lengths(msg_n: bytes, p: DerivedParams) -> list[int]:
    """Message digits followed by the checksum digits."""
    digits = base_w(msg_n, p.len1, p.lg_w)
    csum = sum(p.w - 1 - d for d in digits)
    csum <<= (8 - ((p.len2 * p.lg_w) % 8)) % 8
    csum_bytes = csum.to_bytes((p.len2 * p.lg_w + 7) // 8, "big")
    return digits + base_w(csum_bytes, p.len2, p.lg_w)


def wots_chain(
    ctx: HashContext,
    x: bytes,
    start: int,
    steps: int,
    adrs: Address,
    kernel: str = KERNEL_WOTS,
) -> bytes:
    """Apply `steps` chain hashes starting from position `start`."""
    if start + steps > ctx.params.w - 1:
        raise UsageError(
            f"chain range [{start}, {start + steps}) exceeds w-1={ctx.params.w - 1}"
        )
    set_hash = adrs.set_hash
    thash = ctx.thash
    for i in range(start, start + steps):
        set_hash(i)
        x = thash(adrs, x, kernel)
    return x


def _chain_secret(ctx: HashContext, adrs: Address, kernel: str) -> bytes:
    adrs.set_hash(0)
    return ctx.prf(adrs, kernel)


def wots_sign(
    ctx: HashContext,
    msg_n: bytes,
    adrs: Address,
    kernel: str = KERNEL_WOTS,
) -> bytes:
    """Sign an n-byte value; emits each chain advanced to its digit."""
    p = ctx.params
    lengths = chain_lengths(msg_n, p)
    sig = bytearray()
    for i in range(p.wots_len):
        adrs.set_chain(i)
        sk = _chain_secret(ctx, adrs, kernel)
        sig += wots_chain(ctx, sk, 0, lengths[i], adrs, kernel)
    return bytes(sig)


def wots_sign_chain(
    ctx: HashContext,
    chain_index: int,
    digit: int,
    adrs: Address,
    kernel: str = KERNEL_WOTS,
) -> bytes:
    """One signature chain in isolation (the per-lane unit of WOTS_Sign)."""
    adrs.set_chain(chain_index)
    sk = _chain_secret(ctx, adrs, kernel)
    return wots_chain(ctx, sk, 0, digit, adrs, kernel)


def wots_pk_from_sig(
    ctx: HashContext,
    sig: bytes,
    msg_n: bytes,
    adrs: Address,
) -> bytes:
    """Complete every chain to w-1 and compress into the WOTS+ leaf value."""
    p = ctx.params
    n = p.n
    lengths = chain_lengths(msg_n, p)
    ends = bytearray()
    for i in range(p.wots_len):
        adrs.set_chain(i)
        ends += wots_chain(ctx, sig[i * n:(i + 1) * n], lengths[i], p.w - 1 - lengths[i], adrs)
    pk_adrs = adrs.copy()
    pk_adrs.set_type(ADDR_WOTS_PK)
    pk_adrs.set_chain(0)
    pk_adrs.set_hash(0)
    return ctx.thash(pk_adrs, bytes(ends))


def wots_gen_leaf(
    ctx: HashContext,
    tree_adrs: Address,
    leaf_idx: int,
    kernel: str,
) -> bytes:
    """Full WOTS+ public key at one hypertree leaf, compressed to n bytes.

    Runs every chain end to end: wots_len * w hash calls of budget, the
    dominant cost of hypertree construction.
    """
    p = ctx.params
    wots_adrs = Address()
    wots_adrs.copy_subtree_from(tree_adrs)
    wots_adrs.set_type(ADDR_WOTS)
    wots_adrs.set_keypair(leaf_idx)
    ends = bytearray()
    for i in range(p.wots_len):
        wots_adrs.set_chain(i)
        sk = _chain_secret(ctx, wots_adrs, kernel)
        ends += wots_chain(ctx, sk, 0, p.w - 1, wots_adrs, kernel)
    pk_adrs = Address()
    pk_adrs.copy_keypair_from(wots_adrs)
    pk_adrs.set_type(ADDR_WOTS_PK)
    return ctx.thash(pk_adrs, bytes(ends), kernel)
