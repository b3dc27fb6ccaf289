"""Keys, signature layout, signing state, and the top-level sign/verify API.

Signing runs either on the naive sequential oracle or on the virtual-block
parallel path; both produce byte-identical signatures. Serialization is raw
concatenated fields:

    sk  = sk_seed || sk_prf || pk_seed || pk_root
    pk  = pk_seed || pk_root
    sig = randomizer || fors_sig || d * (wots_sig || auth_path)
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .address import ADDR_HASHTREE, ADDR_WOTS, Address
from .backends import BackendSelection
from .errors import FormatError, UsageError
from .hashes import HashContext
from .oracle import compute_root, fors_pk_from_sig, sign_oracle, top_tree_root
from .params import DerivedParams, derive
from .wots import wots_pk_from_sig


@dataclass(frozen=True)
class PublicKey:
    pk_seed: bytes
    pk_root: bytes

    def to_bytes(self) -> bytes:
        return self.pk_seed + self.pk_root

    @classmethod
    def from_bytes(cls, data: bytes, p: DerivedParams) -> "PublicKey":
        if len(data) != p.pk_bytes:
            raise FormatError(f"public key must be {p.pk_bytes} bytes, got {len(data)}")
        return cls(data[: p.n], data[p.n:])


@dataclass(frozen=True)
class SecretKey:
    sk_seed: bytes
    sk_prf: bytes
    pk_seed: bytes
    pk_root: bytes

    def to_bytes(self) -> bytes:
        return self.sk_seed + self.sk_prf + self.pk_seed + self.pk_root

    @classmethod
    def from_bytes(cls, data: bytes, p: DerivedParams) -> "SecretKey":
        if len(data) != p.sk_bytes:
            raise FormatError(f"secret key must be {p.sk_bytes} bytes, got {len(data)}")
        n = p.n
        return cls(data[:n], data[n:2 * n], data[2 * n:3 * n], data[3 * n:])

    def public(self) -> PublicKey:
        return PublicKey(self.pk_seed, self.pk_root)


def keygen(params: DerivedParams | str, seed: bytes | None = None) -> SecretKey:
    """Generate a keypair; seed is sk_seed || sk_prf || pk_seed (3n bytes)."""
    p = params if isinstance(params, DerivedParams) else derive(params)
    if seed is None:
        seed = os.urandom(3 * p.n)
    if len(seed) != 3 * p.n:
        raise UsageError(f"seed must be {3 * p.n} bytes, got {len(seed)}")
    sk_seed, sk_prf, pk_seed = seed[: p.n], seed[p.n:2 * p.n], seed[2 * p.n:]
    ctx = HashContext(p, pk_seed, sk_seed)
    pk_root = top_tree_root(ctx, p)
    return SecretKey(sk_seed, sk_prf, pk_seed, pk_root)


def message_to_indices(mhash: bytes, p: DerivedParams) -> list[int]:
    """Slice k consecutive log_t-bit chunks out of the digest bitstream.

    Bits are consumed least-significant-first within each byte; bit j of a
    chunk lands at bit j of the index. Every index is below t.
    """
    assert len(mhash) * 8 >= p.k * p.log_t, "digest too short for index extraction"
    indices = []
    offset = 0
    for _ in range(p.k):
        v = 0
        for j in range(p.log_t):
            v |= ((mhash[offset >> 3] >> (offset & 7)) & 1) << j
            offset += 1
        indices.append(v)
    return indices


@dataclass
class SigningState:
    """Per-message indices driving the FORS and hypertree walks."""

    mhash: bytes
    tree: int
    leaf_idx: int
    indices: list[int]

    @classmethod
    def from_message(cls, ctx: HashContext, randomizer: bytes, pk: PublicKey, msg: bytes):
        mhash, tree, leaf_idx = ctx.h_msg(randomizer, pk.pk_seed, pk.pk_root, msg)
        return cls(mhash, tree, leaf_idx, message_to_indices(mhash, ctx.params))

    def layer_schedule(self, p: DerivedParams) -> list[tuple[int, int, int]]:
        """(layer, tree, leaf_idx) for every hypertree layer, bottom up.

        Applies the per-layer update law: leaf_idx takes the low h/d bits of
        tree before tree shifts right by h/d.
        """
        mask = p.subtree_leaves - 1
        schedule = []
        tree, leaf = self.tree, self.leaf_idx
        for layer in range(p.d):
            schedule.append((layer, tree, leaf))
            leaf = tree & mask
            assert leaf < p.subtree_leaves
            tree >>= p.subtree_height
        return schedule


def signature_regions(p: DerivedParams) -> dict[str, tuple[int, int]]:
    """Byte ranges of the signature layout (for diagnostics and tests)."""
    regions = {"randomizer": (0, p.n)}
    off = p.n
    regions["fors"] = (off, off + p.fors_sig_bytes)
    off += p.fors_sig_bytes
    for layer in range(p.d):
        regions[f"wots[{layer}]"] = (off, off + p.wots_sig_bytes)
        off += p.wots_sig_bytes
        regions[f"auth[{layer}]"] = (off, off + p.subtree_height * p.n)
        off += p.subtree_height * p.n
    assert off == p.sig_bytes
    return regions


def sign(
    msg: bytes,
    sk: SecretKey,
    params: DerivedParams | str,
    *,
    opt_rand: bytes | None = None,
    oracle: bool = False,
    fusion=None,
    relax=None,
    workers: int = 1,
    selection: BackendSelection | None = None,
    pure: bool = False,
    instrument=None,
    ctx_out: list | None = None,
) -> bytes:
    """Sign a message; deterministic given (msg, sk, opt_rand).

    opt_rand defaults to pk_seed (deterministic mode). `oracle` selects the
    naive sequential path; otherwise tree work runs on the virtual-block
    executor with the given fusion layout, relax setting, and worker count.
    ctx_out, when given, receives the HashContext (to read instrumentation).
    """
    p = params if isinstance(params, DerivedParams) else derive(params)
    if opt_rand is None:
        opt_rand = sk.pk_seed
    if len(opt_rand) != p.n:
        raise UsageError(f"opt_rand must be {p.n} bytes, got {len(opt_rand)}")
    ctx = HashContext(p, sk.pk_seed, sk.sk_seed, selection=selection, pure=pure)
    if ctx_out is not None:
        ctx_out.append(ctx)
    randomizer = ctx.prf_msg(sk.sk_prf, opt_rand, msg)
    state = SigningState.from_message(ctx, randomizer, sk.public(), msg)
    if oracle:
        return sign_oracle(ctx, randomizer, state.mhash, state.tree, state.leaf_idx, state.indices)
    from .parallel import sign_parallel  # deferred: parallel pulls in vexec

    return sign_parallel(
        ctx, randomizer, state,
        fusion=fusion, relax=relax, workers=workers, instrument=instrument,
    )


def verify(msg: bytes, sig: bytes, pk: PublicKey, params: DerivedParams | str) -> bool:
    """Recompute the FORS root and walk all d layers; True iff the root matches."""
    p = params if isinstance(params, DerivedParams) else derive(params)
    if len(sig) != p.sig_bytes:
        return False
    n = p.n
    ctx = HashContext(p, pk.pk_seed)
    randomizer = sig[:n]
    mhash, tree, leaf_idx = ctx.h_msg(randomizer, pk.pk_seed, pk.pk_root, msg)
    indices = message_to_indices(mhash, p)

    wots_adrs = Address()
    wots_adrs.set_tree(tree)
    wots_adrs.set_type(ADDR_WOTS)
    wots_adrs.set_keypair(leaf_idx)

    off = n
    root = fors_pk_from_sig(ctx, sig[off:off + p.fors_sig_bytes], indices, wots_adrs)
    off += p.fors_sig_bytes

    mask = p.subtree_leaves - 1
    for layer in range(p.d):
        tree_adrs = Address()
        tree_adrs.set_layer(layer)
        tree_adrs.set_tree(tree)
        tree_adrs.set_type(ADDR_HASHTREE)
        wots_adrs = Address()
        wots_adrs.copy_subtree_from(tree_adrs)
        wots_adrs.set_type(ADDR_WOTS)
        wots_adrs.set_keypair(leaf_idx)

        leaf = wots_pk_from_sig(ctx, sig[off:off + p.wots_sig_bytes], root, wots_adrs)
        off += p.wots_sig_bytes
        root = compute_root(
            ctx, leaf, leaf_idx, 0, sig[off:off + p.subtree_height * n],
            p.subtree_height, tree_adrs,
        )
        off += p.subtree_height * n
        leaf_idx = tree & mask
        tree >>= p.subtree_height
    return root == pk.pk_root
