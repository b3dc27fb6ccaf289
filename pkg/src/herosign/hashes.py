"""Tweakable hash layer: F/H/T_len, PRF, message randomization and hashing.

Construction (SHA-256-simple, with SHA-256 at every security level):

    thash(adrs, msg)  = SHA-256(pk_seed || 0-pad to 64 || adrs || msg)[:n]
    prf(adrs)         = SHA-256(sk_seed || adrs)[:n]
    prf_msg(rand, m)  = HMAC-SHA-256(sk_prf, rand || m)[:n]
    h_msg(R, pk, m)   = MGF1-SHA-256(R || pk_seed || SHA-256(R || pk || m), dgst)

The block-padded public seed is absorbed once and kept as a midstate, so each
component hash costs a single extra compression; the compression counter
accounts for blocks exactly on that basis.

Digests are produced either by the platform SHA-256 (default) or, in pure
mode, by this package's own compression backends with the backend chosen per
component kernel. Both engines emit identical bytes; pure mode exists for
backend profiling and cross-checking.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac

from .address import Address
from .backends import BackendSelection, HashBackend, Sha256
from .errors import UsageError
from .params import DerivedParams, derive

KERNEL_FORS = "FORS_Sign"
KERNEL_TREE = "TREE_Sign"
KERNEL_WOTS = "WOTS_Sign"
KERNEL_HOST = "host"  # message hashing and verification; not a profiled kernel

_ADRS_LEN = 22
_BLOCK = 64


def compression_blocks(total_len: int) -> int:
    """SHA-256 compressions for a message of total_len bytes (incl. padding)."""
    return (total_len + 72) // _BLOCK


class HashContext:
    """Seed-bound hashing context with instrumentation.

    One context serves one (pk_seed, sk_seed) pair. `compressions` counts
    compression-function invocations; fork() gives concurrent workers an
    independent counter whose total merges back commutatively.
    """

    __slots__ = (
        "params", "n", "pk_seed", "sk_seed", "selection", "pure", "compressions",
        "_thash_mid", "_prf_mid", "_pure_thash", "_pure_prf",
    )

    def __init__(
        self,
        params: DerivedParams | str,
        pk_seed: bytes,
        sk_seed: bytes | None = None,
        *,
        selection: BackendSelection | None = None,
        pure: bool = False,
    ):
        p = params if isinstance(params, DerivedParams) else derive(params)
        if len(pk_seed) != p.n:
            raise UsageError(f"pk_seed must be {p.n} bytes, got {len(pk_seed)}")
        if sk_seed is not None and len(sk_seed) != p.n:
            raise UsageError(f"sk_seed must be {p.n} bytes, got {len(sk_seed)}")
        self.params = p
        self.n = p.n
        self.pk_seed = bytes(pk_seed)
        self.sk_seed = bytes(sk_seed) if sk_seed is not None else None
        self.selection = selection or BackendSelection.default()
        self.pure = pure
        self.compressions = 0

        padded_seed = self.pk_seed + b"\x00" * (_BLOCK - p.n)
        self._thash_mid = hashlib.sha256(padded_seed)
        self._prf_mid = hashlib.sha256(self.sk_seed) if self.sk_seed else None
        self._pure_thash = {}
        self._pure_prf = {}
        if pure:
            for backend in HashBackend:
                self._pure_thash[backend] = Sha256(backend).update(padded_seed)
                if self.sk_seed:
                    self._pure_prf[backend] = Sha256(backend).update(self.sk_seed)

    def fork(self) -> "HashContext":
        """Independent counter over the same seeds and configuration."""
        child = HashContext.__new__(HashContext)
        child.params = self.params
        child.n = self.n
        child.pk_seed = self.pk_seed
        child.sk_seed = self.sk_seed
        child.selection = self.selection
        child.pure = self.pure
        child.compressions = 0
        child._thash_mid = self._thash_mid.copy()
        child._prf_mid = self._prf_mid.copy() if self._prf_mid else None
        child._pure_thash = {b: s.copy() for b, s in self._pure_thash.items()}
        child._pure_prf = {b: s.copy() for b, s in self._pure_prf.items()}
        return child

    def merge_counts(self, *children: "HashContext") -> None:
        for child in children:
            self.compressions += child.compressions

    def _backend(self, kernel: str) -> HashBackend:
        if kernel == KERNEL_HOST:
            return HashBackend.BASELINE
        return self.selection.get(kernel, self.params.id)

    def _host_digest(self, data: bytes) -> bytes:
        """Full 32-byte SHA-256 for host-side constructions."""
        self.compressions += compression_blocks(len(data))
        if self.pure:
            return Sha256(HashBackend.BASELINE).update(data).digest()
        return hashlib.sha256(data).digest()

    # -- component hashes -------------------------------------------------

    def thash(self, adrs: Address, msg: bytes, kernel: str = KERNEL_HOST) -> bytes:
        """F (one block), H (two blocks), or T_len (any multiple of n)."""
        if len(msg) % self.n:
            raise UsageError(f"thash input must be a multiple of n={self.n} bytes")
        self.compressions += compression_blocks(_BLOCK + _ADRS_LEN + len(msg)) - 1
        if self.pure:
            h = self._pure_thash[self._backend(kernel)].copy()
            h.update(bytes(adrs.buf))
            h.update(msg)
            return h.digest()[: self.n]
        h = self._thash_mid.copy()
        h.update(bytes(adrs.buf))
        h.update(msg)
        return h.digest()[: self.n]

    def prf(self, adrs: Address, kernel: str = KERNEL_HOST) -> bytes:
        """Secret-value derivation keyed by sk_seed and an address."""
        if self._prf_mid is None and not self._pure_prf:
            raise UsageError("prf requires a signing context (sk_seed not set)")
        self.compressions += compression_blocks(self.n + _ADRS_LEN)
        if self.pure:
            h = self._pure_prf[self._backend(kernel)].copy()
            h.update(bytes(adrs.buf))
            return h.digest()[: self.n]
        h = self._prf_mid.copy()
        h.update(bytes(adrs.buf))
        return h.digest()[: self.n]

    def prf_msg(self, sk_prf: bytes, opt_rand: bytes, msg: bytes) -> bytes:
        """Message randomizer R."""
        n = self.n
        if len(sk_prf) != n or len(opt_rand) != n:
            raise UsageError("sk_prf and opt_rand must both be n bytes")
        # HMAC: one key block plus the inner message, then the outer pass.
        self.compressions += compression_blocks(_BLOCK + n + len(msg))
        self.compressions += compression_blocks(_BLOCK + 32)
        if self.pure:
            block = bytes(b ^ 0x36 for b in sk_prf) + b"\x36" * (_BLOCK - n)
            inner = Sha256().update(block).update(opt_rand).update(msg).digest()
            block = bytes(b ^ 0x5C for b in sk_prf) + b"\x5C" * (_BLOCK - n)
            return Sha256().update(block).update(inner).digest()[:n]
        return _hmac.new(sk_prf, opt_rand + msg, hashlib.sha256).digest()[:n]

    def mgf1(self, seed: bytes, out_len: int) -> bytes:
        out = bytearray()
        counter = 0
        while len(out) < out_len:
            out += self._host_digest(seed + counter.to_bytes(4, "big"))
            counter += 1
        return bytes(out[:out_len])

    def h_msg(self, randomizer: bytes, pk_seed: bytes, pk_root: bytes, msg: bytes):
        """Digest the message; returns (mhash, tree, leaf_idx).

        tree is masked to h - h/d bits and leaf_idx to h/d bits, matching the
        per-layer index update in the hypertree walk.
        """
        p = self.params
        inner = self._host_digest(randomizer + pk_seed + pk_root + msg)
        digest = self.mgf1(randomizer + pk_seed + inner, p.digest_bytes)
        mhash = digest[: p.fors_msg_bytes]
        off = p.fors_msg_bytes
        tree = int.from_bytes(digest[off: off + p.tree_bytes], "big")
        tree &= (1 << p.tree_bits) - 1
        off += p.tree_bytes
        leaf = int.from_bytes(digest[off: off + p.leaf_bytes], "big")
        leaf &= (1 << p.leaf_bits) - 1
        return mhash, tree, leaf


def thash(
    adrs: Address,
    pk_seed: bytes,
    msg: bytes,
    params: DerivedParams | str,
    backend: HashBackend = HashBackend.BASELINE,
) -> bytes:
    """Standalone tweakable hash (context-free form, pure backend path)."""
    p = params if isinstance(params, DerivedParams) else derive(params)
    if len(msg) % p.n:
        raise UsageError(f"thash input must be a multiple of n={p.n} bytes")
    h = Sha256(backend)
    h.update(pk_seed + b"\x00" * (_BLOCK - p.n))
    h.update(bytes(adrs.buf))
    h.update(msg)
    return h.digest()[: p.n]


def prf(
    adrs: Address,
    sk_seed: bytes,
    params: DerivedParams | str,
    backend: HashBackend = HashBackend.BASELINE,
) -> bytes:
    """Standalone PRF (context-free form, pure backend path)."""
    p = params if isinstance(params, DerivedParams) else derive(params)
    h = Sha256(backend)
    h.update(sk_seed)
    h.update(bytes(adrs.buf))
    return h.digest()[: p.n]
