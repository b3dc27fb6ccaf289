"""Parameter sets for the SHA-256 fast variants and every derived constant.

Only the three "f" sets are supported; the slow "s" variants are rejected.
All sizes are byte counts unless a field name says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ParameterSet:
    """One row of the scheme parameter table."""

    id: str
    n: int      # hash output / seed length
    h: int      # total hypertree height (levels)
    d: int      # number of hypertree layers
    log_t: int  # height of each FORS tree (levels)
    k: int      # number of FORS trees
    w: int      # Winternitz parameter

    def __post_init__(self):
        if self.h % self.d:
            raise ConfigError(f"{self.id}: h={self.h} not divisible by d={self.d}")


PARAMETER_SETS: dict[str, ParameterSet] = {
    "128f": ParameterSet("128f", n=16, h=66, d=22, log_t=6, k=33, w=16),
    "192f": ParameterSet("192f", n=24, h=66, d=22, log_t=8, k=33, w=16),
    "256f": ParameterSet("256f", n=32, h=68, d=17, log_t=9, k=35, w=16),
}


@dataclass(frozen=True)
class DerivedParams:
    """All constants the signing, tuning, and simulation layers consume.

    Carries the base parameters alongside the derived ones so a single object
    can travel through the whole stack.
    """

    id: str
    n: int
    h: int
    d: int
    log_t: int
    k: int
    w: int
    lg_w: int                 # log2(w)
    len1: int                 # WOTS chains covering the message digest
    len2: int                 # WOTS chains covering the checksum
    wots_len: int             # len1 + len2
    subtree_height: int       # h / d
    subtree_leaves: int       # 2^(h/d)
    fors_t: int               # 2^log_t leaves per FORS tree
    fors_total_leaves: int    # k * t
    fors_scratch_bytes: int   # k * t * n
    fors_msg_bytes: int       # digest bytes feeding the FORS indices
    tree_bits: int            # bits selecting the bottom-layer tree
    tree_bytes: int
    leaf_bits: int            # bits selecting the leaf within a subtree
    leaf_bytes: int
    digest_bytes: int         # total message-hash output
    wots_sig_bytes: int       # wots_len * n
    fors_sig_bytes: int       # k * (1 + log_t) * n
    ht_sig_bytes: int         # d * (wots_len + h/d) * n
    sig_bytes: int            # full signature
    pk_bytes: int             # pk_seed || pk_root
    sk_bytes: int             # sk_seed || sk_prf || pk_seed || pk_root
    chain_hashes_per_leaf: int  # hash budget for one WOTS leaf: wots_len * w


def _len2(len1: int, w: int) -> int:
    """Checksum chain count: floor(log_w(len1*(w-1))) + 1, computed exactly."""
    cap = len1 * (w - 1)
    e = 0
    while w ** (e + 1) <= cap:
        e += 1
    return e + 1


def resolve(params: "ParameterSet | str") -> ParameterSet:
    """Accept a ParameterSet or one of the ids "128f", "192f", "256f"."""
    if isinstance(params, ParameterSet):
        return params
    try:
        return PARAMETER_SETS[params]
    except KeyError:
        known = ", ".join(sorted(PARAMETER_SETS))
        raise ConfigError(f"unknown parameter set {params!r} (expected one of {known})") from None


def derive(params: "ParameterSet | str") -> DerivedParams:
    """Populate every derived constant for one of the three parameter sets.

    Pure function; repeated calls yield identical results.
    """
    p = resolve(params)
    lg_w = p.w.bit_length() - 1
    if 1 << lg_w != p.w:
        raise ConfigError(f"{p.id}: w={p.w} must be a power of two")
    len1 = (8 * p.n + lg_w - 1) // lg_w
    len2 = _len2(len1, p.w)
    wots_len = len1 + len2
    ht = p.h // p.d
    t = 1 << p.log_t
    fors_msg_bytes = (p.k * p.log_t + 7) // 8
    tree_bits = ht * (p.d - 1)
    leaf_bits = ht
    tree_bytes = (tree_bits + 7) // 8
    leaf_bytes = (leaf_bits + 7) // 8
    wots_sig_bytes = wots_len * p.n
    fors_sig_bytes = p.k * (1 + p.log_t) * p.n
    ht_sig_bytes = p.d * (wots_len + ht) * p.n
    return DerivedParams(
        id=p.id,
        n=p.n,
        h=p.h,
        d=p.d,
        log_t=p.log_t,
        k=p.k,
        w=p.w,
        lg_w=lg_w,
        len1=len1,
        len2=len2,
        wots_len=wots_len,
        subtree_height=ht,
        subtree_leaves=1 << ht,
        fors_t=t,
        fors_total_leaves=p.k * t,
        fors_scratch_bytes=p.k * t * p.n,
        fors_msg_bytes=fors_msg_bytes,
        tree_bits=tree_bits,
        tree_bytes=tree_bytes,
        leaf_bits=leaf_bits,
        leaf_bytes=leaf_bytes,
        digest_bytes=fors_msg_bytes + tree_bytes + leaf_bytes,
        wots_sig_bytes=wots_sig_bytes,
        fors_sig_bytes=fors_sig_bytes,
        ht_sig_bytes=ht_sig_bytes,
        sig_bytes=p.n + fors_sig_bytes + ht_sig_bytes,
        pk_bytes=2 * p.n,
        sk_bytes=4 * p.n,
        chain_hashes_per_leaf=wots_len * p.w,
    )
