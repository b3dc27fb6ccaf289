"""Compressed 22-byte addresses that domain-separate every hash call.

Layout (all big-endian):

    byte  0      layer
    bytes 1-8    tree (u64)
    byte  9      type tag
    bytes 10-13  keypair
    bytes 14-17  chain (WOTS) or tree height (Merkle/FORS)
    bytes 18-21  hash step (WOTS) or tree index (Merkle/FORS)

The type tag decides which of the last three fields carry meaning; unused
fields stay zero. This is the exact byte string absorbed by the tweakable
hashes, so two addresses differing in any meaningful field hash differently.
"""

from __future__ import annotations

import struct

ADDR_WOTS = 0        # WOTS+ chain hashing
ADDR_WOTS_PK = 1     # WOTS+ public-key compression
ADDR_HASHTREE = 2    # hypertree internal nodes
ADDR_FORS_TREE = 3   # FORS leaves and internal nodes
ADDR_FORS_ROOTS = 4  # FORS root compression

ADDRESS_BYTES = 22

_pack_u32 = struct.Struct(">I").pack_into
_pack_u64 = struct.Struct(">Q").pack_into
_unpack_u32 = struct.Struct(">I").unpack_from
_unpack_u64 = struct.Struct(">Q").unpack_from


class Address:
    """Mutable compressed address; cheap to copy and mutate in hot loops."""

    __slots__ = ("buf",)

    def __init__(self, buf: bytearray | None = None):
        self.buf = bytearray(ADDRESS_BYTES) if buf is None else buf

    def copy(self) -> "Address":
        return Address(bytearray(self.buf))

    def to_bytes(self) -> bytes:
        return bytes(self.buf)

    # -- setters ---------------------------------------------------------

    def set_layer(self, layer: int) -> None:
        self.buf[0] = layer

    def set_tree(self, tree: int) -> None:
        _pack_u64(self.buf, 1, tree)

    def set_type(self, type_tag: int) -> None:
        self.buf[9] = type_tag

    def set_keypair(self, keypair: int) -> None:
        _pack_u32(self.buf, 10, keypair)

    def set_chain(self, chain: int) -> None:
        _pack_u32(self.buf, 14, chain)

    def set_hash(self, step: int) -> None:
        _pack_u32(self.buf, 18, step)

    # Merkle/FORS views of the last two fields.
    set_tree_height = set_chain
    set_tree_index = set_hash

    def copy_subtree_from(self, other: "Address") -> None:
        """Take layer and tree; used when deriving leaf addresses."""
        self.buf[0:9] = other.buf[0:9]

    def copy_keypair_from(self, other: "Address") -> None:
        """Take layer, tree, and keypair (not the type tag)."""
        self.buf[0:9] = other.buf[0:9]
        self.buf[10:14] = other.buf[10:14]

    # -- readers (tests and diagnostics) ---------------------------------

    @property
    def layer(self) -> int:
        return self.buf[0]

    @property
    def tree(self) -> int:
        return _unpack_u64(self.buf, 1)[0]

    @property
    def type_tag(self) -> int:
        return self.buf[9]

    @property
    def keypair(self) -> int:
        return _unpack_u32(self.buf, 10)[0]

    @property
    def chain_or_height(self) -> int:
        return _unpack_u32(self.buf, 14)[0]

    @property
    def hash_or_index(self) -> int:
        return _unpack_u32(self.buf, 18)[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Address) and self.buf == other.buf

    def __repr__(self) -> str:
        return (
            f"Address(layer={self.layer}, tree={self.tree}, type={self.type_tag}, "
            f"keypair={self.keypair}, chain/height={self.chain_or_height}, "
            f"hash/index={self.hash_or_index})"
        )
