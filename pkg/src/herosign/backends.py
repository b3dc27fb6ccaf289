"""Two interchangeable SHA-256 compression backends.

The baseline backend is the textbook 64-round loop. The tuned backend is a
fully unrolled variant whose big-endian word loads go through a precomputed
byte-permutation table instead of per-byte shifts, and whose round schedule
is flattened into straight-line code generated once at import. Both compute
bit-identical SHA-256; only their execution shape differs, which is what the
per-kernel profiling in the tuner compares.

Backend choice is resolved once per component kernel at configuration time;
there is no per-call branching inside hashing loops.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import ConfigError
from .params import PARAMETER_SETS

_M32 = 0xFFFFFFFF

SHA256_IV = (
    0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
    0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19,
)

# fmt: off
_K = (
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1, 0x923F82A4, 0xAB1C5ED5,
    0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3, 0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174,
    0xE49B69C1, 0xEFBE4786, 0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147, 0x06CA6351, 0x14292967,
    0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13, 0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85,
    0xA2BFE8A1, 0xA81A664B, 0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A, 0x5B9CCA4F, 0x682E6FF3,
    0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208, 0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
)
# fmt: on

_unpack_be16 = struct.Struct(">16I").unpack
_unpack_le16 = struct.Struct("<16I").unpack


def _rotr(x: int, r: int) -> int:
    return ((x >> r) | (x << (32 - r))) & _M32


def compress_baseline(state, block: bytes):
    """One SHA-256 compression as the straightforward round loop."""
    w = list(_unpack_be16(block))
    for i in range(16, 64):
        x = w[i - 15]
        s0 = _rotr(x, 7) ^ _rotr(x, 18) ^ (x >> 3)
        y = w[i - 2]
        s1 = _rotr(y, 17) ^ _rotr(y, 19) ^ (y >> 10)
        w.append((w[i - 16] + s0 + w[i - 7] + s1) & _M32)

    a, b, c, d, e, f, g, h = state
    for i in range(64):
        s1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
        ch = (e & f) ^ (~e & g)
        t1 = (h + s1 + ch + _K[i] + w[i]) & _M32
        s0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = (s0 + maj) & _M32
        a, b, c, d, e, f, g, h = (t1 + t2) & _M32, a, b, c, (d + t1) & _M32, e, f, g

    s = state
    return (
        (s[0] + a) & _M32, (s[1] + b) & _M32, (s[2] + c) & _M32, (s[3] + d) & _M32,
        (s[4] + e) & _M32, (s[5] + f) & _M32, (s[6] + g) & _M32, (s[7] + h) & _M32,
    )


# 16-bit halfword swap table; two lookups byte-reverse a 32-bit word, the
# software analog of a single byte-permutation instruction.
_SWAP16 = tuple(((i & 0xFF) << 8) | (i >> 8) for i in range(1 << 16))


def _gen_tuned_source() -> str:
    """Emit straight-line source for the unrolled compression."""
    rot = lambda v, r: f"((({v})>>{r})|((({v})<<{32 - r})&M))"
    lines = [
        "def compress_tuned(state, block):",
        '    """One SHA-256 compression, fully unrolled with table-permuted loads."""',
        "    T = _SWAP16",
        "    le = _unpack_le16(block)",
    ]
    # Endianness conversion of the 16 message words via the permutation table.
    for i in range(16):
        lines.append(f"    x = le[{i}]; w{i} = (T[x & 0xFFFF] << 16) | T[x >> 16]")
    for i in range(16, 64):
        a15, a2 = f"w{i - 15}", f"w{i - 2}"
        s0 = f"({rot(a15, 7)} ^ {rot(a15, 18)} ^ ({a15} >> 3))"
        s1 = f"({rot(a2, 17)} ^ {rot(a2, 19)} ^ ({a2} >> 10))"
        lines.append(f"    w{i} = (w{i - 16} + {s0} + w{i - 7} + {s1}) & M")
    names = ["a", "b", "c", "d", "e", "f", "g", "h"]
    lines.append("    a, b, c, d, e, f, g, h = state")
    for i in range(64):
        # Register roles rotate one slot per round instead of shifting data.
        v = [names[(j - i) % 8] for j in range(8)]
        a, b, c, d, e, f, g, h = v
        s1 = f"({rot(e, 6)} ^ {rot(e, 11)} ^ {rot(e, 25)})"
        ch = f"({g} ^ ({e} & ({f} ^ {g})))"
        s0 = f"({rot(a, 2)} ^ {rot(a, 13)} ^ {rot(a, 22)})"
        maj = f"(({a} & {b}) | ({c} & ({a} | {b})))"
        lines.append(f"    t1 = ({h} + {s1} + {ch} + {_K[i]} + w{i}) & M")
        lines.append(f"    {d} = ({d} + t1) & M")
        lines.append(f"    {h} = (t1 + {s0} + {maj}) & M")
    lines.append("    s = state")
    lines.append(
        "    return ((s[0]+a)&M, (s[1]+b)&M, (s[2]+c)&M, (s[3]+d)&M,"
        " (s[4]+e)&M, (s[5]+f)&M, (s[6]+g)&M, (s[7]+h)&M)"
    )
    return "\n".join(lines)


_ns: dict = {"M": _M32, "_SWAP16": _SWAP16, "_unpack_le16": _unpack_le16}
exec(compile(_gen_tuned_source(), "<tuned-sha256>", "exec"), _ns)
compress_tuned = _ns["compress_tuned"]


class HashBackend(str, enum.Enum):
    BASELINE = "baseline"
    TUNED = "tuned"


_COMPRESS = {
    HashBackend.BASELINE: compress_baseline,
    HashBackend.TUNED: compress_tuned,
}


def compress(state, block: bytes, backend: HashBackend = HashBackend.BASELINE):
    """Apply the selected backend's compression to one 64-byte block."""
    if len(block) != 64:
        raise ConfigError(f"compression block must be 64 bytes, got {len(block)}")
    return _COMPRESS[HashBackend(backend)](state, block)


class Sha256:
    """Incremental SHA-256 over a selectable compression backend.

    This is the pure-Python engine used for profiling, cross-checks, and the
    optional pure execution mode; production hashing normally runs on the
    platform digest with the same byte semantics.
    """

    __slots__ = ("_compress", "_state", "_buf", "_length", "compressions")

    def __init__(self, backend: HashBackend = HashBackend.BASELINE):
        self._compress = _COMPRESS[HashBackend(backend)]
        self._state = SHA256_IV
        self._buf = b""
        self._length = 0
        self.compressions = 0

    def update(self, data: bytes) -> "Sha256":
        self._length += len(data)
        buf = self._buf + data
        off = 0
        n_full = len(buf) // 64 * 64
        while off < n_full:
            self._state = self._compress(self._state, buf[off:off + 64])
            self.compressions += 1
            off += 64
        self._buf = buf[off:]
        return self

    def copy(self) -> "Sha256":
        dup = Sha256.__new__(Sha256)
        dup._compress = self._compress
        dup._state = self._state
        dup._buf = self._buf
        dup._length = self._length
        dup.compressions = self.compressions
        return dup

    def digest(self) -> bytes:
        pad = b"\x80" + b"\x00" * ((55 - self._length) % 64)
        tail = self._buf + pad + (8 * self._length).to_bytes(8, "big")
        state = self._state
        comp = self._compress
        for off in range(0, len(tail), 64):
            state = comp(state, tail[off:off + 64])
            self.compressions += 1
        return b"".join(x.to_bytes(4, "big") for x in state)


def sha256_digest(data: bytes, backend: HashBackend = HashBackend.BASELINE) -> bytes:
    """Full SHA-256 of `data` through the chosen backend."""
    return Sha256(backend).update(data).digest()


KERNELS = ("FORS_Sign", "TREE_Sign", "WOTS_Sign")


@dataclass(frozen=True)
class BackendSelection:
    """Total map (component kernel, parameter set) -> backend.

    The default mirrors the profile-driven choice on the reference platform:
    the tuned path for FORS everywhere, and for every kernel at 256f.
    """

    table: tuple  # sorted tuple of ((kernel, set_id), HashBackend)

    @classmethod
    def from_dict(cls, mapping) -> "BackendSelection":
        table = {}
        for (kernel, set_id), backend in mapping.items():
            if kernel not in KERNELS:
                raise ConfigError(f"unknown kernel {kernel!r}")
            if set_id not in PARAMETER_SETS:
                raise ConfigError(f"unknown parameter set {set_id!r}")
            table[(kernel, set_id)] = HashBackend(backend)
        missing = [
            (kernel, set_id)
            for kernel in KERNELS
            for set_id in PARAMETER_SETS
            if (kernel, set_id) not in table
        ]
        if missing:
            raise ConfigError(f"backend selection not total; missing cells: {missing}")
        return cls(table=tuple(sorted(table.items())))

    @classmethod
    def default(cls) -> "BackendSelection":
        mapping = {}
        for set_id in PARAMETER_SETS:
            mapping[("FORS_Sign", set_id)] = HashBackend.TUNED
            tree_wots = HashBackend.TUNED if set_id == "256f" else HashBackend.BASELINE
            mapping[("TREE_Sign", set_id)] = tree_wots
            mapping[("WOTS_Sign", set_id)] = tree_wots
        return cls.from_dict(mapping)

    def get(self, kernel: str, set_id: str) -> HashBackend:
        for key, backend in self.table:
            if key == (kernel, set_id):
                return backend
        raise ConfigError(f"no backend recorded for {(kernel, set_id)!r}")

    def row(self, set_id: str) -> dict[str, str]:
        """One parameter set's kernel -> backend-name mapping (config file row)."""
        return {kernel: self.get(kernel, set_id).value for kernel in KERNELS}

    @classmethod
    def from_rows(cls, rows: dict[str, dict[str, str]]) -> "BackendSelection":
        mapping = {
            (kernel, set_id): backend
            for set_id, row in rows.items()
            for kernel, backend in row.items()
        }
        return cls.from_dict(mapping)
