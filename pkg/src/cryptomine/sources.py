"""Plaintext sources, plug-in entropy and LZW compression."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

LZW_MIN_WIDTH = 9
LZW_MAX_WIDTH = 12
LZW_MAX_CODES = 1 << LZW_MAX_WIDTH


class InitialState(str, Enum):
    ZERO = "zero"
    ONE = "one"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class GEParams:
    """Symmetric Gilbert-Elliott chain: the state flips with probability ``alpha``."""

    alpha: float
    initial_state: InitialState = InitialState.STATIONARY

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "initial_state", InitialState(self.initial_state))


def uniform_bytes(count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return rng.integers(0, 256, size=count, dtype=np.uint8)


def ge_bit_matrix(params: GEParams, rows: int, bits: int, rng: np.random.Generator) -> np.ndarray:
    """``rows`` independent chains of ``bits`` steps each, as a (rows, bits) 0/1 array.

    The emitted bit equals the current state.
    """
    if rows < 1 or bits < 1:
        raise ValueError("rows and bits must be >= 1")
    if params.initial_state is InitialState.STATIONARY:
        start = rng.integers(0, 2, size=rows, dtype=np.uint8)
    else:
        start = np.full(rows, params.initial_state is InitialState.ONE, dtype=np.uint8)
    flips = (rng.random((rows, bits - 1)) < params.alpha).astype(np.uint8)
    out = np.empty((rows, bits), dtype=np.uint8)
    out[:, 0] = start
    np.bitwise_xor.accumulate(flips, axis=1, out=out[:, 1:])
    out[:, 1:] ^= start[:, None]
    return out


def ge_bits(params: GEParams, count: int, rng: np.random.Generator) -> np.ndarray:
    return ge_bit_matrix(params, 1, count, rng)[0]


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack 0/1 values MSB-first along the last axis; length must divide by 8."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] % 8:
        raise ValueError("bit count must be a multiple of 8")
    return np.packbits(bits, axis=-1, bitorder="big")


def unpack_bits(data: np.ndarray) -> np.ndarray:
    return np.unpackbits(np.asarray(data, dtype=np.uint8), axis=-1, bitorder="big")


def ge_bytes(params: GEParams, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """GE-generated octets; each length-``shape[-1]`` row is one chain of 8*L bits."""
    *lead, length = shape
    rows = int(np.prod(lead)) if lead else 1
    bits = ge_bit_matrix(params, rows, 8 * length, rng)
    return pack_bits(bits).reshape(shape)


def byte_entropy(data) -> float:
    """Plug-in Shannon entropy (nats) of the byte histogram."""
    arr = np.frombuffer(bytes(data), dtype=np.uint8) if isinstance(data, (bytes, bytearray)) \
        else np.asarray(data, dtype=np.uint8).ravel()
    if arr.size == 0:
        raise ValueError("entropy of empty input is undefined")
    counts = np.bincount(arr, minlength=256)
    p = counts[counts > 0] / arr.size
    h = float(-(p * np.log(p)).sum())
    return max(h, 0.0)


# ---------------------------------------------------------------------------
# LZW: 256 single-byte roots, 9..12-bit codes, table frozen at 4096 entries,
# codes packed MSB-first. The k-th code (k >= 1) is written with enough bits
# for 255 + k, so the decoder can track the width from the code count alone.


def _code_width(k: int) -> int:
    return max(LZW_MIN_WIDTH, min(255 + k, LZW_MAX_CODES - 1).bit_length())


def lzw_codes(data: bytes) -> list[int]:
    """LZW code sequence for ``data`` (before bit packing)."""
    data = bytes(data)
    if not data:
        raise ValueError("cannot compress empty input")
    table = {bytes([i]): i for i in range(256)}
    next_code = 256
    codes = []
    w = data[:1]
    for c in data[1:]:
        wc = w + bytes([c])
        if wc in table:
            w = wc
            continue
        codes.append(table[w])
        if next_code < LZW_MAX_CODES:
            table[wc] = next_code
            next_code += 1
        w = bytes([c])
    codes.append(table[w])
    return codes


def _pack_codes(codes: list[int]) -> bytes:
    acc = 0
    nbits = 0
    out = bytearray()
    for k, code in enumerate(codes):
        width = _code_width(k)
        acc = (acc << width) | code
        nbits += width
        while nbits >= 8:
            nbits -= 8
            out.append((acc >> nbits) & 0xFF)
        acc &= (1 << nbits) - 1
    if nbits:
        out.append((acc << (8 - nbits)) & 0xFF)
    return bytes(out)


def _unpack_codes(stream: bytes) -> list[int]:
    codes = []
    acc = 0
    nbits = 0
    for byte in stream:
        acc = (acc << 8) | byte
        nbits += 8
        width = _code_width(len(codes))
        if nbits >= width:
            nbits -= width
            codes.append((acc >> nbits) & ((1 << width) - 1))
            acc &= (1 << nbits) - 1
    if acc:
        raise ValueError("invalid code: nonzero padding")
    return codes


def lzw_compress(data) -> bytes:
    return _pack_codes(lzw_codes(bytes(data)))


def lzw_decode_codes(codes: list[int]) -> bytes:
    if not codes:
        raise ValueError("invalid code: empty stream")
    table = [bytes([i]) for i in range(256)]
    first = codes[0]
    if first > 255:
        raise ValueError(f"invalid code {first} at position 0")
    prev = table[first]
    out = bytearray(prev)
    for pos, code in enumerate(codes[1:], start=1):
        if code < len(table):
            entry = table[code]
        elif code == len(table) and len(table) < LZW_MAX_CODES:
            entry = prev + prev[:1]
        else:
            raise ValueError(f"invalid code {code} at position {pos}")
        out += entry
        if len(table) < LZW_MAX_CODES:
            table.append(prev + entry[:1])
        prev = entry
    return bytes(out)


def lzw_decompress(stream) -> bytes:
    return lzw_decode_codes(_unpack_codes(bytes(stream)))


def entropy_after_compression(params: GEParams, total_bits: int, rng: np.random.Generator,
                              n_samples: int = 20) -> float:
    """Mean byte entropy (nats) of LZW-compressed GE streams of ``total_bits`` bits."""
    if total_bits < 8 or total_bits % 8:
        raise ValueError("total_bits must be a positive multiple of 8")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    values = []
    for _ in range(n_samples):
        raw = pack_bits(ge_bits(params, total_bits, rng)).tobytes()
        values.append(byte_entropy(lzw_compress(raw)))
    return math.fsum(values) / len(values)
