"""Cipher implementations evaluated by the estimator.

All functions are vectorized over a leading sample axis: a block argument may be
``bytes``, a 1-D octet array (one sample) or an (N, L) octet array. Outputs are
``uint8`` arrays of the same shape.

AES-128 is implemented here directly (table-driven, numpy) so that the single
SPN round can share its S-box, ShiftRows and MixColumns stages.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .gf256 import INV, MUL

BLOCK = 16


class Scheme(str, Enum):
    OTP = "otp"
    XOR_REPEAT = "xor_repeat"
    CAESAR = "caesar"
    SPN = "spn"
    AES128_ECB = "aes128_ecb"
    AES128_CTR = "aes128_ctr"


def _affine(b: int) -> int:
    out = 0x63
    for shift in range(5):
        out ^= ((b << shift) | (b >> (8 - shift))) & 0xFF
    return out


SBOX = np.array([_affine(int(INV[v])) for v in range(256)], dtype=np.uint8)
INV_SBOX = np.argsort(SBOX).astype(np.uint8)

# state byte i sits at row i % 4, column i // 4
SHIFT_ROWS = np.array([(r + 4 * ((c + r) % 4)) for c in range(4) for r in range(4)])
INV_SHIFT_ROWS = np.argsort(SHIFT_ROWS)

RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def _as_blocks(x) -> tuple[np.ndarray, bool]:
    if isinstance(x, (bytes, bytearray)):
        x = np.frombuffer(bytes(x), dtype=np.uint8)
    arr = np.asarray(x, dtype=np.uint8)
    single = arr.ndim == 1
    return (arr[None, :] if single else arr), single


def _restore(out: np.ndarray, single: bool) -> np.ndarray:
    return out[0] if single else out


def _key_array(key, length: int | None = None, name: str = "key") -> np.ndarray:
    k = np.frombuffer(bytes(key), dtype=np.uint8) if isinstance(key, (bytes, bytearray)) \
        else np.asarray(key, dtype=np.uint8)
    if k.ndim != 1:
        raise ValueError(f"{name} must be a flat octet sequence")
    if length is not None and k.size != length:
        raise ValueError(f"{name} must be exactly {length} bytes, got {k.size}")
    return k


# ---------------------------------------------------------------------------
# AES building blocks (operate on (N, 16) states)


def sub_bytes(s: np.ndarray) -> np.ndarray:
    return SBOX[s]


def shift_rows(s: np.ndarray) -> np.ndarray:
    return s[:, SHIFT_ROWS]


def mix_columns(s: np.ndarray) -> np.ndarray:
    c = s.reshape(-1, 4, 4)
    a0, a1, a2, a3 = c[:, :, 0], c[:, :, 1], c[:, :, 2], c[:, :, 3]
    m2, m3 = MUL[2], MUL[3]
    out = np.empty_like(c)
    out[:, :, 0] = m2[a0] ^ m3[a1] ^ a2 ^ a3
    out[:, :, 1] = a0 ^ m2[a1] ^ m3[a2] ^ a3
    out[:, :, 2] = a0 ^ a1 ^ m2[a2] ^ m3[a3]
    out[:, :, 3] = m3[a0] ^ a1 ^ a2 ^ m2[a3]
    return out.reshape(-1, 16)


def inv_mix_columns(s: np.ndarray) -> np.ndarray:
    c = s.reshape(-1, 4, 4)
    a0, a1, a2, a3 = c[:, :, 0], c[:, :, 1], c[:, :, 2], c[:, :, 3]
    m9, m11, m13, m14 = MUL[9], MUL[11], MUL[13], MUL[14]
    out = np.empty_like(c)
    out[:, :, 0] = m14[a0] ^ m11[a1] ^ m13[a2] ^ m9[a3]
    out[:, :, 1] = m9[a0] ^ m14[a1] ^ m11[a2] ^ m13[a3]
    out[:, :, 2] = m13[a0] ^ m9[a1] ^ m14[a2] ^ m11[a3]
    out[:, :, 3] = m11[a0] ^ m13[a1] ^ m9[a2] ^ m14[a3]
    return out.reshape(-1, 16)


def expand_key(key) -> np.ndarray:
    """AES-128 key schedule: 11 round keys of 16 bytes, shape (11, 16)."""
    k = _key_array(key, 16)
    words = [list(k[4 * i:4 * i + 4]) for i in range(4)]
    for i in range(4, 44):
        t = list(words[i - 1])
        if i % 4 == 0:
            t = t[1:] + t[:1]
            t = [int(SBOX[b]) for b in t]
            t[0] ^= RCON[i // 4 - 1]
        words.append([a ^ b for a, b in zip(words[i - 4], t)])
    return np.array(words, dtype=np.uint8).reshape(11, 16)


def _aes_encrypt_blocks(blocks: np.ndarray, round_keys: np.ndarray) -> np.ndarray:
    s = blocks ^ round_keys[0]
    for r in range(1, 10):
        s = mix_columns(shift_rows(SBOX[s])) ^ round_keys[r]
    return shift_rows(SBOX[s]) ^ round_keys[10]


def _aes_decrypt_blocks(blocks: np.ndarray, round_keys: np.ndarray) -> np.ndarray:
    s = blocks ^ round_keys[10]
    s = INV_SBOX[s[:, INV_SHIFT_ROWS]]
    for r in range(9, 0, -1):
        s = inv_mix_columns(s ^ round_keys[r])
        s = INV_SBOX[s[:, INV_SHIFT_ROWS]]
    return s ^ round_keys[0]


def _blockwise(x, fn):
    arr, single = _as_blocks(x)
    n, length = arr.shape
    if length == 0 or length % BLOCK:
        raise ValueError(f"AES input length must be a positive multiple of 16, got {length}")
    out = fn(np.ascontiguousarray(arr).reshape(-1, BLOCK)).reshape(n, length)
    return _restore(out, single)


def aes128_ecb_encrypt(x, key) -> np.ndarray:
    rk = expand_key(key)
    return _blockwise(x, lambda b: _aes_encrypt_blocks(b, rk))


def aes128_ecb_decrypt(y, key) -> np.ndarray:
    rk = expand_key(key)
    return _blockwise(y, lambda b: _aes_decrypt_blocks(b, rk))


def counter_blocks(nonce, n_blocks: int) -> np.ndarray:
    """Counter blocks nonce + j (128-bit big-endian) for j < n_blocks: (N, n_blocks, 16)."""
    nonces, _ = _as_blocks(nonce)
    if nonces.shape[1] != BLOCK:
        raise ValueError("CTR nonce must be 16 bytes")
    hi = nonces[:, :8].copy().view(">u8")[:, 0].astype(np.uint64)
    lo = nonces[:, 8:].copy().view(">u8")[:, 0].astype(np.uint64)
    j = np.arange(n_blocks, dtype=np.uint64)
    with np.errstate(over="ignore"):
        new_lo = lo[:, None] + j[None, :]
        new_hi = hi[:, None] + (new_lo < lo[:, None]).astype(np.uint64)
    out = np.empty((nonces.shape[0], n_blocks, 2), dtype=">u8")
    out[..., 0] = new_hi
    out[..., 1] = new_lo
    return out.view(np.uint8).reshape(nonces.shape[0], n_blocks, BLOCK)


def aes128_ctr_keystream(key, nonce, length: int) -> np.ndarray:
    rk = expand_key(key)
    nb = -(-length // BLOCK)
    ctr = counter_blocks(nonce, nb)
    n = ctr.shape[0]
    ks = _aes_encrypt_blocks(ctr.reshape(-1, BLOCK), rk).reshape(n, nb * BLOCK)
    return ks[:, :length]


def aes128_ctr_encrypt(x, key, nonce) -> np.ndarray:
    """XOR with the AES-CTR keystream; ``nonce`` is one 16-byte value or one per sample."""
    arr, single = _as_blocks(x)
    nonces, one_nonce = _as_blocks(nonce)
    if not one_nonce and nonces.shape[0] != arr.shape[0]:
        raise ValueError("need one nonce per sample")
    ks = aes128_ctr_keystream(key, nonces, arr.shape[1])
    return _restore(arr ^ ks, single)


aes128_ctr_decrypt = aes128_ctr_encrypt


# ---------------------------------------------------------------------------
# toy and baseline schemes


def otp_encrypt(x, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Fresh uniform pad per sample; returns (ciphertext, pad)."""
    arr, single = _as_blocks(x)
    k = rng.integers(0, 256, size=arr.shape, dtype=np.uint8)
    return _restore(arr ^ k, single), _restore(k, single)


def otp_decrypt(y, k) -> np.ndarray:
    return np.asarray(y, dtype=np.uint8) ^ np.asarray(k, dtype=np.uint8)


def xor_repeating(x, key) -> np.ndarray:
    arr, single = _as_blocks(x)
    k = _key_array(key)
    if k.size == 0:
        raise ValueError("xor key must be nonempty")
    reps = -(-arr.shape[1] // k.size)
    return _restore(arr ^ np.tile(k, reps)[: arr.shape[1]], single)


def caesar_encrypt(x, shift: int) -> np.ndarray:
    arr, single = _as_blocks(x)
    return _restore((arr + np.uint8(shift % 256)).astype(np.uint8), single)


def caesar_decrypt(y, shift: int) -> np.ndarray:
    return caesar_encrypt(y, (256 - shift % 256) % 256)


def _spn_keys(k0, k1) -> tuple[np.ndarray, np.ndarray]:
    return _key_array(k0, 16, "k0"), _key_array(k1, 16, "k1")


def spn_encrypt(x, k0, k1) -> np.ndarray:
    """One AES-like round: AddRoundKey, SubBytes, ShiftRows, MixColumns, AddRoundKey."""
    arr, single = _as_blocks(x)
    if arr.shape[1] != BLOCK:
        raise ValueError(f"SPN block must be 16 bytes, got {arr.shape[1]}")
    k0, k1 = _spn_keys(k0, k1)
    out = mix_columns(shift_rows(SBOX[arr ^ k0])) ^ k1
    return _restore(out, single)


def spn_decrypt(y, k0, k1) -> np.ndarray:
    arr, single = _as_blocks(y)
    if arr.shape[1] != BLOCK:
        raise ValueError(f"SPN block must be 16 bytes, got {arr.shape[1]}")
    k0, k1 = _spn_keys(k0, k1)
    s = inv_mix_columns(arr ^ k1)
    out = INV_SBOX[s[:, INV_SHIFT_ROWS]] ^ k0
    return _restore(out, single)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyMaterial:
    """Dataset-wide key for one scheme. SPN keys are k0 || k1 (32 bytes)."""

    scheme: Scheme
    key_bytes: bytes = b""
    nonce: bytes | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "key_bytes", bytes(self.key_bytes))
        s = self.scheme
        if s in (Scheme.AES128_ECB, Scheme.AES128_CTR) and len(self.key_bytes) != 16:
            raise ValueError("AES-128 needs exactly 16 key bytes")
        if s is Scheme.CAESAR and len(self.key_bytes) != 1:
            raise ValueError("Caesar needs exactly 1 key byte")
        if s is Scheme.SPN and len(self.key_bytes) != 32:
            raise ValueError("SPN needs two 16-byte round keys")
        if s is Scheme.XOR_REPEAT and not self.key_bytes:
            raise ValueError("repeating XOR needs a nonempty key")
        if self.nonce is not None and (s is not Scheme.AES128_CTR or len(self.nonce) != 16):
            raise ValueError("nonce is only valid for AES-CTR and must be 16 bytes")

    @classmethod
    def generate(cls, scheme: Scheme | str, rng: np.random.Generator,
                 key_len: int = 16) -> "KeyMaterial":
        scheme = Scheme(scheme)
        size = {Scheme.CAESAR: 1, Scheme.SPN: 32, Scheme.OTP: 0}.get(scheme, key_len)
        if scheme in (Scheme.AES128_ECB, Scheme.AES128_CTR):
            size = 16
        key = rng.integers(0, 256, size=size, dtype=np.uint8).tobytes()
        if scheme is Scheme.CAESAR and key == b"\x00":
            key = b"\x01"
        return cls(scheme, key)

    def encrypt(self, x, rng: np.random.Generator | None = None) -> np.ndarray:
        """Encrypt a batch. OTP and AES-CTR draw per-sample randomness from ``rng``
        (pads and nonces respectively) unless a fixed CTR nonce is set."""
        s = self.scheme
        if s is Scheme.OTP:
            if rng is None:
                raise ValueError("OTP needs an rng for fresh pads")
            return otp_encrypt(x, rng)[0]
        if s is Scheme.XOR_REPEAT:
            return xor_repeating(x, self.key_bytes)
        if s is Scheme.CAESAR:
            return caesar_encrypt(x, self.key_bytes[0])
        if s is Scheme.SPN:
            return spn_encrypt(x, self.key_bytes[:16], self.key_bytes[16:])
        if s is Scheme.AES128_ECB:
            return aes128_ecb_encrypt(x, self.key_bytes)
        arr, single = _as_blocks(x)
        if self.nonce is not None:
            nonce = self.nonce
        elif rng is not None:
            nonce = rng.integers(0, 256, size=(arr.shape[0], BLOCK), dtype=np.uint8)
        else:
            raise ValueError("AES-CTR needs a nonce or an rng for fresh nonces")
        return _restore(aes128_ctr_encrypt(arr, self.key_bytes, nonce), single)
