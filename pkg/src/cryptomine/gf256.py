"""GF(2^8) arithmetic and dense linear algebra for random linear network coding.

Elements are octets; the field is reduced modulo the AES polynomial
x^8 + x^4 + x^3 + x + 1 (0x11B). Matrices are ``uint8`` numpy arrays.
"""
from __future__ import annotations

import numpy as np

POLY = 0x11B
MAX_SAMPLING_ATTEMPTS = 1000


class SingularMatrixError(ValueError):
    pass


def _shift_reduce_mul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= POLY
    return r


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    mul = np.zeros((256, 256), dtype=np.uint8)
    for a in range(256):
        for b in range(a, 256):
            mul[a, b] = mul[b, a] = _shift_reduce_mul(a, b)
    inv = np.zeros(256, dtype=np.uint8)
    rows, cols = np.nonzero(mul == 1)
    inv[rows] = cols
    mul.setflags(write=False)
    inv.setflags(write=False)
    return mul, inv


MUL, INV = _build_tables()


def gf_mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse of zero")
    return int(INV[a])


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError("GF(2^8) matrix must be 2-D")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("matrix entries must be octets")
        arr = arr.astype(np.uint8)
    return arr


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.uint8)


def mat_mul(a, b) -> np.ndarray:
    """Matrix product with XOR as addition."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for k in range(a.shape[1]):
        # outer product of column k of a with row k of b
        out ^= MUL[a[:, k][:, None], b[k][None, :]]
    return out


def mat_inv(m) -> np.ndarray:
    """Gauss-Jordan inverse; the pivot is the first nonzero entry at or below the diagonal."""
    m = as_matrix(m)
    n, cols = m.shape
    if n != cols:
        raise ValueError("only square matrices are invertible")
    aug = np.concatenate([m, identity(n)], axis=1)
    for col in range(n):
        nz = np.nonzero(aug[col:, col])[0]
        if nz.size == 0:
            raise SingularMatrixError("singular")
        piv = col + int(nz[0])
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = MUL[INV[aug[col, col]], aug[col]]
        factors = aug[:, col].copy()
        factors[col] = 0
        aug ^= MUL[factors[:, None], aug[col][None, :]]
    return aug[:, n:].copy()


def is_invertible(m) -> bool:
    try:
        mat_inv(m)
    except SingularMatrixError:
        return False
    return True


def random_invertible(n: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample a uniformly random invertible n x n matrix."""
    if n < 1:
        raise ValueError("n must be >= 1")
    for _ in range(MAX_SAMPLING_ATTEMPTS):
        g = rng.integers(0, 256, size=(n, n), dtype=np.uint8)
        if is_invertible(g):
            return g
    raise RuntimeError(f"no invertible {n}x{n} matrix in {MAX_SAMPLING_ATTEMPTS} draws")


def rlnc_encode(messages, g) -> np.ndarray:
    """Code n messages (rows, L bytes each) as g @ messages."""
    messages = as_matrix(messages)
    g = as_matrix(g)
    if g.shape[0] != g.shape[1]:
        raise ValueError("generator matrix must be square")
    return mat_mul(g, messages)


def rlnc_decode(coded, g) -> np.ndarray:
    return mat_mul(mat_inv(g), coded)


def rlnc_encode_batch(messages: np.ndarray, g) -> np.ndarray:
    """Vectorized ``rlnc_encode`` over a leading sample axis: (N, n, L) -> (N, n, L)."""
    g = as_matrix(g)
    messages = np.asarray(messages, dtype=np.uint8)
    n = g.shape[0]
    if messages.ndim != 3 or messages.shape[1] != n or g.shape[1] != n:
        raise ValueError(f"messages {messages.shape} do not match generator {g.shape}")
    out = np.zeros_like(messages)
    for i in range(n):
        for k in range(n):
            if g[i, k]:
                out[:, i, :] ^= MUL[g[i, k]][messages[:, k, :]]
    return out


def rlnc_decode_batch(coded: np.ndarray, g) -> np.ndarray:
    return rlnc_encode_batch(coded, mat_inv(g))
