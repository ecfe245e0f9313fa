"""HUNCC pipeline and plaintext/ciphertext dataset construction.

HUNCC codes n messages with an invertible generator matrix over GF(2^8) and
AES-encrypts only the first ``n_encrypted`` coded links.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ciphers, gf256, sources
from .ciphers import KeyMaterial, Scheme
from .mine import Dataset
from .scenarios import Scenario
from .seeding import chunks, derive_rng

DATASET_MAGIC = b"CMIN"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sHQII")


@dataclass
class HunccConfig:
    g: np.ndarray
    cipher_key: KeyMaterial
    n_links: int = 8
    n_encrypted: int = 1
    msg_len_bytes: int = 16

    def __post_init__(self) -> None:
        self.g = gf256.as_matrix(self.g)
        if not 1 <= self.n_encrypted <= self.n_links:
            raise ValueError("need 1 <= n_encrypted <= n_links")
        if self.g.shape != (self.n_links, self.n_links):
            raise ValueError(f"generator must be {self.n_links}x{self.n_links}, got {self.g.shape}")
        if self.cipher_key.scheme is not Scheme.AES128_ECB:
            raise ValueError("HUNCC links are encrypted with AES-128 ECB")
        if self.msg_len_bytes < 1 or self.msg_len_bytes % 16:
            raise ValueError("msg_len_bytes must be a positive multiple of 16")
        if not gf256.is_invertible(self.g):
            raise gf256.SingularMatrixError("generator matrix is singular")

    @classmethod
    def random(cls, rng: np.random.Generator, n_links: int = 8, n_encrypted: int = 1,
               msg_len_bytes: int = 16) -> "HunccConfig":
        key = KeyMaterial.generate(Scheme.AES128_ECB, rng)
        g = gf256.random_invertible(n_links, rng)
        return cls(g, key, n_links, n_encrypted, msg_len_bytes)

    @property
    def encrypted_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_links, dtype=bool)
        mask[: self.n_encrypted] = True
        return mask


@dataclass
class LinkBundle:
    """Link payloads, shape (n_links, L) or (N, n_links, L) for a batch."""

    links: np.ndarray
    encrypted_mask: np.ndarray

    def flat(self) -> np.ndarray:
        """Link-major byte serialization (link 0 bytes, then link 1, ...)."""
        if self.links.ndim == 2:
            return self.links.reshape(-1)
        return self.links.reshape(self.links.shape[0], -1)


def _check_messages(messages: np.ndarray, cfg: HunccConfig) -> tuple[np.ndarray, bool]:
    arr = np.asarray(messages, dtype=np.uint8)
    single = arr.ndim == 2
    batch = arr[None] if single else arr
    if batch.ndim != 3 or batch.shape[1:] != (cfg.n_links, cfg.msg_len_bytes):
        raise ValueError(
            f"messages must be ({cfg.n_links}, {cfg.msg_len_bytes}), got {arr.shape}"
        )
    return batch, single


def huncc_encrypt(messages, cfg: HunccConfig) -> LinkBundle:
    batch, single = _check_messages(messages, cfg)
    coded = gf256.rlnc_encode_batch(batch, cfg.g)
    k = cfg.n_encrypted
    n = batch.shape[0]
    enc = coded[:, :k, :].reshape(n * k, -1)
    coded[:, :k, :] = ciphers.aes128_ecb_encrypt(enc, cfg.cipher_key.key_bytes).reshape(n, k, -1)
    return LinkBundle(coded[0] if single else coded, cfg.encrypted_mask)


def huncc_decrypt(bundle: LinkBundle, cfg: HunccConfig) -> np.ndarray:
    batch, single = _check_messages(bundle.links, cfg)
    if not np.array_equal(bundle.encrypted_mask, cfg.encrypted_mask):
        raise ValueError("bundle was not produced under this configuration")
    coded = batch.copy()
    k = cfg.n_encrypted
    n = batch.shape[0]
    enc = coded[:, :k, :].reshape(n * k, -1)
    coded[:, :k, :] = ciphers.aes128_ecb_decrypt(enc, cfg.cipher_key.key_bytes).reshape(n, k, -1)
    out = gf256.rlnc_decode_batch(coded, cfg.g)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# datasets


def _sample_messages(scn: Scenario, m: int, rng: np.random.Generator) -> np.ndarray:
    shape = (m, scn.n_links, scn.msg_len)
    src = scn.source
    if src.type == "uniform":
        return rng.integers(0, 256, size=shape, dtype=np.uint8)
    if src.type == "ge":
        return sources.ge_bytes(sources.GEParams(src.alpha), shape, rng)
    if src.type == "constant":
        return np.full(shape, src.value, dtype=np.uint8)
    if src.type == "mixed_one_constant":
        msgs = rng.integers(0, 256, size=shape, dtype=np.uint8)
        msgs[:, src.fixed_link, :] = src.value
        return msgs
    # nibble: one uniform 4-bit value replicated into every nibble of the sample
    v = rng.integers(0, 16, size=m, dtype=np.uint8) * np.uint8(0x11)
    return np.broadcast_to(v[:, None, None], shape).copy()


@dataclass
class _Keys:
    material: KeyMaterial | None
    huncc: HunccConfig | None


def scenario_keys(scn: Scenario) -> _Keys:
    """Dataset-wide key material (and generator matrix) for a scenario's seed."""
    rng = derive_rng(scn.seed, "keys")
    if scn.scheme == "huncc":
        return _Keys(None, HunccConfig.random(rng, scn.n_links, scn.n_encrypted, scn.msg_len))
    if scn.scheme in ("none", "otp", "otp_with_key"):
        return _Keys(None, None)
    return _Keys(KeyMaterial.generate(scn.scheme, rng), None)


def _encrypt(scn: Scenario, keys: _Keys, msgs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = msgs.shape[0]
    x = msgs.reshape(m, -1)
    s = scn.scheme
    if s == "none":
        return x.copy()
    if s in ("otp", "otp_with_key"):
        y, pad = ciphers.otp_encrypt(x, rng)
        return np.hstack((y, pad)) if s == "otp_with_key" else y
    if s == "huncc":
        return huncc_encrypt(msgs, keys.huncc).flat()
    if s == "spn":
        # independent 16-byte blocks under the same round keys
        return keys.material.encrypt(x.reshape(-1, 16)).reshape(m, -1)
    return keys.material.encrypt(x, rng)


def build_pair_dataset(scn: Scenario, n_samples: int, seed: int | None = None,
                       huncc_cfg: HunccConfig | None = None) -> Dataset:
    """(plaintext, output) pairs for a scenario; byte-identical for equal inputs.

    Randomness is drawn per chunk of samples from streams keyed by
    (seed, purpose, chunk index), so the result does not depend on how the
    chunks are scheduled. ``huncc_cfg`` replaces the seed-derived generator
    matrix and link key of a HUNCC scenario.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if seed is not None:
        scn = scn.with_seed(seed)
    keys = scenario_keys(scn)
    if huncc_cfg is not None:
        if scn.scheme != "huncc":
            raise ValueError("huncc_cfg given for a non-HUNCC scenario")
        if (huncc_cfg.n_links, huncc_cfg.msg_len_bytes) != (scn.n_links, scn.msg_len):
            raise ValueError("huncc_cfg dimensions do not match the scenario")
        keys = _Keys(None, huncc_cfg)
    xs = np.empty((n_samples, scn.dx), dtype=np.uint8)
    ys = np.empty((n_samples, scn.dy), dtype=np.uint8)
    for ci, start, stop in chunks(n_samples):
        msgs = _sample_messages(scn, stop - start, derive_rng(scn.seed, "source", ci))
        ys[start:stop] = _encrypt(scn, keys, msgs, derive_rng(scn.seed, "cipher", ci))
        if scn.probe_view == "fixed_message":
            xs[start:stop] = msgs[:, scn.source.fixed_link, :]
        else:
            xs[start:stop] = msgs.reshape(stop - start, -1)
    return Dataset(xs, ys)


def dataset_bytes(ds: Dataset) -> bytes:
    header = _HEADER.pack(DATASET_MAGIC, DATASET_VERSION, ds.n, ds.dx, ds.dy)
    return header + np.hstack((ds.x, ds.y)).tobytes()


def dataset_digest(ds: Dataset) -> str:
    """SHA-256 of the serialized dataset."""
    h = hashlib.sha256(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, ds.n, ds.dx, ds.dy))
    for _, start, stop in chunks(ds.n):
        h.update(np.hstack((ds.x[start:stop], ds.y[start:stop])).tobytes())
    return h.hexdigest()


def write_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, ds.n, ds.dx, ds.dy))
        for _, start, stop in chunks(ds.n):
            fh.write(np.hstack((ds.x[start:stop], ds.y[start:stop])).tobytes())


def read_dataset(path: str | Path) -> Dataset:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated dataset header")
    magic, version, n, dx, dy = _HEADER.unpack_from(data)
    if magic != DATASET_MAGIC:
        raise ValueError("not a CMIN dataset")
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if body.size != n * (dx + dy):
        raise ValueError(f"dataset body has {body.size} bytes, expected {n * (dx + dy)}")
    rows = body.reshape(n, dx + dy)
    return Dataset(rows[:, :dx], rows[:, dx:])
