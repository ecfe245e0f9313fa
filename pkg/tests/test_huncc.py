import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptomine import ciphers, gf256
from cryptomine.ciphers import KeyMaterial, Scheme
from cryptomine.huncc import (
    HunccConfig,
    build_pair_dataset,
    dataset_bytes,
    dataset_digest,
    huncc_decrypt,
    huncc_encrypt,
    read_dataset,
    write_dataset,
)
from cryptomine.mine import Dataset
from cryptomine.scenarios import PRESETS, Scenario, SourceSpec, huncc_scenario, probe_scenario


def test_config_validation(rng):
    key = KeyMaterial.generate(Scheme.AES128_ECB, rng)
    with pytest.raises(ValueError):
        HunccConfig(gf256.identity(4), key, n_links=4, n_encrypted=0)
    with pytest.raises(ValueError):
        HunccConfig(gf256.identity(4), key, n_links=4, n_encrypted=5)
    with pytest.raises(ValueError):
        HunccConfig(gf256.identity(3), key, n_links=4)
    with pytest.raises(ValueError):
        HunccConfig(gf256.identity(4), key, n_links=4, msg_len_bytes=20)
    with pytest.raises(gf256.SingularMatrixError):
        HunccConfig(np.zeros((4, 4), dtype=np.uint8), key, n_links=4)
    with pytest.raises(ValueError):
        HunccConfig(gf256.identity(4), KeyMaterial.generate(Scheme.CAESAR, rng), n_links=4)


def test_mask_has_first_links(rng):
    cfg = HunccConfig.random(rng, n_links=8, n_encrypted=3)
    assert cfg.encrypted_mask.tolist() == [True] * 3 + [False] * 5
    bundle = huncc_encrypt(rng.integers(0, 256, (8, 16), dtype=np.uint8), cfg)
    assert bundle.encrypted_mask.sum() == 3


def test_identity_coding_full_encryption_is_ecb(rng):
    key = KeyMaterial.generate(Scheme.AES128_ECB, rng)
    cfg = HunccConfig(gf256.identity(4), key, n_links=4, n_encrypted=4, msg_len_bytes=32)
    m = rng.integers(0, 256, (4, 32), dtype=np.uint8)
    expected = ciphers.aes128_ecb_encrypt(m, key.key_bytes)
    assert np.array_equal(huncc_encrypt(m, cfg).links, expected)


def test_unencrypted_links_carry_coded_payload(rng):
    cfg = HunccConfig.random(rng, n_links=4, n_encrypted=1)
    m = rng.integers(0, 256, (4, 16), dtype=np.uint8)
    links = huncc_encrypt(m, cfg).links
    coded = gf256.rlnc_encode(m, cfg.g)
    assert np.array_equal(links[1:], coded[1:])
    assert not np.array_equal(links[0], coded[0])


def test_roundtrip_100_instances():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.choice([2, 4, 8]))
        length = int(rng.choice([16, 32]))
        cfg = HunccConfig.random(rng, n_links=n, n_encrypted=int(rng.integers(1, n + 1)),
                                 msg_len_bytes=length)
        m = rng.integers(0, 256, (n, length), dtype=np.uint8)
        assert np.array_equal(huncc_decrypt(huncc_encrypt(m, cfg), cfg), m)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 4, 8]), st.sampled_from([16, 32]), st.integers(0, 2**32 - 1))
def test_batch_roundtrip_property(n, length, seed):
    rng = np.random.default_rng(seed)
    cfg = HunccConfig.random(rng, n_links=n, msg_len_bytes=length)
    m = rng.integers(0, 256, (5, n, length), dtype=np.uint8)
    bundle = huncc_encrypt(m, cfg)
    assert bundle.links.shape == (5, n, length)
    assert np.array_equal(huncc_decrypt(bundle, cfg), m)
    for i in range(5):
        assert np.array_equal(huncc_encrypt(m[i], cfg).links, bundle.links[i])


def test_dimension_mismatch(rng):
    cfg = HunccConfig.random(rng, n_links=4)
    with pytest.raises(ValueError):
        huncc_encrypt(np.zeros((3, 16), dtype=np.uint8), cfg)
    other = HunccConfig.random(rng, n_links=4, n_encrypted=2)
    bundle = huncc_encrypt(np.zeros((4, 16), dtype=np.uint8), cfg)
    with pytest.raises(ValueError):
        huncc_decrypt(bundle, other)


def test_fixed_message_other_draws_change_link0(rng):
    cfg = HunccConfig.random(rng, n_links=8)
    a = rng.integers(0, 256, (8, 16), dtype=np.uint8)
    b = rng.integers(0, 256, (8, 16), dtype=np.uint8)
    a[3] = b[3] = 0xFF
    la = huncc_encrypt(a, cfg).links[0]
    lb = huncc_encrypt(b, cfg).links[0]
    assert np.sum(la == lb) <= 3


def test_flat_is_link_major(rng):
    cfg = HunccConfig.random(rng, n_links=2)
    bundle = huncc_encrypt(rng.integers(0, 256, (2, 16), dtype=np.uint8), cfg)
    assert np.array_equal(bundle.flat(), np.concatenate([bundle.links[0], bundle.links[1]]))


def test_probe_histograms_match_uniform_case():
    n = 20_000
    fixed = build_pair_dataset(probe_scenario("all_messages"), n, seed=3)
    uniform = build_pair_dataset(huncc_scenario(None), n, seed=3)
    for link in range(8):
        a = np.bincount(fixed.y[:, 16 * link:16 * (link + 1)].ravel(), minlength=256)
        b = np.bincount(uniform.y[:, 16 * link:16 * (link + 1)].ravel(), minlength=256)
        # two-sample chi-square over 256 bins: df = 255, sd = sqrt(2 * 255)
        tot = a + b
        ea = tot * a.sum() / (a.sum() + b.sum())
        eb = tot - ea
        chi2 = np.sum((a - ea) ** 2 / ea + (b - eb) ** 2 / eb)
        assert abs(chi2 - 255) <= 4 * np.sqrt(510)


# ---------------------------------------------------------------------------
# datasets


def test_scheme_none_is_identity():
    ds = build_pair_dataset(PRESETS["none"](), 500, seed=1)
    assert np.array_equal(ds.x, ds.y)
    assert ds.x.shape == (500, 16)


def test_otp_pads_never_repeat():
    ds = build_pair_dataset(PRESETS["otp_with_key"](), 100_000, seed=1)
    pads = ds.y[:, 16:]
    assert np.array_equal(ds.y[:, :16] ^ pads, ds.x)
    assert len({row.tobytes() for row in pads}) == 100_000


def test_huncc_dataset_shapes():
    ds = build_pair_dataset(huncc_scenario(0.5), 50, seed=0)
    assert ds.x.shape == (50, 128) and ds.y.shape == (50, 128)
    probe = build_pair_dataset(probe_scenario(), 50, seed=0)
    assert probe.x.shape == (50, 16) and probe.y.shape == (50, 128)
    assert (probe.x == 0xFF).all()
    assert PRESETS["probe"]().dx + PRESETS["probe"]().dy == 144


def test_huncc_dataset_decrypts_back():
    scn = huncc_scenario(0.1)
    cfg = HunccConfig.random(np.random.default_rng(0))
    ds = build_pair_dataset(scn, 20, huncc_cfg=cfg)
    from cryptomine.huncc import LinkBundle

    links = ds.y.reshape(20, 8, 16)
    out = huncc_decrypt(LinkBundle(links, cfg.encrypted_mask), cfg)
    assert np.array_equal(out.reshape(20, -1), ds.x)


def test_huncc_cfg_mismatch():
    cfg = HunccConfig.random(np.random.default_rng(0), n_links=4)
    with pytest.raises(ValueError):
        build_pair_dataset(huncc_scenario(0.1), 10, huncc_cfg=cfg)
    with pytest.raises(ValueError):
        build_pair_dataset(PRESETS["otp"](), 10, huncc_cfg=cfg)
    with pytest.raises(ValueError):
        build_pair_dataset(PRESETS["otp"](), 0)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_datasets_are_deterministic(name):
    scn = PRESETS[name]()
    a = build_pair_dataset(scn, 5000, seed=9)
    b = build_pair_dataset(scn, 5000, seed=9)
    assert dataset_bytes(a) == dataset_bytes(b)
    c = build_pair_dataset(scn, 5000, seed=10)
    if name != "probe":
        assert dataset_bytes(a) != dataset_bytes(c)


def test_prefix_stable_across_sizes():
    scn = PRESETS["aes128_ctr"]()
    small = build_pair_dataset(scn, 5000, seed=2)
    big = build_pair_dataset(scn, 9000, seed=2)
    assert np.array_equal(small.y, big.y[:5000])


def test_ciphertexts_decrypt_with_scenario_key():
    from cryptomine.huncc import scenario_keys

    scn = PRESETS["aes128_ecb"]().with_seed(4)
    ds = build_pair_dataset(scn, 100)
    key = scenario_keys(scn).material
    assert np.array_equal(ciphers.aes128_ecb_decrypt(ds.y, key.key_bytes), ds.x)


def test_nibble_source():
    ds = build_pair_dataset(PRESETS["nibble_identity"](), 2000, seed=0)
    assert np.array_equal(ds.x, ds.y)
    assert np.unique(ds.x, axis=0).shape[0] == 16
    assert (ds.x == ds.x[:, :1]).all()
    assert ((ds.x[:, 0] >> 4) == (ds.x[:, 0] & 15)).all()


def test_constant_source():
    scn = Scenario(name="c", source=SourceSpec("constant", value=7))
    assert (build_pair_dataset(scn, 10).x == 7).all()


def test_dataset_file_roundtrip(tmp_path):
    ds = build_pair_dataset(PRESETS["xor_repeat"](), 10_000, seed=5)
    path = tmp_path / "d.cmin"
    write_dataset(ds, path)
    raw = path.read_bytes()
    assert raw[:4] == b"CMIN"
    assert raw == dataset_bytes(ds)
    assert int.from_bytes(raw[6:14], "little") == 10_000
    back = read_dataset(path)
    assert np.array_equal(back.x, ds.x) and np.array_equal(back.y, ds.y)
    import hashlib

    assert dataset_digest(ds) == hashlib.sha256(raw).hexdigest()


def test_dataset_file_errors(tmp_path):
    path = tmp_path / "bad.cmin"
    path.write_bytes(b"CM")
    with pytest.raises(ValueError, match="truncated"):
        read_dataset(path)
    ds = Dataset(np.zeros((2, 3), np.uint8), np.zeros((2, 3), np.uint8))
    raw = bytearray(dataset_bytes(ds))
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="CMIN"):
        read_dataset(path)
    path.write_bytes(bytes(raw[:-1]))
    with pytest.raises(ValueError, match="expected"):
        read_dataset(path)
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="version"):
        read_dataset(path)
