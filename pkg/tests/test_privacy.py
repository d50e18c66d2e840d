from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fedgraph.errors import ConfigError, ContractViolation, IntegrityError, MissingKeyError, RingOverflowError
from fedgraph.privacy import (
    ADVANCED,
    LITERAL,
    DPNoiseConfig,
    PaillierKeypair,
    PrivacyLedger,
    add_ciphertexts,
    clip_update,
    compose_budget,
    decrypt,
    decrypt_vector,
    encrypt,
    encrypt_vector,
    gaussian_mechanism,
    noise_sigma,
    paillier_keygen,
    reconstruct,
    secure_sum,
    share,
)
from fedgraph.privacy.secagg import FRAC_BITS

QUANT = 2.0 ** -FRAC_BITS


def _sigma_oracle(S, eps, delta):
    mpmath.mp.dps = 50
    return (mpmath.mpf(S) / mpmath.mpf(eps)) * mpmath.sqrt(2 * mpmath.log(mpmath.mpf("1.25") / mpmath.mpf(delta)))


# --- clipping ---------------------------------------------------------------------

def test_clip_examples():
    v = np.array([0.3, 0.4])
    np.testing.assert_array_equal(clip_update(v, 1.0), v)  # norm S/2
    np.testing.assert_allclose(clip_update([3.0, 4.0], 1.0), [0.6, 0.8], atol=1e-15)
    np.testing.assert_array_equal(clip_update(np.zeros(3), 1.0), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(1e-3, 1e3))
def test_clip_norm_bound_and_idempotence(values, S):
    out = clip_update(np.array(values), S)
    assert np.linalg.norm(out) <= S * (1 + 1e-12)
    np.testing.assert_allclose(clip_update(out, S), out, rtol=1e-12, atol=0)


def test_clip_rejects_nonpositive_norm():
    with pytest.raises(ConfigError):
        clip_update([1.0], 0.0)


# --- noise calibration ------------------------------------------------------------------

@pytest.mark.parametrize("eps,expected", [(1.0, 4.84475), (10.0, 0.484475)])
def test_noise_sigma_against_high_precision(eps, expected):
    s = noise_sigma(1.0, eps, 1e-5)
    assert abs(s - float(_sigma_oracle(1, eps, 1e-5))) <= 1e-12
    assert abs(s - expected) <= 1e-4 * (1 if eps == 1.0 else 0.1)


def test_noise_sigma_linear_in_clip():
    assert noise_sigma(2.0, 0.5, 1e-5) == pytest.approx(2 * noise_sigma(1.0, 0.5, 1e-5), rel=1e-15)


def test_zero_override_is_identity():
    v = np.array([0.2, -0.1])
    out = gaussian_mechanism(v, DPNoiseConfig(1.0, 1.0, 1e-5, sigma_override=0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(out, v)


def test_empirical_noise_std():
    cfg = DPNoiseConfig(1.0, 1.0, 1e-5, sigma_override=1.0)
    noisy = gaussian_mechanism(np.zeros(1_000_000), cfg, np.random.default_rng(3))
    assert abs(noisy.std() - 1.0) <= 0.005


def test_mechanism_seeded_and_contract():
    cfg = DPNoiseConfig(1.0, 2.0, 1e-5)
    v = np.array([0.1, 0.2, 0.3])
    a = gaussian_mechanism(v, cfg, np.random.default_rng(5))
    b = gaussian_mechanism(v, cfg, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ContractViolation):
        gaussian_mechanism(np.array([3.0, 4.0]), cfg, np.random.default_rng(0))


# --- accounting -----------------------------------------------------------------------

def _ledger(T, eps=1.0, delta=1e-5, q=1.0, mode=ADVANCED):
    led = PrivacyLedger(mode)
    for t in range(T):
        led.record(t, eps, delta, q)
    return led


def test_single_round_advanced():
    eps, d, mode = compose_budget(_ledger(1, eps=0.5))
    assert eps == pytest.approx(0.5 * math.sqrt(2 * math.log(1e5)), rel=1e-14)
    assert d == 1e-5 and mode == ADVANCED


def test_hundred_rounds_advanced():
    eps, d, _ = compose_budget(_ledger(100))
    mpmath.mp.dps = 50
    oracle = mpmath.sqrt(2 * 100 * mpmath.log(mpmath.mpf(10) ** 5))
    assert abs(eps - float(oracle)) <= 1e-10
    assert abs(eps - 47.99) <= 0.01
    assert d == pytest.approx(1e-3, rel=1e-12)


def test_literal_bound_reported_as_is():
    eps, d, mode = compose_budget(_ledger(100, q=0.01, mode=LITERAL))
    # sqrt(T q) eps + q T eps / delta
    assert eps == pytest.approx(math.sqrt(100 * 0.01) + 0.01 * 100 / 1e-5, rel=1e-14)
    assert mode == LITERAL


def test_empty_ledger():
    with pytest.raises(ConfigError):
        compose_budget(PrivacyLedger())


# --- secret sharing ---------------------------------------------------------------------

def test_single_share_roundtrip():
    v = np.array([0.25, -3.5, 7.0])
    np.testing.assert_allclose(reconstruct(share(v, 1, np.random.default_rng(0))), v, atol=QUANT)


def test_three_shares_roundtrip():
    out = reconstruct(share([1.5, -2.0], 3, np.random.default_rng(1)))
    np.testing.assert_allclose(out, [1.5, -2.0], atol=QUANT)


def test_secure_sum_matches_plain_sum():
    rng = np.random.default_rng(2)
    vecs = [rng.normal(scale=10, size=50) for _ in range(3)]
    total, sent = secure_sum(vecs, rng)
    assert np.max(np.abs(total - np.sum(vecs, axis=0))) <= 3 * QUANT
    sets = [share(v, 3, rng) for v in vecs]
    assert np.max(np.abs(reconstruct(sets) - np.sum(vecs, axis=0))) <= 3 * QUANT
    assert sent > 0


def test_partial_shares_look_uniform():
    # the top 4 bits of one client's first K-1 shares should be uniform over 16 buckets
    sh = share(np.zeros(20_000), 3, np.random.default_rng(4)).shares[:2]
    buckets = (sh >> np.uint64(60)).astype(np.int64).ravel()
    counts = np.bincount(buckets, minlength=16)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_ring_overflow():
    with pytest.raises(RingOverflowError):
        share([2.0 ** 40], 2, np.random.default_rng(0))


# --- Paillier ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def keypair():
    return paillier_keygen(512, np.random.default_rng(2024))


def test_key_shape(keypair):
    n = keypair.public.n
    assert n.bit_length() == 512
    assert keypair.secret.p * keypair.secret.q == n and keypair.secret.p != keypair.secret.q
    assert keypair.public.g == n + 1


def test_encrypt_zero(keypair):
    rng = np.random.default_rng(0)
    assert decrypt(keypair, encrypt(keypair.public, 0, rng)) == 0


def test_toy_primes():
    kp = PaillierKeypair.from_primes(5, 7)
    rng = np.random.default_rng(1)
    c = add_ciphertexts(kp.public, encrypt(kp.public, 2, rng), encrypt(kp.public, 3, rng))
    assert decrypt(kp, c) == 5
    # the same sum by direct modular arithmetic: (1 + 5 n) r^n mod n^2 decrypts to 5
    n, n2 = 35, 1225
    c_direct = (1 + 5 * n) * pow(2, n, n2) % n2
    assert decrypt(kp, c_direct) == 5


def test_randomized_encryption(keypair):
    rng = np.random.default_rng(3)
    assert encrypt(keypair.public, 42, rng) != encrypt(keypair.public, 42, rng)


def test_homomorphism_thousand_pairs(keypair):
    rng = np.random.default_rng(4)
    n = keypair.public.n
    for _ in range(1000):
        m1 = int.from_bytes(rng.bytes(64), "big") % n
        m2 = int.from_bytes(rng.bytes(64), "big") % n
        c = add_ciphertexts(keypair.public, encrypt(keypair.public, m1, rng), encrypt(keypair.public, m2, rng))
        assert decrypt(keypair, c) == (m1 + m2) % n


def test_message_out_of_range(keypair):
    with pytest.raises(ConfigError):
        encrypt(keypair.public, keypair.public.n, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        encrypt(keypair.public, -1, np.random.default_rng(0))


def test_missing_secret_and_tampering(keypair):
    rng = np.random.default_rng(5)
    blocks = encrypt_vector(keypair.public, [1.0, -2.0, 3.25], rng)
    with pytest.raises(MissingKeyError):
        decrypt(keypair.public_only(), blocks[0][1])
    cnt, c = blocks[0]
    tampered = [(cnt, add_ciphertexts(keypair.public, c, encrypt(keypair.public, 1, rng)))]
    with pytest.raises(IntegrityError):
        decrypt_vector(keypair, tampered)
    np.testing.assert_allclose(decrypt_vector(keypair, blocks), [1.0, -2.0, 3.25], atol=QUANT)
