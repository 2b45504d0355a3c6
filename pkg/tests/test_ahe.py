import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privhc import ahe
from privhc.rng import CtrRng


@pytest.fixture(scope="module")
def kp():
    return ahe.keygen(512, rng_seed=1234)


@pytest.fixture(scope="module")
def kp_other():
    return ahe.keygen(512, rng_seed=4321)


class TestKeygen:
    def test_deterministic_per_seed(self):
        a = ahe.keygen(512, rng_seed=7)
        b = ahe.keygen(512, rng_seed=7)
        assert a.public.n == b.public.n
        assert a.secret.p == b.secret.p

    def test_modulus_bit_length(self):
        # paper's configuration uses a 1024-bit public modulus
        kp = ahe.keygen(1024, rng_seed=5)
        assert kp.public.n.bit_length() == 1024

    def test_invalid_size(self):
        with pytest.raises(ValueError):
            ahe.keygen(768)

    def test_roundtrip_many(self, kp):
        rng = random.Random(99)
        for _ in range(1000):
            m = rng.randrange(kp.public.n)
            assert ahe.decrypt(kp.secret, ahe.encrypt(kp.public, m)) == m


class TestEncryptDecrypt:
    def test_zero(self, kp):
        assert ahe.decrypt(kp.secret, ahe.encrypt(kp.public, 0)) == 0

    def test_randomized(self, kp):
        c1 = ahe.encrypt(kp.public, 42)
        c2 = ahe.encrypt(kp.public, 42)
        assert c1.value != c2.value
        assert ahe.decrypt(kp.secret, c1) == ahe.decrypt(kp.secret, c2) == 42

    def test_out_of_range(self, kp):
        with pytest.raises(ValueError):
            ahe.encrypt(kp.public, kp.public.n)
        with pytest.raises(ValueError):
            ahe.encrypt(kp.public, -1)

    def test_wrong_key_flagged(self, kp, kp_other):
        ct = ahe.encrypt(kp.public, 9)
        with pytest.raises(ahe.KeyMismatchError):
            ahe.decrypt(kp_other.secret, ct)

    def test_seeded_encryption_deterministic(self, kp):
        c1 = ahe.encrypt(kp.public, 7, rng=CtrRng(1, domain=b"t"))
        c2 = ahe.encrypt(kp.public, 7, rng=CtrRng(1, domain=b"t"))
        assert c1 == c2


class TestHomomorphism:
    def test_basic_add(self, kp):
        c = ahe.add_ct(kp.public, ahe.encrypt(kp.public, 3), ahe.encrypt(kp.public, 4))
        assert ahe.decrypt(kp.secret, c) == 7

    def test_scalar_zero(self, kp):
        c = ahe.scalar_mul(kp.public, ahe.encrypt(kp.public, 5), 0)
        assert ahe.decrypt(kp.secret, c) == 0

    def test_negation_by_n_minus_1(self, kp):
        n = kp.public.n
        rng = random.Random(5)
        for _ in range(20):
            m = rng.randrange(n)
            c = ahe.scalar_mul(kp.public, ahe.encrypt(kp.public, m), n - 1)
            assert ahe.decrypt(kp.secret, c) == (n - m) % n

    def test_ct_neg_matches_scalar_negation(self, kp):
        n = kp.public.n
        c = ahe.encrypt(kp.public, 1234567)
        via_inv = ahe.decrypt(kp.secret, ahe.ct_neg(kp.public, c))
        via_pow = ahe.decrypt(kp.secret, ahe.scalar_mul(kp.public, c, n - 1))
        assert via_inv == via_pow == (n - 1234567) % n

    def test_blinding_removal(self, kp):
        # Dec(Enc(a+s) * Enc(s)^(N-1)) = a whenever a+s < N
        rng = random.Random(17)
        for _ in range(50):
            a = rng.getrandbits(77)
            s = rng.getrandbits(76)
            blinded = ahe.encrypt(kp.public, a + s)
            c = ahe.add_ct(
                kp.public, blinded, ahe.ct_neg(kp.public, ahe.encrypt(kp.public, s))
            )
            assert ahe.decrypt(kp.secret, c) == a

    def test_add_property_1000_trials(self, kp):
        rng = random.Random(31337)
        n = kp.public.n
        for _ in range(1000):
            m1, m2 = rng.randrange(n), rng.randrange(n)
            c = ahe.add_ct(
                kp.public, ahe.encrypt(kp.public, m1), ahe.encrypt(kp.public, m2)
            )
            assert ahe.decrypt(kp.secret, c) == (m1 + m2) % n

    def test_scalar_property_1000_trials(self, kp):
        rng = random.Random(2718)
        n = kp.public.n
        for _ in range(1000):
            m, k = rng.randrange(n), rng.randrange(n)
            c = ahe.scalar_mul(kp.public, ahe.encrypt(kp.public, m), k)
            assert ahe.decrypt(kp.secret, c) == m * k % n

# hypothesis draws cannot depend on pytest fixtures; use a module-level key
_KP = ahe.keygen(512, rng_seed=808)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=_KP.public.n - 1),
       st.integers(min_value=0, max_value=_KP.public.n - 1))
def test_homomorphic_add_property(m1, m2):
    c = ahe.add_ct(
        _KP.public, ahe.encrypt(_KP.public, m1), ahe.encrypt(_KP.public, m2)
    )
    assert ahe.decrypt(_KP.secret, c) == (m1 + m2) % _KP.public.n


class TestRerandomize:
    def test_preserves_plaintext_changes_bytes(self, kp):
        c = ahe.encrypt(kp.public, 555)
        c2 = ahe.rerandomize(kp.public, c)
        assert c2.value != c.value
        assert ahe.decrypt(kp.secret, c2) == 555

    def test_key_mismatch(self, kp, kp_other):
        c = ahe.encrypt(kp.public, 1)
        with pytest.raises(ahe.KeyMismatchError):
            ahe.add_ct(kp_other.public, c, c)


class TestSerialization:
    def test_public_roundtrip(self, kp):
        raw = ahe.public_key_to_bytes(kp.public)
        pk = ahe.public_key_from_bytes(raw)
        assert pk == kp.public
        assert pk.key_id == kp.public.key_id

    def test_secret_roundtrip(self, kp):
        raw = ahe.secret_key_to_bytes(kp.secret)
        sk = ahe.secret_key_from_bytes(raw)
        assert sk == kp.secret
        ct = ahe.encrypt(kp.public, 77)
        assert ahe.decrypt(sk, ct) == 77

    def test_ciphertext_fixed_width_roundtrip(self, kp):
        ct = ahe.encrypt(kp.public, 31415)
        raw = ahe.ct_to_bytes(kp.public, ct)
        assert len(raw) == ahe.ct_width(kp.public)
        back = ahe.ct_from_bytes(kp.public, raw)
        assert back == ct
