"""Paillier additively homomorphic encryption.

Plaintext space Z_N, ciphertext space Z_{N^2}, generator g = N + 1 so that
encryption is (1 + mN) r^N mod N^2.  Ciphertext product decrypts to the
plaintext sum; raising to a scalar multiplies the plaintext.  Decryption
uses the standard CRT split over p^2 and q^2.
"""
from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field

from .rng import CtrRng

VALID_KEY_BITS = (512, 1024, 2048)

_SMALL_PRIMES = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59,
                 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113]


class KeyMismatchError(ValueError):
    pass


def _is_probable_prime(n: int, rng: CtrRng, rounds: int = 40) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = 2 + rng.randbelow(n - 3)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _gen_prime(bits: int, rng: CtrRng, max_tries: int = 40000) -> int:
    for _ in range(max_tries):
        cand = rng.randbits(bits)
        cand |= (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if _is_probable_prime(cand, rng):
            return cand
    raise RuntimeError(f"no {bits}-bit prime found within retry budget")


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    key_id: str = field(compare=False)

    def __init__(self, n: int):
        object.__setattr__(self, "n", n)
        object.__setattr__(
            self,
            "key_id",
            hashlib.sha256(n.to_bytes((n.bit_length() + 7) // 8, "big")).hexdigest()[:16],
        )

    @property
    def n_sq(self) -> int:
        return self.n * self.n

    @property
    def bits(self) -> int:
        return self.n.bit_length()


@dataclass(frozen=True)
class PaillierSecretKey:
    public: PaillierPublicKey
    p: int
    q: int

    def __post_init__(self):
        if self.p * self.q != self.public.n:
            raise ValueError("p*q does not match the public modulus")


@dataclass(frozen=True)
class AheKeypair:
    public: PaillierPublicKey
    secret: PaillierSecretKey


@dataclass(frozen=True)
class Ciphertext:
    value: int
    key_id: str


def keygen(bits: int = 1024, rng_seed: int | bytes | None = None) -> AheKeypair:
    """Generate a Paillier keypair; deterministic when rng_seed is given."""
    if bits not in VALID_KEY_BITS:
        raise ValueError(f"key size must be one of {VALID_KEY_BITS}")
    rng = CtrRng(rng_seed, domain=b"paillier-keygen")
    while True:
        p = _gen_prime(bits // 2, rng)
        q = _gen_prime(bits // 2, rng)
        if p != q and (p * q).bit_length() == bits:
            break
    pub = PaillierPublicKey(p * q)
    return AheKeypair(pub, PaillierSecretKey(pub, p, q))


def encrypt(pk: PaillierPublicKey, m: int,
            rng: CtrRng | None = None) -> Ciphertext:
    """Randomized encryption of m in [0, N)."""
    if not 0 <= m < pk.n:
        raise ValueError("plaintext out of range [0, N)")
    r = rng.randbelow(pk.n - 1) + 1 if rng is not None else secrets.randbelow(pk.n - 1) + 1
    c = (1 + m * pk.n) * pow(r, pk.n, pk.n_sq) % pk.n_sq
    return Ciphertext(c, pk.key_id)


def _crt_half(c: int, prime: int, n: int) -> int:
    # L(x) = (x - 1)/prime over the subgroup mod prime^2, with g = n + 1
    p_sq = prime * prime
    lx = (pow(c % p_sq, prime - 1, p_sq) - 1) // prime
    lg = (pow((1 + n) % p_sq, prime - 1, p_sq) - 1) // prime
    return lx * pow(lg, -1, prime) % prime


def decrypt(sk: PaillierSecretKey, ct: Ciphertext) -> int:
    if ct.key_id != sk.public.key_id:
        raise KeyMismatchError(
            f"ciphertext under key {ct.key_id}, not {sk.public.key_id}"
        )
    n = sk.public.n
    mp = _crt_half(ct.value, sk.p, n)
    mq = _crt_half(ct.value, sk.q, n)
    # combine residues mod p and q
    qinv = pow(sk.q, -1, sk.p)
    return (mq + sk.q * ((mp - mq) * qinv % sk.p)) % n


def _check_same_key(a: Ciphertext, b: Ciphertext) -> None:
    if a.key_id != b.key_id:
        raise KeyMismatchError(f"mixed keys {a.key_id} and {b.key_id}")


def add_ct(pk: PaillierPublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Dec(add_ct) = m1 + m2 mod N."""
    _check_same_key(c1, c2)
    if c1.key_id != pk.key_id:
        raise KeyMismatchError("ciphertexts not under the given public key")
    return Ciphertext(c1.value * c2.value % pk.n_sq, pk.key_id)


def scalar_mul(pk: PaillierPublicKey, c: Ciphertext, k: int) -> Ciphertext:
    """Dec(scalar_mul) = k*m mod N, for 0 <= k < N."""
    if not 0 <= k < pk.n:
        raise ValueError("scalar out of range [0, N)")
    if c.key_id != pk.key_id:
        raise KeyMismatchError("ciphertext not under the given public key")
    return Ciphertext(pow(c.value, k, pk.n_sq), pk.key_id)


def ct_neg(pk: PaillierPublicKey, c: Ciphertext) -> Ciphertext:
    """Dec(ct_neg) = -m mod N.

    Computed as the modular inverse of the ciphertext, which equals
    scalar_mul by N-1; used to strip additive blinding terms.
    """
    if c.key_id != pk.key_id:
        raise KeyMismatchError("ciphertext not under the given public key")
    return Ciphertext(pow(c.value, -1, pk.n_sq), pk.key_id)


def rerandomize(pk: PaillierPublicKey, c: Ciphertext,
                rng: CtrRng | None = None) -> Ciphertext:
    """Fresh encryption of the same plaintext (multiply by Enc(0))."""
    return add_ct(pk, c, encrypt(pk, 0, rng))


# -- wire encodings ----------------------------------------------------------
#
# Big-endian, length-prefixed so that both parties interoperate bit-exactly:
#   public key:  u32 len(N) || N
#   secret key:  u32 len(N) || N || u32 len(p) || p || u32 len(q) || q
#   ciphertext:  fixed width 2*ceil(bits/8) bytes (value mod N^2)


def _lp(v: int) -> bytes:
    raw = v.to_bytes((v.bit_length() + 7) // 8 or 1, "big")
    return len(raw).to_bytes(4, "big") + raw


def _read_lp(buf: bytes, off: int) -> tuple[int, int]:
    ln = int.from_bytes(buf[off:off + 4], "big")
    off += 4
    return int.from_bytes(buf[off:off + ln], "big"), off + ln


def public_key_to_bytes(pk: PaillierPublicKey) -> bytes:
    return _lp(pk.n)


def public_key_from_bytes(raw: bytes) -> PaillierPublicKey:
    n, off = _read_lp(raw, 0)
    if off != len(raw):
        raise ValueError("trailing bytes in public key encoding")
    return PaillierPublicKey(n)


def secret_key_to_bytes(sk: PaillierSecretKey) -> bytes:
    return _lp(sk.public.n) + _lp(sk.p) + _lp(sk.q)


def secret_key_from_bytes(raw: bytes) -> PaillierSecretKey:
    n, off = _read_lp(raw, 0)
    p, off = _read_lp(raw, off)
    q, off = _read_lp(raw, off)
    if off != len(raw):
        raise ValueError("trailing bytes in secret key encoding")
    return PaillierSecretKey(PaillierPublicKey(n), p, q)


def ct_width(pk: PaillierPublicKey) -> int:
    return 2 * ((pk.bits + 7) // 8)


def ct_to_bytes(pk: PaillierPublicKey, c: Ciphertext) -> bytes:
    return c.value.to_bytes(ct_width(pk), "big")


def ct_from_bytes(pk: PaillierPublicKey, raw: bytes) -> Ciphertext:
    return Ciphertext(int.from_bytes(raw, "big"), pk.key_id)
