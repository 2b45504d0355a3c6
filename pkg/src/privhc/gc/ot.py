"""1-out-of-2 oblivious transfer.

A session runs one discrete-log base-OT setup (128 transfers of PRG seeds,
Bellare-Micali style over the 2048-bit MODP group), after which arbitrarily
many label transfers ride on an IKNP-type extension: per batch the receiver
sends one masked bit-matrix and the sender returns masked label pairs, all
hashing done with batched fixed-key AES.

Roles are fixed per context: the garbler is the extension sender (it owns
the label pairs), the evaluator the extension receiver.
"""
from __future__ import annotations

import hashlib
import secrets

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..net import TAGS, Session
from ..rng import CtrRng
from .engine import _aes_pi

K = 128  # extension width / number of base OTs

# RFC 3526 group 14 (2048-bit MODP), generator 2
_P_HEX = (
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF"
)
_P = int(_P_HEX, 16)
_G = 2
_EXP_BITS = 256


def _hash_elem(x: int) -> bytes:
    return hashlib.sha256(x.to_bytes(256, "big")).digest()[:16]


def _prg(seed: bytes, batch: int, nbytes: int) -> np.ndarray:
    iv = batch.to_bytes(16, "big")
    enc = Cipher(algorithms.AES(seed), modes.CTR(iv)).encryptor()
    return np.frombuffer(enc.update(bytes(nbytes)), dtype=np.uint8)


def _hash_rows(rows: np.ndarray, ctr_base: int) -> np.ndarray:
    """Per-row 16-byte correlation-breaking hash H(j, row)."""
    rows = np.ascontiguousarray(rows, dtype=np.uint8)
    blocks = rows.copy()
    lane = blocks[:, :8].view(np.int64).reshape(-1)
    lane ^= ctr_base + np.arange(rows.shape[0], dtype=np.int64)
    return _aes_pi(blocks)


class OtSender:
    """Extension sender (the garbler): holds label pairs per transfer."""

    def __init__(self, session: Session, rng: CtrRng | None = None):
        self.session = session
        rng = rng or CtrRng()
        self._s_bits = np.array(
            [rng.randbits(1) for _ in range(K)], dtype=np.uint8
        )
        self._s_row = np.packbits(self._s_bits)
        self._seeds: list[bytes] | None = None
        self._batch = 0
        self._ctr = 0

    def _base_setup(self) -> None:
        # act as base-OT receiver with choice bits s
        sess = self.session
        c = int.from_bytes(sess.recv_frame(expect=TAGS["OT_MSG1"]).payload, "big")
        ks = []
        pk0s = bytearray()
        rng = CtrRng()
        for i in range(K):
            k = rng.randbits(_EXP_BITS)
            ks.append(k)
            pk_mine = pow(_G, k, _P)
            pk0 = pk_mine if self._s_bits[i] == 0 else c * pow(pk_mine, -1, _P) % _P
            pk0s += pk0.to_bytes(256, "big")
        sess.send_frame(TAGS["OT_MSG2"], bytes(pk0s))
        blob = sess.recv_frame(expect=TAGS["OT_MSG3"]).payload
        seeds = []
        off = 0
        for i in range(K):
            gr0 = int.from_bytes(blob[off:off + 256], "big")
            e0 = blob[off + 256:off + 272]
            gr1 = int.from_bytes(blob[off + 272:off + 528], "big")
            e1 = blob[off + 528:off + 544]
            off += 544
            gr, e = (gr0, e0) if self._s_bits[i] == 0 else (gr1, e1)
            mask = _hash_elem(pow(gr, ks[i], _P))
            seeds.append(bytes(a ^ b for a, b in zip(e, mask)))
        self._seeds = seeds

    def send(self, pairs: np.ndarray) -> None:
        """Transfer pairs (m, 2, 16): receiver learns pairs[j, choice_j]."""
        if self._seeds is None:
            self._base_setup()
        m = pairs.shape[0]
        mb = (m + 7) // 8
        u = np.frombuffer(
            self.session.recv_frame(expect=TAGS["OT_MSG1"]).payload, dtype=np.uint8
        ).reshape(K, mb)
        q_cols = np.empty((K, mb), dtype=np.uint8)
        for i in range(K):
            q_cols[i] = _prg(self._seeds[i], self._batch, mb)
            if self._s_bits[i]:
                q_cols[i] ^= u[i]
        q_bits = np.unpackbits(q_cols, axis=1)[:, :m]  # (K, m)
        q_rows = np.packbits(q_bits.T, axis=1)  # (m, 16)
        h0 = _hash_rows(q_rows, self._ctr)
        h1 = _hash_rows(q_rows ^ self._s_row, self._ctr)
        y0 = pairs[:, 0, :] ^ h0
        y1 = pairs[:, 1, :] ^ h1
        self.session.send_frame(
            TAGS["OT_MSG2"], y0.tobytes() + y1.tobytes()
        )
        self._batch += 1
        self._ctr += m


class OtReceiver:
    """Extension receiver (the evaluator): chooses one label per transfer."""

    def __init__(self, session: Session, rng: CtrRng | None = None):
        self.session = session
        self._rng = rng or CtrRng()
        self._seed_pairs: list[tuple[bytes, bytes]] | None = None
        self._batch = 0
        self._ctr = 0

    def _base_setup(self) -> None:
        sess = self.session
        z = self._rng.randbits(_EXP_BITS)
        c = pow(_G, z, _P)
        sess.send_frame(TAGS["OT_MSG1"], c.to_bytes(256, "big"))
        pk0_blob = sess.recv_frame(expect=TAGS["OT_MSG2"]).payload
        pairs = []
        out = bytearray()
        for i in range(K):
            pk0 = int.from_bytes(pk0_blob[i * 256:(i + 1) * 256], "big")
            pk1 = c * pow(pk0, -1, _P) % _P
            s0, s1 = secrets.token_bytes(16), secrets.token_bytes(16)
            r0 = self._rng.randbits(_EXP_BITS)
            r1 = self._rng.randbits(_EXP_BITS)
            m0 = _hash_elem(pow(pk0, r0, _P))
            m1 = _hash_elem(pow(pk1, r1, _P))
            out += pow(_G, r0, _P).to_bytes(256, "big")
            out += bytes(a ^ b for a, b in zip(s0, m0))
            out += pow(_G, r1, _P).to_bytes(256, "big")
            out += bytes(a ^ b for a, b in zip(s1, m1))
            pairs.append((s0, s1))
        sess.send_frame(TAGS["OT_MSG3"], bytes(out))
        self._seed_pairs = pairs

    def receive(self, choices: np.ndarray) -> np.ndarray:
        """Receive one 16-byte message per choice bit; returns (m, 16)."""
        if self._seed_pairs is None:
            self._base_setup()
        choices = np.asarray(choices, dtype=np.uint8)
        m = len(choices)
        mb = (m + 7) // 8
        r_packed = np.packbits(choices, axis=0)
        t_cols = np.empty((K, mb), dtype=np.uint8)
        u = np.empty((K, mb), dtype=np.uint8)
        for i in range(K):
            s0, s1 = self._seed_pairs[i]
            t_cols[i] = _prg(s0, self._batch, mb)
            u[i] = t_cols[i] ^ _prg(s1, self._batch, mb) ^ r_packed
        self.session.send_frame(TAGS["OT_MSG1"], u.tobytes())
        t_bits = np.unpackbits(t_cols, axis=1)[:, :m]
        t_rows = np.packbits(t_bits.T, axis=1)  # (m, 16)
        blob = self.session.recv_frame(expect=TAGS["OT_MSG2"]).payload
        ys = np.frombuffer(blob, dtype=np.uint8).reshape(2, m, 16)
        h = _hash_rows(t_rows, self._ctr)
        picked = np.where(choices[:, None] == 0, ys[0], ys[1])
        self._batch += 1
        self._ctr += m
        return picked ^ h


def ot_transfer_send(session: Session, pairs, rng: CtrRng | None = None) -> None:
    """Sender side of ot_transfer; context cached on the session."""
    ctx = getattr(session, "_ot_sender", None)
    if ctx is None:
        ctx = OtSender(session, rng)
        session._ot_sender = ctx
    ctx.send(np.asarray(pairs, dtype=np.uint8))


def ot_transfer_recv(session: Session, choices, rng: CtrRng | None = None) -> np.ndarray:
    """Receiver side of ot_transfer; context cached on the session."""
    ctx = getattr(session, "_ot_receiver", None)
    if ctx is None:
        ctx = OtReceiver(session, rng)
        session._ot_receiver = ctx
    return ctx.receive(choices)
