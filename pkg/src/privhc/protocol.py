"""The two-party private clustering protocol.

Three phases over a metered session:

  setup    - three rounds of homomorphic exchange that leave party 1 with
             the encrypted shuffled point list L and the plaintext blinding
             matrix R, and party 2 with the plaintext blinded distance
             matrix B = distances + R, everything permuted by the composite
             of one private shuffle per party;
  cluster  - iterative merging: a garbled argmin over the live blinded
             entries names the pair to merge, then one re-blinded min/max
             comparison per live neighbour refreshes the merged row;
  output   - homomorphic per-cluster coordinate sums and public sizes for
             the surviving target clusters.

The optimized single-linkage variant keeps per-row minima so each round
costs a linear, not quadratic, number of garbled comparisons.

Both parties run the same merge bookkeeping on public information; the
secret state never leaves its owner except blinded, encrypted, or inside a
garbled circuit.
"""
from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ahe
from .gc import (
    REVEAL_BOTH,
    REVEAL_EVALUATOR,
    GcSession,
    argmin_result,
    build_argmin,
    build_maxdist,
    build_mindist,
    pack_values,
    value_result,
)
from .gc.simulate import int_to_bits
from .net import TAGS, Session
from .plainhc import Dendrogram, LinkageKind, MergeStep, lam_bits
from .rng import CtrRng

PROTO_VERSION = 1
_SUM_BYTES = 32  # fixed width of a decrypted coordinate sum on the wire


class ProtocolError(RuntimeError):
    pass


@dataclass
class ProtocolConfig:
    linkage: LinkageKind
    targets: int
    domain_bits: int = 16
    dim: int = 1
    key_bits: int = 512
    seed: int | bytes | None = None
    deterministic_keys: bool = False
    argmin_layout: str = "tree"

    @property
    def lam(self) -> int:
        return lam_bits(self.domain_bits, self.dim)

    @property
    def kappa(self) -> int:
        return self.lam + 40

    def validate(self) -> None:
        if self.targets < 1:
            raise ValueError("target cluster count must be >= 1")
        if self.dim < 1 or self.domain_bits < 1:
            raise ValueError("bad dimension or domain width")
        if self.kappa <= self.lam:
            raise ValueError("kappa must exceed lam")
        # blinded entries must stay below any valid modulus
        if self.kappa + 2 >= self.key_bits - 1:
            raise ValueError("blinded values would overflow the plaintext space")

    def config_hash(self) -> bytes:
        blob = struct.pack(
            ">BB I H H H", PROTO_VERSION,
            1 if self.linkage is LinkageKind.SINGLE else 2,
            self.targets, self.domain_bits, self.dim, self.key_bits,
        )
        return hashlib.sha256(b"privhc-config|" + blob).digest()


@dataclass
class RunResult:
    merges: list[MergeStep]
    sigma: dict
    clusters: list[dict]  # slot, lineage, members, rep_sum, size
    permutation: list[int]  # this party's private shuffle
    timings_ms: dict[str, float]
    comparisons_per_round: list[int]
    n: int

    def dendrogram(self) -> Dendrogram:
        return Dendrogram(
            leaf_count=self.n,
            merges=tuple(self.merges),
            target_clusters=tuple(frozenset(c["members"]) for c in self.clusters),
        )

    def output_multiset(self) -> set:
        return {(tuple(c["rep_sum"]), c["size"]) for c in self.clusters}


# -- shared merge bookkeeping -------------------------------------------------


class MergeBook:
    """Public per-party record of the merging history (the matrix diagonal).

    sigma[slot] follows the protocol's nested encoding: a live slot holds
    (lineage, None); a dead slot holds (lineage, pointer-to-surviving-slot).
    """

    def __init__(self, n: int, weights: list[int]):
        self.n = n
        self.sigma: dict[int, tuple] = {i: (i, None) for i in range(n)}
        self.active: list[int] = list(range(n))
        self.members: dict[int, list[int]] = {i: [i] for i in range(n)}
        self.weights = list(weights)
        self.sizes: dict[int, int] = {i: int(w) for i, w in enumerate(weights)}
        self.merges: list[MergeStep] = []

    def merge(self, i: int, j: int, rnd: int) -> None:
        if i > j:
            i, j = j, i
        old_i, old_j = self.sigma[i], self.sigma[j]
        self.sigma[i] = ((old_i, old_j, rnd), None)
        self.sigma[j] = ((old_j, rnd), i)
        self.active.remove(j)
        self.members[i] = self.members[i] + self.members.pop(j)
        self.sizes[i] += self.sizes.pop(j)
        self.merges.append(MergeStep(round=rnd, left=i, right=j, new=i))

    def drop(self, slot: int) -> None:
        """Remove a live cluster from play (outlier elimination)."""
        self.active.remove(slot)

    def pair_list(self) -> list[tuple[int, int]]:
        act = self.active
        return [(a, b) for ai, a in enumerate(act) for b in act[ai + 1:]]


# -- wire helpers -------------------------------------------------------------


def _ser_cts(pk: ahe.PaillierPublicKey, cts) -> bytes:
    return b"".join(ahe.ct_to_bytes(pk, c) for c in cts)


def _de_cts(pk: ahe.PaillierPublicKey, raw: bytes, count: int) -> list[ahe.Ciphertext]:
    w = ahe.ct_width(pk)
    if len(raw) != count * w:
        raise ProtocolError("ciphertext payload has the wrong size")
    return [ahe.ct_from_bytes(pk, raw[i * w:(i + 1) * w]) for i in range(count)]


def _ser_u32s(vals) -> bytes:
    return struct.pack(f">{len(vals)}I", *vals)


def _tri_index(n: int):
    """(i, j) pairs, i < j, row-major, over the full matrix."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


# -- the parties --------------------------------------------------------------


class _PartyBase:
    def __init__(self, points, config: ProtocolConfig, session: Session,
                 seed: int | bytes | None = None):
        config.validate()
        self.config = config
        self.session = session
        self.points = [tuple(int(v) for v in p) for p in points]
        limit = 1 << config.domain_bits
        for p in self.points:
            if len(p) != config.dim:
                raise ValueError("point dimension differs from configuration")
            if any(not 0 <= v < limit for v in p):
                raise ValueError("coordinate outside the configured domain")
        self.rng = CtrRng(seed if seed is not None else config.seed)
        self.timings: dict[str, float] = {}
        self.comparisons_per_round: list[int] = []
        self.book: Optional[MergeBook] = None
        self.n = 0
        self.weights: list[int] = []

    def _phase(self, name: str):
        self.session.meter.set_phase(name)
        return _Timer(self.timings, name)

    # circuit helpers
    def _argmin_circ(self, m: int):
        return build_argmin(
            m, self.config.lam, self.config.kappa, layout=self.config.argmin_layout
        )

    def _dist_circ(self):
        if self.config.linkage is LinkageKind.COMPLETE:
            return build_maxdist(self.config.lam, self.config.kappa)
        return build_mindist(self.config.lam, self.config.kappa, maximum=False)

    def _lam_mask(self) -> int:
        return (1 << self.config.lam) - 1

    def _sentinel(self) -> int:
        return (1 << self.config.lam) - 1

    def _result(self, clusters) -> RunResult:
        return RunResult(
            merges=self.book.merges,
            sigma=dict(self.book.sigma),
            clusters=clusters,
            permutation=list(self.perm),
            timings_ms=dict(self.timings),
            comparisons_per_round=list(self.comparisons_per_round),
            n=self.n,
        )


class _Timer:
    def __init__(self, book: dict, name: str):
        self.book, self.name = book, name

    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.book[self.name] = self.book.get(self.name, 0.0) + (
            time.monotonic() - self.t0
        ) * 1000.0


class Party1(_PartyBase):
    """Holds P; garbler; ends setup with encrypted points L and blinds R."""

    def __init__(self, points, config, session, seed=None):
        super().__init__(points, config, session, seed)
        if not self.points:
            raise ValueError("party 1 input must be nonempty")
        self.gc = GcSession(session, "garbler", self.rng.child("gc"))
        self.kp = ahe.keygen(
            config.key_bits,
            rng_seed=None if not config.deterministic_keys
            else self.rng.child("key").bytes(32),
        )
        self.peer_pk: Optional[ahe.PaillierPublicKey] = None
        self.L: list[list[ahe.Ciphertext]] = []
        self.R: list[list[int]] = []
        self.perm: list[int] = []

    # -- key exchange ---------------------------------------------------------
    def exchange_keys(self) -> None:
        with self._phase("keys"):
            self.session.handshake(self.config.config_hash())
            payload = struct.pack(">I", len(self.points)) + ahe.public_key_to_bytes(
                self.kp.public
            )
            self.session.send_frame(TAGS["KEYX"], payload)
            frame = self.session.recv_frame(expect=TAGS["KEYX"])
            (n2,) = struct.unpack(">I", frame.payload[:4])
            self.peer_pk = ahe.public_key_from_bytes(frame.payload[4:])
            self.n = len(self.points) + n2
            self.n2 = n2

    # -- setup ----------------------------------------------------------------
    def setup(self, weights: list[int] | None = None) -> None:
        cfg = self.config
        d, n1, n2, n = cfg.dim, len(self.points), self.n2, self.n
        pk2, pk1 = self.peer_pk, self.kp.public
        rng = self.rng.child("setup")
        enc_rng = self.rng.child("enc")
        with self._phase("setup"):
            # round 1: helper info and intra-Q distances from party 2
            h_blob = self.session.recv_chunked(TAGS["SETUP_H"])
            H = _de_cts(pk2, h_blob, 3 * n2 * d)
            d_blob = self.session.recv_chunked(TAGS["SETUP_D"])
            D = _de_cts(pk2, d_blob, n2 * (n2 - 1) // 2)

            def h(which: int, i: int, c: int) -> ahe.Ciphertext:
                return H[(which * n2 + i) * d + c]

            # round 2: assemble, blind, encrypt blinds, permute, send
            L: list[list[ahe.Ciphertext]] = []
            S: list[list[int]] = []
            for i in range(n):
                if i < n1:
                    row = [ahe.encrypt(pk2, v, enc_rng) for v in self.points[i]]
                else:
                    row = [h(0, i - n1, c) for c in range(d)]
                s_row = [rng.randbits(cfg.kappa - 1) for _ in range(d)]
                row = [
                    ahe.add_ct(pk2, ct, ahe.encrypt(pk2, s, enc_rng))
                    for ct, s in zip(row, s_row)
                ]
                L.append(row)
                S.append(s_row)
            S_enc = [
                [ahe.encrypt(pk1, s, enc_rng) for s in s_row] for s_row in S
            ]

            pairs = _tri_index(n)
            dtri = {}
            q_off = n1
            dpos = 0
            for qi in range(n2):
                for qj in range(qi + 1, n2):
                    dtri[(q_off + qi, q_off + qj)] = D[dpos]
                    dpos += 1
            B: dict[tuple[int, int], ahe.Ciphertext] = {}
            for (i, j) in pairs:
                if j < n1:
                    B[(i, j)] = ahe.encrypt(
                        pk2,
                        sum((a - b) ** 2 for a, b in zip(self.points[i], self.points[j])),
                        enc_rng,
                    )
                elif i >= n1:
                    B[(i, j)] = dtri[(i, j)]
                else:
                    p = self.points[i]
                    qj = j - n1
                    acc = ahe.encrypt(pk2, sum(v * v for v in p), enc_rng)
                    for c in range(d):
                        acc = ahe.add_ct(pk2, acc, ahe.scalar_mul(pk2, h(1, qj, c), p[c]))
                        acc = ahe.add_ct(pk2, acc, h(2, qj, c))
                    B[(i, j)] = acc
            Rm: dict[tuple[int, int], int] = {}
            R_enc: dict[tuple[int, int], ahe.Ciphertext] = {}
            for (i, j) in pairs:
                r = rng.randbits(cfg.kappa - 1)
                Rm[(i, j)] = r
                B[(i, j)] = ahe.add_ct(pk2, B[(i, j)], ahe.encrypt(pk2, r, enc_rng))
                R_enc[(i, j)] = ahe.encrypt(pk1, r, enc_rng)

            self.perm = rng.child("perm").permutation(n)
            inv = self.perm
            weights = list(weights) if weights is not None else [1] * n

            def pval(mapping, a, b):
                x, y = inv[a], inv[b]
                return mapping[(x, y) if x < y else (y, x)]

            perm_pairs = _tri_index(n)
            payload = _ser_cts(pk1, [
                S_enc[inv[i]][c] for i in range(n) for c in range(d)
            ]) + _ser_cts(pk2, [
                L[inv[i]][c] for i in range(n) for c in range(d)
            ]) + _ser_cts(pk1, [
                pval(R_enc, a, b) for (a, b) in perm_pairs
            ]) + _ser_cts(pk2, [
                pval(B, a, b) for (a, b) in perm_pairs
            ]) + _ser_u32s([weights[inv[i]] for i in range(n)])
            self.session.send_chunked(TAGS["SETUP_BLINDED"], payload)

            # round 3 return: decrypt accumulated blinds, unblind L
            blob = self.session.recv_chunked(TAGS["SETUP_RETURN"])
            w = ahe.ct_width(pk1)
            w2 = ahe.ct_width(pk2)
            n_tri = len(perm_pairs)
            off = 0
            S_cts = _de_cts(pk1, blob[off:off + n * d * w], n * d)
            off += n * d * w
            L_cts = _de_cts(pk2, blob[off:off + n * d * w2], n * d)
            off += n * d * w2
            R_cts = _de_cts(pk1, blob[off:off + n_tri * w], n_tri)
            off += n_tri * w
            wts = list(struct.unpack(f">{n}I", blob[off:off + 4 * n]))
            self.weights = wts
            S_plain = [ahe.decrypt(self.kp.secret, c) for c in S_cts]
            self.L = []
            for i in range(n):
                row = []
                for c in range(d):
                    ct = L_cts[i * d + c]
                    s = S_plain[i * d + c]
                    row.append(
                        ahe.add_ct(pk2, ct, ahe.ct_neg(pk2, ahe.encrypt(pk2, s, enc_rng)))
                    )
                self.L.append(row)
            self.R = [[0] * n for _ in range(n)]
            for (a, b), ct in zip(perm_pairs, R_cts):
                v = ahe.decrypt(self.kp.secret, ct)
                self.R[a][b] = v
                self.R[b][a] = v
            self.book = MergeBook(n, self.weights)

    # -- clustering -----------------------------------------------------------
    def _run_argmin(self, values: list[int]) -> int:
        mask = self._lam_mask()
        circ = self._argmin_circ(len(values))
        bits = pack_values([v & mask for v in values], self.config.lam)
        out = self.gc.run(circ, bits, REVEAL_BOTH)
        return argmin_result(circ, out)

    def _run_dist_update(self, r_first: int, r_second: int, fresh: int) -> None:
        mask = self._lam_mask()
        circ = self._dist_circ()
        bits = np.concatenate([
            pack_values([r_first & mask, r_second & mask], self.config.lam),
            int_to_bits(fresh, self.config.kappa),
        ])
        self.gc.run(circ, bits, REVEAL_EVALUATOR)

    def cluster(self) -> None:
        cfg = self.config
        book = self.book
        rng = self.rng.child("blinds")
        rounds = len(book.active) - cfg.targets
        if rounds < 0:
            raise ProtocolError("fewer clusters than targets")
        with self._phase("cluster"):
            for rnd in range(rounds):
                base_cmp = self.gc.comparisons
                pairs = book.pair_list()
                if len(pairs) == 1:
                    i, j = pairs[0]
                else:
                    pos = self._run_argmin([self.R[a][b] for (a, b) in pairs])
                    i, j = pairs[pos - 1]
                for k in book.active:
                    if k in (i, j):
                        continue
                    fresh = rng.randbits(cfg.kappa)
                    self._run_dist_update(self.R[i][k], self.R[j][k], fresh)
                    self.R[i][k] = self.R[k][i] = fresh
                for k in range(self.n):
                    self.R[j][k] = self.R[k][j] = 0
                book.merge(i, j, rnd)
                self.comparisons_per_round.append(self.gc.comparisons - base_cmp)

    # -- optimized single-linkage variant --------------------------------------
    def opt_init(self) -> None:
        if self.config.linkage is not LinkageKind.SINGLE:
            raise ProtocolError("row-minimum optimization requires single linkage")
        book = self.book
        with self._phase("optinit"):
            self.row_best: dict[int, int] = {}
            self.row_blind: dict[int, int] = {}
            for i in book.active:
                ks = [k for k in book.active if k != i]
                pos = self._run_argmin([self.R[i][k] for k in ks])
                self.row_best[i] = ks[pos - 1]
                self.row_blind[i] = self.R[i][self.row_best[i]]

    def opt_cluster(self) -> None:
        cfg = self.config
        book = self.book
        rng = self.rng.child("blinds")
        rounds = len(book.active) - cfg.targets
        with self._phase("cluster"):
            for rnd in range(rounds):
                base_cmp = self.gc.comparisons
                act = list(book.active)
                if len(act) == 2:
                    i, j = act[0], act[1]
                else:
                    pos = self._run_argmin([self.row_blind[a] for a in act])
                    i_star = act[pos - 1]
                    j = self.row_best[i_star]
                    i, j = min(i_star, j), max(i_star, j)
                self.row_blind[i] = 0
                self.row_best[i] = None
                for k in act:
                    if k in (i, j):
                        continue
                    fresh = rng.randbits(cfg.kappa)
                    self._run_dist_update(self.R[i][k], self.R[j][k], fresh)
                    self.R[i][k] = self.R[k][i] = fresh
                    for m in (i, k):
                        pos2 = self._run_argmin([fresh, self.row_blind[m]])
                        if pos2 == 1:
                            self.row_blind[m] = fresh
                            self.row_best[m] = k if m == i else i
                for m in act:
                    if m not in (i, j) and self.row_best.get(m) == j:
                        self.row_best[m] = i
                for k in range(self.n):
                    self.R[j][k] = self.R[k][j] = 0
                self.row_best.pop(j, None)
                self.row_blind.pop(j, None)
                book.merge(i, j, rnd)
                self.comparisons_per_round.append(self.gc.comparisons - base_cmp)

    def repair_rows_after_drop(self, dropped: set[int]) -> None:
        """Rebuild row minima that pointed at eliminated clusters."""
        book = self.book
        for m in book.active:
            if self.row_best.get(m) in dropped:
                ks = [k for k in book.active if k != m]
                if not ks:
                    self.row_best[m] = None
                    self.row_blind[m] = 0
                    continue
                pos = self._run_argmin([self.R[m][k] for k in ks])
                self.row_best[m] = ks[pos - 1]
                self.row_blind[m] = self.R[m][self.row_best[m]]

    # -- output ---------------------------------------------------------------
    def output(self) -> RunResult:
        cfg = self.config
        pk2 = self.peer_pk
        book = self.book
        with self._phase("output"):
            slots = sorted(book.active)
            sums: list[ahe.Ciphertext] = []
            sizes = []
            for s in slots:
                for c in range(cfg.dim):
                    acc = self.L[book.members[s][0]][c]
                    for leaf in book.members[s][1:]:
                        acc = ahe.add_ct(pk2, acc, self.L[leaf][c])
                    sums.append(acc)
                sizes.append(book.sizes[s])
            payload = struct.pack(">I", len(slots)) + _ser_u32s(slots) + _ser_u32s(
                sizes
            ) + _ser_cts(pk2, sums)
            self.session.send_frame(TAGS["OUT_SUMS"], payload)
            plain = self.session.recv_frame(expect=TAGS["OUT_PLAINS"]).payload
            vals = []
            for t in range(len(slots) * cfg.dim):
                vals.append(
                    int.from_bytes(plain[t * _SUM_BYTES:(t + 1) * _SUM_BYTES], "big")
                )
            clusters = [
                {
                    "slot": s,
                    "lineage": book.sigma[s],
                    "members": list(book.members[s]),
                    "rep_sum": tuple(vals[t * cfg.dim:(t + 1) * cfg.dim]),
                    "size": sizes[t],
                }
                for t, s in enumerate(slots)
            ]
        return self._result(clusters)


class Party2(_PartyBase):
    """Holds Q; evaluator; ends setup with the blinded distance matrix B."""

    def __init__(self, points, config, session, seed=None):
        super().__init__(points, config, session, seed)
        if not self.points:
            raise ValueError("party 2 input must be nonempty")
        self.gc = GcSession(session, "evaluator", self.rng.child("gc"))
        self.kp = ahe.keygen(
            config.key_bits,
            rng_seed=None if not config.deterministic_keys
            else self.rng.child("key").bytes(32),
        )
        self.peer_pk: Optional[ahe.PaillierPublicKey] = None
        self.B: list[list[int]] = []
        self.perm: list[int] = []

    def exchange_keys(self) -> None:
        with self._phase("keys"):
            self.session.handshake(self.config.config_hash())
            frame = self.session.recv_frame(expect=TAGS["KEYX"])
            (n1,) = struct.unpack(">I", frame.payload[:4])
            self.peer_pk = ahe.public_key_from_bytes(frame.payload[4:])
            payload = struct.pack(">I", len(self.points)) + ahe.public_key_to_bytes(
                self.kp.public
            )
            self.session.send_frame(TAGS["KEYX"], payload)
            self.n = len(self.points) + n1
            self.n1 = n1

    def setup(self) -> None:
        cfg = self.config
        d, n1, n2, n = cfg.dim, self.n1, len(self.points), self.n
        pk2, pk1 = self.kp.public, self.peer_pk
        rng = self.rng.child("setup")
        enc_rng = self.rng.child("enc")
        with self._phase("setup"):
            # round 1: helper triples per coordinate and intra-Q distances
            N = pk2.n
            H: list[ahe.Ciphertext] = []
            for which in range(3):
                for q in self.points:
                    for c in range(d):
                        if which == 0:
                            m = q[c]
                        elif which == 1:
                            m = (N - 2 * q[c]) % N
                        else:
                            m = q[c] * q[c]
                        H.append(ahe.encrypt(pk2, m, enc_rng))
            self.session.send_chunked(TAGS["SETUP_H"], _ser_cts(pk2, H))
            D = [
                ahe.encrypt(
                    pk2,
                    sum((a - b) ** 2 for a, b in zip(self.points[i], self.points[j])),
                    enc_rng,
                )
                for i in range(n2)
                for j in range(i + 1, n2)
            ]
            self.session.send_chunked(TAGS["SETUP_D"], _ser_cts(pk2, D))

            # round 2 payload from party 1
            blob = self.session.recv_chunked(TAGS["SETUP_BLINDED"])
            w1, w2 = ahe.ct_width(pk1), ahe.ct_width(pk2)
            pairs = _tri_index(n)
            n_tri = len(pairs)
            off = 0
            S_cts = _de_cts(pk1, blob[off:off + n * d * w1], n * d)
            off += n * d * w1
            L_cts = _de_cts(pk2, blob[off:off + n * d * w2], n * d)
            off += n * d * w2
            R_cts = _de_cts(pk1, blob[off:off + n_tri * w1], n_tri)
            off += n_tri * w1
            B_cts = _de_cts(pk2, blob[off:off + n_tri * w2], n_tri)
            off += n_tri * w2
            weights = list(struct.unpack(f">{n}I", blob[off:off + 4 * n]))

            # round 3: re-blind everything, decrypt B, permute, return
            half_bits = cfg.kappa - 1
            S_out, L_out = [], []
            for t in range(n * d):
                s_extra = rng.randbits(half_bits)
                L_out.append(
                    ahe.add_ct(pk2, L_cts[t], ahe.encrypt(pk2, s_extra, enc_rng))
                )
                S_out.append(
                    ahe.add_ct(pk1, S_cts[t], ahe.encrypt(pk1, s_extra, enc_rng))
                )
            B_plain = {}
            R_out = {}
            for (a, b), r_ct, b_ct in zip(pairs, R_cts, B_cts):
                r_extra = rng.randbits(half_bits)
                B_plain[(a, b)] = ahe.decrypt(self.kp.secret, b_ct) + r_extra
                R_out[(a, b)] = ahe.add_ct(
                    pk1, r_ct, ahe.encrypt(pk1, r_extra, enc_rng)
                )
            self.perm = rng.child("perm").permutation(n)
            inv = self.perm

            def pv(mapping, a, b):
                x, y = inv[a], inv[b]
                return mapping[(x, y) if x < y else (y, x)]

            payload = _ser_cts(pk1, [
                S_out[inv[i] * d + c] for i in range(n) for c in range(d)
            ]) + _ser_cts(pk2, [
                L_out[inv[i] * d + c] for i in range(n) for c in range(d)
            ]) + _ser_cts(pk1, [
                pv(R_out, a, b) for (a, b) in pairs
            ]) + _ser_u32s([weights[inv[i]] for i in range(n)])
            self.session.send_chunked(TAGS["SETUP_RETURN"], payload)
            self.weights = [weights[inv[i]] for i in range(n)]
            sent = self._sentinel()
            self.B = [[sent] * n for _ in range(n)]
            for (a, b) in pairs:
                v = pv(B_plain, a, b)
                self.B[a][b] = v
                self.B[b][a] = v
            self.book = MergeBook(n, self.weights)

    def _run_argmin(self, values: list[int]) -> int:
        mask = self._lam_mask()
        circ = self._argmin_circ(len(values))
        bits = pack_values([v & mask for v in values], self.config.lam)
        out = self.gc.run(circ, bits, REVEAL_BOTH)
        return argmin_result(circ, out)

    def _run_dist_update(self, b_first: int, b_second: int) -> int:
        mask = self._lam_mask()
        circ = self._dist_circ()
        bits = pack_values([b_first & mask, b_second & mask], self.config.lam)
        out = self.gc.run(circ, bits, REVEAL_EVALUATOR)
        return value_result(out)

    def cluster(self) -> None:
        cfg = self.config
        book = self.book
        rounds = len(book.active) - cfg.targets
        if rounds < 0:
            raise ProtocolError("fewer clusters than targets")
        sent = self._sentinel()
        with self._phase("cluster"):
            for rnd in range(rounds):
                base_cmp = self.gc.comparisons
                pairs = book.pair_list()
                if len(pairs) == 1:
                    i, j = pairs[0]
                else:
                    pos = self._run_argmin([self.B[a][b] for (a, b) in pairs])
                    i, j = pairs[pos - 1]
                for k in book.active:
                    if k in (i, j):
                        continue
                    y = self._run_dist_update(self.B[i][k], self.B[j][k])
                    self.B[i][k] = self.B[k][i] = y
                for k in range(self.n):
                    self.B[j][k] = self.B[k][j] = sent
                book.merge(i, j, rnd)
                self.comparisons_per_round.append(self.gc.comparisons - base_cmp)

    def opt_init(self) -> None:
        if self.config.linkage is not LinkageKind.SINGLE:
            raise ProtocolError("row-minimum optimization requires single linkage")
        book = self.book
        with self._phase("optinit"):
            self.row_best: dict[int, int] = {}
            self.row_blinded: dict[int, int] = {}
            for i in book.active:
                ks = [k for k in book.active if k != i]
                pos = self._run_argmin([self.B[i][k] for k in ks])
                self.row_best[i] = ks[pos - 1]
                self.row_blinded[i] = self.B[i][self.row_best[i]]

    def opt_cluster(self) -> None:
        cfg = self.config
        book = self.book
        rounds = len(book.active) - cfg.targets
        sent = self._sentinel()
        with self._phase("cluster"):
            for rnd in range(rounds):
                base_cmp = self.gc.comparisons
                act = list(book.active)
                if len(act) == 2:
                    i, j = act[0], act[1]
                else:
                    pos = self._run_argmin([self.row_blinded[a] for a in act])
                    i_star = act[pos - 1]
                    j = self.row_best[i_star]
                    i, j = min(i_star, j), max(i_star, j)
                self.row_blinded[i] = sent
                self.row_best[i] = None
                for k in act:
                    if k in (i, j):
                        continue
                    y = self._run_dist_update(self.B[i][k], self.B[j][k])
                    self.B[i][k] = self.B[k][i] = y
                    for m in (i, k):
                        pos2 = self._run_argmin([y, self.row_blinded[m]])
                        if pos2 == 1:
                            self.row_blinded[m] = y
                            self.row_best[m] = k if m == i else i
                for m in act:
                    if m not in (i, j) and self.row_best.get(m) == j:
                        self.row_best[m] = i
                for k in range(self.n):
                    self.B[j][k] = self.B[k][j] = sent
                self.row_best.pop(j, None)
                self.row_blinded.pop(j, None)
                book.merge(i, j, rnd)
                self.comparisons_per_round.append(self.gc.comparisons - base_cmp)

    def repair_rows_after_drop(self, dropped: set[int]) -> None:
        book = self.book
        sent = self._sentinel()
        for m in book.active:
            if self.row_best.get(m) in dropped:
                ks = [k for k in book.active if k != m]
                if not ks:
                    self.row_best[m] = None
                    self.row_blinded[m] = sent
                    continue
                pos = self._run_argmin([self.B[m][k] for k in ks])
                self.row_best[m] = ks[pos - 1]
                self.row_blinded[m] = self.B[m][self.row_best[m]]

    def output(self) -> RunResult:
        cfg = self.config
        book = self.book
        with self._phase("output"):
            payload = self.session.recv_frame(expect=TAGS["OUT_SUMS"]).payload
            (count,) = struct.unpack(">I", payload[:4])
            off = 4
            slots = list(struct.unpack(f">{count}I", payload[off:off + 4 * count]))
            off += 4 * count
            sizes = list(struct.unpack(f">{count}I", payload[off:off + 4 * count]))
            off += 4 * count
            cts = _de_cts(self.kp.public, payload[off:], count * cfg.dim)
            vals = [ahe.decrypt(self.kp.secret, c) for c in cts]
            self.session.send_frame(
                TAGS["OUT_PLAINS"],
                b"".join(v.to_bytes(_SUM_BYTES, "big") for v in vals),
            )
            clusters = [
                {
                    "slot": s,
                    "lineage": book.sigma[s],
                    "members": list(book.members[s]),
                    "rep_sum": tuple(vals[t * cfg.dim:(t + 1) * cfg.dim]),
                    "size": sizes[t],
                }
                for t, s in enumerate(slots)
            ]
        return self._result(clusters)


# -- convenience: run both parties over an in-process channel -----------------


def run_joint(p_points, q_points, config: ProtocolConfig,
              seed1=None, seed2=None, optimized: bool = False,
              sessions: tuple[Session, Session] | None = None):
    """Run the full protocol across threads; returns (result1, result2,
    party1, party2)."""
    import threading

    from .net import channel_pair

    s1, s2 = sessions if sessions is not None else channel_pair()
    out: dict = {}
    err: list = []

    def side1():
        try:
            p1 = Party1(p_points, config, s1, seed=seed1)
            p1.exchange_keys()
            p1.setup()
            if optimized:
                p1.opt_init()
                p1.opt_cluster()
            else:
                p1.cluster()
            out["r1"] = p1.output()
            out["p1"] = p1
        except Exception as e:  # noqa: BLE001
            err.append(e)

    def side2():
        try:
            p2 = Party2(q_points, config, s2, seed=seed2)
            p2.exchange_keys()
            p2.setup()
            if optimized:
                p2.opt_init()
                p2.opt_cluster()
            else:
                p2.cluster()
            out["r2"] = p2.output()
            out["p2"] = p2
        except Exception as e:  # noqa: BLE001
            err.append(e)

    t = threading.Thread(target=side1)
    t.start()
    side2()
    t.join()
    if err:
        raise err[0]
    return out["r1"], out["r2"], out["p1"], out["p2"]
