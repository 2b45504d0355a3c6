"""Vectorized Yao garbling.

Wire labels are 128-bit tokens; the two labels of a wire differ by a global
offset whose low bit is set, so the low bit of a label doubles as the
point-and-permute select bit and XOR-type gates (XOR, XNOR, NOT) are free:
their output label is the XOR of the input labels and they need no table.

Every other gate gets a four-row table ordered by the input select bits.  A
row is the output label plus an all-zero verifiable-range pad (64 bits,
covering the required 40), double-encrypted in layers: ct = payload XOR
PRF(label_a, 2g) XOR PRF(label_b, 2g+1).  The PRF is fixed-key AES in a
Davies-Meyer arrangement, batched over whole gate chunks, so garbling and
evaluation are array operations end to end.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .builder import Circuit, TT_NOT, TT_XNOR, TT_XOR

LABEL_BYTES = 16
PAD_BYTES = 8  # >= 40 zero bits of verifiable range, kept word-aligned
ROW_BYTES = LABEL_BYTES + PAD_BYTES
_AES_KEY = hashlib.sha256(b"privhc gc row prf").digest()[:16]
_DECODE_KEY = hashlib.sha256(b"privhc gc decode").digest()[:16]
_CHUNK_GATES = 1 << 18


class EvaluationError(RuntimeError):
    """No table row decrypted to a well-formed payload."""


def _ecb(key: bytes):
    return Cipher(algorithms.AES(key), modes.ECB()).encryptor()


def _aes_pi(blocks: np.ndarray, key: bytes = _AES_KEY) -> np.ndarray:
    """AES(fixed key) applied to an (..., 16) uint8 array, Davies-Meyer."""
    flat = np.ascontiguousarray(blocks).reshape(-1, 16)
    enc = _ecb(key).update(flat.tobytes())
    out = np.frombuffer(enc, dtype=np.uint8).reshape(flat.shape).copy()
    out ^= flat
    return out.reshape(blocks.shape)


def _prf24(labels: np.ndarray, tweaks: np.ndarray) -> np.ndarray:
    """ROW_BYTES of PRF output per (label, tweak): two tweaked AES blocks."""
    shape = labels.shape[:-1]
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    blocks = np.empty((n, 2, 16), dtype=np.uint8)
    flat = labels.reshape(n, 16)
    blocks[:, 0] = flat
    blocks[:, 1] = flat
    t = np.broadcast_to(tweaks, shape).reshape(n).astype(np.int64)
    lanes = blocks[:, :, :8].view(np.int64)[..., 0]  # (n, 2) view
    lanes[:, 0] ^= 2 * t
    lanes[:, 1] ^= 2 * t + 1
    out = _aes_pi(blocks).reshape(n, 32)
    return out[:, :ROW_BYTES].reshape(*shape, ROW_BYTES)


def _plan(circuit: Circuit) -> dict:
    """Free/table gate split and per-level slices, cached on the circuit."""
    plan = circuit.meta.get("_engine_plan")
    if plan is not None:
        return plan
    tt = circuit.tt
    is_not = (circuit.in0 == circuit.in1) & (tt == TT_NOT)
    is_free = (tt == TT_XOR) | (tt == TT_XNOR) | is_not
    table_index = np.cumsum(~is_free, dtype=np.int64) - 1  # valid where ~is_free
    levels = []
    b = circuit.level_bounds
    for k in range(len(b) - 1):
        s, e = int(b[k]), int(b[k + 1])
        seg_free = is_free[s:e]
        levels.append((s, e, np.flatnonzero(seg_free) + s, np.flatnonzero(~seg_free) + s))
    plan = {
        "is_free": is_free,
        "is_not": is_not,
        "table_index": table_index,
        "n_table_gates": int((~is_free).sum()),
        "levels": levels,
    }
    circuit.meta["_engine_plan"] = plan
    return plan


@dataclass
class GarbledCircuit:
    tables: np.ndarray           # (n_table_gates, 4, ROW_BYTES) uint8
    decode: np.ndarray           # (n_out, 2, 8) uint8 tag per semantic label
    garbler_pairs: np.ndarray    # (n_garbler, 2, 16)
    evaluator_pairs: np.ndarray  # (n_evaluator, 2, 16)
    const_labels: np.ndarray     # (n_const, 16) active labels for public bits


def _label_tags(labels: np.ndarray) -> np.ndarray:
    """8-byte decode tag per label."""
    return _aes_pi(labels, key=_DECODE_KEY)[..., :8]


def garble(circuit: Circuit, rng: np.random.Generator) -> GarbledCircuit:
    plan = _plan(circuit)
    W = circuit.n_wires
    base = circuit.n_inputs
    delta = np.frombuffer(rng.bytes(16), dtype=np.uint8).copy()
    delta[0] |= 1  # select bits of a pair stay complementary

    labels = np.frombuffer(rng.bytes(W * 16), dtype=np.uint8).reshape(W, 16).copy()
    # free gates derive their zero-label from their inputs, level by level
    is_free, is_not = plan["is_free"], plan["is_not"]
    tt = circuit.tt
    for s, e, free_idx, _ in plan["levels"]:
        if len(free_idx):
            out0 = labels[circuit.in0[free_idx]] ^ labels[circuit.in1[free_idx]]
            xnors = tt[free_idx] == TT_XNOR
            if xnors.any():
                out0[xnors] ^= delta
            nots = is_not[free_idx]
            if nots.any():
                out0[nots] = labels[circuit.in0[free_idx[nots]]] ^ delta
            labels[base + free_idx] = out0

    n_table = plan["n_table_gates"]
    tables = np.empty((n_table, 4, ROW_BYTES), dtype=np.uint8)
    table_gates = np.flatnonzero(~is_free)
    for start in range(0, len(table_gates), _CHUNK_GATES):
        g_idx = table_gates[start:start + _CHUNK_GATES]
        n = len(g_idx)
        a0 = labels[circuit.in0[g_idx]]
        b0 = labels[circuit.in1[g_idx]]
        o0 = labels[base + g_idx]
        perm_a = (a0[:, 0] & 1).astype(np.int64)
        perm_b = (b0[:, 0] & 1).astype(np.int64)
        # label of wire with select bit s is label0 ^ ((s ^ perm) * delta)
        a_sel = np.empty((n, 2, 16), dtype=np.uint8)
        a_sel[:, 0] = np.where((perm_a == 0)[:, None], a0, a0 ^ delta)
        a_sel[:, 1] = a_sel[:, 0] ^ delta
        b_sel = np.empty((n, 2, 16), dtype=np.uint8)
        b_sel[:, 0] = np.where((perm_b == 0)[:, None], b0, b0 ^ delta)
        b_sel[:, 1] = b_sel[:, 0] ^ delta
        g64 = g_idx.astype(np.int64)
        a_prf = _prf24(a_sel, (2 * g64)[:, None])        # (n, 2, ROW_BYTES)
        b_prf = _prf24(b_sel, (2 * g64 + 1)[:, None])
        sa = np.array([0, 0, 1, 1], dtype=np.int64)
        sb = np.array([0, 1, 0, 1], dtype=np.int64)
        xa = sa[None, :] ^ perm_a[:, None]
        xb = sb[None, :] ^ perm_b[:, None]
        out_bit = (circuit.tt[g_idx].astype(np.int64)[:, None] >> (2 * xa + xb)) & 1
        rows = np.zeros((n, 4, ROW_BYTES), dtype=np.uint8)
        rows[:, :, :16] = np.where((out_bit == 1)[:, :, None], (o0 ^ delta)[:, None, :], o0[:, None, :])
        rows ^= a_prf[:, sa, :]
        rows ^= b_prf[:, sb, :]
        tables[plan["table_index"][g_idx]] = rows

    out0 = labels[circuit.output_wires]
    out_pairs = np.stack([out0, out0 ^ delta], axis=1)
    decode = _label_tags(out_pairs)
    g0 = labels[circuit.garbler_wires]
    e0 = labels[circuit.evaluator_wires]
    c0 = labels[circuit.const_wires]
    cbits = circuit.const_bits.astype(bool)
    const_active = c0.copy()
    const_active[cbits] ^= delta
    return GarbledCircuit(
        tables=tables,
        decode=decode,
        garbler_pairs=np.stack([g0, g0 ^ delta], axis=1),
        evaluator_pairs=np.stack([e0, e0 ^ delta], axis=1),
        const_labels=const_active,
    )


def active_input_labels(gc: GarbledCircuit, garbler_bits: np.ndarray) -> np.ndarray:
    idx = np.asarray(garbler_bits, dtype=np.int64)
    return gc.garbler_pairs[np.arange(len(idx)), idx]


def evaluate(circuit: Circuit, tables: np.ndarray,
             garbler_labels: np.ndarray, evaluator_labels: np.ndarray,
             const_labels: np.ndarray) -> np.ndarray:
    """Evaluator side: one active label per input wire -> output labels."""
    plan = _plan(circuit)
    if tables.shape[0] != plan["n_table_gates"]:
        raise ValueError("garbled table blob has the wrong size")
    wires = np.zeros((circuit.n_wires, 16), dtype=np.uint8)
    wires[circuit.garbler_wires] = garbler_labels
    wires[circuit.evaluator_wires] = evaluator_labels
    wires[circuit.const_wires] = const_labels
    base = circuit.n_inputs
    tindex = plan["table_index"]
    for s, e, free_idx, tab_idx in plan["levels"]:
        if len(free_idx):
            nots = plan["is_not"][free_idx]
            out = wires[circuit.in0[free_idx]] ^ wires[circuit.in1[free_idx]]
            if nots.any():
                out[nots] = wires[circuit.in0[free_idx[nots]]]
            wires[base + free_idx] = out
        if len(tab_idx):
            la = wires[circuit.in0[tab_idx]]
            lb = wires[circuit.in1[tab_idx]]
            pos = ((la[:, 0] & 1).astype(np.int64) << 1) | (lb[:, 0] & 1)
            g64 = tab_idx.astype(np.int64)
            mask = _prf24(la, 2 * g64) ^ _prf24(lb, 2 * g64 + 1)
            payload = tables[tindex[tab_idx], pos] ^ mask
            if payload[:, 16:].any():
                raise EvaluationError("row failed verifiable-range check")
            wires[base + tab_idx] = payload[:, :16]
    return wires[circuit.output_wires]


def decode_outputs(decode: np.ndarray, output_labels: np.ndarray) -> np.ndarray:
    """Map output labels to bits via the decode tags."""
    tags = _label_tags(output_labels)
    is0 = (tags == decode[:, 0]).all(axis=1)
    is1 = (tags == decode[:, 1]).all(axis=1)
    if not (is0 | is1).all():
        raise EvaluationError("output label matches neither decode entry")
    return is1.astype(np.uint8)


def table_gate_count(circuit: Circuit) -> int:
    return _plan(circuit)["n_table_gates"]


def serialize_tables(gc: GarbledCircuit) -> bytes:
    return gc.tables.tobytes()


def deserialize_tables(raw: bytes, circuit: Circuit) -> np.ndarray:
    n = table_gate_count(circuit)
    arr = np.frombuffer(raw, dtype=np.uint8)
    if arr.size != n * 4 * ROW_BYTES:
        raise ValueError("garbled table blob has the wrong size")
    return arr.reshape(n, 4, ROW_BYTES)
