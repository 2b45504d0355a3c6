"""Independent cleartext circuit evaluator.

Gate-by-gate integer evaluation of a Circuit; shares nothing with the
garbling engine and is the oracle every garbled execution is checked
against.
"""
from __future__ import annotations

import numpy as np

from .builder import Circuit


def evaluate_clear(circuit: Circuit, garbler_bits, evaluator_bits) -> np.ndarray:
    wires = np.zeros(circuit.n_wires, dtype=np.uint8)
    gb = np.asarray(garbler_bits, dtype=np.uint8)
    eb = np.asarray(evaluator_bits, dtype=np.uint8)
    if len(gb) != len(circuit.garbler_wires):
        raise ValueError("wrong garbler input width")
    if len(eb) != len(circuit.evaluator_wires):
        raise ValueError("wrong evaluator input width")
    wires[circuit.garbler_wires] = gb
    wires[circuit.evaluator_wires] = eb
    wires[circuit.const_wires] = circuit.const_bits
    base = circuit.n_inputs
    in0, in1, tt = circuit.in0, circuit.in1, circuit.tt
    for g in range(circuit.n_gates):
        a = wires[in0[g]]
        b = wires[in1[g]]
        wires[base + g] = (tt[g] >> (2 * a + b)) & 1
    return wires[circuit.output_wires]


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> i) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


def pack_values(values, width: int) -> np.ndarray:
    """Element-major, LSB-first bit layout used by the word circuits."""
    if width <= 63:
        try:
            v = np.asarray([int(x) for x in values], dtype=np.int64)
        except OverflowError:
            v = None
        if v is not None and (v >= 0).all():
            shifts = np.arange(width, dtype=np.int64)
            return ((v[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()
    out = np.empty(len(values) * width, dtype=np.uint8)
    for i, v in enumerate(values):
        v = int(v)
        for j in range(width):
            out[i * width + j] = (v >> j) & 1
    return out
