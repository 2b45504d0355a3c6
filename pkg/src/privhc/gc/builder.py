"""Boolean circuit construction.

Circuits are DAGs of 2-input gates with arbitrary 4-entry truth tables,
built from word-level operations (add, subtract, compare, multiplex,
constants).  Gates are stored level-sorted so both garbling and evaluation
can run vectorized; wire ids are canonical: inputs first, then one output
wire per gate in storage order.

Truth table convention: `tt` is a 4-bit integer whose bit (2*a + b) is the
output for input bits (a, b).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TT_XOR = 0b0110
TT_XNOR = 0b1001
TT_AND = 0b1000
TT_OR = 0b1110
TT_NOT = 0b0001  # wired as gate(x, x): rows 00 and 11 are the reachable ones
TT_ANDNOT_A = 0b0010  # (not a) and b
TT_ANDNOT_B = 0b0100  # a and (not b)


@dataclass(frozen=True)
class Const:
    v: int


ZERO, ONE = Const(0), Const(1)

Bit = "int | Const"  # wire id or folded constant


@dataclass
class Circuit:
    n_wires: int
    n_inputs: int
    garbler_wires: np.ndarray
    evaluator_wires: np.ndarray
    const_wires: np.ndarray
    const_bits: np.ndarray
    in0: np.ndarray
    in1: np.ndarray
    tt: np.ndarray
    level_bounds: np.ndarray  # gate index boundaries; level k = [b[k], b[k+1])
    output_wires: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_gates(self) -> int:
        return len(self.tt)

    @property
    def n_levels(self) -> int:
        return len(self.level_bounds) - 1

    def output_wire_of_gate(self, g: int) -> int:
        return self.n_inputs + g


class Builder:
    """Incremental circuit builder with constant folding."""

    def __init__(self, garbler_bits: int, evaluator_bits: int,
                 const_bits: list[int] | None = None):
        self.n_garbler = garbler_bits
        self.n_evaluator = evaluator_bits
        self.consts = list(const_bits or [])
        self.n_inputs = garbler_bits + evaluator_bits + len(self.consts)
        self.in0: list[int] = []
        self.in1: list[int] = []
        self.tts: list[int] = []
        self.levels: list[int] = []
        self._wire_level: dict[int, int] = {}
        self.meta: dict = {}

    # wire id helpers -------------------------------------------------------
    def garbler_input(self, i: int) -> int:
        assert 0 <= i < self.n_garbler
        return i

    def evaluator_input(self, i: int) -> int:
        assert 0 <= i < self.n_evaluator
        return self.n_garbler + i

    def const_input(self, i: int) -> int:
        assert 0 <= i < len(self.consts)
        return self.n_garbler + self.n_evaluator + i

    def _level(self, w: int) -> int:
        return self._wire_level.get(w, 0)

    # gate emission ---------------------------------------------------------
    def gate(self, tt: int, a, b):
        if isinstance(a, Const) and isinstance(b, Const):
            return Const((tt >> (2 * a.v + b.v)) & 1)
        if isinstance(a, Const):
            f0 = (tt >> (2 * a.v + 0)) & 1
            f1 = (tt >> (2 * a.v + 1)) & 1
            return self._unary(f0, f1, b)
        if isinstance(b, Const):
            f0 = (tt >> (0 + b.v)) & 1
            f1 = (tt >> (2 + b.v)) & 1
            return self._unary(f0, f1, a)
        if a == b:
            f0 = tt & 1
            f1 = (tt >> 3) & 1
            if (f0, f1) == (0, 1):
                return a
            if f0 == f1:
                return Const(f0)
            tt = TT_NOT  # canonical form for diagonal inverters
        g = len(self.tts)
        self.in0.append(a)
        self.in1.append(b)
        self.tts.append(tt)
        lvl = max(self._level(a), self._level(b)) + 1
        self.levels.append(lvl)
        w = self.n_inputs + g
        self._wire_level[w] = lvl
        return w

    def _unary(self, f0: int, f1: int, x):
        if f0 == f1:
            return Const(f0)
        if (f0, f1) == (0, 1):
            return x
        return self.gate(TT_NOT, x, x)

    def xor(self, a, b):
        return self.gate(TT_XOR, a, b)

    def and_(self, a, b):
        return self.gate(TT_AND, a, b)

    def or_(self, a, b):
        return self.gate(TT_OR, a, b)

    def not_(self, a):
        return self._unary(1, 0, a)

    # word-level operations (LSB-first bit vectors) --------------------------
    @staticmethod
    def const_word(value: int, width: int) -> list:
        return [Const((value >> i) & 1) for i in range(width)]

    @staticmethod
    def zext(bits: list, width: int) -> list:
        return list(bits) + [ZERO] * (width - len(bits))

    def add(self, xs, ys, width: int | None = None, carry_in=ZERO):
        """Ripple-carry addition of two words, truncated to `width`."""
        w = width if width is not None else max(len(xs), len(ys))
        xs, ys = self.zext(xs, w), self.zext(ys, w)
        carry = carry_in
        out = []
        for i in range(w):
            p = self.xor(xs[i], ys[i])
            out.append(self.xor(p, carry))
            if i + 1 < w:
                g = self.and_(xs[i], ys[i])
                carry = self.or_(g, self.and_(p, carry))
        return out

    def sub(self, xs, ys, width: int | None = None):
        """Ripple-borrow subtraction xs - ys mod 2**width."""
        w = width if width is not None else max(len(xs), len(ys))
        xs, ys = self.zext(xs, w), self.zext(ys, w)
        borrow = ZERO
        out = []
        for i in range(w):
            x_y = self.xor(xs[i], ys[i])
            out.append(self.xor(x_y, borrow))
            if i + 1 < w:
                gen = self.gate(TT_ANDNOT_A, xs[i], ys[i])  # (not x) and y
                keep = self.gate(TT_ANDNOT_A, x_y, borrow)  # (not x_y) and borrow
                borrow = self.or_(gen, keep)
        self.meta["sub_gates"] = self.meta.get("sub_gates", 0) + 1
        return out

    def less_than(self, xs, ys):
        """Strict xs < ys via a balanced (eq, lt) block-reduction tree."""
        assert len(xs) == len(ys)
        pairs = []  # LSB-first list of (block-equal, block-less) bits
        for x, y in zip(xs, ys):
            eq = self.gate(TT_XNOR, x, y)
            lt = self.gate(TT_ANDNOT_A, x, y)
            pairs.append((eq, lt))
        while len(pairs) > 1:
            nxt = []
            for t in range(0, len(pairs) - 1, 2):
                lo, hi = pairs[t], pairs[t + 1]
                eq = self.and_(hi[0], lo[0])
                lt = self.or_(hi[1], self.and_(hi[0], lo[1]))
                nxt.append((eq, lt))
            if len(pairs) % 2 == 1:
                nxt.append(pairs[-1])  # leftover stays most significant
            pairs = nxt
        return pairs[0][1]

    def mux(self, sel, xs, ys):
        """Word select: xs when sel == 0, ys when sel == 1."""
        w = max(len(xs), len(ys))
        xs, ys = self.zext(xs, w), self.zext(ys, w)
        out = []
        for x, y in zip(xs, ys):
            d = self.xor(x, y)
            out.append(self.xor(x, self.and_(sel, d)))
        return out

    def min_select(self, a_bits, b_bits):
        """(selector, min word): selector 0 means the first value is smaller
        (ties keep the first)."""
        sel = self.less_than(b_bits, a_bits)
        self.meta["comparisons"] = self.meta.get("comparisons", 0) + 1
        return sel, self.mux(sel, a_bits, b_bits)

    def max_select(self, a_bits, b_bits):
        """(selector, max word): ties keep the first."""
        sel = self.less_than(a_bits, b_bits)
        self.meta["comparisons"] = self.meta.get("comparisons", 0) + 1
        return sel, self.mux(sel, a_bits, b_bits)

    # finalize ---------------------------------------------------------------
    def build(self, output_bits: list, meta: dict | None = None) -> Circuit:
        for b in output_bits:
            if isinstance(b, Const):
                raise ValueError("constant circuit output; nothing to garble")
        order = np.argsort(np.asarray(self.levels, dtype=np.int64), kind="stable")
        g_count = len(self.tts)
        remap = np.empty(self.n_inputs + g_count, dtype=np.int64)
        remap[: self.n_inputs] = np.arange(self.n_inputs)
        remap[self.n_inputs + order] = self.n_inputs + np.arange(g_count)
        in0 = remap[np.asarray(self.in0, dtype=np.int64)][order]
        in1 = remap[np.asarray(self.in1, dtype=np.int64)][order]
        tts = np.asarray(self.tts, dtype=np.uint8)[order]
        levels = np.asarray(self.levels, dtype=np.int64)[order]
        bounds = [0]
        if g_count:
            marks = np.flatnonzero(np.diff(levels)) + 1
            bounds = [0, *marks.tolist(), g_count]
        full_meta = dict(self.meta)
        full_meta.update(meta or {})
        return Circuit(
            n_wires=self.n_inputs + g_count,
            n_inputs=self.n_inputs,
            garbler_wires=np.arange(0, self.n_garbler, dtype=np.int64),
            evaluator_wires=np.arange(
                self.n_garbler, self.n_garbler + self.n_evaluator, dtype=np.int64
            ),
            const_wires=np.arange(
                self.n_garbler + self.n_evaluator, self.n_inputs, dtype=np.int64
            ),
            const_bits=np.asarray(self.consts, dtype=np.uint8),
            in0=in0,
            in1=in1,
            tt=tts,
            level_bounds=np.asarray(bounds, dtype=np.int64),
            output_wires=np.asarray(
                [remap[b] for b in output_bits], dtype=np.int64
            ),
            meta=full_meta,
        )
