"""The comparison circuits the clustering protocol runs under garbling.

Values handed to these circuits are additively blinded: the evaluator's
inputs are (kappa+1)-bit blinded values, the garbler's are kappa-bit
blinding terms, and every true difference lies in [0, 2**lam).  Because a
low-bit slice of a subtraction depends only on the low bits of its
operands, the circuits operate on the low `lam` bits of each value; the
runner truncates inputs accordingly.  Only re-blinded outputs use the full
kappa+1 width.

Index outputs are 0-based on the wires; the public selection APIs report
1-based positions (the first element is index 1, which also wins ties).
"""
from __future__ import annotations

import functools

import numpy as np

from .builder import Builder, Circuit


def idx_bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


@functools.lru_cache(maxsize=256)
def build_mindist(lam: int, kappa: int, maximum: bool = False) -> Circuit:
    """Re-blinded min (or max) of two secret-shared values.

    Garbler inputs r1, r2 (blinds of u, v) and a fresh blind r'; evaluator
    inputs blinded u, v.  Output, delivered to the evaluator only, is
    min(u - r1, v - r2) + r' over kappa+1 bits.
    """
    if kappa <= lam:
        raise ValueError("kappa must exceed lam")
    b = Builder(garbler_bits=2 * lam + kappa, evaluator_bits=2 * lam)
    r1 = [b.garbler_input(i) for i in range(lam)]
    r2 = [b.garbler_input(lam + i) for i in range(lam)]
    rp = [b.garbler_input(2 * lam + i) for i in range(kappa)]
    u = [b.evaluator_input(i) for i in range(lam)]
    v = [b.evaluator_input(lam + i) for i in range(lam)]
    du = b.sub(u, r1)
    dv = b.sub(v, r2)
    if maximum:
        _, winner = b.max_select(du, dv)
    else:
        _, winner = b.min_select(du, dv)
    out = b.add(winner, rp, width=kappa + 1)
    return b.build(
        out,
        meta={
            "kind": "maxdist" if maximum else "mindist",
            "lam": lam,
            "kappa": kappa,
            "garbler_groups": [("r1", 1, lam), ("r2", 1, lam), ("rp", 1, kappa)],
            "evaluator_groups": [("u", 1, lam), ("v", 1, lam)],
        },
    )


def build_maxdist(lam: int, kappa: int) -> Circuit:
    return build_mindist(lam, kappa, maximum=True)


def _chain_argmin(b: Builder, diffs, index_words):
    val = diffs[0]
    idx = index_words[0]
    for i in range(1, len(diffs)):
        sel, val = b.min_select(val, diffs[i])
        idx = b.mux(sel, idx, index_words[i])
    return idx


def _tree_argmin(b: Builder, diffs, index_words):
    items = list(zip(diffs, index_words))
    while len(items) > 1:
        nxt = []
        for t in range(0, len(items) - 1, 2):
            (va, ia), (vb, ib) = items[t], items[t + 1]
            sel, val = b.min_select(va, vb)
            nxt.append((val, b.mux(sel, ia, ib)))
        if len(items) % 2 == 1:
            nxt.append(items[-1])
        items = nxt
    return items[0][1]


@functools.lru_cache(maxsize=64)
def build_argmin_small(n: int, lam: int, kappa: int, layout: str = "chain") -> Circuit:
    """Reference argmin built gate-by-gate; used for small n and as the
    structural twin of the vectorized builder."""
    if n < 2:
        raise ValueError("argmin needs at least two values")
    nb = idx_bits(n)
    consts: list[int] = []
    for i in range(n):
        consts.extend((i >> j) & 1 for j in range(nb))
    b = Builder(garbler_bits=n * lam, evaluator_bits=n * lam, const_bits=consts)
    diffs = []
    index_words = []
    for i in range(n):
        r = [b.garbler_input(i * lam + j) for j in range(lam)]
        v = [b.evaluator_input(i * lam + j) for j in range(lam)]
        diffs.append(b.sub(v, r))
        index_words.append([b.const_input(i * nb + j) for j in range(nb)])
    fold = _chain_argmin if layout == "chain" else _tree_argmin
    idx = fold(b, diffs, index_words)
    return b.build(
        idx,
        meta={
            "kind": "argmin",
            "n": n,
            "lam": lam,
            "kappa": kappa,
            "layout": layout,
            "idx_bits": nb,
            "garbler_groups": [("r", n, lam)],
            "evaluator_groups": [("v", n, lam)],
        },
    )


# -- vectorized tree argmin ---------------------------------------------------
#
# The same circuit as build_argmin_small(layout="tree") but assembled with
# numpy template replication so construction stays fast for thousands of
# elements.


class _Template:
    """A small builder circuit reused as a stamp; inputs are placeholders."""

    def __init__(self, builder: Builder, outputs: list):
        circ = builder.build(outputs)
        self.n_inputs = circ.n_inputs
        self.n_gates = circ.n_gates
        in0, in1 = circ.in0, circ.in1
        self.src0_internal = in0 >= circ.n_inputs
        self.src1_internal = in1 >= circ.n_inputs
        self.src0 = np.where(self.src0_internal, in0 - circ.n_inputs, in0)
        self.src1 = np.where(self.src1_internal, in1 - circ.n_inputs, in1)
        self.tt = circ.tt
        bounds = circ.level_bounds
        self.level_sizes = np.diff(bounds)
        self.depth = len(self.level_sizes)
        self.out_refs = circ.output_wires  # wire ids in template numbering
        self.out_internal = self.out_refs >= circ.n_inputs
        self.out_idx = np.where(
            self.out_internal, self.out_refs - circ.n_inputs, self.out_refs
        )


@functools.lru_cache(maxsize=16)
def _sub_template(lam: int) -> _Template:
    b = Builder(garbler_bits=lam, evaluator_bits=lam)
    r = [b.garbler_input(i) for i in range(lam)]
    v = [b.evaluator_input(i) for i in range(lam)]
    return _Template(b, b.sub(v, r))


@functools.lru_cache(maxsize=64)
def _combine_template(lam: int, nb: int) -> _Template:
    # inputs: valL, idxL, valR, idxR as generic "garbler" placeholder wires
    b = Builder(garbler_bits=2 * (lam + nb), evaluator_bits=0)
    va = [b.garbler_input(i) for i in range(lam)]
    ia = [b.garbler_input(lam + i) for i in range(nb)]
    vb = [b.garbler_input(lam + nb + i) for i in range(lam)]
    ib = [b.garbler_input(2 * lam + nb + i) for i in range(nb)]
    sel, val = b.min_select(va, vb)
    idx = b.mux(sel, ia, ib)
    return _Template(b, val + idx)


class _Assembler:
    def __init__(self, n_inputs: int):
        self.n_inputs = n_inputs
        self.next_wire = n_inputs
        self.blocks: list[tuple] = []  # (in0, in1, tt, levels) per stage
        self.base_level = 0
        self.gate_count = 0

    def stamp(self, tpl: _Template, input_map: np.ndarray) -> np.ndarray:
        """Stamp tpl once per row of input_map; returns (rows, n_out) wires."""
        m = input_map.shape[0]
        base_w = self.next_wire

        def resolve(src, internal):
            # (T,) template refs -> (T, m) global wires
            out = np.empty((tpl.n_gates, m), dtype=np.int64)
            inp = ~internal
            if inp.any():
                out[inp] = input_map[:, src[inp]].T
            if internal.any():
                out[internal] = (
                    base_w + src[internal][:, None] * m + np.arange(m)[None, :]
                )
            return out

        in0 = resolve(tpl.src0, tpl.src0_internal).ravel()
        in1 = resolve(tpl.src1, tpl.src1_internal).ravel()
        tt = np.repeat(tpl.tt, m)
        tpl_levels = np.repeat(
            np.arange(tpl.depth, dtype=np.int64), tpl.level_sizes
        )
        levels = np.repeat(tpl_levels, m) + self.base_level
        self.blocks.append((in0, in1, tt, levels))
        self.base_level += tpl.depth
        self.next_wire += tpl.n_gates * m
        self.gate_count += tpl.n_gates * m
        outs = np.empty((m, len(tpl.out_refs)), dtype=np.int64)
        for k, (idx, internal) in enumerate(zip(tpl.out_idx, tpl.out_internal)):
            if internal:
                outs[:, k] = base_w + idx * m + np.arange(m)
            else:
                outs[:, k] = input_map[:, idx]
        return outs


def build_argmin(n: int, lam: int, kappa: int, layout: str = "tree") -> Circuit:
    """Index (1-based via the runner) of the minimum of n blinded values."""
    if n < 2:
        raise ValueError("argmin needs at least two values")
    if layout == "chain" or n <= 16:
        return build_argmin_small(n, lam, kappa, layout=layout)
    return _build_argmin_tree(n, lam, kappa)


# big circuits: keep the cache tiny, rebuilds are cheap relative to garbling
@functools.lru_cache(maxsize=8)
def _build_argmin_tree(n: int, lam: int, kappa: int) -> Circuit:
    nb = idx_bits(n)
    n_garbler = n * lam
    n_evaluator = n * lam
    const_bits = np.zeros(n * nb, dtype=np.uint8)
    for i in range(n):
        for j in range(nb):
            const_bits[i * nb + j] = (i >> j) & 1
    n_inputs = n_garbler + n_evaluator + n * nb
    asm = _Assembler(n_inputs)

    # stage 1: n subtractors
    sub_map = np.empty((n, 2 * lam), dtype=np.int64)
    elem = np.arange(n, dtype=np.int64)[:, None]
    sub_map[:, :lam] = elem * lam + np.arange(lam)[None, :]
    sub_map[:, lam:] = n_garbler + elem * lam + np.arange(lam)[None, :]
    vals = asm.stamp(_sub_template(lam), sub_map)  # (n, lam)

    idxs = (
        n_garbler + n_evaluator + elem * nb + np.arange(nb)[None, :]
    )  # (n, nb)

    # tournament stages
    tpl = _combine_template(lam, nb)
    while vals.shape[0] > 1:
        m = vals.shape[0]
        pairs = m // 2
        in_map = np.concatenate(
            [
                vals[0 : 2 * pairs : 2],
                idxs[0 : 2 * pairs : 2],
                vals[1 : 2 * pairs : 2],
                idxs[1 : 2 * pairs : 2],
            ],
            axis=1,
        )
        outs = asm.stamp(tpl, in_map)
        new_vals = outs[:, :lam]
        new_idxs = outs[:, lam:]
        if m % 2 == 1:
            new_vals = np.concatenate([new_vals, vals[-1:]], axis=0)
            new_idxs = np.concatenate([new_idxs, idxs[-1:]], axis=0)
        vals, idxs = new_vals, new_idxs

    in0 = np.concatenate([blk[0] for blk in asm.blocks])
    in1 = np.concatenate([blk[1] for blk in asm.blocks])
    tt = np.concatenate([blk[2] for blk in asm.blocks])
    levels = np.concatenate([blk[3] for blk in asm.blocks])
    # stages emit levels in nondecreasing order already
    marks = np.flatnonzero(np.diff(levels)) + 1
    bounds = np.concatenate(([0], marks, [len(tt)]))
    return Circuit(
        n_wires=n_inputs + len(tt),
        n_inputs=n_inputs,
        garbler_wires=np.arange(0, n_garbler, dtype=np.int64),
        evaluator_wires=np.arange(n_garbler, n_garbler + n_evaluator, dtype=np.int64),
        const_wires=np.arange(n_garbler + n_evaluator, n_inputs, dtype=np.int64),
        const_bits=const_bits,
        in0=in0,
        in1=in1,
        tt=tt.astype(np.uint8),
        level_bounds=bounds.astype(np.int64),
        output_wires=idxs[0],
        meta={
            "kind": "argmin",
            "n": n,
            "lam": lam,
            "kappa": kappa,
            "layout": "tree",
            "idx_bits": nb,
            "comparisons": n - 1,
            "sub_gates": n,
            "garbler_groups": [("r", n, lam)],
            "evaluator_groups": [("v", n, lam)],
        },
    )
