"""Two-party execution of a garbled circuit over a session.

The garbler garbles, ships tables plus its own and the public-constant
active labels, and serves the evaluator's labels through OT.  The
evaluator decrypts its way through the tables and decodes the outputs;
depending on the circuit's reveal mode it either returns the bits to the
garbler or keeps them private.
"""
from __future__ import annotations

import struct

import numpy as np

from ..net import TAGS, Session
from ..rng import CtrRng
from . import engine
from .builder import Circuit
from .ot import OtReceiver, OtSender

REVEAL_BOTH = "both"
REVEAL_EVALUATOR = "evaluator"


class GcSession:
    """Per-connection state for one party: OT context plus counters."""

    def __init__(self, session: Session, role: str, rng: CtrRng | None = None):
        if role not in ("garbler", "evaluator"):
            raise ValueError("role must be 'garbler' or 'evaluator'")
        self.session = session
        self.role = role
        self.rng = rng or CtrRng()
        self._label_rng = np.random.default_rng(self.rng.child("labels").seed32())
        if role == "garbler":
            self.ot = OtSender(session, self.rng.child("ot"))
        else:
            self.ot = OtReceiver(session, self.rng.child("ot"))
        self.comparisons = 0
        self.gc_runs = 0

    def run(self, circuit: Circuit, my_bits, reveal: str = REVEAL_BOTH):
        """Execute one garbled circuit; returns output bits or None.

        The garbler gets bits back only in REVEAL_BOTH mode; the evaluator
        always learns the output (REVEAL_EVALUATOR keeps it private).
        """
        self.comparisons += circuit.meta.get("comparisons", 0)
        self.gc_runs += 1
        bits = np.asarray(my_bits, dtype=np.uint8)
        if self.role == "garbler":
            return self._run_garbler(circuit, bits, reveal)
        return self._run_evaluator(circuit, bits, reveal)

    def _run_garbler(self, circuit: Circuit, bits, reveal):
        if len(bits) != len(circuit.garbler_wires):
            raise ValueError("wrong garbler input width")
        gc = engine.garble(circuit, self._label_rng)
        header = struct.pack(
            ">QQ", engine.table_gate_count(circuit), len(circuit.output_wires)
        )
        self.session.send_chunked(
            TAGS["GC_TABLES"], header + engine.serialize_tables(gc)
        )
        my_labels = engine.active_input_labels(gc, bits)
        self.session.send_frame(
            TAGS["GC_LABELS"],
            my_labels.tobytes() + gc.const_labels.tobytes() + gc.decode.tobytes(),
        )
        if len(circuit.evaluator_wires):
            self.ot.send(gc.evaluator_pairs)
        if reveal == REVEAL_BOTH:
            payload = self.session.recv_frame(expect=TAGS["GC_OUTPUT"]).payload
            out = np.frombuffer(payload, dtype=np.uint8)
            if len(out) != len(circuit.output_wires):
                raise ValueError("bad output bit count from evaluator")
            return out
        return None

    def _run_evaluator(self, circuit: Circuit, bits, reveal):
        if len(bits) != len(circuit.evaluator_wires):
            raise ValueError("wrong evaluator input width")
        blob = self.session.recv_chunked(TAGS["GC_TABLES"])
        n_tables, n_out = struct.unpack(">QQ", blob[:16])
        if n_tables != engine.table_gate_count(circuit) or n_out != len(
            circuit.output_wires
        ):
            raise ValueError("garbled circuit shape mismatch")
        tables = engine.deserialize_tables(blob[16:], circuit)
        frame = self.session.recv_frame(expect=TAGS["GC_LABELS"]).payload
        ng = len(circuit.garbler_wires)
        nc = len(circuit.const_wires)
        garbler_labels = np.frombuffer(frame[: ng * 16], dtype=np.uint8).reshape(ng, 16)
        const_labels = np.frombuffer(
            frame[ng * 16: (ng + nc) * 16], dtype=np.uint8
        ).reshape(nc, 16)
        decode = np.frombuffer(frame[(ng + nc) * 16:], dtype=np.uint8).reshape(
            n_out, 2, 8
        )
        if len(bits):
            my_labels = self.ot.receive(bits)
        else:
            my_labels = np.zeros((0, 16), dtype=np.uint8)
        out_labels = engine.evaluate(
            circuit, tables, garbler_labels, my_labels, const_labels
        )
        out_bits = engine.decode_outputs(decode, out_labels)
        if reveal == REVEAL_BOTH:
            self.session.send_frame(TAGS["GC_OUTPUT"], out_bits.tobytes())
        return out_bits


def argmin_result(circuit: Circuit, out_bits) -> int:
    """1-based position of the minimum from an argmin circuit's output."""
    return int(sum(int(b) << i for i, b in enumerate(out_bits))) + 1


def value_result(out_bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(out_bits)))
