"""Semi-honest Yao garbled circuits with 1-out-of-2 OT, plus the blinded
comparison circuits (argmin, re-blinded min/max) used by the clustering
protocol."""

from .builder import Builder, Circuit, Const
from .circuits import build_argmin, build_argmin_small, build_maxdist, build_mindist, idx_bits
from .engine import EvaluationError, GarbledCircuit, evaluate, garble
from .ot import OtReceiver, OtSender, ot_transfer_recv, ot_transfer_send
from .runner import REVEAL_BOTH, REVEAL_EVALUATOR, GcSession, argmin_result, value_result
from .simulate import bits_to_int, evaluate_clear, int_to_bits, pack_values

__all__ = [
    "Builder",
    "Circuit",
    "Const",
    "build_argmin",
    "build_argmin_small",
    "build_maxdist",
    "build_mindist",
    "idx_bits",
    "EvaluationError",
    "GarbledCircuit",
    "evaluate",
    "garble",
    "OtReceiver",
    "OtSender",
    "ot_transfer_recv",
    "ot_transfer_send",
    "REVEAL_BOTH",
    "REVEAL_EVALUATOR",
    "GcSession",
    "argmin_result",
    "value_result",
    "bits_to_int",
    "evaluate_clear",
    "int_to_bits",
    "pack_values",
]
