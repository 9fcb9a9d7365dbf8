from .analytic import analytic_coherence
from .engine import run_sequence, simulate_batch
from .noise import NoiseModel
from .propagation import check_state, propagate_element, pure, su2
from .sequences import PulseElement, PulseSequence, sequence_template

__all__ = [
    "NoiseModel",
    "PulseElement",
    "PulseSequence",
    "analytic_coherence",
    "check_state",
    "propagate_element",
    "pure",
    "run_sequence",
    "sequence_template",
    "simulate_batch",
    "su2",
]
