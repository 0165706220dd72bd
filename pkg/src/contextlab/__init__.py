"""Simulation and analysis of the state-independent Kochen-Specker test on two trapped-ion qubits."""

from contextlab.observables import MerminPeresSquare, PauliObservable, default_square
from contextlab.qcore import GateSequence, QuantumState, prepare_dhv_state, prepare_singlet, state_roster
from contextlab.simkernel import CircuitBackend, DetectionModel, IdealBackend, NoiseModel, NOISE_PROFILES

__version__ = "0.1.0"
