"""Confident-region Bayesian optimization for VQE with EMICoRe and PEDT thresholds."""

from .ansatz import AnsatzCircuit, measure_energy, prepare_state, sweep_axis
from .bo import run, run_bo, run_nft_baseline
from .config import RunConfig, config_from_dict, load_config
from .gp import GpModel, KernelParams
from .hamiltonian import PauliHamiltonian, build_heisenberg, build_ising, ground_energy
from .threshold import PedtConstants, ThresholdState

__all__ = [
    "AnsatzCircuit",
    "GpModel",
    "KernelParams",
    "PauliHamiltonian",
    "PedtConstants",
    "RunConfig",
    "ThresholdState",
    "build_heisenberg",
    "build_ising",
    "config_from_dict",
    "ground_energy",
    "load_config",
    "measure_energy",
    "prepare_state",
    "run",
    "run_bo",
    "run_nft_baseline",
    "sweep_axis",
]
