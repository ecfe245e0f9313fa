"""Mutual-information neural estimation for plaintext/ciphertext pairs.

Submodules: ``gf256`` (field arithmetic, network coding), ``ciphers``,
``sources`` (plaintext generators, entropy, LZW), ``huncc`` (partial-encryption
pipeline and datasets), ``mine`` (the estimator), ``oracle`` (exact MI) and
``harness`` (experiments).
"""
from .harness import Report, individual_secrecy_probe, run_scenario, sweep_alpha
from .mine import Dataset, MineConfig, train
from .scenarios import Scenario, SourceSpec, SweepSpec

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "MineConfig",
    "Report",
    "Scenario",
    "SourceSpec",
    "SweepSpec",
    "individual_secrecy_probe",
    "run_scenario",
    "sweep_alpha",
    "train",
]
