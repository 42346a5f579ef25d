"""Finite-size decoy-state BB84 analysis toolkit.

Statistical bounds on photon-number-resolved event counts, secure-key-length
calculation, universal hashing for verification and privacy amplification, a
fixed-length protocol state machine, a photon-tagged Monte Carlo simulator
that validates every bound against ground truth, and parameter optimization.
"""

from .decoy import BasisStats, DecoyBounds, EpsilonLedger, Intensities
from .errors import ConfigError, EstimateUnavailable, NoAdmissibleKey
from .keylength import AcceptanceSet, EpsilonBudget, KeyLengthReport
from .protocol import ObservedStats, ProtocolParams, RunRecord
from .simulator import ChannelModel, OracleTruth

__all__ = [
    "AcceptanceSet",
    "BasisStats",
    "ChannelModel",
    "ConfigError",
    "DecoyBounds",
    "EpsilonBudget",
    "EpsilonLedger",
    "EstimateUnavailable",
    "Intensities",
    "KeyLengthReport",
    "NoAdmissibleKey",
    "ObservedStats",
    "OracleTruth",
    "ProtocolParams",
    "RunRecord",
]

__version__ = "0.1.0"
