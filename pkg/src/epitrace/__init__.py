"""Desk-scale deterministic simulator of a quorum-governed, privacy-preserving
epidemic contact-tracing infrastructure: proximity records at simulated cell
stations, push-only encrypted edge storage, a threshold-crypto data vault, and
a contact-analysis pipeline ending in a who-infected-whom DAG."""

from .records import (
    BsCode,
    PdrSet,
    PhoneId,
    PrecisionClass,
    ProximityDetailRecord,
    ProxVector,
    group_into_sets,
    make_pdr,
)
from .runner import RunReport, attack_suite, run
from .world import GroundTruth, MobilityTrace, ProviderRegistry, ScenarioConfig, generate_world, observe

__all__ = [
    "BsCode",
    "GroundTruth",
    "MobilityTrace",
    "PdrSet",
    "PhoneId",
    "PrecisionClass",
    "ProviderRegistry",
    "ProximityDetailRecord",
    "ProxVector",
    "RunReport",
    "ScenarioConfig",
    "attack_suite",
    "generate_world",
    "group_into_sets",
    "make_pdr",
    "observe",
    "run",
]

__version__ = "0.1.0"
