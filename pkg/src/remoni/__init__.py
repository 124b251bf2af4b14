"""remoni: desk-scale remote health monitoring.

Simulated wearables stream accelerometer and vital-sign data to an edge
node that detects falls and vital-sign anomalies and alerts a cloud
service exposing a query/chat API, an alert stream and a clinician UI.
"""

__version__ = "0.1.0"

from .domain import (
    AccelSample,
    Activity,
    Alert,
    AlertKind,
    Emotion,
    FallSource,
    Patient,
    SnapshotRef,
    VitalRanges,
    VitalSample,
)
from .errors import RemoniError, UnknownPatient, ValidationError

__all__ = [
    "AccelSample",
    "Activity",
    "Alert",
    "AlertKind",
    "Emotion",
    "FallSource",
    "Patient",
    "RemoniError",
    "SnapshotRef",
    "UnknownPatient",
    "ValidationError",
    "VitalRanges",
    "VitalSample",
    "__version__",
]
