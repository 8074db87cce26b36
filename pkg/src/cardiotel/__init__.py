"""cardiotel: an IoT cardiovascular monitoring kit, re-created in software.

Ships a deterministic device simulator, a path-addressed realtime
telemetry gateway with threshold alerting, a fixed-geometry stream
recorder, and the kit-vs-clinic agreement validation tooling.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AgreementClass,
    AgreementSummary,
    DifferenceRow,
    EcgFeatures,
    Metric,
    ThresholdConfig,
    VitalSample,
    VitalStatus,
    classify_difference,
    classify_sample,
    classify_spo2,
    compare_reading,
    summarize_agreement,
)
