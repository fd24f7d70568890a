"""Software receiver: acquisition, tracking and the streaming engine."""
from .acquisition import AcquisitionError, AcquisitionResult, acquire, refine_doppler
from .engine import Receiver, ReceiverOutput
from .tracking import (JitterReport, JitterThresholds, LoopParams, TrackingChannel, estimate_cn0, jitter_report,
                       track_step)

__all__ = ["AcquisitionError", "AcquisitionResult", "acquire", "refine_doppler", "Receiver", "ReceiverOutput",
           "JitterReport", "JitterThresholds", "LoopParams", "TrackingChannel", "estimate_cn0", "jitter_report",
           "track_step"]
