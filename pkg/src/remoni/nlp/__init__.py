from .engine import AssistantResponse, DataPlan, EndpointPrompt, Engine, plan
from .intent import IntentRecord, LlmSchemaError, MissingPatient, detect_intent
from .llm_client import ChatClient, LlmUnavailable, MllmUnavailable, TokenBucket
from .metrics import LengthMismatch, evaluate_recognition
from .plotting import EmptyData, PlotSpec, make_plot
from .recognize import RecognitionResult, recognize

__all__ = [
    "AssistantResponse",
    "ChatClient",
    "DataPlan",
    "EmptyData",
    "EndpointPrompt",
    "Engine",
    "IntentRecord",
    "LengthMismatch",
    "LlmSchemaError",
    "LlmUnavailable",
    "MissingPatient",
    "MllmUnavailable",
    "PlotSpec",
    "RecognitionResult",
    "TokenBucket",
    "detect_intent",
    "evaluate_recognition",
    "make_plot",
    "plan",
    "recognize",
]
