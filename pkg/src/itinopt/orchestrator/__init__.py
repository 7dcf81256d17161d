"""Gateway, message bus and HTTP front end."""

from .bus import BusEvent, MessageBus, Publisher, Subscription
from .gateway import (
    MODES,
    Gateway,
    MatchingService,
    OptimizeRequest,
    OptimizeResponse,
    PlanSummary,
    SustainabilityService,
)
from .http import GatewayServer

__all__ = [
    "BusEvent",
    "Gateway",
    "GatewayServer",
    "MODES",
    "MatchingService",
    "MessageBus",
    "OptimizeRequest",
    "OptimizeResponse",
    "PlanSummary",
    "Publisher",
    "Subscription",
    "SustainabilityService",
]
