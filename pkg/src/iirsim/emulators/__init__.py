"""Benign C&C traffic generators for Zeus, ZitMo and Emotet."""

from .emotet import EmotetCnc, EmotetTrafficConfig, emotet_traffic
from .http import HttpRequest, HttpResponse, PortAllocator, request_event, response_event
from .zeus import ZeusBotConfig, ZeusCnc, dropper_request, zeus_bot_run
from .zitmo import ZitmoClient, ZitMoClientConfig, ZitmoCnc, zitmo_client_run

__all__ = [
    "EmotetCnc",
    "EmotetTrafficConfig",
    "HttpRequest",
    "HttpResponse",
    "PortAllocator",
    "ZeusBotConfig",
    "ZeusCnc",
    "ZitMoClientConfig",
    "ZitmoClient",
    "ZitmoCnc",
    "dropper_request",
    "emotet_traffic",
    "request_event",
    "response_event",
    "zeus_bot_run",
    "zitmo_client_run",
]
