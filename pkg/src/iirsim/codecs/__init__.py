"""Wire-format codecs for the Zeus, ZitMo and Emotet C&C protocols."""

from ._backend import BACKEND
from .crc import crc32_hex, url_list_crc
from .emotet import (
    EmotetEnvelopeError,
    emotet_open,
    emotet_open_with_key,
    emotet_seal,
    load_private_key,
    load_public_key,
)
from .zeus import key_schedule, rc4, zeus_open, zeus_seal, zeus_visual_decode, zeus_visual_encode
from .zitmo import (
    DEFAULT_KEY as ZITMO_KEY,
    TERMINATOR as ZITMO_TERMINATOR,
    ZitmoFormatError,
    ZitMoMessage,
    ZitmoResponse,
    format_response as zitmo_format_response,
    parse_response as zitmo_parse_response,
    zitmo_decrypt,
    zitmo_encrypt,
    zitmo_format,
    zitmo_parse,
)

__all__ = [
    "BACKEND",
    "EmotetEnvelopeError",
    "ZITMO_KEY",
    "ZITMO_TERMINATOR",
    "ZitMoMessage",
    "ZitmoFormatError",
    "ZitmoResponse",
    "crc32_hex",
    "emotet_open",
    "emotet_open_with_key",
    "emotet_seal",
    "key_schedule",
    "load_private_key",
    "load_public_key",
    "rc4",
    "url_list_crc",
    "zeus_open",
    "zeus_seal",
    "zeus_visual_decode",
    "zeus_visual_encode",
    "zitmo_decrypt",
    "zitmo_encrypt",
    "zitmo_format",
    "zitmo_format_response",
    "zitmo_parse",
    "zitmo_parse_response",
]
