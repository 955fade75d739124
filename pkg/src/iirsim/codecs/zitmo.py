"""ZitMo (Android, second variant) HTTP message codec.

Messages are ``key=value`` pairs joined by ``&``, followed by a positional
tail (update flag, URL list) and the ``&Sign28tepXXX`` terminator. SMS
forwards are sent without the terminator, ending in a bare ``&``. Bodies are
space-padded, AES-128-ECB encrypted under a pre-shared key and Base64 encoded.
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass, field
from urllib.parse import quote_plus, unquote_plus

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

TERMINATOR = "&Sign28tepXXX"
DEFAULT_KEY = "0523850789a8cfed"
SERVICES = ("timer", "login", "sms")

_FIELD_ORDER = {
    "timer": ("login", "phone", "devid", "dd"),
    "login": ("login", "phone", "devid", "dd"),
    "sms": ("text", "number", "login"),
}
_DD_RE = re.compile(r"^[0-9A-F]{8}$")


class ZitmoFormatError(ValueError):
    pass


@dataclass
class ZitMoMessage:
    services: str
    login: str = ""
    phone: str = ""
    devid: str = ""
    dd: str | None = None
    flag: int | None = None
    urls: list[str] | None = None
    text: str | None = None
    number: str | None = None

    def __post_init__(self):
        if self.services not in SERVICES:
            raise ZitmoFormatError(f"unknown service {self.services!r}")
        if self.dd is not None and not _DD_RE.match(self.dd):
            raise ZitmoFormatError(f"dd must be 8 uppercase hex digits, got {self.dd!r}")
        if self.flag not in (None, 0, 1):
            raise ZitmoFormatError(f"flag must be 0 or 1, got {self.flag!r}")
        if self.services == "sms" and (self.flag is not None or self.urls):
            raise ZitmoFormatError("sms messages carry no flag or URL tail")
        if not self.urls:
            self.urls = None
        for name in ("login", "phone", "devid", "number"):
            value = getattr(self, name)
            if value is not None and ("&" in value or "://" in value):
                raise ZitmoFormatError(f"{name} not representable on the wire: {value!r}")
        for url in self.urls or ():
            if "&" in url or url in ("0", "1"):
                raise ZitmoFormatError(f"URL not representable on the wire: {url!r}")


def _field_value(msg: ZitMoMessage, name: str) -> str | None:
    value = getattr(msg, name)
    if name == "login":
        return value or ""
    if name == "text" and value is not None:
        return quote_plus(value)
    return value


def zitmo_format(msg: ZitMoMessage) -> str:
    pairs = [f"services={msg.services}"]
    for name in _FIELD_ORDER[msg.services]:
        value = _field_value(msg, name)
        if value is not None:
            pairs.append(f"{name}={value}")
    if msg.services == "sms":
        return "&".join(pairs) + "&"
    tail = [] if msg.flag is None else [str(msg.flag)]
    tail.extend(msg.urls or ())
    return "&".join(pairs) + "&" + "&".join(tail) + TERMINATOR


def zitmo_parse(text: str) -> ZitMoMessage:
    if text.endswith(TERMINATOR):
        body = text[: -len(TERMINATOR)]
    elif text.startswith("services=sms&") and text.endswith("&"):
        body = text[:-1]
    else:
        raise ZitmoFormatError("missing &Sign28tepXXX terminator")
    if text.startswith("services=sms&") and text.endswith(TERMINATOR):
        # tolerate a terminated sms: "...&login=X&&Sign28tepXXX"
        if not body.endswith("&"):
            raise ZitmoFormatError("malformed sms message")
        body = body[:-1]

    tokens = body.split("&")
    head, _, service = tokens[0].partition("=")
    if head != "services":
        raise ZitmoFormatError("message must start with services=")
    if service not in SERVICES:
        raise ZitmoFormatError(f"unknown service {service!r}")
    order = _FIELD_ORDER[service]

    values: dict[str, str] = {}
    pos = 1
    while pos < len(tokens):
        key, eq, value = tokens[pos].partition("=")
        if not eq or "://" in tokens[pos]:
            break
        if key not in order or key in values:
            raise ZitmoFormatError(f"unknown or repeated field {key!r}")
        values[key] = value
        pos += 1
    if [k for k in order if k in values] != list(values):
        raise ZitmoFormatError("fields out of order")

    tail = tokens[pos:]
    if service == "sms":
        if tail:
            raise ZitmoFormatError(f"unexpected tail {tail!r}")
    elif tail == [""]:
        tail = []
    flag = None
    if tail and tail[0] in ("0", "1"):
        flag = int(tail.pop(0))
    for url in tail:
        if "://" not in url:
            raise ZitmoFormatError(f"unknown field {url!r}")

    text_value = values.get("text")
    return ZitMoMessage(
        services=service,
        login=values.get("login", ""),
        phone=values.get("phone", ""),
        devid=values.get("devid", ""),
        dd=values.get("dd"),
        flag=flag,
        urls=tail or None,
        text=unquote_plus(text_value) if text_value is not None else None,
        number=values.get("number"),
    )


@dataclass
class ZitmoResponse:
    """C&C reply. ``kind`` is ``empty`` (ack), ``nochange`` or ``update``."""

    kind: str
    urls: list[str] = field(default_factory=list)


def format_response(resp: ZitmoResponse) -> str:
    if resp.kind == "empty":
        return TERMINATOR
    if resp.kind == "nochange":
        return "0" + TERMINATOR
    if resp.kind == "update":
        if not resp.urls:
            raise ZitmoFormatError("update response needs at least one URL")
        return "&".join(["1", *resp.urls]) + TERMINATOR
    raise ZitmoFormatError(f"unknown response kind {resp.kind!r}")


def parse_response(text: str) -> ZitmoResponse:
    if not text.endswith(TERMINATOR):
        raise ZitmoFormatError("missing &Sign28tepXXX terminator")
    body = text[: -len(TERMINATOR)]
    if body == "":
        return ZitmoResponse("empty")
    if body == "0":
        return ZitmoResponse("nochange")
    tokens = body.split("&")
    if tokens[0] == "1" and len(tokens) > 1:
        return ZitmoResponse("update", tokens[1:])
    raise ZitmoFormatError(f"malformed response {text!r}")


def _cipher(key16: str | bytes) -> Cipher:
    key = key16.encode("ascii") if isinstance(key16, str) else bytes(key16)
    if len(key) != 16:
        raise ValueError(f"ZitMo key must be 16 bytes, got {len(key)}")
    return Cipher(algorithms.AES(key), modes.ECB())


def space_pad(data: bytes) -> bytes:
    return data + b" " * (-len(data) % 16)


def zitmo_encrypt(key16: str | bytes, plaintext: str) -> str:
    enc = _cipher(key16).encryptor()
    raw = enc.update(space_pad(plaintext.encode("utf-8"))) + enc.finalize()
    return base64.b64encode(raw).decode("ascii")


def zitmo_decrypt(key16: str | bytes, b64text: str) -> str:
    try:
        raw = base64.b64decode(b64text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ZitmoFormatError(f"not valid Base64: {exc}") from None
    if len(raw) % 16:
        raise ZitmoFormatError(f"ciphertext length {len(raw)} is not a multiple of 16")
    dec = _cipher(key16).decryptor()
    plain = dec.update(raw) + dec.finalize()
    try:
        return plain.rstrip(b" ").decode("utf-8")
    except UnicodeDecodeError:
        raise ZitmoFormatError("decrypted body is not UTF-8 (wrong key?)") from None
