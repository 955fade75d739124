"""Zeus 2.x network blob codec: chained-XOR obfuscation followed by RC4."""

from __future__ import annotations

from ._backend import rc4_crypt, rc4_ksa, visual_decode, visual_encode


def _as_bytes(value: bytes | str) -> bytes:
    return value.encode("utf-8") if isinstance(value, str) else bytes(value)


def rc4(key: bytes | str, data: bytes) -> bytes:
    """Standard RC4 keystream XOR. Applying it twice with the same key is the identity."""
    key = _as_bytes(key)
    if not 1 <= len(key) <= 256:
        raise ValueError(f"RC4 key must be 1..256 bytes, got {len(key)}")
    return rc4_crypt(key, bytes(data))


def key_schedule(key: bytes | str) -> bytes:
    """The 256-byte RC4 state permutation after the key-scheduling pass."""
    key = _as_bytes(key)
    if not 1 <= len(key) <= 256:
        raise ValueError(f"RC4 key must be 1..256 bytes, got {len(key)}")
    return bytes(rc4_ksa(key))


def zeus_visual_encode(data: bytes) -> bytes:
    return visual_encode(bytes(data))


def zeus_visual_decode(data: bytes) -> bytes:
    return visual_decode(bytes(data))


def zeus_seal(key: bytes | str, payload: bytes) -> bytes:
    return rc4(key, zeus_visual_encode(payload))


def zeus_open(key: bytes | str, blob: bytes) -> bytes:
    # No integrity tag on the wire, so any blob "opens".
    return zeus_visual_decode(rc4(key, blob))
