"""Emotet-style hybrid cookie envelope.

Wire layout, Base64-encoded as one cookie value::

    RSA-OAEP(session_key) || IV (16) || AES-128-CBC(PKCS#7(payload))

The OAEP seed and the CBC IV are derived from the inputs, so sealing is a
pure function of (public key, session key, payload). ``emotet_open`` uses the
stock OAEP decryptor, so the hand-rolled padding is checked against it.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
from pathlib import Path

from cryptography.hazmat.primitives import hashes, padding, serialization
from cryptography.hazmat.primitives.asymmetric import padding as asym_padding
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

_HASH_LEN = 20  # SHA-1, the OAEP hash used by the Windows CryptoAPI default


class EmotetEnvelopeError(ValueError):
    pass


def load_public_key(source: bytes | str | Path | rsa.RSAPublicKey) -> rsa.RSAPublicKey:
    if isinstance(source, rsa.RSAPublicKey):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("-----")):
        source = Path(source).read_bytes()
    if isinstance(source, str):
        source = source.encode("ascii")
    return serialization.load_pem_public_key(source)


def load_private_key(source: bytes | str | Path | rsa.RSAPrivateKey) -> rsa.RSAPrivateKey:
    if isinstance(source, rsa.RSAPrivateKey):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("-----")):
        source = Path(source).read_bytes()
    if isinstance(source, str):
        source = source.encode("ascii")
    return serialization.load_pem_private_key(source, password=None)


def _mgf1(seed: bytes, length: int) -> bytes:
    out = b""
    counter = 0
    while len(out) < length:
        out += hashlib.sha1(seed + counter.to_bytes(4, "big")).digest()
        counter += 1
    return out[:length]


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def oaep_wrap(public_key: rsa.RSAPublicKey, message: bytes, seed: bytes) -> bytes:
    """RSAES-OAEP encryption (SHA-1, MGF1-SHA-1, empty label) with a caller-chosen seed."""
    numbers = public_key.public_numbers()
    k = (numbers.n.bit_length() + 7) // 8
    if len(message) > k - 2 * _HASH_LEN - 2:
        raise EmotetEnvelopeError("message too long for RSA modulus")
    if len(seed) != _HASH_LEN:
        raise ValueError("OAEP seed must be 20 bytes")
    lhash = hashlib.sha1(b"").digest()
    ps = b"\x00" * (k - len(message) - 2 * _HASH_LEN - 2)
    db = lhash + ps + b"\x01" + message
    masked_db = _xor(db, _mgf1(seed, k - _HASH_LEN - 1))
    masked_seed = _xor(seed, _mgf1(masked_db, _HASH_LEN))
    em = int.from_bytes(b"\x00" + masked_seed + masked_db, "big")
    return pow(em, numbers.e, numbers.n).to_bytes(k, "big")


def _oaep():
    return asym_padding.OAEP(
        mgf=asym_padding.MGF1(algorithm=hashes.SHA1()), algorithm=hashes.SHA1(), label=None
    )


def emotet_seal(rsa_public, session_key: bytes, payload: bytes) -> str:
    public_key = load_public_key(rsa_public)
    if len(session_key) != 16:
        raise EmotetEnvelopeError(f"session key must be 16 bytes, got {len(session_key)}")
    if not payload:
        raise EmotetEnvelopeError("payload must be non-empty")
    seed = hashlib.sha1(b"oaep" + session_key + payload).digest()
    wrapped = oaep_wrap(public_key, session_key, seed)
    iv = hashlib.sha256(session_key + payload).digest()[:16]
    padder = padding.PKCS7(128).padder()
    padded = padder.update(payload) + padder.finalize()
    enc = Cipher(algorithms.AES(session_key), modes.CBC(iv)).encryptor()
    body = enc.update(padded) + enc.finalize()
    return base64.b64encode(wrapped + iv + body).decode("ascii")


def emotet_open(rsa_private, cookie_value: str) -> bytes:
    return emotet_open_with_key(rsa_private, cookie_value)[1]


def emotet_open_with_key(rsa_private, cookie_value: str) -> tuple[bytes, bytes]:
    """Open an envelope, returning ``(session_key, payload)``."""
    private_key = load_private_key(rsa_private)
    k = private_key.key_size // 8 + (private_key.key_size % 8 > 0)
    try:
        raw = base64.b64decode(cookie_value, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise EmotetEnvelopeError(f"malformed Base64: {exc}") from None
    if len(raw) < k + 32 or (len(raw) - k - 16) % 16:
        raise EmotetEnvelopeError("envelope has an invalid length")
    wrapped, iv, body = raw[:k], raw[k : k + 16], raw[k + 16 :]
    try:
        session_key = private_key.decrypt(wrapped, _oaep())
    except ValueError:
        raise EmotetEnvelopeError("session key unwrap failed (wrong private key?)") from None
    if len(session_key) != 16:
        raise EmotetEnvelopeError("unwrapped session key is not 16 bytes")
    dec = Cipher(algorithms.AES(session_key), modes.CBC(iv)).decryptor()
    padded = dec.update(body) + dec.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    try:
        payload = unpadder.update(padded) + unpadder.finalize()
    except ValueError:
        raise EmotetEnvelopeError("bad payload padding") from None
    return session_key, payload
