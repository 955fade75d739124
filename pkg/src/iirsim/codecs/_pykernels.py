"""Pure-Python byte kernels. Semantics must stay identical to ``_ckernels.pyx``."""


def rc4_ksa(key: bytes) -> bytearray:
    s = bytearray(range(256))
    j = 0
    klen = len(key)
    for i in range(256):
        j = (j + s[i] + key[i % klen]) & 0xFF
        s[i], s[j] = s[j], s[i]
    return s


def rc4_crypt(key: bytes, data: bytes) -> bytes:
    s = rc4_ksa(key)
    out = bytearray(len(data))
    i = j = 0
    for n, c in enumerate(data):
        i = (i + 1) & 0xFF
        j = (j + s[i]) & 0xFF
        s[i], s[j] = s[j], s[i]
        out[n] = c ^ s[(s[i] + s[j]) & 0xFF]
    return bytes(out)


def visual_encode(data: bytes) -> bytes:
    if not data:
        return b""
    out = bytearray(data)
    for i in range(len(data) - 1, 0, -1):
        out[i] ^= data[i - 1]
    return bytes(out)


def visual_decode(data: bytes) -> bytes:
    out = bytearray(data)
    for i in range(1, len(out)):
        out[i] ^= out[i - 1]
    return bytes(out)
