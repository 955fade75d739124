# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled byte kernels; drop-in replacements for ``_pykernels``."""


cdef void _ksa(const unsigned char[:] key, unsigned char *s) noexcept nogil:
    cdef Py_ssize_t klen = key.shape[0]
    cdef int i
    cdef unsigned char j = 0, t
    for i in range(256):
        s[i] = <unsigned char>i
    for i in range(256):
        j = <unsigned char>(j + s[i] + key[i % klen])
        t = s[i]
        s[i] = s[j]
        s[j] = t


def rc4_ksa(const unsigned char[:] key):
    cdef unsigned char s[256]
    _ksa(key, s)
    return bytearray(s[:256])


def rc4_crypt(const unsigned char[:] key, const unsigned char[:] data):
    cdef unsigned char s[256]
    cdef Py_ssize_t n, size = data.shape[0]
    cdef unsigned char i = 0, j = 0, t
    out = bytearray(size)
    cdef unsigned char[:] o = out
    _ksa(key, s)
    with nogil:
        for n in range(size):
            i = <unsigned char>(i + 1)
            j = <unsigned char>(j + s[i])
            t = s[i]
            s[i] = s[j]
            s[j] = t
            o[n] = data[n] ^ s[<unsigned char>(s[i] + s[j])]
    return bytes(out)


def visual_encode(const unsigned char[:] data):
    cdef Py_ssize_t i, size = data.shape[0]
    out = bytearray(size)
    cdef unsigned char[:] o = out
    if size == 0:
        return b""
    with nogil:
        o[0] = data[0]
        for i in range(1, size):
            o[i] = data[i] ^ data[i - 1]
    return bytes(out)


def visual_decode(const unsigned char[:] data):
    cdef Py_ssize_t i, size = data.shape[0]
    out = bytearray(size)
    cdef unsigned char[:] o = out
    if size == 0:
        return b""
    with nogil:
        o[0] = data[0]
        for i in range(1, size):
            o[i] = data[i] ^ o[i - 1]
    return bytes(out)
