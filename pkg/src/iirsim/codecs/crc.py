import zlib


def crc32_hex(data: bytes | str) -> str:
    """CRC-32 (IEEE 802.3 polynomial) as 8 uppercase hex digits."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08X}"


def url_list_crc(urls) -> str:
    """dd value for a URL list: CRC-32 over the newline-joined list."""
    return crc32_hex("\n".join(urls))
