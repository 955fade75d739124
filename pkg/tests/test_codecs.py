import base64
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from iirsim import harness
from iirsim.codecs import (
    ZITMO_KEY,
    EmotetEnvelopeError,
    ZitmoFormatError,
    ZitMoMessage,
    ZitmoResponse,
    crc32_hex,
    emotet_open,
    emotet_open_with_key,
    emotet_seal,
    rc4,
    url_list_crc,
    zeus_open,
    zeus_seal,
    zeus_visual_decode,
    zeus_visual_encode,
    zitmo_decrypt,
    zitmo_encrypt,
    zitmo_format,
    zitmo_format_response,
    zitmo_parse,
    zitmo_parse_response,
)

VECTORS = harness.data_root() / "vectors"


def load_vectors(name):
    return json.loads((VECTORS / name).read_text())


# RC4 and the Zeus envelope


def test_rc4_published_vector():
    assert rc4(b"Key", b"Plaintext").hex().upper() == "BBF316E8D940AF0AD3"


def test_rc4_frozen_vectors():
    for v in load_vectors("rc4.json")["vectors"]:
        assert rc4(v["key"].encode(), bytes.fromhex(v["plaintext_hex"])).hex().upper() == v["ciphertext_hex"]


def test_rc4_empty_and_key_limits():
    assert rc4(b"k", b"") == b""
    with pytest.raises(ValueError):
        rc4(b"", b"x")
    with pytest.raises(ValueError):
        rc4(b"x" * 257, b"x")
    assert rc4(b"x" * 256, b"abc") == rc4(b"x" * 256, b"abc")


def test_rc4_matches_pycryptodome():
    arc4 = pytest.importorskip("Crypto.Cipher.ARC4")
    import random

    rng = random.Random(5)
    for _ in range(200):
        key = rng.randbytes(rng.randint(5, 256))
        data = rng.randbytes(rng.randint(0, 300))
        assert rc4(key, data) == arc4.new(key).encrypt(data)


@given(st.binary(min_size=1, max_size=64), st.binary(max_size=512))
def test_rc4_involution(key, data):
    assert rc4(key, rc4(key, data)) == data


def test_visual_examples():
    assert zeus_visual_encode(bytes([1, 1])) == bytes([1, 0])
    assert zeus_visual_encode(bytes(10)) == bytes(10)
    assert zeus_visual_encode(b"") == b""


@given(st.binary(max_size=512))
def test_visual_inverse(data):
    assert zeus_visual_decode(zeus_visual_encode(data)) == data


def test_zeus_golden_vectors():
    for v in load_vectors("zeus.json")["vectors"]:
        payload = bytes.fromhex(v["payload_hex"]) if "payload_hex" in v else v["payload"].encode()
        assert zeus_seal(v["key"], payload).hex() == v["sealed_hex"]


def test_zeus_keys_differ():
    import random

    rng = random.Random(11)
    for _ in range(50):
        m = rng.randbytes(rng.randint(16, 64))
        assert zeus_seal("key-one", m) != zeus_seal("key-two", m)


@settings(max_examples=300)
@given(st.text(min_size=1, max_size=40), st.binary(max_size=512))
def test_zeus_seal_open(key, payload):
    if len(key.encode()) > 256:
        return
    assert zeus_open(key, zeus_seal(key, payload)) == payload


# CRC


def test_crc_check_values():
    assert crc32_hex(b"") == "00000000"
    assert crc32_hex(b"123456789") == "CBF43926"
    for v in load_vectors("crc32.json")["vectors"]:
        assert crc32_hex(v["input"].encode()) == v["crc"]


@given(st.binary(max_size=256))
def test_crc_matches_bitwise_oracle(data):
    assert crc32_hex(data) == f"{oracles.crc32_bitwise(data):08X}"


@given(st.lists(st.text(alphabet="abcdefghij/:.", min_size=1, max_size=20), min_size=1, max_size=5),
       st.text(alphabet="klmnop", min_size=1, max_size=5))
def test_dd_changes_with_url_list(urls, extra):
    assert url_list_crc(urls) != url_list_crc(urls + ["http://" + extra])


# ZitMo


def table_rows():
    return load_vectors("zitmo.json")["rows"]


@pytest.mark.parametrize("row", table_rows(), ids=lambda r: r["fields"]["services"])
def test_zitmo_table_rows(row):
    msg = ZitMoMessage(**row["fields"])
    assert zitmo_format(msg) == row["text"]
    assert zitmo_parse(row["text"]) == msg
    assert zitmo_encrypt(ZITMO_KEY, row["text"]) == row["base64"]
    raw = base64.b64decode(row["base64"])
    assert len(raw) % 16 == 0
    assert zitmo_decrypt(ZITMO_KEY, row["base64"]) == row["text"]


def test_zitmo_table_rows_match_aes_oracle():
    aes = pytest.importorskip("Crypto.Cipher.AES")
    for row in table_rows():
        data = row["text"].encode()
        data += b" " * (-len(data) % 16)
        expected = base64.b64encode(aes.new(ZITMO_KEY.encode(), aes.MODE_ECB).encrypt(data)).decode()
        assert expected == row["base64"]


def test_zitmo_padding_length():
    assert len(base64.b64decode(zitmo_encrypt(ZITMO_KEY, "0123456789"))) == 16
    assert len(base64.b64decode(zitmo_encrypt(ZITMO_KEY, "x" * 16))) == 16
    assert len(base64.b64decode(zitmo_encrypt(ZITMO_KEY, "x" * 17))) == 32


def test_zitmo_terminated_sms_accepted():
    text = "services=sms&text=hi&number=1&login=2&&Sign28tepXXX"
    msg = zitmo_parse(text)
    assert msg.services == "sms" and msg.text == "hi" and msg.login == "2"


@pytest.mark.parametrize("bad", [
    "services=timer&login=&phone=1&devid=2&dd=C80B059D&0",  # no terminator
    "services=bogus&&Sign28tepXXX",
    "login=x&services=timer&&Sign28tepXXX",
    "services=timer&dd=C80B059D&login=&&Sign28tepXXX",  # out of order
    "services=timer&login=&login=&&Sign28tepXXX",
    "services=timer&login=&frob&Sign28tepXXX",
])
def test_zitmo_parse_rejects(bad):
    with pytest.raises(ZitmoFormatError):
        zitmo_parse(bad)


def test_zitmo_message_validation():
    with pytest.raises(ZitmoFormatError):
        ZitMoMessage("timer", dd="c80b059d")
    with pytest.raises(ZitmoFormatError):
        ZitMoMessage("sms", text="x", number="1", flag=1)
    with pytest.raises(ZitmoFormatError):
        ZitMoMessage("timer", login="a&b")
    assert ZitMoMessage("timer", urls=[]).urls is None


def test_zitmo_decrypt_errors():
    with pytest.raises(ZitmoFormatError):
        zitmo_decrypt(ZITMO_KEY, "not base64!!")
    with pytest.raises(ZitmoFormatError):
        zitmo_decrypt(ZITMO_KEY, base64.b64encode(b"x" * 15).decode())
    with pytest.raises(ValueError):
        zitmo_encrypt("short", "x")


def test_zitmo_responses():
    cases = [
        (ZitmoResponse("empty"), "&Sign28tepXXX"),
        (ZitmoResponse("nochange"), "0&Sign28tepXXX"),
        (ZitmoResponse("update", ["http://a/x.php", "http://b/y.php"]), "1&http://a/x.php&http://b/y.php&Sign28tepXXX"),
    ]
    for resp, text in cases:
        assert zitmo_format_response(resp) == text
        assert zitmo_parse_response(text) == resp
    for bad in ("", "2&Sign28tepXXX", "1&Sign28tepXXX", "0"):
        with pytest.raises(ZitmoFormatError):
            zitmo_parse_response(bad)


_field_text = st.text(alphabet=st.characters(blacklist_characters="&", blacklist_categories=("Cs",)), max_size=12) \
    .filter(lambda s: "://" not in s)
_dd = st.text(alphabet="0123456789ABCDEF", min_size=8, max_size=8)
_url = st.from_regex(r"http://[a-z0-9.]{1,12}(:[0-9]{2,4})?/[a-z/]{0,10}\.php", fullmatch=True)


@st.composite
def zitmo_messages(draw):
    service = draw(st.sampled_from(["timer", "login", "sms"]))
    if service == "sms":
        return ZitMoMessage("sms", text=draw(st.text(max_size=40)), number=draw(_field_text),
                            login=draw(_field_text))
    return ZitMoMessage(
        service, login=draw(_field_text), phone=draw(_field_text), devid=draw(_field_text),
        dd=draw(st.none() | _dd), flag=draw(st.none() | st.sampled_from([0, 1])),
        urls=draw(st.none() | st.lists(_url, min_size=1, max_size=3)),
    )


@settings(max_examples=1000)
@given(zitmo_messages())
def test_zitmo_format_parse_inverse(msg):
    assert zitmo_parse(zitmo_format(msg)) == msg


@settings(max_examples=1000)
@given(st.text(max_size=200).map(lambda s: s.rstrip(" ")))
def test_zitmo_encrypt_decrypt_inverse(text):
    assert zitmo_decrypt(ZITMO_KEY, zitmo_encrypt(ZITMO_KEY, text)) == text


# Emotet


def test_emotet_round_trip_and_token(lab_keys):
    pub, priv = lab_keys
    key = bytes(range(16))
    cookie = emotet_seal(pub, key, b"checkin bot=X")
    assert emotet_open(priv, cookie) == b"checkin bot=X"
    assert emotet_open_with_key(priv, cookie) == (key, b"checkin bot=X")
    assert not any(c in cookie for c in "; \t\r\n")
    assert emotet_seal(pub, key, b"checkin bot=X") == cookie  # deterministic
    assert emotet_seal(pub, bytes(16), b"checkin bot=X") != cookie


def test_emotet_hand_rolled_oaep_matches_stock_encrypt(lab_keys):
    from cryptography.hazmat.primitives import hashes
    from cryptography.hazmat.primitives.asymmetric import padding

    from iirsim.codecs.emotet import load_private_key

    pub, priv = lab_keys
    sk = load_private_key(priv)
    stock = sk.public_key().encrypt(bytes(range(16)), padding.OAEP(
        mgf=padding.MGF1(hashes.SHA1()), algorithm=hashes.SHA1(), label=None))
    assert sk.decrypt(stock, padding.OAEP(mgf=padding.MGF1(hashes.SHA1()), algorithm=hashes.SHA1(),
                                          label=None)) == bytes(range(16))


def test_emotet_errors(lab_keys):
    pub, priv = lab_keys
    with pytest.raises(EmotetEnvelopeError):
        emotet_seal(pub, b"short", b"x")
    with pytest.raises(EmotetEnvelopeError):
        emotet_seal(pub, bytes(16), b"")
    with pytest.raises(EmotetEnvelopeError):
        emotet_open(priv, "%%%")
    with pytest.raises(EmotetEnvelopeError):
        emotet_open(priv, base64.b64encode(b"x" * 40).decode())
    from cryptography.hazmat.primitives.asymmetric import rsa

    other = rsa.generate_private_key(public_exponent=65537, key_size=1024)
    with pytest.raises(EmotetEnvelopeError):
        emotet_open(other, emotet_seal(pub, bytes(16), b"x"))


@settings(max_examples=1000, deadline=None)
@given(st.binary(min_size=16, max_size=16), st.binary(min_size=1, max_size=300))
def test_emotet_seal_open_inverse(lab_keys, key, payload):
    pub, priv = lab_keys
    assert emotet_open(priv, emotet_seal(pub, key, payload)) == payload
