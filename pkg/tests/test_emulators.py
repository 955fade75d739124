import json
import string

import pytest

from iirsim import harness
from iirsim.codecs import ZITMO_KEY, url_list_crc, zeus_open, zitmo_decrypt, zitmo_parse
from iirsim.emulators import emotet, live, zitmo
from iirsim.emulators.emotet import EmotetCnc, EmotetTrafficConfig, cookie_value, emotet_traffic
from iirsim.emulators.http import EPHEMERAL_START, HttpRequest, PortAllocator, event_request
from iirsim.emulators.zeus import (
    ACK_TEMPLATE,
    DROPPER_BODY,
    ZeusBotConfig,
    ZeusCnc,
    report_payload,
    zeus_bot_run,
)
from iirsim.emulators.zitmo import ZitmoClient, ZitMoClientConfig, ZitmoCnc, in_process, zitmo_client_run

BOT, CNC = "192.168.0.17", "172.16.4.67"
ZITMO_ROWS = json.loads((harness.data_root() / "vectors" / "zitmo.json").read_text())["rows"]


def printable(b: bytes) -> bool:
    return all(chr(c) in string.printable for c in b)


# Zeus


def test_zeus_flow_counts():
    cfg = ZeusBotConfig(BOT, CNC, "k", ping_interval_ticks=25)
    events = zeus_bot_run(cfg, 100)
    assert [(e.ts, e.http_method, e.uri) for e in events] == [
        (0, "GET", "/cfg.bin"), (25, "POST", "/gate.php"), (50, "POST", "/gate.php"), (75, "POST", "/gate.php")]
    assert [e.src_port for e in events] == list(range(EPHEMERAL_START, EPHEMERAL_START + 4))
    assert [e.seq for e in events] == [0, 1, 2, 3]
    shifted = zeus_bot_run(ZeusBotConfig(BOT, CNC, "k", start_tick=1), 100)
    assert [e.ts for e in shifted] == [1, 26, 51, 76]
    with pytest.raises(ValueError):
        zeus_bot_run(cfg, 0)


def test_zeus_round_trips_through_cnc():
    cfg = ZeusBotConfig(BOT, CNC, "secret")
    cnc = ZeusCnc("secret", cnc_ip=CNC)
    get_cfg, post = zeus_bot_run(cfg, 26)
    config = zeus_open("secret", cnc.serve(event_request(get_cfg)).body).decode()
    assert f"http://{CNC}/gate.php" in config
    resp = cnc.serve(event_request(post))
    assert resp.status == 200
    assert zeus_open("secret", resp.body).decode() == ACK_TEMPLATE.format(interval=25)
    assert zeus_open("secret", post.payload) == report_payload(cfg, 1)
    assert cnc.reports[0]["seq"] == "1" and cnc.report_log()[0].startswith("WIN7SP1-0017\tbtn1")


def test_zeus_cnc_wrong_key_and_unknown_uri():
    cnc = ZeusCnc("other")
    post = zeus_bot_run(ZeusBotConfig(BOT, CNC, "secret"), 26)[1]
    cnc.serve(event_request(post))
    assert cnc.reports == []
    assert cnc.serve(HttpRequest("GET", "/nothing")).status == 404


def test_zeus_payloads_printable():
    cfg = ZeusBotConfig(BOT, CNC, "k")
    assert printable(report_payload(cfg, 3)) and printable(DROPPER_BODY)
    assert printable(ZeusCnc("k").config_text().encode())


# ZitMo


def script_for_table():
    sms = ZITMO_ROWS[3]["fields"]
    return ["boot", ("account_entry", "123456789"), ("incoming_sms", sms["text"], sms["number"])]


def test_zitmo_script_reproduces_table_rows():
    client = ZitmoClient(ZitMoClientConfig(), in_process(ZitmoCnc()))
    client.run(script_for_table())
    boot, login, sms = client.sent
    assert login == ZITMO_ROWS[1]["text"]
    assert sms == ZITMO_ROWS[3]["text"]
    # the boot message has the table's shape; dd is computed from the URL list
    msg = zitmo_parse(boot)
    assert msg.services == "timer" and msg.flag == 0 and msg.urls == ["http://172.17.0.1:8000/ss/app.php"]
    assert msg.dd == url_list_crc(msg.urls)
    assert [r.kind for r in client.responses] == ["nochange", "empty", "empty"]


def test_zitmo_wire_body_is_encrypted_text():
    client = ZitmoClient(ZitMoClientConfig(), in_process(ZitmoCnc()))
    events = client.run(script_for_table())
    assert events[1].payload.decode() == ZITMO_ROWS[1]["base64"]
    assert zitmo_decrypt(ZITMO_KEY, events[1].payload.decode()) == ZITMO_ROWS[1]["text"]
    assert events[0].dst_ip == "172.17.0.1" and events[0].dst_port == 8000 and events[0].uri == "/ss/app.php"
    assert events[0].header("Content-Type") == "text/plain"


def test_zitmo_update_then_ping_sets_flag(tmp_path):
    new = ["http://172.17.0.9:8000/ss/app.php"]
    cnc = ZitmoCnc()
    cnc.queue_update(new)
    cfg = ZitMoClientConfig(ping_interval_ticks=15)
    client = ZitmoClient(cfg, in_process(cnc), storage_root=tmp_path)
    client.run(["boot", ("account_entry", "123456789")], ticks=16)
    assert client.responses[0].kind == "update"
    assert client.urls == new
    ping = zitmo_parse(client.sent[-1])
    assert (ping.services, ping.login, ping.flag, ping.urls) == ("timer", "123456789", 1, None)
    assert ping.dd == url_list_crc(new)
    assert client.responses[-1].kind == "nochange"
    assert client.events[-1].ts == 15 and client.events[-1].dst_ip == "172.17.0.9"
    saved = (tmp_path / zitmo.SETTINGS_PATH.lstrip("/")).read_text().splitlines()
    assert saved == ["login=123456789", "updated=1", f"url={new[0]}"]

    # a rebooted client reloads the persisted URL list and flag
    again = ZitmoClient(cfg, in_process(ZitmoCnc()), storage_root=tmp_path)
    again.run(["boot"])
    assert zitmo_parse(again.sent[0]).urls == new and zitmo_parse(again.sent[0]).flag == 1


def test_zitmo_events_before_boot_are_ignored_and_ping_cadence():
    events = zitmo_client_run(ZitMoClientConfig(ping_interval_ticks=5),
                              [{"event": "incoming_sms", "text": "x", "number": "1", "tick": 0},
                               {"event": "boot", "tick": 2}], ticks=13)
    assert [e.ts for e in events] == [2, 7, 12]


def test_zitmo_cnc_malformed_body():
    resp = ZitmoCnc().serve(HttpRequest("POST", "/ss/app.php", (), b"garbage"))
    assert resp.status == 200 and resp.body == b""


def test_zitmo_config_validation():
    with pytest.raises(ValueError):
        ZitMoClientConfig(key16="short")
    with pytest.raises(ValueError):
        ZitMoClientConfig(cnc_urls=[])
    with pytest.raises(ValueError):
        zitmo_client_run(ZitMoClientConfig(), ["reboot"])


# Emotet


def emotet_cfg(pub, **kw):
    return EmotetTrafficConfig(BOT, CNC, pub, **kw)


def test_emotet_cookie_opens_at_cnc(lab_keys):
    pub, priv = lab_keys
    events = emotet_traffic(emotet_cfg(pub), 25, seed=4)
    assert [e.ts for e in events] == [0, 10, 20]
    cnc = EmotetCnc(priv)
    for e in events:
        assert cnc.serve(event_request(e)).status == 200
    assert cnc.received[0].startswith(b"hello bot=")
    assert cnc.received[1].startswith(b"checkin bot=")
    assert cnc.sessions == {"WIN7SP1_4F3A9C21": emotet.session_key(4)}
    assert cookie_value(event_request(events[0])) is not None


def test_emotet_seed_determinism(lab_keys):
    pub, _ = lab_keys
    a = emotet_traffic(emotet_cfg(pub), 30, seed=1)
    assert a == emotet_traffic(emotet_cfg(pub), 30, seed=1)
    b = emotet_traffic(emotet_cfg(pub), 30, seed=2)
    assert [e.header("Cookie") for e in a] != [e.header("Cookie") for e in b]
    assert [(e.ts, e.src_port) for e in a] == [(e.ts, e.src_port) for e in b]


def test_emotet_profiles_and_cnc_rejects(lab_keys):
    pub, priv = lab_keys
    for profile in emotet.PROFILES:
        assert printable(emotet.payload_for(emotet_cfg(pub, payload_profile=profile), 2))
    with pytest.raises(ValueError):
        emotet_cfg(pub, payload_profile="spam")
    cnc = EmotetCnc(priv)
    assert cnc.serve(HttpRequest("GET", "/")).status == 404
    assert cnc.serve(HttpRequest("GET", "/", (("Cookie", "SID=AAAA"),))).status == 404


def test_cookie_value_parsing():
    req = HttpRequest("GET", "/", (("Cookie", "a=1; SID=abc==; b=2"),))
    assert cookie_value(req) == "abc=="
    assert cookie_value(req, "zz") is None


def test_port_allocator_wraps():
    p = PortAllocator(65535)
    assert [p.take(), p.take()] == [65535, EPHEMERAL_START]


# Live carriage


def test_bind_checks():
    assert live.parse_bind("127.0.0.1:8080") == ("127.0.0.1", 8080)
    assert live.parse_bind("[::1]:80") == ("::1", 80)
    with pytest.raises(ValueError):
        live.parse_bind("8080")
    live.check_bind("localhost")
    with pytest.raises(live.BindRefused):
        live.check_bind("0.0.0.0")
    live.check_bind("0.0.0.0", allow_non_loopback=True)
    with pytest.raises(live.BindRefused):
        live.LiveServer(ZeusCnc("k"), bind="0.0.0.0:0")


@pytest.mark.live
def test_live_zeus_matches_in_process():
    cfg = ZeusBotConfig(BOT, CNC, "secret")
    events = zeus_bot_run(cfg, 100)
    local = ZeusCnc("secret", cnc_ip=CNC)
    expected = [local.serve(event_request(e)) for e in events]
    remote = ZeusCnc("secret", cnc_ip=CNC)
    with live.LiveServer(remote) as srv:
        got = live.replay_requests(events, srv.address)
    assert [(r.status, r.body) for _, r in got] == [(r.status, r.body) for r in expected]
    assert remote.reports == local.reports


@pytest.mark.live
def test_live_zitmo_matches_in_process():
    script = script_for_table()
    scripted = ZitmoClient(ZitMoClientConfig(), in_process(ZitmoCnc()))
    scripted.run(script, ticks=20)
    with live.LiveServer(ZitmoCnc()) as srv:
        over_http = ZitmoClient(ZitMoClientConfig(), live.http_transport(srv.address))
        over_http.run(script, ticks=20)
    assert over_http.sent == scripted.sent
    assert over_http.responses == scripted.responses
    assert over_http.events == scripted.events


@pytest.mark.live
def test_live_send_to_closed_port_returns_none():
    srv = live.LiveServer(ZeusCnc("k")).start()
    address = srv.address
    srv.stop()
    assert live.send(HttpRequest("GET", "/"), address, timeout=1.0) is None
