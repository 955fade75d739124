"""Exit criteria, one test each. Every test prints a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (or ``-m acceptance``);
the lines appear in the terminal even without ``-s``.
"""

import base64
import contextlib
import json
import math
import random
import time

import pytest

import oracles
from bagutil import make_bag
from iirsim import harness
from iirsim.alerts import Alert, map_alert
from iirsim.bag import posterior_update, prior_propagate
from iirsim.codecs import (
    ZITMO_KEY,
    ZitMoMessage,
    ZitmoResponse,
    crc32_hex,
    emotet_open,
    emotet_seal,
    rc4,
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
from iirsim.datalog import parse_program, solve
from iirsim.defender import CostModel, DefenderState, candidate_actions, select_action
from iirsim.mitigation import block_general

pytestmark = pytest.mark.acceptance

# pinned tolerances and budgets
RUNTIME_LIMIT_S = 5.0
MARGINAL_TOL = 1e-9
MONOTONE_SLACK = 1e-15
INVERSE_CASES = 1000
PROGRAMS = 200
DAGS = 50
MONOTONE_CASES = 1000
UPDATE_SEQUENCES = 10_000

RULES = ["iptables -A INPUT -s 192.168.0.17 -j DROP", "iptables -A OUTPUT -s 192.168.0.17 -j DROP"]
VECTORS = harness.data_root() / "vectors"


@pytest.fixture
def criterion(request, capsys):
    """Yields a dict for detail text; prints one line with the outcome."""

    @contextlib.contextmanager
    def run(number, title):
        info = {"detail": ""}
        ok = False
        try:
            yield info
            ok = True
        finally:
            with capsys.disabled():
                status = "PASS" if ok else "FAIL"
                detail = f" ({info['detail']})" if info["detail"] else ""
                print(f"\n[criterion {number}] {status}: {title}{detail}")

    return run


def timed_run(name):
    scenario = harness.load_scenario(name)
    started = time.perf_counter()
    report = harness.run_scenario(scenario)
    return scenario, report, time.perf_counter() - started


def test_criterion_1_variation1(criterion):
    with criterion(1, "variation 1 reproduces 7 alerts and the two DROP rules") as info:
        _, report, elapsed = timed_run("zeus-variation1")
        s = report.summary
        info["detail"] = f"{s['alerts']} alerts, {elapsed:.3f}s"
        assert s["alerts"] == 7
        assert s["signature_alerts"] == 5 and s["informative_alerts"] == 2
        assert set(map(int, s["sid_counts"])) == {2011967, 2016141, 2019714, 2018959, 2021076}
        assert all(v == 1 for v in s["sid_counts"].values())
        assert report.rules == RULES
        assert elapsed < RUNTIME_LIMIT_S


def test_criterion_2_variation2(criterion):
    with criterion(2, "variation 2 reproduces 17 alerts, the two DROP rules and a blocked C&C") as info:
        _, report, elapsed = timed_run("zeus-variation2")
        s = report.summary
        info["detail"] = f"{s['alerts']} alerts, verdict={report.verdict}, {elapsed:.3f}s"
        assert s["alerts"] == 17
        assert s["signature_alerts"] == 11 and s["informative_alerts"] == 6
        assert {int(k): v for k, v in s["sid_counts"].items()} == {
            2016858: 2, 2017930: 2, 2019141: 2, 2022986: 2, 2018358: 2, 2016173: 1}
        informative = [a for a in report.data["alerts"] if a["kind"] == "informative"]
        gate_ticks = {t["tick"] for t in report.data["traffic"] if t["uri"] == "/gate.php"}
        assert {a["ts"] for a in informative} <= gate_ticks
        assert report.rules == RULES
        v = report.data["verdict"]
        assert report.verdict is True and v["post_mitigation_cnc_events"] > 0 and v["post_mitigation_permitted"] == 0
        assert elapsed < RUNTIME_LIMIT_S


def test_criterion_3_zitmo_table(criterion):
    aes = pytest.importorskip("Crypto.Cipher.AES")
    with criterion(3, "ZitMo messages match the published table byte-exact") as info:
        rows = json.loads((VECTORS / "zitmo.json").read_text())["rows"]
        for row in rows:
            msg = ZitMoMessage(**row["fields"])
            assert zitmo_format(msg) == row["text"]
            enc = zitmo_encrypt(ZITMO_KEY, row["text"])
            raw = base64.b64decode(enc)
            assert len(raw) % 16 == 0
            assert zitmo_decrypt(ZITMO_KEY, enc) == row["text"]
            padded = row["text"].encode() + b" " * (-len(row["text"].encode()) % 16)
            oracle = base64.b64encode(aes.new(ZITMO_KEY.encode(), aes.MODE_ECB).encrypt(padded)).decode()
            assert enc == row["base64"] == oracle
        info["detail"] = f"{len(rows)} rows"


def _zitmo_message(rng):
    def field():
        return "".join(rng.choice("abcXYZ0189+-_.%# ") for _ in range(rng.randint(0, 10)))

    service = rng.choice(["timer", "login", "sms"])
    if service == "sms":
        return ZitMoMessage("sms", text="".join(chr(rng.randint(32, 0x2FF)) for _ in range(rng.randint(0, 30))),
                            number=field(), login=field())
    urls = [f"http://h{rng.randint(0, 99)}.example:{rng.randint(80, 9000)}/p{i}.php"
            for i in range(rng.randint(1, 3))]
    return ZitMoMessage(service, login=field(), phone=field(), devid=field(),
                        dd=rng.choice([None, f"{rng.getrandbits(32):08X}"]), flag=rng.choice([None, 0, 1]),
                        urls=rng.choice([None, urls]))


def test_criterion_4_codec_properties(criterion, lab_keys):
    pub, priv = lab_keys
    with criterion(4, "codec vectors and seal/open, format/parse inverses") as info:
        assert rc4(b"Key", b"Plaintext").hex().upper() == "BBF316E8D940AF0AD3"
        assert crc32_hex(b"123456789") == "CBF43926"
        rng = random.Random(2024)
        for _ in range(INVERSE_CASES):
            data = rng.randbytes(rng.randint(0, 400))
            key = "".join(chr(rng.randint(33, 126)) for _ in range(rng.randint(1, 32)))
            assert zeus_open(key, zeus_seal(key, data)) == data
            assert zeus_visual_decode(zeus_visual_encode(data)) == data
            kb = rng.randbytes(rng.randint(1, 256))
            assert rc4(kb, rc4(kb, data)) == data
            text = "".join(chr(rng.randint(32, 0x7FF)) for _ in range(rng.randint(0, 60))).rstrip(" ")
            assert zitmo_decrypt(ZITMO_KEY, zitmo_encrypt(ZITMO_KEY, text)) == text
            msg = _zitmo_message(rng)
            assert zitmo_parse(zitmo_format(msg)) == msg
            resp = rng.choice([ZitmoResponse("empty"), ZitmoResponse("nochange"),
                               ZitmoResponse("update", [f"http://a{rng.randint(0, 9)}/x.php"])])
            assert zitmo_parse_response(zitmo_format_response(resp)) == resp
            payload = data or b"x"
            assert emotet_open(priv, emotet_seal(pub, rng.randbytes(16), payload)) == payload
        info["detail"] = f"{INVERSE_CASES} inputs x 7 pairs"


def test_criterion_5_reasoner_oracle(criterion):
    with criterion(5, "Datalog solver equals a naive fixpoint oracle and is monotone") as info:
        discrepancies = 0
        for seed in range(PROGRAMS):
            rng = random.Random(seed)
            facts, rules = oracles.random_program(rng, max_facts=50, max_rules=10)
            known, _ = oracles.naive_fixpoint(facts, rules)
            got = {a.text for a in solve(parse_program(oracles.program_text(facts, rules))).atoms}
            if got != {oracles.atom_text(a) for a in known}:
                discrepancies += 1
            extra_facts, _ = oracles.random_program(rng, max_facts=10, max_rules=1)
            bigger = {a.text for a in solve(parse_program(oracles.program_text(facts | extra_facts, rules))).atoms}
            assert got <= bigger
        info["detail"] = f"{PROGRAMS} programs, {discrepancies} discrepancies"
        assert discrepancies == 0


def _probs(rng, kinds):
    leaf = {n: rng.choice([0.0, 1.0, rng.random()]) for n in kinds if kinds[n] == "LEAF"}
    exploit = {n: rng.choice([1.0, rng.random()]) for n in kinds if kinds[n] == "AND"}
    return leaf, exploit


def test_criterion_6_bag_numerics(criterion):
    with criterion(6, "BAG priors match enumeration; updates are monotone and bounded") as info:
        worst = 0.0
        for seed in range(DAGS):
            rng = random.Random(seed)
            kinds, parents = oracles.random_polytree(rng, max_nodes=12)
            leaf, exploit = _probs(rng, kinds)
            belief = prior_propagate(make_bag(kinds, parents, exploit), leaf)
            exact = oracles.exact_marginals(kinds, parents, leaf, exploit)
            worst = max(worst, max(abs(belief[n] - exact[n]) for n in kinds))
        assert worst <= MARGINAL_TOL

        rng = random.Random(606)
        for _ in range(MONOTONE_CASES):
            kinds, parents = oracles.random_dag(rng)
            leaf, exploit = _probs(rng, kinds)
            bag = make_bag(kinds, parents, exploit)
            before = prior_propagate(bag, leaf)
            target = rng.choice([n for n in kinds if kinds[n] == "AND"])
            after = posterior_update(bag, before, target, 1.0 + rng.random() * 50)
            for d in bag.descendants(target) | {target}:
                assert after[d] >= before[d] - MONOTONE_SLACK

        kinds, parents = oracles.random_dag(random.Random(7), max_nodes=12)
        leaf, exploit = _probs(random.Random(8), kinds)
        bag = make_bag(kinds, parents, exploit)
        ands = [n for n in kinds if kinds[n] == "AND"]
        b = prior_propagate(bag, leaf)
        for _ in range(UPDATE_SEQUENCES):
            b = posterior_update(bag, b, rng.choice(ands), math.exp(rng.uniform(-12, 12)))
            assert all(0.0 <= v <= 1.0 for v in b.p.values())
        info["detail"] = (f"{DAGS} polytree DAGs max err {worst:.1e}, {MONOTONE_CASES} monotone cases, "
                          f"{UPDATE_SEQUENCES} updates")


def test_criterion_7_defender(criterion, testbed):
    model, _, _, bag, prior = testbed
    with criterion(7, "L3-only matches lead to block_general(192.168.0.17); argmin is scale invariant") as info:
        state = DefenderState(model, bag, prior, costs=CostModel())
        alert = Alert(0, 2011967, "m", "alert", "172.16.4.67", "192.168.0.17", 49152, "tcp")
        matched = [(alert, map_alert(bag, model.hostmap(), alert))]
        assert matched[0][1].level == "L3"
        candidates = candidate_actions(state, matched)
        assert not any(a.kind == "block_specific" for a in candidates)
        chosen = select_action(state, matched)
        assert chosen == block_general("192.168.0.17")
        for factor in (1e-6, 0.01, 0.5, 3.0, 1e4, 1e8):
            scaled = DefenderState(model, bag, prior, costs=CostModel().scaled(factor))
            assert select_action(scaled, matched) == chosen
        info["detail"] = f"chosen {chosen}"


def test_criterion_8_determinism(criterion):
    with criterion(8, "repeated runs give byte-identical reports") as info:
        for name in ("zeus-variation1", "zeus-variation2"):
            s = harness.load_scenario(name)
            first, second = harness.run_scenario(s).to_json(), harness.run_scenario(s).to_json()
            assert first == second
        info["detail"] = "2 scenarios"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
