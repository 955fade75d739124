"""Command-line entry point.

Exit codes: 0 success, 1 scenario expectation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import codecs, harness
from .alerts import SignatureError, load_signatures, read_alert_log
from .bag import BagError, belief_table, lag_to_bag, prior_propagate
from .datalog import DatalogSyntaxError, RangeRestrictionError, build_lag, export_dot, load_rules, parse_program, solve
from .defender import CostModel, DefenderState
from .mitigation import emit_rules, exec_rules
from .netmodel import TopologyError, load_topology, to_datalog_text

EXIT_OK, EXIT_ASSERT, EXIT_USAGE = 0, 1, 2


class CliError(Exception):
    pass


def _read_input(args) -> bytes:
    if args.data is not None:
        return args.data.encode("utf-8")
    if args.infile:
        return Path(args.infile).read_bytes()
    return sys.stdin.buffer.read()


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_graph(args) -> int:
    model = load_topology(harness.resolve_path(args.topology, subdir="scenarios"), include_inert=args.include_inert)
    program = parse_program(to_datalog_text(model)).extend(load_rules(args.rules))
    lag = build_lag(solve(program), model.goals)
    lag.check()
    if lag.unreachable:
        print("goal not derivable: " + ", ".join(a.text for a in lag.unreachable), file=sys.stderr)
    bag = lag_to_bag(lag, model.vuln_probs())
    if args.dot:
        Path(args.dot).write_text(export_dot(lag), encoding="utf-8")
    else:
        sys.stdout.write(export_dot(lag))
    if args.dot or args.priors:
        _write(belief_table(bag, prior_propagate(bag)), args.priors)
    return EXIT_OK


def _finish_rules(lines: list[str], args) -> None:
    if args.emit_rules:
        emit_rules(lines, args.emit_rules)
    if args.exec:
        if not args.i_know_this_is_a_lab:
            raise CliError("--exec runs commands on this machine; add --i-know-this-is-a-lab")
        codes = exec_rules(lines, args.exec)
        if any(codes):
            raise CliError(f"rule execution failed with exit codes {codes}")


def cmd_run(args) -> int:
    overrides = {}
    if args.signatures:
        overrides["signatures"] = str(Path(args.signatures).resolve())
    if args.ticks is not None:
        overrides["ticks"] = args.ticks
    if args.seed is not None:
        overrides["seed"] = args.seed
    scenario = harness.load_scenario(args.scenario, overrides)
    events = harness.read_events(args.replay) if args.replay else None
    started = time.perf_counter()
    report = harness.run_scenario(scenario, live=args.live, events=events)
    elapsed = time.perf_counter() - started
    if args.report:
        report.write(args.report)
    _finish_rules(report.rules, args)
    s = report.summary
    print(f"{scenario.name}: {s['alerts']} alerts ({s['signature_alerts']} signature, "
          f"{s['informative_alerts']} informative), {s['blocked_events']} events blocked, "
          f"verdict={'blocked' if report.verdict else 'not blocked'} [{elapsed:.2f}s]")
    for line in report.rules:
        print(line)
    diffs = [] if args.no_check else harness.check_expectations(report, scenario.expect)
    if diffs:
        print("expectation mismatch:")
        for d in diffs:
            print("  " + d)
        return EXIT_ASSERT
    return EXIT_OK


def cmd_replay(args) -> int:
    if args.scenario:
        scenario = harness.load_scenario(args.scenario)
        topology, sig_path, costs = scenario.topology_path, scenario.signatures_path, scenario.costs
    else:
        if not args.topology:
            raise CliError("replay needs --scenario or --topology")
        topology, sig_path, costs = harness.resolve_path(args.topology, subdir="scenarios"), args.signatures, CostModel()
    informative = set()
    if sig_path:
        informative = {s.sid for s in load_signatures(sig_path).by_kind("informative")}
    model = load_topology(topology)
    program = parse_program(to_datalog_text(model)).extend(load_rules(args.rules))
    bag = lag_to_bag(build_lag(solve(program), model.goals), model.vuln_probs())
    state = DefenderState(model, bag, prior_propagate(bag), costs=costs)
    decisions, rules = harness.replay_alerts(state, read_alert_log(args.alerts, informative))
    for d in decisions:
        print(json.dumps(d, sort_keys=True))
    for line in rules:
        print(line)
    _finish_rules(rules, args)
    return EXIT_OK


# codec subcommands


def cmd_codec(args) -> int:
    data = _read_input(args) if args.family != "crc32" or args.text is None else args.text.encode("utf-8")
    out: bytes | str
    if args.family == "crc32":
        out = codecs.crc32_hex(data) + "\n"
    elif args.family == "zeus":
        if args.op == "seal":
            out = codecs.zeus_seal(args.key, data).hex() + "\n"
        else:
            out = codecs.zeus_open(args.key, bytes.fromhex(data.decode("ascii").strip()))
    elif args.family == "zitmo":
        text = data.decode("utf-8")
        if args.op == "enc":
            out = codecs.zitmo_encrypt(args.key, text.rstrip("\n")) + "\n"
        elif args.op == "dec":
            out = codecs.zitmo_decrypt(args.key, text.strip()) + "\n"
        elif args.op == "fmt":
            fields = json.loads(text)
            out = codecs.zitmo_format(codecs.ZitMoMessage(**fields)) + "\n"
        else:
            msg = codecs.zitmo_parse(text.rstrip("\n"))
            out = json.dumps({k: v for k, v in vars(msg).items() if v is not None}, sort_keys=True) + "\n"
    else:
        if args.op == "seal":
            out = codecs.emotet_seal(Path(args.pubkey).read_bytes(), bytes.fromhex(args.session_key), data) + "\n"
        else:
            out = codecs.emotet_open(Path(args.privkey).read_bytes(), data.decode("ascii").strip())
    if isinstance(out, str):
        sys.stdout.write(out)
    else:
        sys.stdout.buffer.write(out)
    return EXIT_OK


# live emulation


def _serve_forever(app, args, on_exit=None) -> int:
    from .emulators.live import LiveServer

    with LiveServer(app, args.bind, args.i_know_this_is_a_lab) as srv:
        host, port = srv.address
        print(f"serving {args.family} C&C on {host}:{port}", flush=True)
        try:
            if args.duration is not None:
                time.sleep(args.duration)
            else:
                while True:
                    time.sleep(3600)
        except KeyboardInterrupt:
            pass
    if on_exit:
        on_exit()
    return EXIT_OK


def _lab_key(name: str) -> bytes:
    return (harness.data_root() / "keys" / name).read_bytes()


def cmd_emulate(args) -> int:
    from .emulators import live
    from .emulators.emotet import EmotetCnc, EmotetTrafficConfig, emotet_traffic
    from .emulators.http import event_request, response_event
    from .emulators.zeus import ZeusBotConfig, ZeusCnc, zeus_bot_run
    from .emulators.zitmo import ZitmoClient, ZitMoClientConfig, ZitmoCnc, in_process

    host, _ = live.parse_bind(args.bind)
    live.check_bind(host, args.i_know_this_is_a_lab)
    address = live.parse_bind(args.bind)
    clock = live.TickClock(args.tick_seconds)
    pubkey = Path(args.pubkey).read_bytes() if args.pubkey else _lab_key("emotet-lab-public.pem")

    if args.role == "serve":
        if args.family == "zeus":
            cnc = ZeusCnc(args.key or "secret-botnet-key", cnc_ip=host)
            return _serve_forever(cnc, args, lambda: print("\n".join(cnc.report_log())))
        if args.family == "zitmo":
            cnc = ZitmoCnc(key16=args.key or codecs.ZITMO_KEY)
            if args.update_urls:
                cnc.queue_update(args.update_urls)
            return _serve_forever(cnc, args)
        privkey = Path(args.privkey).read_bytes() if args.privkey else _lab_key("emotet-lab-private.pem")
        return _serve_forever(EmotetCnc(privkey, rsa_public=pubkey), args)

    # client
    if args.family == "zitmo":
        cfg = ZitMoClientConfig(key16=args.key or codecs.ZITMO_KEY)
        script = args.script or ["boot"]
        if args.scripted:
            cnc = ZitmoCnc(key16=cfg.key16)
            if args.update_urls:
                cnc.queue_update(args.update_urls)
            client = ZitmoClient(cfg, in_process(cnc), args.storage)
        else:
            client = ZitmoClient(cfg, live.http_transport(address), args.storage, pace=clock.wait_for)
        events = client.run(script, args.ticks)
        for text, resp in zip(client.sent, client.responses):
            print(f"> {text}")
            print(f"< {resp.kind if resp else 'no reply'}{' ' + ','.join(resp.urls) if resp and resp.urls else ''}")
        if args.out:
            harness.write_events(events, args.out)
        return EXIT_OK

    if args.family == "zeus":
        key = args.key or "secret-botnet-key"
        requests = zeus_bot_run(ZeusBotConfig("192.168.0.17", "172.16.4.67", key), args.ticks or 51)
        app = ZeusCnc(key, cnc_ip="172.16.4.67")
    else:
        cfg = EmotetTrafficConfig("192.168.0.17", "172.16.4.67", pubkey)
        requests = emotet_traffic(cfg, args.ticks or 21, args.seed)
        privkey = Path(args.privkey).read_bytes() if args.privkey else _lab_key("emotet-lab-private.pem")
        app = EmotetCnc(privkey, rsa_public=pubkey)
    if args.scripted:
        pairs = [(ev, app.serve(event_request(ev))) for ev in requests]
    else:
        pairs = live.replay_requests(requests, address, clock)
    events = []
    for ev, resp in pairs:
        print(f"tick {ev.ts}: {ev.http_method} {ev.uri} -> {resp.status if resp else 'no reply'}")
        events.append(ev)
        if resp is not None:
            events.append(response_event(ev, resp))
    if args.out:
        harness.write_events(events, args.out)
    return EXIT_OK


class _ScriptEvent(argparse.Action):
    """Collect ``--account`` and ``--sms`` in command-line order, after an implicit boot."""

    def __call__(self, parser, namespace, values, option_string=None):
        script = getattr(namespace, self.dest) or ["boot"]
        if option_string == "--account":
            script.append(("account_entry", values))
        else:
            script.append(("incoming_sms", values[0], values[1]))
        setattr(namespace, self.dest, script)


def _add_lab_flags(p) -> None:
    p.add_argument("--emit-rules", metavar="PATH", help="write the rendered rules as a shell script")
    p.add_argument("--exec", metavar="TEMPLATE",
                   help="run TEMPLATE per rule, {rule} is replaced by the shell-quoted rule")
    p.add_argument("--i-know-this-is-a-lab", action="store_true", help="allow --exec and non-loopback binds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iirsim", description="Intrusion response simulator for banking trojans.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", help="build the attack graph of a topology")
    p.add_argument("--topology", required=True)
    p.add_argument("--rules", help="Datalog interaction rules (default: builtin set)")
    p.add_argument("--dot", metavar="PATH", help="write DOT here instead of stdout")
    p.add_argument("--priors", metavar="PATH", help="write the prior belief table here")
    p.add_argument("--include-inert", action="store_true", help="add the topology's uninvolved hosts")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("run", help="run a scenario and check its expectations")
    p.add_argument("--scenario", required=True, help="scenario file or shipped scenario name")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here")
    p.add_argument("--signatures", help="override the scenario's signature file")
    p.add_argument("--ticks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--replay", metavar="EVENTS", help="use a recorded event list instead of the emulators")
    p.add_argument("--live", action="store_true", help="carry C&C exchanges over loopback HTTP")
    p.add_argument("--no-check", action="store_true", help="skip the scenario's expect block")
    _add_lab_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="feed an alert log (EVE subset) to the defender")
    p.add_argument("--alerts", required=True)
    p.add_argument("--scenario", help="take topology, signatures and costs from a scenario")
    p.add_argument("--topology")
    p.add_argument("--signatures", help="used to tell informative SIDs apart")
    p.add_argument("--rules")
    _add_lab_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("codec", help="encode or decode C&C wire formats")
    fam = p.add_subparsers(dest="family", required=True)
    for name, ops in (("zeus", ("seal", "open")), ("zitmo", ("enc", "dec", "fmt", "parse")),
                      ("emotet", ("seal", "open"))):
        f = fam.add_parser(name)
        f.add_argument("op", choices=ops)
        f.add_argument("--data", help="input text (default: --in file or stdin)")
        f.add_argument("--in", dest="infile")
        if name == "zeus":
            f.add_argument("--key", required=True)
        elif name == "zitmo":
            f.add_argument("--key", default=codecs.ZITMO_KEY)
        else:
            f.add_argument("--pubkey")
            f.add_argument("--privkey")
            f.add_argument("--session-key", metavar="HEX")
    f = fam.add_parser("crc32")
    f.add_argument("text", nargs="?")
    f.add_argument("--data")
    f.add_argument("--in", dest="infile")
    p.set_defaults(func=cmd_codec)

    p = sub.add_parser("emulate", help="run an emulator as a live loopback client or server")
    p.add_argument("family", choices=("zeus", "zitmo", "emotet"))
    p.add_argument("role", choices=("client", "serve"))
    p.add_argument("--bind", default="127.0.0.1:8080", help="HOST:PORT to serve on or connect to")
    p.add_argument("--i-know-this-is-a-lab", action="store_true", help="allow a non-loopback bind")
    p.add_argument("--tick-seconds", type=float, default=0.0, help="wall-clock seconds per tick")
    p.add_argument("--ticks", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--key", help="RC4 key (zeus) or 16-byte AES key (zitmo)")
    p.add_argument("--pubkey")
    p.add_argument("--privkey")
    p.add_argument("--update-urls", nargs="+", metavar="URL", help="zitmo C&C: URL list to push")
    p.add_argument("--account", dest="script", action=_ScriptEvent, metavar="TEXT")
    p.add_argument("--sms", dest="script", action=_ScriptEvent, nargs=2, metavar=("TEXT", "NUMBER"))
    p.add_argument("--storage", metavar="DIR", help="zitmo client: root for the settings file")
    p.add_argument("--scripted", action="store_true", help="client: no network, in-process C&C")
    p.add_argument("--out", metavar="EVENTS", help="client: write the event list for run --replay")
    p.add_argument("--duration", type=float, help="serve: stop after this many seconds")
    p.set_defaults(func=cmd_emulate)
    return parser


def _validate(args, parser) -> None:
    if args.command == "codec" and args.family == "emotet":
        if args.op == "seal" and not (args.pubkey and args.session_key):
            parser.error("codec emotet seal needs --pubkey and --session-key")
        if args.op == "open" and not args.privkey:
            parser.error("codec emotet open needs --privkey")
    if args.command == "emulate" and args.family == "zeus" and args.role == "client" and args.script:
        parser.error("--account/--sms apply to the zitmo client only")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    try:
        return args.func(args)
    except (CliError, harness.ScenarioError, TopologyError, SignatureError, DatalogSyntaxError,
            RangeRestrictionError, BagError, codecs.ZitmoFormatError, codecs.EmotetEnvelopeError,
            OSError, ValueError, KeyError) as exc:
        print(f"iirsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
