"""Command-line front end.

Every subcommand takes a scenario file.  ``run`` executes its script;
``sniff`` and ``crackpair-passive`` execute it too, then look at the
captured traffic; the rest build the scenario's devices and run one attack
from the attacker (``-a``, else the scenario's attacker, else the first
device).

Exit codes: 0 success, 2 attack or step failure, 64 usage error,
65 invalid scenario, 66 missing input file.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import __version__, attacks, audio, pairing, scenario, stack
from .attacks.sniff import banner
from .attacks.spoof import render_spoof
from .errors import BtSimError, IncompleteTranscript, ScenarioError
from .simcore import BdAddr

EXIT_OK = 0
EXIT_FAILURE = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _addr(text: str) -> BdAddr:
    try:
        return BdAddr.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid BD address {text!r}") from None


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    if not sep or not lo.isdigit() or not hi.isdigit() or int(lo) > int(hi) or int(lo) < 1:
        raise argparse.ArgumentTypeError(f"range must look like LO-HI, got {text!r}")
    return int(lo), int(hi)


def _channel(text: str) -> int:
    n = int(text)
    if n not in stack.RFCOMM_CHANNELS:
        raise argparse.ArgumentTypeError("RFCOMM channel must be 1-30")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="btsim", description="Bluetooth attack-surface simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("scenario", help="scenario file (YAML)")
    common.add_argument("-a", "--attacker", type=_addr, help="attacking device address")

    def cmd(name, help_, target=False):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if target:
            sp.add_argument("-b", "--bdaddr", type=_addr, required=True, help="target address")
        return sp

    sp = sub.add_parser("run", help="execute the scenario script")
    sp.add_argument("scenario")
    sp.add_argument("-o", "--output-dir",
                    help=f"output directory (default ${scenario.OUTPUT_DIR_ENV} or "
                         f"./{scenario.DEFAULT_OUTPUT_DIR})")

    cmd("scan", "inquiry scan")
    cmd("audit", "remote fingerprint, SDP records and port scans", target=True)
    cmd("spoof", "clone the target's name, class and address", target=True)

    sp = cmd("ping", "L2CAP echo", target=True)
    sp.add_argument("-c", "--count", type=int, default=5)
    sp.add_argument("-d", "--delay", type=float, default=1.0)
    sp.add_argument("-s", "--size", type=int, default=44)

    sp = cmd("sniff", "run the script and dump the captured packets")
    sp.add_argument("-t", "--timestamps", action="store_true")

    sp = cmd("snarf", "phonebook access over AT commands", target=True)
    sp.add_argument("-C", "--channel", type=_channel, default=1)
    act = sp.add_mutually_exclusive_group(required=True)
    act.add_argument("-r", "--range", type=_range, metavar="LO-HI")
    act.add_argument("-f", "--find", metavar="NAME")
    act.add_argument("-w", "--delete", type=int, metavar="INDEX")
    act.add_argument("-D", "--dial", metavar="NUMBER")

    sp = cmd("bug", "identity query or call control over AT commands", target=True)
    sp.add_argument("-C", "--channel", type=_channel, default=1)
    act = sp.add_mutually_exclusive_group()
    act.add_argument("--dial", metavar="NUMBER")
    act.add_argument("--hangup", action="store_true")

    sp = cmd("whisper", "inject audio into a headset and record it", target=True)
    sp.add_argument("-C", "--channel", type=_channel, default=1)
    sp.add_argument("-i", "--inject", required=True, help="raw s16le 8 kHz mono input")
    sp.add_argument("-o", "--output", required=True, help="recorded audio output")
    sp.add_argument("--wav", action="store_true", help="write the recording as WAV")

    sp = cmd("fuzz", "send malformed L2CAP packets", target=True)
    sp.add_argument("-m", "--mode", type=int, choices=range(1, 13), default=12, metavar="1-12")
    sp.add_argument("-s", "--size", type=int, default=1000)
    sp.add_argument("-M", "--loop", action="store_true")

    sp = cmd("crackpair-passive", "recover a passkey from captured pairings")
    sp.add_argument("--session", type=int, default=-1, help="which pairing (default: last)")

    sp = cmd("crackpair-active", "recover a passkey by repeated guessed pairings", target=True)
    sp.add_argument("-k", type=int, default=pairing.DEFAULT_K)
    sp.add_argument("--max-attempts", type=int)
    return p


def _attacker(args, scen, sim):
    if args.attacker is not None:
        return sim.registrant(args.attacker)
    return scenario.default_attacker(scen, sim)


def _dispatch(args, scen) -> int:
    out = sys.stdout
    if args.command == "run":
        report = scenario.run(scen, args.output_dir)
        out.write(report.results)
        return report.exit_code

    if args.command in ("sniff", "crackpair-passive"):
        sim = scenario.build(scen)
        log = sim.tap("sniffer")
        scenario.execute(scen, sim=sim)
        if args.command == "sniff":
            out.write(banner() + attacks.sniff_format(log, args.timestamps))
            return EXIT_OK
        transcripts = attacks.extract_transcripts(log)
        if not transcripts:
            raise IncompleteTranscript("no pairing session in the capture")
        try:
            tr = transcripts[args.session]
        except IndexError:
            raise IncompleteTranscript(f"no pairing session {args.session}") from None
        res = attacks.passive_recover(tr)
        print(f"passkey: {res.passkey}", file=out)
        print(f"HMAC evaluations: {res.hmac_evaluations}", file=out)
        return EXIT_OK

    sim = scenario.build(scen)
    atk = _attacker(args, scen, sim)
    c = args.command
    if c == "scan":
        print("Scanning ...", file=out)
        for addr, name, _ in sim.inquiry(atk):
            print(f"\t{addr}\t{name}", file=out)
    elif c == "audit":
        print(attacks.surveil(sim, atk, args.bdaddr).render(), file=out)
    elif c == "spoof":
        before = stack.adapter_info(atk)
        print(render_spoof(before, attacks.spoof(sim, atk, args.bdaddr)), file=out)
    elif c == "ping":
        st = stack.l2ping(sim, atk, args.bdaddr, args.count, args.delay, args.size)
        print(stack.render_ping(atk, args.bdaddr, args.size, st), file=out)
        return EXIT_OK if st.received else EXIT_FAILURE
    elif c == "snarf":
        if args.range:
            got = attacks.snarf(sim, atk, args.bdaddr, attacks.ReadRange(*args.range), args.channel)
            print(attacks.render_contacts(got), file=out)
        elif args.find is not None:
            got = attacks.snarf(sim, atk, args.bdaddr, attacks.Find(args.find), args.channel)
            print(attacks.render_contacts(got, args.find), file=out)
        elif args.delete is not None:
            gone = attacks.snarf(sim, atk, args.bdaddr, attacks.Delete(args.delete), args.channel)
            print(f"delete entry {gone.index} ({gone.name}) ok", file=out)
        else:
            state = attacks.snarf(sim, atk, args.bdaddr, attacks.Dial(args.dial), args.channel)
            print(f"dialing {args.dial}: {state}", file=out)
    elif c == "bug":
        if args.dial:
            print(f"call state: {attacks.bug_dial(sim, atk, args.bdaddr, args.dial, args.channel)}",
                  file=out)
        elif args.hangup:
            attacks.bug_hangup(sim, atk, args.bdaddr, args.channel)
            print("hung up", file=out)
        else:
            print(attacks.bug_info(sim, atk, args.bdaddr, args.channel).render(), file=out)
    elif c == "whisper":
        inject = audio.read_raw(args.inject)
        res = attacks.whisper(sim, atk, args.bdaddr, inject, args.channel)
        (audio.write_wav if args.wav else audio.write_raw)(args.output, res.recorded)
        print(res.render(args.channel), file=out)
    elif c == "fuzz":
        outcome = attacks.fuzz(sim, atk, args.bdaddr, args.mode, args.size, args.loop)
        print(f"fuzz mode {args.mode}: {outcome.value}", file=out)
    elif c == "crackpair-active":
        res = attacks.active_recover(sim, atk, args.bdaddr, args.max_attempts, args.k)
        print(f"passkey: {res.passkey}", file=out)
        print(f"aborted attempts: {res.aborted_attempts}", file=out)
        print(f"sessions: {res.sessions}", file=out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scen = scenario.load_scenario(args.scenario)
    except FileNotFoundError as e:
        print(f"btsim: {e.filename}: no such file", file=sys.stderr)
        return EXIT_NOINPUT
    except ScenarioError as e:
        print(f"btsim: {e}", file=sys.stderr)
        return EXIT_DATAERR
    try:
        return _dispatch(args, scen)
    except FileNotFoundError as e:
        print(f"btsim: {e.filename}: no such file", file=sys.stderr)
        return EXIT_NOINPUT
    except (BtSimError, ValueError) as e:
        print(f"btsim: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
