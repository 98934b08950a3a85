"""Scenario files: load, validate and run a scripted simulation.

A scenario is a YAML document.  ``seed`` and ``devices`` are mandatory;
``piconets``, ``bonds``, ``attacker`` and ``script`` are optional.  Device
entries use :class:`~btsim.simcore.DeviceProfile` field names and may start
from a lab ``preset``.  The JSON schema lives next to this module as
``scenario.schema.json``.

Running a scenario writes two files into the output directory:

``capture.txt``
    every packet on the medium, rendered by :func:`attacks.sniff_format`;
``results.txt``
    one line per script step of space-separated ``key=value`` fields, then
    a ``steps=N errors=M`` summary line.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import yaml

from . import attacks, audio, pairing, stack, testbed
from .attacks.spoof import render_spoof
from .errors import BtSimError, IncompleteTranscript, MissingSeed, ParseError, UnknownAddress
from .pairing import Passkey
from .simcore import (
    BdAddr,
    Contact,
    Device,
    DeviceProfile,
    FirmwareFlags,
    Piconet,
    ServiceRecord,
    Simulation,
)

OUTPUT_DIR_ENV = "BTSIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "btsim-out"
CAPTURE_FILE = "capture.txt"
RESULTS_FILE = "results.txt"

PRESETS = {f.__name__: f for f in testbed.ALL}

# parameters each op needs; the schema already constrains their types
REQUIRED = {
    "audit": ("target",), "spoof": ("target",), "ping": ("target",), "snarf": ("target",),
    "bug": ("target",), "whisper": ("target", "inject"), "fuzz": ("target",),
    "pair": ("initiator", "responder", "passkey"), "pair_legacy": ("initiator", "responder", "pin"),
    "connect": ("initiator", "responder"), "force_repair": ("initiator", "responder"),
    "crackpair_active": ("target",), "exchange": ("slave",), "reset": ("target",),
}
ADDR_PARAMS = ("attacker", "target", "initiator", "responder", "slave")
SNARF_ACTIONS = ("range", "find", "delete", "dial")


@dataclass(frozen=True)
class Step:
    op: str
    params: dict[str, Any]
    fatal: bool = False
    line: Optional[int] = None


@dataclass
class Scenario:
    seed: int
    devices: list[DeviceProfile]
    piconets: list[Piconet] = field(default_factory=list)
    bonds: list[tuple[BdAddr, BdAddr]] = field(default_factory=list)
    script: list[Step] = field(default_factory=list)
    attacker: Optional[BdAddr] = None
    base_dir: Path = Path(".")


@dataclass(frozen=True)
class StepRecord:
    index: int
    op: str
    outcome: str
    fields: tuple[tuple[str, Any], ...] = ()
    output: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome != "error"

    def render(self) -> str:
        parts = [("step", self.index), ("op", self.op), ("outcome", self.outcome)]
        return " ".join(f"{k}={_fmt(v)}" for k, v in parts + list(self.fields))


@dataclass(frozen=True)
class RunReport:
    steps: tuple[StepRecord, ...]
    capture: str
    results: str
    aborted_early: bool = False

    @property
    def exit_code(self) -> int:
        return 0 if all(s.ok for s in self.steps) and not self.aborted_early else 2


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    text = str(value)
    if not text or any(c.isspace() or c in '"=' for c in text):
        return json.dumps(text)
    return text


# -----------------------------------------------------------------------------
# Loading
# -----------------------------------------------------------------------------
def _schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("scenario.schema.json").read_text())


def _node_at(root: yaml.Node, path) -> yaml.Node:
    """Deepest YAML node along ``path`` (keys and list indices)."""
    node = root
    for part in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == part), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            nxt = node.value[part]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
    return node


def _error_at(root: yaml.Node, path, msg: str) -> ParseError:
    mark = _node_at(root, path).start_mark
    return ParseError(msg, mark.line + 1, mark.column + 1)


def _parse_features(text: str) -> bytes:
    return bytes.fromhex(text.replace(" ", ""))


def _profile(entry: dict, base_dir: Path) -> DeviceProfile:
    entry = dict(entry)
    preset = entry.pop("preset", None)
    profile = PRESETS[preset]() if preset else None
    fw = entry.pop("firmware", None)
    conv: dict[str, Any] = {}
    for key, value in entry.items():
        if key == "features":
            value = _parse_features(value)
        elif key in ("lmp_version", "manufacturer"):
            value = tuple(value)
        elif key == "services":
            value = [ServiceRecord(s["handle"], s["service_class_uuid16"],
                                   tuple(tuple(d) for d in s.get("protocol_descriptors", ())),
                                   s.get("name", "")) for s in value]
        elif key == "contacts":
            value = [Contact(c["index"], c["name"], c["number"]) for c in value]
        elif key == "ambient_audio":
            value = audio.read_raw(base_dir / value)
        conv[key] = value
    if profile is None:
        profile = DeviceProfile(**conv)
    else:
        # re-run validation with the overrides applied
        profile = DeviceProfile(**{**{f.name: getattr(profile, f.name) for f in fields(profile)},
                                   **conv})
    if fw is not None:
        profile.firmware = replace(profile.firmware, **fw) if preset else FirmwareFlags(**fw)
    return profile


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Parse and validate a scenario file.

    Raises ``FileNotFoundError`` when the file is missing, ``MissingSeed``
    when there is no ``seed``, ``ParseError`` (with line and column) for
    syntax, schema and value problems, and ``UnknownAddress`` when a piconet,
    bond or script step names an address no device has.
    """
    path = Path(path)
    text = path.read_text()
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        raise ParseError(f"{path}: {e.problem}", mark.line + 1, mark.column + 1) from None
    if root is None or not isinstance(data, dict):
        raise ParseError(f"{path}: a scenario must be a mapping", 1, 1)
    if "seed" not in data:
        raise MissingSeed(f"{path}: scenario has no seed")

    err = next(iter(sorted(jsonschema.Draft202012Validator(_schema()).iter_errors(data),
                           key=lambda e: len(e.absolute_path))), None)
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise _error_at(root, err.absolute_path, f"{path}: {where}: {err.message}")

    profiles = []
    for i, entry in enumerate(data["devices"]):
        try:
            profiles.append(_profile(entry, path.parent))
        except (ValueError, TypeError, OSError) as e:
            raise _error_at(root, ["devices", i], f"{path}: devices/{i}: {e}") from None
    known = {p.addr for p in profiles}
    if len(known) != len(profiles):
        raise _error_at(root, ["devices"], f"{path}: duplicate device address")

    def addr(value: str, where) -> BdAddr:
        a = BdAddr.parse(value)
        if a not in known:
            mark = _node_at(root, where).start_mark
            raise UnknownAddress(f"{path}:{mark.line + 1}: {a} is not a scenario device")
        return a

    attacker = addr(data["attacker"], ["attacker"]) if "attacker" in data else None
    piconets = []
    for i, pn in enumerate(data.get("piconets", [])):
        master = addr(pn["master"], ["piconets", i, "master"])
        slaves = tuple(addr(s, ["piconets", i, "slaves", j])
                       for j, s in enumerate(pn.get("slaves", [])))
        try:
            piconets.append(Piconet(master, slaves))
        except BtSimError as e:
            raise _error_at(root, ["piconets", i], f"{path}: piconets/{i}: {e}") from None
    bonds = [(addr(a, ["bonds", i, 0]), addr(b, ["bonds", i, 1]))
             for i, (a, b) in enumerate(data.get("bonds", []))]

    script = []
    for i, raw in enumerate(data.get("script", [])):
        params = {k: v for k, v in raw.items() if k not in ("op", "fatal")}
        op = raw["op"]
        missing = [p for p in REQUIRED.get(op, ()) if p not in params]
        if missing:
            raise _error_at(root, ["script", i], f"{path}: script/{i}: {op} needs {', '.join(missing)}")
        if op == "snarf" and sum(a in params for a in SNARF_ACTIONS) != 1:
            raise _error_at(root, ["script", i],
                            f"{path}: script/{i}: snarf needs exactly one of {', '.join(SNARF_ACTIONS)}")
        for key in ADDR_PARAMS:
            if key in params:
                params[key] = addr(params[key], ["script", i, key])
        line = _node_at(root, ["script", i]).start_mark.line + 1
        script.append(Step(op, params, raw.get("fatal", False), line))

    return Scenario(data["seed"], profiles, piconets, bonds, script, attacker, path.parent)


# -----------------------------------------------------------------------------
# Running
# -----------------------------------------------------------------------------
def build(scenario: Scenario) -> Simulation:
    """Fresh simulation holding the scenario's devices and pre-shared bonds."""
    sim = Simulation(scenario.seed)
    for profile in scenario.devices:
        sim.register_device(copy.deepcopy(profile))
    for a, b in scenario.bonds:
        key = sim.rng.randbytes(16)
        sim.device(a).bonds[b] = key
        sim.device(b).bonds[a] = key
    return sim


def default_attacker(scenario: Scenario, sim: Simulation) -> Device:
    return sim.registrant(scenario.attacker) if scenario.attacker else sim.devices[0]


class _Runner:
    def __init__(self, scenario: Scenario, sim: Simulation, outdir: Optional[Path]):
        self.scenario = scenario
        self.sim = sim
        self.outdir = outdir
        self.piconets = list(scenario.piconets)
        self.capture = sim.tap("medium")

    def attacker(self, p: dict) -> Device:
        if "attacker" in p:
            return self.sim.registrant(p["attacker"])
        return default_attacker(self.scenario, self.sim)

    def run_step(self, step: Step) -> tuple[str, dict, str]:
        return getattr(self, "op_" + step.op)(step.params)

    # ops return (outcome, fields, tool output) ---------------------------------
    def op_scan(self, p):
        found = self.sim.inquiry(self.attacker(p))
        out = "\n".join(["Scanning ..."] + [f"\t{a}\t{n}" for a, n, _ in found])
        return "ok", {"found": len(found)}, out

    def op_audit(self, p):
        report = attacks.surveil(self.sim, self.attacker(p), p["target"])
        psms = ",".join(f"0x{x:04x}" for x in report.open_psms) or "none"
        chans = ",".join(map(str, report.open_channels)) or "none"
        return "ok", {"name": report.name, "records": len(report.records), "psms": psms,
                      "channels": chans}, report.render()

    def op_spoof(self, p):
        atk = self.attacker(p)
        before = stack.adapter_info(atk)
        after = attacks.spoof(self.sim, atk, p["target"])
        return "ok", {"addr": after.addr, "name": after.name, "class": f"0x{after.cod:06x}"}, \
            render_spoof(before, after)

    def op_ping(self, p):
        atk = self.attacker(p)
        size = p.get("size", 44)
        st = stack.l2ping(self.sim, atk, p["target"], p.get("count", 5), p.get("delay", 1), size)
        return "ok", {"sent": st.sent, "received": st.received, "loss": st.loss_percent}, \
            stack.render_ping(atk, p["target"], size, st)

    def op_snarf(self, p):
        atk, ch = self.attacker(p), p.get("channel", 1)
        if "range" in p:
            lo, hi = (int(x) for x in p["range"].split("-"))
            got = attacks.snarf(self.sim, atk, p["target"], attacks.ReadRange(lo, hi), ch)
            return "ok", {"contacts": len(got)}, attacks.render_contacts(got)
        if "find" in p:
            got = attacks.snarf(self.sim, atk, p["target"], attacks.Find(p["find"]), ch)
            return "ok", {"contacts": len(got)}, attacks.render_contacts(got, p["find"])
        if "delete" in p:
            c = attacks.snarf(self.sim, atk, p["target"], attacks.Delete(p["delete"]), ch)
            return "ok", {"deleted": c.index}, f"delete entry {c.index} ({c.name}) ok"
        state = attacks.snarf(self.sim, atk, p["target"], attacks.Dial(p["dial"]), ch)
        return "ok", {"call": state}, f"dialing {p['dial']}: {state}"

    def op_bug(self, p):
        atk, ch = self.attacker(p), p.get("channel", 1)
        action = p.get("action", "info")
        if action == "info":
            info = attacks.bug_info(self.sim, atk, p["target"], ch)
            return "ok", {"model": info.model, "imei": info.imei}, info.render()
        if action == "dial":
            state = attacks.bug_dial(self.sim, atk, p["target"], p.get("number", ""), ch)
            return "ok", {"call": state}, f"call state: {state}"
        attacks.bug_hangup(self.sim, atk, p["target"], ch)
        return "ok", {}, "hung up"

    def op_whisper(self, p):
        inject = audio.read_raw(self.scenario.base_dir / p["inject"])
        target = p["target"]
        res = attacks.whisper(self.sim, self.attacker(p), target, inject, p.get("channel", 1))
        sink = self.sim.device(target).sink
        fields_ = {"recorded": len(res.recorded), "injected": len(inject),
                   "sink_matches": bytes(sink[-len(inject):] if inject else b"") == inject}
        if "record" in p and self.outdir is not None:
            audio.write_raw(self.outdir / p["record"], res.recorded)
            fields_["record"] = p["record"]
        return "ok", fields_, res.render(p.get("channel", 1))

    def op_fuzz(self, p):
        outcome = attacks.fuzz(self.sim, self.attacker(p), p["target"], p.get("mode", 12),
                               p.get("size", 1000), p.get("loop", False))
        return outcome.value, {}, f"fuzz mode {p.get('mode', 12)}: {outcome.value}"

    def op_pair(self, p):
        k = p.get("k", pairing.DEFAULT_K)
        pa = Passkey(p["passkey"], k)
        pb = Passkey(p.get("responder_passkey", p["passkey"]), k)
        outcome, tr = pairing.pair_passkey_entry(self.sim, self.sim.registrant(p["initiator"]),
                                                 p["responder"], pa, pb,
                                                 hardened=p.get("hardened", False))
        if isinstance(outcome, pairing.Success):
            return "ok", {"rounds": len(tr.rounds), "hardened": tr.hardened}, "pairing complete"
        return "aborted", {"round": outcome.round_index, "party": outcome.party}, \
            f"pairing aborted at round {outcome.round_index}"

    def op_pair_legacy(self, p):
        ok, log = pairing.pair_legacy(self.sim, self.sim.registrant(p["initiator"]), p["responder"],
                                      p["pin"])
        return ("ok" if ok else "failed"), {"packets": len(log)}, "\n".join(pairing.trace_rows(log))

    def op_connect(self, p):
        res = pairing.connect(self.sim, self.sim.registrant(p["initiator"]), p["responder"],
                              hardened=p.get("hardened", False), k=p.get("k", pairing.DEFAULT_K))
        if res.fresh_pairing and isinstance(res.outcome, pairing.Abort):
            return "aborted", {"fresh": True}, "authentication failed"
        return "ok", {"fresh": res.fresh_pairing}, "link authenticated"

    def op_force_repair(self, p):
        pairing.force_repair(self.sim, self.attacker(p), p["initiator"], p["responder"])
        return "ok", {}, "stored link keys deleted"

    def op_crackpair_passive(self, p):
        transcripts = attacks.extract_transcripts(self.capture)
        if not transcripts:
            raise IncompleteTranscript("no pairing session in the capture")
        res = attacks.passive_recover(transcripts[p.get("session", -1)])
        return "ok", {"passkey": str(res.passkey), "hmac_evaluations": res.hmac_evaluations}, \
            f"passkey: {res.passkey}"

    def op_crackpair_active(self, p):
        res = attacks.active_recover(self.sim, self.attacker(p), p["target"],
                                     p.get("max_attempts"), p.get("k", pairing.DEFAULT_K))
        return "ok", {"passkey": str(res.passkey), "aborted_attempts": res.aborted_attempts,
                      "sessions": res.sessions, "hmac_evaluations": res.hmac_evaluations}, \
            f"passkey: {res.passkey} after {res.aborted_attempts} aborted attempts"

    def op_bluechop(self, p):
        rep = attacks.bluechop(self.sim, self.attacker(p), self.piconets[p.get("piconet", 0)])
        return "ok", {"spoofed": rep.spoofed, "master": rep.master}, rep.render()

    def op_exchange(self, p):
        ok = self.sim.piconet_exchange(self.piconets[p.get("piconet", 0)], p["slave"])
        return ("ok" if ok else "lost"), {}, "exchange " + ("ok" if ok else "lost")

    def op_reset(self, p):
        self.sim.device(p["target"]).reset()
        return "ok", {}, "reset"


def execute(scenario: Scenario, outdir: Optional[Path] = None,
            sim: Optional[Simulation] = None) -> RunReport:
    """Run the script without writing capture or results files.

    ``sim`` defaults to a fresh :func:`build`; pass one to observe it with
    extra taps.  Audio ``record`` files go to ``outdir`` when it is given.
    """
    if sim is None:
        sim = build(scenario)
    runner = _Runner(scenario, sim, outdir)
    records = []
    aborted = False
    for i, step in enumerate(scenario.script, 1):
        try:
            outcome, fields_, output = runner.run_step(step)
            records.append(StepRecord(i, step.op, outcome, tuple(fields_.items()), output))
        except (BtSimError, ValueError, OSError, IndexError) as e:
            records.append(StepRecord(i, step.op, "error",
                                      (("error", type(e).__name__), ("message", str(e)))))
            if step.fatal:
                aborted = True
                break
    errors = sum(not r.ok for r in records)
    lines = [r.render() for r in records]
    lines.append(f"steps={len(records)} errors={errors}")
    return RunReport(tuple(records), attacks.sniff_format(runner.capture),
                     "\n".join(lines) + "\n", aborted)


def output_dir(explicit: Optional[str | os.PathLike] = None) -> Path:
    return Path(explicit or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def run(scenario: Scenario, outdir: Optional[str | os.PathLike] = None) -> RunReport:
    """Execute ``scenario`` and write ``capture.txt`` and ``results.txt``."""
    out = output_dir(outdir)
    out.mkdir(parents=True, exist_ok=True)
    report = execute(scenario, out)
    (out / CAPTURE_FILE).write_text(report.capture)
    (out / RESULTS_FILE).write_text(report.results)
    return report
