import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from btsim import attacks, pairing, stack, testbed
from btsim.attacks import FuzzOutcome, ReadRange
from btsim.attacks.spoof import render_spoof
from btsim.attacks.surveil import feature_names
from btsim.errors import (
    AlreadyMember,
    EmptyPiconet,
    ExceededAttempts,
    HardenedTranscript,
    IncompleteTranscript,
    NotFound,
    Refused,
    Timeout,
)
from btsim.pairing import Passkey
from btsim.simcore import BdAddr, Piconet, Simulation

PC_J = "00:22:69:FD:F1:ED"
PC_R = "00:24:2C:B4:07:3B"
PC_D = "00:26:5E:C2:EA:08"
N6500 = "00:21:AA:83:80:A7"
N6230 = "00:12:D2:4B:0D:70"
W715 = "00:25:E7:27:86:D1"
WEP = "00:21:19:06:6A:FA"
BTC5 = "00:07:B0:11:8F:6D"


@pytest.fixture
def lab():
    return testbed.lab(1)


# --- surveillance -----------------------------------------------------------
def test_surveil_nokia(lab):
    r = attacks.surveil(lab, lab.device(PC_J), N6500)
    assert r.name == "nokia6500s"
    assert r.lmp_version == "2.0 (0x3)" and r.lmp_subversion == 0x2222
    assert r.features == bytes.fromhex("bfee0fce98390000")
    assert r.records[0].handle == 0x10000 and r.records[0].service_class_uuid16 == 0x1116
    assert r.open_psms == (0x0003, 0x000F)
    assert r.open_channels == (1, 9, 13)
    text = r.render()
    assert "LMP Version: 2.0 (0x3) LMP Subversion: 0x2222" in text
    assert "Features: 0xbf 0xee 0x0f 0xce 0x98 0x39 0x00 0x00" in text
    assert "UUID16 : 0x1116 - NAP (PAN/BNEP)" in text


def test_surveil_ignores_discoverability(lab):
    lab.device(N6500).profile.discoverable = False
    assert attacks.surveil(lab, lab.device(PC_J), N6500).name == "nokia6500s"


def test_surveil_fingerprint_deterministic():
    a = attacks.surveil(testbed.lab(1), testbed.lab(1).devices[0], N6500)
    b = attacks.surveil(testbed.lab(99), testbed.lab(99).devices[0], N6500)
    assert a.fingerprint == b.fingerprint


def test_feature_names():
    names = feature_names(bytes.fromhex("bfee0fce98390000"))
    assert names[:3] == ["<3-slot packets>", "<5-slot packets>", "<encryption>"]
    assert "<EDR eSCO 2 Mbps>" in names and "<hold mode>" not in names


# --- spoofing ---------------------------------------------------------------
def test_spoof_clones_identity(lab):
    atk = lab.device(PC_R)
    before = stack.adapter_info(atk)
    after = attacks.spoof(lab, atk, N6230)
    assert (after.addr, after.name, after.cod) == (BdAddr.parse(N6230), "nokia6230i", 0x500204)
    text = render_spoof(before, after)
    assert "Class Set: 0x500204" in text and f"New BD address: {N6230}" in text
    twins = [n for a, n, _ in lab.inquiry(lab.device(PC_J)) if str(a) == N6230]
    assert twins == ["nokia6230i", "nokia6230i"]
    restored = attacks.restore(lab, atk, before)
    assert restored == before


# --- sniffing ---------------------------------------------------------------
def test_hexdump_layout():
    lines = attacks.hexdump(stack.echo_payload(44))
    assert lines[0] == "    0000: 41 42 43 44 45 46 47 48 49 4a 4b 4c 4d 4e 4f 50  ABCDEFGHIJKLMNOP"
    assert lines[2] == "    0020: 61 62 63 64 65 66 67 68 41 42 43 44" + " " * 12 + "  abcdefghABCD"
    assert attacks.hexdump(b"\x00\x7f") == ["    0000: 00 7f" + " " * 42 + "  .."]


@given(st.binary(max_size=200))
def test_hexdump_covers_every_byte(data):
    lines = attacks.hexdump(data)
    assert len(lines) == (len(data) + 15) // 16
    recovered = bytes.fromhex("".join(line[10:57] for line in lines))
    assert recovered == data


def test_sniff_format_ping(lab):
    log = lab.tap()
    stack.l2ping(lab, lab.device(PC_J), N6500, 1, 1, 44)
    text = attacks.sniff_format(log)
    assert text.splitlines()[:3] == [
        "< ACL data: handle 11 flags 0x02 dlen 52",
        "    L2CAP(s): Echo req: dlen 44",
        "    0000: 41 42 43 44 45 46 47 48 49 4a 4b 4c 4d 4e 4f 50  ABCDEFGHIJKLMNOP",
    ]
    assert text.splitlines()[5].startswith("> ACL data: handle 11")
    assert attacks.sniff_format(lab.tap()) == ""


def test_sniff_timestamps(lab):
    log = lab.tap()
    stack.remote_name(lab, lab.device(PC_J), N6500)
    first = attacks.sniff_format(log, timestamps=True).splitlines()[0]
    assert first.startswith("[") and "Remote Name Request (0x01|0x0019)" in first


# --- fuzzing ----------------------------------------------------------------
def test_fuzz_patched_no_effect(lab):
    assert attacks.fuzz(lab, lab.device(PC_J), N6500, 12, 1000) is FuzzOutcome.NO_EFFECT


def test_fuzz_crash_then_ping_loss():
    sim = Simulation(0)
    pc = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.w715(echo_overflow_crash=True))
    assert attacks.fuzz(sim, pc, W715, 12, 1000) is FuzzOutcome.CRASHED
    assert stack.l2ping(sim, pc, W715, 5).loss_percent == 100
    with pytest.raises(Timeout):
        attacks.fuzz(sim, pc, W715)


@pytest.mark.parametrize("mode", [m for m in range(1, 12) if m != 8])
def test_non_echo_modes_never_crash(mode):
    sim = Simulation(0)
    pc = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.w715(echo_overflow_crash=True))
    assert attacks.fuzz(sim, pc, W715, mode, 5000, loop=True) is FuzzOutcome.NO_EFFECT


def test_fuzz_small_echo_is_harmless():
    sim = Simulation(0)
    pc = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.w715(echo_overflow_crash=True))
    assert attacks.fuzz(sim, pc, W715, 8, 672) is FuzzOutcome.NO_EFFECT


def test_fuzz_bad_args(lab):
    with pytest.raises(ValueError):
        attacks.fuzz(lab, lab.device(PC_J), N6500, 13)
    with pytest.raises(Timeout):
        attacks.fuzz(lab, lab.device(PC_J), "00:00:00:00:00:01")


# --- UDDA -------------------------------------------------------------------
def test_snarf_read_range(lab):
    got = attacks.snarf(lab, lab.device(PC_R), N6230, ReadRange(1, 80))
    text = attacks.render_contacts(got)
    assert text.splitlines()[0] == "+ 1 - rahim : +923216614455"
    assert text.splitlines()[-1] == "bluesnarfer: release rfcomm ok"


def test_snarf_find_case_insensitive(lab):
    got = attacks.snarf(lab, lab.device(PC_R), N6230, attacks.Find("asif"))
    assert [(c.index, c.name) for c in got] == [(16, "Asif")]
    with pytest.raises(NotFound):
        attacks.snarf(lab, lab.device(PC_R), N6230, attacks.Find("nobody"))


def test_snarf_delete_and_dial(lab):
    gone = attacks.snarf(lab, lab.device(PC_R), N6230, attacks.Delete(4))
    assert gone.name == "mutmain"
    assert 4 not in [c.index for c in lab.device(N6230).profile.contacts]
    with pytest.raises(NotFound):
        attacks.snarf(lab, lab.device(PC_R), N6230, attacks.Delete(4))
    assert attacks.snarf(lab, lab.device(PC_R), N6230, attacks.Dial("+46700000000")) \
        == "active:+46700000000"


def test_snarf_declined(lab):
    lab.device(N6230).profile.user_accepts = False
    with pytest.raises(Refused):
        attacks.snarf(lab, lab.device(PC_R), N6230, ReadRange(1, 80))


def test_bug_info_and_dial(lab):
    info = attacks.bug_info(lab, lab.device(PC_R), N6500)
    assert (info.manufacturer, info.model) == ("Nokia", "Nokia 6500S-1")
    assert info.capability == "+CGSM,+DS,+W"
    assert "Target Name: 'nokia6500s'" in info.render()
    assert attacks.bug_dial(lab, lab.device(PC_R), N6500, "0736471290") == "active:0736471290"
    attacks.bug_hangup(lab, lab.device(PC_R), N6500)
    assert lab.device(N6500).call_state is None


# --- car whisperer ------------------------------------------------------------
def test_whisper_conserves_audio():
    rng = random.Random(4)
    ambient, inject = rng.randbytes(4096), rng.randbytes(2048)
    sim = Simulation(0)
    atk = sim.register_device(testbed.pc_dihan())
    hs = sim.register_device(testbed.wep250(ambient=ambient))
    log = sim.tap()
    res = attacks.whisper(sim, atk, WEP, inject)
    assert res.recorded == ambient
    assert bytes(hs.sink) == inject
    assert res.handshake == (("AT+BRSF=26", "+BRSF: 63"),)
    assert (res.mtu, res.voice_setting) == (64, 0x0060)
    payloads = [p.layer.payload for p in log if p.layer_tag == "RFCOMM"]
    assert b"AT+BRSF=26\r" in payloads and b"\r\n+BRSF: 63\r\n" in payloads


@settings(max_examples=25, deadline=None)
@given(st.binary(max_size=700), st.binary(max_size=700))
def test_whisper_conservation_property(ambient, inject):
    sim = Simulation(0)
    atk = sim.register_device(testbed.pc_dihan())
    hs = sim.register_device(testbed.btc5(ambient=ambient))
    res = attacks.whisper(sim, atk, BTC5, inject)
    assert res.recorded == ambient and bytes(hs.sink) == inject


def test_whisper_needs_fixed_pin_or_consent():
    sim = Simulation(0)
    atk = sim.register_device(testbed.pc_dihan())
    sim.register_device(testbed.wep250(fixed_pin=None, auto_accept_connections=False))
    sim.device(WEP).profile.user_accepts = False
    with pytest.raises(Refused):
        attacks.whisper(sim, atk, WEP, b"")


# --- BlueChop ---------------------------------------------------------------
def test_bluechop(lab):
    pn = Piconet(PC_R, (WEP, N6500))
    atk = lab.device(PC_D)
    rep = attacks.bluechop(lab, atk, pn)
    assert rep.spoofed in pn.active_slaves and rep.master == BdAddr.parse(PC_R)
    assert atk.addr == rep.spoofed and rep.attacker_original == BdAddr.parse(PC_D)
    assert lab.piconet_exchange(pn, rep.spoofed) is False
    assert lab.piconet_exchange(pn, rep.spoofed) is True


def test_bluechop_errors(lab):
    with pytest.raises(EmptyPiconet):
        attacks.bluechop(lab, lab.device(PC_D), Piconet(PC_R))
    with pytest.raises(AlreadyMember):
        attacks.bluechop(lab, lab.device(WEP), Piconet(PC_R, (WEP,)))


# --- passkey recovery -------------------------------------------------------
def _pair(seed, value, hardened=False, k=20):
    sim = Simulation(seed)
    a = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.nokia6500s())
    log = sim.tap()
    pk = Passkey(value, k)
    outcome, tr = pairing.pair_passkey_entry(sim, a, N6500, pk, pk, hardened=hardened)
    return log, tr


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6 - 1), st.integers(0, 2**32))
def test_passive_recover_exact(value, seed):
    _, tr = _pair(seed, value)
    res = attacks.passive_recover(tr)
    assert res.passkey.value == value and res.hmac_evaluations == 20


def test_passive_from_capture():
    log, tr = _pair(3, 777777)
    [rebuilt] = attacks.extract_transcripts(log)
    assert rebuilt == tr
    assert attacks.passive_recover(rebuilt).passkey.value == 777777


def test_passive_refuses_hardened_and_incomplete():
    _, tr = _pair(3, 1, hardened=True)
    with pytest.raises(HardenedTranscript):
        attacks.passive_recover(tr)
    _, tr = _pair(3, 1)
    with pytest.raises(IncompleteTranscript):
        attacks.passive_recover(pairing.PairingTranscript(tr.pk_a, tr.pk_b, tr.rounds[:5]))


def test_extract_multiple_sessions():
    sim = Simulation(1)
    a = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.nokia6500s())
    log = sim.tap()
    for v in (5, 6):
        pairing.pair_passkey_entry(sim, a, N6500, Passkey(v), Passkey(v))
    trs = attacks.extract_transcripts(log)
    assert [attacks.passive_recover(t).passkey.value for t in trs] == [5, 6]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6 - 1))
def test_active_recover_aborts_equal_popcount(value):
    sim = Simulation(value)
    atk = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.nokia6500s(fixed_passkey=value))
    res = attacks.active_recover(sim, atk, N6500)
    assert res.passkey.value == value
    assert res.aborted_attempts == oracles.popcount(value)
    assert res.sessions == res.aborted_attempts + 1


def test_active_against_rotating_exceeds():
    sim = Simulation(2)
    atk = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.nokia6500s(rotate_passkey=True))
    with pytest.raises(ExceededAttempts) as ei:
        attacks.active_recover(sim, atk, N6500)
    assert ei.value.attempts == 21 and ei.value.aborted == 21
    assert 0 <= ei.value.best_guess < 10**6


def test_active_refused_without_unattended_pairing():
    sim = Simulation(2)
    atk = sim.register_device(testbed.pc_jishan())
    sim.register_device(testbed.nokia6500s())
    with pytest.raises(Refused):
        attacks.active_recover(sim, atk, N6500)
