"""
Recovering a passkey, and what stops it
=======================================

Two devices pair with passkey entry while a third one records the traffic.
Every round opens its commitment on the wire, so one HMAC per round is
enough to read the passkey back.  Then the same attacker pairs repeatedly
with a phone whose passkey never changes, and finally with one that draws a
fresh passkey every session.
"""

import random

from btsim import attacks, pairing, testbed
from btsim.errors import ExceededAttempts, HardenedTranscript
from btsim.pairing import Passkey
from btsim.simcore import Simulation

sim = Simulation(seed=42)
eve = sim.register_device(testbed.pc_dihan())
alice = sim.register_device(testbed.pc_jishan())
phone = sim.register_device(testbed.nokia6500s())

# eve's radio hears everything from here on
capture = sim.tap("eve")

secret = Passkey(482915)
outcome, _ = pairing.pair_passkey_entry(sim, alice, phone.addr, secret, secret)
print("pairing:", type(outcome).__name__)

transcript = attacks.extract_transcripts(capture)[-1]
result = attacks.passive_recover(transcript)
print(f"passive: passkey {result.passkey} after {result.hmac_evaluations} HMAC evaluations")

# %%
# Encrypting the round fields under the DH key leaves nothing to test
# a guessed bit against.

pairing.pair_passkey_entry(sim, alice, phone.addr, secret, secret, hardened=True)
try:
    attacks.passive_recover(attacks.extract_transcripts(capture)[-1])
except HardenedTranscript as e:
    print("passive on hardened transcript:", e)

# %%
# Active recovery: a wrong bit aborts the session at that round, so each
# abort pins one bit.  The number of aborts is the passkey's popcount.

sim = Simulation(seed=5)
eve = sim.register_device(testbed.pc_jishan())
fixed = sim.register_device(testbed.nokia6500s(fixed_passkey=654321))
result = attacks.active_recover(sim, eve, fixed.addr)
print(f"active: passkey {result.passkey}, {result.aborted_attempts} aborts "
      f"(popcount {bin(654321).count('1')}), {result.sessions} sessions")

rng = random.Random(0)
aborts = []
for seed in range(200):
    value = Passkey.random(rng).value
    s = Simulation(seed)
    a = s.register_device(testbed.pc_jishan())
    s.register_device(testbed.nokia6500s(fixed_passkey=value))
    aborts.append(attacks.active_recover(s, a, "00:21:AA:83:80:A7").aborted_attempts)
print(f"mean aborts over {len(aborts)} passkeys: {sum(aborts) / len(aborts):.2f}")

# %%
# A passkey that changes every session invalidates whatever was learned.

rotating = sim.register_device(testbed.w715(rotate_passkey=True))
try:
    attacks.active_recover(sim, eve, rotating.addr)
except ExceededAttempts as e:
    print("active against rotating passkey:", e)
