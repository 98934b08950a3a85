"""
A tour of the lab
=================

Nine devices: three PCs, four phones and two headsets.  One PC surveys the
room, pings a phone, pulls a phonebook, knocks over a phone with an
oversized echo and finally talks into a headset.
"""

from btsim import FirmwareFlags, attacks, stack, testbed

sim = testbed.lab(seed=2011)
pc = sim.device("00:22:69:FD:F1:ED")

print(stack.adapter_info(pc).render())
print()

print("Scanning ...")
for addr, name, cod in sim.inquiry(pc):
    print(f"\t{addr}\t{name}\t{cod}")

# %%
# Fingerprint one phone: features, SDP records, open L2CAP and RFCOMM ports.

print(attacks.surveil(sim, pc, "00:21:AA:83:80:A7").render())

# %%
# l2ping with the classic ABCD... payload.

stats = stack.l2ping(sim, pc, "00:21:AA:83:80:A7", count=5, size=44)
print(stack.render_ping(pc, "00:21:AA:83:80:A7", 44, stats))

# %%
# Phonebook over AT commands.  The owner is asked once and accepts.

contacts = attacks.snarf(sim, pc, "00:12:D2:4B:0D:70", attacks.ReadRange(1, 80))
print(attacks.render_contacts(contacts))

# %%
# An echo larger than the default MTU crashes firmware that copies it
# blindly; after that the phone answers nothing.

w715 = sim.device("00:25:E7:27:86:D1")
w715.profile.firmware = FirmwareFlags(echo_overflow_crash=True)
print("fuzz:", attacks.fuzz(sim, pc, w715.addr, mode=12, size=1000))
print(stack.l2ping(sim, pc, w715.addr, count=5).summary())

# %%
# Fixed-PIN headset: inject a short tone, record the microphone.  This
# headset has no ambient fixture, so the recording comes back empty.

tone = bytes(range(256)) * 8
result = attacks.whisper(sim, pc, "00:21:19:06:6A:FA", tone)
print(result.render())
print("headset played back the injection:",
      bytes(sim.device("00:21:19:06:6A:FA").sink) == tone)
