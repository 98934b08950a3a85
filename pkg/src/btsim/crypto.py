"""Key exchange groups, the bit-commitment function and the round keystream."""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass
from typing import Optional

import gmpy2

from .errors import InvalidPublic

NONCE_LEN = 16
COMMITMENT_LEN = 16

PublicKey = bytes
SecretKey = bytes
DhKey = bytes
Nonce = bytes
Commitment = bytes


def hmac_sha256(key: bytes, msg: bytes) -> bytes:
    return hmac.new(key, msg, hashlib.sha256).digest()


def commit(pk_a: PublicKey, pk_b: PublicKey, nonce: Nonce, bit: int) -> Commitment:
    """Commit to one passkey bit: HMAC-SHA256 keyed by the nonce.

    The message is ``pk_a || pk_b || z`` with ``z = 0x80 | bit``; the tag is
    truncated to its 16 most significant octets.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return hmac_sha256(nonce, pk_a + pk_b + bytes([0x80 | bit]))[:COMMITMENT_LEN]


def keystream(dhkey: DhKey, round_index: int, length: int) -> bytes:
    """Pad for one protocol round: HMAC(dhkey, round || block) blocks, concatenated."""
    if length <= 0:
        raise ValueError("keystream length must be positive")
    out = bytearray()
    block = 0
    while len(out) < length:
        out += hmac_sha256(dhkey, round_index.to_bytes(4, "big") + block.to_bytes(4, "big"))
        block += 1
    return bytes(out[:length])


def _powmod(base: int, exp: int, mod: int) -> int:
    return int(gmpy2.powmod(base, exp, mod))


def xor(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("xor operands differ in length")
    return bytes(x ^ y for x, y in zip(a, b))


@dataclass(frozen=True)
class ModpGroup:
    """Multiplicative group mod a prime, generated by ``g``.

    ``order`` is the order of ``g``; when given, public values are checked
    for membership in the generated subgroup.
    """

    p: int
    g: int
    order: Optional[int] = None
    name: str = ""

    @property
    def element_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def encode(self, x: int) -> bytes:
        return x.to_bytes(self.element_len, "big")

    def decode_public(self, pk: PublicKey) -> int:
        if len(pk) != self.element_len:
            raise InvalidPublic(f"public key must be {self.element_len} octets")
        y = int.from_bytes(pk, "big")
        if not 1 < y < self.p:
            raise InvalidPublic("public value outside the group")
        if self.order is not None and _powmod(y, self.order, self.p) != 1:
            raise InvalidPublic("public value outside the generated subgroup")
        return y

    def keygen_from_secret(self, x: int) -> tuple[SecretKey, PublicKey]:
        return self.encode(x), self.encode(_powmod(self.g, x, self.p))

    def keygen(self, rng: random.Random) -> tuple[SecretKey, PublicKey]:
        upper = (self.order or self.p - 1) - 1
        return self.keygen_from_secret(rng.randint(2, max(upper, 2)))

    def shared(self, secret: SecretKey, other_public: PublicKey) -> DhKey:
        y = self.decode_public(other_public)
        return self.encode(_powmod(y, int.from_bytes(secret, "big"), self.p))


_SAFE_PRIME_256 = 0xF7A8BFA7D27F624DC83D3DB9ED0D39AE5E1D8343E888F6AC9052580B7A4FEC93

# g = 4 is a quadratic residue, so it generates the prime-order subgroup
DEFAULT_GROUP = ModpGroup(p=_SAFE_PRIME_256, g=4, order=(_SAFE_PRIME_256 - 1) // 2,
                          name="modp-256")
TINY_GROUP = ModpGroup(p=23, g=5, order=22, name="toy-23")


def keygen(group: ModpGroup, rng: random.Random) -> tuple[SecretKey, PublicKey]:
    return group.keygen(rng)


def shared(group: ModpGroup, secret: SecretKey, other_public: PublicKey) -> DhKey:
    return group.shared(secret, other_public)


class NonceSource:
    """16-octet nonces: 12 random octets from the seeded RNG plus a counter."""

    def __init__(self, rng: random.Random):
        self._rng = rng
        self._counter = 0

    def __call__(self) -> Nonce:
        self._counter += 1
        return self._rng.getrandbits(96).to_bytes(12, "big") + self._counter.to_bytes(4, "big")
