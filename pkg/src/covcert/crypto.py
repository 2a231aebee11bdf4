"""Key generation, DID derivation, Ed25519 signatures, and SHA-256 digests.

All other services build on these primitives. Everything here is a pure
function or an immutable value, so unrestricted concurrent use is safe.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .encoding import b58decode, b58encode, length_prefixed
from .errors import EmptyDocument, InvalidSeed

DID_METHOD = "cov"
DIGEST_SIZE = 32
SALT_SIZE = 16

# domain-separation prefixes for hash preimages
_DID_DOMAIN = b"\x01"


@dataclass(frozen=True)
class Did:
    """Decentralized identifier `did:cov:<base58 of a 32-byte digest>`."""

    identifier: str
    method: str = DID_METHOD

    def __post_init__(self):
        raw = b58decode(self.identifier)
        if len(raw) != DIGEST_SIZE:
            raise ValueError("DID identifier must decode to exactly 32 bytes")

    def __str__(self) -> str:
        return f"did:{self.method}:{self.identifier}"

    @classmethod
    def parse(cls, text: str) -> "Did":
        parts = text.split(":")
        if len(parts) != 3 or parts[0] != "did" or parts[1] != DID_METHOD:
            raise ValueError(f"not a did:{DID_METHOD} identifier: {text!r}")
        return cls(identifier=parts[2])

    @classmethod
    def from_digest(cls, raw: bytes) -> "Did":
        if len(raw) != DIGEST_SIZE:
            raise ValueError("digest must be 32 bytes")
        return cls(identifier=b58encode(raw))


@dataclass(frozen=True)
class Signature:
    """64-byte Ed25519 signature plus the DID that claims to have produced it."""

    sig: bytes
    signer: Did

    def __post_init__(self):
        if len(self.sig) != 64:
            raise ValueError("Ed25519 signatures are 64 bytes")


class KeyPair:
    """Ed25519 signing key with its 32-byte verification key."""

    __slots__ = ("_private", "public_key")

    def __init__(self, private: Ed25519PrivateKey):
        self._private = private
        self.public_key = private.public_key().public_bytes_raw()

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)

    def secret_bytes(self) -> bytes:
        """Raw 32-byte seed; needed only for persistence in demo state."""
        return self._private.private_bytes_raw()

    @classmethod
    def from_secret_bytes(cls, seed: bytes) -> "KeyPair":
        return cls(Ed25519PrivateKey.from_private_bytes(seed))


def generate_keypair(seed: bytes | None = None) -> KeyPair:
    """New keypair; deterministic when a 32-byte seed is supplied."""
    if seed is None:
        seed = os.urandom(32)
    elif len(seed) != 32:
        raise InvalidSeed(f"seed must be exactly 32 bytes, got {len(seed)}")
    return KeyPair(Ed25519PrivateKey.from_private_bytes(seed))


def digest(data: bytes) -> bytes:
    """SHA-256 of the input, always 32 bytes."""
    return hashlib.sha256(data).digest()


def digest_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def derive_did(document_number: str, pairwise_salt: bytes) -> Did:
    """Derive a pairwise DID from an identity-document number and a salt.

    Preimage: 0x01 || len-prefixed UTF-8 document number || salt. Distinct
    salts give unlinkable identifiers for the same document.
    """
    if not document_number:
        raise EmptyDocument("document number must be non-empty")
    if len(pairwise_salt) != SALT_SIZE:
        raise ValueError(f"salt must be exactly {SALT_SIZE} bytes")
    preimage = _DID_DOMAIN + length_prefixed(document_number.encode("utf-8")) + pairwise_salt
    return Did.from_digest(digest(preimage))


def fresh_did() -> Did:
    """Random DID for objects that need a content-free identifier."""
    return Did.from_digest(os.urandom(32))


def sign(key: KeyPair, message: bytes, signer: Did) -> Signature:
    return Signature(sig=key.sign(message), signer=signer)


def verify_sig(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """True iff the signature covers exactly these bytes under this key.

    Malformed inputs return False rather than raising.
    """
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


class DidRegistry:
    """Local DID method: maps rendered DIDs to verification keys.

    Stands in for the blockchain-hosted key registry; onboarding registers
    keys here and verifiers resolve them without contacting the issuer.
    """

    def __init__(self):
        self._keys: dict[str, bytes] = {}

    def register(self, did: Did, public_key: bytes) -> None:
        self._keys[str(did)] = public_key

    def resolve(self, did: Did | str) -> bytes | None:
        return self._keys.get(str(did))
