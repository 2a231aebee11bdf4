"""Verifiable-credential data model.

Claims are hidden behind salted per-field commitments; the certificate's
canonical byte form (commitments, never claim values) is what gets hashed,
anchored, and signed. Presentations reveal a chosen subset of claims and
are checkable against the anchored digest alone.

Certificates and presentations are immutable values; signing returns a new
value, so sharing across threads is safe.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

from . import crypto
from .crypto import Did, KeyPair, Signature
from .encoding import b64url_decode, b64url_encode, length_prefixed
from .errors import (
    DuplicateClaim,
    SelfIssuance,
    SignatureOrder,
    UnknownClaim,
    WrongSigner,
)

STATUS_PENDING = "pending"
STATUS_ISSUED = "issued"
STATUS_COMPLETE = "complete"

_COMMIT_DOMAIN = b"\x02"

PHOTO_CLAIM = "photo"


@dataclass(frozen=True)
class Claim:
    """A named field value plus the fresh salt that blinds its commitment."""

    name: str
    value: str | bytes
    salt: bytes

    def value_bytes(self) -> bytes:
        return self.value.encode("utf-8") if isinstance(self.value, str) else self.value

    def to_dict(self) -> dict:
        if isinstance(self.value, bytes):
            encoded, encoding = b64url_encode(self.value), "base64url"
        else:
            encoded, encoding = self.value, "utf-8"
        return {
            "name": self.name,
            "value": encoded,
            "value_encoding": encoding,
            "salt": b64url_encode(self.salt),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Claim":
        value = d["value"] if d["value_encoding"] == "utf-8" else b64url_decode(d["value"])
        return cls(name=d["name"], value=value, salt=b64url_decode(d["salt"]))


@dataclass(frozen=True)
class Commitment:
    """Digest of (name, value, salt); recomputable from a revealed claim."""

    name: str
    digest: bytes

    @classmethod
    def of(cls, claim: Claim) -> "Commitment":
        preimage = (
            _COMMIT_DOMAIN
            + length_prefixed(claim.name.encode("utf-8"))
            + length_prefixed(claim.value_bytes())
            + claim.salt
        )
        return cls(name=claim.name, digest=crypto.digest(preimage))

    def matches(self, claim: Claim) -> bool:
        return Commitment.of(claim).digest == self.digest


@dataclass(frozen=True)
class Certificate:
    """Dual-signed credential: public metadata plus salted commitments.

    Claim values never appear here; the holder keeps them (with salts)
    alongside the certificate in their pod.
    """

    id: Did
    issuer: Did
    holder: Did
    issued_at: int
    status: str
    commitments: tuple[Commitment, ...]
    photo_bound: bool = False
    issuer_signature: Signature | None = None
    holder_signature: Signature | None = None
    extra_signatures: tuple[Signature, ...] = ()
    anchor_url: str | None = None

    def commitment(self, name: str) -> Commitment | None:
        for c in self.commitments:
            if c.name == name:
                return c
        return None

    def to_dict(self) -> dict:
        def sig_dict(s: Signature | None):
            if s is None:
                return None
            return {"sig": b64url_encode(s.sig), "signer": str(s.signer)}

        return {
            "id": str(self.id),
            "issuer": str(self.issuer),
            "holder": str(self.holder),
            "issued_at": self.issued_at,
            "status": self.status,
            "photo_bound": self.photo_bound,
            "commitments": [
                {"name": c.name, "digest": c.digest.hex()} for c in self.commitments
            ],
            "issuer_signature": sig_dict(self.issuer_signature),
            "holder_signature": sig_dict(self.holder_signature),
            "extra_signatures": [sig_dict(s) for s in self.extra_signatures],
            "anchor_url": self.anchor_url,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        def sig(s):
            if s is None:
                return None
            return Signature(sig=b64url_decode(s["sig"]), signer=Did.parse(s["signer"]))

        return cls(
            id=Did.parse(d["id"]),
            issuer=Did.parse(d["issuer"]),
            holder=Did.parse(d["holder"]),
            issued_at=d["issued_at"],
            status=d["status"],
            commitments=tuple(
                Commitment(name=c["name"], digest=bytes.fromhex(c["digest"]))
                for c in d["commitments"]
            ),
            photo_bound=d["photo_bound"],
            issuer_signature=sig(d.get("issuer_signature")),
            holder_signature=sig(d.get("holder_signature")),
            extra_signatures=tuple(sig(s) for s in d.get("extra_signatures", [])),
            anchor_url=d.get("anchor_url"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Presentation:
    """Selective-disclosure view: revealed claims plus all commitments."""

    certificate_public: Certificate
    revealed: tuple[Claim, ...]
    anchor_url: str
    photo_url: str | None = None

    def to_dict(self) -> dict:
        return {
            "certificate": self.certificate_public.to_dict(),
            "revealed": [c.to_dict() for c in self.revealed],
            "anchor_url": self.anchor_url,
            "photo_url": self.photo_url,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Presentation":
        return cls(
            certificate_public=Certificate.from_dict(d["certificate"]),
            revealed=tuple(Claim.from_dict(c) for c in d["revealed"]),
            anchor_url=d["anchor_url"],
            photo_url=d.get("photo_url"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Presentation":
        return cls.from_dict(json.loads(text))


@dataclass
class CredentialVerifyReport:
    """Per-check outcome of presentation verification; never raises."""

    checks: dict[str, bool] = field(default_factory=dict)
    revealed: dict[str, str | bytes] = field(default_factory=dict)
    reasons: list[str] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return bool(self.checks) and all(self.checks.values())


def new_certificate(
    issuer: Did,
    holder: Did,
    claims: list[tuple[str, str | bytes]],
    photo: bytes | None = None,
    status: str = STATUS_ISSUED,
) -> tuple[Certificate, list[Claim]]:
    """Build an unsigned certificate; returns it with the full salted claims.

    The claims (values + salts) go to the holder's pod; the certificate
    itself carries only the commitments.
    """
    names = [n for n, _ in claims]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise DuplicateClaim(f"duplicate claim name(s): {sorted(dupes)}")
    if issuer == holder:
        raise SelfIssuance("issuer and holder must be distinct DIDs")
    full = [Claim(name=n, value=v, salt=os.urandom(crypto.SALT_SIZE)) for n, v in claims]
    if photo is not None:
        if PHOTO_CLAIM in names:
            raise DuplicateClaim(f"claim name {PHOTO_CLAIM!r} is reserved for the photo")
        full.append(Claim(name=PHOTO_CLAIM, value=photo, salt=os.urandom(crypto.SALT_SIZE)))
    full.sort(key=lambda c: c.name)
    cert = Certificate(
        id=crypto.fresh_did(),
        issuer=issuer,
        holder=holder,
        issued_at=int(time.time()),
        status=status,
        commitments=tuple(Commitment.of(c) for c in full),
        photo_bound=photo is not None,
    )
    return cert, full


def canonical_form(cert: Certificate) -> bytes:
    """Deterministic byte serialization used for hashing and signing.

    Fixed field order (id, issuer, holder, issued_at, status, photo_bound,
    commitments), compact JSON, commitments sorted by name, digests as
    lowercase hex. Signatures and anchor_url are attached after this digest
    exists and are therefore excluded. Layout: docs/wire-format.md.
    """
    body = {
        "id": str(cert.id),
        "issuer": str(cert.issuer),
        "holder": str(cert.holder),
        "issued_at": cert.issued_at,
        "status": cert.status,
        "photo_bound": cert.photo_bound,
        "commitments": [
            {"name": c.name, "digest": c.digest.hex()}
            for c in sorted(cert.commitments, key=lambda c: c.name)
        ],
    }
    return json.dumps(body, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def certificate_digest(cert: Certificate) -> bytes:
    return crypto.digest(canonical_form(cert))


def _require_key_for(did: Did, key: KeyPair, registry) -> None:
    if registry is not None:
        expected = registry.resolve(did)
        if expected is not None and expected != key.public_key:
            raise WrongSigner(f"key does not belong to {did}")


def issuer_sign(cert: Certificate, issuer_key: KeyPair, registry=None) -> Certificate:
    """Sign the canonical digest as the issuer.

    When a DID registry is supplied, the key must match the issuer's
    registered verification key.
    """
    _require_key_for(cert.issuer, issuer_key, registry)
    sig = crypto.sign(issuer_key, certificate_digest(cert), cert.issuer)
    return dataclasses.replace(cert, issuer_signature=sig)


def holder_countersign(cert: Certificate, holder_key: KeyPair, registry=None) -> Certificate:
    if cert.issuer_signature is None:
        raise SignatureOrder("holder countersignature requires a prior issuer signature")
    _require_key_for(cert.holder, holder_key, registry)
    sig = crypto.sign(holder_key, certificate_digest(cert), cert.holder)
    return dataclasses.replace(cert, holder_signature=sig)


def add_signature(cert: Certificate, key: KeyPair, signer: Did) -> Certificate:
    """Append a supply-chain signature (e.g. the lab's) after the main two."""
    if cert.issuer_signature is None:
        raise SignatureOrder("extra signatures require a prior issuer signature")
    sig = crypto.sign(key, certificate_digest(cert), signer)
    return dataclasses.replace(cert, extra_signatures=cert.extra_signatures + (sig,))


def make_presentation(
    cert: Certificate,
    full_claims: list[Claim],
    reveal: set[str],
    photo_url: str | None = None,
) -> Presentation:
    """Presentation revealing exactly the named claims; hidden salts stay out."""
    by_name = {c.name: c for c in full_claims}
    unknown = reveal - set(by_name)
    if unknown:
        raise UnknownClaim(f"cannot reveal unknown claim(s): {sorted(unknown)}")
    public_cert = dataclasses.replace(cert)
    revealed = tuple(sorted((by_name[n] for n in reveal), key=lambda c: c.name))
    return Presentation(
        certificate_public=public_cert,
        revealed=revealed,
        anchor_url=cert.anchor_url or "",
        photo_url=photo_url,
    )


def verify_presentation(
    pres: Presentation,
    anchored: bytes | None,
    issuer_pubkey: bytes | None,
    holder_pubkey: bytes | None,
    extra_pubkeys: dict[str, bytes] | None = None,
) -> CredentialVerifyReport:
    """Check anchor match, both signatures, and every revealed commitment.

    Failures are report entries, never exceptions; pass None for keys or
    anchor that could not be resolved to mark those checks failed.
    """
    report = CredentialVerifyReport()
    cert = pres.certificate_public
    local = certificate_digest(cert)

    report.checks["anchor_match"] = anchored is not None and local == anchored
    if anchored is None:
        report.reasons.append("AnchorMissing")
    elif local != anchored:
        report.reasons.append("AnchorMismatch")

    def sig_ok(sig: Signature | None, pubkey: bytes | None) -> bool:
        return (
            sig is not None
            and pubkey is not None
            and crypto.verify_sig(pubkey, local, sig.sig)
        )

    report.checks["issuer_sig"] = sig_ok(cert.issuer_signature, issuer_pubkey)
    report.checks["holder_sig"] = sig_ok(cert.holder_signature, holder_pubkey)
    if not report.checks["issuer_sig"]:
        report.reasons.append("IssuerSignatureInvalid")
    if not report.checks["holder_sig"]:
        report.reasons.append("HolderSignatureInvalid")

    for sig in cert.extra_signatures:
        key = (extra_pubkeys or {}).get(str(sig.signer))
        name = f"extra_sig:{sig.signer}"
        report.checks[name] = sig_ok(sig, key)
        if not report.checks[name]:
            report.reasons.append(f"ExtraSignatureInvalid:{sig.signer}")

    commitments_ok = True
    for claim in pres.revealed:
        stored = cert.commitment(claim.name)
        if stored is None or not stored.matches(claim):
            commitments_ok = False
            report.reasons.append(f"CommitmentMismatch:{claim.name}")
    report.checks["commitments"] = commitments_ok

    if report.overall:
        report.revealed = {c.name: c.value for c in pres.revealed}
    return report
