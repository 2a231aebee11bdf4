"""Role workflows wiring crypto, credentials, pods, ledger, and QR codec.

A `Deployment` bundles one DID registry, one pod server (plus optional
cloud replica), and one ledger consortium, and exposes the issuer, holder,
lab, and verifier journeys: onboarding with simulated regulator and email
checks, certification with identity re-hashing against the ledger,
selective-disclosure presentation, verification, the off-site lab and
vaccination variants, and opt-out with orphaning.

Regulator lookups and email delivery are fixtures (a table and an outbox
list/file); verifiers need no account.
"""

from __future__ import annotations

import dataclasses
import json
import os
import secrets
import time
from dataclasses import dataclass, field

from . import credential, crypto, qrcodec
from .credential import (
    PHOTO_CLAIM,
    STATUS_COMPLETE,
    STATUS_PENDING,
    Certificate,
    Claim,
    Presentation,
)
from .crypto import Did, DidRegistry, KeyPair
from .errors import (
    AlreadyComplete,
    BadEmailDomain,
    CovcertError,
    EmptyDocument,
    EmptyPhoto,
    Forbidden,
    IdentityMismatch,
    IssuerInactive,
    MissingClaim,
    NotFound,
    Pending,
    RegistryRejected,
    SampleUnknown,
    TokenRejected,
    UnknownClaim,
)
from .ledger import Consortium
from .pod import PUBLIC, AccessRule, PodServer

IDENTITY_PHOTO_PATH = "identity/photo"
IDENTITY_DOC_PATH = "identity/document_number"
CERT_DIR = "certs"
NOTIFY_DIR = "notifications"

_IDENTITY_DOMAIN = b"\x03"

STATE_PENDING_EMAIL = "pending_email"
STATE_ACTIVE = "active"

ROLE_ISSUER = "issuer"
ROLE_LAB = "lab"


@dataclass
class IssuerAccount:
    did: Did
    registration_no: str
    branch: str
    email: str
    state: str
    keypair: KeyPair
    role: str = ROLE_ISSUER
    _token: str | None = None


@dataclass
class HolderAccount:
    did: Did
    document_number: str
    keypair: KeyPair
    salt: bytes


@dataclass(frozen=True)
class SampleTag:
    sample_id: str
    holder_did: str
    pending_cert_id: str

    def to_body(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "holder_did": self.holder_did,
            "pending_cert_id": self.pending_cert_id,
        }

    @classmethod
    def from_body(cls, body: dict) -> "SampleTag":
        return cls(body["sample_id"], body["holder_did"], body["pending_cert_id"])


@dataclass
class VerifyReport:
    checks: dict[str, bool] = field(default_factory=dict)
    revealed: dict[str, str | bytes] = field(default_factory=dict)
    reasons: list[str] = field(default_factory=list)
    photo: bytes | None = None

    # photo_available is advisory: when absent the verifier falls back to
    # inspecting a physical ID, as in the no-photo variant
    REQUIRED = ("anchor_match", "issuer_sig", "holder_sig", "commitments")

    @property
    def overall(self) -> bool:
        required = [v for k, v in self.checks.items() if k != "photo_available"]
        return bool(required) and all(required)

    def to_dict(self) -> dict:
        revealed = {
            k: (v if isinstance(v, str) else "<binary>") for k, v in self.revealed.items()
        }
        return {
            "overall": self.overall,
            "checks": self.checks,
            "revealed": revealed,
            "reasons": self.reasons,
        }


def identity_digest(document_number: str, photo: bytes) -> bytes:
    from .encoding import length_prefixed

    preimage = (
        _IDENTITY_DOMAIN
        + length_prefixed(document_number.encode("utf-8"))
        + length_prefixed(photo)
    )
    return crypto.digest(preimage)


@dataclass
class CertificateRecord:
    """Full certificate as stored in the holder's pod: claims included."""

    certificate: Certificate
    claims: list[Claim]

    def to_json(self) -> str:
        return json.dumps(
            {
                "certificate": self.certificate.to_dict(),
                "claims": [c.to_dict() for c in self.claims],
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "CertificateRecord":
        d = json.loads(text)
        return cls(
            certificate=Certificate.from_dict(d["certificate"]),
            claims=[Claim.from_dict(c) for c in d["claims"]],
        )


class Deployment:
    """One running instance of the whole system, suitable for tests and demos."""

    def __init__(
        self,
        regulator: dict[str, dict] | None = None,
        pods: PodServer | None = None,
        replica: PodServer | None = None,
        consortium: Consortium | None = None,
        outbox_path: str | None = None,
        auto_blocks: bool = True,
    ):
        self.registry = DidRegistry()
        self.pods = pods or PodServer()
        self.replica = replica
        self.consortium = consortium or Consortium.create()
        self.regulator = regulator if regulator is not None else DEFAULT_REGULATOR
        self.outbox: list[tuple[str, str]] = []
        self.outbox_path = outbox_path
        # confirm anchors synchronously unless a real-time block timer runs
        self.auto_blocks = auto_blocks
        self.issuers: dict[str, IssuerAccount] = {}
        self.holders: dict[str, HolderAccount] = {}
        self._samples: dict[str, SampleTag] = {}

    # -- helpers -------------------------------------------------------

    @property
    def node(self):
        return self.consortium.entry_node

    def _anchor(self, cert_id: str, digest: bytes) -> str:
        receipt = self.node.submit_anchor(cert_id, digest)
        if self.auto_blocks:
            self.consortium.settle()
        return receipt.anchor_url

    def _send_email(self, email: str, token: str) -> None:
        self.outbox.append((email, token))
        if self.outbox_path:
            with open(self.outbox_path, "a", encoding="utf-8") as fh:
                fh.write(f"{email}\t{token}\n")

    # -- issuer onboarding (two-factor: regulator cross-check + email) --

    def onboard_issuer(
        self, registration_no: str, branch: str, email: str, role: str = ROLE_ISSUER
    ) -> IssuerAccount:
        entry = self.regulator.get(registration_no)
        if entry is None or entry["branch"] != branch:
            raise RegistryRejected(
                f"registration {registration_no!r} / branch {branch!r} not on record"
            )
        domain = email.rsplit("@", 1)[-1].lower() if "@" in email else ""
        if domain != entry["domain"].lower():
            raise BadEmailDomain(
                f"email must be at the registered domain {entry['domain']}"
            )
        keypair = crypto.generate_keypair()
        did = crypto.derive_did(registration_no, os.urandom(crypto.SALT_SIZE))
        self.registry.register(did, keypair.public_key)
        account = IssuerAccount(
            did=did,
            registration_no=registration_no,
            branch=branch,
            email=email,
            state=STATE_PENDING_EMAIL,
            keypair=keypair,
            role=role,
        )
        token = secrets.token_urlsafe(16)
        account._token = token
        self._send_email(email, token)
        # registration data lives in the issuer's own pod
        self.pods.create_pod(did)
        self.pods.put_resource(
            did,
            did,
            "registration",
            json.dumps(
                {"registration_no": registration_no, "branch": branch, "email": email}
            ).encode("utf-8"),
            content_type="application/json",
        )
        self.issuers[str(did)] = account
        return account

    def confirm_issuer(self, account: IssuerAccount, token: str) -> IssuerAccount:
        if account.state != STATE_PENDING_EMAIL or account._token is None:
            raise TokenRejected("account is not awaiting email confirmation")
        if not secrets.compare_digest(account._token, token):
            raise TokenRejected("token does not match")
        account._token = None
        account.state = STATE_ACTIVE
        return account

    # -- holder onboarding ---------------------------------------------

    def onboard_holder(self, document_number: str, id_photo: bytes) -> HolderAccount:
        if not document_number:
            raise EmptyDocument("document number must be non-empty")
        if not id_photo:
            raise EmptyPhoto("an identity photo is required")
        salt = os.urandom(crypto.SALT_SIZE)
        did = crypto.derive_did(document_number, salt)
        keypair = crypto.generate_keypair()
        self.pods.create_pod(did)  # PodExists surfaces on re-onboarding
        self.registry.register(did, keypair.public_key)
        self.pods.put_resource(
            did, did, IDENTITY_PHOTO_PATH, id_photo, content_type="image/jpeg", permanent=True
        )
        self.pods.put_resource(
            did, did, IDENTITY_DOC_PATH, document_number.encode("utf-8"),
            content_type="text/plain",
        )
        self._anchor(str(did), identity_digest(document_number, id_photo))
        account = HolderAccount(
            did=did, document_number=document_number, keypair=keypair, salt=salt
        )
        self.holders[str(did)] = account
        return account

    # -- certification --------------------------------------------------

    def _check_identity(self, issuer: IssuerAccount, holder: HolderAccount) -> bytes:
        """Issuer-side identity check: re-hash pod identity data, compare anchor."""
        if issuer.state != STATE_ACTIVE:
            raise IssuerInactive(f"issuer {issuer.registration_no} is not active")
        grant = [AccessRule(agent=str(issuer.did), modes=frozenset({"read"}))]
        self.pods.set_acl(holder.did, holder.did, IDENTITY_PHOTO_PATH, grant)
        self.pods.set_acl(holder.did, holder.did, IDENTITY_DOC_PATH, grant)
        photo = self.pods.get_resource(holder.did, issuer.did, IDENTITY_PHOTO_PATH)
        doc = self.pods.get_resource(holder.did, issuer.did, IDENTITY_DOC_PATH)
        local = identity_digest(doc.decode("utf-8"), photo)
        anchored, _ = self.node.lookup_anchor(str(holder.did))
        if local != anchored:
            raise IdentityMismatch("pod identity data disagrees with the ledger anchor")
        return photo

    def _store_record(self, holder: HolderAccount, record: CertificateRecord) -> None:
        cert = record.certificate
        path = f"{CERT_DIR}/{cert.id.identifier}"
        self.pods.put_resource(
            holder.did, holder.did, path, record.to_json().encode("utf-8"),
            content_type="application/json",
        )
        photo = next((c for c in record.claims if c.name == PHOTO_CLAIM), None)
        if photo is not None:
            # holder's choice: expose the photo claim (value + salt) so a
            # verifier can fetch it and recommit when the QR omits the photo
            self.pods.put_resource(
                holder.did, holder.did, f"{path}/photo",
                json.dumps(photo.to_dict(), sort_keys=True).encode("utf-8"),
                content_type="application/json",
                acl=[AccessRule(agent=PUBLIC, modes=frozenset({"read"}))],
            )

    def _photo_url(self, holder_did: Did, cert: Certificate) -> str | None:
        if not cert.photo_bound:
            return None
        return f"pod://{holder_did}/{CERT_DIR}/{cert.id.identifier}/photo"

    def certify(
        self,
        issuer: IssuerAccount,
        holder: HolderAccount,
        claims: list[tuple[str, str | bytes]],
        photo_binding: bool = True,
    ) -> tuple[Certificate, qrcodec.QrPayload]:
        photo = self._check_identity(issuer, holder)
        cert, full_claims = credential.new_certificate(
            issuer.did, holder.did, claims,
            photo=photo if photo_binding else None,
            status=STATUS_COMPLETE,
        )
        cert = credential.issuer_sign(cert, issuer.keypair, self.registry)
        cert = credential.holder_countersign(cert, holder.keypair, self.registry)
        anchor_url = self._anchor(str(cert.id), credential.certificate_digest(cert))
        cert = dataclasses.replace(cert, anchor_url=anchor_url)
        self._store_record(holder, CertificateRecord(cert, full_claims))
        reveal = {c.name for c in full_claims if c.name != PHOTO_CLAIM}
        qr = self.present(holder, cert.id.identifier, reveal)
        return cert, qr

    def certify_vaccination(
        self,
        issuer: IssuerAccount,
        holder: HolderAccount,
        vaccine_source: str,
        vaccine_batch: str,
        photo_binding: bool = True,
    ) -> tuple[Certificate, qrcodec.QrPayload]:
        if not vaccine_source or not vaccine_batch:
            raise MissingClaim("vaccination certificates require source and batch")
        claims = [
            ("event", "vaccination"),
            ("vaccine_source", vaccine_source),
            ("vaccine_batch", vaccine_batch),
            ("administered_at", str(int(time.time()))),
        ]
        return self.certify(issuer, holder, claims, photo_binding=photo_binding)

    # -- off-site lab variant -------------------------------------------

    def certify_pending(
        self, issuer: IssuerAccount, holder: HolderAccount, sample_id: str,
        test_type: str = "antibody",
    ) -> tuple[Certificate, qrcodec.QrPayload]:
        self._check_identity(issuer, holder)
        cert, full_claims = credential.new_certificate(
            issuer.did, holder.did,
            [("test_type", test_type), ("sample_id", sample_id)],
            status=STATUS_PENDING,
        )
        self._store_record(holder, CertificateRecord(cert, full_claims))
        tag = SampleTag(
            sample_id=sample_id,
            holder_did=str(holder.did),
            pending_cert_id=cert.id.identifier,
        )
        self._samples[sample_id] = tag
        qr = qrcodec.QrPayload(kind=qrcodec.KIND_SAMPLE_TAG, body=tag.to_body())
        return cert, qr

    def lab_complete(
        self,
        lab: IssuerAccount,
        sample_tag: SampleTag,
        result_claims: list[tuple[str, str]],
    ) -> Certificate:
        if lab.state != STATE_ACTIVE:
            raise IssuerInactive("lab account is not active")
        known = self._samples.get(sample_tag.sample_id)
        if known is None or known != sample_tag:
            raise SampleUnknown(f"no pending certificate for sample {sample_tag.sample_id!r}")
        holder = self.holders[sample_tag.holder_did]
        path = f"{CERT_DIR}/{sample_tag.pending_cert_id}"
        try:
            raw = self.pods.get_resource(holder.did, holder.did, path)
        except NotFound as exc:
            raise SampleUnknown("pending certificate is gone from the holder pod") from exc
        record = CertificateRecord.from_json(raw.decode("utf-8"))
        if record.certificate.status == STATUS_COMPLETE:
            raise AlreadyComplete(f"sample {sample_tag.sample_id!r} was already certified")

        new_claims = [
            Claim(name=n, value=v, salt=os.urandom(crypto.SALT_SIZE))
            for n, v in result_claims
        ]
        all_claims = sorted(record.claims + new_claims, key=lambda c: c.name)
        issuer = self.issuers[str(record.certificate.issuer)]
        cert = dataclasses.replace(
            record.certificate,
            status=STATUS_COMPLETE,
            commitments=tuple(credential.Commitment.of(c) for c in all_claims),
        )
        cert = credential.issuer_sign(cert, issuer.keypair, self.registry)
        cert = credential.holder_countersign(cert, holder.keypair, self.registry)
        cert = credential.add_signature(cert, lab.keypair, lab.did)
        anchor_url = self._anchor(str(cert.id), credential.certificate_digest(cert))
        cert = dataclasses.replace(cert, anchor_url=anchor_url)
        self._store_record(holder, CertificateRecord(cert, all_claims))
        self.pods.put_resource(
            holder.did, holder.did, f"{NOTIFY_DIR}/{cert.id.identifier}",
            json.dumps({"event": "certificate_completed", "cert": str(cert.id)}).encode(),
            content_type="application/json",
        )
        return cert

    # -- presentation and verification ----------------------------------

    def load_record(self, holder_did: Did | str, cert_ref: str) -> CertificateRecord:
        raw = self.pods.get_resource(holder_did, holder_did, f"{CERT_DIR}/{cert_ref}")
        return CertificateRecord.from_json(raw.decode("utf-8"))

    def present(
        self, holder: HolderAccount, cert_ref: str, reveal: set[str]
    ) -> qrcodec.QrPayload:
        """Holder builds a selective-disclosure QR from their pod copy."""
        record = self.load_record(holder.did, cert_ref)
        cert = record.certificate
        pres = credential.make_presentation(
            cert, record.claims, set(reveal),
            photo_url=self._photo_url(holder.did, cert),
        )
        return qrcodec.QrPayload(
            kind=qrcodec.KIND_PRESENTATION,
            body=pres.to_dict(),
            anchor_url=cert.anchor_url or "",
        )

    def _fetch_photo_claim(self, pres: Presentation) -> Claim | None:
        if pres.photo_url is None:
            return None
        try:
            _, rest = pres.photo_url.split("pod://", 1)
            owner, path = rest.split("/", 1)
            raw = self.pods.get_resource(owner, "anonymous-verifier", path)
            return Claim.from_dict(json.loads(raw.decode("utf-8")))
        except (ValueError, KeyError, CovcertError):
            return None

    def verify(self, qr_text: str) -> VerifyReport:
        """Verifier journey: decode, fetch anchor, check signatures and claims.

        Decode failures raise (the scan itself failed); everything after
        decoding is reported, never raised.
        """
        payload = qrcodec.decode(qr_text)
        pres = payload.presentation()
        cert = pres.certificate_public
        report = VerifyReport()

        if cert.status == STATUS_PENDING:
            report.checks["anchor_match"] = False
            report.reasons.append("Pending")
            return report

        anchored = None
        try:
            anchored, _ = self.node.lookup_anchor(payload.anchor_url or str(cert.id))
        except Pending:
            report.reasons.append("Pending")
        except NotFound:
            pass  # reported as AnchorMissing by verify_presentation

        extra_keys = {
            str(s.signer): self.registry.resolve(s.signer) for s in cert.extra_signatures
        }
        cred_report = credential.verify_presentation(
            pres,
            anchored,
            self.registry.resolve(cert.issuer),
            self.registry.resolve(cert.holder),
            {k: v for k, v in extra_keys.items() if v is not None},
        )
        report.checks.update(cred_report.checks)
        report.reasons.extend(cred_report.reasons)
        report.revealed = dict(cred_report.revealed)

        if cert.photo_bound:
            photo_claim = next(
                (c for c in pres.revealed if c.name == PHOTO_CLAIM), None
            ) or self._fetch_photo_claim(pres)
            stored = cert.commitment(PHOTO_CLAIM)
            available = (
                photo_claim is not None
                and stored is not None
                and stored.matches(photo_claim)
            )
            report.checks["photo_available"] = available
            if available:
                report.photo = photo_claim.value_bytes()
            else:
                report.reasons.append("PhotoUnavailable")
        else:
            report.checks["photo_available"] = False
            report.reasons.append("PhysicalIdRequired")
        return report

    # -- replication and opt-out ----------------------------------------

    def backup(self, holder: HolderAccount) -> dict:
        if self.replica is None:
            raise CovcertError("no replica server configured")
        return self.pods.replicate_pod(holder.did, self.replica)

    def restore(self, holder: HolderAccount) -> dict:
        """Rebuild a wiped primary pod from the cloud replica."""
        if self.replica is None:
            raise CovcertError("no replica server configured")
        return self.replica.replicate_pod(holder.did, self.pods)

    def opt_out(self, holder: HolderAccount) -> dict:
        """Erase every pod resource (and replica); anchors become orphans."""
        orphaned = [f"anchor://{self.node.chain_id}/{holder.did}"]
        for path in self.pods.list_paths(holder.did, holder.did):
            if path.startswith(f"{CERT_DIR}/") and not path.endswith("/photo"):
                record = self.load_record(holder.did, path.split("/", 1)[1])
                if record.certificate.anchor_url:
                    orphaned.append(record.certificate.anchor_url)
        self.pods.drop_pod(holder.did)
        if self.replica is not None:
            self.replica.drop_pod(holder.did)
        self.holders.pop(str(holder.did), None)
        return {"orphaned_anchor_urls": sorted(set(orphaned))}


# simulated regulator table: registration number -> branch + email domain
DEFAULT_REGULATOR = {
    "GPhC-100001": {"branch": "High Street Pharmacy", "domain": "pharmacy.example"},
    "GPhC-100002": {"branch": "Station Road Pharmacy", "domain": "stationrx.example"},
    "LAB-200001": {"branch": "Central Serology Lab", "domain": "serolab.example"},
}
