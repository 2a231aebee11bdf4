import dataclasses
import json

import pytest

from covcert import credential, crypto, qrcodec
from covcert.errors import (
    AlreadyComplete,
    BadEmailDomain,
    EmptyPhoto,
    IdentityMismatch,
    IssuerInactive,
    NotFound,
    PodExists,
    RegistryRejected,
    SampleUnknown,
    TokenRejected,
    UnknownClaim,
)
from covcert.flows import (
    DEFAULT_REGULATOR,
    Deployment,
    HolderAccount,
    IssuerAccount,
    SampleTag,
    identity_digest,
)
from covcert.pod import PodServer

PHOTO = b"\xff\xd8\xff fake-jpeg-bytes"


@pytest.fixture
def dep():
    return Deployment(replica=PodServer())


def active_issuer(dep, reg="GPhC-100001"):
    entry = DEFAULT_REGULATOR[reg]
    account = dep.onboard_issuer(reg, entry["branch"], f"team@{entry['domain']}")
    return dep.confirm_issuer(account, dep.outbox[-1][1])


def active_lab(dep):
    account = dep.onboard_issuer(
        "LAB-200001", "Central Serology Lab", "ops@serolab.example", role="lab"
    )
    return dep.confirm_issuer(account, dep.outbox[-1][1])


class TestIssuerOnboarding:
    def test_two_factor_happy_path(self, dep):
        account = dep.onboard_issuer(
            "GPhC-100001", "High Street Pharmacy", "a@pharmacy.example"
        )
        assert account.state == "pending_email"
        email, token = dep.outbox[-1]
        assert email == "a@pharmacy.example"
        assert dep.confirm_issuer(account, token).state == "active"

    def test_unknown_registration(self, dep):
        with pytest.raises(RegistryRejected):
            dep.onboard_issuer("GPhC-999999", "Anywhere", "a@pharmacy.example")

    def test_branch_mismatch(self, dep):
        with pytest.raises(RegistryRejected):
            dep.onboard_issuer("GPhC-100001", "Wrong Branch", "a@pharmacy.example")

    def test_wrong_email_domain(self, dep):
        with pytest.raises(BadEmailDomain):
            dep.onboard_issuer("GPhC-100001", "High Street Pharmacy", "a@gmail.example")

    def test_wrong_token(self, dep):
        account = dep.onboard_issuer(
            "GPhC-100001", "High Street Pharmacy", "a@pharmacy.example"
        )
        with pytest.raises(TokenRejected):
            dep.confirm_issuer(account, "nope")

    def test_token_single_use(self, dep):
        account = dep.onboard_issuer(
            "GPhC-100001", "High Street Pharmacy", "a@pharmacy.example"
        )
        token = dep.outbox[-1][1]
        dep.confirm_issuer(account, token)
        with pytest.raises(TokenRejected):
            dep.confirm_issuer(account, token)

    def test_unconfirmed_issuer_cannot_certify(self, dep):
        account = dep.onboard_issuer(
            "GPhC-100001", "High Street Pharmacy", "a@pharmacy.example"
        )
        holder = dep.onboard_holder("DL1234567", PHOTO)
        with pytest.raises(IssuerInactive):
            dep.certify(account, holder, [("result", "positive")])


class TestHolderOnboarding:
    def test_identity_anchor_on_ledger(self, dep):
        holder = dep.onboard_holder("DL1234567", PHOTO)
        anchored, _ = dep.node.lookup_anchor(str(holder.did))
        assert anchored == identity_digest("DL1234567", PHOTO)

    def test_photo_is_permanent(self, dep):
        from covcert.errors import PermanentResource

        holder = dep.onboard_holder("DL1234567", PHOTO)
        with pytest.raises(PermanentResource):
            dep.pods.put_resource(holder.did, holder.did, "identity/photo", b"other")

    def test_empty_photo_rejected(self, dep):
        with pytest.raises(EmptyPhoto):
            dep.onboard_holder("DL1234567", b"")

    def test_distinct_holders_same_document(self, dep):
        a = dep.onboard_holder("DL1234567", PHOTO)
        b = dep.onboard_holder("DL1234567", PHOTO)
        assert a.did != b.did  # fresh salt per onboarding


class TestCertify:
    def test_end_to_end_verify(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, qr = dep.certify(
            issuer, holder, [("result", "positive"), ("test_type", "serology-IgG")]
        )
        assert cert.status == "complete"
        assert cert.anchor_url
        report = dep.verify(qrcodec.encode(qr))
        assert report.overall
        assert report.checks["photo_available"]
        assert report.photo == PHOTO
        assert report.revealed == {"result": "positive", "test_type": "serology-IgG"}

    def test_identity_mismatch_detected(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        # simulate a holder swapping their pod document after anchoring
        dep.pods.put_resource(
            holder.did, holder.did, "identity/document_number", b"DL9999999"
        )
        with pytest.raises(IdentityMismatch):
            dep.certify(issuer, holder, [("result", "positive")])

    def test_selective_disclosure(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, _ = dep.certify(
            issuer, holder, [("result", "positive"), ("test_type", "serology-IgG")]
        )
        qr = dep.present(holder, cert.id.identifier, {"result"})
        report = dep.verify(qrcodec.encode(qr))
        assert report.overall
        assert report.revealed == {"result": "positive"}
        assert b"serology-IgG" not in qrcodec.encode(qr).encode()

    def test_present_unknown_claim(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, _ = dep.certify(issuer, holder, [("result", "positive")])
        with pytest.raises(UnknownClaim):
            dep.present(holder, cert.id.identifier, {"age"})

    def test_no_photo_variant_reports_physical_id(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, qr = dep.certify(
            issuer, holder, [("result", "positive")], photo_binding=False
        )
        report = dep.verify(qrcodec.encode(qr))
        assert report.overall  # advisory photo check does not gate the outcome
        assert report.checks["photo_available"] is False
        assert "PhysicalIdRequired" in report.reasons

    def test_vaccination_variant(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, qr = dep.certify_vaccination(issuer, holder, "Oxford-AZ", "BATCH-42")
        report = dep.verify(qrcodec.encode(qr))
        assert report.overall
        assert report.revealed["event"] == "vaccination"
        assert report.revealed["vaccine_batch"] == "BATCH-42"

    def test_vaccination_missing_batch(self, dep):
        from covcert.errors import MissingClaim

        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        with pytest.raises(MissingClaim):
            dep.certify_vaccination(issuer, holder, "Oxford-AZ", "")

    def test_issuer_retains_no_claim_values(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        dep.certify(issuer, holder, [("result", "positive-UNIQUE-MARKER")])
        for path in dep.pods.list_paths(issuer.did, issuer.did):
            blob = dep.pods.get_resource(issuer.did, issuer.did, path)
            assert b"positive-UNIQUE-MARKER" not in blob


class TestTamperedPresentation:
    def test_flipped_claim_value_fails(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        _, qr = dep.certify(issuer, holder, [("result", "positive")])
        body = dict(qr.body)
        revealed = [dict(c) for c in body["revealed"]]
        for claim in revealed:
            if claim["name"] == "result":
                claim["value"] = "negative"
        body["revealed"] = revealed
        forged = qrcodec.QrPayload(
            kind=qr.kind, body=body, anchor_url=qr.anchor_url
        )
        report = dep.verify(qrcodec.encode(forged))
        assert not report.overall
        assert report.checks["commitments"] is False

    def test_unanchored_certificate_fails(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, full = credential.new_certificate(
            issuer.did, holder.did, [("result", "positive")], status="complete"
        )
        cert = credential.issuer_sign(cert, issuer.keypair)
        cert = credential.holder_countersign(cert, holder.keypair)
        pres = credential.make_presentation(cert, full, {"result"})
        forged = qrcodec.QrPayload(kind="presentation", body=pres.to_dict())
        report = dep.verify(qrcodec.encode(forged))
        assert not report.overall
        assert "AnchorMissing" in report.reasons


class TestOffSiteLab:
    def certify_pending(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, tag_qr = dep.certify_pending(issuer, holder, "SAMPLE-001")
        return issuer, holder, cert, tag_qr

    def test_pending_certificate_not_verifiable(self, dep):
        _, _, _, tag_qr = self.certify_pending(dep)
        tag = SampleTag.from_body(tag_qr.body)
        holder = dep.holders[tag.holder_did]
        qr = dep.present(holder, tag.pending_cert_id, set())
        report = dep.verify(qrcodec.encode(qr))
        assert not report.overall
        assert "Pending" in report.reasons

    def test_sample_tag_carries_no_claim_values(self, dep):
        _, _, _, tag_qr = self.certify_pending(dep)
        text = qrcodec.encode(tag_qr)
        assert "SAMPLE-001" in json.dumps(tag_qr.body)  # the tag itself is the id
        assert "antibody" not in text

    def test_lab_completion_three_signatures(self, dep):
        issuer, holder, pending, tag_qr = self.certify_pending(dep)
        lab = active_lab(dep)
        tag = SampleTag.from_body(tag_qr.body)
        cert = dep.lab_complete(lab, tag, [("result", "positive")])
        assert cert.status == "complete"
        assert cert.issuer_signature and cert.holder_signature
        assert [str(s.signer) for s in cert.extra_signatures] == [str(lab.did)]
        qr = dep.present(holder, cert.id.identifier, {"result", "test_type"})
        report = dep.verify(qrcodec.encode(qr))
        assert report.overall
        assert report.checks[f"extra_sig:{lab.did}"]
        assert report.revealed["result"] == "positive"

    def test_holder_notified(self, dep):
        issuer, holder, pending, tag_qr = self.certify_pending(dep)
        lab = active_lab(dep)
        cert = dep.lab_complete(
            lab, SampleTag.from_body(tag_qr.body), [("result", "negative")]
        )
        note = dep.pods.get_resource(
            holder.did, holder.did, f"notifications/{cert.id.identifier}"
        )
        assert json.loads(note)["event"] == "certificate_completed"

    def test_unknown_sample(self, dep):
        lab = active_lab(dep)
        tag = SampleTag("NOPE", "did:cov:xyz", "abc")
        with pytest.raises(SampleUnknown):
            dep.lab_complete(lab, tag, [("result", "positive")])

    def test_double_completion_rejected(self, dep):
        issuer, holder, pending, tag_qr = self.certify_pending(dep)
        lab = active_lab(dep)
        tag = SampleTag.from_body(tag_qr.body)
        dep.lab_complete(lab, tag, [("result", "positive")])
        with pytest.raises(AlreadyComplete):
            dep.lab_complete(lab, tag, [("result", "negative")])

    def test_forged_tag_rejected(self, dep):
        issuer, holder, pending, tag_qr = self.certify_pending(dep)
        lab = active_lab(dep)
        tag = SampleTag.from_body(tag_qr.body)
        forged = dataclasses.replace(tag, holder_did="did:cov:other")
        with pytest.raises(SampleUnknown):
            dep.lab_complete(lab, forged, [("result", "positive")])


class TestOptOutAndBackup:
    def test_opt_out_orphans_anchors(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, qr = dep.certify(issuer, holder, [("result", "positive")])
        qr_text = qrcodec.encode(qr)
        result = dep.opt_out(holder)
        assert cert.anchor_url in result["orphaned_anchor_urls"]
        # the chain still answers, but the data behind the digest is gone
        anchored, _ = dep.node.lookup_anchor(str(cert.id))
        assert anchored == credential.certificate_digest(cert)
        with pytest.raises(NotFound):
            dep.pods.pod_of(holder.did)
        # a held-over QR still verifies cryptographically; the photo is gone
        report = dep.verify(qr_text)
        assert report.overall
        assert report.checks["photo_available"] is False

    def test_backup_restore_roundtrip(self, dep):
        issuer = active_issuer(dep)
        holder = dep.onboard_holder("DL1234567", PHOTO)
        cert, _ = dep.certify(issuer, holder, [("result", "positive")])
        dep.backup(holder)
        # device loss: the primary pod disappears
        dep.pods.drop_pod(holder.did)
        dep.restore(holder)
        record = dep.load_record(holder.did, cert.id.identifier)
        assert record.certificate == cert
        qr = dep.present(holder, cert.id.identifier, {"result"})
        assert dep.verify(qrcodec.encode(qr)).overall

    def test_backup_without_replica(self):
        from covcert.errors import CovcertError

        dep = Deployment()
        holder = dep.onboard_holder("DL1234567", PHOTO)
        with pytest.raises(CovcertError):
            dep.backup(holder)
