"""Bit-exact envelope codec for QR-carried payloads.

Grammar: ``COVC1.<base64url-body>.<base64url-check>`` where the body is
sorted-key compact JSON of the payload and the check is the first 8 bytes
of SHA-256 over the base64url body text. Rendering the text to an actual
QR matrix image is presentation-layer and lives with the demo console.

All functions here are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import crypto
from .encoding import b64url_decode, b64url_encode
from .credential import Presentation
from .errors import (
    CorruptPayload,
    MalformedPayload,
    NotOurCode,
    PayloadTooLarge,
    PhotoRequired,
)

PREFIX = "COVC1"
MAX_ENCODED_BYTES = 2953  # QR version-40, byte mode, EC level L
CHECK_BYTES = 8

KIND_PRESENTATION = "presentation"
KIND_IDENTITY = "identity"
KIND_SAMPLE_TAG = "sample_tag"
KINDS = (KIND_PRESENTATION, KIND_IDENTITY, KIND_SAMPLE_TAG)


@dataclass(frozen=True, eq=False)
class QrPayload:
    kind: str
    body: dict
    anchor_url: str = ""
    version: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown payload kind: {self.kind!r}")

    def __eq__(self, other):
        if not isinstance(other, QrPayload):
            return NotImplemented
        return (
            self.version == other.version
            and self.kind == other.kind
            and self.body == other.body
            and self.anchor_url == other.anchor_url
        )

    def presentation(self) -> Presentation:
        if self.kind != KIND_PRESENTATION:
            raise MalformedPayload(f"payload kind is {self.kind}, not a presentation")
        return Presentation.from_dict(self.body)


def _body_json(payload: QrPayload) -> str:
    return json.dumps(
        {
            "version": payload.version,
            "kind": payload.kind,
            "body": payload.body,
            "anchor_url": payload.anchor_url,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def encode(payload: QrPayload) -> str:
    body_b64 = b64url_encode(_body_json(payload).encode("utf-8"))
    check = crypto.digest(body_b64.encode("ascii"))[:CHECK_BYTES]
    text = f"{PREFIX}.{body_b64}.{b64url_encode(check)}"
    if len(text.encode("ascii")) > MAX_ENCODED_BYTES:
        raise PayloadTooLarge(
            f"encoded payload is {len(text)} bytes, over the QR capacity of "
            f"{MAX_ENCODED_BYTES}; consider dropping the photo from the presentation"
        )
    return text


def decode(text: str) -> QrPayload:
    parts = text.split(".")
    if len(parts) != 3 or parts[0] != PREFIX:
        raise NotOurCode("not a covcert QR envelope")
    body_b64, check_b64 = parts[1], parts[2]
    try:
        expected = b64url_decode(check_b64)
    except Exception as exc:
        raise CorruptPayload("unreadable integrity check") from exc
    if crypto.digest(body_b64.encode("ascii"))[:CHECK_BYTES] != expected:
        raise CorruptPayload("integrity check mismatch")
    try:
        data = json.loads(b64url_decode(body_b64))
        return QrPayload(
            version=data["version"],
            kind=data["kind"],
            body=data["body"],
            anchor_url=data["anchor_url"],
        )
    except CorruptPayload:
        raise
    except Exception as exc:
        raise MalformedPayload(f"undecodable payload body: {exc}") from exc


@dataclass(frozen=True)
class PaperDocument:
    """Print-oriented page description for the paper-certificate variant."""

    qr_text: str
    photo: bytes | None
    summary: tuple[str, ...]

    @property
    def has_photo_block(self) -> bool:
        return self.photo is not None


def render_paper(payload: QrPayload, holder_photo: bytes | None = None) -> PaperDocument:
    """Printable page: photo block (when bound), QR text, claim summary.

    The QR content is byte-identical to the digital encoding.
    """
    pres = payload.presentation()
    if pres.certificate_public.photo_bound and not holder_photo:
        raise PhotoRequired("photo-bound certificate needs the holder photo on paper")
    summary = [f"Certificate {pres.certificate_public.id}"]
    for claim in pres.revealed:
        value = claim.value if isinstance(claim.value, str) else "<binary>"
        summary.append(f"{claim.name}: {value}")
    return PaperDocument(
        qr_text=encode(payload),
        photo=holder_photo if pres.certificate_public.photo_bound else None,
        summary=tuple(summary),
    )
