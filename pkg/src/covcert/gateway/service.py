"""HTTP facade over a running deployment.

Hosts the four benchmarked endpoints (/ping, /issue, /verify, /upload),
the ledger node surface (/anchor, /chain/tip), the pod REST surface
(/pods/...) with DID-signed request authentication, and the /api/* role
journeys used by the CLI and the browser console.

Request handling is stateless; all state lives in the deployment's pod
server and ledger nodes, which enforce their own locking.
"""

from __future__ import annotations

import json
import time

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .. import credential, crypto, qrcodec
from ..credential import Certificate
from ..errors import (
    CovcertError,
    DuplicateAnchor,
    Forbidden,
    NotFound,
    Pending,
    PodExists,
)
from ..flows import Deployment, SampleTag
from ..ledger import BlockTimer, Consortium
from ..pod import AccessRule, PodServer
from .config import GatewayConfig
from ..encoding import b64url_decode, b64url_encode

AUTH_SIGNER = "x-covcert-signer"
AUTH_SIGNATURE = "x-covcert-signature"


def build_deployment(config: GatewayConfig) -> Deployment:
    authorities = tuple(f"authority-{i}" for i in range(config.authority_count))
    consortium = Consortium.create(authorities=authorities)
    replica = (
        PodServer(store_path=config.replica_store_path)
        if config.replica_store_path
        else PodServer()
    )
    return Deployment(
        pods=PodServer(store_path=config.pod_store_path),
        replica=replica,
        consortium=consortium,
        outbox_path=config.outbox_path,
        auto_blocks=True,
    )


def _error_response(exc: CovcertError) -> JSONResponse:
    status = 400
    if isinstance(exc, Forbidden):
        status = 403
    elif isinstance(exc, NotFound):
        status = 404
    elif isinstance(exc, Pending):
        status = 202
    elif isinstance(exc, (PodExists, DuplicateAnchor)):
        status = 409
    return JSONResponse(
        status_code=status,
        content={"error": type(exc).__name__, "detail": str(exc)},
    )


def _requester(dep: Deployment, request: Request, body: bytes) -> str:
    """Resolve the authenticated requester DID from the signed headers.

    Signature covers `<METHOD> <PATH>` plus the hex digest of the body.
    Unsigned requests act as an anonymous agent (default-deny applies).
    """
    signer = request.headers.get(AUTH_SIGNER)
    signature = request.headers.get(AUTH_SIGNATURE)
    if not signer or not signature:
        return "anonymous"
    pubkey = dep.registry.resolve(signer)
    message = sign_target(request.method, request.url.path, body)
    if pubkey is None or not crypto.verify_sig(pubkey, message, b64url_decode(signature)):
        raise Forbidden("request signature does not verify")
    return signer


def sign_target(method: str, path: str, body: bytes) -> bytes:
    return f"{method.upper()} {path} {crypto.digest_hex(body)}".encode("ascii")


def build_app(dep: Deployment) -> FastAPI:
    app = FastAPI(title="covcert gateway")
    app.state.deployment = dep
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(CovcertError)
    async def covcert_error_handler(_request, exc: CovcertError):
        return _error_response(exc)

    def submit_anchor(cert_id: str, digest: bytes):
        receipt = dep.node.submit_anchor(cert_id, digest)
        if dep.auto_blocks:
            # no real-time block producer: confirm synchronously
            dep.consortium.settle()
        return receipt

    # -- benchmarked endpoints -----------------------------------------

    @app.get("/ping")
    def ping():
        return {"pong": True, "time": time.time()}

    @app.post("/issue")
    def issue(body: dict, hash: str = Query(default="server")):
        cert = Certificate.from_dict(body["certificate"])
        if hash == "local":
            # client canonicalized and hashed; signatures and the anchor
            # are all checked against that digest, so a wrong digest fails
            digest = bytes.fromhex(body["digest_hex"])
            if len(digest) != 32:
                raise CovcertError("digest must be 32 bytes")
        else:
            digest = credential.certificate_digest(cert)
        issuer_key = dep.registry.resolve(cert.issuer)
        holder_key = dep.registry.resolve(cert.holder)
        if (
            cert.issuer_signature is None
            or cert.holder_signature is None
            or issuer_key is None
            or holder_key is None
            or not crypto.verify_sig(issuer_key, digest, cert.issuer_signature.sig)
            or not crypto.verify_sig(holder_key, digest, cert.holder_signature.sig)
        ):
            raise Forbidden("certificate signatures do not verify")
        receipt = submit_anchor(str(cert.id), digest)
        public_path = f"certs/{cert.id.identifier}.public"
        payload = cert.to_json().encode("utf-8")
        if "record" in body:
            # full record (claim values, salts, photo) goes to the pod;
            # only the commitment-bearing certificate is anchored
            public_path = f"certs/{cert.id.identifier}"
            payload = json.dumps(body["record"], sort_keys=True).encode("utf-8")
        dep.pods.put_resource(
            cert.holder, cert.holder, public_path,
            payload, content_type="application/json",
        )
        if dep.replica is not None:
            # issued certificates are backed up to the cloud replica
            try:
                dep.replica.pod_of(cert.holder)
            except NotFound:
                try:
                    dep.replica.create_pod(cert.holder)
                except PodExists:
                    pass
            dep.replica.put_resource(
                cert.holder, cert.holder, public_path,
                payload, content_type="application/json",
            )
        return {"tx_id": receipt.tx_id, "anchor_url": receipt.anchor_url}

    @app.post("/verify")
    def verify_endpoint(body: dict, hash: str = Query(default="server")):
        if hash == "local":
            # the client canonicalized and hashed; every check is tied to
            # that digest, so a bogus digest fails signatures or the anchor
            payload = qrcodec.decode(body["qr_text"])
            pres = payload.presentation()
            local = bytes.fromhex(body["local_digest_hex"])
            cert = pres.certificate_public
            try:
                anchored, _ = dep.node.lookup_anchor(payload.anchor_url or str(cert.id))
            except (NotFound, Pending):
                anchored = None
            issuer_key = dep.registry.resolve(cert.issuer)
            holder_key = dep.registry.resolve(cert.holder)
            checks = {
                "anchor_match": anchored is not None and anchored == local,
                "issuer_sig": (
                    cert.issuer_signature is not None
                    and issuer_key is not None
                    and crypto.verify_sig(issuer_key, local, cert.issuer_signature.sig)
                ),
                "holder_sig": (
                    cert.holder_signature is not None
                    and holder_key is not None
                    and crypto.verify_sig(holder_key, local, cert.holder_signature.sig)
                ),
                "commitments": all(
                    (stored := cert.commitment(claim.name)) is not None
                    and stored.matches(claim)
                    for claim in pres.revealed
                ),
            }
            return {"overall": all(checks.values()), "checks": checks}
        report = dep.verify(body["qr_text"])
        return report.to_dict()

    @app.put("/upload")
    def upload(body: dict):
        version = dep.pods.put_resource(
            body["owner_did"], body["owner_did"], body["path"],
            b64url_decode(body["data"]),
            content_type=body.get("content_type", "application/octet-stream"),
        )
        return {"version": version}

    # -- ledger node surface -------------------------------------------

    @app.post("/anchor")
    def post_anchor(body: dict):
        receipt = submit_anchor(body["cert_id"], bytes.fromhex(body["digest_hex"]))
        return {"tx_id": receipt.tx_id, "anchor_url": receipt.anchor_url}

    @app.get("/anchor/{cert_id}")
    def get_anchor(cert_id: str):
        digest, height = dep.node.lookup_anchor(cert_id)
        return {"digest_hex": digest.hex(), "height": height}

    @app.get("/chain/tip")
    def chain_tip():
        tip = dep.node.tip
        return {"height": tip.height, "digest_hex": tip.digest().hex()}

    # -- pod REST surface ----------------------------------------------

    @app.get("/pods/{owner_did}")
    async def list_pod(owner_did: str, request: Request):
        requester = _requester(dep, request, b"")
        return {"paths": dep.pods.list_paths(owner_did, requester)}

    @app.put("/pods/{owner_did}/{path:path}")
    async def put_pod_resource(owner_did: str, path: str, request: Request):
        body = await request.body()
        requester = _requester(dep, request, body)
        acl_param = request.query_params.get("acl")
        acl = (
            [AccessRule.from_dict(r) for r in json.loads(acl_param)]
            if acl_param
            else None
        )
        version = dep.pods.put_resource(
            owner_did, requester, path, body,
            content_type=request.headers.get("content-type", "application/octet-stream"),
            acl=acl,
        )
        return {"version": version}

    @app.get("/pods/{owner_did}/{path:path}")
    async def get_pod_resource(owner_did: str, path: str, request: Request):
        requester = _requester(dep, request, b"")
        data = dep.pods.get_resource(owner_did, requester, path)
        return Response(content=data, media_type=dep.pods.content_type(owner_did, path))

    @app.delete("/pods/{owner_did}/{path:path}")
    async def delete_pod_resource(owner_did: str, path: str, request: Request):
        requester = _requester(dep, request, b"")
        dep.pods.delete_resource(owner_did, requester, path)
        return {"deleted": path}

    # -- role journeys (CLI and console) -------------------------------

    @app.post("/api/pods")
    def create_pod(body: dict):
        dep.pods.create_pod(body["owner_did"])
        return {"owner_did": body["owner_did"]}

    @app.post("/api/register-key")
    def register_key(body: dict):
        # public DID-method operation: bind a DID to a verification key
        dep.registry.register(crypto.Did.parse(body["did"]), bytes.fromhex(body["public_key_hex"]))
        return {"registered": body["did"]}

    @app.post("/api/issuer/onboard")
    def issuer_onboard(body: dict):
        account = dep.onboard_issuer(
            body["registration_no"], body["branch"], body["email"],
            role=body.get("role", "issuer"),
        )
        return {"did": str(account.did), "state": account.state}

    @app.get("/api/outbox")
    def outbox():
        # demo stand-in for the email channel
        return {"messages": [{"email": e, "token": t} for e, t in dep.outbox]}

    @app.post("/api/issuer/confirm")
    def issuer_confirm(body: dict):
        account = dep.issuers.get(body["did"])
        if account is None:
            raise NotFound(f"unknown issuer {body['did']}")
        dep.confirm_issuer(account, body["token"])
        return {"did": str(account.did), "state": account.state}

    @app.post("/api/holder/onboard")
    def holder_onboard(body: dict):
        account = dep.onboard_holder(
            body["document_number"], b64url_decode(body["photo"])
        )
        return {"did": str(account.did)}

    def _issuer(did: str):
        account = dep.issuers.get(did)
        if account is None:
            raise NotFound(f"unknown issuer {did}")
        return account

    def _holder(did: str):
        account = dep.holders.get(did)
        if account is None:
            raise NotFound(f"unknown holder {did}")
        return account

    @app.post("/api/issuer/certify")
    def issuer_certify(body: dict):
        cert, qr = dep.certify(
            _issuer(body["issuer_did"]),
            _holder(body["holder_did"]),
            [(name, value) for name, value in body["claims"]],
            photo_binding=body.get("photo_binding", True),
        )
        return {
            "certificate": cert.to_dict(),
            "qr_text": qrcodec.encode(qr),
            "anchor_url": cert.anchor_url,
        }

    @app.post("/api/issuer/certify-pending")
    def issuer_certify_pending(body: dict):
        cert, qr = dep.certify_pending(
            _issuer(body["issuer_did"]), _holder(body["holder_did"]), body["sample_id"]
        )
        return {"certificate": cert.to_dict(), "sample_qr": qrcodec.encode(qr)}

    @app.post("/api/issuer/vaccinate")
    def issuer_vaccinate(body: dict):
        cert, qr = dep.certify_vaccination(
            _issuer(body["issuer_did"]), _holder(body["holder_did"]),
            body["vaccine_source"], body["vaccine_batch"],
            photo_binding=body.get("photo_binding", True),
        )
        return {"certificate": cert.to_dict(), "qr_text": qrcodec.encode(qr)}

    @app.post("/api/lab/complete")
    def lab_complete(body: dict):
        tag = SampleTag.from_body(qrcodec.decode(body["sample_qr"]).body)
        cert = dep.lab_complete(
            _issuer(body["lab_did"]), tag,
            [(name, value) for name, value in body["results"]],
        )
        return {"certificate": cert.to_dict()}

    @app.get("/api/holder/{did}/certificates")
    def holder_certificates(did: str):
        holder = _holder(did)
        out = []
        for path in dep.pods.list_paths(holder.did, holder.did):
            if (
                not path.startswith("certs/")
                or path.endswith("/photo")
                or path.endswith(".public")
            ):
                continue
            record = dep.load_record(holder.did, path.split("/", 1)[1])
            cert = record.certificate
            out.append(
                {
                    "id": cert.id.identifier,
                    "status": cert.status,
                    "photo_bound": cert.photo_bound,
                    "claims": [c.name for c in record.claims],
                    "anchor_url": cert.anchor_url,
                }
            )
        return {"certificates": out}

    @app.post("/api/holder/present")
    def holder_present(body: dict):
        qr = dep.present(
            _holder(body["did"]), body["cert_id"], set(body.get("reveal", []))
        )
        return {"qr_text": qrcodec.encode(qr)}

    @app.post("/api/holder/optout")
    def holder_optout(body: dict):
        return dep.opt_out(_holder(body["did"]))

    @app.post("/api/holder/backup")
    def holder_backup(body: dict):
        return dep.backup(_holder(body["did"]))

    @app.post("/api/holder/restore")
    def holder_restore(body: dict):
        return dep.restore(_holder(body["did"]))

    @app.post("/api/verify")
    def api_verify(body: dict):
        report = dep.verify(body["qr_text"])
        out = report.to_dict()
        if report.photo is not None:
            out["photo"] = b64url_encode(report.photo)
        return out

    @app.get("/api/ledger/status")
    def ledger_status():
        tip = dep.node.tip
        return {
            "chain_id": dep.node.chain_id,
            "height": tip.height,
            "tip_digest_hex": tip.digest().hex(),
            "authorities": dep.node.schedule,
            "mempool": len(dep.node.mempool),
        }

    return app


def serve(config: GatewayConfig, block: bool = True):
    """Run the gateway with a real-time block producer."""
    import socket

    import uvicorn

    probe = socket.socket()
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        from ..errors import BindFailed

        raise BindFailed(f"cannot bind {config.host}:{config.port}: {exc}") from exc
    finally:
        probe.close()

    dep = build_deployment(config)
    dep.auto_blocks = False
    timer = BlockTimer(dep.consortium, interval=config.block_interval)
    timer.start()
    app = build_app(dep)
    server = uvicorn.Server(
        uvicorn.Config(
            app, host=config.host, port=config.port, log_level="warning",
            timeout_keep_alive=120,
        )
    )
    if block:
        try:
            server.run()
        finally:
            timer.stop()
    return app, server, timer
