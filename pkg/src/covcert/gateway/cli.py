"""Role-based command line interface for the covcert gateway.

All role commands are thin HTTP clients against a running gateway
(`covcert serve`); `demo e2e` and `bench run --spawn` run a full
deployment in-process.
"""

from __future__ import annotations

import json
import sys
import threading
import time

import click
import httpx

from ..encoding import b64url_encode
from ..errors import CovcertError
from .bench import ALL_OPERATIONS, bench_run
from .config import GatewayConfig
from .service import build_app, build_deployment, serve as run_server

DEFAULT_URL = "http://127.0.0.1:8470"


def _client(url: str) -> httpx.Client:
    return httpx.Client(base_url=url.rstrip("/"), timeout=30.0)


def _emit(ctx_json: bool, data: dict, human: str | None = None) -> None:
    if ctx_json or human is None:
        click.echo(json.dumps(data, indent=2, sort_keys=True))
    else:
        click.echo(human)


def _request(client: httpx.Client, method: str, path: str, **kwargs) -> dict:
    # 202 means a ledger anchor has not been included in a block yet;
    # retry until the next block lands or the deadline passes
    deadline = time.monotonic() + 15.0
    while True:
        resp = client.request(method, path, **kwargs)
        if resp.status_code != 202 or time.monotonic() >= deadline:
            break
        time.sleep(0.1)
    try:
        data = resp.json()
    except ValueError:
        data = {"raw": resp.text}
    if resp.status_code >= 400 or resp.status_code == 202:
        click.echo(f"error ({resp.status_code}): {data.get('detail', data)}", err=True)
        sys.exit(1)
    return data


url_option = click.option("--url", default=DEFAULT_URL, envvar="COVCERT_URL", show_default=True)
json_option = click.option("--json", "as_json", is_flag=True, help="machine-readable output")


@click.group()
def main():
    """Privacy-preserving test/vaccination certification toolkit."""


@main.command()
@click.option("--config", "config_path", default=None, help="key=value config file")
def serve(config_path):
    """Run the gateway service with a real-time block producer."""
    cfg = GatewayConfig.load(config_path)
    click.echo(f"serving on http://{cfg.host}:{cfg.port} (block interval {cfg.block_interval}s)")
    run_server(cfg)


# -- issuer ------------------------------------------------------------


@main.group()
def issuer():
    """Issuer journeys: onboarding and certification."""


@issuer.command("onboard")
@click.option("--registration-no", required=True)
@click.option("--branch", required=True)
@click.option("--email", required=True)
@click.option("--role", default="issuer", type=click.Choice(["issuer", "lab"]))
@url_option
@json_option
def issuer_onboard(registration_no, branch, email, role, url, as_json):
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/issuer/onboard",
            json={
                "registration_no": registration_no,
                "branch": branch,
                "email": email,
                "role": role,
            },
        )
    _emit(as_json, data, f"issuer {data['did']} created, state={data['state']} (token sent to outbox)")


@issuer.command("confirm")
@click.option("--did", required=True)
@click.option("--token", required=True)
@url_option
@json_option
def issuer_confirm(did, token, url, as_json):
    with _client(url) as c:
        data = _request(c, "POST", "/api/issuer/confirm", json={"did": did, "token": token})
    _emit(as_json, data, f"issuer {data['did']} is now {data['state']}")


@issuer.command("certify")
@click.option("--issuer-did", required=True)
@click.option("--holder-did", required=True)
@click.option("--claim", "claims", multiple=True, help="name=value, repeatable")
@click.option("--photo-binding/--no-photo-binding", default=True)
@url_option
@json_option
def issuer_certify(issuer_did, holder_did, claims, photo_binding, url, as_json):
    parsed = [c.split("=", 1) for c in claims]
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/issuer/certify",
            json={
                "issuer_did": issuer_did,
                "holder_did": holder_did,
                "claims": parsed,
                "photo_binding": photo_binding,
            },
        )
    _emit(as_json, data, f"certificate {data['certificate']['id']} issued\nQR: {data['qr_text']}")


@issuer.command("certify-pending")
@click.option("--issuer-did", required=True)
@click.option("--holder-did", required=True)
@click.option("--sample-id", required=True)
@url_option
@json_option
def issuer_certify_pending(issuer_did, holder_did, sample_id, url, as_json):
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/issuer/certify-pending",
            json={"issuer_did": issuer_did, "holder_did": holder_did, "sample_id": sample_id},
        )
    _emit(
        as_json, data,
        f"pending certificate {data['certificate']['id']}\nsample tag QR: {data['sample_qr']}",
    )


@issuer.command("vaccinate")
@click.option("--issuer-did", required=True)
@click.option("--holder-did", required=True)
@click.option("--source", required=True)
@click.option("--batch", required=True)
@url_option
@json_option
def issuer_vaccinate(issuer_did, holder_did, source, batch, url, as_json):
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/issuer/vaccinate",
            json={
                "issuer_did": issuer_did,
                "holder_did": holder_did,
                "vaccine_source": source,
                "vaccine_batch": batch,
            },
        )
    _emit(as_json, data, f"vaccination certificate {data['certificate']['id']}\nQR: {data['qr_text']}")


# -- holder ------------------------------------------------------------


@main.group()
def holder():
    """Holder journeys: onboarding, presentation, opt-out, restore."""


@holder.command("onboard")
@click.option("--document-number", required=True)
@click.option("--photo", "photo_path", required=True, type=click.Path(exists=True))
@url_option
@json_option
def holder_onboard(document_number, photo_path, url, as_json):
    with open(photo_path, "rb") as fh:
        photo = fh.read()
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/holder/onboard",
            json={"document_number": document_number, "photo": b64url_encode(photo)},
        )
    _emit(as_json, data, f"holder onboarded: {data['did']}")


@holder.command("present")
@click.option("--did", required=True)
@click.option("--cert-id", required=True)
@click.option("--reveal", multiple=True, help="claim name, repeatable")
@url_option
@json_option
def holder_present(did, cert_id, reveal, url, as_json):
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/holder/present",
            json={"did": did, "cert_id": cert_id, "reveal": list(reveal)},
        )
    _emit(as_json, data, data["qr_text"])


@holder.command("optout")
@click.option("--did", required=True)
@url_option
@json_option
def holder_optout(did, url, as_json):
    with _client(url) as c:
        data = _request(c, "POST", "/api/holder/optout", json={"did": did})
    orphans = "\n".join(data["orphaned_anchor_urls"])
    _emit(as_json, data, f"pod erased; orphaned anchors:\n{orphans}")


@holder.command("restore")
@click.option("--did", required=True)
@url_option
@json_option
def holder_restore(did, url, as_json):
    with _client(url) as c:
        data = _request(c, "POST", "/api/holder/restore", json={"did": did})
    _emit(as_json, data, f"restored {data['resources']} resources from replica")


# -- lab ---------------------------------------------------------------


@main.group()
def lab():
    """Off-site lab journey."""


@lab.command("complete")
@click.option("--lab-did", required=True)
@click.option("--sample-qr", required=True)
@click.option("--result", "results", multiple=True, help="name=value, repeatable")
@url_option
@json_option
def lab_complete(lab_did, sample_qr, results, url, as_json):
    parsed = [r.split("=", 1) for r in results]
    with _client(url) as c:
        data = _request(
            c, "POST", "/api/lab/complete",
            json={"lab_did": lab_did, "sample_qr": sample_qr, "results": parsed},
        )
    _emit(as_json, data, f"certificate {data['certificate']['id']} completed by lab")


# -- verifier ----------------------------------------------------------


@main.group()
def verifier():
    """Verification (no account needed)."""


@verifier.command("verify")
@click.argument("qr_text")
@url_option
@json_option
def verifier_verify(qr_text, url, as_json):
    with _client(url) as c:
        data = _request(c, "POST", "/api/verify", json={"qr_text": qr_text})
    if as_json:
        click.echo(json.dumps(data, indent=2, sort_keys=True))
    else:
        for check, ok in data["checks"].items():
            click.echo(f"  {check}: {'ok' if ok else 'FAIL'}")
        for name, value in data["revealed"].items():
            click.echo(f"  revealed {name} = {value}")
        click.echo(f"overall: {data['overall']}")
        if data["reasons"]:
            click.echo("reasons: " + ", ".join(data["reasons"]))
    if not data["overall"]:
        sys.exit(1)


# -- ledger ------------------------------------------------------------


@main.group()
def ledger():
    """Ledger inspection."""


@ledger.command("status")
@url_option
@json_option
def ledger_status(url, as_json):
    with _client(url) as c:
        data = _request(c, "GET", "/api/ledger/status")
    _emit(
        as_json, data,
        f"chain {data['chain_id']} height={data['height']} tip={data['tip_digest_hex'][:16]}… "
        f"mempool={data['mempool']} authorities={','.join(data['authorities'])}",
    )


# -- bench -------------------------------------------------------------


def spawn_gateway(port: int = 0, block_interval: float = 0.2):
    """Gateway in a child process on a free port; returns (base_url, shutdown).

    A separate process keeps server work off the caller's interpreter,
    so benchmark clients do not contend with the server for the GIL.
    """
    import socket
    import subprocess

    if port == 0:
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()

    code = (
        "from covcert.gateway.config import GatewayConfig\n"
        "from covcert.gateway.service import serve\n"
        f"serve(GatewayConfig(port={port}, block_interval={block_interval}))\n"
    )
    proc = subprocess.Popen([sys.executable, "-c", code])
    base_url = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 15
    while time.monotonic() < deadline:
        try:
            httpx.get(base_url + "/ping", timeout=1.0)
            break
        except (httpx.HTTPError, OSError):
            if proc.poll() is not None:
                raise RuntimeError("gateway process exited during startup")
            time.sleep(0.05)

    def shutdown():
        proc.terminate()
        proc.wait(timeout=10)

    return base_url, shutdown


@main.group()
def bench():
    """Scaling benchmark (1-100 parallel requests)."""


@bench.command("run")
@click.option("--ops", default="all", help="comma list or 'all'")
@click.option("--n", "n_values", default="1,10,25,50,75,100", help="comma list of request counts")
@click.option("--trials", default=3, show_default=True)
@click.option("--url", default=None, help="gateway URL; spawns one in-process when omitted")
@click.option("--csv", "csv_path", default=None, help="write raw samples CSV here")
@json_option
def bench_run_cmd(ops, n_values, trials, url, csv_path, as_json):
    operations = ALL_OPERATIONS if ops == "all" else tuple(ops.split(","))
    ns = tuple(int(x) for x in n_values.split(","))
    shutdown = None
    if url is None:
        url, shutdown = spawn_gateway()
    try:
        report = bench_run(url, operations=operations, n_values=ns, trials=trials)
    except CovcertError as exc:
        click.echo(f"bench aborted: {exc}", err=True)
        sys.exit(1)
    finally:
        if shutdown is not None:
            shutdown()
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
    if as_json:
        click.echo(report.to_json())
    else:
        for op, fit in report.fits.items():
            click.echo(
                f"{op:10s} slope={fit.slope * 1000:8.2f} ms/req  "
                f"r2={fit.r_squared:.4f}  throughput={report.ops_per_sec[op]:.1f}/s"
            )
        for label, delta in report.relative_differences.items():
            click.echo(f"{label}: {delta * 100:+.1f}%")


# -- demo --------------------------------------------------------------


@main.group()
def demo():
    """Self-contained demonstrations."""


@demo.command("e2e")
@json_option
def demo_e2e(as_json):
    """Full onboard -> certify -> present -> verify run, in-process."""
    from ..flows import Deployment

    dep = Deployment()
    account = dep.onboard_issuer("GPhC-100001", "High Street Pharmacy", "amy@pharmacy.example")
    dep.confirm_issuer(account, dep.outbox[-1][1])
    holder_acct = dep.onboard_holder("DL1234567", b"\x89PNG demo holder photo bytes")
    cert, qr = dep.certify(
        account, holder_acct,
        [("test_type", "serology-IgG"), ("result", "positive"), ("antibody_type", "IgG")],
    )
    from ..qrcodec import encode

    report = dep.verify(encode(qr))
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(f"certificate: {cert.id}")
        for check, ok in report.checks.items():
            click.echo(f"  {check}: {'ok' if ok else 'FAIL'}")
        click.echo(f"overall={report.overall}")
    sys.exit(0 if report.overall else 1)


if __name__ == "__main__":
    main()
