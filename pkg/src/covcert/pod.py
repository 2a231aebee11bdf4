"""Owner-controlled personal data stores ("pods") on a multi-tenant server.

Each pod holds keyed resources behind access rules: default-deny for
unlisted agents, owner supremacy, write-once "permanent" resources for
identity documents. Deletion is physical — the persistence file is
compacted so no payload bytes survive — which is what turns any ledger
anchor over the deleted data into an orphan.

Writes to one pod serialize behind a per-pod lock; reads are concurrent
and observe only committed versions.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field

from .crypto import Did
from .errors import Forbidden, NotFound, PermanentResource, PodExists, SyncFailed

MODES = frozenset({"read", "write", "control"})
OWNER = "owner"
PUBLIC = "public"


@dataclass(frozen=True)
class AccessRule:
    """Grant of modes to one agent: a DID string, "owner", or "public"."""

    agent: str
    modes: frozenset[str]

    def __post_init__(self):
        bad = self.modes - MODES
        if bad:
            raise ValueError(f"unknown access modes: {sorted(bad)}")

    def to_dict(self) -> dict:
        return {"agent": self.agent, "modes": sorted(self.modes)}

    @classmethod
    def from_dict(cls, d: dict) -> "AccessRule":
        return cls(agent=d["agent"], modes=frozenset(d["modes"]))


@dataclass
class PodResource:
    path: str
    versions: list[tuple[bytes, str]] = field(default_factory=list)  # (payload, content_type)
    acl: list[AccessRule] = field(default_factory=list)
    permanent: bool = False

    @property
    def latest(self) -> tuple[bytes, str]:
        return self.versions[-1]


@dataclass
class Pod:
    owner: str
    resources: dict[str, PodResource] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock)


class PodServer:
    """Multi-tenant pod host; many pods, one optional persistence file."""

    def __init__(self, store_path: str | None = None):
        self.pods: dict[str, Pod] = {}
        self.store_path = store_path
        self._lock = threading.RLock()
        if store_path is not None:
            self._load()

    # -- pod lifecycle -------------------------------------------------

    def create_pod(self, owner: Did | str) -> Pod:
        owner = str(owner)
        with self._lock:
            if owner in self.pods:
                raise PodExists(f"a pod already exists for {owner}")
            pod = Pod(owner=owner)
            self.pods[owner] = pod
        self._persist()
        return pod

    def pod_of(self, owner: Did | str) -> Pod:
        pod = self.pods.get(str(owner))
        if pod is None:
            raise NotFound(f"no pod for {owner}")
        return pod

    def drop_pod(self, owner: Did | str) -> None:
        """Remove a pod entirely (opt-out); compacts the store."""
        with self._lock:
            self.pods.pop(str(owner), None)
        self._persist()

    # -- access control ------------------------------------------------

    @staticmethod
    def _allowed(pod: Pod, resource: PodResource | None, requester: str, mode: str) -> bool:
        if requester == pod.owner:
            return True
        rules = resource.acl if resource is not None else []
        for rule in rules:
            if rule.agent in (requester, PUBLIC) and mode in rule.modes:
                return True
        return False

    # -- resource operations -------------------------------------------

    def put_resource(
        self,
        owner: Did | str,
        requester: Did | str,
        path: str,
        data: bytes,
        content_type: str = "application/octet-stream",
        acl: list[AccessRule] | None = None,
        permanent: bool = False,
    ) -> int:
        """Store a new version at path; returns the version number."""
        pod = self.pod_of(owner)
        requester = str(requester)
        with pod.lock:
            existing = pod.resources.get(path)
            if existing is not None and existing.permanent:
                raise PermanentResource(f"{path} is write-once and already set")
            if not self._allowed(pod, existing, requester, "write"):
                raise Forbidden(f"{requester} may not write {path}")
            if existing is None:
                existing = PodResource(path=path, permanent=permanent)
                pod.resources[path] = existing
            existing.versions.append((bytes(data), content_type))
            if acl is not None:
                if not self._allowed(pod, existing, requester, "control"):
                    raise Forbidden(f"{requester} may not change the ACL of {path}")
                existing.acl = list(acl)
            version = len(existing.versions)
        self._persist()
        return version

    def set_acl(self, owner: Did | str, requester: Did | str, path: str, acl: list[AccessRule]) -> None:
        pod = self.pod_of(owner)
        with pod.lock:
            resource = pod.resources.get(path)
            if resource is None:
                raise NotFound(path)
            if not self._allowed(pod, resource, str(requester), "control"):
                raise Forbidden(f"{requester} may not change the ACL of {path}")
            resource.acl = list(acl)
        self._persist()

    def get_resource(self, owner: Did | str, requester: Did | str, path: str) -> bytes:
        pod = self.pod_of(owner)
        resource = pod.resources.get(path)
        if not self._allowed(pod, resource, str(requester), "read"):
            raise Forbidden(f"{requester} may not read {path}")
        if resource is None:
            raise NotFound(path)
        return resource.latest[0]

    def content_type(self, owner: Did | str, path: str) -> str:
        pod = self.pod_of(owner)
        resource = pod.resources.get(path)
        if resource is None:
            raise NotFound(path)
        return resource.latest[1]

    def list_paths(self, owner: Did | str, requester: Did | str) -> list[str]:
        pod = self.pod_of(owner)
        if str(requester) != pod.owner:
            raise Forbidden(f"{requester} may not list the pod of {pod.owner}")
        return sorted(pod.resources)

    def delete_resource(self, owner: Did | str, requester: Did | str, path: str) -> None:
        """Remove the resource and all versions; store is compacted."""
        pod = self.pod_of(owner)
        with pod.lock:
            if str(requester) != pod.owner:
                raise Forbidden("only the owner may delete resources")
            if path not in pod.resources:
                raise NotFound(path)
            del pod.resources[path]
        self._persist()

    def export_pod(self, owner: Did | str, requester: Did | str) -> dict[str, bytes]:
        pod = self.pod_of(owner)
        if str(requester) != pod.owner:
            raise Forbidden("only the owner may export a pod")
        return {p: r.latest[0] for p, r in pod.resources.items()}

    # -- replication ---------------------------------------------------

    def replicate_pod(self, owner: Did | str, target: "PodServer") -> dict:
        """Owner-initiated sync: target ends byte-identical, deletions included."""
        if target is None:
            raise SyncFailed("replication target unreachable")
        owner = str(owner)
        pod = self.pod_of(owner)
        with pod.lock:
            snapshot = {
                path: (
                    [(bytes(b), ct) for b, ct in r.versions],
                    list(r.acl),
                    r.permanent,
                )
                for path, r in pod.resources.items()
            }
        with target._lock:
            mirror = target.pods.get(owner)
            if mirror is None:
                mirror = Pod(owner=owner)
                target.pods[owner] = mirror
            with mirror.lock:
                mirror.resources = {
                    path: PodResource(path=path, versions=versions, acl=acl, permanent=perm)
                    for path, (versions, acl, perm) in snapshot.items()
                }
        target._persist()
        return {"owner": owner, "resources": len(snapshot)}

    # -- persistence (full rewrite => physical erasure on delete) ------

    def _persist(self) -> None:
        if self.store_path is None:
            return
        with self._lock:
            records: list[bytes] = []
            for pod in self.pods.values():
                for resource in pod.resources.values():
                    for idx, (payload, ctype) in enumerate(resource.versions):
                        header = json.dumps(
                            {
                                "owner": pod.owner,
                                "path": resource.path,
                                "content_type": ctype,
                                "version": idx,
                                "permanent": resource.permanent,
                                "acl": [r.to_dict() for r in resource.acl],
                            },
                            separators=(",", ":"),
                        ).encode("utf-8")
                        records.append(
                            struct.pack(">I", len(header))
                            + header
                            + struct.pack(">I", len(payload))
                            + payload
                        )
                if not pod.resources:
                    header = json.dumps({"owner": pod.owner, "path": None}).encode("utf-8")
                    records.append(struct.pack(">I", len(header)) + header + struct.pack(">I", 0))
            with open(self.store_path, "wb") as fh:
                fh.write(b"".join(records))

    def _load(self) -> None:
        try:
            fh = open(self.store_path, "rb")
        except FileNotFoundError:
            return
        with fh:
            raw = fh.read()
        offset = 0
        while offset < len(raw):
            (hlen,) = struct.unpack_from(">I", raw, offset)
            offset += 4
            header = json.loads(raw[offset : offset + hlen])
            offset += hlen
            (plen,) = struct.unpack_from(">I", raw, offset)
            offset += 4
            payload = raw[offset : offset + plen]
            offset += plen
            pod = self.pods.setdefault(header["owner"], Pod(owner=header["owner"]))
            if header["path"] is None:
                continue
            resource = pod.resources.setdefault(
                header["path"],
                PodResource(
                    path=header["path"],
                    permanent=header["permanent"],
                    acl=[AccessRule.from_dict(r) for r in header["acl"]],
                ),
            )
            resource.versions.append((payload, header["content_type"]))
