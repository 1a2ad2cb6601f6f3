"""Time-limited compute credentials, modeled on grid proxy certificates.

A proxy gates job submission and keeps long runs alive. User proxies
simply expire; admin-provided proxies can be renewed (issued_at resets,
identity preserved), which is what allows longer jobs to finish.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from ..errors import PhyloflowError


class ExpiredProxy(PhyloflowError):
    code = "expired_proxy"


class RenewOnUserProxy(PhyloflowError):
    code = "renew_on_user_proxy"


@dataclass(frozen=True)
class ProxyCredential:
    owner: str
    issued_at: float
    lifetime: float  # seconds
    kind: str = "user"  # "user" | "admin"

    @property
    def expires_at(self) -> float:
        return self.issued_at + self.lifetime

    def valid(self, now: float | None = None) -> bool:
        return (time.time() if now is None else now) < self.expires_at


def init_proxy(owner: str, lifetime: float, kind: str = "user",
               now: float | None = None) -> ProxyCredential:
    if lifetime <= 0:
        raise PhyloflowError("proxy lifetime must be positive")
    if kind not in ("user", "admin"):
        raise PhyloflowError(f"proxy kind must be user or admin, got {kind!r}")
    return ProxyCredential(
        owner=owner,
        issued_at=time.time() if now is None else now,
        lifetime=lifetime,
        kind=kind,
    )


def renew_admin_proxy(proxy: ProxyCredential,
                      now: float | None = None) -> ProxyCredential:
    if proxy.kind != "admin":
        raise RenewOnUserProxy("only admin-provided proxies can be renewed")
    return replace(proxy, issued_at=time.time() if now is None else now)
