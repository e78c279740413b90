"""Per-provider edge secure cloud: push-only ingestion, TTL pruning, VPN fetch.

The provider faces a write-only port; once a record set is pushed it can never
be read back from the provider side. Analysis-side access goes through the
fetch path, which demands an unlocked cloud and a quorum certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import TYPE_CHECKING

from . import crypto, framing
from .errors import AuthorizationError, EncryptionError, LockedError
from .records import BsCode, PdrSet, encode_pdr_set

if TYPE_CHECKING:
    from .federation import Federation, QuorumCertificate


@dataclass(frozen=True, slots=True)
class EncryptedPdrSet:
    """Sealed record set plus the cleartext metadata needed for pruning."""

    ciphertext: bytes
    minute: int
    bs_code_hint: BsCode


@dataclass
class _Stored:
    ciphertext: bytes
    minute: int
    bs_code_hint: BsCode


@dataclass
class EdgeMetrics:
    pushed: int = 0
    push_failures: int = 0
    pruned: int = 0


class EdgeCloud:
    """One provider's secure cloud node; all mutation through its two ports."""

    def __init__(self, provider_id: str, key_id: str, federation: "Federation", pdr_ttl: int, rng: Random):
        self.provider_id = provider_id
        self.key_id = key_id
        self.pdr_ttl = pdr_ttl
        self.locked_for_vpn = True
        self.metrics = EdgeMetrics()
        self._federation = federation
        self._rng = rng
        self._store: list[_Stored] = []

    # -- provider side ----------------------------------------------------------

    def push(self, pdr_set: PdrSet) -> bool:
        """Encrypt and append one record set; the plaintext is not retained.

        Returns False (and counts the drop) if sealing fails; the provider has
        no way to observe anything else about the store.
        """
        public_key = self._federation.key_registry[self.key_id]
        try:
            ciphertext = crypto.seal(public_key, encode_pdr_set(pdr_set), self._rng)
        except EncryptionError:
            self.metrics.push_failures += 1
            return False
        self._store.append(_Stored(ciphertext=ciphertext, minute=pdr_set.minute, bs_code_hint=pdr_set.bs))
        self.metrics.pushed += 1
        return True

    def provider_port(self) -> "ProviderPort":
        return ProviderPort(self)

    # -- retention ---------------------------------------------------------------

    def prune(self, now: int) -> int:
        """Secure-delete every entry older than the TTL; returns the count removed.

        Each expired ciphertext is overwritten with zeros before the entry is
        dropped, and the sweep is recorded in the audit ledger.
        """
        kept: list[_Stored] = []
        deleted = 0
        for entry in self._store:
            if now - entry.minute > self.pdr_ttl:
                entry.ciphertext = b"\x00" * len(entry.ciphertext)
                deleted += 1
            else:
                kept.append(entry)
        self._store = kept
        self.metrics.pruned += deleted
        self._federation.ledger.record("prune", now, provider=self.provider_id, deleted=deleted, shredded=True)
        return deleted

    # -- analysis-network side ------------------------------------------------------

    def vpn_fetch(self, cert: "QuorumCertificate", minute_range: tuple[int, int]) -> list[EncryptedPdrSet]:
        """Return stored sets in the inclusive minute range, under quorum authority."""
        from .federation import READ_MODES  # local import to avoid a cycle

        if self.locked_for_vpn:
            raise LockedError(f"edge cloud {self.provider_id} is locked")
        if cert.operation_class not in READ_MODES:
            self._federation.ledger.record(
                "authorization_failure", self._federation.now, provider=self.provider_id, reason="non-read certificate class"
            )
            raise AuthorizationError(f"certificate class {cert.operation_class.name} cannot fetch")
        self._federation.check_certificate(cert, cert.operation_class)
        start, end = minute_range
        return [
            EncryptedPdrSet(ciphertext=e.ciphertext, minute=e.minute, bs_code_hint=e.bs_code_hint)
            for e in self._store
            if start <= e.minute <= end
        ]

    def handle_fetch_frame(self, frame: bytes) -> bytes:
        """Wire-level fetch: decode request frame, serve, encode response frame."""
        from .federation import QuorumCertificate

        cert_blob, start, end = framing.decode_fetch_request(frame)
        entries = self.vpn_fetch(QuorumCertificate.decode(cert_blob), (start, end))
        return framing.encode_fetch_response(
            [(e.minute, e.bs_code_hint.code, e.bs_code_hint.precision_class.rank, e.ciphertext) for e in entries]
        )

    # -- introspection for audits (not part of the provider surface) -----------------

    @property
    def stored_count(self) -> int:
        return len(self._store)

    def stored_ciphertexts(self) -> list[bytes]:
        return [e.ciphertext for e in self._store]

    def oldest_age(self, now: int) -> int | None:
        if not self._store:
            return None
        return max(now - e.minute for e in self._store)


class ProviderPort:
    """The only surface a provider ever holds: push, nothing else."""

    __slots__ = ("_push",)

    def __init__(self, cloud: EdgeCloud):
        self._push = cloud.push

    def push(self, pdr_set: PdrSet) -> bool:
        return self._push(pdr_set)
