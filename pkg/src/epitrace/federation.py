"""Federation trust machinery: q-of-n vetting of every critical operation.

Independent entrusted authorities sign votes on workflow requests; a quorum
certificate is the transferable proof that q distinct authorities approved.
The federation also escrows provider decryption keys as threshold shares,
drives the passive/alert state machine, mints capability tokens per operation
mode, and audit-logs every decision in a hash-chained ledger.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from random import Random
from typing import Any

from . import crypto, framing
from .errors import (
    AuthorizationError,
    DecryptionError,
    ParameterError,
    StateError,
    ValidationError,
)
from .ledger import AuditLedger
from .records import PhoneId
from .shamir import Share, reconstruct_secret, split_secret


class OperationClass(Enum):
    LOCK_UNLOCK = 1
    STRICT_PUSH = 2
    BLIND_ANALYSIS = 3
    BLIND_PROCESSING = 4
    FULL_PROCESSING = 5


class SystemState(Enum):
    PASSIVE = "PASSIVE"
    ALERT = "ALERT"


READ_MODES = {OperationClass.BLIND_ANALYSIS, OperationClass.BLIND_PROCESSING, OperationClass.FULL_PROCESSING}
WRITE_MODES = {OperationClass.STRICT_PUSH, OperationClass.BLIND_PROCESSING, OperationClass.FULL_PROCESSING}


@dataclass(frozen=True)
class FederationParams:
    """Sizing of the trust federation; q may vary per operation class."""

    n_authorities: int = 7
    f: int = 2
    q_by_class: dict[OperationClass, int] = field(
        default_factory=lambda: {
            OperationClass.LOCK_UNLOCK: 5,
            OperationClass.STRICT_PUSH: 3,
            OperationClass.BLIND_ANALYSIS: 3,
            OperationClass.BLIND_PROCESSING: 3,
            OperationClass.FULL_PROCESSING: 5,
        }
    )
    key_threshold: int = 5  # x+1 shares to rebuild an escrowed key
    vote_window: int = 60  # minutes a request may stay pending before denial

    def __post_init__(self) -> None:
        if not (1 <= self.n_authorities <= 255):
            raise ParameterError("authority count must fit one wire byte")
        if self.n_authorities < 2 * self.f + 1:
            raise ParameterError(f"need n >= 2f+1, got n={self.n_authorities} f={self.f}")
        for cls, q in self.q_by_class.items():
            if not (self.f + 1 <= q <= self.n_authorities):
                raise ParameterError(f"quorum for {cls.name} must be in [f+1, n], got {q}")
        if not (1 <= self.key_threshold <= self.n_authorities):
            raise ParameterError("key threshold must be in [1, n]")

    def quorum(self, cls: OperationClass) -> int:
        return self.q_by_class[cls]


@dataclass
class Authority:
    """One entrusted entity: an Ed25519 identity plus its escrowed key shares."""

    id: int
    keypair: crypto.SigningKeyPair
    key_shares: dict[str, Share] = field(default_factory=dict)

    def approve(self, request: "WorkflowRequest") -> "Vote":
        signature = self.keypair.sign(vote_signing_bytes(request.request_id, request.request_hash()))
        return Vote(authority_id=self.id, request_id=request.request_id, signature=signature)


@dataclass(frozen=True)
class WorkflowRequest:
    """A signed request for one governed operation."""

    request_id: bytes  # 16 bytes
    operation_class: OperationClass
    payload: dict[str, Any]
    requester: int
    signature: bytes

    def signing_bytes(self) -> bytes:
        payload_json = json.dumps(self.payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return self.request_id + framing.u8(self.operation_class.value) + framing.u8(self.requester) + framing.lp_bytes(payload_json)

    def request_hash(self) -> bytes:
        return crypto.digest(self.signing_bytes())

    def encode(self) -> bytes:
        # wire layout: signing bytes || lp signature
        return self.signing_bytes() + framing.lp_bytes(self.signature)

    @classmethod
    def decode(cls, blob: bytes) -> "WorkflowRequest":
        r = framing.Reader(blob)
        request_id = r.raw(16)
        operation_class = OperationClass(r.u8())
        requester = r.u8()
        payload = json.loads(r.lp_bytes().decode("utf-8"))
        signature = r.lp_bytes()
        r.done()
        return cls(
            request_id=request_id,
            operation_class=operation_class,
            payload=payload,
            requester=requester,
            signature=signature,
        )


def make_request(
    requester: Authority,
    operation_class: OperationClass,
    payload: dict[str, Any],
    rng: Random | None = None,
) -> WorkflowRequest:
    request_id = crypto.rand_bytes(16, rng)
    unsigned = WorkflowRequest(request_id=request_id, operation_class=operation_class, payload=payload, requester=requester.id, signature=b"")
    return WorkflowRequest(
        request_id=request_id,
        operation_class=operation_class,
        payload=payload,
        requester=requester.id,
        signature=requester.keypair.sign(unsigned.signing_bytes()),
    )


def vote_signing_bytes(request_id: bytes, request_hash: bytes) -> bytes:
    return request_id + request_hash


@dataclass(frozen=True)
class Vote:
    authority_id: int
    request_id: bytes
    signature: bytes

    def encode(self) -> bytes:
        # wire layout: authority (u8) || request id (16 bytes) || lp signature
        return framing.u8(self.authority_id) + self.request_id + framing.lp_bytes(self.signature)

    @classmethod
    def decode(cls, blob: bytes) -> "Vote":
        r = framing.Reader(blob)
        authority_id = r.u8()
        request_id = r.raw(16)
        signature = r.lp_bytes()
        r.done()
        return cls(authority_id=authority_id, request_id=request_id, signature=signature)


@dataclass(frozen=True)
class QuorumCertificate:
    """Proof that `required_q` distinct authorities vetted one request."""

    request_id: bytes
    request_hash: bytes
    operation_class: OperationClass
    required_q: int
    approvals: tuple[tuple[int, bytes], ...]  # (authority id, signature)

    def encode(self) -> bytes:
        parts = [
            self.request_id,
            self.request_hash,
            framing.u8(self.operation_class.value),
            framing.u8(self.required_q),
            framing.u8(len(self.approvals)),
        ]
        for authority_id, sig in self.approvals:
            parts.append(framing.u8(authority_id))
            parts.append(framing.lp_bytes(sig))
        return b"".join(parts)

    @classmethod
    def decode(cls, blob: bytes) -> "QuorumCertificate":
        r = framing.Reader(blob)
        request_id = r.raw(16)
        request_hash = r.raw(32)
        op_class = OperationClass(r.u8())
        required_q = r.u8()
        count = r.u8()
        approvals = tuple((r.u8(), r.lp_bytes()) for _ in range(count))
        r.done()
        return cls(request_id=request_id, request_hash=request_hash, operation_class=op_class, required_q=required_q, approvals=approvals)


def verify_certificate(cert: QuorumCertificate, public_keys: dict[int, bytes], q: int) -> bool:
    """A certificate stands iff it carries >= q distinct valid approvals of one hash."""
    message = vote_signing_bytes(cert.request_id, cert.request_hash)
    valid_ids = set()
    for authority_id, sig in cert.approvals:
        pub = public_keys.get(authority_id)
        if pub is not None and crypto.verify_signature(pub, message, sig):
            valid_ids.add(authority_id)
    return len(valid_ids) >= q


@dataclass
class _Pending:
    request: WorkflowRequest
    submitted_at: int
    votes: dict[int, Vote] = field(default_factory=dict)
    certificate: QuorumCertificate | None = None
    denied: bool = False


class Capability:
    """Bearer right produced by authorize_mode; checks live against system state."""

    def __init__(self, federation: "Federation", mode: OperationClass, cert: QuorumCertificate):
        self._federation = federation
        self.mode = mode
        self.cert = cert

    def _require_alert(self) -> None:
        if self._federation.state.state is not SystemState.ALERT:
            raise StateError("system is PASSIVE; analysis capabilities are suspended")

    def require_read(self) -> None:
        self._require_alert()
        if self.mode not in READ_MODES:
            raise AuthorizationError(f"{self.mode.name} grants no read access")

    def require_write(self) -> None:
        self._require_alert()
        if self.mode not in WRITE_MODES:
            raise AuthorizationError(f"{self.mode.name} grants no write access")

    def require_decrypt(self) -> None:
        self._require_alert()
        if self.mode is not OperationClass.FULL_PROCESSING:
            raise AuthorizationError(f"{self.mode.name} does not release decryption keys")


@dataclass
class StateRecord:
    state: SystemState = SystemState.PASSIVE
    alert_started: int | None = None


@dataclass(frozen=True)
class CrossBorderToken:
    """A phone identity sealed to its home federation, with the contact context."""

    ciphertext: bytes
    home_country: str
    context: dict[str, Any]


class Federation:
    """The entrusted-authority collective plus everything it governs."""

    def __init__(self, params: FederationParams, rng: Random, country: str = "home"):
        self.params = params
        self.country = country
        self.rng = rng
        self.authorities = [Authority(id=i, keypair=crypto.SigningKeyPair.generate(rng)) for i in range(1, params.n_authorities + 1)]
        self.public_keys = {a.id: a.keypair.public_bytes for a in self.authorities}
        self.ledger = AuditLedger()
        self.state = StateRecord()
        self.now = 0
        self.key_registry: dict[str, bytes] = {}  # key id -> public half
        self._pending: dict[bytes, _Pending] = {}
        self._engine_keys: dict[str, bytes] = {}  # reconstructed only while ALERT
        self._edges: list[Any] = []
        self._vault: Any | None = None

    # -- clock and attachments -------------------------------------------------

    def attach_stores(self, edges: list[Any], vault: Any | None) -> None:
        self._edges = list(edges)
        self._vault = vault
        self._apply_locks()

    def tick(self, now: int) -> None:
        """Advance the simulated clock; deny requests whose vote window lapsed."""
        self.now = now
        for pending in self._pending.values():
            if pending.certificate is None and not pending.denied and now - pending.submitted_at > self.params.vote_window:
                pending.denied = True
                self.ledger.record(
                    "denial",
                    self.now,
                    request_id=pending.request.request_id.hex(),
                    operation_class=pending.request.operation_class.name,
                    votes=len(pending.votes),
                    required=self.params.quorum(pending.request.operation_class),
                )

    # -- key escrow --------------------------------------------------------------

    def escrow_keypair(self, key_id: str) -> bytes:
        """Create a sealing keypair; threshold-share the private half, keep the public.

        Returns the public key. The plaintext private key is not retained; it
        exists again only inside the analysis engine while the system is ALERT.
        """
        pair = crypto.SealKeyPair.generate(self.rng)
        shares = split_secret(pair.private_bytes, self.params.key_threshold, self.params.n_authorities, self.rng)
        for authority, share in zip(self.authorities, shares):
            authority.key_shares[key_id] = share
        self.key_registry[key_id] = pair.public_bytes
        return pair.public_bytes

    def _reconstruct_key(self, key_id: str) -> bytes:
        shares = [a.key_shares[key_id] for a in self.authorities if key_id in a.key_shares]
        if len(shares) < self.params.key_threshold:
            raise AuthorizationError(f"not enough shares to rebuild key {key_id}")
        secret = reconstruct_secret(shares[: self.params.key_threshold])
        self.ledger.record("key_reconstruction", self.now, key_id=key_id, shares_used=self.params.key_threshold)
        return secret

    def release_key(self, capability: Capability, key_id: str) -> bytes:
        """Hand the reconstructed private key to a FULL_PROCESSING holder."""
        capability.require_decrypt()
        if key_id not in self.key_registry:
            raise ValidationError(f"unknown key id {key_id}")
        secret = self._reconstruct_key(key_id)
        self.ledger.record("key_release", self.now, key_id=key_id, request_id=capability.cert.request_id.hex())
        return secret

    def engine_key(self, key_id: str) -> bytes:
        """Key material held by the sealed analysis engine; ALERT only."""
        if self.state.state is not SystemState.ALERT:
            raise StateError("engine keys exist only while the system is ALERT")
        try:
            return self._engine_keys[key_id]
        except KeyError:
            raise ValidationError(f"engine holds no key {key_id}") from None

    # -- workflow vetting ---------------------------------------------------------

    def submit_request(self, request: WorkflowRequest) -> None:
        if request.requester not in self.public_keys:
            raise AuthorizationError(f"unknown requester {request.requester}")
        if not crypto.verify_signature(self.public_keys[request.requester], request.signing_bytes(), request.signature):
            raise AuthorizationError("request signature invalid")
        if request.request_id in self._pending:
            raise ValidationError("request id already submitted")
        self._pending[request.request_id] = _Pending(request=request, submitted_at=self.now)

    def approve(self, authority: Authority, request_id: bytes) -> QuorumCertificate | None:
        pending = self._pending.get(request_id)
        if pending is None:
            raise ValidationError("unknown request id")
        if authority.id in pending.votes:
            raise AuthorizationError(f"authority {authority.id} already voted on this request")
        return self.apply_vote(authority.approve(pending.request))

    def apply_vote(self, vote: Vote) -> QuorumCertificate | None:
        """Fold one vote message into the pending request; idempotent on replays.

        Emits the quorum certificate exactly once, on the vote that completes
        the quorum; invalid or replayed votes change nothing.
        """
        pending = self._pending.get(vote.request_id)
        if pending is None:
            raise ValidationError("unknown request id")
        pub = self.public_keys.get(vote.authority_id)
        if pub is None:
            raise AuthorizationError(f"unknown authority {vote.authority_id}")
        message = vote_signing_bytes(pending.request.request_id, pending.request.request_hash())
        if not crypto.verify_signature(pub, message, vote.signature):
            raise AuthorizationError("vote signature invalid")
        if vote.authority_id in pending.votes:
            return None  # replay
        pending.votes[vote.authority_id] = vote
        q = self.params.quorum(pending.request.operation_class)
        if pending.certificate is None and not pending.denied and len(pending.votes) >= q:
            approvals = tuple(sorted((v.authority_id, v.signature) for v in pending.votes.values()))
            cert = QuorumCertificate(
                request_id=pending.request.request_id,
                request_hash=pending.request.request_hash(),
                operation_class=pending.request.operation_class,
                required_q=q,
                approvals=approvals,
            )
            pending.certificate = cert
            self.ledger.record(
                "certificate",
                self.now,
                request_id=cert.request_id.hex(),
                operation_class=cert.operation_class.name,
                approvers=sorted(v for v in pending.votes),
            )
            return cert
        return None

    def check_certificate(self, cert: QuorumCertificate, expected_class: OperationClass) -> None:
        if cert.operation_class is not expected_class:
            raise AuthorizationError(f"certificate class {cert.operation_class.name} does not authorize {expected_class.name}")
        if not verify_certificate(cert, self.public_keys, self.params.quorum(expected_class)):
            self.ledger.record("authorization_failure", self.now, operation_class=expected_class.name, request_id=cert.request_id.hex())
            raise AuthorizationError("certificate lacks a valid quorum")

    # -- state machine ------------------------------------------------------------

    def change_state(self, cert: QuorumCertificate, target: SystemState) -> StateRecord:
        self.check_certificate(cert, OperationClass.LOCK_UNLOCK)
        if target is self.state.state:
            raise StateError(f"system already {target.name}")
        if target is SystemState.ALERT:
            self.state = StateRecord(state=SystemState.ALERT, alert_started=self.now)
            # Starting analysis rebuilds provider keys inside the engine.
            self._engine_keys = {key_id: self._reconstruct_key(key_id) for key_id in self.key_registry}
        else:
            self.state = StateRecord(state=SystemState.PASSIVE, alert_started=None)
            self._engine_keys = {}
            if self._vault is not None:
                self._vault.delete_all(reason="state_change_to_passive")
        self._apply_locks()
        self.ledger.record("state_change", self.now, target=target.name, request_id=cert.request_id.hex())
        return self.state

    def _apply_locks(self) -> None:
        locked = self.state.state is SystemState.PASSIVE
        for edge in self._edges:
            edge.locked_for_vpn = locked
        if self._vault is not None:
            self._vault.locked = locked

    # -- capabilities ---------------------------------------------------------------

    def authorize_mode(self, cert: QuorumCertificate, operation_class: OperationClass) -> Capability:
        if operation_class is OperationClass.LOCK_UNLOCK:
            raise ValidationError("lock/unlock is not a data-access mode; use change_state")
        self.check_certificate(cert, operation_class)
        self.ledger.record("capability", self.now, mode=operation_class.name, request_id=cert.request_id.hex())
        return Capability(self, operation_class, cert)

    # -- cross-border tokens ----------------------------------------------------------

    def issue_token(self, phone: PhoneId, home_pubkey: bytes, context: dict[str, Any], home_country: str) -> CrossBorderToken:
        plain = framing.lp_bytes(phone.nr.encode("utf-8")) + phone.imei.encode("ascii")
        return CrossBorderToken(ciphertext=crypto.seal(home_pubkey, plain, self.rng), home_country=home_country, context=dict(context))

    @staticmethod
    def redeem_token(token: CrossBorderToken, shares: list[Share], key_threshold: int) -> PhoneId:
        """Rebuild the home federation key from >= threshold shares and open the token."""
        if len(shares) < key_threshold:
            raise AuthorizationError(f"need {key_threshold} shares to redeem, got {len(shares)}")
        private = reconstruct_secret(shares[:key_threshold])
        try:
            plain = crypto.unseal(private, token.ciphertext)
        except DecryptionError as exc:
            raise DecryptionError("token is not addressed to this federation") from exc
        r = framing.Reader(plain)
        nr = r.lp_bytes().decode("utf-8")
        imei = r.raw(15).decode("ascii")
        r.done()
        return PhoneId(nr=nr, imei=imei)
