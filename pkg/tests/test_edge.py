from random import Random

import pytest

from epitrace import crypto, framing
from epitrace.edge import EdgeCloud
from epitrace.errors import AuthorizationError, LockedError
from epitrace.federation import OperationClass, QuorumCertificate, SystemState, make_request
from epitrace.records import PdrSet, PrecisionClass, decode_pdr_set, encode_pdr_set
from epitrace.runner import vet
from util import pdr, phone, small_federation, station


def make_set(minute: int, n_phones: int = 3, bs=None) -> PdrSet:
    bs = bs or station(1)
    records = tuple(pdr(bs, phone(i), 1.0 + i, 0.1 * i, minute) for i in range(n_phones))
    return PdrSet(minute=minute, bs=bs, records=records)


@pytest.fixture
def cloud():
    federation = small_federation()
    federation.escrow_keypair("provider:P1")
    edge = EdgeCloud(provider_id="P1", key_id="provider:P1", federation=federation, pdr_ttl=40320, rng=Random(0))
    federation.attach_stores([edge], None)
    return federation, edge


def read_cert(federation, seed=1):
    return vet(federation, OperationClass.BLIND_ANALYSIS, {"purpose": "test"}, Random(seed))


def unlock(federation):
    cert = vet(federation, OperationClass.LOCK_UNLOCK, {"target": "ALERT"}, Random(77))
    federation.change_state(cert, SystemState.ALERT)


class TestPush:
    def test_pushes_append_in_order(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        for minute in range(10):
            assert port.push(make_set(minute))
        assert edge.stored_count == 10
        assert edge.metrics.pushed == 10

    def test_no_dedup_on_double_push(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        s = make_set(5)
        port.push(s)
        port.push(s)
        assert edge.stored_count == 2

    def test_ciphertext_round_trips_bit_exact(self, cloud):
        federation, edge = cloud
        s = make_set(9, n_phones=4)
        edge.push(s)
        unlock(federation)
        entry = edge.vpn_fetch(read_cert(federation), (0, 100))[0]
        # Reconstruct the provider key from the escrowed shares, as the engine does.
        private = federation.engine_key("provider:P1")
        plaintext = crypto.unseal(private, entry.ciphertext)
        assert plaintext == encode_pdr_set(s)
        assert decode_pdr_set(plaintext, PrecisionClass.FEMTO) == s

    def test_metadata_matches_enclosed_set(self, cloud):
        federation, edge = cloud
        s = make_set(42)
        edge.push(s)
        unlock(federation)
        entry = edge.vpn_fetch(read_cert(federation), (0, 100))[0]
        assert entry.minute == s.minute == 42
        assert entry.bs_code_hint == s.bs

    def test_provider_port_exposes_only_push(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        surface = [a for a in dir(port) if not a.startswith("_")]
        assert surface == ["push"]

    def test_confidentiality_no_plaintext_leaks(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        probes = [phone(i).nr.encode() for i in range(3)]
        for minute in range(1000):
            port.push(make_set(minute))
        for ciphertext in edge.stored_ciphertexts():
            for probe in probes:
                assert probe not in ciphertext

    def test_sealing_failure_drops_record_and_counts(self, cloud):
        federation, edge = cloud
        federation.key_registry["provider:P1"] = b"not a key"
        assert edge.provider_port().push(make_set(1)) is False
        assert edge.stored_count == 0
        assert edge.metrics.push_failures == 1


class TestPrune:
    def test_ttl_from_incubation_guidance(self, cloud):
        # 14-day incubation, factor 2: entries older than 40320 minutes go.
        _, edge = cloud
        port = edge.provider_port()
        port.push(make_set(0))
        port.push(make_set(10000))
        port.push(make_set(41000))
        deleted = edge.prune(now=41000 + 1)
        assert deleted == 1  # only the minute-0 entry exceeded 40320
        assert edge.stored_count == 2

    def test_nothing_deleted_before_ttl(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        for minute in range(5):
            port.push(make_set(minute))
        assert edge.prune(now=100) == 0
        assert edge.stored_count == 5

    def test_all_expired(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        for minute in range(5):
            port.push(make_set(minute))
        assert edge.prune(now=50000) == 5
        assert edge.stored_count == 0

    def test_pruning_bound_holds_after_any_prune(self, cloud):
        _, edge = cloud
        port = edge.provider_port()
        rng = Random(3)
        for minute in sorted(rng.sample(range(0, 100_000), 60)):
            port.push(make_set(minute))
        for now in (10_000, 50_000, 90_000, 130_000):
            edge.prune(now)
            age = edge.oldest_age(now)
            assert age is None or age <= edge.pdr_ttl

    def test_prune_is_ledger_logged(self, cloud):
        federation, edge = cloud
        edge.provider_port().push(make_set(0))
        edge.prune(now=50000)
        kinds = [e.content["kind"] for e in federation.ledger.entries]
        assert "prune" in kinds
        entry = [e for e in federation.ledger.entries if e.content["kind"] == "prune"][-1]
        assert entry.content["deleted"] == 1 and entry.content["shredded"] is True


class TestVpnFetch:
    def test_locked_cloud_rejects_even_valid_cert(self, cloud):
        federation, edge = cloud
        edge.provider_port().push(make_set(1))
        cert = read_cert(federation)
        assert edge.locked_for_vpn
        with pytest.raises(LockedError):
            edge.vpn_fetch(cert, (0, 10))

    def test_subquorum_cert_rejected_and_logged(self, cloud):
        federation, edge = cloud
        unlock(federation)
        request = make_request(federation.authorities[0], OperationClass.BLIND_ANALYSIS, {}, Random(5))
        q = federation.params.quorum(OperationClass.BLIND_ANALYSIS)
        votes = [a.approve(request) for a in federation.authorities[: q - 1]]
        forged = QuorumCertificate(
            request_id=request.request_id,
            request_hash=request.request_hash(),
            operation_class=OperationClass.BLIND_ANALYSIS,
            required_q=q,
            approvals=tuple((v.authority_id, v.signature) for v in votes),
        )
        before = len(federation.ledger.entries)
        with pytest.raises(AuthorizationError):
            edge.vpn_fetch(forged, (0, 10))
        logged = [e for e in federation.ledger.entries[before:] if e.content["kind"] == "authorization_failure"]
        assert logged

    def test_full_range_returns_everything_in_order(self, cloud):
        federation, edge = cloud
        port = edge.provider_port()
        for minute in range(6):
            port.push(make_set(minute))
        unlock(federation)
        entries = edge.vpn_fetch(read_cert(federation), (0, 5))
        assert [e.minute for e in entries] == list(range(6))

    def test_range_is_inclusive_filter(self, cloud):
        federation, edge = cloud
        port = edge.provider_port()
        for minute in (1, 5, 9):
            port.push(make_set(minute))
        unlock(federation)
        entries = edge.vpn_fetch(read_cert(federation), (5, 9))
        assert [e.minute for e in entries] == [5, 9]

    def test_wire_framing_round_trip(self, cloud):
        federation, edge = cloud
        port = edge.provider_port()
        port.push(make_set(3))
        unlock(federation)
        cert = read_cert(federation)
        frame = framing.encode_fetch_request(cert.encode(), 0, 10)
        response = framing.decode_fetch_response(edge.handle_fetch_frame(frame))
        assert len(response) == 1
        minute, code, class_value, ciphertext = response[0]
        assert minute == 3
        assert code == station(1).code
        assert PrecisionClass.from_rank(class_value) is PrecisionClass.FEMTO
        private = federation.engine_key("provider:P1")
        assert decode_pdr_set(crypto.unseal(private, ciphertext), PrecisionClass.FEMTO) == make_set(3)

    def test_write_class_cert_cannot_fetch(self, cloud):
        federation, edge = cloud
        unlock(federation)
        cert = vet(federation, OperationClass.STRICT_PUSH, {}, Random(9))
        with pytest.raises(AuthorizationError):
            edge.vpn_fetch(cert, (0, 10))
