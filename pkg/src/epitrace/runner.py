"""Scenario orchestration: generate, observe, push, alert, analyse, report.

Drives the whole pipeline on a simulated clock with no wall-clock reads, so a
(config, seed) pair always produces byte-identical artifacts.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from . import cep, crypto, erasure, framing
from .edge import EdgeCloud
from .errors import (
    AuthorizationError,
    ConfigurationError,
    DecryptionError,
    EpitraceError,
    LockedError,
    ReconstructionError,
    UnavailableError,
)
from .federation import Federation, FederationParams, OperationClass, QuorumCertificate, SystemState, make_request
from .ledger import verify_ledger
from .records import PdrSet, PrecisionClass, decode_pdr_set, group_into_sets
from .shamir import Share, reconstruct_secret
from .vault import FaultMode, VaultCoordinator
from .world import (
    GroundTruth,
    NoiseModel,
    ProviderRegistry,
    ScenarioConfig,
    generate_world,
    infection_estimates,
    observe,
    trace_positions,
    traces_csv,
)


@dataclass
class RunReport:
    """Everything a reviewer needs to judge one scenario run."""

    scenario_digest: str
    seed: int
    counts: dict[str, int]
    scores_by_class: dict[str, int]
    recall: float
    precision: float
    ledger_ok: bool
    vault_roundtrip_ok: bool
    privacy: dict[str, int | bool]
    timing: dict[str, int]

    @property
    def ok(self) -> bool:
        return (
            self.ledger_ok
            and self.vault_roundtrip_ok
            and self.privacy["plaintext_pii_hits"] == 0
            and self.privacy["vault_objects_final"] == 0
            and bool(self.privacy["edges_locked"])
            and 0.0 <= self.recall <= 1.0
            and 0.0 <= self.precision <= 1.0
        )

    def to_json_bytes(self) -> bytes:
        payload = {
            "scenario_digest": self.scenario_digest,
            "seed": self.seed,
            "counts": self.counts,
            "scores_by_class": self.scores_by_class,
            "recall": self.recall,
            "precision": self.precision,
            "ledger_ok": self.ledger_ok,
            "vault_roundtrip_ok": self.vault_roundtrip_ok,
            "privacy": self.privacy,
            "timing": self.timing,
            "ok": self.ok,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"

    def digest(self) -> str:
        return crypto.digest(self.to_json_bytes()).hex()

    def summary_text(self) -> str:
        lines = [
            f"scenario {self.scenario_digest[:12]} seed {self.seed}: {'OK' if self.ok else 'FAILED'}",
            f"  pdrs emitted      {self.counts['pdrs_emitted']}",
            f"  sets pushed       {self.counts['sets_pushed']} (pruned {self.counts['sets_pruned']})",
            f"  suspicion pairs   {self.counts['suspicion_pairs']} (flagged {self.counts['flagged_pairs']})",
            f"  scores by class   {self.scores_by_class}",
            f"  contamination     {self.counts['pccont_records']} records; dag {self.counts['dag_nodes']} nodes / {self.counts['dag_edges']} edges",
            f"  recall {self.recall:.3f}  precision {self.precision:.3f}",
            f"  ledger ok {self.ledger_ok}  vault roundtrip {self.vault_roundtrip_ok}",
            f"  privacy: {self.privacy}",
        ]
        return "\n".join(lines) + "\n"


@dataclass
class SimContext:
    """Live handles of one scenario run; kept for tests and the attack suite."""

    config: ScenarioConfig
    registry: ProviderRegistry
    ground_truth: GroundTruth
    federation: Federation
    edges: dict[str, EdgeCloud]
    vault: VaultCoordinator
    suspicions_by_pair: dict = field(default_factory=dict)
    suspicions: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    pccont: list = field(default_factory=list)
    dag: cep.InfectionDag | None = None
    hotspots: list = field(default_factory=list)
    traces: list = field(default_factory=list)


def federation_params(config: ScenarioConfig) -> FederationParams:
    q_by_class = {
        OperationClass.LOCK_UNLOCK: config.q_critical,
        OperationClass.STRICT_PUSH: config.q_read,
        OperationClass.BLIND_ANALYSIS: config.q_read,
        OperationClass.BLIND_PROCESSING: config.q_read,
        OperationClass.FULL_PROCESSING: config.q_critical,
    }
    return FederationParams(
        n_authorities=config.n_authorities,
        f=config.f,
        q_by_class=q_by_class,
        key_threshold=config.fed_key_threshold,
        vote_window=config.vote_window_min,
    )


def vet(federation: Federation, operation_class: OperationClass, payload: dict, rng: Random) -> QuorumCertificate:
    """Run the honest-path quorum ceremony and return the certificate."""
    from .federation import make_request

    requester = federation.authorities[0]
    request = make_request(requester, operation_class, payload, rng)
    federation.submit_request(request)
    q = federation.params.quorum(operation_class)
    cert = None
    for authority in federation.authorities[:q]:
        cert = federation.approve(authority, request.request_id)
    if cert is None:
        raise AuthorizationError("quorum ceremony did not produce a certificate")
    return cert


def parse_faults(spec: str | None) -> dict[int, FaultMode]:
    """Parse a fault spec like 'vault:2=byzantine,vault:3=crashed'."""
    faults: dict[int, FaultMode] = {}
    if not spec:
        return faults
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            target, mode = part.split("=")
            kind, idx = target.split(":")
            if kind != "vault":
                raise ValueError(f"unknown fault target {kind}")
            faults[int(idx)] = FaultMode(mode.upper())
        except ValueError as exc:
            raise ConfigurationError(f"bad fault spec {part!r}: {exc}") from exc
    return faults


def build_context(config: ScenarioConfig, faults: dict[int, FaultMode] | None = None) -> SimContext:
    registry, traces, ground_truth = generate_world(config)
    federation = Federation(federation_params(config), rng=Random(f"{config.seed}/federation"))
    edges = {}
    for provider_id in sorted(registry.providers):
        key_id = f"provider:{provider_id}"
        federation.escrow_keypair(key_id)
        edges[provider_id] = EdgeCloud(
            provider_id=provider_id,
            key_id=key_id,
            federation=federation,
            pdr_ttl=config.pdr_ttl,
            rng=Random(f"{config.seed}/edge/{provider_id}"),
        )
    vault = VaultCoordinator(
        federation,
        n_clouds=config.n_clouds,
        k=config.erasure_k,
        key_threshold=config.vault_key_threshold,
        rng=Random(f"{config.seed}/vault"),
    )
    for cloud_id, mode in (faults or {}).items():
        if not (1 <= cloud_id <= len(vault.clouds)):
            raise ConfigurationError(f"no vault cloud {cloud_id}")
        vault.clouds[cloud_id - 1].fault_mode = mode
    federation.attach_stores(list(edges.values()), vault)
    context = SimContext(
        config=config,
        registry=registry,
        ground_truth=ground_truth,
        federation=federation,
        edges=edges,
        vault=vault,
    )
    context.traces = traces
    return context


def _provider_of(registry: ProviderRegistry) -> dict[str, str]:
    mapping = {}
    for provider_id, codes in registry.providers.items():
        for bs in codes:
            mapping[bs.code] = provider_id
    return mapping


def run(config: ScenarioConfig, out_dir: str | Path | None = None, faults: str | dict[int, FaultMode] | None = None) -> RunReport:
    """Execute the full pipeline for one scenario and write its artifacts."""
    fault_map = parse_faults(faults) if isinstance(faults, str) or faults is None else faults
    context = build_context(config, fault_map)
    config = context.config
    federation = context.federation
    rng_cer = Random(f"{config.seed}/ceremonies")
    noise = NoiseModel.from_config(config)
    positions = trace_positions(context.traces, config.duration_min)
    provider_by_code = _provider_of(context.registry)
    ports = {pid: edge.provider_port() for pid, edge in context.edges.items()}

    counts = {
        "pdrs_emitted": 0,
        "sets_pushed": 0,
        "push_failures": 0,
        "sets_pruned": 0,
        "sets_fetched": 0,
        "suspicion_pairs": 0,
        "flagged_pairs": 0,
        "completion_pairs": 0,
        "pccont_records": 0,
        "dag_nodes": 0,
        "dag_edges": 0,
        "hotspot_cells": 0,
        "vault_objects_written": 0,
        "ledger_entries": 0,
    }
    prune_ticks = 0

    alerted = False
    for minute in range(config.duration_min + 1):
        federation.tick(minute)
        if not alerted and minute >= config.alert_minute:
            cert = vet(federation, OperationClass.LOCK_UNLOCK, {"target": "ALERT"}, rng_cer)
            federation.change_state(cert, SystemState.ALERT)
            alerted = True
        if minute == config.duration_min:
            break
        records = observe(context.registry, context.traces, minute, noise, positions=positions[minute])
        counts["pdrs_emitted"] += len(records)
        for pdr_set in group_into_sets(records):
            if ports[provider_by_code[pdr_set.bs.code]].push(pdr_set):
                counts["sets_pushed"] += 1
            else:
                counts["push_failures"] += 1
        if minute > 0 and minute % config.prune_every_min == 0:
            prune_ticks += 1
            for edge in context.edges.values():
                counts["sets_pruned"] += edge.prune(minute)
    # End-of-scenario prune tick keeps the retention bound before shutdown.
    prune_ticks += 1
    for edge in context.edges.values():
        counts["sets_pruned"] += edge.prune(config.duration_min)

    # -- analysis under quorum-vetted capabilities ---------------------------------
    cert_read = vet(federation, OperationClass.BLIND_PROCESSING, {"purpose": "contact analysis"}, rng_cer)
    cap_read = federation.authorize_mode(cert_read, OperationClass.BLIND_PROCESSING)
    sets = _fetch_and_decrypt(context, cert_read, (0, config.duration_min))
    counts["sets_fetched"] = len(sets)
    index = cep.PdrIndex(sets)
    params = cep.AnalysisParams(
        prox_max=config.prox_max_m,
        dur_min=config.dur_min,
        gap_tolerance=config.gap_tolerance_min,
        search_margin=config.search_margin_min,
    )
    scoring = cep.ScoringConfig()

    estimates = infection_estimates(config, context.ground_truth)
    pois = sorted(estimates.items(), key=lambda kv: (kv[1], kv[0]))
    for phone, t_inf_min in pois:
        poi = cep.PhoneOfInterest(phone=phone, t_inf_min=t_inf_min)
        for suspicion in cep.find_suspicions(cap_read, index, poi, params):
            if suspicion.pair not in context.suspicions_by_pair:
                context.suspicions_by_pair[suspicion.pair] = suspicion
                context.suspicions.append(suspicion)
    context.scores = cep.score_suspicions(cap_read, [s for s in context.suspicions if s.pc_susp], params, scoring)
    scanned = {phone for phone, _ in pois}
    extra_susp, extra_scores = cep.complete_findings(
        cap_read,
        index,
        context.scores,
        context.suspicions_by_pair,
        scanned,
        params,
        scoring,
        class_threshold=config.completion_class_threshold,
    )
    context.suspicions.extend(extra_susp)
    context.scores.extend(extra_scores)
    counts["completion_pairs"] = len(extra_susp)
    counts["suspicion_pairs"] = len(context.suspicions)
    flagged = {s.pair for s in context.suspicions if s.pc_susp}
    counts["flagged_pairs"] = len(flagged)

    cert_full = vet(federation, OperationClass.FULL_PROCESSING, {"purpose": "chain reconstruction"}, rng_cer)
    cap_full = federation.authorize_mode(cert_full, OperationClass.FULL_PROCESSING)
    context.pccont = cep.build_pccont(
        cap_full, context.scores, context.suspicions_by_pair, estimates, context.registry, config.dur_min
    )
    context.dag = cep.build_dag(context.pccont, config.t_incub_min, config.t_incub_max)
    context.dag.topological_order()  # invariant: must be acyclic
    context.hotspots = cep.hotspot_map(context.pccont, config.hotspot_cell_m)
    counts["pccont_records"] = len(context.pccont)
    counts["dag_nodes"] = len(context.dag.nodes)
    counts["dag_edges"] = len(context.dag.edges)
    counts["hotspot_cells"] = len(context.hotspots)

    artifacts = _artifact_payloads(context)
    vault_roundtrip_ok = True
    for name, payload in artifacts.items():
        object_id = context.vault.write(cap_read, payload)
        counts["vault_objects_written"] += 1
        if context.vault.read(cap_full, object_id) != payload:
            vault_roundtrip_ok = False

    scores_by_class = {str(c): 0 for c in (1, 2, 3, 4)}
    for score in context.scores:
        scores_by_class[str(score.risk_class)] += 1

    recall, precision = _recall_precision(context, flagged)

    # -- back to passive: secure delete and lock ------------------------------------
    cert_lock = vet(federation, OperationClass.LOCK_UNLOCK, {"target": "PASSIVE"}, rng_cer)
    federation.change_state(cert_lock, SystemState.PASSIVE)

    privacy = {
        "plaintext_pii_hits": _plaintext_pii_hits(context),
        "vault_objects_final": context.vault.object_count,
        "edges_locked": all(edge.locked_for_vpn for edge in context.edges.values()),
        "engine_keys_final": len(federation._engine_keys),
    }
    counts["ledger_entries"] = len(federation.ledger.entries)
    report = RunReport(
        scenario_digest=config.digest(),
        seed=config.seed,
        counts=counts,
        scores_by_class=scores_by_class,
        recall=recall,
        precision=precision,
        ledger_ok=federation.ledger.verify(),
        vault_roundtrip_ok=vault_roundtrip_ok,
        privacy=privacy,
        timing={
            "duration_min": config.duration_min,
            "alert_minute": config.alert_minute,
            "prune_ticks": prune_ticks,
        },
    )
    if out_dir is not None:
        _write_artifacts(Path(out_dir), context, report, artifacts)
    return report


def _fetch_and_decrypt(context: SimContext, cert: QuorumCertificate, minute_range: tuple[int, int]) -> list[PdrSet]:
    """Pull every provider's sealed sets over the wire framing and open them in-engine."""
    sets: list[PdrSet] = []
    for provider_id in sorted(context.edges):
        edge = context.edges[provider_id]
        frame = framing.encode_fetch_request(cert.encode(), minute_range[0], minute_range[1])
        response = edge.handle_fetch_frame(frame)
        key = context.federation.engine_key(edge.key_id)
        for _minute, _code, class_value, ciphertext in framing.decode_fetch_response(response):
            plaintext = crypto.unseal(key, ciphertext)
            sets.append(decode_pdr_set(plaintext, PrecisionClass.from_rank(class_value)))
    return sets


def _recall_precision(context: SimContext, flagged: set) -> tuple[float, float]:
    truth_pairs = set()
    for phone, record in context.ground_truth.infections.items():
        if record.infected_by is not None:
            truth_pairs.add(cep.pair_key(phone, record.infected_by))
    recall = 1.0 if not truth_pairs else len(truth_pairs & flagged) / len(truth_pairs)
    precision = 0.0 if not flagged else len(truth_pairs & flagged) / len(flagged)
    return recall, precision


def _plaintext_pii_hits(context: SimContext) -> int:
    """Scan resting stores for any phone number leaking in the clear."""
    probes = [t.phone.nr.encode("ascii") for t in context.traces[:20]]
    hits = 0
    for edge in context.edges.values():
        for ciphertext in edge.stored_ciphertexts()[:50]:
            hits += sum(1 for p in probes if p in ciphertext)
    return hits


def _artifact_payloads(context: SimContext) -> dict[str, bytes]:
    def suspicion_obj(s: cep.ContactSuspicion) -> dict:
        return {
            "pair": [s.pair[0].nr, s.pair[1].nr],
            "pc_susp": s.pc_susp,
            "windows": [
                {
                    "minutes": list(w.minutes),
                    "prox_m": [round(p, 6) for p in w.prox],
                    "classes": [c.value for c in w.classes],
                    "stations": sorted(w.stations),
                    "set_sizes": list(w.set_sizes),
                }
                for w in s.windows
            ],
        }

    def score_obj(s: cep.ContactScore) -> dict:
        return {
            "pair": [s.pair[0].nr, s.pair[1].nr],
            "region": {"start": s.region.start, "end": s.region.end, "stations": sorted(s.region.stations)},
            "raw": round(s.raw, 6),
            "risk_class": s.risk_class,
            "terms": {
                "prox_avg_m": round(s.prox_avg, 6),
                "dur_tot_min": s.dur_tot,
                "precision_prox": round(s.precision_prox, 6),
                "precision_dur": s.precision_dur,
                "density": round(s.density, 6),
                "severity": s.severity,
            },
        }

    def pccont_obj(r: cep.ContaminationRecord) -> dict:
        return {
            "v": r.v.nr,
            "u": r.u.nr,
            "region": {"start": r.region.start, "end": r.region.end, "stations": sorted(r.region.stations)},
            "coord_box": [round(c, 3) for c in r.coord_box],
            "median_contact": r.median_contact,
            "t_inf_min_v": r.t_inf_min_v,
            "t_inf_min_u": r.t_inf_min_u,
        }

    dag = context.dag
    dag_obj = {
        "nodes": sorted(n.nr for n in dag.nodes),
        "edges": [
            {"src": e.src.nr, "dst": e.dst.nr, "weight": round(e.weight, 6), "median_contact": e.record.median_contact}
            for e in dag.edges
        ],
    }

    def dumps(obj) -> bytes:
        return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"

    return {
        "suspicions.json": dumps(sorted((suspicion_obj(s) for s in context.suspicions), key=lambda o: o["pair"])),
        "scores.json": dumps(sorted((score_obj(s) for s in context.scores), key=lambda o: o["pair"])),
        "pccont.json": dumps(sorted((pccont_obj(r) for r in context.pccont), key=lambda o: (o["v"], o["u"]))),
        "dag.json": dumps(dag_obj),
    }


def _write_artifacts(out_dir: Path, context: SimContext, report: RunReport, artifacts: dict[str, bytes]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_bytes(report.to_json_bytes())
    (out_dir / "report.txt").write_text(report.summary_text())
    (out_dir / "ledger.jsonl").write_text(context.federation.ledger.export_jsonl())
    for name, payload in artifacts.items():
        (out_dir / name).write_bytes(payload)
    (out_dir / "dag.dot").write_text(context.dag.to_dot())
    (out_dir / "hotspots.csv").write_text(cep.hotspot_csv(context.hotspots))
    (out_dir / "traces.csv").write_text(traces_csv(context.traces))


# -- adversarial drivers ------------------------------------------------------------


@dataclass(frozen=True)
class AttackResult:
    name: str
    safe: bool
    detail: str


def attack_suite(config: ScenarioConfig) -> list[AttackResult]:
    """Run every adversarial driver against a fresh small deployment.

    Each attack must fail safely; `safe=True` means the system refused or
    survived it.
    """
    results = []
    context = build_context(config)
    federation = context.federation
    rng = Random(f"{config.seed}/attack")
    noise = NoiseModel.from_config(config)

    # Feed a little data while passive.
    ports = {pid: edge.provider_port() for pid, edge in context.edges.items()}
    provider_by_code = _provider_of(context.registry)
    for minute in range(0, 30):
        federation.tick(minute)
        for pdr_set in group_into_sets(observe(context.registry, context.traces, minute, noise)):
            ports[provider_by_code[pdr_set.bs.code]].push(pdr_set)

    # 1. Provider tries to read its own edge cloud: the port has no read surface.
    port = next(iter(ports.values()))
    readable = [a for a in dir(port) if not a.startswith("_") and a != "push"]
    results.append(AttackResult("provider_read", safe=not readable, detail=f"provider surface: {['push'] + readable}"))

    # 2. Locked fetch: valid certificate, but the system is passive.
    cert_probe = vet(federation, OperationClass.BLIND_ANALYSIS, {"purpose": "probe"}, rng)
    try:
        next(iter(context.edges.values())).vpn_fetch(cert_probe, (0, 100))
        results.append(AttackResult("locked_fetch", safe=False, detail="fetch served while passive"))
    except LockedError:
        results.append(AttackResult("locked_fetch", safe=True, detail="locked cloud refused fetch"))

    # Unlock for the rest of the drivers.
    cert_alert = vet(federation, OperationClass.LOCK_UNLOCK, {"target": "ALERT"}, rng)
    federation.change_state(cert_alert, SystemState.ALERT)

    # 3. Sub-quorum fetch: certificate carrying q-1 approvals.
    request = make_request(federation.authorities[0], OperationClass.BLIND_ANALYSIS, {"purpose": "subquorum"}, rng)
    q = federation.params.quorum(OperationClass.BLIND_ANALYSIS)
    votes = [authority.approve(request) for authority in federation.authorities[: q - 1]]
    forged = QuorumCertificate(
        request_id=request.request_id,
        request_hash=request.request_hash(),
        operation_class=OperationClass.BLIND_ANALYSIS,
        required_q=q,
        approvals=tuple(sorted((v.authority_id, v.signature) for v in votes)),
    )
    try:
        next(iter(context.edges.values())).vpn_fetch(forged, (0, 100))
        results.append(AttackResult("subquorum_fetch", safe=False, detail="sub-quorum certificate accepted"))
    except AuthorizationError:
        logged = any(e.content.get("kind") == "authorization_failure" for e in federation.ledger.entries)
        results.append(AttackResult("subquorum_fetch", safe=logged, detail="refused and ledger-logged" if logged else "refused but not logged"))

    # 4. Ledger tamper detection.
    entries = list(federation.ledger.entries)
    victim = entries[len(entries) // 2]
    tampered = dict(victim.content)
    tampered["minute"] = int(tampered.get("minute", 0)) + 1
    entries[len(entries) // 2] = dataclasses.replace(victim, content=tampered)
    tamper_detected = not verify_ledger(entries)
    results.append(AttackResult("ledger_tamper", safe=tamper_detected, detail="tamper detected" if tamper_detected else "tamper missed"))

    # 5. Cloud coalition below the key threshold tries to decrypt a vault object.
    cert_write = vet(federation, OperationClass.BLIND_PROCESSING, {"purpose": "store"}, rng)
    cap_write = federation.authorize_mode(cert_write, OperationClass.BLIND_PROCESSING)
    secret_payload = b"post-processed results " + rng.randbytes(64)
    object_id = context.vault.write(cap_write, secret_payload)
    coalition_safe = True
    detail = "all coalitions failed to decrypt"
    x = context.vault.key_threshold - 1
    for coalition in itertools.combinations(context.vault.clouds, x):
        responses = [r for r in (cloud.retrieve(object_id) for cloud in coalition) if r is not None]
        fragments = [erasure.Fragment(idx, frag) for idx, frag, _share in responses]
        shares = [Share(x=blob[0], data=blob[1:]) for _idx, _frag, blob in responses]
        try:
            ciphertext = erasure.decode(fragments, context.vault.k)
        except UnavailableError:
            continue  # too few fragments to even rebuild the ciphertext
        try:
            crypto.symmetric_decrypt(reconstruct_secret(shares), ciphertext)
            coalition_safe = False
            detail = f"coalition {[c.id for c in coalition]} decrypted the object"
        except (DecryptionError, ReconstructionError):
            continue
    results.append(AttackResult("cloud_coalition", safe=coalition_safe, detail=detail))

    # 6. Byzantine fragment during read.
    context.vault.clouds[0].fault_mode = FaultMode.BYZANTINE
    cert_full = vet(federation, OperationClass.FULL_PROCESSING, {"purpose": "read"}, rng)
    cap_full = federation.authorize_mode(cert_full, OperationClass.FULL_PROCESSING)
    try:
        recovered = context.vault.read(cap_full, object_id)
        results.append(AttackResult("byzantine_fragment", safe=recovered == secret_payload, detail="read survived corruption"))
    except EpitraceError as exc:
        results.append(AttackResult("byzantine_fragment", safe=False, detail=f"read failed: {exc}"))
    finally:
        context.vault.clouds[0].fault_mode = FaultMode.HONEST

    # 7. Access to expired records: prune, then fetch the expired range.
    far_future = config.pdr_ttl + 31
    federation.tick(far_future)
    for edge in context.edges.values():
        edge.prune(far_future)
    fetched = []
    for edge in context.edges.values():
        fetched.extend(edge.vpn_fetch(cert_probe, (0, 30)))
    results.append(
        AttackResult("expired_pdr_access", safe=not fetched, detail=f"{len(fetched)} expired sets served")
    )
    return results
