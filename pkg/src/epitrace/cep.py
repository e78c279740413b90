"""Contact analysis engine: suspicion finding, scoring, completion, the
potential-contamination DAG, and hotspot mapping over decrypted record streams.

A suspicion exists when two phones stayed within the proximity threshold for at
least the duration threshold (short gaps tolerated); scores grade suspicions
on proximity, accumulated duration, measurement precision, crowd density and
venue severity. Confirmed-infected pairs become contamination records, whose
time-like separation (bounded by the incubation window) orders them into a
directed acyclic graph of plausible transmission.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from statistics import median_low
from typing import Iterable, Sequence

from .errors import NoEvidenceError, ParameterError, ResolutionError, ValidationError
from .federation import Capability
from .records import PdrSet, PhoneId, PrecisionClass
from .world import ProviderRegistry

PairKey = tuple[PhoneId, PhoneId]


def pair_key(a: PhoneId, b: PhoneId) -> PairKey:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class PhoneOfInterest:
    phone: PhoneId
    t_inf_min: int

    def __post_init__(self) -> None:
        if self.t_inf_min < 0:
            raise ValidationError("t_inf_min must be >= 0")


@dataclass(frozen=True)
class SpaceTimeRegion:
    """Envelope of an encounter: a minute interval over a set of station codes."""

    start: int
    end: int
    stations: frozenset[str]
    resolved_box: tuple[float, float, float, float] | None = None  # x0, y0, x1, y1

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValidationError("region start must be <= end")
        if not self.stations:
            raise ValidationError("region needs at least one station")


@dataclass(frozen=True)
class ContactWindow:
    """One maximal run of qualifying minutes for a phone pair."""

    minutes: tuple[int, ...]
    prox: tuple[float, ...]  # meters per qualifying minute
    classes: tuple[PrecisionClass, ...]
    stations: frozenset[str]
    set_sizes: tuple[int, ...]  # phones present when each sample was taken

    @property
    def start(self) -> int:
        return self.minutes[0]

    @property
    def end(self) -> int:
        return self.minutes[-1]

    @property
    def duration(self) -> int:
        return len(self.minutes)

    def region(self) -> SpaceTimeRegion:
        return SpaceTimeRegion(start=self.start, end=self.end, stations=self.stations)


@dataclass(frozen=True)
class ContactSuspicion:
    pair: PairKey
    pc_susp: bool
    windows: tuple[ContactWindow, ...]

    def qualifying_windows(self, dur_min: int) -> tuple[ContactWindow, ...]:
        return tuple(w for w in self.windows if w.duration >= dur_min)

    def region(self) -> SpaceTimeRegion:
        stations = frozenset().union(*(w.stations for w in self.windows))
        return SpaceTimeRegion(start=self.windows[0].start, end=self.windows[-1].end, stations=stations)


@dataclass(frozen=True)
class ContactScore:
    pair: PairKey
    region: SpaceTimeRegion
    raw: float
    risk_class: int  # 1 low .. 4 very high
    prox_avg: float
    dur_tot: int
    precision_prox: float
    precision_dur: float
    density: float
    severity: float


@dataclass(frozen=True)
class ContaminationRecord:
    """A contact between two confirmed-infected phones, with resolved coordinates."""

    v: PhoneId
    u: PhoneId
    region: SpaceTimeRegion
    coord_box: tuple[float, float, float, float]
    median_contact: int
    t_inf_min_v: int
    t_inf_min_u: int


@dataclass(frozen=True)
class DagEdge:
    src: PhoneId
    dst: PhoneId
    record: ContaminationRecord
    weight: float


@dataclass(frozen=True)
class InfectionDag:
    nodes: frozenset[PhoneId]
    edges: tuple[DagEdge, ...]

    def topological_order(self) -> list[PhoneId]:
        """Kahn's algorithm; raises if a cycle sneaks in."""
        indegree: dict[PhoneId, int] = {n: 0 for n in self.nodes}
        adjacency: dict[PhoneId, list[PhoneId]] = {n: [] for n in self.nodes}
        for e in self.edges:
            indegree[e.dst] += 1
            adjacency[e.src].append(e.dst)
        frontier = sorted(n for n, d in indegree.items() if d == 0)
        order: list[PhoneId] = []
        while frontier:
            node = frontier.pop(0)
            order.append(node)
            for nxt in sorted(adjacency[node]):
                indegree[nxt] -= 1
                if indegree[nxt] == 0:
                    frontier.append(nxt)
            frontier.sort()
        if len(order) != len(self.nodes):
            raise ValidationError("graph contains a cycle")
        return order

    def to_dot(self) -> str:
        lines = ["digraph contamination {"]
        for node in sorted(self.nodes):
            lines.append(f'  "{node.nr}";')
        for e in sorted(self.edges, key=lambda e: (e.src, e.dst)):
            lines.append(f'  "{e.src.nr}" -> "{e.dst.nr}" [label="{e.weight:.2f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- parameters -----------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisParams:
    prox_max: float = 2.0
    dur_min: int = 15
    gap_tolerance: int = 2
    search_margin: int = 0  # extra minutes scanned before t_inf_min


_PRECISION_FACTOR = {PrecisionClass.MACRO: 0.2, PrecisionClass.PICO: 0.6, PrecisionClass.FEMTO: 1.0}


@dataclass(frozen=True)
class ScoringConfig:
    """Weights and heuristics of the grading function; all tunable per epidemic."""

    w_prox: float = 0.35
    w_dur: float = 0.35
    w_precision: float = 0.10
    w_density: float = 0.10
    w_severity: float = 0.10
    dur_saturation_factor: float = 4.0  # dur_tot saturates at this multiple of dur_min
    precision_dur_default: float = 0.5
    density_saturation: float = 10.0  # phones per minute treated as fully crowded
    severity_default: float = 0.5
    severity_by_station: dict[str, float] = field(default_factory=dict)
    class_boundaries: tuple[float, float, float] = (0.25, 0.5, 0.75)

    def classify(self, raw: float) -> int:
        b1, b2, b3 = self.class_boundaries
        if raw < b1:
            return 1
        if raw < b2:
            return 2
        if raw < b3:
            return 3
        return 4

    def severity(self, stations: frozenset[str]) -> float:
        known = [self.severity_by_station[s] for s in stations if s in self.severity_by_station]
        return max(known) if known else self.severity_default


# -- record stream index ------------------------------------------------------------


class _SetView:
    """Flat projection of one set, laid out for the hot scan loop."""

    __slots__ = ("minute", "code", "rank", "size", "phones", "radii", "azimuths")

    def __init__(self, pdr_set: PdrSet):
        self.minute = pdr_set.minute
        self.code = pdr_set.bs.code
        self.rank = pdr_set.bs.precision_class.rank
        self.size = len(pdr_set.records)
        self.phones = [r.phone for r in pdr_set.records]
        self.radii = [r.prox.radius for r in pdr_set.records]
        self.azimuths = [r.prox.azimuth for r in pdr_set.records]


class PdrIndex:
    """Presence index over decrypted sets: phone -> minute -> (set view, position)."""

    def __init__(self, sets: Iterable[PdrSet]):
        self.presence: dict[PhoneId, dict[int, list[tuple[_SetView, int]]]] = {}
        self.phones: set[PhoneId] = set()
        self.n_sets = 0
        for pdr_set in sets:
            self.n_sets += 1
            view = _SetView(pdr_set)
            for pos, p in enumerate(view.phones):
                self.phones.add(p)
                self.presence.setdefault(p, {}).setdefault(view.minute, []).append((view, pos))

    def minutes_of(self, phone: PhoneId) -> list[int]:
        return sorted(self.presence.get(phone, ()))


def _ensure_index(sets: Iterable[PdrSet] | PdrIndex) -> PdrIndex:
    return sets if isinstance(sets, PdrIndex) else PdrIndex(sets)


# -- suspicion finding ----------------------------------------------------------------


def find_suspicions(
    capability: Capability,
    sets: Iterable[PdrSet] | PdrIndex,
    poi: PhoneOfInterest,
    params: AnalysisParams,
) -> list[ContactSuspicion]:
    """Scan the record stream for phones that stayed close to the phone of interest.

    Only minutes at or after the phone's earliest-infection estimate are
    considered. Per minute, the pair distance comes from the most precise
    station observing both phones; qualifying minutes (distance within the
    proximity threshold, inclusive) accumulate into windows, tolerating gaps
    up to the configured number of minutes. A pair is flagged once any single
    window reaches the duration threshold.
    """
    capability.require_read()
    index = _ensure_index(sets)
    lower = max(0, poi.t_inf_min - params.search_margin)
    samples: dict[PhoneId, list[tuple[int, float, PrecisionClass, str, int]]] = {}
    by_minute = index.presence.get(poi.phone, {})
    sqrt, cos = math.sqrt, math.cos  # the identical expression pair_distance uses
    class_by_rank = {c.rank: c for c in PrecisionClass}
    for minute in sorted(by_minute):
        if minute < lower:
            continue
        best: dict[PhoneId, tuple[int, float, str, int]] = {}  # u -> (-rank, dist, code, size)
        for view, pos in by_minute[minute]:
            neg_rank = -view.rank
            code = view.code
            size = view.size
            phones, radii, azimuths = view.phones, view.radii, view.azimuths
            rv, av = radii[pos], azimuths[pos]
            for i in range(size):
                if i == pos:
                    continue
                r, a = radii[i], azimuths[i]
                d2 = rv * rv + r * r - (2.0 * rv) * r * cos(abs(av - a))
                dist = sqrt(d2) if d2 > 0.0 else 0.0
                candidate = (neg_rank, dist, code, size)
                u = phones[i]
                prev = best.get(u)
                if prev is None or candidate < prev:
                    best[u] = candidate
        for u, (neg_rank, dist, code, size) in best.items():
            if dist <= params.prox_max:
                samples.setdefault(u, []).append((minute, dist, class_by_rank[-neg_rank], code, size))

    suspicions = []
    for u in sorted(samples):
        windows = _windows_from_samples(samples[u], params.gap_tolerance)
        pc_susp = any(w.duration >= params.dur_min for w in windows)
        suspicions.append(ContactSuspicion(pair=pair_key(poi.phone, u), pc_susp=pc_susp, windows=windows))
    return suspicions


def _windows_from_samples(
    samples: Sequence[tuple[int, float, PrecisionClass, str, int]], gap_tolerance: int
) -> tuple[ContactWindow, ...]:
    windows: list[ContactWindow] = []
    run: list[tuple[int, float, PrecisionClass, str, int]] = []
    for sample in samples:
        if run and sample[0] - run[-1][0] - 1 > gap_tolerance:
            windows.append(_close_window(run))
            run = []
        run.append(sample)
    if run:
        windows.append(_close_window(run))
    return tuple(windows)


def _close_window(run: Sequence[tuple[int, float, PrecisionClass, str, int]]) -> ContactWindow:
    return ContactWindow(
        minutes=tuple(s[0] for s in run),
        prox=tuple(s[1] for s in run),
        classes=tuple(s[2] for s in run),
        stations=frozenset(s[3] for s in run),
        set_sizes=tuple(s[4] for s in run),
    )


# -- scoring ------------------------------------------------------------------------------


def score_suspicions(
    capability: Capability,
    suspicions: Iterable[ContactSuspicion],
    params: AnalysisParams,
    scoring: ScoringConfig,
) -> list[ContactScore]:
    """Grade flagged suspicions into risk classes 1..4, keeping every term."""
    capability.require_read()
    scores = []
    for suspicion in suspicions:
        if not suspicion.pc_susp:
            raise ValidationError("only flagged suspicions can be scored")
        if not suspicion.windows:
            raise NoEvidenceError(f"suspicion {suspicion.pair[0].nr}/{suspicion.pair[1].nr} carries no windows")
        scores.append(_score_one(suspicion, params, scoring))
    return scores


def _score_one(suspicion: ContactSuspicion, params: AnalysisParams, scoring: ScoringConfig) -> ContactScore:
    minutes = [m for w in suspicion.windows for m in w.minutes]
    prox_values = [p for w in suspicion.windows for p in w.prox]
    class_factors = [_PRECISION_FACTOR[c] for w in suspicion.windows for c in w.classes]
    sizes = [s for w in suspicion.windows for s in w.set_sizes]
    prox_avg = sum(prox_values) / len(prox_values)
    dur_tot = len(minutes)
    precision_prox = sum(class_factors) / len(class_factors)
    density = sum(sizes) / len(sizes)
    raw = (
        scoring.w_prox * (1.0 - prox_avg / params.prox_max)
        + scoring.w_dur * min(1.0, dur_tot / (scoring.dur_saturation_factor * params.dur_min))
        + scoring.w_precision * (precision_prox * scoring.precision_dur_default)
        + scoring.w_density * min(1.0, density / scoring.density_saturation)
        + scoring.w_severity * scoring.severity(suspicion.region().stations)
    )
    raw = min(1.0, max(0.0, raw))
    return ContactScore(
        pair=suspicion.pair,
        region=suspicion.region(),
        raw=raw,
        risk_class=scoring.classify(raw),
        prox_avg=prox_avg,
        dur_tot=dur_tot,
        precision_prox=precision_prox,
        precision_dur=scoring.precision_dur_default,
        density=density,
        severity=scoring.severity(suspicion.region().stations),
    )


def median_contact_minute(suspicion: ContactSuspicion, dur_min: int) -> int:
    """Median qualifying minute across the windows that met the duration bar."""
    qualifying = suspicion.qualifying_windows(dur_min)
    minutes = [m for w in qualifying for m in w.minutes]
    if not minutes:
        raise NoEvidenceError("suspicion has no qualifying window")
    return median_low(minutes)


# -- completion ---------------------------------------------------------------------------


def complete_findings(
    capability: Capability,
    sets: Iterable[PdrSet] | PdrIndex,
    scores: Sequence[ContactScore],
    suspicions_by_pair: dict[PairKey, ContactSuspicion],
    scanned: set[PhoneId],
    params: AnalysisParams,
    scoring: ScoringConfig,
    class_threshold: int = 3,
) -> tuple[list[ContactSuspicion], list[ContactScore]]:
    """Cascade the scan onto every phone of a high-scoring pair.

    Each newly scanned phone inherits an earliest-infection estimate equal to
    the median minute of the window that implicated it. Already-known pairs
    are deduplicated on the unordered pair key, which makes a second
    invocation a no-op.
    """
    capability.require_read()
    index = _ensure_index(sets)
    known_pairs = set(suspicions_by_pair)
    new_suspicions: list[ContactSuspicion] = []
    new_scores: list[ContactScore] = []
    onset: dict[PhoneId, int] = {}
    frontier: list[PhoneId] = []

    def enqueue(score: ContactScore) -> None:
        base = suspicions_by_pair.get(score.pair)
        if base is None:
            return
        median = median_contact_minute(base, params.dur_min)
        for phone in score.pair:
            if phone in scanned:
                continue
            if phone not in onset or median < onset[phone]:
                onset[phone] = median
            if phone not in frontier:
                frontier.append(phone)

    for score in scores:
        if score.risk_class >= class_threshold:
            enqueue(score)

    while frontier:
        frontier.sort()
        phone = frontier.pop(0)
        if phone in scanned:
            continue
        scanned.add(phone)
        poi = PhoneOfInterest(phone=phone, t_inf_min=onset.get(phone, 0))
        for suspicion in find_suspicions(capability, index, poi, params):
            if suspicion.pair in known_pairs:
                continue
            known_pairs.add(suspicion.pair)
            suspicions_by_pair[suspicion.pair] = suspicion
            new_suspicions.append(suspicion)
            if suspicion.pc_susp:
                score = _score_one(suspicion, params, scoring)
                new_scores.append(score)
                if score.risk_class >= class_threshold:
                    enqueue(score)
    return new_suspicions, new_scores


# -- contamination records and the DAG --------------------------------------------------------


def build_pccont(
    capability: Capability,
    scores: Sequence[ContactScore],
    suspicions_by_pair: dict[PairKey, ContactSuspicion],
    infected: dict[PhoneId, int],
    registry: ProviderRegistry,
    dur_min: int,
) -> list[ContaminationRecord]:
    """Keep only both-infected pairs and resolve their regions to coordinates.

    This is the step that turns relative positions into absolute ones, so it
    demands the full-processing capability.
    """
    capability.require_decrypt()
    records = []
    for score in scores:
        v, u = score.pair
        if v not in infected or u not in infected:
            continue
        suspicion = suspicions_by_pair[score.pair]
        box = resolve_region_box(registry, score.region)
        records.append(
            ContaminationRecord(
                v=v,
                u=u,
                region=dataclasses.replace(score.region, resolved_box=box),
                coord_box=box,
                median_contact=median_contact_minute(suspicion, dur_min),
                t_inf_min_v=infected[v],
                t_inf_min_u=infected[u],
            )
        )
    return records


def resolve_region_box(registry: ProviderRegistry, region: SpaceTimeRegion) -> tuple[float, float, float, float]:
    """Bounding box of the region's stations: each centroid padded by its range."""
    boxes = []
    for code in sorted(region.stations):
        try:
            _bs, info = registry.resolve(code)
        except ValidationError as exc:
            raise ResolutionError(f"station {code} is not in the provider registry") from exc
        cx, cy = info.centroid
        boxes.append((cx - info.useful_range, cy - info.useful_range, cx + info.useful_range, cy + info.useful_range))
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def build_dag(records: Sequence[ContaminationRecord], t_incub_min: int, t_incub_max: int) -> InfectionDag:
    """Order contamination records into a plausible who-infected-whom DAG.

    An edge a -> b is added when (a) the contact's median minute falls after
    a's earliest-infection estimate, (b) b's estimate lies at least the minimum
    incubation time after a's (ties broken by phone ordering, which keeps the
    graph acyclic), and (c) the contact sits within the maximum incubation
    time of b's estimate. The weight decays linearly with that separation.
    """
    if t_incub_min > t_incub_max:
        raise ParameterError("t_incub_min must be <= t_incub_max")
    estimates: dict[PhoneId, int] = {}
    for record in records:
        for p, t in ((record.v, record.t_inf_min_v), (record.u, record.t_inf_min_u)):
            if estimates.setdefault(p, t) != t:
                raise ValidationError(f"inconsistent infection estimates for {p.nr}")
    nodes = set()
    edges = []
    for record in records:
        nodes.add(record.v)
        nodes.add(record.u)
        for a, b, t_a, t_b in (
            (record.v, record.u, record.t_inf_min_v, record.t_inf_min_u),
            (record.u, record.v, record.t_inf_min_u, record.t_inf_min_v),
        ):
            if record.median_contact < t_a:
                continue
            if t_b < t_a + t_incub_min:
                continue
            if t_b == t_a and not a < b:
                continue  # strict order fallback when incubation floor is zero
            if abs(record.median_contact - t_b) > t_incub_max:
                continue
            weight = 1.0 - abs(record.median_contact - t_b) / t_incub_max if t_incub_max > 0 else 1.0
            edges.append(DagEdge(src=a, dst=b, record=record, weight=weight))
    return InfectionDag(nodes=frozenset(nodes), edges=tuple(sorted(edges, key=lambda e: (e.src, e.dst))))


# -- hotspots ------------------------------------------------------------------------------------


def hotspot_map(records: Sequence[ContaminationRecord], cell_size: float) -> list[tuple[int, int, int]]:
    """Density grid over record coordinates: (cell_x, cell_y, count), densest first."""
    if cell_size <= 0:
        raise ParameterError("cell size must be > 0")
    counts: dict[tuple[int, int], int] = {}
    for record in records:
        x0, y0, x1, y1 = record.coord_box
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        cell = (math.floor(cx / cell_size), math.floor(cy / cell_size))
        counts[cell] = counts.get(cell, 0) + 1
    return sorted(((x, y, c) for (x, y), c in counts.items()), key=lambda t: (-t[2], t[0], t[1]))


def hotspot_csv(grid: Sequence[tuple[int, int, int]]) -> str:
    lines = ["cell_x,cell_y,count"]
    lines.extend(f"{x},{y},{c}" for x, y, c in grid)
    return "\n".join(lines) + "\n"
