"""Deterministic synthetic world: station layout, phone mobility, measurement,
and the ground-truth epidemic recovered later by the analysis pipeline.

Everything is a pure function of the scenario seed. Phones move in small
household groups between homes and venues; whenever an infectious phone stays
within transmission distance of a susceptible one long enough, the infection
is planted and recorded as ground truth.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import math
from dataclasses import asdict, dataclass
from random import Random
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, ValidationError
from .records import BsCode, PhoneId, PrecisionClass, ProximityDetailRecord, ProxVector, make_pdr

Point = tuple[float, float]

TWO_PI = 2.0 * math.pi
MINUTES_PER_DAY = 1440


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete scenario parameterisation; the JSON schema mirrors these fields."""

    seed: int = 42
    # world
    world_size_m: float = 600.0
    n_phones: int = 50
    n_venues: int = 8
    duration_min: int = 1440
    n_providers: int = 2
    # stations
    n_macro: int = 1
    n_pico: int = 2
    n_femto: int = 4
    range_macro_m: float = 1500.0
    range_pico_m: float = 40.0
    range_femto_m: float = 8.0
    sigma_macro_m: float = 150.0
    sigma_pico_m: float = 10.0
    sigma_femto_m: float = 1.0
    noise_enabled: bool = True
    # epidemic
    index_cases: int = 1
    transmission_distance_m: float = 2.0
    min_exposure_min: int = 15
    t_incub_min: int = 60
    t_incub_max: int = 1440
    transmission_probability: float = 1.0
    exact_onset_estimates: bool = False
    # analysis thresholds
    prox_max_m: float = 2.0
    dur_min: int = 15
    gap_tolerance_min: int = 2
    search_margin_min: int = 0  # scan this many minutes before the onset estimate
    completion_class_threshold: int = 3
    alert_minute: int = 960
    hotspot_cell_m: float = 50.0
    # retention
    pdr_ttl_factor: int = 2
    prune_every_min: int = MINUTES_PER_DAY
    # federation
    n_authorities: int = 7
    f: int = 2
    q_read: int = 3
    q_critical: int = 5
    fed_key_threshold: int = 5
    vote_window_min: int = 60
    # vault
    n_clouds: int = 4
    erasure_k: int = 2
    vault_key_threshold: int = 3

    def __post_init__(self) -> None:
        counts = {
            "n_phones": self.n_phones,
            "n_venues": self.n_venues,
            "duration_min": self.duration_min,
            "n_providers": self.n_providers,
            "index_cases": self.index_cases,
            "min_exposure_min": self.min_exposure_min,
            "n_authorities": self.n_authorities,
            "n_clouds": self.n_clouds,
            "erasure_k": self.erasure_k,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {value}")
        if self.prox_max_m <= 0:
            raise ConfigurationError("prox_max_m must be > 0")
        if self.dur_min < 1:
            raise ConfigurationError("dur_min must be >= 1")
        if self.transmission_distance_m > self.world_size_m:
            raise ConfigurationError("transmission distance exceeds world size")
        if self.t_incub_min > self.t_incub_max:
            raise ConfigurationError("t_incub_min must be <= t_incub_max")
        if not (0.0 < self.transmission_probability <= 1.0):
            raise ConfigurationError("transmission_probability must be in (0, 1]")
        if not (0 <= self.alert_minute <= self.duration_min):
            raise ConfigurationError("alert_minute must fall inside the scenario")

    @property
    def pdr_ttl(self) -> int:
        return self.pdr_ttl_factor * self.t_incub_max

    def sigma(self, precision_class: PrecisionClass) -> float:
        return {
            PrecisionClass.MACRO: self.sigma_macro_m,
            PrecisionClass.PICO: self.sigma_pico_m,
            PrecisionClass.FEMTO: self.sigma_femto_m,
        }[precision_class]

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))


# -- registry and traces ---------------------------------------------------------


@dataclass(frozen=True)
class StationInfo:
    centroid: Point
    useful_range: float
    precision_class: PrecisionClass


@dataclass
class ProviderRegistry:
    """The only holder of the station-code-to-coordinates mapping."""

    stations: dict[BsCode, StationInfo]
    providers: dict[str, list[BsCode]]

    def resolve(self, code: str) -> tuple[BsCode, StationInfo]:
        for bs, info in self.stations.items():
            if bs.code == code:
                return bs, info
        raise ValidationError(f"unknown station code {code}")

    def sorted_stations(self) -> list[tuple[BsCode, StationInfo]]:
        return sorted(self.stations.items(), key=lambda kv: kv[0].code)


@dataclass(frozen=True)
class MobilityTrace:
    phone: PhoneId
    waypoints: tuple[tuple[int, Point], ...]

    def __post_init__(self) -> None:
        minutes = [m for m, _ in self.waypoints]
        if any(b <= a for a, b in zip(minutes, minutes[1:])):
            raise ValidationError("waypoints must be strictly increasing in minute")

    def position_at(self, minute: float) -> Point:
        pts = self.waypoints
        if minute <= pts[0][0]:
            return pts[0][1]
        if minute >= pts[-1][0]:
            return pts[-1][1]
        for (m0, p0), (m1, p1) in zip(pts, pts[1:]):
            if m0 <= minute <= m1:
                frac = (minute - m0) / (m1 - m0)
                return (p0[0] + frac * (p1[0] - p0[0]), p0[1] + frac * (p1[1] - p0[1]))
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class InfectionRecord:
    t_infected: int
    infected_by: PhoneId | None
    t_contact: int


@dataclass(frozen=True)
class GroundTruth:
    infections: dict[PhoneId, InfectionRecord]
    t_incub_min: int
    t_incub_max: int

    def chain_depth(self) -> int:
        depth: dict[PhoneId, int] = {}

        def walk(phone: PhoneId) -> int:
            if phone in depth:
                return depth[phone]
            rec = self.infections[phone]
            d = 1 if rec.infected_by is None else walk(rec.infected_by) + 1
            depth[phone] = d
            return d

        return max((walk(p) for p in self.infections), default=0)


# -- generation ---------------------------------------------------------------------

_WALK_SPEED_M_PER_MIN = 80.0
_PLACE_RADIUS_M = 1.0  # phones dwell within this radius of a venue/home point
_MAX_ATTEMPTS = 8


def _station_code(seed: int, provider: str, cls: PrecisionClass, idx: int) -> str:
    # Keyed pseudorandom station tokens; nothing about position leaks from them.
    key = hashlib.sha256(f"station-code/{seed}".encode()).digest()
    return hmac.new(key, f"{provider}/{cls.value}/{idx}".encode(), hashlib.sha256).hexdigest()[:16]


def _phone(idx: int) -> PhoneId:
    return PhoneId(nr=f"6{idx:08d}", imei=f"{350000000000000 + idx:015d}")


def generate_world(config: ScenarioConfig) -> tuple[ProviderRegistry, list[MobilityTrace], GroundTruth]:
    """Build the deterministic world for a scenario seed.

    Mobility is retried with derived sub-seeds until the planted epidemic
    satisfies the chain guarantee (a chain of ≥ 3 phones once ≥ 20 phones are
    simulated); the whole procedure remains a pure function of the config.
    """
    registry = _build_registry(config)
    for attempt in range(_MAX_ATTEMPTS):
        traces = _build_traces(config, attempt)
        ground_truth = _replay_epidemic(config, traces, attempt)
        chain_ok = config.n_phones < 20 or ground_truth.chain_depth() >= 3
        spread_ok = config.n_phones < 10 or len(ground_truth.infections) > len(_index_phones(config))
        if chain_ok and spread_ok:
            return registry, traces, ground_truth
    raise ConfigurationError("epidemic parameters too sparse: no qualifying infection chain after retries")


def _build_registry(config: ScenarioConfig) -> ProviderRegistry:
    rng = Random(f"{config.seed}/layout")
    size = config.world_size_m
    venues = _venue_points(config)
    stations: dict[BsCode, StationInfo] = {}
    providers: dict[str, list[BsCode]] = {f"P{p}": [] for p in range(1, config.n_providers + 1)}
    provider_names = sorted(providers)

    def add(cls: PrecisionClass, idx: int, centroid: Point, useful_range: float) -> None:
        provider = provider_names[(idx + cls.rank) % len(provider_names)]
        bs = BsCode(code=_station_code(config.seed, provider, cls, idx), precision_class=cls)
        stations[bs] = StationInfo(centroid=centroid, useful_range=useful_range, precision_class=cls)
        providers[provider].append(bs)

    for i in range(config.n_macro):
        # Central placement: macro cells are meant to blanket the world.
        jitter = (rng.uniform(-size / 10, size / 10), rng.uniform(-size / 10, size / 10))
        add(PrecisionClass.MACRO, i, (size / 2 + jitter[0], size / 2 + jitter[1]), config.range_macro_m)
    for i in range(config.n_pico):
        add(PrecisionClass.PICO, i, (rng.uniform(0, size), rng.uniform(0, size)), config.range_pico_m)
    for i in range(config.n_femto):
        # Pin femto stations to venues, cycling when there are more cells than venues.
        add(PrecisionClass.FEMTO, i, venues[i % len(venues)], config.range_femto_m)
    return ProviderRegistry(stations=stations, providers=providers)


def _venue_points(config: ScenarioConfig) -> list[Point]:
    rng = Random(f"{config.seed}/venues")
    margin = min(50.0, config.world_size_m / 10)
    return [
        (rng.uniform(margin, config.world_size_m - margin), rng.uniform(margin, config.world_size_m - margin))
        for _ in range(config.n_venues)
    ]


def _groups(config: ScenarioConfig) -> list[list[int]]:
    rng = Random(f"{config.seed}/groups")
    phones = list(range(config.n_phones))
    groups = []
    i = 0
    while i < len(phones):
        size = rng.choice([1, 2, 2, 3, 3, 4])
        groups.append(phones[i : i + size])
        i += size
    return groups


def _build_traces(config: ScenarioConfig, attempt: int) -> list[MobilityTrace]:
    rng = Random(f"{config.seed}/mobility/{attempt}")
    venues = _venue_points(config)
    size = config.world_size_m
    margin = min(50.0, size / 10)
    traces: list[MobilityTrace | None] = [None] * config.n_phones

    for group in _groups(config):
        home = (rng.uniform(margin, size - margin), rng.uniform(margin, size - margin))
        # Group-level anchor schedule: dwell somewhere, walk to the next place.
        anchor_legs: list[tuple[int, int, Point]] = []  # (arrive, depart, place)
        t = 0
        place = home
        while t < config.duration_min:
            dwell = rng.randint(45, 180) if place == home else rng.randint(30, 120)
            depart = min(t + dwell, config.duration_min)
            anchor_legs.append((t, depart, place))
            if depart >= config.duration_min:
                break
            nxt = rng.choice(venues) if (place == home or rng.random() < 0.25) else (home if rng.random() < 0.5 else rng.choice(venues))
            travel = max(1, math.ceil(math.dist(place, nxt) / _WALK_SPEED_M_PER_MIN))
            t = depart + travel
            place = nxt
        for member in group:
            member_rng = Random(f"{config.seed}/offset/{attempt}/{member}")
            waypoints: list[tuple[int, Point]] = []
            for arrive, depart, anchor in anchor_legs:
                angle = member_rng.uniform(0, TWO_PI)
                radius = _PLACE_RADIUS_M * math.sqrt(member_rng.random())
                pos = (anchor[0] + radius * math.cos(angle), anchor[1] + radius * math.sin(angle))
                if not waypoints or waypoints[-1][0] < arrive:
                    waypoints.append((arrive, pos))
                if depart > arrive:
                    waypoints.append((depart, pos))
            if waypoints[-1][0] < config.duration_min:
                waypoints.append((config.duration_min, waypoints[-1][1]))
            traces[member] = MobilityTrace(phone=_phone(member), waypoints=tuple(waypoints))
    return [t for t in traces if t is not None]


def _index_phones(config: ScenarioConfig) -> list[PhoneId]:
    rng = Random(f"{config.seed}/index-cases")
    chosen = rng.sample(range(config.n_phones), min(config.index_cases, config.n_phones))
    return [_phone(i) for i in sorted(chosen)]


def trace_positions(traces: list[MobilityTrace], duration: int) -> np.ndarray:
    """Positions of every phone at every whole minute, shape (duration, n, 2)."""
    out = np.empty((duration, len(traces), 2), dtype=float)
    minutes = np.arange(duration, dtype=float)
    for j, trace in enumerate(traces):
        ts = np.array([m for m, _ in trace.waypoints], dtype=float)
        xs = np.array([p[0] for _, p in trace.waypoints], dtype=float)
        ys = np.array([p[1] for _, p in trace.waypoints], dtype=float)
        out[:, j, 0] = np.interp(minutes, ts, xs)
        out[:, j, 1] = np.interp(minutes, ts, ys)
    return out


def _replay_epidemic(config: ScenarioConfig, traces: list[MobilityTrace], attempt: int) -> GroundTruth:
    rng = Random(f"{config.seed}/epidemic/{attempt}")
    n = len(traces)
    positions = trace_positions(traces, config.duration_min)
    phones = [t.phone for t in traces]
    index_set = set(_index_phones(config))
    infected_at = np.full(n, -1, dtype=int)
    infections: dict[PhoneId, InfectionRecord] = {}
    for j, phone in enumerate(phones):
        if phone in index_set:
            infected_at[j] = 0
            infections[phone] = InfectionRecord(t_infected=0, infected_by=None, t_contact=0)

    exposure = np.zeros((n, n), dtype=int)  # consecutive qualifying minutes, infector x susceptible
    for minute in range(config.duration_min):
        pos = positions[minute]
        diff = pos[:, None, :] - pos[None, :, :]
        close = (diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2) <= config.transmission_distance_m**2
        infectious = (infected_at >= 0) & (infected_at + config.t_incub_min <= minute)
        susceptible = infected_at < 0
        active = close & infectious[:, None] & susceptible[None, :]
        exposure = np.where(active, exposure + 1, 0)
        complete = np.argwhere(exposure >= config.min_exposure_min)
        if complete.size == 0:
            continue
        by_victim: dict[int, list[int]] = {}
        for i, j in complete:
            by_victim.setdefault(int(j), []).append(int(i))
        for j, candidates in sorted(by_victim.items()):
            infector = min(candidates, key=lambda i: (infected_at[i], phones[i]))
            if config.transmission_probability < 1.0 and rng.random() > config.transmission_probability:
                exposure[:, j] = 0  # failed transmission; further exposure may retry
                continue
            infected_at[j] = minute
            infections[phones[j]] = InfectionRecord(t_infected=minute, infected_by=phones[infector], t_contact=minute)
            exposure[:, j] = 0
            exposure[j, :] = 0
    return GroundTruth(infections=infections, t_incub_min=config.t_incub_min, t_incub_max=config.t_incub_max)


# -- measurement -----------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Seeded measurement noise; sigma depends on the station precision class."""

    seed: int
    sigma_by_class: dict[PrecisionClass, float]
    enabled: bool = True

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "NoiseModel":
        return cls(
            seed=config.seed,
            sigma_by_class={
                PrecisionClass.MACRO: config.sigma_macro_m,
                PrecisionClass.PICO: config.sigma_pico_m,
                PrecisionClass.FEMTO: config.sigma_femto_m,
            },
            enabled=config.noise_enabled,
        )


def observe(
    registry: ProviderRegistry,
    traces: list[MobilityTrace],
    minute: int,
    noise: NoiseModel | None = None,
    positions: np.ndarray | None = None,
) -> list[ProximityDetailRecord]:
    """One sweep of every station over every phone at one minute.

    A record is issued per (station, phone) pair with the phone inside the
    station's useful range; overlapping stations therefore yield several
    records for the same phone, which is what later triangulation feeds on.
    Noise draws are keyed by (seed, minute, station), so sweeps are
    independent, adding a station never perturbs another station's readings,
    and the whole measurement process stays a pure function of the scenario.
    """
    if positions is None:
        positions = np.array([t.position_at(minute) for t in traces], dtype=float)
    noisy = noise is not None and noise.enabled
    records: list[ProximityDetailRecord] = []
    for bs, info in registry.sorted_stations():
        cx, cy = info.centroid
        rel = positions - np.array([cx, cy])
        dist = np.hypot(rel[:, 0], rel[:, 1])
        in_range = np.nonzero(dist <= info.useful_range)[0]
        rng = Random(f"{noise.seed}/observe/{minute}/{bs.code}") if noisy else None
        sigma = noise.sigma_by_class[info.precision_class] if noisy else 0.0
        for j in in_range:
            dx, dy = float(rel[j, 0]), float(rel[j, 1])
            if rng is not None and sigma > 0.0:
                dx += rng.gauss(0.0, sigma)
                dy += rng.gauss(0.0, sigma)
            radius = math.hypot(dx, dy)
            azimuth = math.atan2(dy, dx) % TWO_PI
            records.append(make_pdr(bs, traces[j].phone, ProxVector(radius=radius, azimuth=azimuth), minute))
    return records


def infection_estimates(config: ScenarioConfig, ground_truth: GroundTruth) -> dict[PhoneId, int]:
    """Earliest-infection estimates as the health service would report them.

    Exact onset minus a per-phone error drawn once, uniform in
    [0, t_incub_min/2]; configs may request exact estimates instead.
    """
    out = {}
    for phone, rec in sorted(ground_truth.infections.items()):
        if config.exact_onset_estimates:
            out[phone] = rec.t_infected
        else:
            eps = Random(f"{config.seed}/onset/{phone.nr}").uniform(0, config.t_incub_min / 2)
            out[phone] = max(0, rec.t_infected - int(eps))
    return out


def traces_csv(traces: Iterable[MobilityTrace]) -> str:
    lines = ["minute,phone_nr,x,y"]
    for trace in traces:
        for minute, (x, y) in trace.waypoints:
            lines.append(f"{minute},{trace.phone.nr},{x:.3f},{y:.3f}")
    return "\n".join(lines) + "\n"
