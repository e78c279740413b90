"""Shared fixtures-in-code for the test suite."""

from __future__ import annotations

from random import Random

from epitrace.federation import Federation, FederationParams, OperationClass, SystemState
from epitrace.records import BsCode, PhoneId, PrecisionClass, ProxVector, make_pdr
from epitrace.runner import vet


def small_federation(seed: int = 99, n: int = 3, f: int = 1, q: int = 2, key_threshold: int = 2) -> Federation:
    params = FederationParams(
        n_authorities=n,
        f=f,
        q_by_class={cls: q for cls in OperationClass},
        key_threshold=key_threshold,
        vote_window=60,
    )
    return Federation(params, rng=Random(f"test-fed/{seed}"))


def alerted_federation(seed: int = 99) -> Federation:
    federation = small_federation(seed)
    cert = vet(federation, OperationClass.LOCK_UNLOCK, {"target": "ALERT"}, Random(f"test-vet/{seed}"))
    federation.change_state(cert, SystemState.ALERT)
    return federation


def capability(mode: OperationClass, federation: Federation | None = None, seed: int = 99):
    """Mint a live capability of the given mode on an alerted federation."""
    federation = federation or alerted_federation(seed)
    cert = vet(federation, mode, {"purpose": "test"}, Random(f"test-cap/{seed}/{mode.name}"))
    return federation.authorize_mode(cert, mode), federation


def phone(i: int) -> PhoneId:
    return PhoneId(nr=f"6{i:08d}", imei=f"{350000000000000 + i:015d}")


def station(i: int = 0, precision: PrecisionClass = PrecisionClass.FEMTO) -> BsCode:
    return BsCode(code=f"{i:016x}", precision_class=precision)


def pdr(bs: BsCode, who: PhoneId, radius: float, azimuth: float, minute: int):
    return make_pdr(bs, who, ProxVector(radius=radius, azimuth=azimuth), minute)
