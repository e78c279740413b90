"""Byte-wise Shamir secret sharing over GF(256).

Shares carry x-coordinates 1..n; any `threshold` of them reconstruct the
secret by Lagrange interpolation at x = 0, fewer reveal nothing.
"""

from __future__ import annotations

import secrets as _secrets
from dataclasses import dataclass
from random import Random

from . import gf256
from .errors import ParameterError, ReconstructionError


@dataclass(frozen=True, slots=True)
class Share:
    """One participant's share: x-coordinate plus one byte per secret byte."""

    x: int
    data: bytes


def split_secret(secret: bytes, threshold: int, n: int, rng: Random | None = None) -> list[Share]:
    """Split `secret` into n shares such that any `threshold` reconstruct it.

    `rng` makes the polynomial coefficients reproducible for seeded scenarios;
    left None, they come from the OS entropy pool.
    """
    if not (1 <= threshold <= n <= 255):
        raise ParameterError(f"need 1 <= threshold <= n <= 255, got threshold={threshold} n={n}")
    rand_byte = rng.randrange if rng is not None else (lambda _n: _secrets.randbelow(256))
    polys = [[b] + [rand_byte(256) for _ in range(threshold - 1)] for b in secret]
    return [Share(x=x, data=bytes(gf256.poly_eval(p, x) for p in polys)) for x in range(1, n + 1)]


def reconstruct_secret(shares: list[Share]) -> bytes:
    """Combine shares by Lagrange interpolation at x = 0.

    With at least `threshold` shares from one sharing this returns the original
    secret; mixing sharings or handing in too few yields garbage, not an error,
    exactly as the underlying mathematics behaves.
    """
    if not shares:
        raise ReconstructionError("no shares supplied")
    xs = [s.x for s in shares]
    if len(set(xs)) != len(xs):
        raise ReconstructionError("duplicate share x-coordinates")
    length = len(shares[0].data)
    if any(len(s.data) != length for s in shares):
        raise ReconstructionError("shares have mismatched lengths")
    # Lagrange basis at x=0 depends only on the x-coordinates.
    weights = []
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if i == j:
                continue
            num = gf256.mul(num, xj)
            den = gf256.mul(den, xi ^ xj)
        weights.append(gf256.div(num, den))
    out = bytearray(length)
    for share, w in zip(shares, weights):
        for k, byte in enumerate(share.data):
            out[k] ^= gf256.mul(w, byte)
    return bytes(out)
