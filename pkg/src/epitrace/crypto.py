"""Cryptographic primitives, fixed repo-wide.

Hybrid sealing: ephemeral X25519 exchange, HKDF-SHA256 key derivation, then
AES-256-GCM. Signatures: Ed25519 (deterministic). Digests: SHA-256. Keypairs
can be derived from seed bytes so whole scenarios replay bit-exactly.
"""

from __future__ import annotations

import hashlib
import secrets as _secrets
from dataclasses import dataclass
from random import Random

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives import hashes, serialization

from .errors import DecryptionError, EncryptionError

_NONCE_LEN = 12
_KEY_LEN = 32
_HKDF_INFO = b"epitrace.hybrid.v1"


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def rand_bytes(n: int, rng: Random | None = None) -> bytes:
    return rng.randbytes(n) if rng is not None else _secrets.token_bytes(n)


@dataclass(frozen=True)
class SealKeyPair:
    """X25519 keypair for hybrid sealing; private half is threshold-shareable bytes."""

    private_bytes: bytes
    public_bytes: bytes

    @classmethod
    def generate(cls, rng: Random | None = None) -> "SealKeyPair":
        priv_raw = rand_bytes(_KEY_LEN, rng)
        priv = X25519PrivateKey.from_private_bytes(priv_raw)
        pub = priv.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return cls(private_bytes=priv_raw, public_bytes=pub)


@dataclass(frozen=True)
class SigningKeyPair:
    """Ed25519 identity keypair for authorities."""

    private_bytes: bytes
    public_bytes: bytes

    @classmethod
    def generate(cls, rng: Random | None = None) -> "SigningKeyPair":
        priv_raw = rand_bytes(_KEY_LEN, rng)
        priv = Ed25519PrivateKey.from_private_bytes(priv_raw)
        pub = priv.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return cls(private_bytes=priv_raw, public_bytes=pub)

    def sign(self, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(self.private_bytes).sign(message)


def verify_signature(public_bytes: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_bytes).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def seal(public_bytes: bytes, plaintext: bytes, rng: Random | None = None) -> bytes:
    """Encrypt to a public key: eph_pub(32) || nonce(12) || AES-GCM ciphertext."""
    try:
        eph_raw = rand_bytes(_KEY_LEN, rng)
        eph = X25519PrivateKey.from_private_bytes(eph_raw)
        shared = eph.exchange(X25519PublicKey.from_public_bytes(public_bytes))
        key = _derive(shared)
        nonce = rand_bytes(_NONCE_LEN, rng)
        ct = AESGCM(key).encrypt(nonce, plaintext, None)
        eph_pub = eph.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return eph_pub + nonce + ct
    except ValueError as exc:
        raise EncryptionError(str(exc)) from exc


def unseal(private_bytes: bytes, blob: bytes) -> bytes:
    if len(blob) < _KEY_LEN + _NONCE_LEN + 16:
        raise DecryptionError("sealed blob too short")
    eph_pub, nonce, ct = blob[:_KEY_LEN], blob[_KEY_LEN : _KEY_LEN + _NONCE_LEN], blob[_KEY_LEN + _NONCE_LEN :]
    try:
        priv = X25519PrivateKey.from_private_bytes(private_bytes)
        shared = priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
        return AESGCM(_derive(shared)).decrypt(nonce, ct, None)
    except (InvalidTag, ValueError) as exc:
        raise DecryptionError("ciphertext authentication failed") from exc


def symmetric_encrypt(key: bytes, plaintext: bytes, rng: Random | None = None) -> bytes:
    nonce = rand_bytes(_NONCE_LEN, rng)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def symmetric_decrypt(key: bytes, blob: bytes) -> bytes:
    if len(key) != _KEY_LEN:
        raise DecryptionError(f"key must be {_KEY_LEN} bytes")
    if len(blob) < _NONCE_LEN + 16:
        raise DecryptionError("ciphertext too short")
    try:
        return AESGCM(key).decrypt(blob[:_NONCE_LEN], blob[_NONCE_LEN:], None)
    except InvalidTag as exc:
        raise DecryptionError("ciphertext authentication failed") from exc


def _derive(shared: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=_KEY_LEN, salt=None, info=_HKDF_INFO).derive(shared)
