from random import Random

import pytest

from epitrace import crypto
from epitrace.errors import DecryptionError


class TestHybridSeal:
    def test_round_trip(self):
        pair = crypto.SealKeyPair.generate(Random(0))
        blob = crypto.seal(pair.public_bytes, b"proximity sets", Random(1))
        assert crypto.unseal(pair.private_bytes, blob) == b"proximity sets"

    def test_wrong_key_fails(self):
        pair_a = crypto.SealKeyPair.generate(Random(0))
        pair_b = crypto.SealKeyPair.generate(Random(1))
        blob = crypto.seal(pair_a.public_bytes, b"secret", Random(2))
        with pytest.raises(DecryptionError):
            crypto.unseal(pair_b.private_bytes, blob)

    def test_tamper_detected(self):
        pair = crypto.SealKeyPair.generate(Random(0))
        blob = bytearray(crypto.seal(pair.public_bytes, b"secret", Random(2)))
        blob[-1] ^= 0x01
        with pytest.raises(DecryptionError):
            crypto.unseal(pair.private_bytes, bytes(blob))

    def test_truncated_blob_rejected(self):
        pair = crypto.SealKeyPair.generate(Random(0))
        with pytest.raises(DecryptionError):
            crypto.unseal(pair.private_bytes, b"short")

    def test_seeded_encryption_is_reproducible(self):
        pair = crypto.SealKeyPair.generate(Random(0))
        blob1 = crypto.seal(pair.public_bytes, b"same", Random(42))
        blob2 = crypto.seal(pair.public_bytes, b"same", Random(42))
        assert blob1 == blob2

    def test_ciphertext_hides_plaintext(self):
        pair = crypto.SealKeyPair.generate(Random(0))
        blob = crypto.seal(pair.public_bytes, b"600000001" * 4, Random(3))
        assert b"600000001" not in blob


class TestSymmetric:
    def test_round_trip(self):
        key = crypto.rand_bytes(32, Random(4))
        blob = crypto.symmetric_encrypt(key, b"fragment payload", Random(5))
        assert crypto.symmetric_decrypt(key, blob) == b"fragment payload"

    def test_wrong_key_rejected(self):
        key = crypto.rand_bytes(32, Random(4))
        other = crypto.rand_bytes(32, Random(5))
        blob = crypto.symmetric_encrypt(key, b"payload", Random(6))
        with pytest.raises(DecryptionError):
            crypto.symmetric_decrypt(other, blob)

    def test_bad_key_length_rejected(self):
        with pytest.raises(DecryptionError):
            crypto.symmetric_decrypt(b"short", b"\x00" * 40)


class TestSignatures:
    def test_sign_verify(self):
        pair = crypto.SigningKeyPair.generate(Random(7))
        sig = pair.sign(b"vote")
        assert crypto.verify_signature(pair.public_bytes, b"vote", sig)

    def test_reject_wrong_message(self):
        pair = crypto.SigningKeyPair.generate(Random(7))
        sig = pair.sign(b"vote")
        assert not crypto.verify_signature(pair.public_bytes, b"other", sig)

    def test_reject_wrong_signer(self):
        a = crypto.SigningKeyPair.generate(Random(7))
        b = crypto.SigningKeyPair.generate(Random(8))
        assert not crypto.verify_signature(b.public_bytes, b"vote", a.sign(b"vote"))

    def test_signatures_deterministic(self):
        pair = crypto.SigningKeyPair.generate(Random(9))
        assert pair.sign(b"m") == pair.sign(b"m")
