import hashlib
import os
import random

import pytest

from covcert import crypto
from covcert.errors import EmptyDocument, InvalidSeed


class TestGenerateKeypair:
    def test_deterministic_under_fixed_seed(self):
        a = crypto.generate_keypair(b"\x00" * 32)
        b = crypto.generate_keypair(b"\x00" * 32)
        assert a.public_key == b.public_key

    def test_fresh_entropy_without_seed(self):
        assert crypto.generate_keypair().public_key != crypto.generate_keypair().public_key

    def test_distinct_seeds_distinct_keys(self):
        a = crypto.generate_keypair(b"\x00" * 32)
        b = crypto.generate_keypair(b"\x01" + b"\x00" * 31)
        assert a.public_key != b.public_key

    def test_seeded_sign_verify_roundtrip(self):
        kp = crypto.generate_keypair(b"\x07" * 32)
        sig = kp.sign(b"x")
        assert crypto.verify_sig(kp.public_key, b"x", sig)

    @pytest.mark.parametrize("seed", [b"", b"\x00" * 31, b"\x00" * 33])
    def test_malformed_seed_rejected(self, seed):
        with pytest.raises(InvalidSeed):
            crypto.generate_keypair(seed)


class TestDeriveDid:
    # frozen from an independent hashlib+base58 computation of the
    # documented preimage (0x01 || u32-len || doc || salt)
    FIXTURE_DID = "did:cov:6sySQYcxs9wgvPtkqfkrCCnuDiVPubEEMKyhk4SgkTPf"

    def test_fixture_value(self):
        did = crypto.derive_did("DL1234567", b"\x00" * 16)
        assert str(did) == self.FIXTURE_DID

    def test_pure_function(self):
        salt = b"\xab" * 16
        results = {str(crypto.derive_did("P123", salt)) for _ in range(100)}
        assert len(results) == 1

    def test_pairwise_salts_give_distinct_dids(self):
        dids = {
            str(crypto.derive_did("DL1234567", os.urandom(16))) for _ in range(100)
        }
        assert len(dids) == 100

    def test_salt_changes_preimage(self):
        a = crypto.derive_did("DL1234567", b"\x00" * 16)
        b = crypto.derive_did("DL1234567", b"\x01" * 16)
        assert a != b

    def test_empty_document_rejected(self):
        with pytest.raises(EmptyDocument):
            crypto.derive_did("", b"\x00" * 16)

    def test_identifier_decodes_to_32_bytes(self):
        from covcert.encoding import b58decode

        did = crypto.derive_did("DL1234567", os.urandom(16))
        assert len(b58decode(did.identifier)) == 32


class TestSignVerify:
    def test_signature_is_64_bytes_and_verifies(self):
        kp = crypto.generate_keypair(b"\x01" * 32)
        did = crypto.fresh_did()
        sig = crypto.sign(kp, b"abc", did)
        assert len(sig.sig) == 64
        assert crypto.verify_sig(kp.public_key, b"abc", sig.sig)

    def test_empty_message_allowed(self):
        kp = crypto.generate_keypair(b"\x02" * 32)
        assert crypto.verify_sig(kp.public_key, b"", kp.sign(b""))

    def test_tampered_message_fails(self):
        kp = crypto.generate_keypair(b"\x03" * 32)
        sig = kp.sign(b"abc")
        assert not crypto.verify_sig(kp.public_key, b"abd", sig)

    def test_wrong_key_fails(self):
        kp = crypto.generate_keypair(b"\x04" * 32)
        other = crypto.generate_keypair(b"\x05" * 32)
        assert not crypto.verify_sig(other.public_key, b"abc", kp.sign(b"abc"))

    def test_malformed_inputs_return_false(self):
        kp = crypto.generate_keypair(b"\x06" * 32)
        assert not crypto.verify_sig(b"short", b"m", kp.sign(b"m"))
        assert not crypto.verify_sig(kp.public_key, b"m", b"not-a-signature")

    def test_roundtrip_and_bitflip_property(self):
        rng = random.Random(1234)
        keys = [crypto.generate_keypair() for _ in range(10)]
        for i in range(1000):
            kp = keys[i % len(keys)]
            msg = rng.randbytes(rng.randint(1, 64))
            sig = kp.sign(msg)
            assert crypto.verify_sig(kp.public_key, msg, sig)
            if i % 10 == 0:
                # flip one bit in the message, then one in the signature
                bit = 1 << rng.randint(0, 7)
                pos = rng.randrange(len(msg))
                bad_msg = msg[:pos] + bytes([msg[pos] ^ bit]) + msg[pos + 1 :]
                assert not crypto.verify_sig(kp.public_key, bad_msg, sig)
                pos = rng.randrange(len(sig))
                bad_sig = sig[:pos] + bytes([sig[pos] ^ bit]) + sig[pos + 1 :]
                assert not crypto.verify_sig(kp.public_key, msg, bad_sig)


class TestDigest:
    def test_empty_string_vector(self):
        assert (
            crypto.digest(b"").hex()
            == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        )

    def test_abc_vector(self):
        assert (
            crypto.digest(b"abc").hex()
            == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        )

    def test_equal_inputs_equal_digests(self):
        assert crypto.digest(b"same") == crypto.digest(b"same")

    @pytest.mark.parametrize("size", [0, 1, 10**6])
    def test_output_always_32_bytes(self, size):
        assert len(crypto.digest(b"\xaa" * size)) == 32

    def test_matches_hashlib(self):
        data = os.urandom(999)
        assert crypto.digest(data) == hashlib.sha256(data).digest()
