import math
import struct

import pytest
from hypothesis import given, strategies as st

from epitrace.errors import DuplicateRecordError, ValidationError
from epitrace.records import (
    BsCode,
    PdrSet,
    PhoneId,
    PrecisionClass,
    ProxVector,
    decode_pdr_set,
    encode_pdr,
    encode_pdr_set,
    group_into_sets,
    make_pdr,
    pair_distance,
)
from util import pdr, phone, station


class TestMakePdr:
    def test_identity_construction(self):
        bs = station(1)
        rec = make_pdr(bs, phone(1), ProxVector(radius=10.0, azimuth=0.0), 5)
        assert rec.bs == bs
        assert rec.phone == phone(1)
        assert rec.prox.radius == 10.0
        assert rec.prox.azimuth == 0.0
        assert rec.t_pdr == 5

    def test_zero_radius_is_valid(self):
        rec = make_pdr(station(), phone(2), ProxVector(radius=0.0, azimuth=0.0), 0)
        assert rec.prox.radius == 0.0

    def test_minute_past_first_day_is_valid(self):
        rec = make_pdr(station(), phone(3), ProxVector(1.0, 1.0), 1440)
        assert rec.t_pdr == 1440

    def test_invalid_phone_rejected(self):
        with pytest.raises(ValidationError):
            PhoneId(nr="", imei="3" * 15)
        with pytest.raises(ValidationError):
            PhoneId(nr="600", imei="123")  # imei too short
        with pytest.raises(ValidationError):
            PhoneId(nr="60x", imei="3" * 15)

    def test_invalid_prox_rejected(self):
        with pytest.raises(ValidationError):
            ProxVector(radius=-1.0, azimuth=0.0)
        with pytest.raises(ValidationError):
            ProxVector(radius=1.0, azimuth=7.0)  # >= 2*pi

    def test_bad_station_code_rejected(self):
        with pytest.raises(ValidationError):
            BsCode(code="XYZ", precision_class=PrecisionClass.MACRO)


class TestGrouping:
    def test_same_station_same_minute_one_set(self):
        records = [pdr(station(1), phone(i), 1.0, 0.1, 7) for i in range(3)]
        sets = group_into_sets(records)
        assert len(sets) == 1
        assert len(sets[0].records) == 3
        assert sets[0].minute == 7

    def test_three_minutes_three_sets(self):
        records = [pdr(station(1), phone(0), 1.0, 0.1, m) for m in (1, 2, 3)]
        sets = group_into_sets(records)
        assert [s.minute for s in sets] == [1, 2, 3]
        assert all(len(s.records) == 1 for s in sets)

    def test_empty_input(self):
        assert group_into_sets([]) == []

    def test_duplicate_triple_rejected(self):
        rec = pdr(station(1), phone(0), 1.0, 0.1, 1)
        with pytest.raises(DuplicateRecordError):
            group_into_sets([rec, rec])

    def test_records_sorted_by_phone(self):
        records = [pdr(station(1), phone(i), 1.0, 0.1, 7) for i in (3, 1, 2)]
        sets = group_into_sets(records)
        assert [r.phone for r in sets[0].records] == [phone(1), phone(2), phone(3)]

    def test_day_boundary_lands_in_later_set(self):
        records = [pdr(station(1), phone(0), 1.0, 0.1, 1439), pdr(station(1), phone(0), 1.0, 0.1, 1440)]
        sets = group_into_sets(records)
        assert [s.minute for s in sets] == [1439, 1440]

    @given(
        st.lists(
            st.tuples(st.integers(0, 3), st.integers(0, 5), st.integers(0, 10)),
            unique=True,
            max_size=40,
        )
    )
    def test_group_then_flatten_is_permutation(self, triples):
        records = [pdr(station(b), phone(p), 1.0 + p, 0.5, m) for b, p, m in triples]
        sets = group_into_sets(records)
        flattened = [r for s in sets for r in s.records]
        assert sorted(flattened, key=lambda r: (r.bs.code, r.phone, r.t_pdr)) == sorted(
            records, key=lambda r: (r.bs.code, r.phone, r.t_pdr)
        )


class TestPairDistance:
    @given(
        st.floats(0, 100), st.floats(0, 6.28), st.floats(0, 100), st.floats(0, 6.28)
    )
    def test_matches_euclidean(self, r1, a1, r2, a2):
        v1, v2 = ProxVector(r1, a1), ProxVector(r2, a2)
        p1 = (r1 * math.cos(a1), r1 * math.sin(a1))
        p2 = (r2 * math.cos(a2), r2 * math.sin(a2))
        assert pair_distance(v1, v2) == pytest.approx(math.dist(p1, p2), abs=1e-9)

    @given(st.floats(0, 100), st.floats(0, 6.28), st.floats(0, 100), st.floats(0, 6.28))
    def test_bitwise_commutative(self, r1, a1, r2, a2):
        v1, v2 = ProxVector(r1, a1), ProxVector(r2, a2)
        assert pair_distance(v1, v2) == pair_distance(v2, v1)


class TestSerialization:
    def test_canonical_layout_is_bit_exact(self):
        bs = BsCode(code="00deadbeef00cafe", precision_class=PrecisionClass.PICO)
        rec = make_pdr(bs, PhoneId(nr="600000001", imei="350000000000001"), ProxVector(12.5, 1.25), 99)
        blob = encode_pdr(rec)
        expected = (
            b"00deadbeef00cafe"
            + struct.pack(">I", 9)
            + b"600000001"
            + b"350000000000001"
            + struct.pack(">d", 12.5)
            + struct.pack(">d", 1.25)
            + struct.pack(">Q", 99)
        )
        assert blob == expected

    def test_set_round_trip(self):
        bs = station(4, PrecisionClass.MACRO)
        records = tuple(pdr(bs, phone(i), float(i), 0.25 * i, 11) for i in range(4))
        original = PdrSet(minute=11, bs=bs, records=records)
        decoded = decode_pdr_set(encode_pdr_set(original), PrecisionClass.MACRO)
        assert decoded == original

    def test_serialized_bytes_reveal_no_coordinates(self):
        # The registry places this station at a known point; its serialized
        # records must not contain those coordinates in any obvious encoding.
        centroid = (123.456, 789.012)
        rec = pdr(station(5), phone(1), 3.0, 0.5, 2)
        blob = encode_pdr(rec)
        for value in centroid:
            assert struct.pack(">d", value) not in blob
            assert struct.pack("<d", value) not in blob
            assert str(value).encode() not in blob

    def test_set_rejects_foreign_records(self):
        with pytest.raises(ValidationError):
            PdrSet(minute=5, bs=station(1), records=(pdr(station(2), phone(1), 1.0, 0.0, 5),))
        with pytest.raises(ValidationError):
            PdrSet(minute=5, bs=station(1), records=(pdr(station(1), phone(1), 1.0, 0.0, 6),))

    def test_set_rejects_duplicate_phone(self):
        recs = (pdr(station(1), phone(1), 1.0, 0.0, 5), pdr(station(1), phone(1), 2.0, 0.1, 5))
        with pytest.raises(DuplicateRecordError):
            PdrSet(minute=5, bs=station(1), records=recs)
