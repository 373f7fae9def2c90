import struct

import numpy as np
import pytest

from protoattn import formats
from protoattn.formats import (BadMagicError, DimensionOverflowError,
                               FileFormatError, TruncatedPayloadError)
from protoattn.gmm import PrototypeSet
from protoattn.instance import InstanceTrack
from protoattn.memory import MemoryBank

from conftest import f32_representable, random_fmap


class TestFmapRoundTrip:
    def test_roundtrip_many_seeds(self, tmp_path):
        for seed in range(100):
            fm = random_fmap(seed, 3 + seed % 4, 2 + seed % 5, 1 + seed % 3)
            path = tmp_path / "x.fmap"
            formats.write_fmap(path, fm)
            back = formats.read_fmap(path)
            assert (back.height, back.width, back.channels) == \
                (fm.height, fm.width, fm.channels)
            np.testing.assert_array_equal(back.data, fm.data)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.fmap"
        path.write_bytes(b"NOPE" + b"\x00" * 30)
        with pytest.raises(BadMagicError):
            formats.read_fmap(path)

    def test_truncated_payload(self, tmp_path):
        # header says 2x2x1 but only 3 float32 values follow
        path = tmp_path / "short.fmap"
        payload = struct.pack("<3f", 1.0, 2.0, 3.0)
        path.write_bytes(b"PCAF" + struct.pack("<HIII", 1, 2, 2, 1) + payload)
        with pytest.raises(TruncatedPayloadError):
            formats.read_fmap(path)

    def test_dimension_overflow(self, tmp_path):
        path = tmp_path / "huge.fmap"
        path.write_bytes(b"PCAF" + struct.pack("<HIII", 1, 2**20, 2**20, 16))
        with pytest.raises(DimensionOverflowError):
            formats.read_fmap(path)

    def test_trailing_bytes(self, tmp_path):
        fm = random_fmap(0, 2, 2, 1)
        path = tmp_path / "x.fmap"
        formats.write_fmap(path, fm)
        path.write_bytes(path.read_bytes() + b"!")
        with pytest.raises(FileFormatError):
            formats.read_fmap(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v9.fmap"
        path.write_bytes(b"PCAF" + struct.pack("<HIII", 9, 1, 1, 1) +
                         struct.pack("<f", 0.0))
        with pytest.raises(FileFormatError):
            formats.read_fmap(path)


class TestPgm:
    def test_roundtrip(self, tmp_path, rng):
        grid = (rng.uniform(0, 1, (5, 7)) > 0.5)
        path = tmp_path / "m.pgm"
        formats.write_pgm(path, grid)
        back = formats.read_pgm(path)
        np.testing.assert_array_equal(back >= 128, grid)

    def test_comment_handling(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x00\xff\x80\x10")
        back = formats.read_pgm(path)
        assert back.shape == (2, 2)
        np.testing.assert_array_equal(back, [[0, 255], [128, 16]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(BadMagicError):
            formats.read_pgm(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n3 3\n255\n\x00\x00")
        with pytest.raises(TruncatedPayloadError):
            formats.read_pgm(path)


def _proto_set(seed, n=4, d=3, c_v=2):
    rng = np.random.default_rng(seed)
    return PrototypeSet(f32_representable(rng.standard_normal((n, d))),
                        f32_representable(rng.standard_normal((n, c_v))),
                        0.5)


class TestPrototypeFormats:
    def test_prototype_roundtrip(self, tmp_path):
        ps = _proto_set(3)
        path = tmp_path / "p.pcap"
        formats.write_prototype_set(path, ps)
        back = formats.read_prototype_set(path)
        np.testing.assert_array_equal(back.key_means, ps.key_means)
        np.testing.assert_array_equal(back.value_protos, ps.value_protos)
        assert back.sigma2 == ps.sigma2

    def test_bank_roundtrip(self, tmp_path):
        bank = MemoryBank(5)
        for i, idx in enumerate([3, 7, 20]):
            bank.push_frame(_proto_set(i), idx)
        path = tmp_path / "b.pcab"
        formats.write_bank(path, bank)
        back = formats.read_bank(path)
        assert back.capacity == 5
        assert back.indices == [3, 7, 20]
        for (ia, pa), (ib, pb) in zip(bank.frames, back.frames):
            assert ia == ib
            np.testing.assert_array_equal(pa.key_means, pb.key_means)

    def test_track_roundtrip(self, tmp_path):
        track = InstanceTrack(11, _proto_set(1), _proto_set(2), 0.2, 9)
        path = tmp_path / "t.pcat"
        formats.write_track(path, track)
        back = formats.read_track(path)
        assert back.track_id == 11
        assert back.momentum == 0.2
        assert back.last_seen == 9
        np.testing.assert_array_equal(back.fg_protos.key_means,
                                      track.fg_protos.key_means)
        np.testing.assert_array_equal(back.bg_protos.value_protos,
                                      track.bg_protos.value_protos)

    def test_prototype_bad_magic(self, tmp_path):
        path = tmp_path / "p.pcap"
        path.write_bytes(b"XXXX" + b"\x00" * 40)
        with pytest.raises(BadMagicError):
            formats.read_prototype_set(path)
