import io

import numpy as np
import pytest

from cstomo import formats, sampling, states
from cstomo.formats import FormatError
from cstomo.sampling import NoiseModel


def sample_record(noise=None, scheme=None):
    rho = states.random_rank_r_state(16, 2, seed=1)
    scheme = scheme or sampling.draw_uniform(4, 40, replacement=False, seed=2)
    return sampling.measure(rho, scheme, noise or NoiseModel.exact(), seed=3)


class TestMrecRoundTrip:
    def test_exact_record(self, tmp_path):
        rec = sample_record()
        path = tmp_path / "r.mrec"
        formats.write_mrec(rec, path)
        back = formats.read_mrec(path)
        assert back.scheme.kind == rec.scheme.kind
        assert back.scheme.n == rec.scheme.n
        assert np.array_equal(back.scheme.indices, rec.scheme.indices)
        assert np.array_equal(back.values, rec.values)  # lossless floats
        assert np.array_equal(back.stderr, rec.stderr)
        assert back.noise == rec.noise

    def test_noisy_records(self, tmp_path):
        for noise in (NoiseModel.gaussian(0.0125), NoiseModel.born(999)):
            rec = sample_record(noise=noise)
            path = tmp_path / "n.mrec"
            formats.write_mrec(rec, path)
            back = formats.read_mrec(path)
            assert back.noise == noise
            assert np.array_equal(back.values, rec.values)

    def test_hybrid_record(self, tmp_path):
        rec = sample_record(scheme=sampling.draw_hybrid(4, 3, seed=5))
        path = tmp_path / "h.mrec"
        formats.write_mrec(rec, path)
        back = formats.read_mrec(path)
        assert back.scheme.kind == sampling.KIND_HYBRID
        assert np.array_equal(back.scheme.mask_set, rec.scheme.mask_set)

    def test_header_format(self):
        rec = sample_record()
        buf = io.StringIO()
        formats.write_mrec(rec, buf)
        head = buf.getvalue().splitlines()[0]
        assert head == f"MREC 1 n=4 m=40 scheme=uniform-without-replacement noise=exact"

    def test_file_object_round_trip(self):
        rec = sample_record()
        buf = io.StringIO()
        formats.write_mrec(rec, buf)
        buf.seek(0)
        back = formats.read_mrec(buf)
        assert np.array_equal(back.values, rec.values)


class TestMrecValidation:
    def write_lines(self, *lines):
        return io.StringIO("\n".join(lines) + "\n")

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            formats.read_mrec(self.write_lines("NOPE 1 n=1 m=0 scheme=hybrid noise=exact"))

    def test_row_count_mismatch(self):
        with pytest.raises(FormatError, match="promises"):
            formats.read_mrec(
                self.write_lines(
                    "MREC 1 n=1 m=2 scheme=uniform-with-replacement noise=exact",
                    "0 0 1.0 0.0",
                )
            )

    def test_mask_out_of_range(self):
        with pytest.raises(FormatError, match="out of range"):
            formats.read_mrec(
                self.write_lines(
                    "MREC 1 n=1 m=1 scheme=uniform-with-replacement noise=exact",
                    "4 0 0.5 0.0",
                )
            )

    def test_bad_noise_tag(self):
        with pytest.raises(FormatError):
            formats.read_mrec(
                self.write_lines(
                    "MREC 1 n=1 m=1 scheme=uniform-with-replacement noise=fuzzy",
                    "0 0 1.0 0.0",
                )
            )

    def test_duplicate_in_without_replacement(self):
        with pytest.raises(FormatError, match="duplicate"):
            formats.read_mrec(
                self.write_lines(
                    "MREC 1 n=1 m=2 scheme=uniform-without-replacement noise=exact",
                    "0 1 0.5 0.0",
                    "0 1 0.5 0.0",
                )
            )

    def test_incomplete_hybrid_rejected(self):
        with pytest.raises(FormatError, match="hybrid"):
            formats.read_mrec(
                self.write_lines(
                    "MREC 1 n=1 m=2 scheme=hybrid noise=exact",
                    "0 0 1.0 0.0",
                    "1 0 0.5 0.0",
                )
            )

    def test_non_numeric_value(self):
        with pytest.raises(FormatError):
            formats.read_mrec(
                self.write_lines(
                    "MREC 1 n=1 m=1 scheme=uniform-with-replacement noise=exact",
                    "0 0 one 0.0",
                )
            )


class TestDmat:
    def test_round_trip(self, tmp_path):
        rho = states.random_rank_r_state(8, 3, seed=4)
        path = tmp_path / "state.dmat"
        formats.write_dmat(rho, path)
        back = formats.read_dmat(path)
        assert back.dtype == np.complex128
        assert np.array_equal(back, rho)

    def test_layout(self, tmp_path):
        rho = np.array([[0.5, 0.5j], [-0.5j, 0.5]], dtype=complex)
        path = tmp_path / "q.dmat"
        formats.write_dmat(rho, path)
        blob = path.read_bytes()
        assert blob[:8] == b"DMAT0001"
        assert blob[8:16] == b"\x00" * 8
        assert int.from_bytes(blob[16:20], "little") == 2
        assert len(blob) == 20 + 16 * 4
        first = np.frombuffer(blob, dtype="<f8", count=2, offset=20)
        assert first[0] == 0.5 and first[1] == 0.0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.dmat"
        path.write_bytes(b"JUNKJUNKJUNKJUNK" + b"\x00" * 8)
        with pytest.raises(FormatError, match="magic"):
            formats.read_dmat(path)

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "y.dmat"
        path.write_bytes(formats.DMAT_MAGIC + (3).to_bytes(4, "little") + b"\x00" * 8)
        with pytest.raises(FormatError, match="size"):
            formats.read_dmat(path)

    def test_non_square_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            formats.write_dmat(np.zeros((2, 3)), tmp_path / "z.dmat")
