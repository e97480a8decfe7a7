import numpy as np
import pytest

from poretrainer.records import Record, RecordError, read_manifest, read_record, write_record


def sample_record(size=24, seed=0):
    rng = np.random.default_rng(seed)
    return Record(
        solid=rng.uniform(size=(size, size)) < 0.2,
        ux=rng.normal(scale=1e-3, size=(size, size)),
        uy=rng.normal(scale=1e-3, size=(size, size)),
        tau=1.0, g_x=1e-6, g_y=0.0, tol=1e-8,
    )


class TestRoundTrip:
    def test_write_read_write_is_byte_identical(self, tmp_path):
        rec = sample_record()
        a = tmp_path / "a.pfl"
        b = tmp_path / "b.pfl"
        write_record(a, rec)
        write_record(b, read_record(a))
        assert a.read_bytes() == b.read_bytes()

    def test_fields_survive_f32_quantization(self, tmp_path):
        rec = sample_record()
        path = tmp_path / "r.pfl"
        write_record(path, rec)
        back = read_record(path)
        assert np.array_equal(back.solid, rec.solid)
        assert np.array_equal(back.ux, rec.ux.astype(np.float32).astype(np.float64))
        assert back.tau == rec.tau and back.tol == rec.tol

    def test_non_finite_rejected(self, tmp_path):
        rec = sample_record()
        rec.ux[0, 0] = np.nan
        with pytest.raises(RecordError):
            write_record(tmp_path / "bad.pfl", rec)

    def test_corruption_detected(self, tmp_path):
        rec = sample_record()
        path = tmp_path / "r.pfl"
        write_record(path, rec)
        raw = bytearray(path.read_bytes())
        raw[100] ^= 0x10
        path.write_bytes(bytes(raw))
        with pytest.raises(RecordError, match="checksum"):
            read_record(path)


class TestInterop:
    def test_reads_solver_generated_records(self, dataset_dir):
        rows = read_manifest(dataset_dir / "manifest.csv")
        assert len(rows) == 200
        rec = read_record(dataset_dir / rows[0]["file"])
        assert rec.size == 64
        assert rec.tau == 1.0
        assert 0.85 - 1e-3 <= rec.porosity <= 0.95 + 1e-3
        assert np.all(np.isfinite(rec.ux))
        # stored solution flows along +x on pore pixels
        assert rec.ux[~rec.solid].mean() > 0
        # solids carry exactly zero velocity
        assert np.all(rec.ux[rec.solid] == 0.0)
