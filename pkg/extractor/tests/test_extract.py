import json
import struct

import numpy as np
import pytest
from PIL import Image

from edmextract import EncoderError, ExtractorConfig, extract_dataset, load_encoder, selfcheck
from edmextract.cli import main
from edmextract.format import FLAG_FRAME_NORMALIZED, HEADER, read_header


@pytest.fixture()
def toy_frames(tmp_path):
    """Three episodes: 5 frames, 1 frame (degenerate), 4 frames; two tasks."""
    rng = np.random.default_rng(7)
    layout = {"t0_reach": 5, "t0_push": 1, "t1_stack": 4}
    root = tmp_path / "frames"
    for name, count in layout.items():
        d = root / name
        d.mkdir(parents=True)
        for i in range(count):
            img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
            Image.fromarray(img).save(d / f"step_{i:03d}.png")
    return root


def extract(tmp_path, toy_frames, **cfg_kwargs):
    cfg = ExtractorConfig(encoder_name="patch", **cfg_kwargs)
    return extract_dataset(
        toy_frames,
        out_manifest=tmp_path / "toy.json",
        out_features=tmp_path / "toy.edmf",
        cfg=cfg,
    )


class TestExtraction:
    def test_header_and_shape(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        magic, version, n, d, flags, payload = read_header(summary.feature_path)
        assert magic == b"EDMF" and version == 1
        assert n == 3
        assert d == 3 * summary.dim
        assert flags & FLAG_FRAME_NORMALIZED
        assert len(payload) == n * d * 4

    def test_segment_norms_unit(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        _, _, n, d, _, payload = read_header(summary.feature_path)
        rows = np.frombuffer(payload, dtype="<f4").reshape(n, d)
        segments = rows.reshape(n, 3, d // 3)
        norms = np.linalg.norm(segments.astype(np.float64), axis=2)
        np.testing.assert_allclose(norms, 1.0, atol=1e-3)

    def test_single_frame_episode_repeats_embedding(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        manifest = json.loads(summary.manifest_path.read_text())
        idx = next(i for i, ep in enumerate(manifest["episodes"]) if ep["length"] == 1)
        _, _, n, d, _, payload = read_header(summary.feature_path)
        rows = np.frombuffer(payload, dtype="<f4").reshape(n, d)
        seg = rows[idx].reshape(3, d // 3)
        np.testing.assert_array_equal(seg[0], seg[1])
        np.testing.assert_array_equal(seg[1], seg[2])
        assert np.linalg.norm(rows[idx]) == pytest.approx(np.sqrt(3), abs=1e-3)

    def test_manifest_contents(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        doc = json.loads(summary.manifest_path.read_text())
        assert doc["task_count"] == 2
        assert [ep["task_id"] for ep in doc["episodes"]] == [0, 0, 1]
        assert [ep["length"] for ep in doc["episodes"]] == [1, 5, 4]
        for ep in doc["episodes"]:
            assert len(ep["frame_refs"]) == ep["length"]

    def test_consumed_by_metrics_loader(self, tmp_path, toy_frames):
        from edmetrics import (
            KernelConfig, dataset_lowlevel_summary, diversity_entropy, load_dataset,
        )

        summary = extract(tmp_path, toy_frames)
        manifest, X = load_dataset(summary.manifest_path)
        assert X.rows == 3 and X.dim == 3 * summary.dim
        assert X.frame_normalized
        result = diversity_entropy(X, KernelConfig(0.1))
        assert np.isfinite(result.value)
        # frame references resolve against the manifest's directory
        spreads = dataset_lowlevel_summary(manifest, seed=0,
                                           root=summary.manifest_path.parent)
        assert spreads.shape == (5,) and np.isfinite(spreads).all()

    def test_deterministic(self, tmp_path, toy_frames):
        a = extract(tmp_path, toy_frames)
        first = a.feature_path.read_bytes()
        b = extract(tmp_path, toy_frames)
        assert b.feature_path.read_bytes() == first

    def test_batch_size_one_same_result(self, tmp_path, toy_frames):
        a = extract(tmp_path, toy_frames, batch_size=1)
        one = a.feature_path.read_bytes()
        b = extract(tmp_path, toy_frames, batch_size=32)
        assert b.feature_path.read_bytes() == one

    def test_empty_episode_dir_rejected(self, tmp_path, toy_frames):
        (toy_frames / "t0_empty").mkdir()
        with pytest.raises(EncoderError, match="empty episode"):
            extract(tmp_path, toy_frames)

    def test_unreadable_frame_rejected(self, tmp_path, toy_frames):
        (toy_frames / "t0_reach" / "step_000.png").write_bytes(b"garbage")
        with pytest.raises(EncoderError, match="unreadable frame"):
            extract(tmp_path, toy_frames)

    def test_unknown_encoder_rejected(self, tmp_path, toy_frames):
        with pytest.raises(EncoderError, match="unknown encoder"):
            extract_dataset(toy_frames, tmp_path / "m.json", tmp_path / "f.edmf",
                            ExtractorConfig(encoder_name="bogus"))


class TestSelfcheck:
    def test_clean_output_passes(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        assert selfcheck(summary.feature_path).passed

    def test_unnormalized_rows_with_flag_fail_segment_norm(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        blob = bytearray(summary.feature_path.read_bytes())
        # scale one float to break a segment norm while keeping the flag set
        offset = HEADER.size
        (value,) = struct.unpack_from("<f", blob, offset)
        struct.pack_into("<f", blob, offset, value + 1.0)
        bad = tmp_path / "bad_norm.edmf"
        bad.write_bytes(bytes(blob))
        result = selfcheck(bad)
        assert not result.passed
        assert any("segment norm" in f for f in result.failures)

    def test_truncated_file_fails_payload_length(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        blob = summary.feature_path.read_bytes()
        bad = tmp_path / "truncated.edmf"
        bad.write_bytes(blob[:-12])
        result = selfcheck(bad)
        assert not result.passed
        assert any("payload length" in f for f in result.failures)

    def test_bad_magic_fails(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        blob = bytearray(summary.feature_path.read_bytes())
        blob[:4] = b"JUNK"
        bad = tmp_path / "magic.edmf"
        bad.write_bytes(bytes(blob))
        result = selfcheck(bad)
        assert not result.passed
        assert any("magic" in f for f in result.failures)

    def test_nan_fails_finiteness(self, tmp_path, toy_frames):
        summary = extract(tmp_path, toy_frames)
        blob = bytearray(summary.feature_path.read_bytes())
        struct.pack_into("<f", blob, HEADER.size + 8, float("nan"))
        bad = tmp_path / "nan.edmf"
        bad.write_bytes(bytes(blob))
        result = selfcheck(bad)
        assert not result.passed
        assert any("finite" in f for f in result.failures)


class TestCli:
    def test_extract_and_selfcheck_round_trip(self, tmp_path, toy_frames, capsys):
        prefix = tmp_path / "out"
        code = main(["extract", "--frames", str(toy_frames), "--out-prefix",
                     str(prefix), "--encoder", "patch", "--batch", "2"])
        assert code == 0
        out = capsys.readouterr().out
        assert "3 episodes" in out
        assert (tmp_path / "out.json").exists() and (tmp_path / "out.edmf").exists()
        assert main(["selfcheck", str(tmp_path / "out.edmf")]) == 0

    def test_selfcheck_failure_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "junk.edmf"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNKJUNKJUNK")
        assert main(["selfcheck", str(bad)]) == 1
        assert "FAIL" in capsys.readouterr().err

    def test_missing_frames_dir_exits_one(self, tmp_path, capsys):
        code = main(["extract", "--frames", str(tmp_path / "absent"),
                     "--out-prefix", str(tmp_path / "x")])
        assert code == 1


class TestPatchEncoder:
    def test_dim_and_determinism(self):
        enc = load_encoder("patch")
        rng = np.random.default_rng(0)
        imgs = [rng.integers(0, 256, (12, 12, 3), dtype=np.uint8) for _ in range(3)]
        a = enc.encode_batch(imgs)
        b = load_encoder("patch").encode_batch(imgs)
        assert a.shape == (3, enc.dim)
        np.testing.assert_array_equal(a, b)

    def test_black_image_falls_back_to_unit_vector(self):
        enc = load_encoder("patch")
        out = enc.encode_batch([np.zeros((8, 8, 3), dtype=np.uint8)])
        assert np.linalg.norm(out[0]) == pytest.approx(1.0, abs=1e-6)
