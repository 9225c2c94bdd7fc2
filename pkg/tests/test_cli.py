import filecmp
import json
import subprocess
import sys

import pytest

from hazardscope.cli import main
from hazardscope.config import PipelineConfig, check_reaction_strategy
from hazardscope.errors import ValidationError
from hazardscope.ingest import parse_annotations, parse_ground_truth


def _tree(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def _variant(synth_dir, tmp_path, **changes):
    """Copy of the synthetic config with selected top-level sections replaced; paths stay absolute."""
    doc = json.loads((synth_dir / "config.json").read_text())
    doc["paths"] = {k: str(synth_dir / v) for k, v in doc["paths"].items()}
    for key, value in changes.items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


@pytest.fixture(scope="session")
def run_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", "--config", str(synth_dir / "config.json"), "--out", str(out)]) == 0
    return out


class TestSynth:
    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--out", str(a), "--seed", "42", "--n-videos", "2", "--n-frames", "24"]) == 0
        assert main(["synth", "--out", str(b), "--seed", "42", "--n-videos", "2", "--n-frames", "24"]) == 0
        assert _tree(a) == _tree(b)
        _, mismatch, errors = filecmp.cmpfiles(a, b, [str(p) for p in _tree(a)], shallow=False)
        assert mismatch == [] and errors == []

    def test_seed_changes_output(self, tmp_path):
        main(["synth", "--out", str(tmp_path / "a"), "--seed", "1", "--n-videos", "1", "--n-frames", "20"])
        main(["synth", "--out", str(tmp_path / "b"), "--seed", "2", "--n-videos", "1", "--n-frames", "20"])
        assert (tmp_path / "a/ground_truth.json").read_bytes() != (tmp_path / "b/ground_truth.json").read_bytes()

    def test_planted_truth(self, synth_dir):
        videos = parse_annotations(synth_dir / "annotations.json")
        gts = parse_ground_truth(synth_dir / "ground_truth.json", videos)
        first = gts["video_000"]
        assert first.n_frames == 60 and first.reaction.index(True) == 30
        for gt in gts.values():
            step = gt.reaction.index(True)
            assert all(gt.reaction[step:]) and not any(gt.reaction[:step])

    def test_flow_series_steps_at_plant(self, synth_dir, tmp_path):
        cfg = PipelineConfig.load(synth_dir / "config.json")
        from hazardscope.pipeline import compute_signal, load_videos
        v = load_videos(cfg, "video_000")[0]
        s = compute_signal("optical_flow", v, cfg).values
        assert s[1:30].max() < 0.1
        assert abs(s[32:].mean() - 2.0) < 0.3


class TestRun:
    def test_outputs(self, run_dir):
        lines = (run_dir / "submission.csv").read_text().splitlines()
        assert len(lines) == 1 + 180
        assert len(lines[0].split(",")) == 2 + 2 * 22
        rep = json.loads((run_dir / "report.json").read_text())
        assert set(rep["videos"]) == {"video_000", "video_001", "video_002"}
        assert rep["overall"]["a_detection"] == 1.0

    def test_rerun_byte_identical_and_parallel(self, synth_dir, run_dir, tmp_path):
        assert main(["run", "--config", str(synth_dir / "config.json"), "--out", str(tmp_path), "--jobs", "3"]) == 0
        for name in ("submission.csv", "report.json", "report.csv"):
            assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes()

    def test_eval_matches_run(self, synth_dir, run_dir, tmp_path, capsys):
        rc = main(["eval", "--submission", str(run_dir / "submission.csv"),
                   "--ground-truth", str(synth_dir / "ground_truth.json"), "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "report.json").read_bytes() == (run_dir / "report.json").read_bytes()
        assert "A_macro=" in capsys.readouterr().out

    def test_no_ground_truth(self, synth_dir, tmp_path):
        doc = json.loads((synth_dir / "config.json").read_text())
        paths = {k: str(synth_dir / v) for k, v in doc["paths"].items() if k != "ground_truth"}
        cfg = _variant(synth_dir, tmp_path, paths=paths, reaction={"strategy": "object_size"})
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--videos", "video_001"]) == 0
        assert (tmp_path / "o/submission.csv").exists() and not (tmp_path / "o/report.json").exists()

    def test_module_entry_point(self, synth_dir, tmp_path):
        out = subprocess.run([sys.executable, "-m", "hazardscope", "react", "--config",
                              str(synth_dir / "config.json"), "--out", str(tmp_path), "--strategy", "baseline",
                              "--videos", "video_000"], capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert "video_000\treaction_frame=" in out.stdout
        assert (tmp_path / "video_000.reaction.csv").exists()


class TestSubcommands:
    def test_signals_object_size(self, synth_dir, tmp_path):
        args = ["signals", "--config", str(synth_dir / "config.json"), "--kinds", "object_size",
                "--videos", "video_00[01]", "--no-plots"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files == ["video_000.object_size.csv", "video_001.object_size.csv"]
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_signals_flow_and_plots(self, synth_dir, tmp_path):
        assert main(["signals", "--config", str(synth_dir / "config.json"), "--kinds", "optical_flow,object_size",
                     "--videos", "video_002", "--out", str(tmp_path)]) == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert {"video_002.optical_flow.csv", "video_002.optical_flow_polar.csv",
                "video_002.optical_flow.svg", "video_002.object_size.svg"} <= names
        assert (tmp_path / "video_002.object_size.svg").read_text().startswith("<svg")

    def test_flow_without_frames(self, synth_dir, tmp_path, capsys):
        doc = json.loads((synth_dir / "config.json").read_text())
        paths = {k: str(synth_dir / v) for k, v in doc["paths"].items()}
        paths["frames"] = str(tmp_path / "nowhere")
        cfg = _variant(synth_dir, tmp_path, paths=paths)
        rc = main(["signals", "--config", str(cfg), "--kinds", "optical_flow", "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "video_000" in capsys.readouterr().err

    def test_hazards_and_captions(self, synth_dir, tmp_path, capsys):
        assert main(["hazards", "--config", str(synth_dir / "config.json"), "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "hazards.json").read_text())
        tracks = {h["track_id"] for f in doc["video_001"] for h in f}
        assert tracks == {"video_001_haz0", "video_001_haz1"}
        assert main(["caption", "--config", str(synth_dir / "config.json"), "--out", str(tmp_path)]) == 0
        caps = json.loads((tmp_path / "captions.json").read_text())
        assert set(caps["video_001"]) == tracks
        assert all(len(c.split()) == 5 for c in caps["video_001"].values())


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert main(["run", "--out", str(tmp_path)]) == 2

    def test_bad_strategy(self, synth_dir, tmp_path):
        assert main(["react", "--config", str(synth_dir / "config.json"), "--out", str(tmp_path),
                     "--strategy", "ensemble(xor)"]) == 2

    def test_malformed_config(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{oops")
        assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2

    def test_malformed_submission(self, synth_dir, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("nope\n")
        assert main(["eval", "--submission", str(p), "--ground-truth", str(synth_dir / "ground_truth.json")]) == 2

    def test_classifier_unreachable(self, synth_dir, tmp_path, capsys):
        doc = json.loads((synth_dir / "config.json").read_text())
        paths = {k: str(synth_dir / v) for k, v in doc["paths"].items() if k != "predictions"}
        hazards = dict(doc["hazards"], classifier_url="http://127.0.0.1:9")
        cfg = _variant(synth_dir, tmp_path, paths=paths, hazards=hazards)
        assert main(["hazards", "--config", str(cfg), "--out", str(tmp_path), "--videos", "video_000"]) == 3
        assert "hazards" in capsys.readouterr().err

    def test_http_captioner_without_url(self, synth_dir, tmp_path, monkeypatch):
        monkeypatch.delenv("HAZARDSCOPE_CAPTIONER_URL", raising=False)
        cfg = _variant(synth_dir, tmp_path, captions={"backend": "http"})
        assert main(["caption", "--config", str(cfg), "--out", str(tmp_path)]) == 3


class TestConfig:
    def test_strategies(self):
        for s in ("object_size", "optical_flow", "baseline", "ensemble(or)", "ensemble(and)", "ensemble(mean)"):
            assert check_reaction_strategy(s) == s
        with pytest.raises(ValidationError):
            check_reaction_strategy("ensemble()")

    def test_relative_paths(self, synth_dir):
        cfg = PipelineConfig.load(synth_dir / "config.json")
        assert cfg.paths.annotations == synth_dir / "annotations.json"
        assert cfg.hazards.filters == ("whitelist", "size") and cfg.cpd.mode == "penalized"

    @pytest.mark.parametrize("doc", [{"captions": {"backend": "carrier pigeon"}}, {"jobs": 0},
                                     {"flow": {"prescale": 0}}, {"reaction": {"strategy": "vibes"}}])
    def test_invalid(self, doc):
        with pytest.raises(ValidationError):
            PipelineConfig.from_dict(doc)
