import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from ptychocert.cli import main
from ptychocert.core import load_field


def dir_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


GEN_ARGS = ["gen", "--n", "32", "--m", "8", "--raster-tau", "4",
            "--gamma", "1.0", "--seed", "1"]


@pytest.fixture()
def dataset(tmp_path):
    out = tmp_path / "ds"
    assert main(GEN_ARGS + ["--out", str(out)]) == 0
    return out


class TestGen:
    def test_layout_and_sizes(self, dataset):
        patterns = sorted((dataset / "patterns").glob("patt_*.f64"))
        assert len(patterns) == 64
        for p in patterns:
            assert p.stat().st_size == 225 * 8  # (2*8-1)^2 float64
        assert (dataset / "manifest.json").exists()
        assert (dataset / "scheme.json").exists()
        assert (dataset / "mask.cf64").exists()
        assert (dataset / "object.cf64").exists()
        manifest = json.loads((dataset / "manifest.json").read_text())
        assert manifest["gamma"] == 1.0
        assert manifest["mask_seed"] == 1
        assert manifest["tool_version"]

    def test_deterministic_rerun(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(GEN_ARGS + ["--out", str(a)]) == 0
        assert main(GEN_ARGS + ["--out", str(b)]) == 0
        assert dir_digest(a) == dir_digest(b)

    def test_dirichlet_out_of_range_is_usage_error(self, tmp_path):
        scheme = {"n": 8, "m": 4, "boundary": "dirichlet-zero",
                  "shifts": [[0, 0], [6, 0]]}
        sf = tmp_path / "scheme.json"
        sf.write_text(json.dumps(scheme))
        code = main(["gen", "--scheme", str(sf), "--seed", "1",
                     "--out", str(tmp_path / "out")])
        assert code == 2

    def test_missing_object_file_is_io_error(self, tmp_path):
        code = main(GEN_ARGS + ["--object", str(tmp_path / "nope.cf64"),
                                "--out", str(tmp_path / "out")])
        assert code == 3


class TestCheckScheme:
    def test_raster_tau1_certified(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["check-scheme", "--n", "8", "--m", "3", "--raster-tau", "1",
                     "--require-mixing", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["mixing"]["certified"]
        assert report["connectivity"]["strong"]
        assert report["report_version"] == 1

    def test_raster_tau2_refused(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["check-scheme", "--n", "8", "--m", "4", "--raster-tau", "2",
                     "--require-mixing", "--out", str(out)])
        assert code == 1
        report = json.loads(out.read_text())
        assert report["mixing"]["refusal_reason"] == "common-factor"
        assert report["mixing"]["refusal_detail"]["lattice_index"] == 4

    def test_perturbed_raster_certified(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["check-scheme", "--n", "32", "--m", "9", "--raster-tau", "4",
                     "--delta1", "0,0,0,1,1,1,1,1", "--delta2", "0,0,0,1,1,1,1,1",
                     "--require-mixing", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["mixing"]["certified"]
        assert report["anchors"]  # full support: every block anchors
        # report echoes the perturbation-condition margins and the gcd witness
        cond = report["perturbation_conditions"]
        assert cond["satisfied"]
        assert cond["axis1"]["gcd"] == 1
        assert min(cond["axis2"]["overlap_margins"]) >= 0


class TestAmbiguity:
    def test_affine_data_equal(self, dataset, tmp_path):
        out = tmp_path / "affine"
        w = 2 * np.pi / 32
        code = main(["ambiguity", "--dataset", str(dataset), "--kind", "affine",
                     "--a", "0.2", "--b", "0.4", "--w", f"{w},0",
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["data_equal"]
        assert report["classification"] == "affine"
        assert (out / "object.cf64").exists()
        assert (out / "mask.cf64").exists()

    def test_scaling_rejects_negative_c(self, dataset, tmp_path):
        code = main(["ambiguity", "--dataset", str(dataset), "--kind", "scaling",
                     "--c", "-1", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_block_phase_report(self, dataset, tmp_path):
        theta = ",".join(["0.5"] * 64)
        out = tmp_path / "bp"
        code = main(["ambiguity", "--dataset", str(dataset), "--kind", "block-phase",
                     "--theta", theta, "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["max_pattern_change"] < 1e-12

    def test_ex0_reports_mpc_failure(self, tmp_path):
        ds = tmp_path / "ds0"
        scheme = {"n": 16, "m": 16, "boundary": "torus", "shifts": [[0, 0], [8, 0]]}
        sf = tmp_path / "scheme.json"
        sf.write_text(json.dumps(scheme))
        assert main(["gen", "--scheme", str(sf), "--gamma", "1.0", "--seed", "3",
                     "--out", str(ds)]) == 0
        out = tmp_path / "ex0"
        code = main(["ambiguity", "--dataset", str(ds), "--kind", "ex0",
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["data_equal"]
        assert not report["mpc"]["pass"]

    def test_ex31_reports_osc_rejection(self, tmp_path):
        from ptychocert.core import ComplexField, save_field

        ds = tmp_path / "ds31"
        scheme = {"n": 12, "m": 8, "boundary": "dirichlet-zero",
                  "shifts": [[0, 0], [4, 0]]}
        sf = tmp_path / "scheme.json"
        sf.write_text(json.dumps(scheme))
        rng = np.random.default_rng(4)
        data = np.zeros((12, 12), dtype=complex)
        data[4:8, :8] = 0.5 + rng.random((4, 8))
        save_field(tmp_path / "obj.cf64", ComplexField(data), kind="object")
        assert main(["gen", "--scheme", str(sf), "--seed", "5",
                     "--object", str(tmp_path / "obj.cf64"), "--out", str(ds)]) == 0
        out = tmp_path / "ex31"
        code = main(["ambiguity", "--dataset", str(ds), "--kind", "ex31",
                     "--t0-tighten", "1", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["data_equal"]
        assert not report["osc"]["pass"]


class TestAnalyze:
    def test_affine_candidate(self, dataset, tmp_path):
        w = 2 * np.pi * 2 / 32
        cand = tmp_path / "cand"
        assert main(["ambiguity", "--dataset", str(dataset), "--kind", "affine",
                     "--a", "0.0", "--b", "1.0", "--w", f"{w},{w}",
                     "--out", str(cand)]) == 0
        out = tmp_path / "analysis.json"
        code = main(["analyze", "--truth", str(dataset), "--candidate", str(cand),
                     "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["classification"] == "affine"
        assert report["data_equal"]
        # recovered r matches the injected frequency up to raster aliasing of
        # the block-phase fit; compare on the unit circle
        got = np.array(report["r"])
        assert report["aligned_error"] < 1e-8

    def test_truth_candidate(self, dataset, tmp_path):
        cand = tmp_path / "cand"
        cand.mkdir()
        for name in ("object.cf64", "mask.cf64"):
            (cand / name).write_bytes((dataset / name).read_bytes())
            (cand / (name + ".json")).write_text((dataset / (name + ".json")).read_text())
        out = tmp_path / "analysis.json"
        assert main(["analyze", "--truth", str(dataset), "--candidate", str(cand),
                     "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["aligned_error"] < 1e-12
        assert report["data_equal"]
        assert report["mpc"]["pass"]

    def test_twin_candidate_flags_mpc(self, tmp_path):
        # ex0 candidate: data equal, classified other, MPC failure noted
        ds = tmp_path / "ds"
        scheme = {"n": 16, "m": 16, "boundary": "torus", "shifts": [[0, 0], [8, 0]]}
        sf = tmp_path / "scheme.json"
        sf.write_text(json.dumps(scheme))
        assert main(["gen", "--scheme", str(sf), "--gamma", "1.0", "--seed", "8",
                     "--out", str(ds)]) == 0
        cand = tmp_path / "cand"
        assert main(["ambiguity", "--dataset", str(ds), "--kind", "ex0",
                     "--out", str(cand)]) == 0
        out = tmp_path / "analysis.json"
        assert main(["analyze", "--truth", str(ds), "--candidate", str(cand),
                     "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["data_equal"]
        assert report["classification"] == "other"
        assert not report["mpc"]["pass"]


class TestMpcOsc:
    def test_mpc_subcommand(self, dataset, tmp_path):
        mask = dataset / "mask.cf64"
        out = tmp_path / "mpc.json"
        code = main(["mpc", "--mask", str(mask), "--estimate", str(mask),
                     "--gamma", "1.0", "--delta", "0.4", "--require-pass",
                     "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["pass"]

    def test_mpc_failure_exit_code(self, dataset, tmp_path):
        from ptychocert.core import ComplexField, load_field, save_field, twin

        mask = load_field(dataset / "mask.cf64")
        est = tmp_path / "twin.cf64"
        save_field(est, twin(mask), kind="mask-estimate")
        code = main(["mpc", "--mask", str(dataset / "mask.cf64"),
                     "--estimate", str(est), "--gamma", "1.0", "--delta", "0.4",
                     "--require-pass"])
        assert code == 1

    def test_osc_subcommand(self, tmp_path):
        from ptychocert.core import ComplexField, save_field

        data = np.zeros((4, 4), dtype=complex)
        data[0:2, 0:2] = 1.0
        g0 = tmp_path / "g0.cf64"
        save_field(g0, ComplexField(data), kind="object-part")
        # fbox equal to the g0 box: triggers (0,0) via supp and (-2,-2) via twin
        code = main(["osc", "--g0", str(g0), "--fbox", "0,1,0,1",
                     "--t0", "0,0;-2,-2", "--require-pass",
                     "--out", str(tmp_path / "osc.json")])
        assert code == 0
        code = main(["osc", "--g0", str(g0), "--fbox", "0,1,0,1",
                     "--t0", "0,0", "--require-pass"])
        assert code == 1


def test_version_and_usage():
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    with pytest.raises(SystemExit) as err:
        main(["not-a-command"])
    assert err.value.code == 2
