"""Command-line behavior: outputs, determinism, exit codes, error messages."""
import math

import numpy as np
import pytest

from photonsub import (
    DetectorModel,
    build_subtracted_state,
    ideal_joint_pnd,
    synthetic_counts,
)
from photonsub.cli import main
from photonsub.io import (
    parse_report,
    read_columns_csv,
    read_matrix_csv,
    write_matrix_csv,
)

PREDICT_FILES = ["predict_joint.csv", "predict_marginals.csv", "predict_report.txt"]


def run(*argv):
    return main([str(a) for a in argv])


def read_bytes(d, names):
    return {n: (d / n).read_bytes() for n in names}


class TestPredict:

    def test_writes_expected_files(self, tmp_path):
        assert run("predict", "--z", 0.5, "--l1", 1, "--eta", 0.8,
                   "--out-dir", tmp_path) == 0
        for name in PREDICT_FILES:
            assert (tmp_path / name).exists()

    def test_deterministic_across_runs(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            assert run("predict", "--z", 0.66, "--l1", 2, "--eta", 0.1625,
                       "--nu", 0.001, "--out-dir", d) == 0
        assert read_bytes(d1, PREDICT_FILES) == read_bytes(d2, PREDICT_FILES)

    def test_deep_subtraction_trips_witnesses(self, tmp_path):
        assert run("predict", "--z", 0.66, "--l1", 3, "--eta", 0.1625,
                   "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "predict_report.txt").read_text())
        w = rep["witness"]
        assert w["agarwal"] < 0 and w["cs_violated"] is True
        assert w["moment_det"] < 0 and w["det_negative"] is True
        assert w["lambda_min"] < 0 and w["eig_negative"] is True

    def test_joint_csv_matches_report_summary(self, tmp_path):
        assert run("predict", "--z", 0.4, "--l1", 1, "--eta", 0.7,
                   "--nu", 0.01, "--out-dir", tmp_path) == 0
        m = read_matrix_csv(tmp_path / "predict_joint.csv")
        rep = parse_report((tmp_path / "predict_report.txt").read_text())
        assert rep["joint"]["p00"] == m[0, 0]
        assert rep["joint"]["n_max"] == m.shape[0] - 1
        labels, cols = read_columns_csv(tmp_path / "predict_marginals.csv")
        assert labels == ["signal", "idler"]
        np.testing.assert_array_equal(cols[0], m.sum(axis=1))
        np.testing.assert_array_equal(cols[1], m.sum(axis=0))

    @pytest.mark.parametrize("l", [0, 1, 2, 3])
    def test_ideal_detector_reproduces_ideal_law(self, tmp_path, l):
        st = build_subtracted_state(0.7, l)
        ana = ideal_joint_pnd(st)
        assert run("predict", "--z", 0.7, "--l1", l, "--eta", 1.0,
                   "--nmax", ana.n_max, "--out-dir", tmp_path) == 0
        m = read_matrix_csv(tmp_path / "predict_joint.csv")
        np.testing.assert_array_equal(m, ana.probs)  # repr round trip

    def test_zero_squeezing_is_pure_vacuum(self, tmp_path):
        assert run("predict", "--z", 0, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "predict_report.txt").read_text())
        assert rep["joint"]["p00"] == 1.0
        assert rep["witness"]["agarwal"] == "undefined"
        assert rep["witness"]["cs_violated"] is False

    def test_pump_flag_matches_explicit_z(self, tmp_path):
        c = 299792458.0
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert run("predict", "--pump", f"{2 * c},1,1,1,1", "--l1", 1,
                   "--eta", 0.8, "--out-dir", d1) == 0
        assert run("predict", "--z", math.tanh(1.0), "--l1", 1,
                   "--eta", 0.8, "--out-dir", d2) == 0
        a = read_matrix_csv(d1 / "predict_joint.csv")
        b = read_matrix_csv(d2 / "predict_joint.csv")
        np.testing.assert_array_equal(a, b)

    def test_emit_plots(self, tmp_path):
        assert run("predict", "--z", 0.5, "--l1", 1, "--emit-plots",
                   "--out-dir", tmp_path) == 0
        for stem in ("predict_joint", "predict_marginals"):
            assert (tmp_path / f"{stem}.dat").exists()
            assert (tmp_path / f"{stem}.gp").exists()

    def test_rejects_z_and_pump_together(self, tmp_path, capsys):
        assert run("predict", "--z", 0.5, "--pump", "1,1,1,1,1",
                   "--out-dir", tmp_path) == 2
        assert "error:" in capsys.readouterr().err

    def test_rejects_neither_z_nor_pump(self, tmp_path):
        assert run("predict", "--out-dir", tmp_path) == 2

    def test_rejects_out_of_range_z(self, tmp_path, capsys):
        assert run("predict", "--z", 1.0, "--out-dir", tmp_path) == 2
        assert "squeezing amplitude" in capsys.readouterr().err

    def test_rejects_bad_pump_string(self, tmp_path):
        assert run("predict", "--pump", "1,2,3", "--out-dir", tmp_path) == 2
        assert run("predict", "--pump", "1,2,x,4,5", "--out-dir", tmp_path) == 2


class TestMc:

    MC_FILES = ["mc_counts.csv", "mc_report.txt"]

    def test_deterministic_and_worker_independent(self, tmp_path):
        dirs = [tmp_path / n for n in ("a", "b", "c")]
        for d, workers in zip(dirs, (1, 1, 3)):
            assert run("mc", "--z", 0.5, "--l1", 1, "--tap-t", 0.9,
                       "--eta", 0.8, "--nu", 0.01, "--shots", 400_000,
                       "--workers", workers, "--out-dir", d) == 0
        ref = read_bytes(dirs[0], self.MC_FILES)
        assert read_bytes(dirs[1], self.MC_FILES) == ref
        assert read_bytes(dirs[2], self.MC_FILES) == ref

    def test_report_carries_comparison(self, tmp_path):
        assert run("mc", "--z", 0.5, "--l1", 1, "--tap-t", 0.999,
                   "--eta", 0.9, "--shots", 2 * 10 ** 9, "--out-dir",
                   tmp_path) == 0
        rep = parse_report((tmp_path / "mc_report.txt").read_text())
        assert rep["run"]["empty"] is False
        assert rep["run"]["accepted"] > 0
        assert rep["comparison"]["folded_eta"] == 0.999 * 0.9
        assert 0.0 <= rep["comparison"]["tv_distance"] < 0.1
        counts = read_matrix_csv(tmp_path / "mc_counts.csv", dtype=int)
        assert counts.sum() == rep["run"]["accepted"]

    def test_zero_acceptance_still_succeeds(self, tmp_path):
        assert run("mc", "--z", 0.5, "--l1", 2, "--tap-t", 0.999,
                   "--shots", 1000, "--nmax", 4, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "mc_report.txt").read_text())
        assert rep["run"]["empty"] is True
        assert rep["run"]["accepted"] == 0
        assert "comparison" not in rep
        counts = read_matrix_csv(tmp_path / "mc_counts.csv", dtype=int)
        assert counts.sum() == 0

    def test_asymmetric_subtraction(self, tmp_path):
        assert run("mc", "--z", 0.5, "--l1", 1, "--l2", 0, "--tap-t", 0.9,
                   "--shots", 100_000, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "mc_report.txt").read_text())
        assert rep["inputs"]["l1"] == 1
        assert rep["inputs"]["l2"] == 0

    def test_seed_changes_counts(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d, seed in ((d1, 1), (d2, 2)):
            assert run("mc", "--z", 0.5, "--l1", 1, "--tap-t", 0.9,
                       "--shots", 200_000, "--seed", seed, "--out-dir", d) == 0
        assert (d1 / "mc_counts.csv").read_bytes() != (d2 / "mc_counts.csv").read_bytes()

    def test_rejects_bad_tap(self, tmp_path):
        assert run("mc", "--z", 0.5, "--tap-t", 0.0, "--out-dir", tmp_path) == 2
        assert run("mc", "--z", 0.5, "--tap-t", 1.5, "--out-dir", tmp_path) == 2


class TestFit:

    def make_counts_file(self, path, **kw):
        counts = synthetic_counts(**kw)
        write_matrix_csv(path, counts)
        return counts

    def test_round_trip_through_files(self, tmp_path):
        f = tmp_path / "counts.csv"
        self.make_counts_file(f, z=0.5, eta=0.6, nu=0.05, l_signal=1,
                              shots=30_000, seed=3)
        assert run("fit", "--in", f, "--l1", 1, "--bootstrap", 12,
                   "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "fit_report.txt").read_text())
        assert abs(rep["fit"]["z_hat"] - 0.5) < 0.05
        assert abs(rep["fit"]["eta_hat"] - 0.6) < 0.05
        assert abs(rep["fit"]["nu_hat"] - 0.05) < 0.02
        assert rep["fit"]["converged"] is True
        assert rep["errors"]["z_err"] > 0
        assert rep["errors"]["resamples"] == 12

    def test_fit_on_mc_output(self, tmp_path):
        # near-transparent tap: protocol counts follow the analytic model
        assert run("mc", "--z", 0.5, "--l1", 1, "--tap-t", 0.999,
                   "--eta", 0.9, "--nu", 0.01, "--shots", 40 * 10 ** 9,
                   "--out-dir", tmp_path) == 0
        assert run("fit", "--in", tmp_path / "mc_counts.csv", "--l1", 1,
                   "--bootstrap", 12, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "fit_report.txt").read_text())
        assert abs(rep["fit"]["z_hat"] - 0.5) < 0.05
        assert abs(rep["fit"]["eta_hat"] - 0.9 * 0.999) < 0.05

    def test_deterministic(self, tmp_path):
        f = tmp_path / "counts.csv"
        self.make_counts_file(f, z=0.4, eta=0.7, nu=0.01, l_signal=1,
                              shots=10_000, seed=5)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            assert run("fit", "--in", f, "--l1", 1, "--bootstrap", 10,
                       "--out-dir", d) == 0
        assert (d1 / "fit_report.txt").read_bytes() == (d2 / "fit_report.txt").read_bytes()

    def test_single_cell_counts_flagged_degenerate(self, tmp_path):
        f = tmp_path / "counts.csv"
        write_matrix_csv(f, np.array([[0, 0], [0, 250]]))
        assert run("fit", "--in", f, "--bootstrap", 10, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "fit_report.txt").read_text())
        assert rep["fit"]["degenerate"] is True

    def test_nu_pin_flag_reported(self, tmp_path):
        f = tmp_path / "counts.csv"
        self.make_counts_file(f, z=0.5, eta=0.9, nu=0.0, l_signal=0,
                              shots=20_000, seed=1)
        assert run("fit", "--in", f, "--bootstrap", 10, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "fit_report.txt").read_text())
        assert rep["fit"]["nu_pinned_at_zero"] in (True, False)
        assert rep["fit"]["nu_hat"] < 0.01

    def test_rejects_small_bootstrap(self, tmp_path, capsys):
        f = tmp_path / "counts.csv"
        self.make_counts_file(f, z=0.5, eta=0.6, nu=0.05, shots=1000, seed=1)
        assert run("fit", "--in", f, "--bootstrap", 5, "--out-dir", tmp_path) == 2
        assert "bootstrap" in capsys.readouterr().err

    def test_missing_file_is_input_error(self, tmp_path, capsys):
        assert run("fit", "--in", tmp_path / "nope.csv", "--out-dir", tmp_path) == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_csv_names_position(self, tmp_path, capsys):
        f = tmp_path / "bad.csv"
        f.write_text("n\\m,0,1\n0,3,bad\n")
        assert run("fit", "--in", f, "--out-dir", tmp_path) == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "column 3" in err


class TestTes:

    TES_FILES = ["tes_energies.csv", "tes_pmf.csv", "tes_report.txt"]

    def test_synth_mode_end_to_end(self, tmp_path):
        assert run("tes", "--synth", 8, "--z", 0.5, "--l1", 1, "--eta", 0.9,
                   "--shots", 3000, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "tes_report.txt").read_text())
        assert rep["inputs"]["mode"] == "synth"
        assert rep["mixture"]["converged"] is True
        assert rep["assignment"]["tv_vs_model"] < 0.05
        labels, cols = read_columns_csv(tmp_path / "tes_pmf.csv")
        assert labels == ["assigned", "model"]
        assert abs(cols[0].sum() - 1.0) < 1e-12

    def test_synth_deterministic(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            assert run("tes", "--synth", 8, "--z", 0.5, "--l1", 1,
                       "--eta", 0.9, "--shots", 1500, "--out-dir", d) == 0
        assert read_bytes(d1, self.TES_FILES) == read_bytes(d2, self.TES_FILES)

    def test_file_mode_single_photon_pulses(self, tmp_path):
        from photonsub import default_template, synth_batch
        tmpl = default_template()
        rng = np.random.default_rng(6)
        traces = synth_batch(np.ones(300, dtype=int), tmpl, 1.0, 0.05, rng)
        f = tmp_path / "traces.csv"
        f.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in traces) + "\n")
        assert run("tes", "--in", f, "--nmax", 3, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "tes_report.txt").read_text())
        assert rep["inputs"]["mode"] == "file"
        assert rep["inputs"]["records"] == 300
        assert rep["assignment"]["mean_photons"] == 1.0
        _, cols = read_columns_csv(tmp_path / "tes_pmf.csv")
        assert cols[0][1] == 1.0  # every pulse read as one photon

    def test_emit_plots(self, tmp_path):
        assert run("tes", "--synth", 8, "--z", 0.4, "--shots", 1000,
                   "--emit-plots", "--out-dir", tmp_path) == 0
        assert (tmp_path / "tes_hist.dat").exists()
        assert (tmp_path / "tes_hist.gp").exists()

    def test_requires_exactly_one_source(self, tmp_path, capsys):
        assert run("tes", "--out-dir", tmp_path) == 2
        f = tmp_path / "t.csv"
        f.write_text("1.0,2.0\n")
        assert run("tes", "--in", f, "--synth", 8, "--z", 0.5,
                   "--out-dir", tmp_path) == 2
        assert "exactly one" in capsys.readouterr().err

    def test_short_records_refused(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("1.0,2.0,3.0\n4.0,5.0,6.0\n")
        assert run("tes", "--in", f, "--out-dir", tmp_path) == 2

    def test_ragged_records_name_index(self, tmp_path, capsys):
        f = tmp_path / "t.csv"
        f.write_text("1.0,2.0,3.0\n4.0,5.0\n")
        assert run("tes", "--in", f, "--out-dir", tmp_path) == 2
        assert "record 1" in capsys.readouterr().err

    def test_rejects_bad_separation(self, tmp_path):
        assert run("tes", "--synth", -2, "--z", 0.5, "--out-dir", tmp_path) == 2


class TestReport:

    def test_reproduces_predict_witnesses_exactly(self, tmp_path):
        assert run("predict", "--z", 0.66, "--l1", 3, "--eta", 0.1625,
                   "--out-dir", tmp_path) == 0
        assert run("report", "--in", tmp_path / "predict_joint.csv",
                   "--out-dir", tmp_path) == 0
        pred = parse_report((tmp_path / "predict_report.txt").read_text())
        rep = parse_report((tmp_path / "report.txt").read_text())
        assert rep["witness"] == pred["witness"]  # bit-exact float round trip
        assert rep["inputs"]["interpreted_as"] == "probabilities"

    def test_integer_counts_are_normalized(self, tmp_path):
        f = tmp_path / "counts.csv"
        write_matrix_csv(f, synthetic_counts(0.5, 0.8, 0.01, 1, shots=5000, seed=2))
        assert run("report", "--in", f, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "report.txt").read_text())
        assert rep["inputs"]["interpreted_as"] == "counts"
        assert isinstance(rep["witness"]["agarwal"], float)

    def test_non_square_matrix_padded(self, tmp_path):
        f = tmp_path / "m.csv"
        write_matrix_csv(f, np.array([[0.5, 0.2, 0.1], [0.1, 0.1, 0.0]]))
        assert run("report", "--in", f, "--out-dir", tmp_path) == 0
        rep = parse_report((tmp_path / "report.txt").read_text())
        assert rep["inputs"]["n_max"] == 2

    def test_negative_entries_refused(self, tmp_path, capsys):
        f = tmp_path / "m.csv"
        f.write_text("n\\m,0,1\n0,0.5,-0.1\n1,0.3,0.3\n")
        assert run("report", "--in", f, "--out-dir", tmp_path) == 2
        assert "negative" in capsys.readouterr().err

    def test_zero_matrix_refused(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("n\\m,0\n0,0.0\n")
        assert run("report", "--in", f, "--out-dir", tmp_path) == 2
