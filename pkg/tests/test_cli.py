"""End-to-end runs of the command-line entry point.

Each test invokes main() in-process with a tmp_path output directory and
inspects exit codes and artifacts.  Heavy parameter choices are avoided;
the goal is the contract (artifacts, determinism, exit codes), not depth.
"""

import csv
import json
from fractions import Fraction

import numpy as np
import pytest

import subhess.cli as cli
from subhess.cli import main
from subhess.constructions import cascade_moment_table
from subhess.laminate import loads as laminate_loads
from subhess.scalars import iv_dec

F = Fraction


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(tmp_path, *argv, sub=None):
    out = tmp_path / "out"
    args = ["--out", str(out)] + list(argv)
    return main(args), out


class TestLaminateCommand:
    def test_artifacts_and_verdict(self, tmp_path):
        code, out = run(tmp_path, "laminate", "--p", "1.5", "--m", "4", "--q", "1.5")
        assert code == 0
        report = json.loads((out / "doubling_report.json").read_text())
        assert report["ok"] is True
        assert report["l1_moment"]["ok"] is True
        assert set(json.loads((out / "manifest.json").read_text())["outputs"]) == {
            "doubling_report.json",
            "moment_table.csv",
        }

    def test_moment_table_matches_library(self, tmp_path):
        code, out = run(tmp_path, "laminate", "--p", "3/2", "--m", "3", "--q", "3/2")
        assert code == 0
        rows = read_csv(out / "moment_table.csv")
        header, data = rows[0], rows[1:]
        table = cascade_moment_table(F(3, 2), [F(3, 2)], 3)
        assert len(data) == len(table) == 4
        a_lo = header.index("a_direct_lower")
        for row, ref in zip(data, table):
            lo, hi = iv_dec(ref["a_direct"], 30)
            assert row[a_lo] == lo and row[a_lo + 1] == hi

    def test_no_cascade_table_when_m_zero(self, tmp_path):
        code, out = run(tmp_path, "laminate", "--p", "1.2")
        assert code == 0
        assert not (out / "moment_table.csv").exists()

    def test_rational_mode_exact_endpoints(self, tmp_path):
        code, out = run(tmp_path, "--scalar-mode", "rational", "laminate", "--p", "1.5")
        assert code == 0
        report = json.loads((out / "doubling_report.json").read_text())
        val = report["l1_moment"]["constant"]
        lo, hi = F(val["lower"]), F(val["upper"])
        assert lo <= hi and hi - lo < F(1, 10**20)


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        argv = ["laminate", "--p", "1.35", "--m", "3", "--q", "5/4"]
        code_a, out_a = main(["--out", str(tmp_path / "a")] + argv), tmp_path / "a"
        code_b, out_b = main(["--out", str(tmp_path / "b")] + argv), tmp_path / "b"
        assert code_a == code_b == 0
        for name in ("doubling_report.json", "moment_table.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        man_a = json.loads((out_a / "manifest.json").read_text())
        man_b = json.loads((out_b / "manifest.json").read_text())
        assert man_a["config_sha256"] == man_b["config_sha256"]
        assert man_a["outputs"] == man_b["outputs"]

    def test_manifest_records_versions_and_runtime(self, tmp_path):
        code, out = run(tmp_path, "wavecone", "--n", "2", "--trials", "10")
        assert code == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["versions"]["package"]
        assert man["runtime_seconds"] >= 0
        assert man["command"] == "wavecone"


class TestValidation:
    @pytest.mark.parametrize(
        "argv",
        [
            ["laminate", "--p", "0.9"],
            ["laminate", "--p", "3/2", "--q", "1/2"],
            ["realize", "--p", "1.5", "--eps", "2"],
            ["realize", "--eps", "1/10"],
            ["staircase", "--q", "3/2"],
            ["wavecone", "--n", "1"],
            ["obstacle", "solve", "--n", "4"],
            ["obstacle", "solve", "--n", "65", "--omega", "2.0"],
            ["obstacle", "solve", "--n", "65", "--obstacle", "no-such-file.csv"],
            ["obstacle", "selfcheck", "--depth", "0"],
        ],
    )
    def test_bad_parameters_exit_2(self, tmp_path, argv):
        code, out = run(tmp_path, *argv)
        assert code == 2
        assert not out.exists()

    def test_bad_digits_rejected(self, tmp_path):
        assert main(["--out", str(tmp_path / "o"), "--digits", "0",
                     "laminate", "--p", "1.5"]) == 2

    def test_unparseable_fraction_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--out", str(tmp_path / "o"), "laminate", "--p", "abc"])
        assert exc.value.code == 2


class TestBudget:
    def test_exhaustion_writes_partial_manifest(self, tmp_path):
        code, out = run(tmp_path, "realize", "--p", "1.5", "--eps", "1/10",
                        "--budget", "100")
        assert code == 3
        man = json.loads((out / "manifest.json").read_text())
        assert "budget" in man["note"]
        assert man["outputs"] == {}
        assert not (out / "realize_report.csv").exists()


class TestRealizeCommand:
    def test_artifacts(self, tmp_path):
        code, out = run(tmp_path, "realize", "--p", "3/2", "--eps", "1/10",
                        "--q", "3/2")
        assert code == 0
        lam = laminate_loads((out / "laminate.json").read_text())
        assert len(lam.atoms) == 3
        fr = json.loads((out / "area_fractions.json").read_text())
        assert fr["cell_count"] > 0
        assert all(row["ok"] for row in fr["rows"])
        rows = read_csv(out / "realize_report.csv")
        names = [r[0] for r in rows[1:]]
        assert "hessian_l1_mean" in names and "min_trace" in names
        assert "neg_part_l3/2_i1" in names


class TestStaircaseCommand:
    def test_levels_csv(self, tmp_path):
        code, out = run(tmp_path, "staircase", "--J", "2")
        assert code == 0
        rows = read_csv(out / "staircase_levels.csv")
        header, data = rows[0], rows[1:]
        assert [r[header.index("level")] for r in data] == ["1", "2"]
        l1_lo = header.index("l1_contribution_lower")
        assert all(float(r[l1_lo]) > 0 for r in data)
        neg_lo = header.index("neg_mean_omega_lower")
        assert all(float(r[neg_lo]) >= 0 for r in data)
        report = read_csv(out / "staircase_report.csv")
        by_name = {r[0]: r for r in report[1:]}
        assert float(by_name["min_trace"][1]) >= 0


class TestWaveconeCommand:
    def test_agreement_and_lattice(self, tmp_path):
        code, out = run(tmp_path, "wavecone", "--n", "2", "--trials", "50")
        assert code == 0
        rep = json.loads((out / "wavecone_report.json").read_text())
        assert rep["agreement"]["all_agree"] is True
        assert rep["lattice"]["all_ok"] is True
        rows = read_csv(out / "wavecone_summary.csv")
        assert rows[1][3] == "True" and rows[2][3] == "True"


class TestObstacleCommand:
    def test_radial_solve(self, tmp_path):
        code, out = run(tmp_path, "obstacle", "solve", "--n", "33",
                        "--obstacle", "radial", "--tol", "1e-11")
        assert code == 0
        rep = json.loads((out / "obstacle_report.json").read_text())
        assert rep["converged"] is True
        assert 0 < rep["contact_nodes"] < rep["interior_nodes"]
        u = np.loadtxt(out / "obstacle_solution.csv", delimiter=",")
        assert u.shape == (33, 33)

    def test_obstacle_from_file(self, tmp_path):
        xs = np.linspace(0.0, 1.0, 17)
        grid = 0.2 - ((xs[:, None] - 0.5) ** 2 + (xs[None, :] - 0.5) ** 2)
        path = tmp_path / "phi.csv"
        np.savetxt(path, grid, delimiter=",")
        code, out = run(tmp_path, "obstacle", "solve", "--n", "17",
                        "--obstacle", str(path))
        assert code == 0
        rep = json.loads((out / "obstacle_report.json").read_text())
        # concave paraboloid: clipping is already the solution
        assert rep["contact_nodes"] == rep["interior_nodes"]

    def test_file_size_mismatch_exits_2(self, tmp_path):
        path = tmp_path / "phi.csv"
        np.savetxt(path, np.zeros((9, 9)), delimiter=",")
        code, out = run(tmp_path, "obstacle", "solve", "--n", "17",
                        "--obstacle", str(path))
        assert code == 2

    def test_selfcheck_coincidence(self, tmp_path):
        code, out = run(tmp_path, "obstacle", "selfcheck", "--depth", "1",
                        "--n", "17,33")
        assert code == 0
        rep = json.loads((out / "selfcheck_report.json").read_text())
        assert rep["fitted_c"] == 0.0
        assert [r["n"] for r in rep["rows"]] == [17, 33]


class TestVerdictGate:
    def test_failed_laminate_verdict_exits_4(self, tmp_path, monkeypatch):
        monkeypatch.setattr(cli, "verify_doubling",
                            lambda lam, params, q_list: {"ok": False})
        code, out = run(tmp_path, "laminate", "--p", "1.5")
        assert code == 4
        # report and manifest still written for inspection
        assert (out / "doubling_report.json").exists()
        assert (out / "manifest.json").exists()

    def test_failed_selfcheck_gate_exits_4(self, tmp_path, monkeypatch):
        fake = {"rows": [{"n": 17, "h": 1 / 16, "sup_dev": 0.5}],
                "fitted_c": 8.0, "shrinking": False, "suggestion": None}
        monkeypatch.setattr(cli, "self_obstacle_suite",
                            lambda pot, n_list, tol: fake)
        code, out = run(tmp_path, "obstacle", "selfcheck", "--depth", "1",
                        "--n", "17", "--gate-c", "1.0")
        assert code == 4


class TestConfigFile:
    def test_defaults_from_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"p": "1.5", "m": 4, "q": ["3/2"]}))
        code = main(["--out", str(tmp_path / "o"), "--config", str(cfg),
                     "laminate", "--m", "0"])
        assert code == 0
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["config"]["params"]["m"] == 0
        assert man["config"]["params"]["p"] == "3/2"
        assert not (tmp_path / "o" / "moment_table.csv").exists()

    def test_config_must_be_object(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        code = main(["--out", str(tmp_path / "o"), "--config", str(cfg),
                     "laminate", "--p", "1.5"])
        assert code == 2

    def test_missing_config_file(self, tmp_path):
        code = main(["--out", str(tmp_path / "o"), "--config",
                     str(tmp_path / "nope.json"), "laminate", "--p", "1.5"])
        assert code == 2


class TestDefaultOutDir:
    def test_out_defaults_to_command_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["wavecone", "--n", "2", "--trials", "5"]) == 0
        assert (tmp_path / "wavecone_out" / "manifest.json").exists()
