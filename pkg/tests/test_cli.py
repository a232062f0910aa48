import json

import pytest

from percbound.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, "--format", "json", *argv)
    return code, (json.loads(out) if out else None)


class TestOracleCommands:
    def test_exact_reach_example(self, capsys):
        code, doc = run_json(capsys, "oracle", "exact", "--model", "bond-vl2",
                             "--n", "1", "--p", "0.5")
        assert code == 0
        assert doc["schema"] == "perc-bound/1"
        assert doc["probability"] == pytest.approx(0.75, abs=1e-12)

    def test_mc_deterministic_for_seed(self, capsys):
        args = ("oracle", "mc", "--model", "bond-vl2", "--p", "0.6",
                "--depth", "40", "--trials", "200", "--seed", "11")
        _, doc1 = run_json(capsys, *args)
        _, doc2 = run_json(capsys, *args)
        assert doc1 == doc2

    def test_children_table(self, capsys):
        code, doc = run_json(capsys, "oracle", "children", "--model", "bond-vl2",
                             "--space", "2", "--state", "11", "--p", "0.5")
        assert code == 0
        children = {e["child"]: e["value"] for e in doc["children"]}
        # expectations summed over both directions at p = 0.5
        assert children["11"] == pytest.approx(0.5, abs=1e-12)
        assert children["10"] == pytest.approx(0.25, abs=1e-12)


class TestCompute:
    def test_json_fields_and_bound(self, capsys):
        code, doc = run_json(capsys, "compute", "--model", "bond-vl2",
                             "--space", "6,2,0")
        assert code == 0
        assert doc["schema"] == "perc-bound/1"
        assert doc["bound"] >= 0.624211
        assert doc["state_count"] == 38
        assert set(doc) >= {
            "model", "space", "p2", "bound", "lambda_at_bound",
            "bisection_iterations", "wall_time", "state_count",
            "distinct_poly_count",
        }

    def test_json_round_trips(self, capsys, tmp_path):
        path = tmp_path / "result.json"
        code = main(["--format", "json", "--output", str(path), "compute",
                     "--model", "bond-vl2", "--space", "2"])
        capsys.readouterr()
        assert code == 0
        doc = json.loads(path.read_text())
        assert json.loads(json.dumps(doc)) == doc

    def test_csv_header(self, capsys):
        code, out = run(capsys, "--format", "csv", "compute",
                        "--model", "bond-vl2", "--space", "2")
        assert code == 0
        assert out.splitlines()[0] == "model,space,p2,bound,lambda,states,polys,seconds"

    def test_threads_do_not_change_json(self, capsys):
        docs = []
        for threads in ("1", "3"):
            _, doc = run_json(capsys, "--threads", threads, "compute",
                              "--model", "bond-vl2", "--space", "5,1,3")
            doc.pop("wall_time")  # timing is the one nondeterministic field
            docs.append(doc)
        assert docs[0] == docs[1]


class TestSpectralAndTransitions:
    def test_spectral_report(self, capsys):
        code, doc = run_json(capsys, "spectral", "--model", "bond-vl2",
                             "--space", "2", "--p", "0.5")
        assert code == 0
        assert doc["converged"] is True
        # closed form: tr=1.25, det=0.3125 -> (tr + sqrt(tr^2-4det))/2
        assert doc["radius_estimate"] == pytest.approx(0.9045084971875, abs=1e-10)

    def test_transitions_dump(self, capsys):
        code, doc = run_json(capsys, "transitions", "--model", "bond-vl2",
                             "--space", "2", "--state", "11", "--p", "0.5")
        assert code == 0
        row = {e["child"]: e for e in doc["row"]}
        assert row["10"]["value"] == pytest.approx(0.25, abs=1e-12)
        assert "p^" in row["11"]["poly"]


class TestExitCodes:
    def test_usage_error_unknown_model(self, capsys):
        assert main(["compute", "--model", "nope", "--space", "4"]) == 2

    def test_usage_error_bad_space(self, capsys):
        assert main(["compute", "--model", "bond-vl2", "--space", "4,3"]) == 2

    def test_argparse_usage_exit(self, capsys):
        assert main(["compute"]) == 2

    def test_nonconvergence_exit(self, capsys):
        code = main(["spectral", "--model", "bond-vl2", "--space", "4",
                     "--p", "0.6", "--max-iter", "2"])
        capsys.readouterr()
        assert code == 3

    def test_memory_budget_exit(self, capsys):
        code = main(["--max-entries", "10", "compute", "--model", "bond-vl2",
                     "--space", "6"])
        capsys.readouterr()
        assert code == 4


class TestTablesAndCache:
    def test_tables_desk_scale_rows(self, capsys):
        code, doc = run_json(capsys, "tables", "inhomogeneous", "--k", "3")
        assert code == 0
        assert len(doc["rows"]) == 10
        full_values = [0.7693, 0.5444, 0.8189, 0.6103, 0.5223,
                       0.7759, 0.5753, 0.7720, 0.5583, 0.7539]
        for row, full in zip(doc["rows"], full_values):
            assert 0 < row["bound"] <= full

    def test_cache_round_trip(self, capsys, tmp_path):
        path = tmp_path / "m.pbm"
        code = main(["cache", "write", "--model", "inhom-5", "--space", "4",
                     "--out", str(path)])
        capsys.readouterr()
        assert code == 0
        code, doc = run_json(capsys, "cache", "read", "--in", str(path))
        assert code == 0
        assert doc["model"] == "inhom-5"
        assert doc["states"] == 8

    def test_cache_dump_text(self, capsys, tmp_path):
        path = tmp_path / "m.pbm"
        main(["cache", "write", "--model", "bond-vl2", "--space", "2",
              "--out", str(path)])
        capsys.readouterr()
        code, out = run(capsys, "cache", "read", "--in", str(path), "--dump")
        assert code == 0
        assert "10 -> 10" in out
