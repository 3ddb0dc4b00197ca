import json

import numpy as np
import pytest

from simplex_eval.cli import main
from simplex_eval.config import RUN_CONFIG_SCHEMA, load_config
from simplex_eval.io import load_pairs, load_tensor, save_pairs, save_tensor, validate_report

QUICK_BNN = {
    "bnn": {"hidden_units": 1, "sigma2": 0.01},
    "hmc": {"n_chains": 2, "n_adapt": 500, "convergence_window": 10000,
            "check_interval": 1000, "max_iterations": 40000},
    "draws": 20,
}


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def pairs(tmp_path):
    path = tmp_path / "pairs.csv"
    assert run("simulate", "--n-train", 60, "--n-test", 40, "--seed", 3, "--out", path) == 0
    return path


class TestAggregate:
    def test_toy(self, tmp_path):
        ann = tmp_path / "a.csv"
        ann.write_text("sample_id,annotator_id,class_index\nx,u1,0\nx,u2,0\nx,u3,1\n")
        assert run("aggregate", "--annotations", ann, "--k", 3, "--out", tmp_path / "l.csv") == 0
        lines = (tmp_path / "l.csv").read_text().splitlines()
        assert lines[0] == "sample_id,y_0,y_1,y_2"
        np.testing.assert_allclose([float(v) for v in lines[1].split(",")[1:]], [2 / 3, 1 / 3, 0])

    def test_empty(self, tmp_path, capsys):
        ann = tmp_path / "a.csv"
        ann.write_text("")
        assert run("aggregate", "--annotations", ann, "--k", 3, "--out", tmp_path / "l.csv") == 2
        assert "empty" in capsys.readouterr().err

    def test_duplicate(self, tmp_path, capsys):
        ann = tmp_path / "a.csv"
        ann.write_text("sample_id,annotator_id,class_index\nx,u1,0\nx,u1,2\n")
        assert run("aggregate", "--annotations", ann, "--k", 3, "--out", tmp_path / "l.csv") == 2
        err = capsys.readouterr().err
        assert "duplicate" in err and "'x'" in err and "'u1'" in err


class TestSimulate:
    def test_defaults(self, tmp_path):
        assert run("simulate", "--out", tmp_path / "p.csv") == 0
        data = load_pairs(tmp_path / "p.csv")
        assert len(data) == 2000 and data.k == 3

    def test_certain_and_seeded(self, tmp_path):
        for name in ("a", "b"):
            run("simulate", "--alpha", "0.2,0.2,0.2", "--n-train", 50, "--n-test", 50,
                "--seed", 4, "--out", tmp_path / f"{name}.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert np.median(load_pairs(tmp_path / "a.csv").labels.max(1)) > 0.7


class TestFitSampleMeasure:
    def test_ndod_perfect_predictor(self, tmp_path, pairs):
        data = load_pairs(pairs)
        data.predictions = data.labels.copy()
        save_pairs(tmp_path / "perfect.csv", data)
        assert run("fit", "--pairs", tmp_path / "perfect.csv", "--evaluator", "ndod",
                   "--out", tmp_path / "m.bin") == 0
        from simplex_eval.cli import load_model

        model = load_model(tmp_path / "m.bin")["model"]
        np.testing.assert_allclose(model.mean_, 0, atol=1e-15)
        np.testing.assert_allclose(model.covariance_, 0, atol=1e-15)

    def test_sample_shape_and_measure(self, tmp_path, pairs):
        data = load_pairs(pairs)
        sub = data.subset(np.arange(5))
        save_pairs(tmp_path / "five.csv", sub)
        assert run("fit", "--pairs", pairs, "--evaluator", "mle-dirichlet", "--out", tmp_path / "m.bin") == 0
        assert run("sample", "--model", tmp_path / "m.bin", "--labels", tmp_path / "five.csv",
                   "--draws", 10, "--out", tmp_path / "t.bin") == 0
        assert load_tensor(tmp_path / "t.bin").shape == (5, 10, 3)
        assert run("measure", "--tensor", tmp_path / "t.bin", "--labels", tmp_path / "five.csv",
                   "--measures", "l2,kl", "--plots", tmp_path / "plots", "--out", tmp_path / "r.json") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        validate_report(report)
        names = {p.name for p in (tmp_path / "plots").iterdir()}
        tags = set(sub.splits)
        assert names == {f"{t}_{m}.svg" for t in tags for m in ("l2", "kl")}

    def test_perfect_match_measure(self, tmp_path, pairs):
        data = load_pairs(pairs)
        save_tensor(tmp_path / "t.bin", np.repeat(data.labels[:, None], 3, axis=1))
        assert run("measure", "--tensor", tmp_path / "t.bin", "--labels", pairs,
                   "--measures", "l2", "--plots", tmp_path / "plots", "--out", tmp_path / "r.json") == 0
        for rec in [r for recs in json.loads((tmp_path / "r.json").read_text())["splits"].values() for r in recs]:
            assert rec["hpdi"]["lower"] == 0 and rec["hpdi"]["upper"] == 0
            assert rec["histogram"]["edges"][0] == 0 and sum(rec["histogram"]["counts"]) == rec["count"]
        svg = (tmp_path / "plots" / "train_l2.svg").read_text()
        assert svg.startswith("<svg") and 'class="hpdi"' in svg and "HPDI(0.95)" in svg

    def test_shape_mismatch_exit_2(self, tmp_path, pairs):
        save_tensor(tmp_path / "t.bin", np.full((3, 2, 3), 1 / 3))
        assert run("measure", "--tensor", tmp_path / "t.bin", "--labels", pairs,
                   "--out", tmp_path / "r.json") == 2

    def test_bnn_diagnostics(self, tmp_path):
        data = load_pairs_const(tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(QUICK_BNN))
        assert run("fit", "--pairs", data, "--evaluator", "bnn", "--config", cfg,
                   "--out", tmp_path / "m.bin") == 0
        diag = json.loads((tmp_path / "m.bin.diagnostics.json").read_text())
        assert diag["converged"] and len(diag["slopes"]) == 2 and len(diag["acceptance_rates"]) == 2
        assert run("sample", "--model", tmp_path / "m.bin", "--labels", data, "--draws", 21,
                   "--out", tmp_path / "t.bin") == 3


def load_pairs_const(tmp_path):
    path = tmp_path / "const.csv"
    lines = ["sample_id,split,y_0,y_1,y_2,yhat_0,yhat_1,yhat_2"]
    lines += [f"s{i},train,0.2,0.3,0.5,0.25,0.3,0.45" for i in range(20)]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestConfig:
    def test_unknown_key_exit_2(self, tmp_path, pairs, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"hmc": {"leapfrog": 3}}))
        assert run("exp1", "--pairs", pairs, "--config", cfg, "--out", tmp_path / "r.json") == 2
        assert "leapfrog" in capsys.readouterr().err

    def test_invalid_json_exit_2(self, tmp_path, pairs):
        cfg = tmp_path / "c.json"
        cfg.write_text("{")
        assert run("fit", "--pairs", pairs, "--config", cfg, "--out", tmp_path / "m.bin") == 2

    def test_defaults_valid(self):
        import jsonschema

        jsonschema.validate(load_config(), RUN_CONFIG_SCHEMA)
        assert load_config()["draws"] == 14000 and load_config()["mass"] == 0.95


class TestExperiments:
    def test_exp1_marks_failures(self, tmp_path, pairs):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({**QUICK_BNN, "hmc": {**QUICK_BNN["hmc"], "max_iterations": 2000},
                                   "draws": 50}))
        assert run("exp1", "--pairs", pairs, "--config", cfg, "--out", tmp_path / "r.json") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert set(report["evaluators"]) == {"uniform", "mle-dirichlet", "ndod", "ndod-zero", "bnn"}
        assert report["evaluators"]["bnn"]["status"] == "failed"
        assert "ConvergenceError" in report["evaluators"]["bnn"]["error"]
        assert report["n_fit"] == 50 and report["n_eval"] == 50
        for half in ("fit", "eval"):
            assert report["ranking"][half][-1] == "uniform"
            assert "bnn" not in report["ranking"][half]

    def test_exp1_ndod_timeout_marked(self, tmp_path):
        path = tmp_path / "p.csv"
        lines = ["sample_id,split,y_0,y_1,yhat_0,yhat_1"]
        # the fitted shift pushes labels sitting on a vertex out of the simplex
        lines += [f"a{i},train,0.9,0.1,1.0,0.0" for i in range(10)]
        lines += [f"b{i},test,1.0,0.0,1.0,0.0" for i in range(2)]
        path.write_text("\n".join(lines) + "\n")
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"ndod": {"max_attempts": 5}, "draws": 10,
                                   "evaluators": ["uniform", "ndod"]}))
        assert run("exp1", "--pairs", path, "--config", cfg, "--seed", 1, "--out", tmp_path / "r.json") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["evaluators"]["ndod"]["status"] == "failed"
        assert "ResamplingTimeoutError" in report["evaluators"]["ndod"]["error"]
        assert report["evaluators"]["uniform"]["status"] == "succeeded"

    def test_exp3_multiple_checkpoints(self, tmp_path, pairs):
        other = tmp_path / "epoch2.csv"
        run("simulate", "--n-train", 30, "--n-test", 30, "--seed", 9, "--out", other)
        assert run("exp3", "--pairs", pairs, other, "--evaluator", "ndod", "--draws", 10,
                   "--measures", "l2,auc", "--out", tmp_path / "r.json") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert set(report["checkpoints"]) == {"pairs", "epoch2"}
        for rep in report["checkpoints"].values():
            validate_report(rep)
            assert set(rep["splits"]) == {"train", "test"}
