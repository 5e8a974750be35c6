import json
import os

import pytest

import wail
from wail.cli import main


@pytest.fixture
def config_file(tmp_path):
    cfg = wail.RunConfig(env={"name": "gridworld", "n": 3}, k_max=10,
                         n_eval=50, n_ref=50, dataset_size=2)
    path = tmp_path / "config.json"
    wail.save_config(path, cfg)
    return str(path)


class TestMakeExpert:
    def test_writes_artifacts(self, config_file, tmp_path, capsys):
        out = tmp_path / "expert_out"
        rc = main(["make-expert", "--config", config_file, "--out", str(out), "--seed", "3"])
        assert rc == 0
        assert (out / "mdp.json").exists()
        assert (out / "expert_policy.json").exists()
        demos = wail.load_trajectories(out / "demos.jsonl")
        assert len(demos) == 2


class TestTrain:
    def test_bc_end_to_end(self, config_file, tmp_path, capsys):
        out = tmp_path / "bc_out"
        rc = main(["train", "--config", config_file, "--algo", "bc", "--out", str(out)])
        assert rc == 0
        row = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert row["algorithm"] == "bc"
        assert (out / "policy_final.json").exists()

    def test_wail_with_demos_file(self, config_file, tmp_path, capsys):
        expert_out = tmp_path / "e"
        main(["make-expert", "--config", config_file, "--out", str(expert_out)])
        out = tmp_path / "w"
        rc = main(["train", "--config", config_file, "--algo", "wail",
                   "--demos", str(expert_out / "demos.jsonl"), "--out", str(out)])
        assert rc == 0
        assert (out / "policy_final.json").exists()
        assert (out / "reward_final.json").exists()

    def test_divergence_exit_code(self, config_file, tmp_path, capsys):
        rc = main(["train", "--config", config_file, "--algo", "wail",
                   "--out", str(tmp_path / "d"),
                   "--set", "epsilon=1e-6", "--set", "ot_lr=1e6",
                   "--set", "k_max=40"])
        assert rc == 2

    def test_validation_exit_code(self, config_file, capsys):
        rc = main(["train", "--config", config_file, "--set", "epsilon=-1"])
        assert rc == 1

    def test_unknown_config_key_rejected(self, config_file, capsys):
        rc = main(["train", "--config", config_file, "--set", "nonsense=1"])
        assert rc == 1


class TestEvalAndSurface:
    def test_eval_roundtrip(self, config_file, tmp_path, capsys):
        out = tmp_path / "bc_out"
        main(["train", "--config", config_file, "--algo", "bc", "--out", str(out)])
        rc = main(["eval", "--config", config_file, "--policy",
                   str(out / "policy_final.json"), "--out", str(tmp_path / "ev")])
        assert rc == 0
        doc = json.loads((tmp_path / "ev" / "eval.json").read_text())
        assert {"mean", "std", "scaled", "expert_ref", "random_ref"} <= set(doc)

    def test_surface_csv(self, config_file, tmp_path, capsys):
        out = tmp_path / "w"
        main(["train", "--config", config_file, "--algo", "wail", "--out", str(out)])
        rc = main(["surface", "--config", config_file,
                   "--reward", str(out / "reward_final.json"),
                   "--out", str(tmp_path / "surf"), "--grid-n", "9"])
        assert rc == 0
        surf = wail.load_surface(tmp_path / "surf" / "surface.csv")
        assert surf.scores.shape == (9, 9)


class TestGrid:
    def test_grid_success_exit(self, config_file, tmp_path, capsys):
        rc = main(["grid", "--config", config_file, "--algos", "bc",
                   "--sizes", "1,2", "--seeds", "0", "--out", str(tmp_path / "g")])
        assert rc == 0
        rows = wail.load_summary(tmp_path / "g" / "summary.csv")
        assert len(rows) == 2

    def test_partial_failure_exit(self, config_file, tmp_path, capsys):
        rc = main(["grid", "--config", config_file, "--algos", "wail,bc",
                   "--sizes", "1", "--seeds", "0", "--out", str(tmp_path / "g"),
                   "--set", "epsilon=1e-6", "--set", "ot_lr=1e6",
                   "--set", "k_max=40"])
        assert rc == 3
        assert (tmp_path / "g" / "failures.json").exists()
        rows = wail.load_summary(tmp_path / "g" / "summary.csv")
        assert [r["algorithm"] for r in rows] == ["bc"]
