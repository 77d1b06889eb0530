import json

import pytest

from coadapt import cli
from coadapt.bench import (
    run_bench,
    run_dynamic,
    run_sweep,
    run_train,
)
from coadapt.config import MODES, RunConfig
from coadapt.datasets import generate_static_dataset
from coadapt.graphs import load_graph, save_graph
from coadapt.model import load_parameters


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Tiny end-to-end fixture: dataset, trained checkpoint, snapshots."""
    root = tmp_path_factory.mktemp("ws")
    data = root / "data"
    generate_static_dataset(
        data, "er", {"train": 6, "val": 2, "test": 4}, master_seed=5, n=12, edge_prob=0.4
    )
    ckpt = root / "egn.json"
    cfg = RunConfig(
        problem="mvc",
        mode="EGN",
        train_epochs=3,
        train_dir=str(data / "train"),
        val_dir=str(data / "val"),
        checkpoint=str(ckpt),
        master_seed=5,
        timing=False,
    )
    run_train(cfg)
    snaps = root / "snaps"
    snaps.mkdir()
    base = load_graph(data / "test" / "000.el")
    for i in range(3):
        save_graph(base, snaps / f"{i:03d}.el")
    return {"root": root, "data": data, "ckpt": ckpt, "snaps": snaps}


def bench_config(ws, **kw):
    base = dict(
        problem="mvc",
        mode="EGN-FT",
        tune_steps=3,
        seeds=2,
        tune_lr=1e-3,
        master_seed=5,
        timing=False,
        test_dir=str(ws["data"] / "test"),
        checkpoint=str(ws["ckpt"]),
    )
    base.update(kw)
    return RunConfig(**base)


class TestGenerate:
    def test_counts_and_manifest(self, tmp_path):
        manifest = generate_static_dataset(
            tmp_path / "d", "rb", {"train": 10, "test": 5}, master_seed=1, k=2, a=1.0
        )
        files = list((tmp_path / "d").rglob("*.el"))
        assert len(files) == 15
        assert (tmp_path / "d" / "manifest.json").exists()
        assert manifest["counts"] == {"train": 10, "val": 0, "test": 5}

    def test_deterministic_bytes(self, tmp_path):
        for sub in ("a", "b"):
            generate_static_dataset(
                tmp_path / sub, "rb", {"train": 3, "test": 2}, master_seed=3, k=3, a=1.0
            )
        for rel in sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*")):
            fa, fb = tmp_path / "a" / rel, tmp_path / "b" / rel
            if fa.is_file():
                assert fa.read_bytes() == fb.read_bytes()

    def test_invalid_parameter_writes_nothing(self, tmp_path):
        target = tmp_path / "bad"
        with pytest.raises(ValueError):
            generate_static_dataset(target, "rb", {"train": 2}, k=2, a=1.0, p_test=1.5)
        assert not target.exists()

    def test_cli_generate_and_stream(self, tmp_path):
        rc = cli.main(
            ["generate", "--out", str(tmp_path / "d"), "--generator", "er",
             "--train", "2", "--test", "1", "--n", "8", "--edge-prob", "0.5"]
        )
        assert rc == 0
        assert len(list((tmp_path / "d").rglob("*.el"))) == 3
        rc = cli.main(
            ["generate", "--out", str(tmp_path / "s"), "--generator", "er",
             "--n", "8", "--snapshots", "4", "--flip-rate", "0.1"]
        )
        assert rc == 0
        assert len(list((tmp_path / "s").glob("*.el"))) == 4


class TestTrainCommand:
    def test_checkpoint_round_trip_and_log(self, workspace, tmp_path):
        ckpt = tmp_path / "m.json"
        out = tmp_path / "out"
        cfg = RunConfig(
            problem="mvc", mode="EGN", train_epochs=2,
            train_dir=str(workspace["data"] / "train"),
            checkpoint=str(ckpt), out_dir=str(out), master_seed=1, timing=False,
        )
        log = run_train(cfg)
        assert len(log["epoch_mean_loss"]) == 2
        assert load_parameters(ckpt).d == 16
        saved = json.loads((out / "train_log.json").read_text())
        assert saved["epoch_mean_loss"] == log["epoch_mean_loss"]

    def test_cli_train_smoke(self, workspace, tmp_path, capsys):
        ckpt = tmp_path / "cli-ckpt.json"
        rc = cli.main(
            ["train", "--problem", "mvc", "--mode", "EGN",
             "--train-dir", str(workspace["data"] / "train"),
             "--train-epochs", "1", "--checkpoint", str(ckpt), "--no-timing"]
        )
        assert rc == 0
        assert ckpt.exists()
        assert "trained EGN" in capsys.readouterr().out

    def test_training_learns_on_toy_set(self, workspace):
        cfg = RunConfig(
            problem="mvc", mode="EGN", train_epochs=10,
            train_dir=str(workspace["data"] / "train"), master_seed=2, timing=False,
        )
        log = run_train(cfg)
        assert log["epoch_mean_loss"][-1] < log["epoch_mean_loss"][0]


class TestBenchCommand:
    def test_inference_mode_runs_zero_steps(self, workspace):
        report = run_bench(bench_config(workspace, mode="EGN"))
        assert all(len(r.traces[0].records) == 1 for r in report.adapt_reports)
        assert len(report.rows) == 4

    def test_apr_bounds_hold(self, workspace):
        for mode in ("EGN", "EGN-FT", "EGN-TACO", "EGN-rand-FT", "EGN-TACO-Online"):
            report = run_bench(bench_config(workspace, mode=mode))
            assert all(r.apr >= 1.0 for r in report.rows)
        mc = run_bench(bench_config(workspace, problem="mc", beta_tune=0.5))
        assert all(r.apr <= 1.0 for r in mc.rows)

    def test_outputs_byte_identical_across_runs(self, workspace, tmp_path):
        for sub in ("r1", "r2"):
            run_bench(bench_config(workspace, mode="EGN-TACO", out_dir=str(tmp_path / sub)))
        for name in ("results.csv", "trajectory.csv", "aggregate.md", "report.json"):
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()

    def test_identity_warm_start_equals_plain_fine_tune(self, workspace, tmp_path):
        run_bench(bench_config(workspace, mode="EGN-FT", out_dir=str(tmp_path / "ft")))
        run_bench(
            bench_config(
                workspace, mode="EGN-TACO", lambda_shrink=1.0, lambda_perturb=0.0,
                out_dir=str(tmp_path / "taco"),
            )
        )
        ft = (tmp_path / "ft" / "results.csv").read_text().replace("EGN-FT", "M")
        taco = (tmp_path / "taco" / "results.csv").read_text().replace("EGN-TACO", "M")
        assert ft == taco

    def test_zero_steps_fine_tune_equals_inference(self, workspace):
        a = run_bench(bench_config(workspace, mode="EGN", tune_steps=9))
        b = run_bench(bench_config(workspace, mode="EGN-FT", tune_steps=0))
        assert [r.best_objective for r in a.rows] == [r.best_objective for r in b.rows]

    def test_online_single_instance_equals_standard(self, workspace, tmp_path):
        single = tmp_path / "single"
        single.mkdir()
        src = workspace["data"] / "test" / "000.el"
        (single / "000.el").write_bytes(src.read_bytes())
        a = run_bench(bench_config(workspace, mode="EGN-TACO", test_dir=str(single)))
        b = run_bench(bench_config(workspace, mode="EGN-TACO-Online", test_dir=str(single)))
        assert a.rows[0].best_objective == b.rows[0].best_objective
        assert a.rows[0].apr == b.rows[0].apr

    def test_trajectory_shape(self, workspace):
        report = run_bench(bench_config(workspace, tune_steps=3))
        assert len(report.trajectory) == 4  # steps + 1
        assert all(count == 4 for _m, _s, _apr, count in report.trajectory)

    def test_parallel_workers_match_serial(self, workspace, tmp_path):
        run_bench(bench_config(workspace, mode="EGN-FT", workers=1, out_dir=str(tmp_path / "w1")))
        run_bench(bench_config(workspace, mode="EGN-FT", workers=2, out_dir=str(tmp_path / "w2")))
        assert (tmp_path / "w1" / "results.csv").read_bytes() == (
            tmp_path / "w2" / "results.csv"
        ).read_bytes()

    def test_missing_checkpoint_rejected(self, workspace):
        cfg = bench_config(workspace, mode="EGN-FT", checkpoint=None)
        with pytest.raises(ValueError):
            run_bench(cfg)

    def test_cli_bench_smoke(self, workspace, tmp_path, capsys):
        rc = cli.main(
            ["bench", "--problem", "mvc", "--mode", "EGN-FT",
             "--test-dir", str(workspace["data"] / "test"),
             "--checkpoint", str(workspace["ckpt"]),
             "--tune-steps", "2", "--seeds", "1", "--no-timing",
             "--out-dir", str(tmp_path / "o")]
        )
        assert rc == 0
        assert "mean ApR" in capsys.readouterr().out
        assert (tmp_path / "o" / "results.csv").exists()


class TestDynamicCommand:
    def test_single_snapshot_matches_bench(self, workspace, tmp_path):
        single = tmp_path / "snap1"
        single.mkdir()
        (single / "000.el").write_bytes((workspace["snaps"] / "000.el").read_bytes())
        dyn = run_dynamic(bench_config(workspace, mode="EGN-TACO", snapshot_dir=str(single)))
        instdir = tmp_path / "inst"
        instdir.mkdir()
        (instdir / "000.el").write_bytes((single / "000.el").read_bytes())
        ben = run_bench(bench_config(workspace, mode="EGN-TACO", test_dir=str(instdir)))
        assert dyn.rows[0].best_objective == ben.rows[0].best_objective

    def test_params_dir_checkpoints(self, workspace, tmp_path):
        pd = tmp_path / "params"
        run_dynamic(
            bench_config(workspace, mode="EGN-TACO-Online",
                         snapshot_dir=str(workspace["snaps"]), seeds=1, tune_steps=2),
            params_dir=pd,
        )
        files = sorted(p.name for p in pd.glob("*.json"))
        assert "snap000_seed0_start.json" in files and "snap002_seed0_final.json" in files

    def test_identity_online_chain_continues_optimization(self, workspace):
        # repeated identical snapshots, identity warm start: the recorded
        # best never worsens across the chain
        cfg = bench_config(
            workspace, mode="EGN-TACO-Online", snapshot_dir=str(workspace["snaps"]),
            lambda_shrink=1.0, lambda_perturb=0.0, lambda_shrink_online=1.0,
            tune_steps=4, seeds=1,
        )
        report = run_dynamic(cfg)
        bests = [r.best_objective for r in report.rows]
        assert all(b <= a for a, b in zip(bests, bests[1:]))

    def test_cli_dynamic_smoke(self, workspace, capsys):
        rc = cli.main(
            ["dynamic", "--problem", "mvc", "--mode", "EGN-TACO-Online",
             "--snapshot-dir", str(workspace["snaps"]),
             "--checkpoint", str(workspace["ckpt"]),
             "--tune-steps", "1", "--seeds", "1", "--no-timing"]
        )
        assert rc == 0
        assert "snapshots" in capsys.readouterr().out


class TestSweepCommand:
    def test_identity_cell_matches_baseline_and_grid_size(self, workspace):
        cfg = bench_config(workspace, mode="EGN-TACO", tune_steps=2, seeds=1)
        report = run_sweep(cfg, [1.0, 0.5], [0.0, 0.01])
        assert len(report.cells) == 4
        identity = [c for c in report.cells if c[0] == 1.0 and c[1] == 0.0]
        assert identity and identity[0][2] == report.baseline_mean_apr

    def test_cli_sweep_smoke(self, workspace, capsys):
        rc = cli.main(
            ["sweep", "--problem", "mvc", "--mode", "EGN-TACO",
             "--test-dir", str(workspace["data"] / "test"),
             "--checkpoint", str(workspace["ckpt"]),
             "--tune-steps", "1", "--seeds", "1", "--no-timing",
             "--shrink-grid", "1,0.5", "--perturb-grid", "0,0.01"]
        )
        assert rc == 0
        assert "baseline" in capsys.readouterr().out


class TestSolveExactCommand:
    def test_prints_optimum(self, tmp_path, capsys):
        path = tmp_path / "k3.el"
        path.write_text("3\n0 1\n0 2\n1 2\n")
        rc = cli.main(["solve-exact", "--graph", str(path), "--problem", "mvc"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "optimum: 2" in out and "timed out: false" in out


class TestConfigPlumbing:
    def test_config_file_with_flag_overrides(self, workspace, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "problem": "mvc", "mode": "EGN", "tune_steps": 9,
            "test_dir": str(workspace["data"] / "test"),
            "checkpoint": str(workspace["ckpt"]), "timing": False,
        }))
        rc = cli.main(["bench", "--config", str(cfg_file), "--mode", "EGN-FT",
                       "--tune-steps", "1", "--seeds", "1"])
        assert rc == 0

    def test_unknown_config_key_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            RunConfig.from_dict({"problem": "mvc", "bogus": 1})

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            RunConfig(mode="EGN-XXL")
        assert len(MODES) == 9

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv("COADAPT_WORKERS", "3")
        assert RunConfig().resolved_workers == 3
        assert RunConfig(workers=2).resolved_workers == 2

    def test_shipped_defaults(self):
        cfg = RunConfig()
        assert (cfg.lambda_shrink, cfg.lambda_perturb, cfg.lambda_shrink_online) == (
            0.3, 0.001, 0.99,
        )
        assert RunConfig(problem="mvc").resolved_beta_train == 0.5
        assert RunConfig(problem="mc").resolved_beta_train == 4.0
        assert RunConfig(problem="mvc", mode="EGN-FT").resolved_tune_lr == 1e-4
        assert RunConfig(problem="mc", mode="EGN-FT").resolved_tune_lr == 1e-3
        assert RunConfig(problem="mvc", mode="MetaEGN-FT").resolved_tune_lr == 1e-3
        assert cfg.beta_tune == 0.5 and cfg.sigma == 1.0 and cfg.layers == 4

    def test_dynamic_command_defaults_switch(self, workspace, tmp_path, capsys):
        # without explicit flags the dynamic command uses the stream presets
        out = tmp_path / "dyn"
        rc = cli.main(
            ["dynamic", "--problem", "mvc", "--mode", "EGN-TACO",
             "--snapshot-dir", str(workspace["snaps"]),
             "--checkpoint", str(workspace["ckpt"]),
             "--tune-steps", "1", "--seeds", "1", "--no-timing",
             "--out-dir", str(out)]
        )
        assert rc == 0
        saved = json.loads((out / "config.json").read_text())
        assert saved["lambda_shrink"] == 0.5 and saved["lambda_shrink_online"] == 1.0
