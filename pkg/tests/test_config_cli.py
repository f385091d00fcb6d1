"""Configuration schema and the command-line contract: defaults,
dotted-path error messages, override parsing, stable exit codes, and
byte-identical reruns through the CLI."""

import json
import subprocess
import sys

import numpy as np
import pytest

from ikg import (
    ConfigError,
    apply_overrides,
    default_config,
    load_config,
    make_problem,
    normalize_config,
)
from ikg.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main
from ikg.selftest import run_selftest


def minimal_raw(**overrides):
    raw = {
        "seed": 3,
        "replications": 2,
        "problem": {"name": "p1", "d": 1, "M": 2},
        "policy": {"name": "prs"},
        "budget": {"total": 5, "grid": [5]},
        "eval": {"draws": 20},
    }
    raw.update(overrides)
    return raw


@pytest.fixture
def config_file(tmp_path):
    def write(raw, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(raw))
        return str(path)

    return write


class TestDefaults:
    def test_default_config_tree(self):
        cfg = default_config("p1", 2)
        assert cfg["problem"] == {
            "name": "p1", "d": 2, "M": 5, "noise_value": 0.01,
            "cost_model": "truthful", "jitter": 0.0,
            "variance": {"mode": "known"}, "kernel": None,
        }
        pol = cfg["policy"]
        assert pol["name"] == "ikg"
        assert pol["sga"] == {"max_iters": None, "averaging_start": None,
                              "step_scale": None, "step_exponent": None,
                              "batch_size": None}
        assert pol["saa"] == {"J": 2000, "optimizer": "sga", "size": None,
                              "multistart": 1}
        assert pol["bse"] == {"bins_per_dim": 3, "threshold_scale": 2.0}
        assert cfg["budget"] == {"total": 100.0, "grid": None}
        assert cfg["eval"] == {"draws": 4000}
        assert cfg["output"] == {"dir": None, "timings": False}
        assert cfg["replications"] == 20
        assert cfg["seed"] == 1

    def test_normalization_idempotent_and_serializable(self):
        cfg = normalize_config(minimal_raw())
        assert normalize_config(cfg) == cfg
        assert json.loads(json.dumps(cfg)) == cfg

    def test_batch_size_scales_with_dimension(self):
        assert default_config("p1", 1)["policy"]["saa"]["J"] == 500
        assert default_config("p1", 3)["policy"]["saa"]["J"] == 4500
        assert default_config("p1", 3)["eval"]["draws"] == 9000


class TestValidationErrors:
    @pytest.mark.parametrize("mutate,path", [
        (lambda r: r.pop("problem"), "problem: section is required"),
        (lambda r: r["problem"].pop("d"), "problem.d: is required"),
        (lambda r: r["problem"].update(name="p7"), "problem.name: must be one of"),
        (lambda r: r["problem"].update(M=1), "problem.M: must be >= 2"),
        (lambda r: r["problem"].update(M=2.5), "problem.M: must be an integer"),
        (lambda r: r["problem"].update(M=True), "problem.M: must be an integer"),
        (lambda r: r["problem"].update(noise_value=0.0), "problem.noise_value: must be > 0"),
        (lambda r: r["problem"].update(cost_model="free"), "problem.cost_model"),
        (lambda r: r["problem"].update(resolution=4), "problem.resolution: unknown key"),
        (lambda r: r.update(extra=1), "extra: unknown key"),
        (lambda r: r.update(policy={"name": "dueling"}), "policy.name: must be one of"),
        (lambda r: r.update(policy={"sga": {"step_exponent": 0.5}}),
         "policy.sga.step_exponent: must be > 0.5"),
        (lambda r: r.update(policy={"sga": {"step_exponent": 1.5}}),
         "policy.sga.step_exponent: must be <= 1.0"),
        (lambda r: r.update(policy={"sga": {"momentum": 0.9}}),
         "policy.sga.momentum: unknown key"),
        (lambda r: r.update(policy={"saa": {"J": 0}}), "policy.saa.J: must be >= 1"),
        (lambda r: r.update(budget={"total": 0}), "budget.total: must be > 0"),
        (lambda r: r.update(budget={"grid": []}), "budget.grid: must be a nonempty"),
        (lambda r: r.update(budget={"grid": [2.0, 2.0]}),
         "budget.grid[1]: must be strictly increasing"),
        (lambda r: r.update(budget={"total": 5, "grid": [9]}),
         "budget.grid[0]: exceeds budget.total"),
        (lambda r: r.update(eval={"draws": 0}), "eval.draws: must be >= 1"),
        (lambda r: r.update(output={"dir": 7}), "output.dir: must be a string"),
        (lambda r: r.update(output={"timings": "yes"}), "output.timings: must be true or false"),
        (lambda r: r.update(replications=0), "replications: must be >= 1"),
        (lambda r: r.update(seed=-1), "seed: must be >= 0"),
    ])
    def test_dotted_path_messages(self, mutate, path):
        raw = minimal_raw()
        mutate(raw)
        with pytest.raises(ConfigError) as err:
            normalize_config(raw)
        assert str(err.value).startswith(path)

    def test_variance_section(self):
        raw = minimal_raw()
        raw["problem"]["variance"] = {"mode": "estimated"}
        cfg = normalize_config(raw)
        assert cfg["problem"]["variance"] == {
            "mode": "estimated", "design_points": 10, "replications": 200,
            "floor": 1e-6,
        }
        raw["problem"]["variance"] = {"mode": "known", "design_points": 5}
        with pytest.raises(ConfigError, match="only applies"):
            normalize_config(raw)
        raw["problem"]["variance"] = {"mode": "estimated", "replications": 1}
        with pytest.raises(ConfigError,
                           match="problem.variance.replications"):
            normalize_config(raw)

    def test_kernel_section(self):
        raw = minimal_raw()
        raw["problem"]["kernel"] = {"family": "matern32", "tau_sq": 2.0,
                                    "alpha": [0.5]}
        cfg = normalize_config(raw)
        assert cfg["problem"]["kernel"]["family"] == "matern32"
        raw["problem"]["kernel"] = {"family": "se", "tau_sq": 1.0,
                                    "alpha": [1.0, 1.0]}
        with pytest.raises(ConfigError, match="problem.kernel.alpha"):
            normalize_config(raw)
        raw["problem"]["kernel"] = {"family": "cubic", "tau_sq": 1.0,
                                    "alpha": [1.0]}
        with pytest.raises(ConfigError, match="problem.kernel"):
            normalize_config(raw)

    def test_root_must_be_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            normalize_config([1, 2])


class TestOverridesAndLoading:
    def test_override_parsing(self):
        raw = minimal_raw()
        tree = apply_overrides(raw, [
            "budget.total=50",
            "policy.name=ikg",
            "output.timings=true",
            "budget.grid=[10, 50]",
            "problem.kernel.family=se",
        ])
        assert tree["budget"]["total"] == 50
        assert tree["policy"]["name"] == "ikg"
        assert tree["output"]["timings"] is True
        assert tree["budget"]["grid"] == [10, 50]
        assert tree["problem"]["kernel"] == {"family": "se"}
        assert raw["budget"]["total"] == 5  # original untouched

    def test_override_value_keeps_extra_equals(self):
        tree = apply_overrides({}, ["output.dir=results=v2"])
        assert tree["output"]["dir"] == "results=v2"

    def test_override_errors(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_overrides({}, ["no-equals"])
        with pytest.raises(ConfigError, match="empty key"):
            apply_overrides({}, ["=5"])
        with pytest.raises(ConfigError, match="non-object"):
            apply_overrides({"problem": {"d": 1}}, ["problem.d.deep=1"])

    def test_load_config_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="config file not found"):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(bad)
        array = tmp_path / "array.json"
        array.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(array)


class TestCliValidate:
    def test_ok(self, config_file, capsys):
        rc = main(["validate", "--config", config_file(minimal_raw())])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "config ok: problem=p1 d=1 policy=prs budget=5.0" in out

    def test_override_changes_summary(self, config_file, capsys):
        rc = main(["validate", "--config", config_file(minimal_raw()),
                   "--override", "policy.name=bse"])
        assert rc == EXIT_OK
        assert "policy=bse" in capsys.readouterr().out

    def test_invalid_config_exits_1(self, config_file, capsys):
        raw = minimal_raw()
        raw["problem"]["M"] = 1
        rc = main(["validate", "--config", config_file(raw)])
        assert rc == EXIT_INVALID
        assert "problem.M" in capsys.readouterr().err

    def test_missing_file_exits_1(self, capsys):
        rc = main(["validate", "--config", "/nonexistent/config.json"])
        assert rc == EXIT_INVALID
        assert "config file not found" in capsys.readouterr().err

    def test_bad_flags_exit_1(self, capsys):
        assert main(["validate"]) == EXIT_INVALID       # --config required
        assert main(["frobnicate"]) == EXIT_INVALID     # unknown command
        assert main([]) == EXIT_INVALID                 # command required

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "selftest" in capsys.readouterr().out


class TestCliRun:
    def test_writes_results_and_manifest(self, config_file, tmp_path, capsys):
        out_dir = tmp_path / "out"
        rc = main(["run", "--config", config_file(minimal_raw()),
                   "--output", str(out_dir), "--workers", "1"])
        assert rc == EXIT_OK
        csv_path = out_dir / "results.csv"
        manifest_path = out_dir / "manifest.json"
        assert csv_path.exists() and manifest_path.exists()
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0] == "problem,policy,d,replication,budget,oc,wall_ms,n_samples"
        assert len(lines) == 1 + 2  # one grid point x two replications
        manifest = json.loads(manifest_path.read_text())
        assert manifest["policy"] == "prs"
        assert manifest["rows"] == 2
        assert manifest["failures"] == []
        assert "wrote 2 rows" in capsys.readouterr().out

    def test_reruns_and_worker_counts_are_byte_identical(self, config_file,
                                                         tmp_path):
        outputs = []
        for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
            out_dir = tmp_path / name
            rc = main(["run", "--config", config_file(minimal_raw()),
                       "--output", str(out_dir), "--workers", workers])
            assert rc == EXIT_OK
            outputs.append((out_dir / "results.csv").read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_seed_flag_changes_results(self, config_file, tmp_path):
        contents = []
        for seed in ("3", "3", "4"):
            out_dir = tmp_path / f"seed{seed}{len(contents)}"
            rc = main(["run", "--config", config_file(minimal_raw()),
                       "--output", str(out_dir), "--workers", "1",
                       "--seed", seed])
            assert rc == EXIT_OK
            contents.append((out_dir / "results.csv").read_bytes())
        assert contents[0] == contents[1]
        assert contents[0] != contents[2]

    def test_failed_replication_exits_2(self, config_file, tmp_path,
                                        monkeypatch, capsys):
        import ikg.experiments as experiments

        def explode(cfg, replication):
            raise RuntimeError("boom")

        monkeypatch.setattr(experiments, "run_replication", explode)
        rc = main(["run", "--config", config_file(minimal_raw()),
                   "--output", str(tmp_path / "fail"), "--workers", "1"])
        assert rc == EXIT_RUNTIME
        err = capsys.readouterr().err
        assert "replication 1 failed: RuntimeError: boom" in err

    def test_output_path_collision_exits_2(self, config_file, tmp_path,
                                           capsys):
        # A regular file where the output directory should go cannot be
        # turned into a directory; the failure surfaces as a runtime error.
        blocker = tmp_path / "blocker"
        blocker.write_text("occupied")
        rc = main(["run", "--config", config_file(minimal_raw()),
                   "--output", str(blocker), "--workers", "1"])
        assert rc == EXIT_RUNTIME
        assert "runtime error" in capsys.readouterr().err

    def test_bad_worker_count_exits_1(self, config_file, capsys):
        rc = main(["run", "--config", config_file(minimal_raw()),
                   "--workers", "0"])
        assert rc == EXIT_INVALID


class TestCliDecide:
    def ikg_raw(self):
        raw = minimal_raw()
        raw["policy"] = {
            "name": "ikg",
            "sga": {"max_iters": 5, "averaging_start": 2, "batch_size": 4},
            "saa": {"J": 32},
        }
        return raw

    def test_fresh_state_prs(self, config_file, capsys):
        rc = main(["decide", "--config", config_file(minimal_raw())])
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["policy"] == "prs"
        assert payload["alternative"] in (1, 2)  # reported 1-based
        assert len(payload["location"]) == 1
        assert 0.0 <= payload["location"][0] <= 10.0
        assert "log_ikg" not in payload

    def test_ikg_reports_diagnostics(self, config_file, capsys):
        rc = main(["decide", "--config", config_file(self.ikg_raw())])
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["policy"] == "ikg"
        assert len(payload["log_ikg"]) == 2
        assert len(payload["candidates"]) == 2
        assert len(payload["init_points"]) == 2
        best = int(np.argmax(payload["log_ikg"]))
        assert payload["alternative"] == best + 1
        assert payload["location"] == payload["candidates"][best]

    def test_deterministic_per_seed(self, config_file, capsys):
        path = config_file(self.ikg_raw())
        outputs = []
        for seed in ("9", "9", "10"):
            assert main(["decide", "--config", path, "--seed", seed]) == EXIT_OK
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1]
        assert outputs[0] != outputs[2]

    def test_state_file_roundtrip(self, config_file, tmp_path, capsys):
        problem = make_problem("p1", 1, M=2)
        state = problem.fresh_state()
        rng = np.random.default_rng(90)
        for _ in range(4):
            i = int(rng.integers(2))
            x = rng.uniform(0, 10, size=1)
            y = problem.sample_observation(i, x, rng)
            from ikg import Observation

            state = state.update_with(i, Observation(x, y, 0.01), 1.0)
        state_path = tmp_path / "state.json"
        state_path.write_text(json.dumps(state.to_record()))
        rc = main(["decide", "--config", config_file(minimal_raw()),
                   "--state", str(state_path)])
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["alternative"] in (1, 2)

    def test_state_mismatch_exits_1(self, config_file, tmp_path, capsys):
        other = make_problem("p1", 2, M=3).fresh_state()
        state_path = tmp_path / "state.json"
        state_path.write_text(json.dumps(other.to_record()))
        rc = main(["decide", "--config", config_file(minimal_raw()),
                   "--state", str(state_path)])
        assert rc == EXIT_INVALID
        assert "state file has M=3, d=2" in capsys.readouterr().err

    def test_state_file_errors_exit_1(self, config_file, tmp_path, capsys):
        rc = main(["decide", "--config", config_file(minimal_raw()),
                   "--state", str(tmp_path / "missing.json")])
        assert rc == EXIT_INVALID
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        rc = main(["decide", "--config", config_file(minimal_raw()),
                   "--state", str(bad)])
        assert rc == EXIT_INVALID


class TestCliOc:
    def write_state(self, tmp_path, M=2, d=1):
        state = make_problem("p1", d, M=M).fresh_state()
        path = tmp_path / "state.json"
        path.write_text(json.dumps(state.to_record()))
        return str(path)

    def test_reports_oc(self, config_file, tmp_path, capsys):
        rc = main(["oc", "--config", config_file(minimal_raw()),
                   "--state", self.write_state(tmp_path), "--draws", "100"])
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["draws"] == 100
        assert payload["oc"] >= 0.0

    def test_deterministic_under_seed(self, config_file, tmp_path, capsys):
        state = self.write_state(tmp_path)
        path = config_file(minimal_raw())
        outs = []
        for _ in range(2):
            assert main(["oc", "--config", path, "--state", state]) == EXIT_OK
            outs.append(capsys.readouterr().out)
        assert outs[0] == outs[1]

    def test_bad_draws_exits_1(self, config_file, tmp_path, capsys):
        rc = main(["oc", "--config", config_file(minimal_raw()),
                   "--state", self.write_state(tmp_path), "--draws", "0"])
        assert rc == EXIT_INVALID

    def test_state_required(self, config_file, capsys):
        rc = main(["oc", "--config", config_file(minimal_raw())])
        assert rc == EXIT_INVALID


class TestCliSelftest:
    def test_all_checks_pass(self, capsys):
        rc = main(["selftest"])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        lines = out.strip().split("\n")
        assert all(line.startswith("ok   ") for line in lines[:-1])
        assert lines[-1].endswith("checks passed")
        total = int(lines[-1].split("/")[0])
        assert total == len(lines) - 1

    def test_planted_bug_is_caught(self):
        results = run_selftest(kernel_grad_transform=lambda g: -g)
        by_name = {r.name: r for r in results}
        gradient_check = by_name["kernel gradients vs central differences"]
        assert not gradient_check.passed
        assert gradient_check.detail
        others = [r for r in results if r.name != gradient_check.name]
        assert all(r.passed for r in others)


class TestConsoleEntryPoint:
    def test_module_invocation(self, config_file):
        proc = subprocess.run(
            [sys.executable, "-m", "ikg.cli", "validate", "--config",
             config_file(minimal_raw())],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        assert "config ok" in proc.stdout
