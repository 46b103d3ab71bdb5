import json
import warnings

import numpy as np
import pytest
from sqlmodel import Session

from src.config.base import configure_ledger
from src.config.exception_handler import EXIT_ACCEPTANCE, EXIT_BLOW_UP, EXIT_OK
from src.config.settings import parse_config
from src.entities.binding.forces import build_binding
from src.entities.report.repository import experiment_run_repository
from src.entities.report.schemes import AcceptanceCheck
from src.entities.trajectory.engine import integrate_coupled, sample_noise, zero_noise
from src.entities.trajectory.io import read_trajectory_csv
from src.services.harness import merge_coupled, run, run_coupled_ensemble, zeta_relative_error

SMALL = """[model]
id = toy2d
[integrator]
dt = 0.01
horizon = 2
[ensemble]
members = 6
seed = 3
chunk = 4
[coupling]
x0 = 1.0, 0.0
y0 = {y0}
[estimators]
zeta_check_until = 2
[output]
name = small
trajectory_members = 2
"""


def small_config(tmp_path, y0="-1.0, 0.5", **overrides):
    return parse_config(SMALL.format(y0=y0)).with_overrides(out=tmp_path, **overrides)


def ledger_rows(out_dir):
    with Session(configure_ledger(out_dir)) as session:
        return list(experiment_run_repository.get_all(session))


class TestEnsemble:
    def test_chunks_match_single_call(self, tmp_path):
        config = small_config(tmp_path)
        model = config.build_model()
        binding = build_binding(model)
        merged = run_coupled_ensemble(config, model, binding)
        x0, y0 = config.initial_states(model)
        noise = sample_noise(model, config.steps, config.integrator.dt, seed=3, members=6)
        whole = integrate_coupled(model, binding, x0, y0, noise, record_every=config.record_every)
        np.testing.assert_array_equal(merged.rho_path, whole.rho_path)
        np.testing.assert_array_equal(merged.girsanov.log_density, whole.girsanov.log_density)

    def test_worker_count_does_not_change_results(self, tmp_path):
        config = small_config(tmp_path)
        model = config.build_model()
        binding = build_binding(model)
        one = run_coupled_ensemble(config, model, binding)
        two = run_coupled_ensemble(config.with_overrides(jobs=2), model, binding)
        np.testing.assert_array_equal(one.x_path, two.x_path)
        np.testing.assert_array_equal(one.zeta_path, two.zeta_path)

    def test_merge_single_part(self, toy):
        noise = sample_noise(toy, 10, 0.01, seed=0)
        traj = integrate_coupled(toy, build_binding(toy), np.zeros(2), np.ones(2), noise)
        assert merge_coupled([traj]) is traj


class TestRun:
    def test_writes_artifacts(self, tmp_path):
        outcome = run(small_config(tmp_path))
        assert outcome.exit_code == EXIT_OK
        assert set(outcome.files) == {"trajectory", "plot", "report"}
        assert all(path.parent == tmp_path / "small" for path in outcome.files.values())
        report = json.loads(outcome.files["report"].read_text())
        assert report["fingerprint"] == outcome.config.fingerprint()
        assert report["contraction"]["points"] == 21
        assert report["zeta_max_relative_error"] <= 10 * 0.01

    def test_fingerprint_in_every_file(self, tmp_path):
        outcome = run(small_config(tmp_path))
        fp = outcome.report.fingerprint
        for kind in ("trajectory", "plot"):
            assert f"fingerprint={fp}" in outcome.files[kind].read_text().splitlines()[0]
        meta, rows = read_trajectory_csv(outcome.files["trajectory"])
        assert meta["fingerprint"] == fp
        assert len(rows) == 21 * 2

    def test_report_is_reproducible(self, tmp_path):
        first = run(small_config(tmp_path / "a")).files["report"].read_bytes()
        second = run(small_config(tmp_path / "b", jobs=2)).files["report"].read_bytes()
        assert first == second

    def test_diagonal_start_has_zero_rho(self, tmp_path):
        outcome = run(small_config(tmp_path, y0="1.0, 0.0"))
        assert outcome.exit_code == EXIT_OK
        assert outcome.report.contraction is None
        assert outcome.report.zeta_max_relative_error is None
        _, rows = read_trajectory_csv(outcome.files["trajectory"])
        assert all(row["rho_norm"] == 0.0 and row["log_density"] == 0.0 for row in rows)

    def test_ledger_row(self, tmp_path):
        outcome = run(small_config(tmp_path))
        rows = ledger_rows(tmp_path)
        assert len(rows) == 1
        assert rows[0].status == "pass"
        assert rows[0].fingerprint == outcome.report.fingerprint
        assert json.loads(rows[0].report_json)["experiment"] == "small"

    def test_failed_acceptance(self, tmp_path):
        def reject(outcome):
            return [AcceptanceCheck(name="never", passed=False)]

        outcome = run(small_config(tmp_path), acceptance=reject)
        assert outcome.exit_code == EXIT_ACCEPTANCE
        assert not outcome.report.passed
        assert ledger_rows(tmp_path)[0].status == "fail"

    def test_blow_up_writes_partial_outputs(self, tmp_path):
        text = SMALL.format(y0="1e3, 0.0").replace("x0 = 1.0, 0.0", "x0 = 1e3, 0.0").replace("dt = 0.01", "dt = 0.1")
        config = parse_config(text).with_overrides(out=tmp_path)
        with np.errstate(over="ignore", invalid="ignore"):
            outcome = run(config)
        assert outcome.exit_code == EXIT_BLOW_UP
        assert outcome.report.blow_up["message"].startswith("blow-up at t=")
        assert 0.0 < outcome.report.blow_up["time"] <= 2.0
        assert json.loads(outcome.files["report"].read_text())["blow_up"] is not None
        assert ledger_rows(tmp_path)[0].status == "blow-up"

    @pytest.mark.slow
    def test_distance_estimator(self, tmp_path):
        text = SMALL.format(y0="-1.0, 0.5").replace(
            "zeta_check_until = 2\n",
            "zeta_check_until = 2\ndistance = true\ndistance_times = 1..2\ndistance_members = 40\nnoise_floor_boot = 3\n",
        )
        outcome = run(parse_config(text).with_overrides(out=tmp_path))
        assert [p.t for p in outcome.report.distance_series] == [1.0, 2.0]
        assert outcome.report.noise_floor is not None
        assert "distance" in outcome.files


class TestZetaRelativeError:
    def test_zero_start_components_are_skipped(self, small_rd):
        x0, y0 = np.zeros(small_rd.dim), np.zeros(small_rd.dim)
        x0[0], y0[0] = 1.0, 0.5
        binding = build_binding(small_rd)
        traj = integrate_coupled(small_rd, binding, x0, y0, zero_noise(small_rd, 200, 1e-3), record_every=20)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            error = zeta_relative_error(binding, traj, until=0.2)
        assert error is not None
        assert np.isfinite(error)
        assert error < 1e-2

    def test_all_zero_start_has_no_error(self, toy):
        binding = build_binding(toy)
        x0 = np.array([1.0, 0.0])
        traj = integrate_coupled(toy, binding, x0, x0, zero_noise(toy, 10, 1e-3))
        assert zeta_relative_error(binding, traj, until=0.01) is None
