import pytest

from src.cli import main
from src.config.base import OUT_ENV_VAR
from src.config.exception_handler import ConfigError
from src.services.presets import (
    CHAIN_A_SQUARED,
    CHAIN_K_STAR,
    MIXING_MODELS,
    PRESETS,
    cascade_identities_hold,
    chain_noisy_rate,
    chain_zeta_decay_error,
    get_preset,
    model_distance_decay,
)

CONFIG = """[model]
id = toy2d
[integrator]
dt = 0.01
horizon = 1
[ensemble]
members = 4
[coupling]
x0 = 1.0, 0.0
y0 = -1.0, 0.5
[output]
name = cli
"""


class TestCommands:
    def test_list_presets(self, capsys):
        assert main(["list-presets"]) == 0
        out = capsys.readouterr().out
        assert all(name in out for name in PRESETS)

    def test_dump_cascade(self, capsys):
        assert main(["dump-cascade", "5"]) == 0
        out = capsys.readouterr().out
        assert "# k* = 3" in out
        assert "[G]" in out

    def test_dump_cascade_small_truncation(self, capsys):
        assert main(["dump-cascade", "0", "--truncation", "3"]) == 2
        assert "truncation" in capsys.readouterr().err

    def test_show_binding(self, capsys):
        assert main(["show-binding", "chain", "--param", "a_squared=2"]) == 0
        assert "binding: " in capsys.readouterr().out

    def test_unknown_preset(self, capsys):
        assert main(["reproduce", "no-such-experiment"]) == 2
        assert "unknown preset" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "absent.ini")]) == 2
        assert "error: cannot read config" in capsys.readouterr().err

    def test_run(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv(OUT_ENV_VAR, raising=False)
        path = tmp_path / "cli.ini"
        path.write_text(CONFIG)
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "cli" / "report.json").exists()
        assert (tmp_path / "out" / "ledger.db").exists()
        assert "report: " in capsys.readouterr().out

    def test_out_env_var_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUT_ENV_VAR, str(tmp_path / "env"))
        path = tmp_path / "cli.ini"
        path.write_text(CONFIG)
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "env" / "cli" / "report.json").exists()
        assert not (tmp_path / "flag").exists()


class TestPresets:
    @pytest.mark.parametrize("name", list(PRESETS))
    def test_config_is_valid(self, name):
        config = get_preset(name).config()
        assert config.output.name == name
        assert config.fingerprint() == get_preset(name).config().fingerprint()

    def test_unknown(self):
        with pytest.raises(ConfigError, match="valid presets"):
            get_preset("nope")

    @pytest.mark.parametrize("a_squared, k_star", zip(CHAIN_A_SQUARED, CHAIN_K_STAR))
    def test_cascade_identities(self, a_squared, k_star):
        assert cascade_identities_hold(a_squared) == (True, k_star)

    @pytest.mark.slow
    @pytest.mark.parametrize("a_squared", CHAIN_A_SQUARED)
    def test_chain_zeta_decays_under_noise(self, a_squared):
        assert chain_zeta_decay_error(a_squared, 1e-3, 2.0, 20, 4) <= 10 * 1e-3

    @pytest.mark.slow
    @pytest.mark.parametrize("a_squared", CHAIN_A_SQUARED)
    def test_chain_noisy_rate_is_positive(self, a_squared):
        assert chain_noisy_rate(a_squared, 1e-3, 15, 50, 4) > 0.0

    @pytest.mark.slow
    @pytest.mark.parametrize("model_id", ["toy2d", *MIXING_MODELS])
    def test_distance_decays_for_every_model(self, model_id):
        config = get_preset("mixing-distance").config()
        xs, ys = MIXING_MODELS.get(model_id, ([1.0, 0.0], [-1.0, 0.5]))
        monotone, gamma, _ = model_distance_decay(
            model_id, xs, ys, config.estimators, config.integrator.dt, config.ensemble.seed
        )
        assert monotone
        assert gamma > 0.0
