import pytest

from benign_gcn.cli import RunManifest, main, parse_config
from benign_gcn.errors import ConfigError


def test_defaults():
    c = parse_config("")
    assert (c["m"], c["q"], c["sigma_0"], c["eta"], c["n_test"]) == (20, 3, 1e-3, 0.03, 500)


def test_flag_beats_file():
    assert parse_config("eta = 0.03\n", {"eta": "0.01"})["eta"] == 0.01
    assert parse_config("eta = 0.05\n")["eta"] == 0.05


def test_comments_and_blank_lines():
    c = parse_config("# comment\n\nn = 100  # trailing\n")
    assert c["n"] == 100


@pytest.mark.parametrize("text, needle", [
    ("q = 1\n", "q >= 2"),
    ("colour = red\n", "colour"),
    ("p = 0.1\ns = 0.2\n", "s"),
    ("n = 7\n", "even"),
    ("q = 2\n", "allow_q2"),
    ("eta = fast\n", "eta"),
])
def test_rejected_configs(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_error_names_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("n = 100\nq = 1\n")
    assert "line 2" in str(exc.value)


def test_manifest_round_trip():
    c = parse_config("n = 120\nsnr = 0.2\nsnr_values = 0.1, 0.2\n", {"seed": "7"})
    text = RunManifest("train", c, ["a.csv"], 1.5).render()
    assert parse_config(text) == c


def test_phase_command(tmp_path, capsys):
    code = main(["phase", "--n", "250", "--snr", "0.05", "--p", "0.5", "--s", "0.08", "--q", "3",
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "cnn_score 0.03125 harmful" in out
    assert "gcn_score 0.376" in out and "gcn_score" in out and out.count("harmful") == 2
    assert (tmp_path / "manifest.txt").exists()


def test_gradcheck_defaults_exit_zero(tmp_path, capsys):
    assert main(["gradcheck", "--out", str(tmp_path)]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main(["no-such-command"]) == 2
    assert main(["phase", "--q", "1", "--out", str(tmp_path)]) == 2
    assert "q >= 2" in capsys.readouterr().err


def test_train_and_generate_outputs(tmp_path):
    args = ["--n", "20", "--d", "40", "--sigma-p", "1", "--snr", "0.5", "--m", "4", "--sigma_0", "0.1",
            "--eta", "0.5", "--epochs", "5", "--n_test", "50"]
    assert main(["train", *args, "--out", str(tmp_path / "t")]) == 0
    names = {p.name for p in (tmp_path / "t").iterdir()}
    assert {"dynamics_cnn.csv", "dynamics_gcn.csv", "coeffs_cnn.csv", "coeffs_gcn.csv", "manifest.txt"} <= names
    assert main(["generate", *args, "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "dataset.txt").read_text().startswith("snm-sbm v1 20 40")


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    args = ["--n", "20", "--d", "40", "--sigma_p", "1", "--snr", "0.5", "--m", "4", "--sigma_0", "0.1",
            "--eta", "0.5", "--epochs", "5", "--n_test", "50"]
    assert main(["train", *args, "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--config", str(tmp_path / "a" / "manifest.txt"), "--out", str(tmp_path / "b")]) == 0
    for name in ("dynamics_cnn.csv", "dynamics_gcn.csv", "coeffs_cnn.csv", "coeffs_gcn.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
