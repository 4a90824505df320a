import os

import pytest

from dspstab.cli import EXIT_ERROR, EXIT_FAIL, EXIT_OK, main
from dspstab.config import ConfigError, parse_config
from dspstab.profile import DEFAULT_DELTA_GRID

MINIMAL = """\
[scheme]
scheme = "mlf"
nu = 0.5
D = 0.8

[shock]
u_minus = 1
u_plus = -1
"""

SMALL_EXPERIMENT = MINIMAL + """
[experiment]
choice = 1
p = 1
j_max = 6
n_max = 40
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.scheme == {"scheme": "mlf", "nu": 0.5, "D": 0.8, "flux": "burgers",
                          "state_lo": -1.5, "state_hi": 1.5}
    assert cfg.experiment["choice"] == 1 and cfg.experiment["p"] == 1.0
    assert cfg.experiment["j_max"] == 50 and cfg.experiment["n_max"] == 2000
    assert cfg.profile["delta_grid"] == list(DEFAULT_DELTA_GRID)
    assert cfg.output["formats"] == ["csv", "svg", "txt"]


def test_effective_config_round_trips():
    cfg = parse_config(SMALL_EXPERIMENT)
    assert parse_config(cfg.to_text()) == cfg


@pytest.mark.parametrize("text,line,fragment", [
    (MINIMAL.replace("nu = 0.5", "nu = -1"), 3, "must be > 0"),
    (MINIMAL.replace("D = 0.8", "D = 0.8\nwidth = 3"), 5, "unknown key"),
    (MINIMAL + "[plot]\n", 9, "unknown section"),
    (MINIMAL.replace("nu = 0.5", "nu = fast"), 3, "expected a number"),
    (MINIMAL + "[experiment]\nj_max = 2.5\n", 10, "expected an integer"),
    (MINIMAL + "[experiment]\nchoice = 3\n", 10, "must be 1 or 2"),
    (MINIMAL.replace("nu = 0.5", "nu = 0.5\nnu = 0.4"), 4, "duplicate"),
    (MINIMAL + "[output]\nformats = ['pdf']\n", 10, "allowed"),
    ("nu = 0.5\n", 1, "outside of any"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value) and fragment in str(err.value)


def test_missing_required_key():
    with pytest.raises(ConfigError, match="u_plus"):
        parse_config(MINIMAL.replace("u_plus = -1", ""))


def test_comments_and_grid_count():
    cfg = parse_config(MINIMAL + "# a comment\n[profile]\ndelta_grid = 5   # points\n")
    assert cfg.profile["delta_grid"] == [-0.5, -0.25, 0.0, 0.25, 0.5]


def test_hypotheses_pass(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["hypotheses", "--config", write(tmp_path, MINIMAL), "--out", str(out)]) == EXIT_OK
    text = (out / "hypotheses.csv").read_text()
    assert text.startswith("check,value,threshold,verdict\n") and ",fail" not in text
    assert (out / "effective_config.ini").exists()
    assert "spectral_probe" in capsys.readouterr().out


def test_failed_verdict_exit_code(tmp_path):
    # D = 1.2 makes |F(-1)| = |1 - 4 nu D| = 1.4: not dissipative
    cfg = write(tmp_path, MINIMAL.replace("D = 0.8", "D = 1.2"))
    out = tmp_path / "o"
    assert main(["hypotheses", "--config", cfg, "--out", str(out)]) == EXIT_FAIL
    rows = (out / "hypotheses.csv").read_text()
    assert "dissipativity_plus,1.4" in rows and "spectral_probe,nan,< 1,skipped" in rows


def test_profile_command(tmp_path):
    out = tmp_path / "o"
    assert main(["profile", "--config", write(tmp_path, MINIMAL), "--out", str(out)]) == EXIT_OK
    assert (out / "family.csv").read_text().startswith("delta,mass,residual,iterations\n")
    assert (out / "profile_reference.csv").read_text().startswith("# left_tail=1.0 right_tail=-1.0\n")


def test_choice2_precondition_is_an_error(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL + "[experiment]\nchoice = 2\np = 0.3\n")
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert "choice 2 needs p >= 0.5" in capsys.readouterr().err


def test_config_error_exit(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL.replace("nu = 0.5", "nu = -1"))
    assert main(["hypotheses", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert "line 3" in capsys.readouterr().err


def test_experiment_outputs_are_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL_EXPERIMENT)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["experiment", "--config", cfg, "--out", str(out)]) in (EXIT_OK, EXIT_FAIL)
        outs.append(out)
    for name in ("norms.csv", "envelope.csv", "slopes.csv", "envelope_l1.svg", "envelope_linf.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    norms = (outs[0] / "norms.csv").read_text().splitlines()
    assert norms[0] == "n,J,l1_norm,linf_norm" and len(norms) == 1 + 41 * 6
    assert (outs[0] / "slopes.csv").read_text().splitlines()[0] == "norm,fitted,target,verdict"
    assert (outs[0] / "envelope.csv").read_text().splitlines()[0] == "n,log_env_l1,log_env_linf"
    svg = (outs[0] / "envelope_l1.svg").read_text()
    assert svg.count("<polyline") == 2
    assert b"\r" not in (outs[0] / "norms.csv").read_bytes()


def test_formats_limit_outputs(tmp_path):
    cfg = write(tmp_path, SMALL_EXPERIMENT + "[output]\nformats = ['csv']\n")
    out = tmp_path / "o"
    main(["experiment", "--config", cfg, "--out", str(out)])
    assert (out / "norms.csv").exists() and not (out / "envelope_l1.svg").exists()
    assert not (out / "experiment.txt").exists()


def test_green_command(tmp_path):
    out = tmp_path / "o"
    status = main(["green", "--config", write(tmp_path, MINIMAL), "--out", str(out),
                   "--n", "100,200,400,800", "--j0", "0", "--decompose", "--csv", "g.csv"])
    assert status == EXIT_OK
    lines = (out / "g.csv").read_text().splitlines()
    assert lines[0] == "n,j0,j,green,leading_term,residual"
    assert len(lines) > 1000


def test_nothing_is_written_outside_out_dir(tmp_path, monkeypatch):
    work = tmp_path / "work"
    work.mkdir()
    cfg = write(work, MINIMAL)
    monkeypatch.chdir(work)
    before = set(os.listdir(work))
    out = tmp_path / "o"
    assert main(["green", "--config", cfg, "--out", str(out), "--n", "10",
                 "--csv", str(tmp_path / "escape.csv")]) == EXIT_ERROR
    assert not (tmp_path / "escape.csv").exists()
    assert main(["bounds", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert set(os.listdir(work)) == before
    assert set(os.listdir(tmp_path)) == {"work", "o"}


def test_out_dir_from_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, MINIMAL + '[output]\nout_dir = "results"\n')
    assert main(["hypotheses", "--config", cfg]) == EXIT_OK
    assert (tmp_path / "results" / "hypotheses.csv").exists()


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        main(["plot", "--config", "x.ini"])
