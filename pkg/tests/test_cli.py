import json
import os

import pytest

from svgreeks.cli import (
    CSV_HEADER,
    RunConfig,
    emit_report,
    load_config,
    main,
    parse_config,
    report_csv,
    report_json,
    run_job,
)
from svgreeks.errors import ConfigurationError, UnsupportedGreekError

SMALL = """\
# small black-scholes job
model=black_scholes
sigma0=0.2
r=0.05
n=16
n_paths=20000
seed=2
greeks=price,delta,gamma,rho,vega
variants=corrected,paper_verbatim
"""


def test_minimal_file_takes_defaults():
    cfg = parse_config("model=black_scholes\nsigma0=0.2\n")
    assert cfg == RunConfig(model_params=(("sigma0", 0.2),))


@pytest.mark.parametrize("text,match", [
    ("n=1024\ngreeks=gamma", "512"),
    ("model=alpha_hypergeometric\nrho=1.5", r"\[-1, 1\]"),
    ("n_paths=50", "n_paths"),
    ("foo=1", "line 1: unknown key 'foo'"),
    ("seed=1\nn=abc", "line 2: key 'n'"),
    ("greeks=delta,theta", "line 1"),
    ("just some text", "line 1: expected key=value"),
    ("n=4\nn=8", "duplicate"),
])
def test_parse_errors(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(text)


def test_comments_and_blank_lines():
    cfg = parse_config("\n# comment\nseed = 7   # trailing\n\n")
    assert cfg.seed == 7


def test_seed_env_override(tmp_path):
    p = tmp_path / "job.cfg"
    p.write_text("seed=1\nn_paths=100\n")
    assert load_config(p, env={"SVGREEKS_SEED": "99"}).seed == 99
    assert load_config(p, env={}).seed == 1
    with pytest.raises(ConfigurationError):
        load_config(p, env={"SVGREEKS_SEED": "x"})


def test_run_job_rows_and_oracles():
    cfg = parse_config(SMALL + "oracles=on\n")
    man = run_job(cfg)
    rows = [(e.greek, e.variant) for e in man.estimates]
    assert rows == [
        ("price", "corrected"), ("delta", "corrected"), ("delta", "paper_verbatim"),
        ("gamma", "corrected"), ("gamma", "paper_verbatim"), ("rho", "corrected"), ("vega", "corrected"),
    ]
    names = {r.name for r in man.oracle_rows}
    assert {"price_closed_form", "delta_closed_form", "gamma_closed_form", "duality_F_skorohod",
            "delta_variant_identity_max_rel"} <= names
    assert man.oracles_passed


def test_run_job_uses_fd_oracles_without_closed_form():
    cfg = parse_config("model=alpha_hypergeometric\nn=8\nn_paths=2000\ngreeks=delta\noracles=on\n")
    names = [r.name for r in run_job(cfg).oracle_rows]
    assert "delta_fd_crn" in names


def test_gamma_on_extension_model_is_unsupported():
    with pytest.raises(UnsupportedGreekError):
        run_job(parse_config("model=hull_white_like\ngreeks=gamma\nn_paths=100\n"))


def test_csv_layout_and_determinism():
    cfg = parse_config(SMALL)
    a, b = report_csv(run_job(cfg)), report_csv(run_job(cfg))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "greek,variant,value,std_error,n_paths,n_rejected"
    assert len(lines) == 8
    value = lines[1].split(",")[2]
    assert float(value) == run_job(cfg).estimates[0].value


def test_price_only_csv_has_one_row():
    man = run_job(parse_config("n_paths=100\ngreeks=price\n"))
    assert len(report_csv(man).splitlines()) == 2


def test_json_round_trips_config():
    cfg = parse_config(SMALL + "weight=front_loaded\neps_den=1e-9\n")
    doc = json.loads(report_json(run_job(cfg)))
    assert RunConfig.from_echo(doc["config"]) == cfg
    assert doc["estimates"][1]["greek"] == "delta"


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text("n=8\nn_paths=500\n")
    out = tmp_path / "out"
    assert main(["run", str(good), "--out", str(out), "--format", "json"]) == 0
    assert (out / "report.json").exists()
    bad = tmp_path / "bad.cfg"
    bad.write_text("rho=2\n")
    assert main(["run", str(bad)]) == 2
    gamma_hw = tmp_path / "hw.cfg"
    gamma_hw.write_text("model=hull_white_like\ngreeks=gamma\nn_paths=100\n")
    assert main(["run", str(gamma_hw)]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 5
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(good), "--out", str(blocker / "sub")]) == 5
    err = capsys.readouterr().err
    assert "svgreeks: error:" in err


def test_oracle_gate_failure_exit_code(tmp_path, monkeypatch):
    import svgreeks.cli as cli
    from svgreeks.oracles import OracleReport

    real = cli.run_job

    def failing(config):
        man = real(config)
        man.oracle_rows.append(OracleReport("forced", 0.0, 1.0, 0.1))
        return man

    monkeypatch.setattr(cli, "run_job", failing)
    cfg = tmp_path / "job.cfg"
    cfg.write_text("n=8\nn_paths=100\ngreeks=price\n")
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 4
    assert (tmp_path / "report.csv").exists()


def test_emit_report_writes_oracle_file(tmp_path):
    man = run_job(parse_config("n=8\nn_paths=500\noracles=on\n"))
    paths = emit_report(man, "csv", tmp_path)
    assert sorted(p.name for p in paths) == ["oracles.csv", "report.csv"]
    assert (tmp_path / "oracles.csv").read_text().startswith("name,oracle,estimate")
