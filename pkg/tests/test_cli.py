import json
from pathlib import Path

import pytest

from halfline.cli import main, thread_count
from halfline.config import parse_config
from halfline.errors import ConfigError

DEMO_CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

BANDS = """\
[potential]
base = piecewise
period = 2
breakpoints = 0, 1
values = 1, 0

[experiment]
kind = bands
xi_max = 12
"""

KERNEL = """\
[potential]
base = trig
period = 6.283185307179586
cos_coeffs = 0, 1
perturbation = log
perturbation_amplitude = 1

[experiment]
kind = kernel
energies = 0.62, 0.8, 1.5
lengths = 20, 40
"""


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_free_check_passes(tmp_path, capsys):
    assert main(["free-check", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "freecheck.csv").read_text()
    assert text.startswith("# halfline") and "config-sha256" in text


def test_bands_output_and_determinism(tmp_path):
    cfg = _write(tmp_path, BANDS)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["bands", "--config", cfg, "--out", str(a)]) == 0
    assert main(["bands", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "bands.csv").read_bytes() == (b / "bands.csv").read_bytes()
    rows = [r for r in (a / "bands.csv").read_text().splitlines() if not r.startswith("#")]
    assert len(rows) >= 3


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    cfg = _write(tmp_path, KERNEL)
    monkeypatch.setenv("HALFLINE_THREADS", "1")
    assert main(["kernel", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    monkeypatch.setenv("HALFLINE_THREADS", "4")
    assert main(["kernel", "--config", cfg, "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s" / "kernel.csv").read_bytes() == (tmp_path / "p" / "kernel.csv").read_bytes()


def test_bad_thread_count(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HALFLINE_THREADS", "zero")
    assert main(["free-check", "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("HALFLINE_THREADS", "3")
    assert thread_count() == 3


def test_json_format(tmp_path):
    cfg = _write(tmp_path, BANDS + "\n[output]\nformat = json\n")
    assert main(["run", cfg, "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "bands.json").read_text())
    assert data["meta"]["config_sha256"] and len(data["rows"]) >= 2


def test_negative_period_is_usage_error(tmp_path, capsys):
    cfg = _write(tmp_path, BANDS.replace("period = 2", "period = -2"))
    assert main(["bands", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "period" in capsys.readouterr().err


def test_unknown_key_and_section(tmp_path, capsys):
    cfg = _write(tmp_path, BANDS.replace("xi_max = 12", "xi_max = 12\nximax = 3"))
    assert main(["bands", "--config", cfg]) == 2
    assert "ximax" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="section"):
        parse_config(BANDS + "[plot]\ncolor = red\n")


def test_kind_mismatch_and_missing_file(tmp_path, capsys):
    cfg = _write(tmp_path, BANDS)
    assert main(["clock", "--config", cfg]) == 2
    assert "does not match" in capsys.readouterr().err
    assert main(["bands", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_argparse_errors_map_to_two(capsys):
    assert main(["no-such-command"]) == 2
    assert main(["bands"]) == 2


def test_failed_check_exit_one(tmp_path):
    text = """\
[experiment]
kind = universality
xi0 = 1
lengths = 20, 40
max_error = 1e-9
"""
    assert main(["universality", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] is False


def test_hash_ignores_output_directory():
    a = parse_config(BANDS + "[output]\ndirectory = x\n")
    b = parse_config(BANDS + "[output]\ndirectory = y\n")
    assert a.sha256 == b.sha256


def test_inline_comments_do_not_change_hash():
    plain = parse_config(BANDS)
    commented = parse_config(BANDS.replace("xi_max = 12", "xi_max = 12   ; upper scan limit"))
    assert commented.params == plain.params and commented.sha256 == plain.sha256


@pytest.mark.parametrize("name", sorted(p.name for p in DEMO_CONFIGS.glob("*.cfg")))
def test_demo_configs_parse(name):
    parse_config((DEMO_CONFIGS / name).read_text())
