"""Command-line entry points, exercised in-process through main()."""

import shutil
import subprocess

import pytest

from pasim.cli import main
from pasim.experiment import RESULT_HEADER, load_results

_TINY = """\
link:
  n_spans: 1
  step_km: 20.0
shaping:
  block_lengths: [8]
  include_mb: false
dsp:
  comp_modes: [edc]
  cpr_modes: [mpr]
sweep:
  powers_dbm: [0.0, 2.0, 4.0]
  n_symbols: 2048
  seeds: [0]
trellis_cache_dir: null
"""

_B2B_OVERLAY = """\
shaping:
  block_lengths: [8]
sweep:
  n_symbols: 2048
trellis_cache_dir: null
"""


@pytest.fixture
def tiny_yaml(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(_TINY)
    return path


def test_run_writes_results_csv(tiny_yaml, tmp_path, capsys):
    out = tmp_path / "res.csv"
    rc = main(["run", "--config", str(tiny_yaml), "--out", str(out),
               "--quiet"])
    assert rc == 0
    assert out.read_text().splitlines()[0] == ",".join(RESULT_HEADER)
    assert "1 rows (1 ok)" in capsys.readouterr().out
    assert len(load_results(out)) == 1


def test_run_with_preset_and_overlay_config(tmp_path):
    overlay = tmp_path / "overlay.yaml"
    overlay.write_text(_B2B_OVERLAY)
    out = tmp_path / "b2b.csv"
    rc = main(["run", "--preset", "backtoback", "--config", str(overlay),
               "--out", str(out), "--quiet"])
    assert rc == 0
    rows = load_results(out)
    assert [r.variant for r in rows] == ["ess", "mb"]
    assert rows[0].gmi_bits == pytest.approx(6.0, abs=1e-9)


def test_seed_override_changes_results(tiny_yaml, tmp_path):
    outs = []
    for seed in (1, 2):
        out = tmp_path / f"res{seed}.csv"
        rc = main(["run", "--config", str(tiny_yaml), "--out", str(out),
                   "--seed", str(seed), "--quiet"])
        assert rc == 0
        outs.append(load_results(out)[0].gmi_bits)
    assert outs[0] != outs[1]


def test_plotdata_emits_series(tiny_yaml, tmp_path, capsys):
    res = tmp_path / "res.csv"
    assert main(["run", "--config", str(tiny_yaml), "--out", str(res),
                 "--quiet"]) == 0
    capsys.readouterr()
    rc = main(["plotdata", "--in", str(res), "--figure", "fig2"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "figure,curve,N,gmi_bits,ci95,rate_gbps"
    assert lines[1].startswith("fig2,edc-mpr-ess,8,")


def test_plotdata_rejects_unknown_figure(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["plotdata", "--in", "whatever.csv", "--figure", "fig7"])
    assert exc.value.code == 2


def test_plotdata_missing_file_is_a_clean_error(capsys):
    rc = main(["plotdata", "--in", "/nonexistent/res.csv",
               "--figure", "fig2"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_and_preset_is_a_clean_error(capsys):
    rc = main(["run", "--quiet"])
    assert rc == 2
    assert "provide --config" in capsys.readouterr().err


def test_bad_config_key_reports_path(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("link:\n  gama: 1.0\n")
    rc = main(["run", "--config", str(bad), "--quiet"])
    assert rc == 2
    assert "unknown config key: link.gama" in capsys.readouterr().err


def test_sweep_nbps_writes_series(tmp_path):
    cfg = tmp_path / "nbps.yaml"
    cfg.write_text(_TINY.replace("cpr_modes: [mpr]",
                                 "cpr_modes: [bps]\n  nbps_grid: [2, 4]"))
    out = tmp_path / "nbps.csv"
    rc = main(["sweep-nbps", "--config", str(cfg), "--out", str(out),
               "--quiet"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "comp,nbps,gmi_bits,ci95"
    assert len(lines) == 3


def test_console_script_is_installed():
    exe = shutil.which("pasim")
    assert exe, "pasim entry point not on PATH"
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "run" in proc.stdout and "plotdata" in proc.stdout
