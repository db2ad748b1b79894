import xml.etree.ElementTree as ET

import pytest

from fvadvect import tables
from fvadvect.analysis import CONVERGENCE_HEADER
from fvadvect.cli import main
from fvadvect.config import ConfigError, load_config

MINIMAL = """\
horizon = 0.03
xi = 0.1
output_dir = "out"

[mesh]
kind = "cartesian"
n = 16
boundary = "periodic"

[field]
stream = "uniform"
a = 1.0

[initial]
kind = "indicator"
rectangle = [0.25, 0.5, 0.25, 0.5]
"""

STUDY = MINIMAL.replace("horizon = 0.03", "horizon = 0.25") + """
[study]
levels = [8, 16, 32]
window = [0.3, 0.9]
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_run_writes_three_csvs(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    out = tmp_path / "run"
    assert main(["run", cfg, "-o", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["energy.csv", "error.csv", "report.csv"]
    header, rows = tables.read_csv(out / "report.csv")
    assert header == tables.REPORT_HEADER and len(rows) == 2  # one step
    header, rows = tables.read_csv(out / "energy.csv")
    assert header == CONVERGENCE_HEADER and rows[0][3] == "cartesian"


def test_xi_one_is_invalid(tmp_path, capsys):
    assert main(["run", write(tmp_path, MINIMAL.replace("xi = 0.1", "xi = 1.0"))]) == 2
    assert "xi" in capsys.readouterr().err


def test_uniform_impermeable_is_invalid(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL.replace('"periodic"', '"impermeable"'))
    assert main(["validate", cfg]) == 2
    assert "uniform fields require periodic boundaries" in capsys.readouterr().err


@pytest.mark.parametrize("edit", [
    ("n = 16", "n = 16\ncolour = 1"),
    ("xi = 0.1", "xi = 0.1\nspeed = 3"),
    ("n = 16", 'n = "16"'),
    ("rectangle = [0.25, 0.5, 0.25, 0.5]", "rectangle = [0.5, 0.25, 0.25, 0.5]"),
    ('kind = "indicator"', 'kind = "spline"'),
    ("horizon = 0.03", "horizon = -1.0"),
])
def test_schema_rejections(tmp_path, edit):
    cfg = write(tmp_path, MINIMAL.replace(*edit))
    with pytest.raises(ConfigError):
        load_config(cfg)
    assert main(["validate", cfg]) == 2


def test_malformed_toml_and_missing_file(tmp_path):
    assert main(["validate", write(tmp_path, "horizon = = 1")]) == 2
    assert main(["validate", str(tmp_path / "nope.toml")]) == 2


def test_duplicate_levels_invalid(tmp_path):
    cfg = write(tmp_path, STUDY.replace("[8, 16, 32]", "[8, 16, 16]"))
    with pytest.raises(ConfigError, match="duplicate"):
        load_config(cfg)
    assert main(["converge", cfg]) == 2


def test_converge_requires_study(tmp_path):
    assert main(["converge", write(tmp_path, MINIMAL)]) == 2


def test_invariant_violation_exit(tmp_path, monkeypatch, capsys):
    import fvadvect.experiment as experiment
    monkeypatch.setattr(experiment, "IDENTITY_TOL", -1.0)
    assert main(["run", write(tmp_path, MINIMAL), "-o", str(tmp_path / "o")]) == 3
    assert "energy identity residual" in capsys.readouterr().err


def test_cfl_refusal_exit(tmp_path, monkeypatch, capsys):
    import fvadvect.scheme as scheme
    real = scheme.cfl_timestep
    monkeypatch.setattr(scheme, "cfl_timestep", lambda *a: (4 * real(*a)[0], 0))
    assert main(["run", write(tmp_path, MINIMAL), "-o", str(tmp_path / "o")]) == 3
    assert "cell" in capsys.readouterr().err


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ADVECT_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["run", write(tmp_path, MINIMAL)]) == 0
    assert (tmp_path / "root" / "out" / "report.csv").exists()


def test_snapshots_written(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace("horizon = 0.03", "horizon = 0.1\nsnapshots = [0.05]"))
    out = tmp_path / "o"
    assert main(["run", cfg, "-o", str(out)]) == 0
    snaps = sorted(p.name for p in (out / "snapshots").iterdir())
    assert snaps[0] == "u_000000.txt" and len(snaps) == 3
    _, rows = tables.read_csv(out / "error.csv")
    assert len(rows) == 3


def test_csv_round_trip_is_exact(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace("horizon = 0.03", "horizon = 0.2"))
    from fvadvect.config import load_config as load
    from fvadvect.experiment import run_experiment
    res = run_experiment(load(cfg), tmp_path / "o")
    _, rows = tables.read_csv(tmp_path / "o" / "report.csv")
    assert [r[1] for r in rows] == res.steps.mass
    assert [r[5] for r in rows] == res.steps.l2
    _, rows = tables.read_csv(tmp_path / "o" / "energy.csv")
    assert rows[0][5:] == (res.energy.E_h, res.energy.Q_h, res.energy.eps_h, res.energy.identity_residual)


def test_identical_configs_give_identical_bytes(tmp_path):
    text = MINIMAL.replace('kind = "cartesian"', 'kind = "perturbed"\nseed = 11').replace("horizon = 0.03", "horizon = 0.2")
    cfg = write(tmp_path, text)
    assert main(["run", cfg, "-o", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "-o", str(tmp_path / "b")]) == 0
    for name in ("report.csv", "energy.csv", "error.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_converge_window_and_plot(tmp_path, capsys):
    cfg = write(tmp_path, STUDY)
    out = tmp_path / "s"
    assert main(["converge", cfg, "-o", str(out)]) == 0
    assert "EOC" in capsys.readouterr().out
    header, rows = tables.read_csv(out / "convergence.csv")
    assert header == CONVERGENCE_HEADER and len(rows) == 3
    assert [r[0] for r in rows] == sorted((r[0] for r in rows), reverse=True)
    assert all((out / f"level_{n:05d}" / "report.csv").exists() for n in (8, 16, 32))
    root = ET.parse(out / "convergence.svg").getroot()
    assert root.tag.endswith("svg")
    assert len([c for c in root.iter() if c.tag.endswith("circle")]) == 3
    narrow = write(tmp_path, STUDY.replace("[0.3, 0.9]", "[0.9, 1.1]"), "narrow.toml")
    assert main(["converge", narrow, "-o", str(tmp_path / "n")]) == 4


def test_parallel_levels_match_serial(tmp_path):
    cfg = write(tmp_path, STUDY)
    assert main(["converge", cfg, "-o", str(tmp_path / "a")]) == 0
    assert main(["converge", cfg, "-o", str(tmp_path / "b"), "-j", "2"]) == 0
    a = (tmp_path / "a" / "convergence.csv").read_bytes()
    assert a == (tmp_path / "b" / "convergence.csv").read_bytes()


def test_loglog_svg_line_passes_through_points():
    svg = tables.loglog_svg([0.1, 0.01], [0.1, 0.01], slope=1.0, intercept=0.0)
    root = ET.fromstring(svg)
    dots = [(float(c.get("cx")), float(c.get("cy"))) for c in root.iter() if c.tag.endswith("circle")]
    fit = [c for c in root.iter() if c.tag.endswith("line") and c.get("stroke") == "steelblue"][0]
    ends = {(float(fit.get("x1")), float(fit.get("y1"))), (float(fit.get("x2")), float(fit.get("y2")))}
    assert ends == set(dots)
    assert "slope 1.000" in svg


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for word in ("run", "converge", "validate", "ADVECT_OUTPUT_ROOT"):
        assert word in out
