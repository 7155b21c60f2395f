import csv
import hashlib
import json
import math
import xml.etree.ElementTree as ET

import pytest

from tricrystal import svg
from tricrystal.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from tricrystal.config import ConfigError, parse_config
from tricrystal.records import RATE_HEADER, SPECTRUM_HEADER

SMALL = ["L=40", "n=801"]
SVG_NS = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# -- config -----------------------------------------------------------------


def test_parse_valid_config_with_defaults():
    cfg = parse_config("command=spectrum\nfamily=kink\nlambda=-4\nc=1,1,1\n")
    assert (cfg.L, cfg.n, cfg.k) == (40.0, 4001, 8)
    assert cfg.spec.lam == -4.0 and cfg.speeds == (1.0, 1.0, 1.0)


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\ncommand = profile   # trailing\nfamily=antikink\nlambda = 0.5\n")
    assert cfg.command == "profile" and cfg.lam == 0.5


def test_kink_lambda_out_of_range_message():
    with pytest.raises(ConfigError, match=r"lambda must be < -\(c1\+c2\+c3\) for kink.*\(-inf, -3\)"):
        parse_config("command=spectrum\nfamily=kink\nlambda=-2\nc=1,1,1\n")


def test_empty_config_lists_required_keys():
    with pytest.raises(ConfigError, match="missing required keys: command, family, lambda"):
        parse_config("")


def test_sweep_requires_lambdas():
    with pytest.raises(ConfigError, match="lambdas"):
        parse_config("command=sweep\nfamily=kink\n")


@pytest.mark.parametrize("text,key", [
    ("command=spectrum\nfamily=kink\nlambda=-4\nbogus=1\n", "bogus"),
    ("command=spectrum\nfamily=kink\nlambda=abc\n", "lambda"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nn=3\n", "n"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nn=4.5\n", "n"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nk=0\n", "k"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nc=1,-1,1\n", "c"),
    ("command=instability\nfamily=kink\nlambda=-4\neps=1e-2\n", "eps"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nrestricted=true\nc=1,2,1\n", "restricted"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nlambda=-5\n", "lambda"),
    ("command=spectrum\nfamily=dog\nlambda=-4\n", "family"),
    ("command=spectrum\nfamily=kink\nlambda=-4\nplot=maybe\n", "plot"),
    ("command=evolve\nfamily=kink\nlambda=-4\nseed=kernel\n", "seed"),
    ("command=spectrum\nfamily=kink\nlambda=-4\njunk line\n", "line 4"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


# -- CLI runs ----------------------------------------------------------------


def test_spectrum_run_kink(tmp_path):
    out = tmp_path / "s"
    assert main(["spectrum", "--out", str(out), "family=kink", "lambda=-4", *SMALL]) == EXIT_OK
    rows = read_csv(out / "spectrum.csv")
    assert tuple(rows[0]) == SPECTRUM_HEADER
    assert len(rows) == 9
    assert rows[1][7:9] == ["1", "0"]
    assert float(rows[1][9]) == pytest.approx(math.sqrt(-float(rows[1][6])), rel=1e-12)
    restricted = read_csv(out / "spectrum_restricted.csv")
    assert restricted[1][7:9] == ["1", "0"]


def test_manifest_checksums(tmp_path):
    out = tmp_path / "m"
    assert main(["spectrum", "--out", str(out), "family=free", "lambda=-3", *SMALL]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["tool"] == "tricrystal" and man["version"]
    assert man["config"]["lam"] == -3.0 and man["wall_clock_seconds"] >= 0
    for name, entry in man["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == entry["sha256"]


def test_config_file_and_flags(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("family = antikink\nlambda = -1.5707963267948966\nL=40\nn=801\n")
    out = tmp_path / "p"
    assert main(["profile", "--config", str(cfgfile), "--out", str(out), "--plot"]) == EXIT_OK
    rows = read_csv(out / "profile.csv")
    assert rows[0] == ["edge_index", "x", "value"]
    assert len(rows) == 1 + 3 * 801
    # flat anti-kink: edge 1 passes pi at the vertex, edges 2, 3 pass -pi
    assert float(rows[1][2]) == pytest.approx(math.pi, abs=1e-12)
    assert float(rows[1 + 801][2]) == pytest.approx(-math.pi, abs=1e-12)
    for name in ("profile.svg", "fluxon.svg"):
        root = ET.parse(out / name).getroot()
        assert root.get("width") == "800" and root.get("height") == "500"
        assert len(root.findall(f"{SVG_NS}polyline")) == 3


def test_command_mismatch_is_config_error(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("command=evolve\nfamily=kink\nlambda=-4\n")
    assert main(["spectrum", "--config", str(cfgfile), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_exit_codes(tmp_path, capsys):
    assert main(["spectrum", "--out", str(tmp_path / "a")]) == EXIT_CONFIG
    assert "missing required keys" in capsys.readouterr().err
    assert main(["spectrum", "--out", str(tmp_path / "b"), "family=kink", "lambda=-2"]) == EXIT_CONFIG
    assert main(["spectrum", "--config", str(tmp_path / "nope.cfg")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["spectrum", "--out", str(blocker / "sub"), "family=kink", "lambda=-4", *SMALL]) == EXIT_IO
    # k too small to separate the two kernel modes from the rest
    assert main(["spectrum", "--out", str(tmp_path / "c"), "family=kink", "lambda=-4.71238898038469",
                 "k=2", *SMALL]) == EXIT_NUMERIC


def test_evolve_and_instability_outputs(tmp_path):
    out = tmp_path / "e"
    assert main(["evolve", "--out", str(out), "--plot", "family=antikink", "lambda=1", "seed=pulse",
                 "t_end=2", "snapshot_stride=50", *SMALL]) == EXIT_OK
    assert read_csv(out / "snapshots.csv")[0] == ["time", "edge", "x", "u", "v"]
    assert read_csv(out / "energy.csv")[0] == ["time", "energy", "vertex_term", "boundary_flux_estimate"]
    out = tmp_path / "i"
    assert main(["instability", "--out", str(out), "--plot", "family=kink", "lambda=-4", *SMALL]) == EXIT_OK
    rows = read_csv(out / "rate.csv")
    assert tuple(rows[0]) == RATE_HEADER
    assert float(rows[1][4]) <= 0.05
    ET.parse(out / "growth.svg")


def test_sweep_deterministic_across_runs_and_jobs(tmp_path):
    args = ["family=kink", "lambdas=-6,-5,-4", *SMALL]
    assert main(["sweep", "--out", str(tmp_path / "a"), "--jobs", "3", "--plot", *args]) == EXIT_OK
    assert main(["sweep", "--out", str(tmp_path / "b"), "--jobs", "1", *args]) == EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    for i in range(3):
        assert (a / "parts" / f"spectrum_{i:03d}.csv").read_bytes() == (b / "parts" / f"spectrum_{i:03d}.csv").read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert "parts/spectrum_002.csv" in man["files"] and "sweep.csv" in man["files"]
    ET.parse(a / "sweep.svg")


# -- svg -------------------------------------------------------------------


def test_svg_is_valid_and_escapes_text():
    doc = svg.line_plot([("a<b", [0, 1, 2], [1, 4, 9]), ("flat", [0, 2], [3, 3])], "t & u", "x", "y")
    root = ET.fromstring(doc)
    assert len(root.findall(f"{SVG_NS}polyline")) == 2


def test_svg_rejects_empty():
    with pytest.raises(ValueError):
        svg.line_plot([("nan", [0.0], [float("nan")])])


def test_nice_ticks():
    assert svg.nice_ticks(0.0, 1.0) == pytest.approx([0, 0.2, 0.4, 0.6, 0.8, 1.0])
    t = svg.nice_ticks(-7.3, 3.1)
    assert t[0] >= -7.3 and t[-1] <= 3.1 and 0.0 in t
