import textwrap

import pytest

from dipolebound.cli import header_config, main, parse_config

DY = textwrap.dedent("""
    [run]
    command = scales

    [model]
    variant = lennard_jones
    units = atomic
    mass = 81.96
    mu = 9.93
    c6 = 2003
    de = 800
""")

HW = textwrap.dedent("""
    [run]
    command = bound

    [model]
    variant = hard_wall
    r_min = 0.2

    [basis]
    parity = even
    ML = 0
    L_max = 16

    [grid]
    dR = 5e-4

    [window]
    e_lo = -500
""")


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def data_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    head = lines[0].split(",")
    return [dict(zip(head, l.split(","))) for l in lines[1:]]


def test_scales(tmp_path):
    out = tmp_path / "s.csv"
    assert main([str(write(tmp_path, DY)), "--output", str(out)]) == 0
    rows = data_rows(out)
    assert len(rows) == 1
    assert float(rows[0]["R_dip_a0"]) == pytest.approx(196, rel=0.01)
    assert out.read_text().startswith("# dipolebound ")


def test_missing_field_exit_2(tmp_path, capsys):
    assert main([str(write(tmp_path, DY.replace("mass = 81.96\n", "")))]) == 2
    assert "mass" in capsys.readouterr().err


def test_bad_value_exit_2(tmp_path, capsys):
    assert main([str(write(tmp_path, HW.replace("L_max = 16", "L_max = many")))]) == 2
    assert "L_max" in capsys.readouterr().err


def test_unreadable_config_exit_2(tmp_path):
    assert main([str(tmp_path / "nope.ini")]) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    # so close to threshold the s-wave adiabat stays allowed out to any reachable R_max
    assert main([str(write(tmp_path, HW)), "--set", "window.e_hi=-1e-300"]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_bound_and_round_trip(tmp_path):
    out = tmp_path / "b.csv"
    cfg = write(tmp_path, HW)
    assert main([str(cfg), "-o", str(out), "--lmax", "18", "--tol-e", "1e-9"]) == 0
    rows = data_rows(out)
    assert len(rows) == 1 and rows[0]["complete"] == "1" and float(rows[0]["energy"]) < 0
    again = parse_config(header_config(out))
    orig = parse_config(HW, {("basis", "L_max"): "18", ("window", "tol_e"): "1e-9", ("run", "output"): str(out)})
    assert again.model == orig.model and again.command == orig.command and again.tol_e == orig.tol_e
    assert "# grid:" in out.read_text() and "basis: even L=0..18" in out.read_text()


def test_byte_identical_reruns(tmp_path):
    cfg = write(tmp_path, HW)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([str(cfg), "-o", str(a)]) == 0
    assert main([str(cfg), "-o", str(b)]) == 0
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# output")]
    assert strip(a) == strip(b)


def test_adiabats_and_wkb(tmp_path):
    text = HW.replace("command = bound", "command = adiabats") + "\n[adiabats]\nr_lo = 0.05\nr_hi = 30\npoints = 50\n"
    out = tmp_path / "a.csv"
    assert main([str(write(tmp_path, text)), "-o", str(out)]) == 0
    rows = data_rows(out)
    assert float(rows[-1]["eps0_r4"]) == pytest.approx(-4 / 15, rel=0.01)
    out2 = tmp_path / "w.csv"
    assert main(["wkb", str(write(tmp_path, HW, "w.ini")), "-o", str(out2)]) == 0
    assert int(data_rows(out2)[0]["count"]) >= 1


def test_scatlen(tmp_path):
    text = DY.replace("command = scales", "command = scatlen")
    out = tmp_path / "a.csv"
    assert main([str(write(tmp_path, text)), "-o", str(out)]) == 0
    assert float(data_rows(out)[0]["a_over_R6"]) == pytest.approx(-0.54, abs=0.01)


def test_units_mismatch(tmp_path):
    assert main([str(write(tmp_path, HW.replace("r_min = 0.2", "r_min = 0.2\nunits = atomic")))]) == 2
