import json
import math
import subprocess
import sys

import numpy as np
import pytest

from logconcave.cli import load_artifact, main, parse_grid, DataError


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def two_point(tmp_path):
    return write(tmp_path / "two.csv", "x\n0\n1\n")


def test_fit_two_points(tmp_path, two_point, capsys):
    out = tmp_path / "fit.json"
    code, _, err = run(["fit", two_point, "-o", out], capsys)
    assert code == 0
    art = json.loads(out.read_text())
    assert art["schema_version"] == "1"
    assert [p[1] for p in art["full_psi"]] == pytest.approx([0.0, 0.0], abs=1e-10)
    assert art["objective"] == pytest.approx(-1.0, abs=1e-12)
    assert "m=2" in err
    # key-sorted output
    assert list(art) == sorted(art)


def test_fit_merges_duplicates_and_weights(tmp_path, capsys):
    src = write(tmp_path / "d.csv", "x,weight\n1,1\n2,1\n2,1\n3,2\n")
    out = tmp_path / "fit.json"
    code, _, err = run(["fit", src, "-o", out], capsys)
    assert code == 0
    art = json.loads(out.read_text())
    assert art["m"] == 3
    assert art["weights"] == pytest.approx([0.2, 0.4, 0.4])
    assert "renormalized" in err


def test_fit_headerless_input(tmp_path, capsys):
    src = write(tmp_path / "d.csv", "0.5\n1.5\n\n2.0\n")
    code, out, _ = run(["fit", src], capsys)
    assert code == 0
    assert json.loads(out)["m"] == 3


def test_fit_single_point_is_data_error(tmp_path, capsys):
    src = write(tmp_path / "d.csv", "x\n5\n5\n")
    code, _, err = run(["fit", src], capsys)
    assert code == 2
    assert "error" in err


def test_fit_malformed_row_reports_line(tmp_path, capsys):
    src = write(tmp_path / "d.csv", "x,weight\n1,1\n2,abc\n")
    code, _, err = run(["fit", src], capsys)
    assert code == 2
    assert "line 3" in err


def test_fit_missing_file(tmp_path, capsys):
    code, _, err = run(["fit", tmp_path / "nope.csv"], capsys)
    assert code == 2


def test_fit_non_convergence_exit_code(tmp_path, capsys):
    rng = np.random.default_rng(0)
    src = write(tmp_path / "d.csv", "x\n" + "\n".join(repr(float(v)) for v in rng.normal(size=60)))
    code, _, err = run(["fit", src, "--variant", "2", "--max-outer", "1"], capsys)
    assert code == 3
    assert "numerical failure" in err


def test_eval_round_trip(tmp_path, capsys):
    rng = np.random.default_rng(1)
    src = write(tmp_path / "d.csv", "x\n" + "\n".join(repr(float(v)) for v in rng.gumbel(size=40)))
    fit_path = tmp_path / "fit.json"
    assert run(["fit", src, "-o", fit_path], capsys)[0] == 0
    art = load_artifact(fit_path)
    x, psi = art["_x"], art["_psi"]
    for xi, pi in zip(x.tolist(), psi.tolist()):
        code, out, _ = run(["eval", fit_path, f"--grid={xi!r}:{xi!r}:1", "--what", "density"], capsys)
        assert code == 0
        rows = [line.split(",") for line in out.strip().splitlines()]
        assert len(rows) == 2
        assert float(rows[0][1]) == pytest.approx(math.exp(pi), rel=1e-12, abs=0)


def test_eval_examples(tmp_path, two_point, capsys):
    fit_path = tmp_path / "fit.json"
    run(["fit", two_point, "-o", fit_path], capsys)
    code, out, _ = run(["eval", fit_path, "--grid", "0:1:4", "--what", "cdf"], capsys)
    assert code == 0
    rows = [tuple(map(float, line.split(","))) for line in out.strip().splitlines()]
    assert len(rows) == 5
    assert rows[1] == (0.25, pytest.approx(0.25, abs=1e-10))
    code, out, _ = run(["eval", fit_path, "--grid=-1:2:3", "--what", "density"], capsys)
    vals = [float(line.split(",")[1]) for line in out.strip().splitlines()]
    assert vals[0] == 0.0 and vals[-1] == 0.0
    code, out, _ = run(["eval", fit_path, "--grid", "1:1:1", "--what", "logdensity", "--header"], capsys)
    lines = out.strip().splitlines()
    assert lines[0] == "x,logdensity"
    assert float(lines[1].split(",")[1]) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("spec", ["1:2", "a:b:c", "2:1:3", "0:1:0"])
def test_bad_grid(spec):
    with pytest.raises(DataError):
        parse_grid(spec)


def test_eval_bad_grid_exit(tmp_path, two_point, capsys):
    fit_path = tmp_path / "fit.json"
    run(["fit", two_point, "-o", fit_path], capsys)
    assert run(["eval", fit_path, "--grid", "0:1"], capsys)[0] == 2


def test_unknown_schema_rejected(tmp_path, two_point, capsys):
    fit_path = tmp_path / "fit.json"
    run(["fit", two_point, "-o", fit_path], capsys)
    art = json.loads(fit_path.read_text())
    art["schema_version"] = "99"
    fit_path.write_text(json.dumps(art))
    code, _, err = run(["eval", fit_path, "--grid", "0:1:2"], capsys)
    assert code == 2
    assert "schema_version" in err


def test_diagnose(tmp_path, two_point, capsys):
    fit_path = tmp_path / "fit.json"
    run(["fit", two_point, "-o", fit_path], capsys)
    code, out, _ = run(["diagnose", fit_path, two_point], capsys)
    assert code == 0
    values = {line.split(",")[0]: float(line.split(",")[1]) for line in out.strip().splitlines()[1:]}
    assert all(abs(v) < 1e-8 for v in values.values())

    art = json.loads(fit_path.read_text())
    art["full_psi"][0][1] += 0.1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(art))
    code, out, _ = run(["diagnose", bad, two_point], capsys)
    assert code == 1


def test_diagnose_concave_fit_passes(tmp_path, capsys):
    rng = np.random.default_rng(2)
    src = write(tmp_path / "d.csv", "x\n" + "\n".join(repr(float(v)) for v in rng.normal(size=80)))
    fit_path = tmp_path / "fit.json"
    run(["fit", src, "-o", fit_path], capsys)
    code, out, _ = run(["diagnose", fit_path, src], capsys)
    assert code == 0
    rows = {line.split(",")[0]: line.split(",") for line in out.strip().splitlines()[1:]}
    # interval residuals are reported but not required to vanish at a constrained fit
    assert rows["interval_1"][2] == "0"
    assert run(["diagnose", fit_path, src, "--all-residuals"], capsys)[0] == 1


def test_diagnose_mismatched_data(tmp_path, two_point, capsys):
    fit_path = tmp_path / "fit.json"
    run(["fit", two_point, "-o", fit_path], capsys)
    other = write(tmp_path / "o.csv", "x\n0\n2\n")
    assert run(["diagnose", fit_path, other], capsys)[0] == 2


def test_simulate_deterministic(capsys):
    a = run(["simulate", "--dist", "gumbel", "--n", "25", "--seed", "1"], capsys)
    b = run(["simulate", "--dist", "gumbel", "--n", "25", "--seed", "1"], capsys)
    assert a[0] == 0 and a[1] == b[1]
    assert len(a[1].strip().splitlines()) == 26
    c = run(["simulate", "--dist", "gumbel", "--n", "25", "--seed", "2"], capsys)
    assert c[1] != a[1]


def test_simulate_usage_errors(capsys):
    assert run(["simulate", "--dist", "normal", "--n", "1", "--seed", "1"], capsys)[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--dist", "cauchy", "--n", "5", "--seed", "1"])
    assert info.value.code == 2


def test_exponential_slope(tmp_path, capsys):
    code, out, _ = run(["simulate", "--dist", "exponential", "--n", "10000", "--seed", "7"], capsys)
    src = write(tmp_path / "e.csv", out)
    fit_path = tmp_path / "fit.json"
    assert run(["fit", src, "-o", fit_path], capsys)[0] == 0
    art = load_artifact(fit_path)
    x, psi = art["_x"], art["_psi"]
    bulk = (x > 0.2) & (x < 3.0)
    slope = np.polyfit(x[bulk], psi[bulk], 1)[0]
    assert abs(slope + 1.0) <= 0.1


def test_fit_censored(tmp_path, capsys):
    src = write(tmp_path / "c.csv", "left,right\n0,1\n1,2\n0,1\n1,2\n")
    out = tmp_path / "c.json"
    code, _, _ = run(["fit-censored", src, "-o", out], capsys)
    assert code == 0
    trace = (tmp_path / "c.loglik.csv").read_text().strip().splitlines()
    assert trace[0] == "iteration,loglik"
    vals = [float(line.split(",")[1]) for line in trace[1:]]
    assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))
    art = json.loads(out.read_text())
    assert art["kind"] == "fit-censored"
    assert art["em"]["loglik_trace"] == vals


def test_fit_censored_right_censored_and_inf_literal(tmp_path, capsys):
    src = write(tmp_path / "c.csv", "left,right\n0.5,1\n1,1\n2,inf\n1.5,2.5\n3,3\n")
    out = tmp_path / "c.json"
    code, _, err = run(["fit-censored", src, "-o", out, "--loglik-trace", tmp_path / "t.csv"], capsys)
    assert code == 0
    assert "truncated" in err
    assert (tmp_path / "t.csv").exists()


def test_fit_censored_all_exact_matches_fit(tmp_path, capsys):
    rng = np.random.default_rng(3)
    xs = rng.gamma(2.0, size=30)
    exact = write(tmp_path / "e.csv", "left,right\n" + "\n".join(f"{float(v)!r},{float(v)!r}" for v in xs))
    plain = write(tmp_path / "p.csv", "x\n" + "\n".join(repr(float(v)) for v in xs))
    run(["fit-censored", exact, "-o", tmp_path / "a.json"], capsys)
    run(["fit", plain, "-o", tmp_path / "b.json"], capsys)
    a = load_artifact(tmp_path / "a.json")
    b = load_artifact(tmp_path / "b.json")
    np.testing.assert_array_equal(a["_x"], b["_x"])
    np.testing.assert_allclose(a["_psi"], b["_psi"], atol=1e-8)


def test_fit_censored_right_only(tmp_path, capsys):
    src = write(tmp_path / "c.csv", "left,right\n1,inf\n2,inf\n")
    code, _, err = run(["fit-censored", src, "-o", tmp_path / "c.json"], capsys)
    assert code == 2
    assert "right-censored" in err


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "logconcave", "simulate", "--dist", "normal", "--n", "3", "--seed", "0"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "x"
