import csv
import json
import shutil
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from referencing import Registry, Resource

from ipmboot import cli, data_file

SCHEMAS = Path(cli.__file__).parent / "schemas"
GOLDEN = Path(__file__).parent / "golden"
SYNTH = str(data_file("synth13.csv"))
EXACT = str(data_file("synth13_exact.csv"))


def _registry():
    pairs = []
    for path in SCHEMAS.glob("*.schema.json"):
        pairs.append((path.name, Resource.from_contents(json.loads(path.read_text()))))
    return Registry().with_resources(pairs)


REGISTRY = _registry()


def validate(doc, name):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.Draft202012Validator(schema, registry=REGISTRY).validate(doc)


def load(path):
    return json.loads(Path(path).read_text())


def run(*argv):
    return cli.main([str(a) for a in argv])


def write_csv(path, rows, header=("y", "x1", "x2")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# -- design -----------------------------------------------------------------


def test_design_rotatable(tmp_path):
    assert run("design", "--k", 2, "--n0", 5, "--alpha", "rotatable", "--out", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "design.csv")))
    assert rows[0] == ["run", "type", "x1", "x2"]
    assert len(rows) == 14
    audit = load(tmp_path / "audit.json")
    assert audit["rotatable"] is True and audit["orthogonal"] is True
    validate(audit, "audit")
    validate(load(tmp_path / "design.json"), "design")


def test_design_with_ranges(tmp_path):
    assert run("design", "--k", 2, "--range", "2.5,8.5", "--out", tmp_path) == 0
    header = next(csv.reader(open(tmp_path / "design.csv")))
    assert header == ["run", "type", "x1", "x2", "natural_x1", "natural_x2"]
    assert (tmp_path / "design.csv").read_bytes().count(b"\r") == 0


@pytest.mark.parametrize("argv", [["--k", 0], ["--k", 2, "--alpha", -1], ["--k", 2, "--alpha", "wide"],
                                  ["--k", 2, "--n0", 0], ["--k", 13]])
def test_design_validation(tmp_path, capsys, argv):
    assert run("design", *argv, "--out", tmp_path) == 2
    assert "error" in capsys.readouterr().err


def test_design_k0_message(tmp_path, capsys):
    run("design", "--k", 0, "--out", tmp_path)
    assert "k" in capsys.readouterr().err


# -- simulate ---------------------------------------------------------------


def test_simulate_noiseless_roundtrip(tmp_path):
    theta = "0.35,-0.01,-0.22,0.20,0.05,0.01"
    out = tmp_path / "d.csv"
    assert run("simulate", "--theta", theta, "--range", "2.5,8.5", "--out", out) == 0
    truth = load(tmp_path / "d.truth.json")
    validate(truth, "truth")
    assert run("fit", "--data", out, "--out", tmp_path / "fit") == 0
    fit = load(tmp_path / "fit" / "fit.json")
    got = np.array([fit["theta"][k] for k in truth["theta"]])
    np.testing.assert_allclose(got, [float(v) for v in theta.split(",")], atol=1e-8)


def test_simulate_reproducible(tmp_path):
    args = ("simulate", "--theta", "0.35,-0.01,-0.22,0.20,0.05,0.01", "--range", "2.5,8.5",
            "--sigma", 0.05, "--seed", 42)
    assert run(*args, "--out", tmp_path / "a.csv") == 0
    assert run(*args, "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize("stem", ["synth13", "synth13_exact"])
def test_simulate_reproduces_packaged_dataset(tmp_path, stem):
    truth = load(data_file(f"{stem}.truth.json"))
    theta = ",".join(repr(v) for v in truth["theta"].values())
    assert run("simulate", "--theta", theta, "--range", "2.5,8.5", "--n0", 5,
               "--sigma", truth["sigma"], "--seed", truth["seed"], "--out", tmp_path / "s.csv") == 0
    assert (tmp_path / "s.csv").read_bytes() == Path(data_file(f"{stem}.csv")).read_bytes()


def test_simulate_phi_guard(tmp_path, capsys):
    # phi = 1 - 4/x1 vanishes or goes negative for small x1
    assert run("simulate", "--theta", "1,-4,0,0,0,0", "--range", "2.5,8.5", "--out", tmp_path / "x.csv") == 2
    assert "design run" in capsys.readouterr().err


def test_simulate_validation(tmp_path):
    base = ("simulate", "--range", "2.5,8.5", "--out", tmp_path / "x.csv")
    assert run(*base, "--theta", "1,2") == 2
    assert run(*base, "--theta", "1,0,0,0,0,0", "--sigma", -1) == 2
    assert run("simulate", "--theta", "1,0,0,0,0,0", "--out", tmp_path / "x.csv") == 2


# -- fit --------------------------------------------------------------------


def test_fit_packaged_exact(tmp_path):
    assert run("fit", "--data", EXACT, "--out", tmp_path) == 0
    fit = load(tmp_path / "fit.json")
    validate(fit, "fit")
    truth = load(data_file("synth13_exact.truth.json"))
    for k, v in truth["theta"].items():
        assert abs(fit["theta"][k] - v) <= 1e-6
    assert fit["converged"] and fit["global_check"]["stable"]


def test_fit_packaged_noisy(tmp_path):
    assert run("fit", "--data", SYNTH, "--out", tmp_path) == 0
    fit = load(tmp_path / "fit.json")
    validate(fit, "fit")
    golden = load(GOLDEN / "synth13_fit.json")
    assert fit["iterations"] == golden["iterations"]
    for k, v in golden["theta"].items():
        assert fit["theta"][k] == pytest.approx(v, rel=1e-7, abs=1e-9)
    rows = list(csv.reader(open(tmp_path / "sse_trace.csv")))
    assert rows[0] == ["iter", "sse"] and len(rows) == len(fit["sse_trace"]) + 1


def test_fit_zero_x1(tmp_path, capsys):
    path = write_csv(tmp_path / "bad.csv", [[1, 1, 1]] * 3 + [[1, 0, 1]] + [[1, 2, 2]] * 5)
    assert run("fit", "--data", path, "--out", tmp_path / "o") == 2
    assert "row 4" in capsys.readouterr().err


def test_fit_too_few_rows(tmp_path, capsys):
    path = write_csv(tmp_path / "few.csv", [[1, 1, 1], [2, 2, 2], [3, 3, 1]])
    assert run("fit", "--data", path, "--out", tmp_path / "o") == 2
    assert "at least 6" in capsys.readouterr().err


def test_fit_bad_number(tmp_path, capsys):
    path = write_csv(tmp_path / "nan.csv", [[1, 1, 1], ["abc", 1, 1]])
    assert run("fit", "--data", path, "--out", tmp_path / "o") == 2
    assert "row 2: y is not a number" in capsys.readouterr().err


def test_fit_missing_file(tmp_path):
    assert run("fit", "--data", tmp_path / "nope.csv", "--out", tmp_path) == 2


def test_fit_not_converged(tmp_path):
    assert run("fit", "--data", SYNTH, "--out", tmp_path, "--max-iter", 1) == 4
    assert load(tmp_path / "fit.json")["converged"] is False


def test_fit_config_file(tmp_path):
    shutil.copy(SYNTH, tmp_path / "data.csv")
    cfg = {"model": "ipm2-second", "data_path": "data.csv", "output_dir": "out", "solver": {"max_iter": 50}}
    validate(cfg, "config")
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    assert run("fit", "--config", tmp_path / "run.json") == 0
    assert (tmp_path / "out" / "fit.json").is_file()
    # flags win over the config
    assert run("fit", "--config", tmp_path / "run.json", "--max-iter", 1) == 4


def test_fit_config_unknown_key(tmp_path):
    (tmp_path / "run.json").write_text(json.dumps({"data_path": SYNTH, "output_dir": str(tmp_path),
                                                   "solver": {"tolerance": 1}}))
    assert run("fit", "--config", tmp_path / "run.json") == 2


def test_fit_reduced_model(tmp_path):
    assert run("fit", "--data", EXACT, "--model", "ipm2-second-reduced", "--out", tmp_path) in (0, 3)
    assert list(load(tmp_path / "fit.json")["theta"]) == ["beta11", "beta01", "beta10", "beta20", "beta00"]


def test_unknown_model(tmp_path):
    assert run("fit", "--data", SYNTH, "--model", "ipm9", "--out", tmp_path) == 2


# -- bootstrap --------------------------------------------------------------


def bootstrap_args(out, *extra):
    return ("bootstrap", "--data", SYNTH, "--B", 1000, "--seed", 42, "--out", out, *extra)


def test_bootstrap_golden(tmp_path):
    assert run(*bootstrap_args(tmp_path)) == 0
    doc = load(tmp_path / "bootstrap.json")
    validate(doc, "bootstrap")
    golden = load(GOLDEN / "synth13_bootstrap.json")
    assert doc["B"] == 1000 and doc["dropped"] == golden["dropped"] and doc["seed"] == 42
    for key in ("estimate", "bootstrap_mean", "se"):
        for k, v in golden[key].items():
            assert doc[key][k] == pytest.approx(v, rel=1e-6, abs=1e-9)
    for key in ("ci_normal", "ci_percentile"):
        for k, v in golden[key].items():
            np.testing.assert_allclose(doc[key][k], v, rtol=1e-6, atol=1e-9)
    header = next(csv.reader(open(tmp_path / "theta_star.csv")))
    assert header == ["b", *doc["se"]]


def test_bootstrap_byte_identical(tmp_path):
    assert run(*bootstrap_args(tmp_path / "a", "--B", 200)) == 0
    assert run(*bootstrap_args(tmp_path / "b", "--B", 200)) == 0
    for name in ("bootstrap.json", "theta_star.csv", "fit.json", "sse_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bootstrap_threads_identical(tmp_path):
    assert run(*bootstrap_args(tmp_path / "a", "--B", 200, "--threads", 1)) == 0
    assert run(*bootstrap_args(tmp_path / "b", "--B", 200, "--threads", 4)) == 0
    assert (tmp_path / "a" / "theta_star.csv").read_bytes() == (tmp_path / "b" / "theta_star.csv").read_bytes()


def test_bootstrap_B0(tmp_path):
    assert run(*bootstrap_args(tmp_path, "--B", 0)) == 2


def test_bootstrap_excess_drop(tmp_path, capsys):
    # the main fit needs six iterations; at that cap a few replicates do not finish
    assert run(*bootstrap_args(tmp_path, "--B", 50, "--max-iter", 6, "--max-drop-frac", 0)) == 5
    assert "did not converge" in capsys.readouterr().err


def test_bootstrap_not_converged(tmp_path):
    assert run(*bootstrap_args(tmp_path, "--B", 50, "--max-iter", 2)) == 4


def test_bootstrap_plots(tmp_path):
    design = data_file("synth13.truth.json")
    assert run(*bootstrap_args(tmp_path, "--B", 50, "--plots", "--design", design)) == 0
    for name in ("qq.svg", "qq.csv", "residuals_x1.svg", "residuals_x2.svg", "residuals.csv",
                 "sse_trace.svg", "varfcn.svg", "varfcn.csv", "contour.csv"):
        assert (tmp_path / name).is_file(), name
    rows = list(csv.reader(open(tmp_path / "contour.csv")))
    assert rows[0] == ["x1", "x2", "scaled_variance"] and len(rows) == 41 * 41 + 1


def test_verbose_after_subcommand(tmp_path):
    assert run("design", "--k", 2, "--out", tmp_path, "-v") == 0


def test_help_exit_zero(capsys):
    assert run("--help") == 0
    assert "bootstrap" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "ipmboot", "design", "--k", "2", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr


def test_documented_config_validates():
    text = (Path(__file__).parents[1] / "docs" / "config.md").read_text()
    block = text.split("```json", 1)[1].split("```", 1)[0]
    validate(json.loads(block), "config")
