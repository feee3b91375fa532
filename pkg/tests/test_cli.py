import json
import shutil

import pytest

from sosconvex.cli import main
from sosconvex.convexcert import EXAMPLE_P, MOTZKIN_FORM
from sosconvex.reproduce import default_data_dir


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_check_sos_positive(tmp_path, capsys):
    src = write(tmp_path, "sq.txt", "x1^2 + x2^2")
    assert main(["check-sos", src, "--json", str(tmp_path / "r.json")]) == 0
    assert "PASS" in capsys.readouterr().out
    cert = tmp_path / "sq.cert.json"
    assert json.loads((tmp_path / "r.json").read_text())["verdict"] == "sos"
    assert main(["verify", str(cert)]) == 0


def test_check_sos_motzkin(tmp_path, capsys):
    src = write(tmp_path, "m.txt", MOTZKIN_FORM)
    assert main(["check-sos", src]) == 10
    assert "NOT SOS" in capsys.readouterr().out
    assert main(["verify", str(tmp_path / "m.sep.json")]) == 0
    assert main(["check-sos", src, "--r", "1", "--out", str(tmp_path / "m1.json")]) == 0


def test_tampered_certificate_names_monomial(tmp_path, capsys):
    src = write(tmp_path, "sq.txt", "x1^2 + 2*x2^2")
    assert main(["check-sos", src]) == 0
    cert = tmp_path / "sq.cert.json"
    doc = json.loads(cert.read_text())
    doc["target"]["terms"][0]["coeff"] = "5"
    cert.write_text(json.dumps(doc))
    capsys.readouterr()
    assert main(["verify", str(cert)]) == 10
    assert "FAILS at monomial" in capsys.readouterr().out


def test_parse_error_exit_code(tmp_path, capsys):
    src = write(tmp_path, "bad.txt", "x1^2 +* x2")
    assert main(["check-sos", src]) == 1
    assert "parse error" in capsys.readouterr().err


def test_missing_input(tmp_path):
    assert main(["hessian", str(tmp_path / "nope.txt")]) == 1


def test_check_sos_convex(tmp_path):
    assert main(["check-sos-convex", write(tmp_path, "q.txt", "x1^4 + x2^4")]) == 0
    out = tmp_path / "certs"
    assert main(["check-sos-convex", write(tmp_path, "p.txt", EXAMPLE_P), "--out", str(out)]) == 10
    assert main(["verify", str(out / "separation.json")]) == 0
    assert main(["verify", str(out / "convexity.json")]) == 0
    assert main(["check-sos-convex", write(tmp_path, "s.txt", "x1^2 - x2^2")]) == 11


def test_hessian_and_project(tmp_path, capsys):
    assert main(["hessian", write(tmp_path, "h.txt", "x1^3*x2")]) == 0
    out = capsys.readouterr().out
    assert "H[1,1] = 6*x1*x2" in out and "H[1,2] = 3*x1^2" in out
    side = tmp_path / "proj.json"
    assert main(["project", write(tmp_path, "m.txt", MOTZKIN_FORM), "--json", str(side)]) == 0
    assert json.loads(side.read_text())["distance"] > 1e-3
    assert main(["project", write(tmp_path, "n.txt", "x1^2 + 1")]) == 1


def test_search_bundle(tmp_path):
    out = tmp_path / "bundle"
    assert main(["search", "--out", str(out)]) == 0
    for name in ("candidate.txt", "gram_certificate.json", "separation_certificate.json", "transcript.txt"):
        assert (out / name).is_file()
    assert main(["verify", str(out / "separation_certificate.json")]) == 0
    assert main(["check-sos-convex", str(out / "candidate.txt"), "--r", "1"]) == 10


def test_search_infeasible_and_bad_config(tmp_path):
    cfg = write(tmp_path, "cfg.json", json.dumps({"dual_mu": [0] * 28}))
    assert main(["search", cfg, "--out", str(tmp_path / "b")]) == 12
    bad = write(tmp_path, "bad.json", json.dumps({"degree": 7}))
    assert main(["search", bad]) == 1


def test_reproduce_command(tmp_path, capsys):
    assert main(["reproduce-paper"]) == 0
    assert "11/11 checks passed" in capsys.readouterr().out
    for name in ("multiplier_certificate.json", "separation_certificate.json"):
        shutil.copytree(default_data_dir(), tmp_path / name)
        (tmp_path / name / name).unlink()
        assert main(["reproduce-paper", "--data-dir", str(tmp_path / name)]) == 4
        assert "missing fixture" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
