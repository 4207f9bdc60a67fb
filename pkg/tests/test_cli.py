import json
from fractions import Fraction
from unittest.mock import patch

import mpmath
import pytest

from sos_staircase.cli import main
from sos_staircase.cli.common import parse_epsilons, parse_range
from sos_staircase.exceptions import ConfigError
from sos_staircase.models import Enclosure, EnclosureRecord, Evidence, LoStatus, StaircasePoint


def _stderr_json(capsys) -> dict:
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def _cells(results):
    """Заглушка run_cells: фиксированный результат для каждой полезной нагрузки."""
    def fake(kind, payloads, jobs=1):
        return [results(i, payload) for i, payload in enumerate(payloads)]
    return fake


# --- 1. РАЗБОР АРГУМЕНТОВ ---

def test_parse_range():
    assert parse_range("1-3,5") == (1, 2, 3, 5)
    assert parse_range("4") == (4,)


def test_parse_range_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_range("1-x")


def test_parse_epsilons_is_exact():
    assert parse_epsilons("0.2, 1/10") == (Fraction(1, 5), Fraction(1, 10))


def test_invalid_tolerance_is_config_error(capsys):
    assert main(["table", "--gap-tol", "-1"]) == 4
    failure = _stderr_json(capsys)
    assert failure["status"] == "error"
    assert failure["error"] == "ConfigError"


# --- 2. TABLE ---

def test_table_csv(out_dir):
    target = out_dir / "table.csv"
    ok = _cells(lambda i, payload: {"status": "ok", "value": "-9/10"})
    with patch("sos_staircase.cli.table.run_cells", side_effect=ok) as run_cells:
        code = main(["table", "--orders", "1-2", "--log10-eps", "1", "--out", str(target)])
    assert code == 0
    assert run_cells.call_args.args[0] == "solve_order"
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,v1,v2"
    assert lines[1] == "1,-0.900000,-0.900000"
    assert lines[2].startswith("inf,")


def test_table_marks_failed_cells(out_dir):
    target = out_dir / "table.csv"
    mixed = _cells(lambda i, payload: {"status": "error", "reason": "breakdown"} if i == 0 else {"status": "ok", "value": "0"})
    with patch("sos_staircase.cli.table.run_cells", side_effect=mixed):
        code = main(["table", "--orders", "1", "--log10-eps", "1", "--out", str(target)])
    assert code == 2
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "1,NA"
    assert lines[2] == "inf,0"


def test_table_json(out_dir):
    target = out_dir / "table.json"
    ok = _cells(lambda i, payload: {"status": "ok", "value": "-1"})
    with patch("sos_staircase.cli.table.run_cells", side_effect=ok):
        main(["table", "--orders", "1", "--epsilon", "0", "--format", "json", "--out", str(target)])
    doc = json.loads(target.read_text(encoding="utf-8"))
    assert doc["orders"] == [1]
    assert doc["rows"][0]["epsilon"] == "0"
    assert doc["rows"][0]["values"] == ["-1"]


def test_table_dump_dir_writes_relaxations(out_dir):
    dump = out_dir / "sdp"
    ok = _cells(lambda i, payload: {"status": "ok", "value": "-1"})
    with patch("sos_staircase.cli.table.run_cells", side_effect=ok):
        code = main(["table", "--orders", "1-2", "--epsilon", "1/10", "--dump-dir", str(dump), "--out", str(out_dir / "t.csv")])
    assert code == 0
    assert sorted(p.name for p in dump.iterdir()) == [
        "epsilon1_10_d1.dat-s", "epsilon1_10_d1.json", "epsilon1_10_d2.dat-s", "epsilon1_10_d2.json",
    ]
    doc = json.loads((dump / "epsilon1_10_d2.json").read_text(encoding="utf-8"))
    assert doc["schema"] == "sdp-v1"
    assert doc["order"] == 2
    sdpa = (dump / "epsilon1_10_d2.dat-s").read_text(encoding="utf-8").splitlines()
    assert sdpa[1] == "5"


# --- 3. CERTIFY ---

def test_certify_elementary(out_dir):
    target = out_dir / "cert.json"
    assert main(["certify", "--epsilon", "0", "--orders", "1", "--out", str(target)]) == 0
    doc = json.loads(target.read_text(encoding="utf-8"))
    assert doc["status"] == "verified"
    assert doc["v"] == "-1"
    assert doc["rationalized"] is False


def test_certify_below_threshold_fails(capsys):
    code = main(["certify", "--epsilon", "0.1", "--orders", "2"])
    assert code == 3
    assert _stderr_json(capsys)["error"] == "CertificateInfeasible"


def test_certify_needs_epsilon(capsys):
    assert main(["certify", "--orders", "2"]) == 4
    assert _stderr_json(capsys)["error"] == "ConfigError"


# --- 4. PROJECT / BOUNDS / STAIRCASE ---

def test_project_needs_enough_directions():
    assert main(["project", "--directions", "4"]) == 4


def test_project_csv(out_dir):
    target = out_dir / "project.csv"
    ok = _cells(lambda i, payload: {"status": "ok", "values": ["1/2"] * len(payload["directions"])})
    with patch("sos_staircase.cli.project.run_cells", side_effect=ok):
        code = main(["project", "--orders", "1", "--directions", "8", "--out", str(target)])
    assert code == 0
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epsilon,d,k,u1,u2,support"
    assert len(lines) == 9
    assert lines[1] == "0.0030000000,1,0,1.00000000,0.00000000,0.50000000"


def test_bounds_with_cached_enclosure(session, out_dir):
    session.add(EnclosureRecord(
        d=2, lo="0.1339740", hi="0.1339750", lo_status="Infeasible", hi_status="Feasible", precision_bits=256,
    ))
    session.commit()
    target = out_dir / "bounds.json"
    assert main(["bounds", "--orders", "2,3", "--format", "json", "--out", str(target)]) == 0
    rows = json.loads(target.read_text(encoding="utf-8"))["bounds"]
    assert rows[0]["upper_bound"] == "0.25"
    assert rows[0]["sandwich_ok"] is True
    assert rows[0]["markov_coeff"].startswith("118.22")
    assert rows[1]["cached_hi"] is None


def test_staircase_writes_points(session, out_dir, capsys):
    target = out_dir / "staircase.csv"
    with mpmath.workprec(128):
        point = StaircasePoint(
            d=2,
            enclosure=Enclosure(
                lo=mpmath.mpf("0.1339740"), hi=mpmath.mpf("0.1339750"),
                evidence=Evidence(lo_status=LoStatus.INFEASIBLE, precisions=(128,), probes=20),
            ),
            lower_bound=Fraction(1, 237),
            upper_bound=Fraction(1, 4),
            precision_bits=128,
        )
        slope = mpmath.mpf("3.5")
    with patch("sos_staircase.cli.staircase.sweep", return_value=([point], slope)):
        code = main(["staircase", "--orders", "2", "--prec-bits", "128", "--out", str(target)])
    assert code == 0
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("d,lo,hi,lower_bound,upper_bound,log10_inv_hi")
    assert lines[1].startswith("2,0.133974,0.133975,")
    assert _stderr_json(capsys)["slope"].startswith("3.5")
