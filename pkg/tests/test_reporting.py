import csv
import io
import json

import numpy as np
import pytest

from bubblelab.errors import BubbleLabError, ConfigError
from bubblelab.reporting import BRANCH_COLUMNS, CONSTANT_KEYS, emit_report, jsonable, to_csv, to_json, to_text


def _constants():
    return {"type": "constants", "result": {"n": 5, "c0": 7.621991222319221, "Sn": 844.3602647627389,
                                            "cbar1": 1.0, "cbar2": 2.0, "cbar3": 3.0, "cbar5": 5.0,
                                            "gamma": 0.1 + 0.2, "rho": np.float64(1 / 3)}}


def test_constants_json_keys_and_round_trip():
    res = _constants()
    text = to_json(res)
    back = json.loads(text)
    assert set(CONSTANT_KEYS) <= set(back["result"])
    assert back == jsonable(res)
    assert back["result"]["gamma"] == 0.1 + 0.2
    assert to_json(back) == text


def test_jsonable_numpy_values():
    out = jsonable({"a": np.arange(3), "b": np.bool_(True), "c": np.int64(4), 1: (np.float32(0.5),)})
    assert out == {"a": [0, 1, 2], "b": True, "c": 4, "1": [0.5]}
    json.dumps(out)


def test_expansion_csv_one_term_per_row():
    res = {"type": "expansion", "result": {"terms": {"S_n": 1.5, "H_self": -0.25, "gradV": [1.0, 2.0]},
                                           "envelope_terms": {"R": 0.01}, "envelope": 0.01,
                                           "numeric_lhs": 1.26, "discrepancy": 0.01}}
    rows = list(csv.reader(io.StringIO(to_csv(res))))
    assert rows[0] == ["section", "term", "value"]
    terms = [r for r in rows[1:] if r[0] == "term"]
    assert [r[1] for r in terms] == ["H_self", "S_n", "gradV"]
    assert terms[2][2] == "1.0 2.0"
    assert float(terms[1][2]) == 1.5


def test_branch_csv_column_order():
    rows = [{"eps": 0.1, "lambda_fit": 5.5, "alpha_fit": 1.0, "peak": 130.0, "residual": 0.04,
             "lambda2eps": 3.02}, {"eps": 0.0, "lambda_fit": None, "alpha_fit": None, "peak": 1.0,
                                   "residual": None, "lambda2eps": None}]
    text = to_csv({"type": "branch", "result": {"rows": rows}})
    lines = text.splitlines()
    assert lines[0] == ",".join(BRANCH_COLUMNS)
    assert lines[0] == "eps,lambda_fit,alpha_fit,peak,residual,lambda2eps"
    assert lines[2] == "0.0,,,1.0,,"


def test_text_table_aligned():
    text = to_text(_constants())
    lines = text.splitlines()
    assert lines[0].split() == ["name", "value"]
    assert set(lines[1].replace(" ", "")) == {"-"}


def test_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    emit_report(_constants(), "json", str(a))
    emit_report(_constants(), "json", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_unwritable_path_and_bad_format(tmp_path):
    with pytest.raises(BubbleLabError, match="cannot write"):
        emit_report(_constants(), "json", str(tmp_path / "missing" / "x.json"))
    with pytest.raises(ConfigError):
        emit_report(_constants(), "xml")
