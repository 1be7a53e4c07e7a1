import math

import pytest

from orrs_tools.data.exceptions import InvalidRecordException
from orrs_tools.data.io import read_orrs, read_im, write_orrs, write_im

from test_orrs_tools.test_data.conftest import make_orrs, make_im


@pytest.mark.parametrize("filename", ["orrs.jsonl", "orrs.csv"])
def test_orrs_files(tmp_path, filename):
    records = [
        make_orrs(plate="0{0}".format(i), rs_co=co, site_id="SITE_B") for i, co in enumerate((0.001, 0.02, 0.5))
    ]
    path = str(tmp_path / filename)
    write_orrs(records, path)
    assert read_orrs(path) == records


def test_im_csv(tmp_path):
    records = [make_im(vin="V{0}".format(i), plate="00{0}".format(i), im_no=0.25 * i) for i in range(3)]
    path = str(tmp_path / "im.csv")
    write_im(records, path)
    assert read_im(path) == records


def test_missing_columns(tmp_path):
    path = tmp_path / "orrs.csv"
    path.write_text("plate,timestamp\nA,1.0\n")
    with pytest.raises(InvalidRecordException) as exc_info:
        read_orrs(str(path))
    assert "rs_co" in str(exc_info.value)


def test_invalid_row_rejected(tmp_path):
    path = str(tmp_path / "orrs.csv")
    write_orrs([make_orrs()], path)
    text = open(path).read().replace(",40.0,", ",-40.0,")
    with open(path, "w") as f:
        f.write(text)
    with pytest.raises(InvalidRecordException):
        read_orrs(path)


@pytest.mark.parametrize("filename", ["orrs.jsonl", "orrs.csv"])
def test_awkward_floats_survive_exactly(tmp_path, filename):
    values = (0.1 + 0.2, 1.0 / 3.0, math.pi * 2 ** -40)
    records = [make_orrs(plate="P{0}".format(i), rs_hc=v, temperature=20.0 + v) for i, v in enumerate(values)]
    path = str(tmp_path / filename)
    write_orrs(records, path)
    loaded = read_orrs(path)
    assert [r.rs_hc for r in loaded] == list(values)
    assert loaded == records


def test_json_lines_rows_are_canonical(tmp_path):
    path = tmp_path / "orrs.jsonl"
    write_orrs([make_orrs(rs_hc=0.1 + 0.2)], str(path))
    line = path.read_text().splitlines()[0]
    assert '"rs_hc":0.30000000000000004' in line
    assert line.index('"acceleration"') < line.index('"wind_speed"')
