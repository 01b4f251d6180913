"""
JSON and CSV report output
"""

import numpy as np
import orjson

from utils.report_writer import ReportWriter, dumps_report, expand_complex_columns, to_jsonable


def test_to_jsonable_converts_numpy_and_complex():
    value = {
        'z': 1 - 2j,
        'arr': np.array([1.5, 2.5]),
        'flag': np.bool_(True),
        'count': np.int64(3),
        'x': np.float64(0.25),
        1: (np.complex128(3j),),
    }
    assert to_jsonable(value) == {
        'z': [1.0, -2.0],
        'arr': [1.5, 2.5],
        'flag': True,
        'count': 3,
        'x': 0.25,
        '1': [[0.0, 3.0]],
    }


def test_dumps_report_is_newline_terminated():
    data = dumps_report({'b': 1, 'a': [0.5, float('nan')]})
    assert data.endswith(b'\n')
    assert orjson.loads(data) == {'b': 1, 'a': [0.5, None]}
    assert dumps_report({'b': 1, 'a': [0.5, float('nan')]}) == data


def test_expand_complex_columns():
    rows = [{'re': 1.0, 'z': 2 + 3j, 'label': 'x'}, {'re': 0.1, 'z': -1j, 'label': 'y'}]
    header, flat = expand_complex_columns(rows, ('re', 'z', 'label'))
    assert header == ['re', 'z_re', 'z_im', 'label']
    assert flat[0] == ['1.0', '2.0', '3.0', 'x']
    assert flat[1] == ['0.1', '0.0', '-1.0', 'y']


def test_floats_keep_full_precision():
    _, flat = expand_complex_columns([{'v': 1 / 3}], ('v',))
    assert float(flat[0][0]) == 1 / 3


def test_csv_file_uses_lf(tmp_path):
    path = tmp_path / 'out' / 'table.csv'
    with ReportWriter(str(path)) as writer:
        writer.write_csv([{'a1': 0.0, 'a2': -0.5}], ('a1', 'a2'))
    assert path.read_bytes() == b'a1,a2\n0.0,-0.5\n'
    assert writer.bytes_written == len(path.read_bytes())


def test_header_only_csv(tmp_path):
    path = tmp_path / 'empty.csv'
    with ReportWriter(str(path)) as writer:
        writer.write_csv([], ('re', 'im', 'residual'))
    assert path.read_text() == 're,im,residual\n'


def test_json_to_stdout(capsysbinary):
    with ReportWriter() as writer:
        writer.write_json({'version': '1'})
    out = capsysbinary.readouterr().out
    assert orjson.loads(out) == {'version': '1'}


def test_nothing_written_on_error(tmp_path):
    path = tmp_path / 'partial.json'
    try:
        with ReportWriter(str(path)) as writer:
            writer.write_json({'a': 1})
            raise RuntimeError('boom')
    except RuntimeError:
        pass
    assert not path.exists()
