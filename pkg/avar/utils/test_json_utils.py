import json
import unittest

import numpy as np
import pandas as pd

from avar.utils.json_utils import to_jsonable, dumps_report, spec_hash, table_to_csv


class TestJsonUtils(unittest.TestCase):
    def test_to_jsonable(self):
        data = to_jsonable({'a': np.arange(3), 'b': np.float64(0.5), 'c': 1 + 2j,
                            'd': np.inf, 'e': (np.int64(2), None)})
        assert data == {'a': [0, 1, 2], 'b': 0.5, 'c': [1.0, 2.0], 'd': None, 'e': [2, None]}, data
        with self.assertRaises(TypeError):
            to_jsonable(object())

    def test_dumps_sorted(self):
        text = dumps_report({'b': 1, 'a': [np.float64(0.1)]})
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {'a': [0.1], 'b': 1}
        assert text.endswith('\n')

    def test_float_digits(self):
        text = dumps_report({'a': 0.1, 'b': 2.0, 'c': 1e20, 'd': [np.float64(1. / 3.)], 'e': True})
        assert '"a": 0.10000000000000001' in text, text
        assert '"b": 2.0' in text, text
        assert '"c": 1e+20' in text, text
        assert '0.33333333333333331' in text, text
        assert '"e": true' in text, text
        data = json.loads(text)
        assert data['a'] == 0.1 and data['d'][0] == 1. / 3.
        assert isinstance(data['b'], float)

    def test_spec_hash(self):
        assert spec_hash({'h': 0.5, 'shape': 'box'}) == spec_hash({'shape': 'box', 'h': 0.5})
        assert spec_hash({'h': 0.5}) != spec_hash({'h': 0.25})

    def test_csv(self):
        table = pd.DataFrame([{'h': 0.5, 'C': 1. / 3.}])
        text = table_to_csv(table)
        lines = text.strip().split('\n')
        assert lines[0] == 'h,C', lines
        assert float(lines[1].split(',')[1]) == 1. / 3.


if __name__ == '__main__':  # pragma: no cover
    unittest.main()
