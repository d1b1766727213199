import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from avar.core.errors import VerificationError
from avar.core.catalog import CATALOG
from avar.cli.cli import main, COMMANDS

QUIET = ['--quiet']


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._dirname = tempfile.TemporaryDirectory()
        self.dirname = self._dirname.name

    def tearDown(self):
        self._dirname.cleanup()

    def run_cli(self, argv: list[str], expected_code: int=0, name: str='out.json') -> str:
        out = os.path.join(self.dirname, name)
        code = main(argv + QUIET + ['--out', out])
        assert code == expected_code, (argv, code)
        if not os.path.exists(out):
            return ''
        with open(out, 'r') as out_file:
            return out_file.read()

    def run_json(self, argv: list[str], expected_code: int=0) -> dict:
        return json.loads(self.run_cli(argv, expected_code=expected_code))


class TestOperatorCommands(CliTestCase):
    def test_check_ellipticity(self):
        data = self.run_json(['check-ellipticity', '--operator', 'gradient2d', '--samples', '256'])
        assert data['verdict'] == 'elliptic', data
        data = self.run_json(['check-ellipticity', '--operator', 'cauchy_riemann',
                              '--field', 'complex'])
        assert data['verdict'] == 'not_elliptic', data
        assert data['witness']['xi'] is not None

    def test_operator_file(self):
        filename = os.path.join(self.dirname, 'op.json')
        with open(filename, 'w') as op_file:
            json.dump(CATALOG['symgrad2d'].operator.to_dict(), op_file)
        data = self.run_json(['kernel', '--operator', filename, '--max-degree', '3'])
        assert data['dimension'] == 3, data
        assert data['stabilized'] is True

    def test_inline_operator(self):
        spec = json.dumps({'name': 'line', 'matrices': [[[1.0]]]})
        data = self.run_json(['cancelling', '--operator', spec])
        assert data['verdict'] == 'not_cancelling', data

    def test_deterministic(self):
        argv = ['check-ellipticity', '--operator', 'dx_only', '--seed', '7']
        text1 = self.run_cli(argv, name='a.json')
        text2 = self.run_cli(argv, name='b.json')
        assert text1 == text2

    def test_catalog(self):
        data = self.run_json(['catalog'])
        assert len(data['operators']) == len(CATALOG)


class TestDomainCommands(CliTestCase):
    def test_projection(self):
        data = self.run_json(['projection', '--operator', 'gradient2d', '--domain', 'unit_square',
                              '--h', '0.125', '--samples', '100'])
        assert data['l'] == 1
        assert np.allclose(data['total_mass'], 1.0)
        assert np.allclose(data['linf_l1_constant'], 1.0)
        assert data['constraint']['mode'] == 'subset'

    def test_projection_trace(self):
        data = self.run_json(['projection', '--operator', 'gradient2d', '--domain', 'unit_square',
                              '--h', '0.125', '--mode', 'trace', '--gamma', 'left',
                              '--samples', '100'])
        assert data['measure'] == 'surface'
        assert np.allclose(data['total_mass'], 1.0)

    def test_poincare_interval(self):
        data = self.run_json(['poincare', '--operator', 'gradient1d', '--domain', 'interval',
                              '--h', '0.015625'])
        assert abs(data['value'] - 1. / np.pi) * np.pi < 0.01, data['value']
        assert data['method'] == 'eigenproblem'

    def test_poincare_domain_spec(self):
        spec = json.dumps({'shape': 'box', 'lo': [0.0], 'hi': [1.0], 'h': 0.015625})
        data = self.run_json(['poincare', '--operator', 'gradient1d', '--domain', spec,
                              '--mode', 'trace', '--gamma', 'left'])
        assert abs(data['value'] - 2. / np.pi) * np.pi / 2. < 0.02, data['value']
        assert data['constraint']['side'] == 'inside'

    def test_poincare_both_sides(self):
        omega = json.dumps({'shape': 'halfspace', 'normal': [1.0, 0.0], 'offset': 0.5})
        data = self.run_json(['poincare', '--operator', 'gradient2d', '--domain', 'unit_square',
                              '--h', '0.0625', '--mode', 'trace', '--omega', omega,
                              '--side', 'both'])
        assert set(data) == {'inside', 'outside'}, data
        assert np.allclose(data['inside']['value'], data['outside']['value'])

    def test_poincare_l1(self):
        data = self.run_json(['poincare', '--operator', 'gradient1d', '--domain', 'interval',
                              '--h', '0.03125', '--p', '1', '--samples', '20'])
        assert data['method'] == 'sample_max'
        assert data['sample_count'] == 20

    def test_verify(self):
        data = self.run_json(['verify', '--operator', 'gradient2d', '--domain', 'unit_square',
                              '--h', '0.0625', '--samples', '20'])
        assert data['passed'] is True, data
        assert data['violations'] == 0
        assert data['seed'] == 43

    def test_counterexample_csv(self):
        text = self.run_cli(['counterexample', '--operator', 'dx_only', '--h', '0.0625',
                             '--format', 'csv'], name='out.csv')
        lines = text.strip().split('\n')
        assert lines[0].split(',')[:3] == ['h', 'variation', 'interior_variation'], lines[0]
        assert len(lines) == 3, lines

    def test_scaling(self):
        data = self.run_json(['scaling', '--operator', 'gradient2d', '--h', '0.125',
                              '--radii', '0.5,1'])
        assert data['cells_per_radius'] == 8, data
        assert [row['r'] for row in data['rows']] == [0.5, 1.0], data['rows']
        assert np.allclose([row['h'] for row in data['rows']], [0.0625, 0.125])
        assert data['passed'] is True


class TestErrors(CliTestCase):
    def test_usage(self):
        assert main(['poincare'] + QUIET) == 1
        assert main(['bogus-command']) == 1

    def test_bad_input(self):
        self.run_cli(['kernel', '--operator', 'curl3d'], expected_code=1)
        self.run_cli(['kernel', '--operator', '{"matrices": '], expected_code=1)
        self.run_cli(['poincare', '--operator', 'gradient2d', '--domain', 'torus'], expected_code=1)
        self.run_cli(['poincare', '--operator', 'gradient2d', '--domain', 'unit_square',
                      '--h', '0.25', '--p', 'two'], expected_code=1)
        self.run_cli(['poincare', '--operator', 'gradient2d', '--domain', 'unit_square',
                      '--h', '0.25', '--mode', 'volume'], expected_code=1)
        self.run_cli(['kernel', '--operator', 'gradient2d', '--format', 'csv'], expected_code=1)
        self.run_cli(['kernel', '--operator', 'gradient2d', '--format', 'xml'], expected_code=1)
        self.run_cli(['scaling', '--operator', 'gradient2d', '--radii', '0.5,x'], expected_code=1)
        self.run_cli(['scaling', '--operator', 'gradient2d', '--radii', '0,1'], expected_code=1)
        self.run_cli(['scaling', '--operator', 'gradient2d', '--h', '2'], expected_code=1)

    def test_precondition(self):
        self.run_cli(['sobolev', '--operator', 'cauchy_riemann', '--h', '0.125'], expected_code=1)
        self.run_cli(['counterexample', '--operator', 'gradient2d', '--h', '0.25'],
                     expected_code=1)

    def test_degenerate_constraint(self):
        subset = json.dumps({'shape': 'ball', 'center': [0.125, 0.125], 'radius': 0.01})
        self.run_cli(['poincare', '--operator', 'symgrad2d', '--domain', 'unit_square',
                      '--h', '0.25', '--subset', subset], expected_code=1)

    def test_suite(self):
        self.run_cli(['suite', ''], expected_code=1)
        self.run_cli(['suite', 'bogus'], expected_code=1)

    def test_verification_failure(self):
        """the report is still written; the exit code is 2"""
        def failing(args, log):
            raise VerificationError('1 violations', {'passed': False, 'violations': 1})

        with mock.patch.dict(COMMANDS, {'verify': failing}):
            data = self.run_json(['verify', '--operator', 'gradient2d', '--domain', 'unit_square'],
                                 expected_code=2)
        assert data == {'passed': False, 'violations': 1}, data


class TestSuites(CliTestCase):
    def test_counterexample(self):
        argv = ['suite', 'counterexample']
        text1 = self.run_cli(argv, name='a.json')
        text2 = self.run_cli(argv, name='b.json')
        assert text1 == text2
        data = json.loads(text1)
        assert data['passed'] is True, data
        assert data['ncriteria'] == 4
        assert all(criterion['suite'] == 'counterexample' for criterion in data['criteria'])

    def test_verify(self):
        data = self.run_json(['suite', 'verify'])
        assert data['npassed'] == data['ncriteria'] == 5, data
        names = [criterion['name'] for criterion in data['criteria']]
        assert 'gradient1d.l1_upper' in names, names
        l1_upper = data['criteria'][names.index('gradient1d.l1_upper')]
        assert l1_upper['expected'] == 0.5, l1_upper

    def test_catalog(self):
        """every catalog operator, gradient1d included, with the default sample counts"""
        data = self.run_json(['suite', 'catalog'])
        assert data['passed'] is True, [c for c in data['criteria'] if not c['passed']]
        names = [criterion['name'] for criterion in data['criteria']]
        for name in CATALOG:
            assert f'{name}.real' in names and f'{name}.complex' in names, (name, names)
        assert 'cauchy_riemann.witness' in names

    def test_convergence(self):
        data = self.run_json(['suite', 'convergence'])
        assert data['passed'] is True, data
        names = [criterion['name'] for criterion in data['criteria']]
        assert 'square_subset.error' in names, names
        square = data['criteria'][names.index('square_subset.error')]
        assert np.allclose(square['expected'], 1. / np.pi)

    def test_scaling(self):
        data = self.run_json(['suite', 'scaling'])
        assert data['passed'] is True, data
        assert data['ncriteria'] == 2

    def test_sobolev(self):
        data = self.run_json(['suite', 'sobolev'])
        assert data['passed'] is True, [c for c in data['criteria'] if not c['passed']]
        names = [criterion['name'] for criterion in data['criteria']]
        assert 'gradient1d.not_cancelling' in names, names
        disk = data['criteria'][names.index('gradient2d.disk_ratio')]
        assert np.allclose(disk['expected'], np.sqrt(np.pi) / (2. * np.pi))
        assert abs(disk['measured'] - disk['expected']) < 0.03 * disk['expected'], disk


if __name__ == '__main__':  # pragma: no cover
    unittest.main()
