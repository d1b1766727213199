import unittest

from avar.core.errors import AvarInputError
from avar.core.catalog import CATALOG, PROVENANCES, catalog_entry, catalog_operator
from avar.core.operator import check_ellipticity, check_cancelling
from avar.core.polynomial import kernel_basis


class TestCatalog(unittest.TestCase):
    def test_lookup(self):
        entry = catalog_entry('gradient2d.json')
        assert entry.name == 'gradient2d'
        assert catalog_operator('symgrad3d').dim_space == 3
        with self.assertRaises(AvarInputError):
            catalog_entry('curl3d')

    def test_provenance(self):
        for entry in CATALOG.values():
            assert entry.expected, entry.name
            for key, expectation in entry.expected.items():
                assert expectation['provenance'] in PROVENANCES, (entry.name, key)
            data = entry.to_dict()
            assert data['operator']['name'] == entry.operator.name
        assert catalog_entry('cauchy_riemann').expected_value('kernel_dimension') is None

    def test_ellipticity(self):
        for entry in CATALOG.values():
            for field in ['real', 'complex']:
                expected = entry.expected_value(field)
                cert = check_ellipticity(entry.operator, field)
                assert cert.verdict == expected, (entry.name, field, cert.verdict)

    def test_kernel_dimension(self):
        for entry in CATALOG.values():
            expected = entry.expected_value('kernel_dimension')
            if expected is None:
                continue
            kernel = kernel_basis(entry.operator, degree_cap=4)
            assert kernel.stabilized, entry.name
            assert kernel.dimension == expected, (entry.name, kernel.dimensions)

    def test_cancelling(self):
        for entry in CATALOG.values():
            expected = entry.expected_value('cancelling')
            if expected is None:
                continue
            cert = check_cancelling(entry.operator)
            assert cert.is_cancelling == expected, (entry.name, cert.residual_dim)


if __name__ == '__main__':  # pragma: no cover
    unittest.main()
