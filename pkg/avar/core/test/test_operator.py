import unittest

import numpy as np

from avar.core.errors import AvarInputError
from avar.core.catalog import (
    gradient, symmetric_gradient, cauchy_riemann, dx_only, divergence)
from avar.core.operator import (
    Operator, symbol, tensor_apply, min_singular_over_sphere, check_ellipticity,
    check_cancelling, EllipticityCertificate)


class TestSymbol(unittest.TestCase):
    def test_gradient_symbol(self):
        op = gradient(2)
        assert np.allclose(op.matrices[0], [[1.], [0.]]), op.matrices[0]
        assert np.allclose(op.matrices[1], [[0.], [1.]]), op.matrices[1]
        mat = symbol(op, [3., 4.])
        assert np.allclose(mat, [[3.], [4.]]), mat

    def test_zero_direction(self):
        for op in [gradient(2), symmetric_gradient(3), cauchy_riemann()]:
            mat = op.symbol(np.zeros(op.dim_space))
            assert mat.shape == (op.dim_to, op.dim_from), mat.shape
            assert np.all(mat == 0.0), mat

    def test_cauchy_riemann_complex(self):
        op = cauchy_riemann()
        mat = op.symbol(np.array([1., 1j]))
        expected = np.array([[1., -1j], [1j, 1.]])
        assert np.allclose(mat, expected), mat
        v = np.array([1., -1j])
        assert np.allclose(mat @ v, 0.0), mat @ v
        smin = np.linalg.svd(mat, compute_uv=False)[-1]
        assert smin < 1e-14, smin

    def test_dimension_mismatch(self):
        op = gradient(2)
        with self.assertRaises(AvarInputError):
            op.symbol([1., 2., 3.])
        with self.assertRaises(AvarInputError):
            op.tensor_apply([1., 2.], [1., 0.])

    def test_linearity(self):
        rng = np.random.default_rng(1)
        op = Operator(rng.standard_normal((3, 4, 2)), name='random')
        xi1, xi2 = rng.standard_normal((2, 3))
        lhs = op.symbol(2. * xi1 - 3. * xi2)
        rhs = 2. * op.symbol(xi1) - 3. * op.symbol(xi2)
        assert np.allclose(lhs, rhs), (lhs, rhs)
        xis = rng.standard_normal((5, 3))
        stacked = op.symbols(xis)
        for xi, mat in zip(xis, stacked):
            assert np.allclose(op.symbol(xi), mat)


class TestTensorApply(unittest.TestCase):
    def test_gradient(self):
        out = tensor_apply(gradient(2), [2.], [1., 1.])
        assert np.allclose(out, [2., 2.]), out

    def test_zero_vector(self):
        op = symmetric_gradient(2)
        out = op.tensor_apply(np.zeros(2), [0.3, -1.2])
        assert np.all(out == 0.0), out

    def test_symmetric_gradient(self):
        out = tensor_apply(symmetric_gradient(2), [1., 0.], [0., 1.])
        assert np.allclose(out, [0., 0.5, 0.]), out


class TestOperatorIO(unittest.TestCase):
    def test_bad_shapes(self):
        with self.assertRaises(AvarInputError):
            Operator(np.zeros((2, 3)))
        with self.assertRaises(AvarInputError):
            Operator([np.zeros((2, 2)), np.zeros((3, 2))])
        with self.assertRaises(AvarInputError):
            Operator([[[np.nan]]])

    def test_dict(self):
        op = symmetric_gradient(3)
        data = op.to_dict()
        assert data['d'] == 3 and data['N'] == 3 and data['k'] == 6, data
        op2 = Operator.from_dict(data)
        assert np.array_equal(op.matrices, op2.matrices)
        assert op2.name == 'symgrad3d', op2.name

        data['k'] = 5
        with self.assertRaises(AvarInputError):
            Operator.from_dict(data)
        with self.assertRaises(AvarInputError):
            Operator.from_dict({'name': 'empty'})

    def test_adjoint(self):
        op = symmetric_gradient(2)
        adjoint = op.adjoint_matrices
        assert adjoint.shape == (2, 2, 3), adjoint.shape
        assert np.allclose(adjoint[1], op.matrices[1].T)


class TestSphereMinimum(unittest.TestCase):
    def test_gradient(self):
        value, xi = min_singular_over_sphere(gradient(2), 'real', samples=256)
        assert np.allclose(value, 1.0), value
        assert np.allclose(np.linalg.norm(xi), 1.0), xi

    def test_dx_only(self):
        value, xi = min_singular_over_sphere(dx_only(), 'real', samples=256)
        assert value <= 1e-8, value
        assert np.allclose(np.abs(xi), [0., 1.], atol=1e-6), xi

    def test_cauchy_riemann_complex(self):
        value, xi = min_singular_over_sphere(cauchy_riemann(), 'complex', samples=1024)
        assert value <= 1e-8, value
        xi = xi / np.linalg.norm(xi)
        distance = min(abs(xi[1] - 1j * xi[0]), abs(xi[1] + 1j * xi[0]))
        assert distance < 1e-4, xi

    def test_attained(self):
        """the reported value is attained at the reported direction"""
        rng = np.random.default_rng(7)
        op = Operator(rng.standard_normal((3, 4, 2)))
        value, xi = min_singular_over_sphere(op, 'real', samples=512, seed=3)
        smin = np.linalg.svd(op.symbol(xi), compute_uv=False)[-1]
        assert np.allclose(value, smin), (value, smin)

    def test_determinism(self):
        op = symmetric_gradient(2)
        value1, xi1 = min_singular_over_sphere(op, 'complex', samples=256, seed=11)
        value2, xi2 = min_singular_over_sphere(op, 'complex', samples=256, seed=11)
        assert value1 == value2
        assert np.array_equal(xi1, xi2)


class TestEllipticity(unittest.TestCase):
    def test_gradient(self):
        for field in ['real', 'complex']:
            cert = check_ellipticity(gradient(2), field, samples=512)
            assert cert.verdict == 'elliptic', cert
            assert cert.witness_xi is None

    def test_one_dimensional(self):
        """the real sphere of R^1 is two points; default refinement settings"""
        for field in ['real', 'complex']:
            cert = check_ellipticity(gradient(1), field)
            assert cert.verdict == 'elliptic', (field, cert)
            assert np.allclose(cert.min_singular, 1.0), cert.min_singular

        op = Operator([[[1.0, 0.0], [0.0, 0.0]]], name='first_component')
        cert = check_ellipticity(op, 'real')
        assert cert.verdict == 'not_elliptic', cert
        assert np.allclose(np.abs(cert.witness_xi), [1.0]), cert.witness_xi
        assert np.allclose(np.abs(cert.witness_v), [0.0, 1.0]), cert.witness_v

    def test_symmetric_gradient(self):
        for op in [symmetric_gradient(2), symmetric_gradient(3)]:
            for field in ['real', 'complex']:
                cert = check_ellipticity(op, field, samples=1024)
                assert cert.is_elliptic, (op, field, cert)

    def test_cauchy_riemann(self):
        op = cauchy_riemann()
        assert check_ellipticity(op, 'real', samples=512).is_elliptic
        cert = check_ellipticity(op, 'complex')
        assert cert.verdict == 'not_elliptic', cert
        residual = np.linalg.norm(op.symbol(cert.witness_xi) @ cert.witness_v)
        assert residual <= cert.tolerance, residual
        assert np.allclose(np.linalg.norm(cert.witness_v), 1.0)

    def test_dx_only(self):
        cert = check_ellipticity(dx_only(), 'real', samples=512)
        assert cert.verdict == 'not_elliptic', cert
        assert np.allclose(np.abs(cert.witness_xi), [0., 1.], atol=1e-6), cert.witness_xi
        data = cert.to_dict()
        assert data['witness']['xi'] is not None, data
        assert data['field'] == 'real'

    def test_divergence(self):
        """k < N: A[xi] always has a kernel"""
        for field in ['real', 'complex']:
            cert = check_ellipticity(divergence(2), field, samples=128)
            assert cert.verdict == 'not_elliptic', cert
            assert cert.min_singular == 0.0, cert.min_singular

    def test_scaling_invariance(self):
        """the verdict does not change under A -> c A"""
        for op in [gradient(2), dx_only(), cauchy_riemann()]:
            for field in ['real', 'complex']:
                cert1 = check_ellipticity(op, field, samples=512)
                cert2 = check_ellipticity(op.scaled(3.5), field, samples=512)
                assert cert1.verdict == cert2.verdict, (op, field)

    def test_complex_implies_real(self):
        rng = np.random.default_rng(5)
        for unused_i in range(5):
            op = Operator(rng.standard_normal((2, 3, 2)))
            if check_ellipticity(op, 'complex', samples=512).is_elliptic:
                assert check_ellipticity(op, 'real', samples=512).is_elliptic

    def test_bad_input(self):
        with self.assertRaises(AvarInputError):
            check_ellipticity(gradient(2), 'quaternion')
        with self.assertRaises(AvarInputError):
            check_ellipticity(gradient(2), 'real', tolerance=0.0)

    def test_certificate_invariants(self):
        with self.assertRaises(AssertionError):
            EllipticityCertificate('real', 'elliptic', 1e-12, None, None, 1, 1, 1e-8)


class TestCancelling(unittest.TestCase):
    def test_gradient(self):
        cert = check_cancelling(gradient(2))
        assert cert.verdict == 'cancelling', cert.residual_dim
        assert cert.residual_dim == 0

    def test_symmetric_gradient(self):
        for op in [symmetric_gradient(2), symmetric_gradient(3)]:
            cert = check_cancelling(op)
            assert cert.is_cancelling, (op, cert.residual_dim)

    def test_one_dimensional(self):
        cert = check_cancelling(gradient(1))
        assert cert.verdict == 'not_cancelling'
        assert cert.residual_dim == 1, cert.residual_dim

        op = Operator([np.eye(3)[:, :2]])
        cert = check_cancelling(op)
        assert cert.residual_dim == 2, cert.residual_dim

    def test_cauchy_riemann(self):
        """A[xi] is invertible for real xi != 0, so every image is R^2"""
        cert = check_cancelling(cauchy_riemann())
        assert cert.verdict == 'not_cancelling'
        assert cert.residual_dim == 2, cert.residual_dim
        assert cert.to_dict()['verdict'] == 'not_cancelling'


if __name__ == '__main__':  # pragma: no cover
    unittest.main()
