import unittest

import numpy as np

from avar.core.errors import AvarInputError, PreconditionError, DegenerateConstraintError
from avar.core.catalog import (
    gradient, symmetric_gradient, cauchy_riemann, dx_only, catalog_entry)
from avar.core.voxel import named_domain, select_hypersurface, build_ball
from avar.core.inequality import (
    Constraint, ConstantEstimate, constraint_projection, poincare_constant_p2,
    poincare_lp_lower_bound, poincare_l1_lower_bound, verify_inequality, sobolev_trace_verify,
    sobolev_dilation_study, scaling_study, side_study, counterexample_blowup, convergence_study,
    sobolev_ratio, RESIDUAL_TOL)

MIDLINE = {'shape': 'halfspace', 'normal': [1., 0.], 'offset': 0.5}


class TestConstraint(unittest.TestCase):
    def test_subset(self):
        domain = named_domain('unit_square', 0.25)
        constraint = Constraint.subset(domain)
        assert len(constraint.cells) == 16
        assert constraint.inequality == 'subset_poincare'
        constraint = Constraint.subset(domain, omega=MIDLINE)
        assert len(constraint.cells) == 8
        assert np.allclose(constraint.measure().total_mass, 0.5)

    def test_trace(self):
        domain = named_domain('unit_square', 0.25)
        constraint = Constraint.trace(select_hypersurface(domain, MIDLINE))
        assert constraint.inequality == 'trace_poincare'
        mu = constraint.measure()
        assert mu.kind == 'surface'
        assert np.allclose(mu.total_mass, 1.0)
        assert constraint.to_dict()['side'] == 'inside'

    def test_bad(self):
        domain = named_domain('unit_square', 0.25)
        with self.assertRaises(AvarInputError):
            Constraint('volume', domain)
        with self.assertRaises(AvarInputError):
            Constraint('trace', domain)
        with self.assertRaises(AvarInputError):
            Constraint.subset(domain, cells=np.zeros(16, dtype='bool'))
        gamma = select_hypersurface(domain, 'left', side='outside')
        with self.assertRaises(AvarInputError):
            Constraint.trace(gamma)

    def test_degenerate(self):
        """one cell cannot see the rotation of a rigid motion"""
        domain = named_domain('unit_square', 0.25)
        constraint = Constraint.subset(domain, cells=[5])
        with self.assertRaises(DegenerateConstraintError):
            constraint_projection(symmetric_gradient(2), constraint)
        with self.assertRaises(DegenerateConstraintError):
            poincare_constant_p2(symmetric_gradient(2), domain, constraint)
        pi = constraint_projection(gradient(2), constraint)
        assert pi.l == 1


class TestPoincareP2(unittest.TestCase):
    def test_interval_subset(self):
        """first nonzero Neumann eigenvalue of (0, 1) is pi^2"""
        domain = named_domain('interval', 1. / 64)
        estimate = poincare_constant_p2(gradient(1), domain, Constraint.subset(domain))
        assert abs(estimate.value - 1. / np.pi) * np.pi < 0.01, estimate.value
        assert estimate.method == 'eigenproblem'
        assert estimate.solver == 'dense'
        assert estimate.residual <= RESIDUAL_TOL, estimate.residual
        assert estimate.constraint_residual < 1e-10, estimate.constraint_residual
        assert np.allclose(estimate.value, estimate.eigenvalue ** -0.5)

    def test_interval_trace(self):
        """u(0) = 0: lambda = (pi / 2)^2"""
        domain = named_domain('interval', 1. / 128)
        gamma = select_hypersurface(domain, 'left')
        estimate = poincare_constant_p2(gradient(1), domain, Constraint.trace(gamma))
        assert abs(estimate.value - 2. / np.pi) * np.pi / 2. < 0.01, estimate.value
        assert estimate.inequality == 'trace_poincare'

    def test_interval_trace_first_order(self):
        """piecewise-constant traces: the error halves with h"""
        errors = []
        for h in [1. / 32, 1. / 64, 1. / 128]:
            domain = named_domain('interval', h)
            constraint = Constraint.trace(select_hypersurface(domain, 'left'))
            measure = constraint.measure()
            assert np.allclose(measure.points, [[h / 2.]]), measure.points
            estimate = poincare_constant_p2(gradient(1), domain, constraint)
            errors.append(abs(estimate.value - 2. / np.pi))
        for error, error_half in zip(errors[:-1], errors[1:]):
            assert 0.4 < error_half / error < 0.6, errors

    def test_unit_square(self):
        domain = named_domain('unit_square', 1. / 16)
        estimate = poincare_constant_p2(gradient(2), domain, Constraint.subset(domain))
        assert abs(estimate.value - 1. / np.pi) * np.pi < 0.02, estimate.value
        data = estimate.to_dict()
        assert data['inequality'] == 'subset_poincare'
        assert data['l'] == 1
        assert data['eigenvalue']['lambda_min'] > 0.0

    def test_sparse_matches_dense(self):
        domain = named_domain('interval', 1. / 64)
        constraint = Constraint.subset(domain)
        dense = poincare_constant_p2(gradient(1), domain, constraint, solver='dense')
        sparse = poincare_constant_p2(gradient(1), domain, constraint, solver='sparse')
        assert sparse.solver == 'sparse'
        assert abs(sparse.value - dense.value) / dense.value < 1e-8, (sparse.value, dense.value)
        assert sparse.constraint_residual < 1e-8

    def test_symmetric_gradient(self):
        domain = named_domain('unit_square', 1. / 8)
        estimate = poincare_constant_p2(symmetric_gradient(2), domain, Constraint.subset(domain))
        assert estimate.projection.l == 3
        assert np.isfinite(estimate.value) and estimate.value > 0.0
        assert estimate.constraint_residual < 1e-10

    def test_bad(self):
        domain = named_domain('unit_square', 0.25)
        other = named_domain('unit_square', 0.25)
        with self.assertRaises(AvarInputError):
            poincare_constant_p2(gradient(2), domain, Constraint.subset(other))
        with self.assertRaises(AvarInputError):
            poincare_constant_p2(gradient(2), domain, Constraint.subset(domain), solver='qr')
        with self.assertRaises(AvarInputError):
            poincare_constant_p2(gradient(1), domain, Constraint.subset(domain))

    def test_not_complex_elliptic(self):
        domain = named_domain('unit_square', 0.25)
        for op in [cauchy_riemann(), dx_only()]:
            with self.assertRaises(PreconditionError):
                poincare_constant_p2(op, domain, Constraint.subset(domain))
        gamma = select_hypersurface(domain, 'left')
        with self.assertRaises(PreconditionError):
            poincare_constant_p2(dx_only(), domain, Constraint.trace(gamma))

    def test_subset_bound(self):
        """Pi_Omega is the L^2 projection onto N(A), so C(Omega) <= C(E) for every E"""
        domain = named_domain('unit_square', 1. / 16)
        op = gradient(2)
        whole = poincare_constant_p2(op, domain, Constraint.subset(domain)).value
        subsets = [
            MIDLINE,
            {'shape': 'ball', 'center': [0.5, 0.5], 'radius': 0.3},
            {'shape': 'box', 'lo': [0., 0.], 'hi': [0.25, 0.25]},
        ]
        for omega in subsets:
            estimate = poincare_constant_p2(op, domain, Constraint.subset(domain, omega=omega))
            assert whole <= estimate.value * (1. + 1e-6), (omega, whole, estimate.value)


class TestLowerBounds(unittest.TestCase):
    def test_p2_below_eigenproblem(self):
        """A_h annihilates constants, so every sample ratio is at most C"""
        domain = named_domain('interval', 1. / 64)
        constraint = Constraint.subset(domain)
        exact = poincare_constant_p2(gradient(1), domain, constraint)
        bound = poincare_lp_lower_bound(gradient(1), domain, constraint, p=2.0, sample_count=50)
        assert bound.method == 'sample_max'
        assert 0.0 < bound.value <= exact.value * (1. + 1e-10), (bound.value, exact.value)

    def test_l1_interval(self):
        """the sharp mean-zero L^1 constant on (0, 1) is 1/2"""
        domain = named_domain('interval', 1. / 64)
        estimate = poincare_l1_lower_bound(gradient(1), domain, Constraint.subset(domain),
                                           sample_count=50)
        assert estimate.p == 1.0
        assert 0.0 < estimate.value <= 0.5 * 1.05, estimate.value
        assert estimate.sample_count == 50

    def test_reproducible(self):
        domain = named_domain('unit_square', 1. / 8)
        constraint = Constraint.subset(domain)
        estimate1 = poincare_l1_lower_bound(gradient(2), domain, constraint, sample_count=20, seed=3)
        estimate2 = poincare_l1_lower_bound(gradient(2), domain, constraint, sample_count=20, seed=3)
        assert estimate1.value == estimate2.value

    def test_kernel_sample_skipped(self):
        domain = named_domain('unit_square', 1. / 8)
        x = domain.centers
        fields = [np.full((domain.ncells, 1), 2.0), (x[:, 0] ** 2)[:, np.newaxis]]
        estimate = poincare_l1_lower_bound(gradient(2), domain, Constraint.subset(domain),
                                           fields=fields)
        assert estimate.skipped == 1, estimate.skipped
        assert estimate.sample_count == 1
        assert estimate.blowups == []

    def test_blowup(self):
        """x_2^4 e_1 is annihilated by d_1 but is not a polynomial of degree <= 2"""
        domain = named_domain('unit_square', 1. / 8)
        x = domain.centers
        fields = [np.column_stack([x[:, 1] ** 4, np.zeros(domain.ncells)])]
        estimate = poincare_l1_lower_bound(dx_only(), domain, Constraint.subset(domain),
                                           fields=fields, degree_cap=2)
        assert estimate.blowups == [0], estimate.blowups

    def test_bad_p(self):
        domain = named_domain('interval', 0.25)
        with self.assertRaises(AvarInputError):
            poincare_lp_lower_bound(gradient(1), domain, Constraint.subset(domain), p=0.5)
        with self.assertRaises(AvarInputError):
            poincare_lp_lower_bound(gradient(1), domain, Constraint.subset(domain), p=np.inf)


class TestVerify(unittest.TestCase):
    def test_eigenproblem(self):
        domain = named_domain('unit_square', 1. / 16)
        estimate = poincare_constant_p2(gradient(2), domain, Constraint.subset(domain))
        report = verify_inequality(estimate, fresh_samples=100)
        assert report.passed, report.to_dict()
        assert report.violations == 0
        assert report.seed == estimate.seed + 1
        assert np.allclose(report.tol_rel, 10. / 16)
        assert report.new_lower_bound is None
        assert report.worst_ratio <= estimate.value * (1. + 1e-10)

    def test_trace(self):
        domain = named_domain('unit_square', 1. / 16)
        gamma = select_hypersurface(domain, 'left')
        estimate = poincare_constant_p2(gradient(2), domain, Constraint.trace(gamma))
        report = verify_inequality(estimate, fresh_samples=50)
        assert report.violations == 0, report.to_dict()

    def test_sample_max(self):
        domain = named_domain('unit_square', 1. / 8)
        estimate = poincare_l1_lower_bound(gradient(2), domain, Constraint.subset(domain),
                                           sample_count=20)
        report = verify_inequality(estimate, fresh_samples=20)
        assert report.new_lower_bound >= estimate.value
        assert report.to_dict()['estimate']['method'] == 'sample_max'

    def test_missing_operator(self):
        estimate = ConstantEstimate('subset_poincare', 2.0, 1.0, 'eigenproblem', 0.1)
        with self.assertRaises(AvarInputError):
            verify_inequality(estimate)


class TestSobolev(unittest.TestCase):
    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            sobolev_trace_verify(gradient(1), named_domain('interval', 1. / 16), radii=None)
        with self.assertRaises(PreconditionError):
            sobolev_trace_verify(cauchy_riemann(), named_domain('unit_disk', 1. / 8), radii=None)

    def test_gradient_disk(self):
        domain = named_domain('unit_disk', 1. / 16)
        report = sobolev_trace_verify(gradient(2), domain, sample_count=20, radii=None)
        assert report.bounded
        assert report.passed
        assert 0.0 < report.max_ratio < 1.0, report.max_ratio
        assert report.cancelling['verdict'] == 'cancelling'
        estimate = report.estimate()
        assert estimate.inequality == 'sobolev_trace'
        assert estimate.p == 2.0
        verification = verify_inequality(estimate, fresh_samples=10)
        assert verification.samples == 10

    def test_dilation(self):
        """the lattice scales with r, so the ratio is exactly dilation invariant"""
        table = sobolev_dilation_study(gradient(2), cells_per_radius=16)
        assert len(table) == 3
        assert table['deviation'].max() < 1e-10, table
        assert np.allclose(table['h'] / table['r'], 1. / 16)

    def test_disk_ratio(self):
        """u = 1 on the unit disk: sqrt(pi) / (2 pi) once facets are weighted by |n . nu|"""
        domain = build_ball(np.zeros(2), 1.0, 1. / 128, surface='geometric')
        ratio = sobolev_ratio(gradient(2), domain)
        exact = catalog_entry('gradient2d').expected_value('sobolev_disk_constant_ratio')
        assert np.allclose(exact, np.sqrt(np.pi) / (2. * np.pi))
        assert abs(ratio - exact) / exact < 0.03, (ratio, exact)
        with self.assertRaises(AvarInputError):
            sobolev_ratio(gradient(1), named_domain('interval', 1. / 16))


class TestScaling(unittest.TestCase):
    def test_scaling(self):
        report = scaling_study(gradient(2), cells_per_radius=8)
        assert report.passed, report.to_dict()
        assert report.max_deviation < 1e-8, report.max_deviation
        assert list(report.table['r']) == [0.5, 1.0, 2.0]

    def test_symmetric_gradient(self):
        report = scaling_study(symmetric_gradient(2), cells_per_radius=8)
        assert report.passed, report.to_dict()
        assert report.max_deviation < 1e-8, report.max_deviation

    def test_sides(self):
        """the midline of the square is symmetric under x_1 -> 1 - x_1"""
        domain = named_domain('unit_square', 1. / 16)
        estimates = side_study(gradient(2), domain, MIDLINE)
        inside = estimates['inside'].value
        outside = estimates['outside'].value
        assert abs(inside - outside) / inside < 1e-8, (inside, outside)


class TestCounterexample(unittest.TestCase):
    def test_dx_only(self):
        domain = named_domain('unit_square', 1. / 16)
        report = counterexample_blowup(dx_only(), domain, refinements=1)
        assert report.passed, report.to_dict()
        assert len(report.table) == 2
        assert np.allclose(report.table['l1_norm'], 0.5), report.table
        assert np.allclose(report.table['variation'], 0.0)
        assert np.allclose(report.table['trace_projection_norm'], 0.0)
        assert report.relative_change < 1e-10

    def test_elliptic(self):
        with self.assertRaises(PreconditionError):
            counterexample_blowup(gradient(2), named_domain('unit_square', 0.25))


class TestConvergence(unittest.TestCase):
    def test_interval(self):
        table = convergence_study('interval_subset', hs=(1. / 16, 1. / 32))
        errors = table['relative_error'].to_numpy()
        assert errors[1] < errors[0], errors
        assert errors[1] < 0.01

    def test_square(self):
        table = convergence_study('square_subset')
        assert list(table['h']) == [2. ** -5, 2. ** -6, 2. ** -7]
        assert np.allclose(table['C_exact'], 1. / np.pi)
        errors = table['relative_error'].to_numpy()
        assert np.all(np.diff(errors) < 0.0), errors
        assert errors[-1] < 0.01, errors

    def test_unknown(self):
        with self.assertRaises(AvarInputError):
            convergence_study('disk_trace')


if __name__ == '__main__':  # pragma: no cover
    unittest.main()
