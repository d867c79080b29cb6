"""Jet-core tests: constraint evaluation, reaction bases, prolongation,
and contraction, with finite-difference oracles for every analytic
partial."""

import numpy as np
import pytest

from conftest import bump, central_diff, random_jet_point
from nhlab.errors import MissingDataError, StructuralError
from nhlab.jets import (COVARIANT, MECHANICS_SIG, NONCOVARIANT, ROD_SIG,
                        BaseSignature, ConstraintSpec, JetPoint,
                        ProlongedVector, ReactionBasis, SymmetrySection,
                        chetaev_covariant, chetaev_noncovariant,
                        constraint_rank, contract_reaction, eval_constraints,
                        field_component, linear_combination, prolong,
                        prolong_many, section_contraction, time_translation)
from nhlab.mechanics import benenti_system, benenti_weighted_section
from nhlab.rod import rod_constraint_spec


def benenti_point(v, q=(0.0, 0.0, 0.0, 0.0), t=0.0, accel=None):
    jet2 = None if accel is None else np.asarray(accel, float)[:, None, None]
    return JetPoint([t], q, np.asarray(v, float)[:, None], jet2)


def rod_point(x1=0.0, xdot=0.0, y1=0.0, ydot=0.0, th1=0.0, thdot=0.0,
              fields=(0.0, 0.0, 0.0), base=(0.0, 0.0)):
    jet1 = np.array([[x1, xdot], [y1, ydot], [th1, thdot]])
    return JetPoint(base, fields, jet1)


BEN = benenti_system(1.0).constraints


class TestEvalConstraints:
    def test_benenti_on_manifold(self):
        # parallel velocities (1,0) and (2,0)
        assert eval_constraints(BEN, benenti_point([1, 0, 2, 0]))[0] == 0.0

    def test_benenti_off_manifold(self):
        assert eval_constraints(BEN, benenti_point([1, 0, 0, 1]))[0] == 1.0

    def test_rod_rolling_identity(self):
        R, thdot, x1, y1 = 1.0, 2.0, 0.6, 0.8
        p = rod_point(x1=x1, y1=y1, thdot=thdot,
                      xdot=-R * thdot * y1, ydot=R * thdot * x1)
        assert np.allclose(eval_constraints(rod_constraint_spec(R), p), 0.0)

    def test_dimension_mismatch(self):
        p = JetPoint([0.0], [0.0, 0.0], np.zeros((2, 1)))
        with pytest.raises(StructuralError):
            eval_constraints(BEN, p)

    def test_count_mismatch_detected(self):
        bad = ConstraintSpec(
            count=2,
            value=lambda p: np.zeros(1),
            d_jet1=lambda p: np.zeros((2, p.n_fields, p.n_base)),
            d_fields=lambda p: np.zeros((2, p.n_fields)),
            d_base=lambda p: np.zeros((2, p.n_base)),
        )
        with pytest.raises(StructuralError):
            eval_constraints(bad, benenti_point([1, 0, 2, 0]))


class TestChetaevCovariant:
    def test_benenti_coefficients(self):
        # gradient (vy2, -vx2, -vy1, vx1) over (x1, y1, x2, y2)
        basis = chetaev_covariant(BEN, benenti_point([1, 0, 2, 0]))
        assert basis.flavor == COVARIANT
        assert basis.noncovariant is None
        np.testing.assert_allclose(basis.covariant[:, :, 0], [[0, -2, 0, 1]])

    def test_linear_coordinate_constraint(self):
        spec = ConstraintSpec(
            count=1,
            value=lambda p: p.jet1[0:1, 0],
            d_jet1=lambda p: np.eye(p.n_fields)[0].reshape(1, p.n_fields, 1),
            d_fields=lambda p: np.zeros((1, p.n_fields)),
            d_base=lambda p: np.zeros((1, 1)),
        )
        p = JetPoint([0.0], np.zeros(3), np.zeros((3, 1)))
        basis = chetaev_covariant(spec, p)
        np.testing.assert_allclose(basis.covariant[0, :, 0], [1, 0, 0])

    def test_rod_covariant_vs_finite_differences(self):
        # every entry of the covariant array against central differences
        # of the constraint functions themselves
        R, thdot, y1 = 1.0, 2.0, 0.8
        p = rod_point(x1=0.6, y1=y1, thdot=thdot,
                      xdot=-R * thdot * y1, ydot=R * thdot * 0.6)
        spec = rod_constraint_spec(R)
        basis = chetaev_covariant(spec, p)
        # stated values: time column (1, 0, R y') and d(phi1)/dy' = R thdot
        np.testing.assert_allclose(basis.covariant[0, :, 1], [1.0, 0.0, R * y1])
        np.testing.assert_allclose(basis.covariant[0, 1, 0], R * thdot)
        np.testing.assert_allclose(basis.covariant[0, 0, 0], 0.0)
        for a in range(3):
            for mu in range(2):
                fd = central_diff(lambda q: spec.value(q), p, "jet1", (a, mu))
                np.testing.assert_allclose(basis.covariant[:, a, mu], fd,
                                           rtol=1e-6, atol=1e-9)

    def test_missing_jet_gradient(self):
        spec = ConstraintSpec(count=1, value=lambda p: np.zeros(1),
                              d_jet1=None,
                              d_fields=lambda p: np.zeros((1, 4)),
                              d_base=lambda p: np.zeros((1, 1)))
        with pytest.raises(StructuralError):
            chetaev_covariant(spec, benenti_point([1, 0, 2, 0]))

    def test_off_manifold_warns(self):
        with pytest.warns(UserWarning, match="off the constraint set"):
            chetaev_covariant(BEN, benenti_point([1, 0, 0, 1]))


class TestChetaevNoncovariant:
    def test_rod_reaction_forms(self):
        R = 1.3
        spec = rod_constraint_spec(R)
        rng = np.random.default_rng(7)
        for _ in range(50):
            x1, y1, thdot = rng.uniform(-2, 2, 3)
            p = rod_point(x1=x1, y1=y1, thdot=thdot,
                          xdot=-R * thdot * y1, ydot=R * thdot * x1)
            basis = chetaev_noncovariant(spec, p, ROD_SIG)
            assert basis.flavor == NONCOVARIANT
            np.testing.assert_allclose(basis.noncovariant[0], [1.0, 0.0, R * y1])
            np.testing.assert_allclose(basis.noncovariant[1], [0.0, 1.0, -R * x1])

    def test_spatial_constraint_has_zero_time_column(self):
        # phi = y' - c has no time-derivative dependence
        spec = ConstraintSpec(
            count=1,
            value=lambda p: np.array([p.jet1[1, 0] - 0.5]),
            d_jet1=lambda p: np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]]),
            d_fields=lambda p: np.zeros((1, 3)),
            d_base=lambda p: np.zeros((1, 2)),
        )
        p = rod_point(y1=0.5)
        basis = chetaev_noncovariant(spec, p, ROD_SIG)
        np.testing.assert_array_equal(basis.noncovariant, np.zeros((1, 3)))

    @pytest.mark.filterwarnings("ignore:reaction basis evaluated off")
    def test_equals_covariant_time_column(self, rng):
        spec = rod_constraint_spec(0.7)
        for _ in range(100):
            p = random_jet_point(rng, 3, 2)
            cov = chetaev_covariant(spec, p).covariant
            with np.errstate(all="ignore"):
                noncov = chetaev_noncovariant(spec, p, ROD_SIG).noncovariant
            np.testing.assert_array_equal(noncov, cov[:, :, ROD_SIG.time_index])


class TestPartialsOracle:
    """Every analytic partial in the builtin specs agrees with central
    differences at random points."""

    def test_benenti_constraint_partials(self, rng):
        for _ in range(100):
            p = random_jet_point(rng, 4, 1)
            grad = BEN.d_jet1(p)
            for a in range(4):
                fd = central_diff(lambda q: BEN.value(q), p, "jet1", (a, 0))
                np.testing.assert_allclose(grad[:, a, 0], fd, rtol=1e-5, atol=1e-8)
            for a in range(4):
                fd = central_diff(lambda q: BEN.value(q), p, "fields", a)
                np.testing.assert_allclose(BEN.d_fields(p)[:, a], fd,
                                           rtol=1e-5, atol=1e-8)
            fd = central_diff(lambda q: BEN.value(q), p, "base", 0)
            np.testing.assert_allclose(BEN.d_base(p)[:, 0], fd, rtol=1e-5,
                                       atol=1e-8)

    def test_rod_constraint_partials(self, rng):
        spec = rod_constraint_spec(1.7)
        for _ in range(100):
            p = random_jet_point(rng, 3, 2)
            grad = spec.d_jet1(p)
            for a in range(3):
                for mu in range(2):
                    fd = central_diff(lambda q: spec.value(q), p, "jet1", (a, mu))
                    np.testing.assert_allclose(grad[:, a, mu], fd,
                                               rtol=1e-5, atol=1e-8)

    def test_benenti_lagrangian_partials(self, rng):
        lag = benenti_system(1.4, 3.0).lagrangian
        for _ in range(100):
            p = random_jet_point(rng, 4, 1)
            for a in range(4):
                fd = central_diff(lambda q: lag.value(q), p, "jet1", (a, 0))
                np.testing.assert_allclose(lag.d_jet1(p)[a, 0], fd, rtol=1e-5,
                                           atol=1e-8)
                fd = central_diff(lambda q: lag.value(q), p, "fields", a)
                np.testing.assert_allclose(lag.d_fields(p)[a], fd, rtol=1e-5,
                                           atol=1e-8)


class TestProlong:
    def test_benenti_weighted_translations(self):
        # field displacement (vx1, vy1, 0, 0); its total time-derivative
        # picks up the accelerations
        accel = np.array([0.3, -1.2, 0.7, 2.0])
        p = benenti_point([1.0, 2.0, 3.0, 4.0], accel=accel)
        lifted = prolong(benenti_weighted_section((1, 1, 0, 0)), p)
        np.testing.assert_allclose(lifted.field_comp, [1.0, 2.0, 0.0, 0.0])
        np.testing.assert_allclose(lifted.jet1_comp[:, 0],
                                   [accel[0], accel[1], 0.0, 0.0], atol=1e-11)

    def test_constant_section_zero_rate(self):
        section = SymmetrySection((np.array([1.0, 0.0, 0.0]),),
                                  lambda p: np.array([2.0]))
        p = rod_point(x1=0.4, thdot=1.1)
        lifted = prolong(section, p)
        np.testing.assert_allclose(lifted.field_comp, [2.0, 0.0, 0.0])
        np.testing.assert_allclose(lifted.jet1_comp, np.zeros((3, 2)), atol=1e-12)

    def test_time_translation(self):
        p = benenti_point([1.0, 0.5, 2.0, 1.0])
        lifted = prolong(time_translation(MECHANICS_SIG), p)
        np.testing.assert_array_equal(lifted.base_comp, [1.0])
        np.testing.assert_array_equal(lifted.field_comp, np.zeros(4))
        np.testing.assert_array_equal(lifted.jet1_comp, np.zeros((4, 1)))

    def test_generalized_needs_jet2(self):
        p = benenti_point([1.0, 2.0, 3.0, 4.0])
        with pytest.raises(MissingDataError):
            prolong(benenti_weighted_section((1, 0, 0, 0)), p)

    def test_linearity_in_coefficients(self, rng):
        sections = [benenti_weighted_section(w)
                    for w in ((1, 1, 0, 0), (0, 0, 1, 1))]
        for _ in range(20):
            a, b = rng.uniform(-1, 1, 2)
            p = random_jet_point(rng, 4, 1, with_jet2=True)
            combo = linear_combination(sections, (a, b))
            lifted = prolong(combo, p)
            l1, l2 = prolong_many(sections, p)
            np.testing.assert_allclose(
                lifted.field_comp, a * l1.field_comp + b * l2.field_comp,
                atol=1e-12)
            np.testing.assert_allclose(
                lifted.jet1_comp, a * l1.jet1_comp + b * l2.jet1_comp,
                atol=1e-12)

    def test_total_derivative_fd_oracle(self, rng):
        # generalized section with smooth nonlinear data; the oracle
        # assembles the total derivative by the product/chain rule from
        # finite differences of the coefficient and generator functions
        def gen(p):
            return np.array([np.sin(p.fields[1]), p.fields[0], 1.0])

        def coeff(p):
            return np.array([p.jet1[0, 0] * p.jet1[2, 1] + 0.3 * p.base[1]])

        section = SymmetrySection((gen,), coeff, None, generalized=True)
        for _ in range(20):
            p = random_jet_point(rng, 3, 2, box=1.5, with_jet2=True)
            lifted = prolong(section, p)

            def xi(q):
                return coeff(q)[0] * gen(q)

            for mu in range(2):
                total = central_diff(xi, p, "base", mu)
                for b in range(3):
                    total = total + central_diff(xi, p, "fields", b) * p.jet1[b, mu]
                    for nu in range(2):
                        total = total + (central_diff(xi, p, "jet1", (b, nu))
                                         * p.jet2[b, nu, mu])
                np.testing.assert_allclose(lifted.jet1_comp[:, mu], total,
                                           rtol=1e-6, atol=1e-7)

    def test_projectable_section_fd_oracle(self, rng):
        # ordinary (non-generalized) section: rate = d(xi)/dx + d(xi)/dy * jet1
        def gen(p):
            return np.array([p.fields[1] ** 2, np.cos(p.base[0])])

        section = SymmetrySection((gen,), lambda p: np.array([1.0]))
        for _ in range(20):
            p = random_jet_point(rng, 2, 1, box=1.5)
            lifted = prolong(section, p)
            total = central_diff(gen, p, "base", 0)
            for b in range(2):
                total = total + central_diff(gen, p, "fields", b) * p.jet1[b, 0]
            np.testing.assert_allclose(lifted.jet1_comp[:, 0], total,
                                       rtol=1e-6, atol=1e-7)

    def test_mixed_generalized_horizontal_rejected(self):
        with pytest.raises(StructuralError):
            SymmetrySection((np.array([1.0]),), lambda p: np.array([p.jet1[0, 0]]),
                            horizontal_part=np.array([1.0]), generalized=True)


class TestContractReaction:
    def on_manifold_point(self, rng):
        v1 = rng.uniform(-2, 2, 2)
        scale = rng.uniform(0.2, 2.0)
        v = np.array([v1[0], v1[1], scale * v1[0], scale * v1[1]])
        return benenti_point(v, accel=np.zeros(4))

    def test_benenti_admissible_direction(self, rng):
        section = benenti_weighted_section((1, 0, 0, -1))
        for _ in range(30):
            p = self.on_manifold_point(rng)
            basis = chetaev_covariant(BEN, p)
            out = contract_reaction(prolong(section, p), basis, p)
            assert out.shape == (1,)
            np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_benenti_inadmissible_value(self):
        # weights (1,0,0,0) at velocities (1,1,1,1): contraction equals
        # (w0 + w3) vx1 vy2 - (w1 + w2) vx2 vy1 = 1
        p = benenti_point([1.0, 1.0, 1.0, 1.0], accel=np.zeros(4))
        basis = chetaev_covariant(BEN, p)
        out = contract_reaction(prolong(benenti_weighted_section((1, 0, 0, 0)), p),
                                basis, p)
        np.testing.assert_allclose(out, [1.0])

    def test_rod_rolling_direction_annihilates(self, rng):
        from nhlab.rod import rod_translation_section
        R = 1.0
        spec = rod_constraint_spec(R)
        section = rod_translation_section(R)
        for _ in range(30):
            x1, y1, thdot = rng.uniform(-2, 2, 3)
            p = JetPoint([0.1, 0.2], [0.0, 0.0, 0.0],
                         np.array([[x1, -R * thdot * y1],
                                   [y1, R * thdot * x1],
                                   [0.3, thdot]]),
                         np.zeros((3, 2, 2)))
            basis = chetaev_noncovariant(spec, p, ROD_SIG)
            out = contract_reaction(prolong(section, p), basis, p)
            assert out.shape == (2,)
            np.testing.assert_allclose(out, 0.0, atol=1e-13)

    @pytest.mark.filterwarnings("ignore:reaction basis evaluated off")
    def test_time_translation_contraction_is_constraint_value(self):
        # contact factor of d/dt is -(time derivatives); pairing with the
        # rolling reaction coefficients reproduces -phi
        R = 1.0
        spec = rod_constraint_spec(R)
        p = rod_point(x1=0.5, y1=0.2, thdot=1.5, xdot=0.7, ydot=-0.4)
        basis = chetaev_noncovariant(spec, p, ROD_SIG)
        with np.errstate(all="ignore"):
            out = section_contraction(time_translation(ROD_SIG), basis, p)
        np.testing.assert_allclose(out, -spec.value(p))

    def test_covariant_shape_for_two_base_directions(self):
        spec = rod_constraint_spec(1.0)
        p = rod_point(x1=0.6, y1=0.8, thdot=2.0, xdot=-1.6, ydot=1.2)
        basis = chetaev_covariant(spec, p)
        section = SymmetrySection((np.eye(3)[0],), lambda q: np.array([1.0]))
        out = section_contraction(section, basis, p)
        assert out.shape == (2, 2)

    def test_bilinearity(self, rng):
        p = self.on_manifold_point(rng)
        basis = chetaev_covariant(BEN, p)
        s1 = benenti_weighted_section((1, 1, 0, 0))
        s2 = benenti_weighted_section((0, 1, 1, 0))
        a, b = 0.37, -1.21
        combo = contract_reaction(
            prolong(linear_combination([s1, s2], (a, b)), p), basis, p)
        parts = (a * contract_reaction(prolong(s1, p), basis, p)
                 + b * contract_reaction(prolong(s2, p), basis, p))
        np.testing.assert_allclose(combo, parts, atol=1e-12)
        # linear in the basis arrays too
        doubled = ReactionBasis(flavor=COVARIANT, covariant=2.0 * basis.covariant)
        np.testing.assert_allclose(
            contract_reaction(prolong(s1, p), doubled, p),
            2.0 * contract_reaction(prolong(s1, p), basis, p), atol=1e-12)

    def test_contact_annihilation(self, rng):
        # the derivative components of the lifted field never enter
        p = self.on_manifold_point(rng)
        basis = chetaev_covariant(BEN, p)
        lifted = prolong(benenti_weighted_section((1, 1, 0, 0)), p)
        before = contract_reaction(lifted, basis, p)
        perturbed = ProlongedVector(lifted.base_comp, lifted.field_comp,
                                    lifted.jet1_comp + rng.uniform(-5, 5, (4, 1)),
                                    lifted.evaluated_at)
        np.testing.assert_array_equal(contract_reaction(perturbed, basis, p),
                                      before)

    def test_point_mismatch_rejected(self):
        p1 = benenti_point([1, 0, 2, 0], accel=np.zeros(4))
        p2 = benenti_point([2, 0, 4, 0])
        basis = chetaev_covariant(BEN, p2)
        lifted = prolong(benenti_weighted_section((1, 1, 0, 0)), p1)
        with pytest.raises(StructuralError):
            contract_reaction(lifted, basis, p2)

    def test_flavor_mismatch_rejected(self):
        with pytest.raises(StructuralError):
            ReactionBasis(flavor=COVARIANT, noncovariant=np.zeros((1, 4)))
        with pytest.raises(StructuralError):
            ReactionBasis(flavor="sideways", covariant=np.zeros((1, 4, 1)))


class TestStructuralPieces:
    def test_jet2_symmetry_enforced(self):
        jet2 = np.zeros((2, 2, 2))
        jet2[0, 0, 1] = 1.0
        with pytest.raises(StructuralError):
            JetPoint([0.0, 0.0], [0.0, 0.0], np.zeros((2, 2)), jet2)

    def test_base_signature_validation(self):
        with pytest.raises(StructuralError):
            BaseSignature(n_base=3)
        with pytest.raises(StructuralError):
            BaseSignature(n_base=2, time_index=2)
        with pytest.raises(StructuralError):
            BaseSignature(n_base=2, orientation=(0, 0))
        assert BaseSignature(2).orientation == (0, 1)

    def test_constraint_rank(self, rng):
        spec = rod_constraint_spec(1.0)
        for _ in range(20):
            p = random_jet_point(rng, 3, 2)
            assert constraint_rank(spec, p) == 2
        degenerate = ConstraintSpec(
            count=2,
            value=lambda p: np.zeros(2),
            d_jet1=lambda p: np.zeros((2, p.n_fields, p.n_base)),
            d_fields=lambda p: np.zeros((2, p.n_fields)),
            d_base=lambda p: np.zeros((2, p.n_base)),
        )
        assert constraint_rank(degenerate, rod_point()) == 0

    def test_benenti_rank_drops_at_rest(self):
        assert constraint_rank(BEN, benenti_point([1, 0, 2, 0])) == 1
        assert constraint_rank(BEN, benenti_point([0, 0, 0, 0])) == 0

    def test_field_component_shape_errors(self):
        section = SymmetrySection((np.array([1.0, 0.0]),),
                                  lambda p: np.array([1.0, 2.0]))
        with pytest.raises(StructuralError):
            field_component(section, rod_point())

    def test_unconstrained_spec(self):
        spec = ConstraintSpec.unconstrained()
        p = benenti_point([1, 2, 3, 4])
        assert eval_constraints(spec, p).shape == (0,)
        assert spec.is_satisfied(p)
