import math

import pytest

from ymrelax.errors import SingularAtom
from ymrelax.matcore import Mat, RhoBall, det, frob_norm, invert, max_norm_pair
from ymrelax.measure import (
    INFINITE,
    AtomicMeasure,
    Mesh,
    YoungMeasureField,
    classify,
    first_moment,
    hat_pushforward,
    homogenize,
    inverse_penalty_moment,
    mass_moments,
    measures_equal,
    moment_pq,
    pair,
    support_in_ball,
    truncate,
)
from ymrelax.testfn import make_det_cutoff, make_phi_rho, named_testfn


class TestAtomicMeasure:
    def test_dirac(self):
        nu = AtomicMeasure.dirac(Mat.scalar(2.0))
        assert nu.total_mass() == 1.0
        assert len(nu.atoms) == 1

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            AtomicMeasure.from_pairs([(Mat.scalar(1.0), 0.5)])
        with pytest.raises(ValueError):
            AtomicMeasure.from_pairs([(Mat.scalar(1.0), -0.5),
                                      (Mat.scalar(2.0), 1.5)])

    def test_close_atoms_merged(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(1.0), 0.5),
                                       (Mat.scalar(1.0 + 1e-13), 0.5)])
        assert len(nu.atoms) == 1
        assert nu.atoms[0][1] == pytest.approx(1.0)

    def test_mix(self):
        a = AtomicMeasure.dirac(Mat.scalar(1.0))
        b = AtomicMeasure.dirac(Mat.scalar(2.0))
        m = AtomicMeasure.mix([a, b], [0.25, 0.75])
        assert m.mass_where(lambda s: s.flat[0] > 1.5) == pytest.approx(0.75)

    def test_json_roundtrip(self, make_measure):
        nu = make_measure(2)
        back = AtomicMeasure.from_json_dict(nu.to_json_dict())
        assert measures_equal(nu, back, [make_phi_rho(4.0).to_testfn()])


class TestPairing:
    def test_pair_is_weighted_sum(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(1.0), 0.25),
                                       (Mat.scalar(3.0), 0.75)])
        v = named_testfn("frob_power", {"p": 2.0})
        assert pair(nu, v) == pytest.approx(0.25 * 1.0 + 0.75 * 9.0)

    def test_first_moment(self, make_measure):
        nu = make_measure(2)
        m = first_moment(nu)
        expect = Mat.zero(2)
        for a, w in nu.atoms:
            expect = expect + w * a
        assert frob_norm(m - expect) <= 1e-12


class TestHatPushforward:
    def test_atoms_inverted(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(2.0), 0.5),
                                       (Mat.scalar(4.0), 0.5)])
        hat = hat_pushforward(nu)
        vals = sorted(a.flat[0] for a, _ in hat.atoms)
        assert vals == pytest.approx([0.25, 0.5])

    def test_involution(self, make_measure):
        nu = make_measure(3)
        back = hat_pushforward(hat_pushforward(nu))
        assert measures_equal(nu, back, [make_phi_rho(8.0).to_testfn()])

    def test_singular_atom_rejected(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(0.0), 1.0)])
        with pytest.raises(SingularAtom):
            hat_pushforward(nu)

    def test_hat_relation(self, make_measure):
        # <hat nu, f> = <nu, f o inv> for f vanishing near singularity
        f = make_det_cutoff(0.5, signed=False).to_testfn()
        for n in (1, 2):
            nu = make_measure(n)
            lhs = pair(hat_pushforward(nu), f)
            rhs = math.fsum(w * f.evaluate(invert(a)) for a, w in nu.atoms)
            assert lhs == pytest.approx(rhs, abs=1e-13)


class TestTruncate:
    def test_phi_argument_validated(self):
        nu = AtomicMeasure.dirac(Mat.scalar(1.0))
        with pytest.raises(ValueError):
            truncate(nu, 2.0, make_phi_rho(3.0))  # mismatched rho
        with pytest.raises(ValueError):
            truncate(nu, 2.0, named_testfn("frob_power", {"p": 2.0}))

    def test_probability_supported_in_extended_ball(self, make_measure):
        rho = 1.5
        ball = RhoBall(rho + 1.0)
        for _ in range(10):
            nu = make_measure(2, scale=2.0)
            out = truncate(nu, rho, make_phi_rho(rho))
            assert out.total_mass() == pytest.approx(1.0, abs=1e-12)
            assert support_in_ball(out, ball)

    def test_exact_identity_once_rho_dominates(self, make_measure):
        nu = make_measure(1)
        rho = 2.0 * max(max_norm_pair(a) for a, _ in nu.atoms)
        out = truncate(nu, rho, make_phi_rho(rho))
        v = make_det_cutoff(0.5, signed=False).to_testfn()
        assert pair(out, v) == pytest.approx(pair(nu, v), abs=1e-15)

    def test_removed_mass_parked_on_identity(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(10.0), 0.5),
                                       (Mat.scalar(1.0), 0.5)])
        out = truncate(nu, 2.0, make_phi_rho(2.0))
        assert out.mass_where(lambda a: a.flat[0] == 1.0) == pytest.approx(1.0)


class TestMoments:
    def test_finite_case(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(2.0), 1.0)])
        m1, m2 = mass_moments(nu, 2.0, 2.0)
        assert m1 == pytest.approx(4.0)
        assert m2 == pytest.approx(0.25)

    def test_singular_mass_infinite(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(0.0), 0.5),
                                       (Mat.scalar(1.0), 0.5)])
        assert mass_moments(nu, 2.0, 2.0) is INFINITE

    def test_pluggable_penalty(self):
        nu = AtomicMeasure.dirac(Mat.scalar(2.0))
        out = inverse_penalty_moment(nu, lambda inv: abs(det(inv)) ** 3)
        assert out == pytest.approx(0.125)
        sing = AtomicMeasure.dirac(Mat.scalar(0.0))
        assert inverse_penalty_moment(sing, lambda inv: 1.0) is INFINITE


class TestMesh:
    def test_interval(self):
        mesh = Mesh.interval(8)
        assert mesh.n_cells == 8
        assert mesh.cell_volume == pytest.approx(1.0 / 8)
        lo, hi = mesh.interval_bounds(3)
        assert (lo, hi) == pytest.approx((0.375, 0.5))

    def test_power_of_two_enforced(self):
        with pytest.raises(ValueError):
            Mesh.interval(6)
        with pytest.raises(ValueError):
            Mesh.square(3, 4)

    def test_square_triangles(self):
        mesh = Mesh.square(2, 2)
        assert mesh.n_cells == 8
        assert mesh.cell_volume == pytest.approx(1.0 / 8)
        for c in range(mesh.n_cells):
            (x0, y0), (x1, y1), (x2, y2) = mesh.triangle_vertices(c)
            area = 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
            assert area == pytest.approx(mesh.cell_volume)

    def test_json_roundtrip(self):
        for mesh in (Mesh.interval(4), Mesh.square(2, 4)):
            back = Mesh.from_json_dict(mesh.to_json_dict())
            assert back.n_cells == mesh.n_cells
            assert back.dim == mesh.dim


class TestField:
    def test_constant_and_homogenize(self, make_measure):
        nu = make_measure(2)
        field = YoungMeasureField.constant(Mesh.interval(4), nu)
        hom = homogenize(field)
        assert measures_equal(hom, nu, [make_phi_rho(6.0).to_testfn()])

    def test_homogenize_is_volume_weighted(self, make_measure):
        mesh = Mesh.interval(8)
        field = YoungMeasureField(mesh, tuple(make_measure(1) for _ in range(8)))
        v = named_testfn("quartic_well_1d")
        lhs = pair(homogenize(field), v)
        rhs = math.fsum(mesh.cell_volume * pair(nu, v) for nu in field.measures)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_moment_pq_matches_cellwise(self, make_measure):
        mesh = Mesh.interval(4)
        field = YoungMeasureField(mesh, tuple(make_measure(1) for _ in range(4)))
        m1, m2 = moment_pq(field, 2.0, 2.0)
        e1 = math.fsum(mesh.cell_volume * mass_moments(nu, 2.0, 2.0)[0]
                       for nu in field.measures)
        assert m1 == pytest.approx(e1, rel=1e-12)
        assert m2 > 0.0

    def test_json_roundtrip(self, make_measure):
        mesh = Mesh.square(2, 2)
        field = YoungMeasureField(mesh, tuple(make_measure(2)
                                              for _ in range(mesh.n_cells)))
        back = YoungMeasureField.from_json_dict(field.to_json_dict())
        for a, b in zip(field.measures, back.measures):
            assert measures_equal(a, b, [make_phi_rho(6.0).to_testfn()])


class TestClassify:
    def test_identity_in_both_classes(self):
        field = YoungMeasureField.constant(Mesh.interval(2),
                                           AtomicMeasure.dirac(Mat.identity(2)))
        rep = classify(field, 2.0, 2.0)
        assert rep.in_ypq and rep.in_ypq_plus
        assert rep.inv_mass_deficit == 0.0

    def test_negative_det_in_ypq_only(self):
        nu = AtomicMeasure.dirac(Mat.diag(-1.0, 1.0))
        field = YoungMeasureField.constant(Mesh.square(2, 2), nu)
        rep = classify(field, 2.0, 2.0)
        assert rep.in_ypq and not rep.in_ypq_plus
        assert rep.positive_det_mass_deficit == pytest.approx(1.0)

    def test_singular_mass_in_neither(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(0.0), 0.25),
                                       (Mat.scalar(1.0), 0.75)])
        field = YoungMeasureField.constant(Mesh.interval(2), nu)
        rep = classify(field, 2.0, 2.0)
        assert not rep.in_ypq and not rep.in_ypq_plus
        assert rep.inv_mass_deficit == pytest.approx(0.25)
        assert rep.moment_negq == math.inf


class TestMeasuresEqual:
    def test_permutation_invariant(self):
        a = AtomicMeasure.from_pairs([(Mat.scalar(1.0), 0.5),
                                      (Mat.scalar(2.0), 0.5)])
        b = AtomicMeasure.from_pairs([(Mat.scalar(2.0), 0.5),
                                      (Mat.scalar(1.0), 0.5)])
        fam = [make_phi_rho(r).to_testfn() for r in (2.0, 3.0, 5.0)]
        assert measures_equal(a, b, fam)

    def test_distinguishes(self):
        a = AtomicMeasure.dirac(Mat.scalar(1.0))
        b = AtomicMeasure.dirac(Mat.scalar(2.0))
        fam = [make_phi_rho(1.2).to_testfn()]
        assert not measures_equal(a, b, fam)

    def test_family_kind_enforced(self):
        a = AtomicMeasure.dirac(Mat.scalar(1.0))
        with pytest.raises(ValueError):
            measures_equal(a, a, [named_testfn("frob_power", {"p": 2.0})])
