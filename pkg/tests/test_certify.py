import math

import pytest

from ymrelax.certify import (
    Certificate,
    Check,
    FAIL,
    INCONCLUSIVE,
    PASS,
    aggregate,
    check_det_limit,
    check_support_from_sequence,
    check_thm3,
    check_thm12,
)
from ymrelax.errors import HypothesisViolated
from ymrelax.laminate import GradientField, SequenceSpec, build_laminate_sequence
from ymrelax.matcore import Mat
from ymrelax.measure import AtomicMeasure, Mesh, YoungMeasureField, classify
from ymrelax.meshdef import MeshDeformation
from ymrelax.testfn import named_testfn, orho_extend


SHEAR = Mat.from_rows([[1.0, 1.0], [0.0, 1.0]])


def const_field(nu, mesh=None):
    return YoungMeasureField.constant(mesh or Mesh.interval(4), nu)


class TestAggregate:
    def test_ordering(self):
        ok = Check("a", PASS)
        meh = Check("b", INCONCLUSIVE, explanation="cannot decide")
        bad = Check("c", FAIL)
        assert aggregate([ok, ok]) == PASS
        assert aggregate([ok, meh]) == INCONCLUSIVE
        assert aggregate([ok, meh, bad]) == FAIL
        assert aggregate([bad, meh]) == FAIL

    def test_inconclusive_needs_explanation(self):
        with pytest.raises(ValueError):
            Check("a", INCONCLUSIVE)

    def test_certificate_verdict_consistency(self):
        with pytest.raises(ValueError):
            Certificate("thm1", (Check("a", FAIL),), PASS, {})


class TestThm12:
    def test_identity_passes_both(self):
        field = const_field(AtomicMeasure.dirac(Mat.identity(2)),
                            Mesh.square(2, 2))
        c1 = check_thm12(field, 2.0, 2.0)
        c2 = check_thm12(field, 2.0, 2.0, require_positive_det=True)
        assert c1.verdict == PASS and c2.verdict == PASS
        assert c1.theorem == "thm1" and c2.theorem == "thm2"

    def test_negative_det_fails_thm2_only(self):
        field = const_field(AtomicMeasure.dirac(Mat.diag(-1.0, 1.0)),
                            Mesh.square(2, 2))
        assert check_thm12(field, 2.0, 2.0).verdict == PASS
        cert = check_thm12(field, 2.0, 2.0, require_positive_det=True)
        assert cert.verdict == FAIL
        failing = [c.name for c in cert.checks if c.status == FAIL]
        assert failing == ["positive_determinant_support"]

    def test_singular_atom_fails_both(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(0.0), 0.5),
                                       (Mat.scalar(1.0), 0.5)])
        field = const_field(nu)
        assert check_thm12(field, 2.0, 2.0).verdict == FAIL
        assert check_thm12(field, 2.0, 2.0,
                           require_positive_det=True).verdict == FAIL

    def test_agrees_with_classify(self, make_measure):
        for n in (1, 2):
            field = YoungMeasureField(
                Mesh.interval(4) if n == 1 else Mesh.square(2, 2),
                tuple(make_measure(n) for _ in range(
                    4 if n == 1 else 8)))
            rep = classify(field, 2.0, 2.0)
            cert = check_thm12(field, 2.0, 2.0)
            assert (cert.verdict == PASS) == rep.in_ypq
            plus = check_thm12(field, 2.0, 2.0, require_positive_det=True)
            assert (plus.verdict == PASS) == rep.in_ypq_plus


class TestSupportSequence:
    def test_bounded_family_passes(self):
        fields = [build_laminate_sequence(
            SequenceSpec((Mat.scalar(1.0), Mat.scalar(2.0)), (0.5, 0.5), k))
            for k in (2, 4, 8)]
        cert = check_support_from_sequence(fields, [0.5, 0.1], 2.0)
        assert cert.verdict == PASS
        # no mass below eps < 1: slopes stay at 1 and 2
        for masses in cert.details["masses"].values():
            assert all(m == 0.0 for m in masses)

    def test_vanishing_slope_flagged(self):
        fields = [GradientField.from_slopes_1d([1.0 / k, 1.0], [0.5, 0.5])
                  for k in (4, 8, 16, 32)]
        cert = check_support_from_sequence(fields, [0.5, 0.1], 2.0)
        assert cert.verdict == INCONCLUSIVE
        qs = cert.details["q_integrals"]
        for k, got in zip((4, 8, 16, 32), qs):
            assert got == pytest.approx(k ** 2 / 2 + 0.5, rel=1e-12)

    def test_affine_unit_det(self):
        fields = [GradientField.affine(Mat.scalar(1.0))]
        cert = check_support_from_sequence(fields, [0.5, 0.9], 1.0)
        assert cert.verdict == PASS


class TestDetLimit:
    def test_two_slope_family_passes(self):
        fields = [build_laminate_sequence(
            SequenceSpec((Mat.scalar(1.0), Mat.scalar(2.0)), (0.5, 0.5), k))
            for k in (2, 4, 8)]
        cert = check_det_limit(fields, 2.0)
        assert cert.verdict == PASS
        assert cert.details["det"] == pytest.approx(1.5)

    def test_unbounded_inverse_not_pass(self):
        fields = [GradientField.from_slopes_1d([1.0 / k, 1.0], [0.5, 0.5])
                  for k in (4, 8, 16, 32)]
        cert = check_det_limit(fields, 2.0)
        assert cert.verdict == INCONCLUSIVE

    def test_2d_shear_det_one(self):
        fields = [build_laminate_sequence(
            SequenceSpec((Mat.identity(2), SHEAR), (0.5, 0.5), k))
            for k in (2, 4)]
        cert = check_det_limit(fields, 3.0)
        assert cert.verdict == PASS
        assert cert.details["det"] == pytest.approx(1.0)

    def test_hypotheses_enforced(self):
        good = [GradientField.affine(Mat.scalar(1.0))]
        with pytest.raises(HypothesisViolated):
            check_det_limit(good, 1.0)  # p must exceed the dimension
        bad = [GradientField.from_slopes_1d([-1.0, 1.0], [0.5, 0.5])]
        with pytest.raises(HypothesisViolated):
            check_det_limit(bad, 2.0)


class TestThm3:
    def test_dirac_field_all_pass(self):
        a = Mat.scalar(1.2)
        field = const_field(AtomicMeasure.dirac(a))
        u = MeshDeformation.affine(Mesh.interval(4), a)
        battery = [orho_extend(named_testfn("quartic_well_1d"), 3.0)]
        cert = check_thm3(field, u, 2.0, battery, 3.0)
        assert cert.verdict == PASS
        assert cert.theorem == "thm3"

    def test_laminate_measure_zero_map(self):
        nu = AtomicMeasure.from_pairs([(Mat.scalar(-1.0), 0.5),
                                       (Mat.scalar(1.0), 0.5)])
        field = const_field(nu)
        u = MeshDeformation.affine(Mesh.interval(4), Mat.scalar(0.0))
        battery = [orho_extend(named_testfn("quartic_well_1d"), 3.0)]
        cert = check_thm3(field, u, 2.0, battery, 3.0)
        assert cert.verdict == PASS
        jensen = [c for c in cert.checks if c.name == "jensen_inequality"]
        assert jensen and jensen[0].status == PASS

    def test_support_violation_fails(self):
        field = const_field(AtomicMeasure.dirac(Mat.scalar(1.5)))
        u = MeshDeformation.affine(Mesh.interval(4), Mat.scalar(1.5))
        battery = [orho_extend(named_testfn("quartic_well_1d"), 3.0)]
        cert = check_thm3(field, u, 1.2, battery, 3.0)  # 1.5 outside R_1.2
        assert cert.verdict == FAIL
        assert [c.name for c in cert.checks if c.status == FAIL] == [
            "support_in_rho_ball"]

    def test_mismatched_moments_fail(self):
        field = const_field(AtomicMeasure.dirac(Mat.scalar(1.0)))
        u = MeshDeformation.affine(Mesh.interval(4), Mat.scalar(0.5))
        battery = [orho_extend(named_testfn("quartic_well_1d"), 3.0)]
        cert = check_thm3(field, u, 2.0, battery, 3.0)
        assert cert.verdict == FAIL
        assert any(c.name == "barycenter_matches_gradient" and c.status == FAIL
                   for c in cert.checks)

    def test_2d_curl_violation_fails(self):
        # vertically stacked cells with moments diag(1,1) and diag(2,1):
        # the row-1 jump (1,0) across the horizontal interface cannot be
        # a gradient, so the circulation test trips
        mesh = Mesh.square(2, 2)
        lower = AtomicMeasure.dirac(Mat.identity(2))
        upper = AtomicMeasure.dirac(Mat.diag(2.0, 1.0))
        measures = []
        for c in range(mesh.n_cells):
            verts = mesh.triangle_vertices(c)
            cy = sum(v[1] for v in verts) / 3.0
            measures.append(lower if cy < 0.5 else upper)
        field = YoungMeasureField(mesh, tuple(measures))
        u = MeshDeformation.affine(mesh, Mat.diag(1.5, 1.0))
        battery = [orho_extend(named_testfn("frob_power", {"p": 2.0}), 4.0)]
        cert = check_thm3(field, u, 3.0, battery, 4.0)
        assert cert.verdict == FAIL
        assert any(c.name == "moment_field_curl_free" and c.status == FAIL
                   for c in cert.checks)

    def test_2d_consistent_moments_curl_free(self):
        mesh = Mesh.square(2, 2)
        field = YoungMeasureField.constant(
            mesh, AtomicMeasure.dirac(Mat.identity(2)))
        u = MeshDeformation.affine(mesh, Mat.identity(2))
        battery = [orho_extend(named_testfn("frob_power", {"p": 2.0}), 4.0)]
        cert = check_thm3(field, u, 3.0, battery, 4.0)
        curl = [c for c in cert.checks if c.name == "moment_field_curl_free"]
        assert curl and curl[0].status == PASS

    def test_convex_battery_regression(self, make_measure):
        # convex integrand: Jensen direction certified for any measure
        rho_t = 64.0
        battery = [orho_extend(named_testfn("frob_power", {"p": 2.0}), rho_t)]
        for _ in range(5):
            nu = make_measure(1)
            field = const_field(nu)
            from ymrelax.measure import first_moment
            g = first_moment(nu)
            u = MeshDeformation.affine(Mesh.interval(4), g)
            cert = check_thm3(field, u, 32.0, battery, rho_t)
            jensen = [c for c in cert.checks if c.name == "jensen_inequality"]
            assert jensen[0].status == PASS

    def test_battery_validated(self):
        field = const_field(AtomicMeasure.dirac(Mat.scalar(1.0)))
        u = MeshDeformation.affine(Mesh.interval(4), Mat.scalar(1.0))
        with pytest.raises(ValueError):
            check_thm3(field, u, 2.0, [], 3.0)  # empty battery
        wrong = [named_testfn("frob_power", {"p": 2.0})]  # not O(rho_tilde)
        with pytest.raises(ValueError):
            check_thm3(field, u, 2.0, wrong, 3.0)
        ok = [orho_extend(named_testfn("frob_power", {"p": 2.0}), 3.0)]
        with pytest.raises(ValueError):
            check_thm3(field, u, 3.0, ok, 3.0)  # rho_tilde must exceed rho

    def test_json_output(self):
        field = const_field(AtomicMeasure.dirac(Mat.scalar(1.0)))
        u = MeshDeformation.affine(Mesh.interval(4), Mat.scalar(1.0))
        battery = [orho_extend(named_testfn("quartic_well_1d"), 3.0)]
        cert = check_thm3(field, u, 2.0, battery, 3.0)
        d = cert.to_json_dict()
        assert d["theorem"] == "thm3"
        assert d["verdict"] == PASS
        assert d["details"]["battery_size"] == 1
