from fractions import Fraction

import pytest

from subhess.constructions import DoublingParams, doubling_cascade, doubling_laminate
from subhess.laminate import moment
from subhess.scalars import Iv
from subhess.sym2 import SymMat2
from subhess.synthesizer import realize_laminate, realize_simple, staircase_build
from subhess.verifier import (
    area_fractions,
    boundary_check,
    continuity_audit,
    hessian_l1,
    hessian_l1_total,
    integrate_phi,
    items_to_csv_rows,
    lp_divergence_table,
    mean_phi,
    min_trace,
    neg_part_lq,
    potential_report,
    region_area,
    trail_proximity,
    write_csv,
    ReportItem,
)

F = Fraction
UNIT = (F(0), F(0), F(1), F(1))
TINY = F(1, 2**60)


def simple_rational():
    base = SymMat2.diag(1, 1)
    return realize_simple(base, SymMat2.diag(2, 1), SymMat2.diag(0, 1), F(1, 2), UNIT, F(1, 2))


SIMPLE = simple_rational()
LAM, PARAMS = doubling_laminate(F(3, 2))
DOUBLING = realize_laminate(LAM, UNIT, F(1, 4))
STAIR = staircase_build(2)


class TestRegions:
    def test_whole_domain_area(self):
        assert region_area(SIMPLE) == 1
        assert region_area(DOUBLING) == 1
        assert region_area(STAIR.potential) == 1

    def test_level_partition(self):
        total = region_area(DOUBLING, ("level", 0)) + region_area(DOUBLING, ("level", 1))
        assert total == 1

    def test_omega_nesting(self):
        pot = STAIR.potential
        a1 = region_area(pot, ("omega", 1))
        a2 = region_area(pot, ("omega", 2))
        assert a1 == STAIR.layers[0].omega_area
        assert a2 == STAIR.layers[1].omega_area
        assert 0 < a2 < a1 < 1

    def test_atom_region(self):
        rows = area_fractions(SIMPLE)
        for row in rows:
            assert region_area(SIMPLE, ("atom", row.atom_tag)) == row.area

    def test_bad_region(self):
        with pytest.raises(ValueError):
            region_area(SIMPLE, ("quadrant", 3))

    def test_zero_area_region(self):
        with pytest.raises(ValueError):
            mean_phi(SIMPLE, "trace", ("level", 99))


class TestMeans:
    def test_trace_identity_contained(self):
        # clamped boundary forces mean trace = trace(base) = 2
        enc = mean_phi(SIMPLE, "trace")
        assert enc.contains(2)
        enc2 = mean_phi(DOUBLING, "trace")
        assert enc2.contains(2)

    def test_hessian_l1_vs_moment(self):
        got = hessian_l1(DOUBLING)
        want = moment(LAM, "l1_diag")
        # realized mean sits within eps of the laminate moment
        assert abs(got - want).hi <= F(1, 4) * want.hi
        assert hessian_l1_total(DOUBLING) == got  # unit area

    def test_neg_part_two_sided(self):
        q = F(3, 2)
        enc = neg_part_lq(DOUBLING, q, 1)
        want = moment(LAM, ("neg_pow", 1, q))
        assert 0 < enc.lo <= enc.hi
        assert enc.lo >= F(1, 2) * want.lo
        assert enc.hi <= 2 * want.hi

    def test_neg_part_zero_when_sign_definite(self):
        # every Hessian in the simple pattern has H22 = 1
        enc = neg_part_lq(SIMPLE, F(3, 2), 1)
        assert enc == Iv(0)

    def test_neg_part_rejects_bad_exponent(self):
        with pytest.raises(ValueError):
            neg_part_lq(SIMPLE, F(1, 2), 0)
        with pytest.raises(ValueError):
            neg_part_lq(SIMPLE, F(3, 2), 2)

    def test_min_trace_simple(self):
        mt = min_trace(SIMPLE)
        assert mt.hi == 1  # the C atom's trace, exactly
        assert 0 < mt.lo <= 1

    def test_min_trace_staircase_nonnegative(self):
        # certified subharmonicity of the whole staircase
        assert min_trace(STAIR.potential).lo >= 0

    def test_trail_proximity_within_band(self):
        # builders budget 3 eps / 4 for the Hessian band
        assert trail_proximity(SIMPLE).hi <= F(3, 8)
        assert trail_proximity(DOUBLING).hi <= F(3, 16)

    def test_lp_divergence_table(self):
        rows = lp_divergence_table(DOUBLING, [F(11, 10), F(3, 2)], 1)
        assert len(rows) == 2 and all(r["i"] == 1 for r in rows)
        assert rows[0]["mean"].lo > 0


class TestFractionsAndAudit:
    def test_fraction_rows_certified(self):
        rows = area_fractions(DOUBLING)
        assert [r.atom_tag for r in rows] == ["0.B", "0.C.B", "0.C.C"]
        for row in rows:
            assert row.ok and row.fraction >= row.required
        total_weight = sum((r.weight for r in rows), Iv(0))
        assert total_weight.contains(1)

    def test_staircase_terminal_fraction(self):
        rows = area_fractions(STAIR.potential)
        terminal = [r for r in rows if r.atom_tag.endswith(".b.B")]
        assert len(terminal) == 1
        assert terminal[0].area == STAIR.terminal_omega_area

    def test_boundary_check_passthrough(self):
        rep = boundary_check(SIMPLE)
        assert rep["exact"] and rep["closure_width"] == 0

    def test_continuity_audit_rational_exact(self):
        audit = continuity_audit(SIMPLE)
        assert audit["checks"] == audit["exact"]
        assert audit["max_width"] == 0

    def test_continuity_audit_irrational_certified(self):
        audit = continuity_audit(DOUBLING)
        assert audit["max_width"] <= TINY
        assert audit["exact"] >= 3  # child handoff entries are exact

    def test_cascade_depth_neg_part_floor(self):
        # the certified floor must clear c0 * m up to the ramp-area loss
        lam, params = doubling_cascade(F(13, 10), 3)
        pot = realize_laminate(lam, UNIT, F(1, 10), dev_cap=F(3, 4))
        enc = neg_part_lq(pot, F(13, 10), 0)
        assert enc.lo > F(3, 10)


class TestReports:
    def test_potential_report_names_unique(self):
        items = potential_report(SIMPLE, q_list=[F(3, 2)])
        names = [it.name for it in items]
        assert len(names) == len(set(names))
        by_name = dict(zip(names, items))
        assert by_name["boundary_deviation"].value == Iv(0)

    def test_csv_rows_directed(self):
        items = [ReportItem("x", Iv(F(1, 3)))]
        rows = items_to_csv_rows(items, digits=5)
        lo, hi = rows[1][1], rows[1][2]
        assert Fraction(lo) <= F(1, 3) <= Fraction(hi)
        assert lo != hi  # 1/3 has no exact 5-digit decimal

    def test_csv_deterministic(self, tmp_path):
        items = potential_report(SIMPLE)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(str(p1), items_to_csv_rows(items))
        write_csv(str(p2), items_to_csv_rows(potential_report(SIMPLE)))
        assert p1.read_bytes() == p2.read_bytes()
        assert p1.read_bytes().startswith(b"name,lower,upper,note")
