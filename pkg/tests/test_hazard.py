import numpy as np
import pytest

from app.errors import AgeTableError, MemberAgeError
from app.model.hazard import (
    Gender,
    HazardSchedule,
    Member,
    MpuSpec,
    derive_hazards,
    fixed_horizon_schedule,
    horizon_years,
    member_pmf,
    parse_age_table,
)

NINE = MpuSpec.of(
    ("M", 62), ("F", 63), ("M", 66), ("F", 67), ("F", 70),
    ("F", 72), ("M", 74), ("M", 75), ("F", 76),
)

SMALL_TABLE = "60 0.25 0.5\n61 0.25 0.25\n62 0.5 0.25\n"


def test_shipped_table_shape(age_table):
    assert age_table.start_age == 50
    assert age_table.end_age == 113
    assert age_table.max_age(Gender.MALE) == 111
    assert age_table.max_age(Gender.FEMALE) == 113
    assert age_table.probability(Gender.MALE, 50) == 0.005346265174752670
    assert age_table.probability(Gender.FEMALE, 50) == 0.003283385442263650


def test_couple_horizon(age_table):
    assert horizon_years(age_table, MpuSpec.of(("M", 65), ("F", 65))) == 48


def test_nine_member_unit_hazards(age_table):
    h = derive_hazards(age_table, NINE)
    assert h.s_max == 50
    assert h.stage_count == 50
    assert h.hazard(0) == pytest.approx(3.11971633617102e-16, rel=1e-12)
    assert h.hazard(25) == pytest.approx(0.077963887369063345, rel=1e-12)
    assert h.hazard(50) == pytest.approx(0.99999999997023048, rel=1e-12)
    assert h.hazard(50) == pytest.approx(1.0, abs=1e-9)


def test_unit_cdf_is_monotone_and_complete(age_table):
    cdf = derive_hazards(age_table, NINE).td_cdf()
    assert np.all(np.diff(cdf) >= -1e-15)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-9)


def test_member_pmfs_sum_to_one(age_table):
    h = derive_hazards(age_table, NINE)
    assert len(h.member_pmf_sums) == 9
    for total in h.member_pmf_sums:
        assert abs(total - 1.0) <= 1e-15


def test_hand_computed_hazards():
    table = parse_age_table(SMALL_TABLE)
    female = derive_hazards(table, MpuSpec.of(("F", 60)))
    np.testing.assert_allclose(female.hazards, [0.5, 0.5, 1.0], rtol=0, atol=1e-15)
    male = derive_hazards(table, MpuSpec.of(("M", 60)))
    np.testing.assert_allclose(male.hazards, [0.25, 1 / 3, 1.0], rtol=0, atol=1e-15)
    # last survivor of M60 and F61: F_TD = [0.125, 0.5, 1]
    couple = derive_hazards(table, MpuSpec.of(("M", 60), ("F", 61)))
    np.testing.assert_allclose(couple.hazards, [0.125, 3 / 7, 1.0], rtol=0, atol=1e-15)


def test_member_pmf_is_renormalized_and_reindexed():
    table = parse_age_table(SMALL_TABLE)
    pmf = member_pmf(table, Member(gender="F", age=61), 4)
    assert pmf == [0.5, 0.5, 0.0, 0.0]


def test_adding_a_member_never_shortens_or_raises_cdf(age_table):
    single = derive_hazards(age_table, MpuSpec.of(("M", 70)))
    pair = derive_hazards(age_table, MpuSpec.of(("M", 70), ("F", 72)))
    assert pair.s_max >= single.s_max
    n = single.s_max + 1
    assert np.all(pair.td_cdf()[:n] <= single.td_cdf() + 1e-12)


def test_member_outside_table_rejected(age_table):
    with pytest.raises(MemberAgeError):
        horizon_years(age_table, MpuSpec.of(("M", 112)))
    with pytest.raises(MemberAgeError):
        derive_hazards(age_table, MpuSpec.of(("F", 40)))


def test_fixed_horizon_schedule():
    h = fixed_horizon_schedule(30)
    assert h.fixed_horizon
    assert h.s_max == 30
    assert h.hazard(29) == 0.0 and h.hazard(30) == 1.0
    assert h.td_pmf()[30] == 1.0
    assert h == HazardSchedule(np.array([0.0] * 30 + [1.0]))
    with pytest.raises(ValueError):
        fixed_horizon_schedule(0)


def test_schedule_rejects_out_of_range_hazards():
    with pytest.raises(ValueError):
        HazardSchedule(np.array([0.2, 1.5]))
    with pytest.raises(ValueError):
        HazardSchedule(np.array([1.0]))


@pytest.mark.parametrize(
    "text, row",
    [
        ("", None),
        ("50 0.5 0.5\n52 0.5 0.5\n", 2),
        ("50 0.5 x\n51 0.5 0.5\n", 1),
        ("50 0.5\n", 1),
        ("50 -0.5 0.5\n51 1.5 0.5\n", 1),
        ("50 0.6 0.5\n51 0.5 0.5\n", None),
    ],
)
def test_malformed_age_tables(text, row):
    with pytest.raises(AgeTableError) as exc:
        parse_age_table(text)
    assert exc.value.row == row
