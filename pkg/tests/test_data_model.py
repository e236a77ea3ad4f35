import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dropsindy.data_model import (
    AIR,
    MEASURED_BALLS,
    SIMULATED_BALLS,
    BallSpec,
    FluidSpec,
    Trajectory,
    add_gaussian_noise,
    group_by_ball,
    load_trajectories,
    make_rng,
    time_to_fall_distance,
    trajectories_from_json,
    trajectories_to_json,
    write_trajectories,
)
from dropsindy.errors import NotReachedError, ParseError, ValidationError

from conftest import quadratic_trajectory


class TestTrajectory:
    def test_valid(self):
        t = Trajectory([0, 0.1, 0.2], [3, 2, 1], "a", 2)
        assert len(t) == 3
        assert t.key == ("a", 2)
        assert t.dt == pytest.approx(0.1)
        assert t.is_uniform()

    @pytest.mark.parametrize(
        "times, heights",
        [
            ([0, 1], [1, 2]),
            ([0, 1, 2], [1, 2]),
            ([0, 1, 1], [1, 2, 3]),
            ([0, 2, 1], [1, 2, 3]),
            ([0, 1, 2], [1, np.nan, 3]),
            ([0, np.inf, 2], [1, 2, 3]),
        ],
    )
    def test_invalid(self, times, heights):
        with pytest.raises(ValidationError):
            Trajectory(times, heights)

    def test_immutable(self):
        t = Trajectory([0, 1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            t.heights[0] = 5.0

    def test_uniformity_gate(self):
        t = Trajectory([0, 0.1, 0.25], [1, 2, 3])
        assert not t.is_uniform()
        with pytest.raises(ValidationError):
            t.require_uniform()

    def test_negative_heights_allowed(self):
        Trajectory([0, 1, 2], [1, -5, -20])

    def test_dict_round_trip(self):
        t = quadratic_trajectory()
        back = Trajectory.from_dict(json.loads(json.dumps(t.to_dict())))
        np.testing.assert_array_equal(back.heights, t.heights)
        assert back.key == t.key


class TestSpecs:
    def test_ball_derived_quantities(self):
        b = BallSpec(0.033025, 0.056699, "tennis")
        assert b.diameter == pytest.approx(0.06605)
        assert b.area == pytest.approx(math.pi * 0.033025**2)
        assert b.density == pytest.approx(0.056699 / (4 / 3 * math.pi * 0.033025**3))

    @pytest.mark.parametrize("r, m", [(0, 1), (1, 0), (-1, 1), (math.inf, 1)])
    def test_ball_invalid(self, r, m):
        with pytest.raises(ValidationError):
            BallSpec(r, m)

    def test_fluid(self):
        assert AIR.density == 1.211
        assert AIR.dynamic_viscosity == 1.82e-5
        with pytest.raises(ValidationError):
            FluidSpec(0, 1)

    def test_tables(self):
        assert len(MEASURED_BALLS) == 9
        assert SIMULATED_BALLS[1].radius == 0.033


CSV3 = "ball_id,drop_id,time_s,height_m\nb,1,0,35\nb,1,0.0666666667,34.9\nb,1,0.1333333333,34.8\n"


class TestCsv:
    def test_minimal(self):
        (t,) = load_trajectories(CSV3)
        assert len(t) == 3 and t.key == ("b", 1)

    def test_grouping(self):
        rows = ["ball_id,drop_id,time_s,height_m"]
        for ball in ("a", "b"):
            for drop in (1, 2):
                rows += [f"{ball},{drop},{k / 15},{35 - k}" for k in range(3)]
        trajs = load_trajectories("\n".join(rows) + "\n")
        assert [t.key for t in trajs] == [("a", 1), ("a", 2), ("b", 1), ("b", 2)]

    def test_interleaved_groups(self):
        text = "ball_id,drop_id,time_s,height_m\na,1,0,1\nb,1,0,1\na,1,1,0\nb,1,1,0\na,1,2,-1\nb,1,2,-1\n"
        assert [len(t) for t in load_trajectories(text)] == [3, 3]

    def test_out_of_order(self):
        text = "ball_id,drop_id,time_s,height_m\nb,1,0,3\nb,1,0.2,2\nb,1,0.1,1\n"
        with pytest.raises(ValidationError):
            load_trajectories(text)

    def test_malformed_row_line_number(self):
        text = "ball_id,drop_id,time_s,height_m\nb,1,0,3\nb,1,oops,2\n"
        with pytest.raises(ParseError) as exc:
            load_trajectories(text)
        assert exc.value.line == 3
        assert "line 3" in str(exc.value)

    def test_short_row(self):
        with pytest.raises(ParseError):
            load_trajectories("ball_id,drop_id,time_s,height_m\nb,1,0\n")

    def test_missing_header(self):
        with pytest.raises(ParseError):
            load_trajectories("a,b,c\n1,2,3\n")

    def test_too_few_rows_in_group(self):
        with pytest.raises(ValidationError):
            load_trajectories("ball_id,drop_id,time_s,height_m\nb,1,0,3\nb,1,1,2\n")

    def test_no_rows(self):
        with pytest.raises(ValidationError):
            load_trajectories("ball_id,drop_id,time_s,height_m\n")

    def test_crlf_and_extra_columns(self):
        text = CSV3.replace("height_m", "height_m,velocity_ms").replace("\n", ",0\r\n")
        text = text.replace("height_m,velocity_ms,0", "height_m,velocity_ms")
        (t,) = load_trajectories(io.StringIO(text, newline=""))
        assert len(t) == 3

    def test_path(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text(CSV3)
        assert len(load_trajectories(p)) == 1
        assert len(load_trajectories(str(p))) == 1

    @given(
        st.lists(
            st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False), min_size=3, max_size=30
        )
    )
    def test_round_trip(self, heights):
        t = Trajectory(np.arange(len(heights)) / 15.0, heights, "x y", 7)
        buf = io.StringIO()
        write_trajectories([t], buf)
        (back,) = load_trajectories(buf.getvalue())
        np.testing.assert_allclose(back.times, t.times, rtol=1e-12, atol=0)
        np.testing.assert_allclose(back.heights, t.heights, rtol=1e-12, atol=0)
        assert back.key == t.key

    def test_extra_columns(self):
        t = quadratic_trajectory(5)
        buf = io.StringIO()
        write_trajectories([t], buf, {"velocity_ms": [np.zeros(5)]})
        assert buf.getvalue().splitlines()[0].endswith("velocity_ms")

    def test_json(self):
        ts = [quadratic_trajectory(), Trajectory([0, 1, 2], [0, 1, 2], "z", 3)]
        back = trajectories_from_json(trajectories_to_json(ts))
        assert [b.key for b in back] == [t.key for t in ts]
        assert set(json.loads(trajectories_to_json(ts))[0]) == {"ball_id", "drop_id", "times", "heights"}


class TestNoise:
    def test_zero_identity(self):
        t = quadratic_trajectory()
        np.testing.assert_array_equal(add_gaussian_noise(t, 0.0, 1).heights, t.heights)

    def test_negative(self):
        with pytest.raises(ValueError):
            add_gaussian_noise(quadratic_trajectory(), -0.1, 0)

    def test_deterministic(self):
        t = quadratic_trajectory()
        a = add_gaussian_noise(t, 0.1, 42)
        b = add_gaussian_noise(t, 0.1, 42)
        np.testing.assert_array_equal(a.heights, b.heights)
        np.testing.assert_array_equal(a.times, t.times)

    def test_seeds_differ(self):
        t = quadratic_trajectory(10)
        assert np.any(add_gaussian_noise(t, 0.1, 1).heights != add_gaussian_noise(t, 0.1, 2).heights)

    def test_law_of_large_numbers(self):
        n = 100_000
        t = Trajectory(np.arange(n, dtype=float), np.zeros(n))
        sd = np.std(add_gaussian_noise(t, 0.1, 7).heights, ddof=1)
        assert abs(sd - 0.1) / 0.1 < 0.02

    def test_generator_is_pcg64(self):
        assert isinstance(make_rng(0).bit_generator, np.random.PCG64)


class TestFallTime:
    def test_closed_form(self):
        t = quadratic_trajectory(50)
        assert time_to_fall_distance(t, 4.9) == pytest.approx(1.0, abs=1 / 15)

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            time_to_fall_distance(quadratic_trajectory(), 0.0)

    def test_not_reached(self):
        t = quadratic_trajectory(10)
        with pytest.raises(NotReachedError) as exc:
            time_to_fall_distance(t, 1000)
        assert exc.value.max_descent == pytest.approx(35 - t.heights[-1])

    @given(st.floats(0.01, 50), st.floats(0.01, 50))
    def test_monotone(self, a, b):
        t = quadratic_trajectory(60)
        lo, hi = sorted((a, b))
        assert time_to_fall_distance(t, lo) <= time_to_fall_distance(t, hi)


def test_group_by_ball_sorts_drops():
    ts = [Trajectory([0, 1, 2], [0, 1, 2], "a", 2), Trajectory([0, 1, 2], [0, 1, 2], "a", 1)]
    assert [t.drop_id for t in group_by_ball(ts)["a"]] == [1, 2]
