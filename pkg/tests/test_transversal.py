import numpy as np
import pytest

from hfreemaps.errors import BlowUp, CoverageGap
from hfreemaps.expr import parse
from hfreemaps.lie import parse_field
from hfreemaps.transversal import (
    BumpProfile,
    Window,
    build_tube,
    flow,
    glue,
    tube_function,
    verify_transversal,
    write_grid_csv,
)


@pytest.fixture(scope="module")
def profile():
    return BumpProfile()


class TestWindow:
    def test_bounds_validated(self):
        with pytest.raises(ValueError):
            Window(1, 0, 0, 1)
        with pytest.raises(ValueError):
            Window(0, 1, 0, 1, nx=1)

    def test_nodes_order(self):
        w = Window(0, 1, 0, 2, nx=3, ny=2)
        nodes = w.nodes()
        assert nodes.shape == (6, 2)
        assert np.array_equal(nodes[0], [0, 0])
        assert np.array_equal(nodes[2], [1, 0])
        assert np.array_equal(nodes[3], [0, 2])


class TestFlow:
    def test_constant_field(self, plane):
        xi = parse_field(plane, "1", "0")
        assert np.allclose(flow(xi, (0, 0), 1.0), [1.0, 0.0], atol=1e-12)

    def test_rotation_quarter_turn(self, plane):
        xi = parse_field(plane, "-y", "x")
        end = flow(xi, (1.0, 0.0), np.pi / 2)
        assert np.abs(end - [0.0, 1.0]).max() <= 1e-8

    def test_first_integral_conserved(self, stripe):
        dist, _, integral = stripe
        xi = dist.frame[0]
        q = flow(xi, (0.0, 0.0), 1.0)
        drift = (q[1] ** 2 - 1) * np.exp(q[0]) + 1.0
        assert abs(drift) <= 1e-7

    def test_long_time_conservation_rotation(self, plane, rng):
        xi = parse_field(plane, "-y", "x")
        for _ in range(5):
            p = rng.uniform(-2, 2, size=2)
            c0 = p[0] ** 2 + p[1] ** 2
            for t in (-5.0, 5.0):
                q = flow(xi, p, t)
                assert abs(q[0] ** 2 + q[1] ** 2 - c0) <= 1e-7 * max(1.0, c0)

    def test_long_time_conservation_stripe(self, stripe, rng):
        # trajectories hug the separatrix by t = 5, where the integral's
        # condition number is ~1e4; tighter local tolerance keeps the
        # drift within budget
        dist, _, integral = stripe
        xi = dist.frame[0]
        for _ in range(5):
            p = rng.uniform(-0.3, 0.3, size=2)
            c0 = (p[1] ** 2 - 1) * np.exp(p[0])
            for t in (-5.0, 5.0):
                q = flow(xi, p, t, rtol=1e-13, atol=1e-13)
                c1 = (q[1] ** 2 - 1) * np.exp(q[0])
                assert abs(c1 - c0) <= 1e-7 * max(1.0, abs(c0))

    def test_blowup_detected(self, plane):
        xi = parse_field(plane, "1+x^2", "0")
        with pytest.raises(BlowUp):
            flow(xi, (0.0, 0.0), 3.0, bbox=(np.array([-10.0, -10.0]),
                                            np.array([10.0, 10.0])))


class TestBumpProfile:
    def test_step_midpoint_exact(self, profile):
        assert profile.step(0.0) == 0.5

    def test_saturation(self, profile):
        assert profile.step(1.0) == 1.0
        assert profile.step(-1.0) == 0.0
        assert profile.step(7.0) == 1.0
        assert profile.step(-3.5) == 0.0

    def test_strictly_increasing_inside(self, profile):
        # near |t| = 1 the derivative is positive but smaller than the
        # resolution of the values, so strict growth of samples is only
        # observable away from the edges
        ts = np.linspace(-0.999, 0.999, 500)
        assert np.all(profile.step_deriv(ts) > 0)
        assert np.all(np.diff(profile.step(ts)) >= 0)
        inner = np.linspace(-0.9, 0.9, 200)
        assert np.all(np.diff(profile.step(inner)) > 0)

    def test_bump_support(self, profile):
        assert profile.bump(1.0) == 0.0
        assert profile.bump(-1.2) == 0.0
        assert profile.bump(0.0) == np.exp(-1.0)

    def test_symmetry(self, profile):
        ts = np.linspace(0.05, 0.95, 19)
        assert np.allclose(profile.step(ts) + profile.step(-ts), 1.0,
                           rtol=0, atol=1e-15)


class TestTubes:
    def test_constant_field_closed_form(self, plane, profile):
        # flow time along (1, 0) from the vertical transversal is x - x0
        w = Window(-1, 1, -1, 1, 41, 41)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w)
        tv = tube_function(xi, tube, profile)
        xs = w.xs()
        for ix in (0, 10, 20, 30, 40):
            expected = profile.step(xs[ix])
            column = tv.values[:, ix]
            assert np.allclose(column, expected, atol=5e-9)

    def test_midline_value(self, plane, profile):
        w = Window(-1, 1, -1, 1, 21, 21)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w)
        tv = tube_function(xi, tube, profile)
        assert np.allclose(tv.values[:, 10], 0.5, atol=1e-10)

    def test_saturated_sides(self, plane, profile):
        w = Window(-4, 4, -1, 1, 41, 11)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w, t_span=2.0)
        tv = tube_function(xi, tube, profile)
        assert np.all(tv.values[:, 0] == 0.0)   # x = -4 is beyond t = -1
        assert np.all(tv.values[:, -1] == 1.0)  # x = +4 is beyond t = +1

    def test_unclassifiable_node_raises(self, plane, profile):
        # truncate the transversal so nodes straight above its endpoint
        # sit exactly orthogonal to the flow direction there
        from hfreemaps.errors import OutsideTube
        w = Window(-1, 1, -3, 3, 11, 13)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w, max_samples=3)
        with pytest.raises(OutsideTube):
            tube_function(xi, tube, profile)


class TestGlue:
    def test_single_tube_constant_field(self, plane, profile):
        w = Window(-1, 1, -1, 1, 51, 51)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w)
        result = glue(xi, [tube], [1.0], profile, w)
        assert result.ok
        assert result.min_interior > 0

    def test_zero_weights_fail_verification(self, plane, profile):
        w = Window(-1, 1, -1, 1, 31, 31)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w)
        result = glue(xi, [tube], [0.0], profile, w)
        assert not result.ok
        assert result.min_interior == 0.0

    def test_coverage_gap_reported(self, plane, profile):
        # a single narrow-span tube cannot band-cover a wide window
        w = Window(-4, 4, -1, 1, 41, 11)
        xi = parse_field(plane, "1", "0")
        tube = build_tube(xi, (0.0, 0.0), w, t_span=2.0)
        with pytest.raises(CoverageGap) as info:
            glue(xi, [tube], [1.0], profile, w)
        assert len(info.value.cells) > 0

    def test_stripe_fixture(self, stripe, profile):
        dist, _, _ = stripe
        xi = dist.frame[0]
        w = Window(-1, 1, -1, 1, 101, 101)
        tubes = [build_tube(xi, (0.0, s), w) for s in (-0.9, 0.0, 0.9)]
        result = glue(xi, tubes, [1.0, 1.0, 1.0], profile, w)
        assert result.ok
        assert result.min_interior > 0.0

    def test_monotone_along_flow_direction(self, plane, profile):
        # for the coordinate field the glued function must increase in x
        w = Window(-1, 1, -1, 1, 41, 41)
        xi = parse_field(plane, "1", "0")
        tubes = [build_tube(xi, (s, 0.0), w) for s in (-0.5, 0.5)]
        result = glue(xi, tubes, [1.0, 2.0], profile, w)
        assert result.ok
        assert np.all(np.diff(result.values, axis=1) >= -1e-12)


class TestVerifyTransversal:
    def test_stripe_minimum(self, stripe):
        dist, f, _ = stripe
        rep = verify_transversal(dist.frame[0], f, Window(-1, 1, -1, 1, 101, 101))
        assert abs(rep.min_value - np.exp(-1)) <= 1e-12
        assert np.array_equal(rep.argmin, [-1.0, 0.0])

    def test_coordinate_field(self, plane):
        xi = parse_field(plane, "1", "0")
        rep = verify_transversal(xi, parse("x"), Window(-1, 1, -1, 1, 11, 11))
        assert rep.min_value == 1.0
        assert np.all(rep.lie_values == 1.0)

    def test_first_integral_flat(self, stripe):
        dist, _, integral = stripe
        rep = verify_transversal(dist.frame[0], integral,
                                 Window(-1, 1, -1, 1, 21, 21))
        assert abs(rep.min_value) <= 1e-14
        assert np.abs(rep.lie_values).max() <= 1e-14

    def test_sign_agreement_with_glue(self, stripe, profile):
        dist, _, _ = stripe
        xi = dist.frame[0]
        w = Window(-1, 1, -1, 1, 61, 61)
        tubes = [build_tube(xi, (0.0, s), w) for s in (-0.9, 0.0, 0.9)]
        result = glue(xi, tubes, [1.0, 1.0, 1.0], profile, w)
        assert result.ok
        interior = result.lie_values[1:-1, 1:-1]
        assert np.all(interior > 0)


def test_grid_csv_format(tmp_path, stripe):
    dist, f, _ = stripe
    w = Window(-1, 1, -1, 1, 5, 4)
    rep = verify_transversal(dist.frame[0], f, w)
    path = tmp_path / "grid.csv"
    write_grid_csv(path, w, rep.values, rep.lie_values)
    raw = path.read_bytes().decode()
    lines = raw.split("\n")
    assert lines[0] == "x,y,f,lie_f"
    assert len(lines) == 1 + 5 * 4 + 1  # header + rows + trailing newline
    assert "," not in lines[1].replace(",", "", 3)  # exactly four columns
    assert raw.count("\r") == 0
    first = lines[1].split(",")
    assert float(first[0]) == -1.0 and float(first[1]) == -1.0
