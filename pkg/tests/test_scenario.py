import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from irsho.scenario import (
    GeometryError,
    _moment,
    build_geometry,
    crossing_length_pdf,
    crossing_length_tail,
    default_offsets,
    expected_crossing_length,
    geometry_for,
)

GOLDEN = json.loads((Path(__file__).parent / "golden" / "crossing_length.json").read_text())
LAM = GOLDEN["lambda_b_per_m2"]


def test_expected_length_matches_golden():
    assert expected_crossing_length(LAM, GOLDEN["tail_mass"]) == pytest.approx(
        GOLDEN["expected_crossing_length_m"], rel=1e-7
    )


def test_density_is_normalized():
    assert _moment(LAM, 0, None) == pytest.approx(1.0, abs=1e-7)


def test_truncation_error_is_below_tail_mass():
    full = _moment(LAM, 1, None)
    assert full == pytest.approx(GOLDEN["expected_crossing_length_untruncated_m"], rel=1e-8)
    trunc = expected_crossing_length(LAM)
    # the dropped tail sits beyond ~L_max, so the mean loses at most a few L_max * tail
    assert 0 < full - trunc < 1e-5 * full


def test_length_scales_with_inverse_root_density():
    # a PPP scaled by k in density is the original shrunk by sqrt(k)
    assert expected_crossing_length(4 * LAM) == pytest.approx(0.5 * expected_crossing_length(LAM), rel=1e-6)


def test_pdf_values_agree_with_moment_cdf():
    # integral of the pdf over [a, b] equals tail(a) - tail(b)
    l = np.linspace(20.0, 620.0, 61)
    f = crossing_length_pdf(l, LAM)
    exact = crossing_length_tail(20.0, LAM) - crossing_length_tail(620.0, LAM)
    assert integrate.simpson(f, x=l) == pytest.approx(exact, abs=1e-5)


def test_pdf_rejects_bad_input():
    with pytest.raises(ValueError):
        crossing_length_pdf(-1.0, LAM)
    with pytest.raises(ValueError):
        crossing_length_pdf(10.0, 0.0)


def test_default_offsets_closed_form():
    # E[r] for the nearest PPP point is 1/(2 sqrt(lambda)); E|sin| = 2/pi
    r_o, r_t = default_offsets(LAM)
    assert r_o == pytest.approx(1.0 / (math.pi * math.sqrt(LAM)), rel=1e-10)
    assert r_o == pytest.approx(GOLDEN["default_offset_m"], rel=1e-10)
    assert r_t == -r_o


def test_symmetric_geometry():
    g = build_geometry(100.0, -100.0, 250.0, 20.0, 0.01)
    assert g.x_mid == pytest.approx(125.0)
    assert g.step_count == 1250
    assert g.delta_x == pytest.approx(0.2)
    # bisector passes through the midpoint and is perpendicular to BS_o -> BS_t
    assert float(g.h_original(125.0, 0.0)) == pytest.approx(0.0, abs=1e-12)
    assert float(g.h_original(0.0, 0.0)) > 0
    assert float(g.h_original(250.0, 0.0)) < 0
    # angle between path and bisector: tan(theta) = L / (r_o - r_t)
    assert math.tan(g.theta) == pytest.approx(250.0 / 200.0)


def test_step_frame_angles():
    g = build_geometry(100.0, -100.0, 250.0, 20.0, 0.01)
    fr = g.frame(500)
    assert fr.x_i == pytest.approx(100.0)
    assert fr.x_o == pytest.approx(math.hypot(100, 100))
    assert fr.x_t == pytest.approx(math.hypot(150, 100))
    # an IRS straight towards the original BS has zero angle to it
    ang_to_bs = math.atan2(100.0, -100.0)
    assert float(fr.phi_o(ang_to_bs)) == pytest.approx(0.0, abs=1e-12)
    ang_to_t = math.atan2(-100.0, 150.0)
    assert float(fr.phi_t(ang_to_t)) == pytest.approx(0.0, abs=1e-12)


def test_bad_geometry():
    with pytest.raises(GeometryError):
        build_geometry(1.0, 1.0, 0.0, 20.0, 0.01)
    with pytest.raises(GeometryError):
        build_geometry(1.0, -1.0, -5.0, 20.0, 0.01)
    with pytest.raises(GeometryError):
        build_geometry(1.0, -1.0, 5.0, 0.0, 0.01)


def test_geometry_for_defaults(default_cfg):
    g = geometry_for(default_cfg)
    assert g.L == pytest.approx(GOLDEN["expected_crossing_length_m"])
    assert g.r_o == pytest.approx(GOLDEN["default_offset_m"])
    assert g.step_count == math.ceil(g.L / 0.2)
