import math

import numpy as np
import pytest

from penflow import (AssemblyConfig, ConfigurationError, DegenerateInputError,
                     DomainSpec, EPSILON_SWEEP, ErrorRecord, MESH_SWEEP,
                     PLAIN_B, SweepBase, build_spaces, records_to_csv,
                     regression_slope, restrict_state, run_sweep)


def _pull(x):
    x = np.asarray(x)
    out = np.zeros(x.shape)
    out[..., 0] = 10.0 * x[..., 1]
    return out


@pytest.fixture(scope="module")
def sweep_base():
    spec = DomainSpec(outer=(0.0, 0.0, 1.0, 1.0), h_mesh=0.09,
                      obstacles=(("disk", (0.5, 0.5), 0.2),))
    cfg = AssemblyConfig(nu=1.0, eps=0.1, traction=_pull,
                         divergence_form=PLAIN_B)
    return SweepBase(spec, cfg)


def test_regression_slope_recovers_exact_line():
    pts = [(x, 2.0 * x + 1.0) for x in (0.0, 0.7, 1.3, 2.0)]
    assert np.isclose(regression_slope(pts), 2.0, atol=1e-12)


def test_regression_slope_matches_polyfit(rng):
    x = rng.uniform(-3, 3, size=40)
    y = 0.8 * x - 0.3 + 0.05 * rng.standard_normal(40)
    want = np.polyfit(x, y, 1)[0]
    assert np.isclose(regression_slope(list(zip(x, y))), want, atol=1e-12)


def test_regression_slope_rejects_degenerate_input():
    with pytest.raises(DegenerateInputError):
        regression_slope([(1.0, 2.0)])
    with pytest.raises(DegenerateInputError):
        regression_slope([(1.0, 2.0), (1.0, 5.0)])


def test_error_record_validates_and_serializes():
    rec = ErrorRecord(0.1, 0.05, 0.02, 0.07, 0.11, 3)
    d = rec.as_dict()
    assert d["epsilon"] == 0.1 and d["newton_iters"] == 3
    with pytest.raises(ConfigurationError):
        ErrorRecord(0.1, 0.05, float("nan"), 0.07, 0.11, 3)
    with pytest.raises(ConfigurationError):
        ErrorRecord(0.1, 0.05, -1.0, 0.07, 0.11, 3)


def test_records_csv_parses_back():
    recs = [ErrorRecord(0.5, 0.1, 0.2, 0.3, 0.15, 2),
            ErrorRecord(0.1, 0.1, 0.04, 0.12, 0.16, 3)]
    text = records_to_csv(recs)
    lines = text.strip().splitlines()
    assert lines[0].split(",")[:4] == ["epsilon", "mesh_size", "l2_rel",
                                      "h1_rel"]
    row = lines[1].split(",")
    assert float(row[0]) == 0.5 and float(row[2]) == 0.2


def test_restrict_state_picks_parent_values(square_disk_conforming):
    full, fluid = square_disk_conforming
    lay = build_spaces(full)
    Y = np.arange(2 * lay.N1, dtype=float)
    P = np.arange(lay.N2, dtype=float) + 1000.0
    Ys, Ps = restrict_state(lay, fluid, Y, P)
    sub_lay_n1 = fluid.num_vertices + fluid.num_triangles
    assert Ys.shape == (2 * sub_lay_n1,)
    # vertex entries carry over by parent id, in both components
    assert np.array_equal(Ys[:fluid.num_vertices],
                          Y[fluid.parent_vertex_ids])
    assert np.array_equal(
        Ys[sub_lay_n1:sub_lay_n1 + fluid.num_vertices],
        Y[lay.N1 + fluid.parent_vertex_ids])
    assert np.array_equal(Ps, P[fluid.parent_vertex_ids])


def test_epsilon_sweep_errors_shrink(sweep_base):
    records = run_sweep(EPSILON_SWEEP, (0.5, 0.1, 0.02), sweep_base)
    l2 = [r.l2_rel for r in records]
    assert all(b < a for a, b in zip(l2, l2[1:]))
    assert all(r.mesh_size == records[0].mesh_size for r in records)
    assert all(r.div_norm_omega > 0 for r in records)
    pts = [(math.log10(r.epsilon), math.log10(r.l2_rel)) for r in records]
    assert regression_slope(pts) > 0.3


def test_mesh_sweep_errors_shrink(sweep_base):
    records = run_sweep(MESH_SWEEP, (0.14, 0.07), sweep_base)
    assert records[1].l2_rel < records[0].l2_rel
    assert records[1].mesh_size < records[0].mesh_size
    assert all(r.epsilon == 0.1 for r in records)


def test_sweep_kind_is_validated(sweep_base):
    with pytest.raises(ConfigurationError):
        run_sweep("spice", (0.5, 0.1), sweep_base)


def test_sweep_base_rejects_unknown_coefficient_mode():
    spec = DomainSpec(outer=(0.0, 0.0, 1.0, 1.0), h_mesh=0.2,
                      obstacles=(("disk", (0.5, 0.5), 0.2),))
    with pytest.raises(ConfigurationError):
        SweepBase(spec, AssemblyConfig(), coefficient_mode="nearest")
