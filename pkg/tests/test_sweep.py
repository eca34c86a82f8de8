import numpy as np
import pytest

from rydberg_dtc.errors import ConfigError
from rydberg_dtc.model import ModelParams
from rydberg_dtc.persist import write_scan_csv
from rydberg_dtc.sweep import (
    Axis,
    CellClass,
    PhaseCell,
    PointResult,
    SweepSpec,
    critical_cycles,
    fit_log_nc,
    half_max_runs,
    is_single_lobe,
    parse_grid,
    peak_widths_at_half_max,
    phase_cells,
    phase_diagram,
    run_points,
    run_sweep,
    scaling_nc_vs_L,
    scan_detuning,
    symmetry_audit,
)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("-1:1:0.5", (-1.0, -0.5, 0.0, 0.5, 1.0)),
        ("2:5", (2.0, 3.0, 4.0, 5.0)),
        ("0.1,0.3", (0.1, 0.3)),
        ("0:0.3:0.1", (0.0, 0.1, 0.2, 0.3)),
        ("0.5", (0.5,)),
    ],
)
def test_parse_grid(text, expected):
    assert parse_grid(text) == pytest.approx(expected)


def test_parse_grid_step_count():
    g = parse_grid("-1:1:0.005")
    assert len(g) == 401 and g[0] == -1.0 and g[-1] == 1.0 and 0.0 in g


@pytest.mark.parametrize("text", ["", "1:0", "0:1:0", "0:1:-1", "a,b", "0:1:2:3", "nan,1"])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_grid(text)


def test_axis_validation():
    assert Axis("L", (2.0, 3.0)).grid == (2, 3)
    for name, grid in [("L", (2.5,)), ("L", (0,)), ("omega", (1,)), ("delta", ()), ("delta", (np.inf,))]:
        with pytest.raises(ConfigError):
            Axis(name, grid)


def test_spec_json_round_trip():
    spec = SweepSpec(
        ModelParams(L=6, epsilon=0.4, v=0.1, t2=15, variant="improved"),
        Axis("delta", (-0.1, 0.0, 0.1)),
        n_f_budget=500,
        outputs=("csv", "svg"),
    )
    again = SweepSpec.from_json(spec.to_json())
    assert again == spec
    assert len(again.points()) == 3
    d = spec.to_dict()
    d["axis1"]["grid"] = "-0.1:0.1:0.1"
    assert SweepSpec.from_dict(d).axis1.grid == pytest.approx((-0.1, 0.0, 0.1))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(n_f_budget=0),
        lambda d: d.update(extra=1),
        lambda d: d.pop("axis1"),
        lambda d: d.update(axis2={"name": "delta", "grid": [0.0]}),
        lambda d: d.update(mode="fast"),
    ],
)
def test_spec_rejects(mutate):
    d = SweepSpec(ModelParams(L=2), Axis("delta", (0.0,))).to_dict()
    mutate(d)
    with pytest.raises((ConfigError, ValueError)):
        SweepSpec.from_dict(d)
    with pytest.raises(ConfigError):
        SweepSpec.from_json("{not json")


def test_two_axis_points_order():
    spec = SweepSpec(ModelParams(L=2), Axis("L", (2, 3)), Axis("epsilon", (0.1, 0.2)))
    keys = [k for k, _ in spec.points()]
    assert keys == [(2, 0.1), (2, 0.2), (3, 0.1), (3, 0.2)]


def test_critical_cycles_modes_agree():
    p = ModelParams(L=4, epsilon=0.4, delta=0.1, v=0.1, t2=15)
    assert critical_cycles(p, 2000, "iterate") == critical_cycles(p, 2000, "spectral")
    assert critical_cycles(ModelParams(L=3), 100) == (100, True)


def test_failures_are_recorded():
    pts = [((2,), ModelParams(L=2, epsilon=0.1)), ((17,), ModelParams(L=17, epsilon=0.1))]
    res = run_points(pts, budget=100, threads=1)
    assert res[0].ok and res[0].n_c == 7
    assert not res[1].ok and "cap" in res[1].error


def test_independent_of_order_and_workers(tmp_path):
    spec = SweepSpec(
        ModelParams(L=4, epsilon=0.4, v=0.1, t2=15), Axis("delta", parse_grid("-0.3:0.3:0.05")), n_f_budget=3000
    )
    pts = spec.points()
    serial = run_points(pts, 3000, threads=1)
    parallel = run_points(pts[::-1], 3000, threads=3)
    a = write_scan_csv(tmp_path / "a.csv", serial).read_bytes()
    b = write_scan_csv(tmp_path / "b.csv", parallel).read_bytes()
    assert a == b


def test_scan_detuning_mirror_symmetric():
    spec = SweepSpec(ModelParams(L=4, epsilon=0.4, v=0.1, t2=15), Axis("delta", parse_grid("-0.3:0.3:0.1")), n_f_budget=3000)
    scan = scan_detuning(spec, mirror=True, threads=1)
    assert len(scan.points) == len(scan.mirrored) == 7
    assert scan.mirror_mismatches() == []
    assert all(r.params.v == -0.1 for r in scan.mirrored)
    with pytest.raises(ConfigError):
        scan_detuning(SweepSpec(ModelParams(L=2), Axis("v", (0.1,))))


def test_uncoupled_atoms_nc_independent_of_L():
    spec = SweepSpec(ModelParams(L=2, epsilon=0.1, delta=0.2), Axis("L", (2, 3, 4, 5, 6)), n_f_budget=1000)
    res = scaling_nc_vs_L(spec, threads=1)
    assert len(set(res.n_c)) == 1
    assert res.fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_excludes_censored_and_needs_three_points():
    fit = fit_log_nc([4, 5, 6, 7], [10, 20, 40, 1000], [False, False, False, True])
    assert fit.n_points == 3
    assert fit.slope == pytest.approx(np.log(2))
    assert fit_log_nc([4, 5, 6], [10, 20, 40], [False, True, False]) is None


def test_scaling_grows_with_interactions():
    spec = SweepSpec(
        ModelParams(L=4, delta=0.6, v=0.09, t2=15), Axis("L", (4, 5, 6, 7)), n_f_budget=20_000
    )
    res = scaling_nc_vs_L(spec, threads=1)
    assert np.all(np.diff(res.n_c) > 0)
    assert res.fit.slope > 0


def test_phase_cells_match_independent_recomputation():
    spec = SweepSpec(
        ModelParams(L=2, v=0.1, variant="simplified"),
        Axis("L", (2, 3, 4, 5)),
        Axis("epsilon", (-0.3, 0.1, 0.25)),
        n_f_budget=3000,
    )
    diagram = phase_diagram(spec, threads=1)
    assert len(diagram.cells) == 9
    for cell in diagram.cells:
        a = critical_cycles(spec.template.replace(L=cell.L, epsilon=cell.epsilon), 3000)[0]
        b = critical_cycles(spec.template.replace(L=cell.L - 1, epsilon=cell.epsilon), 3000)[0]
        assert cell.delta_n_c == a - b
        assert cell.cls is CellClass.of(a - b)
    assert any(c.cls is CellClass.GROWING for c in diagram.cells)


def test_phase_cell_classes():
    assert PhaseCell(3, 0.1, 0, CellClass.FLAT).cls is CellClass.FLAT
    with pytest.raises(ConfigError):
        PhaseCell(3, 0.1, 2, CellClass.FLAT)
    p = ModelParams(L=2)
    pts = [
        PointResult((L,), p.replace(L=L, epsilon=0.2), nc, False, 100)
        for L, nc in [(2, 5), (3, 9), (4, 9), (5, 7)]
    ]
    cells = phase_cells(pts)
    assert [c.cls.value for c in cells] == ["+", "0", "-"]
    from rydberg_dtc.sweep import PhaseDiagram

    assert PhaseDiagram(cells, pts).critical_size(0.2) == 4
    assert PhaseDiagram(cells[:1], pts).critical_size(0.2) is None


def test_spec_axis_types_checked():
    with pytest.raises(ConfigError):
        SweepSpec(ModelParams(L=2), Axis("delta", (0.0,)), 3000)


def test_phase_diagram_needs_two_axes():
    with pytest.raises(ConfigError):
        phase_diagram(SweepSpec(ModelParams(L=2), Axis("L", (2, 3))))


def test_symmetry_audit():
    rep = symmetry_audit(ModelParams(L=5, epsilon=0.3, v=0.1, t2=15), parse_grid("-0.5:0.5:0.25"))
    assert rep.ok and rep.n_points == 5 and rep.max_p_diff < 1e-10
    trivial = symmetry_audit(ModelParams(L=3), [0.0], n_f=50)
    assert trivial.ok and trivial.max_p_diff == 0.0


def test_half_max_helpers():
    x = np.arange(10) * 0.1
    y = np.array([0, 1, 10, 1, 0, 0, 8, 9, 0, 0], dtype=float)
    assert half_max_runs(x, y) == [(pytest.approx(0.2), pytest.approx(0.2)), (pytest.approx(0.6), pytest.approx(0.7))]
    assert peak_widths_at_half_max(x, y) == pytest.approx([0.0, 0.1])
    assert not is_single_lobe(x, y)
    assert is_single_lobe(x, np.array([0, 1, 5, 6, 7, 6, 5, 1, 0, 0.0]))
    assert half_max_runs([], []) == []


def test_run_sweep_generic_axis():
    spec = SweepSpec(ModelParams(L=2, epsilon=0.1), Axis("t2", (5.0, 10.0)), n_f_budget=200)
    res = run_sweep(spec, threads=1)
    assert [r.key for r in res] == [(5.0,), (10.0,)]


@pytest.mark.slow
def test_improved_envelope_sharpens_for_negative_epsilon():
    grid = parse_grid("-1:1:0.02")
    shape = {}
    for eps in (0.4, -0.4):
        spec = SweepSpec(ModelParams(L=8, epsilon=eps, v=0.1, t2=15, variant="improved"), Axis("delta", grid))
        scan = scan_detuning(spec, threads=1)
        runs = half_max_runs(scan.delta, scan.n_c)
        assert len(runs) == 1
        shape[eps] = (np.nanmax(scan.n_c), runs[0][1] - runs[0][0])
    assert shape[-0.4][0] > shape[0.4][0]
    assert shape[-0.4][1] < shape[0.4][1]
