"""
Sweep harness and command line: rate fitting, the coupling scale rule,
verdict logic, CSV determinism, config loading, plotting, and process
exit codes.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from plasmonres.sweep import (
    SweepConfig,
    SweepResult,
    CSV_COLUMNS,
    run_sweep,
    fit_blowup_rate,
    scale_for_delta,
    clear_operator_cache,
)
from plasmonres import sweep as sweep_module
from plasmonres import cli as cli_module
from plasmonres.cli import (
    main,
    validate,
    emit_plot,
    load_sweep_config,
    ConfigError,
    EXIT_OK,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_VALIDATION,
)
from plasmonres.np_spectrum import sphere_spectrum


def _deltas(lo, hi, n):
    return np.geomspace(hi, lo, n)


def test_fit_exact_inverse_law():
    rows = [(d, 7.0 / d) for d in _deltas(1e-5, 1e-2, 13)]
    slope, (lo, hi) = fit_blowup_rate(rows)
    assert abs(slope + 1.0) < 1e-12
    assert hi - lo < 1e-10


def test_fit_flat_and_modulated():
    rows = [(d, 4.2) for d in _deltas(1e-5, 1e-2, 13)]
    slope, _ = fit_blowup_rate(rows)
    assert abs(slope) < 1e-12
    rows = [(d, (1.0 + 0.1 * np.sin(np.log(d))) / d)
            for d in _deltas(1e-5, 1e-2, 13)]
    slope, (lo, hi) = fit_blowup_rate(rows)
    assert lo < slope < hi
    assert -1.1 < slope < -0.9


def test_fit_guards():
    with pytest.raises(ValueError):
        fit_blowup_rate([(d, 1.0 / d) for d in _deltas(1e-3, 1e-2, 4)])
    with pytest.raises(ValueError):
        fit_blowup_rate([(d, 1.0 / d) for d in _deltas(2e-3, 1e-2, 8)])


def test_scale_rule():
    # 3D: s = c delta; 2D: s^2 |ln s| = c delta solved to high accuracy
    assert scale_for_delta(1e-4, 0.01, 3) == pytest.approx(1e-6, rel=1e-15)
    for delta in (1e-2, 1e-4, 1e-5):
        s = scale_for_delta(delta, 0.01, 2)
        assert abs(s * s * abs(np.log(s)) - 0.01 * delta) < 1e-12 * 0.01 * delta
    with pytest.raises(ValueError):
        scale_for_delta(10.0, 0.05, 2)  # target scale leaves s << 1
    with pytest.raises(ValueError):
        scale_for_delta(-1e-3, 0.01, 2)


def _sphere_config(tmp_path, **overrides):
    base = dict(dim=3, geometry=(8, 1.0), eps_c=-2.0, omega0=1.0,
                a=(0.0, 0.0, 1.0), z=(0.0, 0.0, 2.0),
                csv_path=str(tmp_path / "sweep.csv"),
                delta_max=1e-2, delta_min=1e-4, points_per_decade=3)
    base.update(overrides)
    return SweepConfig(**base)


def test_sweep_config_validation(tmp_path):
    _sphere_config(tmp_path)
    with pytest.raises(ValueError):
        _sphere_config(tmp_path, coupling_c=0.5)
    with pytest.raises(ValueError):
        _sphere_config(tmp_path, solver="magic")
    with pytest.raises(ValueError):
        _sphere_config(tmp_path, delta_max=1e-5, delta_min=1e-2)
    with pytest.raises(ValueError):
        _sphere_config(tmp_path, points_per_decade=0)
    with pytest.raises(ValueError):
        _sphere_config(tmp_path, workers=0)
    with pytest.raises(ValueError):
        _sphere_config(tmp_path, omega0=1e4)  # omega cap at the top of the grid


def test_delta_grid_shape(tmp_path):
    cfg = _sphere_config(tmp_path)
    grid = cfg.delta_grid()
    assert grid[0] == pytest.approx(1e-2, rel=1e-12)
    assert grid[-1] == pytest.approx(1e-4, rel=1e-12)
    assert np.all(np.diff(grid) < 0)
    assert len(grid) == 7


def test_sweep_3d_resonant_csv_contract(tmp_path):
    clear_operator_cache()
    cfg = _sphere_config(tmp_path, solver="both")
    result = run_sweep(cfg)
    assert result.verdict == "resonant"
    assert -1.15 < result.slope < -0.85
    assert result.invalid_fraction == 0.0
    with open(cfg.csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CSV_COLUMNS)
    body = rows[1:]
    assert len(body) == 2 * 7
    deltas = [float(r[0]) for r in body]
    assert deltas == sorted(deltas, reverse=True)
    for i in range(0, len(body), 2):
        assert body[i][6] == "direct" and body[i + 1][6] == "spectral"
        assert body[i][0] == body[i + 1][0]
    # energies actually blow up across the grid
    energies = [float(r[3]) for r in body if r[6] == "direct"]
    assert energies[-1] > 50.0 * energies[0]


def _masked_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    idx = rows[0].index("wall_time_ms")
    return [tuple(v for j, v in enumerate(r) if j != idx) for r in rows]


def test_sweep_determinism_across_workers(tmp_path):
    cfg1 = _sphere_config(tmp_path, csv_path=str(tmp_path / "a.csv"))
    cfg2 = _sphere_config(tmp_path, csv_path=str(tmp_path / "b.csv"), workers=2)
    run_sweep(cfg1)
    run_sweep(cfg2)
    assert _masked_csv(tmp_path / "a.csv") == _masked_csv(tmp_path / "b.csv")


def test_sweep_3d_bounded_off_resonance(tmp_path):
    cfg = _sphere_config(tmp_path, eps_c=-5.0, solver="spectral")
    result = run_sweep(cfg)
    assert result.verdict == "bounded"
    energies = [r.energy_norm for r in result.rows]
    assert max(energies) / min(energies) < 2.0


def test_sweep_2d_verdict_stable_under_refinement(tmp_path):
    from plasmonres.geometry import make_curve, quadrature_nodes
    verdicts, slopes = [], []
    for n in (96, 192):
        nodes = quadrature_nodes(make_curve("ellipse", a=2.0, b=1.0), n)
        # the cosine-sector slot carries the eps = -2 resonance, so the
        # dipole moment must have even parity across the long axis
        cfg = SweepConfig(dim=2, geometry=nodes, eps_c=-2.0, omega0=1.0,
                          a=(1.0, 0.0), z=(3.0, 0.0),
                          csv_path=str(tmp_path / f"e{n}.csv"),
                          delta_max=1e-2, delta_min=1e-4,
                          points_per_decade=3, solver="spectral")
        result = run_sweep(cfg)
        verdicts.append(result.verdict)
        slopes.append(result.slope)
    assert verdicts == ["resonant", "resonant"]
    assert abs(slopes[0] - slopes[1]) < 1e-3


def test_sweep_invalid_fraction_forces_inconclusive(tmp_path, monkeypatch):
    original = sweep_module._sweep_point

    def flaky(config, ctx, delta):
        if delta < 3e-4:
            s = config.scale_for(delta)
            return [sweep_module._failed_row(delta, s, config.omega0 * s, name)
                    for name in ("direct", "spectral")]
        return original(config, ctx, delta)

    monkeypatch.setattr(sweep_module, "_sweep_point", flaky)
    cfg = _sphere_config(tmp_path, delta_min=1e-5, points_per_decade=4)
    result = run_sweep(cfg)
    assert result.invalid_fraction > 0.3
    assert result.verdict == "inconclusive"


def test_resonant_cluster_triple_on_sphere():
    sph = sphere_spectrum(8, 1.0)
    cluster = sweep_module._resonant_cluster(sph, -2.0)
    assert len(cluster) == 3
    assert all(abs(sph.lambdas[i] - 1.0 / 6.0) < 1e-12 for i in cluster)


def test_operator_cache_bounded(tmp_path):
    clear_operator_cache()
    cfg = _sphere_config(tmp_path)
    run_sweep(cfg)
    assert 0 < len(sweep_module._OPERATOR_CACHE) <= sweep_module._CACHE_MAX


# ---------------------------------------------------------------- CLI


def test_cli_spectrum_sphere_clusters(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    rc = main(["spectrum", "--geometry", "sphere:1.0", "--degree", "4",
               "--output", str(out)])
    assert rc == EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 25
    sizes = {}
    for r in rows:
        sizes[r["cluster"]] = sizes.get(r["cluster"], 0) + 1
    assert sorted(sizes.values()) == [1, 3, 5, 7, 9]


def test_cli_spectrum_ellipse_simple(tmp_path):
    out = tmp_path / "spec.csv"
    rc = main(["spectrum", "--geometry", "ellipse:2,1", "--nodes", "64",
               "--output", str(out)])
    assert rc == EXIT_OK
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    lam = [float(r["lambda"]) for r in rows]
    assert abs(lam[0] - 0.5) < 1e-10
    # the leading nonzero pair is simple: distinct cluster ids
    assert rows[1]["cluster"] != rows[2]["cluster"]


def test_cli_solve_both_routes(capsys):
    rc = main(["solve", "--dim", "3", "--geometry", "sphere:1.0",
               "--degree", "8", "--eps-c", "-2", "--delta", "1e-3",
               "--scale", "1e-5", "--omega0", "1.0",
               "--dipole-a", "0,0,1", "--dipole-z", "0,0,2",
               "--solver", "both"])
    assert rc == EXIT_OK
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("solver=")]
    assert len(lines) == 2
    vals = [float(l.split("energy_norm=")[1].split()[0]) for l in lines]
    assert abs(vals[0] - vals[1]) < 1e-3 * abs(vals[0])


def test_cli_sweep_from_json(tmp_path, capsys):
    csv_path = tmp_path / "out.csv"
    svg_path = tmp_path / "out.svg"
    config = {
        "dim": 3,
        "geometry": {"kind": "sphere", "radius": 1.0, "degree": 8},
        "eps_c": -2.0, "omega0": 1.0,
        "a": [0.0, 0.0, 1.0], "z": [0.0, 0.0, 2.0],
        "csv_path": str(csv_path),
        "delta_max": 1e-2, "delta_min": 1e-4,
        "points_per_decade": 3, "solver": "spectral",
        "plot_path": str(svg_path),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    rc = main(["sweep", "--config", str(cfg_path)])
    assert rc == EXIT_OK
    assert csv_path.exists() and svg_path.exists()
    out = capsys.readouterr().out
    assert "verdict=resonant" in out
    svg = svg_path.read_text()
    assert svg.count("<circle") == 7
    assert "slope = -1.0" in svg


def test_cli_config_rejects_unknown_keys(tmp_path):
    base = {
        "dim": 3, "geometry": {"kind": "sphere", "radius": 1.0, "degree": 8},
        "eps_c": -2.0, "omega0": 1.0, "a": [0, 0, 1], "z": [0, 0, 2],
        "csv_path": str(tmp_path / "x.csv"),
    }
    with pytest.raises(ConfigError):
        load_sweep_config({**base, "extra_knob": 1})
    with pytest.raises(ConfigError):
        load_sweep_config({**base, "geometry": {"kind": "sphere", "color": "red"}})
    missing = {k: v for k, v in base.items() if k != "eps_c"}
    with pytest.raises(ConfigError):
        load_sweep_config(missing)


def test_cli_config_file_and_dict_agree(tmp_path):
    base = {
        "dim": 3, "geometry": {"kind": "sphere", "radius": 1.0, "degree": 8},
        "eps_c": -2.0, "omega0": 1.0, "a": [0, 0, 1], "z": [0, 0, 2],
        "csv_path": str(tmp_path / "x.csv"),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(base))
    c1 = load_sweep_config(base)
    c2 = load_sweep_config(str(path))
    assert c1.delta_grid().tolist() == c2.delta_grid().tolist()
    assert c1.eps_c == c2.eps_c


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert main(["spectrum", "--geometry", "triangle:1"]) == EXIT_CONFIG
    assert main(["plot", "--csv", str(tmp_path / "missing.csv"),
                 "--output", str(tmp_path / "o.svg")]) == EXIT_CONFIG
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", "--csv", str(empty),
                 "--output", str(tmp_path / "o.svg")]) == EXIT_CONFIG
    monkeypatch.setattr(cli_module, "_suite_layer",
                        lambda: [{"name": "forced", "measured": 1.0,
                                  "tolerance": 0.1, "passed": False}])
    assert main(["validate", "layer"]) == EXIT_VALIDATION

    def boom(config):
        raise RuntimeError("synthetic numerical failure")

    monkeypatch.setattr(cli_module, "run_sweep", boom)
    cfg = {
        "dim": 3, "geometry": {"kind": "sphere", "radius": 1.0, "degree": 8},
        "eps_c": -2.0, "omega0": 1.0, "a": [0, 0, 1], "z": [0, 0, 2],
        "csv_path": str(tmp_path / "x.csv"),
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(p)]) == EXIT_NUMERICAL


def test_cli_validate_passes():
    report = validate("spectrum")
    assert report["passed"]
    assert all(c["passed"] for c in report["checks"])


def test_plot_determinism_and_guards(tmp_path):
    csv_path = tmp_path / "rows.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for d, e in ((1e-2, 10.0), (1e-3, 100.0)):
            w.writerow([repr(d), repr(1e-4), repr(1e-4), repr(e), repr(1.0),
                        repr(0.5), "spectral", repr(0.0), "1.000"])
    s1, s2 = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot(str(csv_path), str(s1))
    emit_plot(str(csv_path), str(s2))
    assert s1.read_bytes() == s2.read_bytes()
    assert s1.read_text().count("<circle") == 2
    header_only = tmp_path / "h.csv"
    header_only.write_text(",".join(CSV_COLUMNS) + "\n")
    with pytest.raises(ValueError):
        emit_plot(str(header_only), str(tmp_path / "c.svg"))
    malformed = tmp_path / "m.csv"
    malformed.write_text(",".join(CSV_COLUMNS) + "\n" +
                         ",".join(["oops"] * len(CSV_COLUMNS)) + "\n")
    with pytest.raises(ValueError):
        emit_plot(str(malformed), str(tmp_path / "d.svg"))


def test_console_entry_point():
    proc = subprocess.run(["plasmonres", "validate", "spectrum"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "passed" in proc.stdout
    proc = subprocess.run(["plasmonres", "no-such-command"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG
