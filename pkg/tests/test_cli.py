import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from tsfem.cli import main, run_case, sweep
from tsfem.config import (
    CaseConfig,
    ConfigError,
    build_case,
    build_mesh,
    load_config,
    parse_config,
    serialize_config,
)
from tsfem.spectral import SpectralCoeffs, evaluate_in_time

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestConfigParsing:
    def test_round_trip_semantically_identical(self):
        text = (CONFIG_DIR / "steady_channel.yaml").read_text()
        config = parse_config(text)
        again = parse_config(serialize_config(config))
        assert again.normalized() == config.normalized()

    def test_all_errors_reported_at_once(self):
        bad = """
physics: {kind: bogus, n_modes: 0}
mesh: {}
bcs:
  inlet: {kind: weird}
"""
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        messages = err.value.errors
        assert len(messages) >= 4
        joined = "\n".join(messages)
        assert "physics.kind" in joined
        assert "n_modes" in joined
        assert "generator" in joined
        assert "inlet" in joined

    def test_exactly_one_data_source_per_bc(self):
        bad = """
physics: {kind: ns, rho: 1.0, mu: 0.1, omega: 1.0, n_modes: 2}
mesh: {generator: interval, length: 1.0, resolution: 4}
bcs:
  inlet: {group: left, kind: parabolic_inflow,
          flow_modes: [[1, 0]], flow_samples: [1, 1, 1, 1]}
"""
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(bad)

    def test_unknown_facet_group_named(self):
        text = """
physics: {kind: scalar, kappa: 0.1, omega: 0.0, n_modes: 1}
mesh: {generator: interval, length: 1.0, resolution: 4}
bcs:
  inlet: {group: nonexistent, kind: dirichlet, phi_modes: [[1, 0]]}
"""
        config = parse_config(text)
        mesh = build_mesh(config.mesh)
        with pytest.raises(ConfigError, match="nonexistent"):
            build_case(config, mesh)


class TestRun:
    def test_bundled_steady_channel(self, tmp_path):
        config = load_config(CONFIG_DIR / "steady_channel.yaml")
        t0 = time.perf_counter()
        summary = run_case(config, tmp_path / "out")
        assert time.perf_counter() - t0 < 600.0
        assert summary.converged
        # Poiseuille: outlet carries the prescribed flux 2/3
        q_out = summary.flows["xmax"]["flow_modes"][0][0]
        assert abs(q_out - 2.0 / 3.0) / (2.0 / 3.0) < 0.005
        assert (tmp_path / "out" / "summary.yaml").exists()
        assert (tmp_path / "out" / "traces.csv").exists()

    def test_bundled_pulsatile_bent_channel(self, tmp_path):
        config = load_config(CONFIG_DIR / "pulsatile_bent_channel.yaml")
        t0 = time.perf_counter()
        summary = run_case(config, tmp_path / "out")
        assert time.perf_counter() - t0 < 600.0
        assert summary.converged
        assert "inlet" in summary.truncation  # sampled waveform was truncated
        # inlet and outlet carry opposite steady flow
        q_in = summary.flows["xmin"]["flow_modes"][0][0]
        q_out = summary.flows["xmax"]["flow_modes"][0][0]
        assert abs(q_in + q_out) < 0.02 * abs(q_out)

    def test_deterministic_reruns(self, tmp_path):
        config = load_config(CONFIG_DIR / "tracer_1d.yaml")
        run_case(config, tmp_path / "a")
        run_case(config, tmp_path / "b")
        # CSVs are byte-identical; only wall time in the summary may differ
        for name in ("traces.csv",):
            if (tmp_path / "a" / name).exists():
                assert (tmp_path / "a" / name).read_bytes() == \
                    (tmp_path / "b" / name).read_bytes()
        sa = yaml.safe_load((tmp_path / "a" / "summary.yaml").read_text())
        sb = yaml.safe_load((tmp_path / "b" / "summary.yaml").read_text())
        sa.pop("wall_time"), sb.pop("wall_time")
        sa.pop("outputs"), sb.pop("outputs")
        assert sa == sb

    def test_trace_matches_mode_reconstruction(self, tmp_path):
        config = load_config(CONFIG_DIR / "pulsatile_bent_channel.yaml")
        config.mesh["resolution"] = [6, 2, 2]
        config.output["fields_t_samples"] = []
        summary = run_case(config, tmp_path / "out")
        assert summary.converged
        rows = np.loadtxt(tmp_path / "out" / "traces.csv", delimiter=",", skiprows=1)
        header = (tmp_path / "out" / "traces.csv").read_text().splitlines()[0].split(",")
        col = header.index("Q_xmax")
        modes = np.asarray(summary.flows["xmax"]["flow_modes"], dtype=float)
        coeffs = SpectralCoeffs.from_positive_modes(modes[:, 0] + 1j * modes[:, 1])
        omega = float(config.physics["omega"])
        for row in rows[:8]:
            assert row[col] == pytest.approx(
                evaluate_in_time(coeffs, row[0], omega), abs=1e-12)

    def test_unwritable_output_dir_fails_before_solve(self, tmp_path):
        config = load_config(CONFIG_DIR / "tracer_1d.yaml")
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        t0 = time.perf_counter()
        with pytest.raises(ConfigError, match="writable|directory"):
            run_case(config, blocker)
        assert time.perf_counter() - t0 < 1.0  # failed before any solve


class TestVTK:
    def test_legacy_format_conformance(self, tmp_path):
        config = load_config(CONFIG_DIR / "pulsatile_bent_channel.yaml")
        config.mesh["resolution"] = [4, 2, 2]
        config.output["fields_t_samples"] = [0.0, 1.0]
        run_case(config, tmp_path / "out")
        path = tmp_path / "out" / "fields_0000.vtk"
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# vtk DataFile Version")
        assert lines[2] == "ASCII"
        assert lines[3] == "DATASET UNSTRUCTURED_GRID"
        ip = next(i for i, ln in enumerate(lines) if ln.startswith("POINTS"))
        n_points = int(lines[ip].split()[1])
        for k in range(n_points):
            assert len(lines[ip + 1 + k].split()) == 3
        ic = next(i for i, ln in enumerate(lines) if ln.startswith("CELLS"))
        n_cells, total = int(lines[ic].split()[1]), int(lines[ic].split()[2])
        assert total == n_cells * 5  # tet4: count + 4 ids
        it = next(i for i, ln in enumerate(lines) if ln.startswith("CELL_TYPES"))
        assert lines[it + 1] == "10"
        ipd = next(i for i, ln in enumerate(lines) if ln.startswith("POINT_DATA"))
        assert int(lines[ipd].split()[1]) == n_points
        assert any(ln.startswith("VECTORS velocity") for ln in lines)
        assert any(ln.startswith("SCALARS pressure") for ln in lines)

    def test_steady_samples_identical(self, tmp_path):
        config = load_config(CONFIG_DIR / "steady_channel.yaml")
        config.mesh["resolution"] = [4, 12]
        config.output["fields_t_samples"] = [0.0, 1.0]
        run_case(config, tmp_path / "out")
        a = (tmp_path / "out" / "fields_0000.vtk").read_bytes()
        b = (tmp_path / "out" / "fields_0001.vtk").read_bytes()
        assert a == b


class TestSweep:
    def test_single_point_sweep_rejected(self, tmp_path):
        study = {"study": {"kind": "h_sweep", "resolutions": [8],
                           "case": yaml.safe_load(
                               (CONFIG_DIR / "h_sweep_1d.yaml").read_text()
                           )["study"]["case"]}}
        path = tmp_path / "study.yaml"
        path.write_text(yaml.safe_dump(study))
        with pytest.raises(ConfigError, match="two"):
            sweep(path, tmp_path / "out")

    def test_h_sweep_second_order(self, tmp_path):
        table = sweep(CONFIG_DIR / "h_sweep_1d.yaml", tmp_path / "out")
        assert table["order"] == pytest.approx(2.0, abs=0.1)
        assert (tmp_path / "out" / "sweep.yaml").exists()

    def test_mode_sweep_monotone_error(self, tmp_path):
        table = sweep(CONFIG_DIR / "mode_sweep_bent.yaml", tmp_path / "out")
        rows = table["rows"]
        errs = [r["flow_error"] for r in rows]
        assert all(r["converged"] for r in rows)
        assert errs == sorted(errs, reverse=True)
        # flow error tracks the boundary truncation error
        for r in rows:
            assert r["flow_error"] <= 2 * r["truncation"] + 0.01


class TestMainEntry:
    def test_validate_verb(self, capsys):
        code = main(["validate-config", str(CONFIG_DIR / "tracer_1d.yaml")])
        assert code == 0
        assert "valid" in capsys.readouterr().out

    def test_validate_verb_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("physics: {kind: ns}\nmesh: {}\nbcs: {}\n")
        code = main(["validate-config", str(bad)])
        assert code == 2
        assert "invalid" in capsys.readouterr().err

    def test_mesh_gen_verb(self, tmp_path, capsys):
        cfg = tmp_path / "mesh.yaml"
        cfg.write_text("mesh: {generator: box_tet, extents: [1, 1, 1], "
                       "resolution: [2, 2, 2]}\n")
        out = tmp_path / "box.mesh"
        vtk = tmp_path / "box.vtk"
        code = main(["mesh-gen", str(cfg), "--out", str(out), "--vtk", str(vtk)])
        assert code == 0
        from tsfem.mesh import load_mesh, validate_mesh
        validate_mesh(load_mesh(out))
        assert vtk.exists()

    def test_run_verb_exit_code(self, tmp_path):
        code = main(["run", str(CONFIG_DIR / "tracer_1d.yaml"),
                     "--output-dir", str(tmp_path / "out")])
        assert code == 0
