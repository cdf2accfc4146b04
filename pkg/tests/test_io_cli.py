"""File export and the benchmark command line."""

import numpy as np
import pytest

from c0ip_control import make_lshape, make_unit_square
from c0ip_control.cli import (RunConfig, main, run_boundary_demo,
                              run_example1, run_example2,
                              _uniform_square_meshes)
from c0ip_control.io import read_mesh_txt, write_csv, write_mesh_txt, write_vtk


class TestMeshFiles:
    def test_round_trip(self, tmp_path):
        mesh = make_lshape(2)
        node, ele = str(tmp_path / "m.node"), str(tmp_path / "m.ele")
        write_mesh_txt(mesh, node, ele)
        back = read_mesh_txt(node, ele, domain="lshape")
        assert np.array_equal(back.vertices, mesh.vertices)
        assert np.array_equal(back.triangles, mesh.triangles)
        assert back.num_edges == mesh.num_edges

    def test_vtk_structure(self, tmp_path):
        mesh = make_unit_square(2)
        path = tmp_path / "m.vtk"
        write_vtk(mesh, str(path),
                  point_data={"u": np.arange(mesh.num_vertices, dtype=float)},
                  cell_data={"q": np.ones(mesh.num_triangles)})
        text = path.read_text()
        assert text.startswith("# vtk DataFile Version 2.0")
        assert "POINTS %d double" % mesh.num_vertices in text
        assert "CELLS %d %d" % (mesh.num_triangles,
                                4 * mesh.num_triangles) in text
        assert "POINT_DATA %d" % mesh.num_vertices in text
        assert "CELL_DATA %d" % mesh.num_triangles in text
        assert text.count("5\n") >= mesh.num_triangles

    def test_csv_formatting(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(str(path), ["a", "b"], [(1.0 / 3.0, None), (2.5, "x")])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "a,b"
        assert lines[1].startswith("3.333333e-01")
        assert lines[1].endswith(",")
        assert lines[2] == "2.500000e+00,x"


class TestUniformMeshFamily:
    def test_counts_follow_uniform_bisection(self):
        config = RunConfig(levels=3)
        seq = list(_uniform_square_meshes(config))
        hs = [h for h, _ in seq]
        assert hs == [0.25, 0.125, 0.0625]
        for h, mesh in seq:
            n = round(1.0 / h)
            assert mesh.num_triangles == 2 * n * n
            assert mesh.num_vertices == (n + 1) ** 2
            assert abs(mesh.signed_areas().sum() - 1.0) < 1e-12
            assert abs(mesh.min_angle() - np.pi / 4.0) < 1e-12


class TestDrivers:
    def test_example1_rows_and_csv(self, tmp_path):
        config = RunConfig(levels=2, out=str(tmp_path))
        rows = run_example1(config)
        assert len(rows) == 2
        assert rows[0][1] > rows[1][1] > 0.0       # energy error decreases
        header = (tmp_path / "example1.csv").read_text().splitlines()[0]
        assert header == ("h,err_u,order_u,err_phi,order_phi,"
                          "err_q,order_q")

    def test_example2_small_run(self, tmp_path):
        config = RunConfig(max_dofs=300, out=str(tmp_path), export_vtk=True)
        history = run_example2(config, initial_subdivision=1, max_levels=8)
        assert (tmp_path / "example2.csv").exists()
        assert (tmp_path / "example2_final.node").exists()
        vtks = list(tmp_path.glob("example2_level*.vtk"))
        assert vtks

    def test_boundary_demo(self, tmp_path):
        config = RunConfig(out=str(tmp_path))
        sol, kkt, report = run_boundary_demo(config, subdivision=4)
        assert sol.state_residual <= 1e-10
        assert sol.adjoint_residual <= 1e-10
        assert kkt.satisfied
        assert report.eta_total > 0.0
        assert (tmp_path / "boundary_demo.csv").exists()


class TestCommandLine:
    def test_uniform_mode_exit_zero(self, tmp_path):
        rc = main(["--mode", "uniform", "--levels", "2",
                   "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "example1.csv").exists()

    def test_uniform_mode_rejects_lshape(self, tmp_path, capsys):
        rc = main(["--mode", "uniform", "--domain", "lshape",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_adaptive_square(self, tmp_path):
        rc = main(["--mode", "adaptive", "--domain", "square",
                   "--max-dofs", "200", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "adaptive_square.csv").exists()

    def test_vd_compare(self, tmp_path):
        rc = main(["--mode", "vd-compare", "--levels", "1",
                   "--out", str(tmp_path)])
        assert rc == 0
        text = (tmp_path / "vd_compare.csv").read_text()
        assert text.splitlines()[0] == ("h,err_u_full,err_u_vd,"
                                        "err_phi_full,err_phi_vd,q_distance")

    def test_boundary_problem_flag(self, tmp_path):
        rc = main(["--problem", "boundary", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "boundary_demo.csv").exists()


class TestDeterminism:
    def test_example1_reproducible(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run_example1(RunConfig(levels=2, out=str(out1)))
        run_example1(RunConfig(levels=2, out=str(out2)))
        assert (out1 / "example1.csv").read_bytes() == \
            (out2 / "example1.csv").read_bytes()
