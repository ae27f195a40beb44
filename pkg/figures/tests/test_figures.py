"""Figure generation over the documented CSV schemas.

The fixtures write small CSVs matching the solver's summary / dump / sweep
formats; the solver package itself is never imported. The acceptance-style
end-to-end test (real d1k1 summary through the solver CLI) lives in
test_acceptance_secondary.py.
"""

import pytest

from mfp_figures.plots import plot_dim_sweep, plot_solution, plot_training


def write_summary(path, rows=5, stddev=0.01):
    lines = ["step,epoch,mean_loss,std_loss,mean_l2_rel_error,std_l2_rel_error"]
    for i in range(1, rows + 1):
        lines.append(f"{i * 100},{i},{-2.0 - 0.1 * i},{stddev},"
                     f"{1.0 / i},{stddev}")
    path.write_text("\n".join(lines) + "\n")


def write_line_dump(path, rows=20, constant=None):
    lines = ["x,u,u_star"]
    for i in range(rows):
        x = i / (rows - 1)
        u = constant if constant is not None else 1.0 - 2.0 * x
        lines.append(f"{x},{u},{1.0 - 2.0 * x}")
    path.write_text("\n".join(lines) + "\n")


def write_slice_dump(path, r=8, constant=None):
    lines = ["x1,x2,u"]
    for i in range(r):
        for j in range(r):
            u = constant if constant is not None else i * 0.1 + j * 0.01
            lines.append(f"{i / (r - 1)},{j / (r - 1)},{u}")
    path.write_text("\n".join(lines) + "\n")


def write_sweep(path, dims=(1, 2, 4), kbars=(1, 5)):
    lines = ["dim,kbar,width,mean_final_error,std_final_error"]
    for k in kbars:
        for d in dims:
            lines.append(f"{d},{k},100,{0.05 * k * d},{0.01}")
    path.write_text("\n".join(lines) + "\n")


def test_plot_training(tmp_path):
    csv = tmp_path / "summary.csv"
    write_summary(csv)
    out = tmp_path / "training.png"
    plot_training(csv, out)
    assert out.exists() and out.stat().st_size > 1000


def test_plot_training_byte_identical_rerun(tmp_path):
    csv = tmp_path / "summary.csv"
    write_summary(csv)
    out1 = tmp_path / "a.png"
    out2 = tmp_path / "b.png"
    plot_training(csv, out1)
    plot_training(csv, out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_plot_training_zero_std_collapses_band(tmp_path):
    csv = tmp_path / "summary.csv"
    write_summary(csv, stddev=0.0)
    out = tmp_path / "flat.png"
    plot_training(csv, out)
    assert out.exists()


def test_plot_training_missing_columns(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("step,mean_loss\n1,2\n")
    with pytest.raises(ValueError):
        plot_training(csv, tmp_path / "x.png")


def test_plot_training_empty_csv(tmp_path):
    csv = tmp_path / "empty.csv"
    csv.write_text("")
    with pytest.raises(ValueError):
        plot_training(csv, tmp_path / "x.png")
    csv.write_text("step,epoch,mean_loss,std_loss,mean_l2_rel_error,"
                   "std_l2_rel_error\n")
    with pytest.raises(ValueError):
        plot_training(csv, tmp_path / "y.png")


def test_plot_solution_line_overlay(tmp_path):
    csv = tmp_path / "line.csv"
    write_line_dump(csv)
    out = tmp_path / "line.png"
    plot_solution(csv, out)
    assert out.exists() and out.stat().st_size > 1000


def test_plot_solution_slice_contour(tmp_path):
    csv = tmp_path / "slice.csv"
    write_slice_dump(csv)
    out = tmp_path / "slice.png"
    plot_solution(csv, out)
    assert out.exists()


def test_plot_solution_constant_field_no_crash(tmp_path):
    csv = tmp_path / "const.csv"
    write_slice_dump(csv, constant=0.7)
    out = tmp_path / "const.png"
    plot_solution(csv, out)
    assert out.exists()


def test_plot_solution_rejects_unknown_schema(tmp_path):
    csv = tmp_path / "odd.csv"
    csv.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        plot_solution(csv, tmp_path / "x.png")


def test_plot_dim_sweep(tmp_path):
    csv = tmp_path / "sweep.csv"
    write_sweep(csv)
    out = tmp_path / "sweep.png"
    plot_dim_sweep(csv, out)
    assert out.exists()


def test_plot_dim_sweep_single_point_series(tmp_path):
    csv = tmp_path / "one.csv"
    write_sweep(csv, dims=(2,), kbars=(1,))
    out = tmp_path / "one.png"
    plot_dim_sweep(csv, out)
    assert out.exists()


def test_plot_dim_sweep_rerun_identical(tmp_path):
    csv = tmp_path / "sweep.csv"
    write_sweep(csv)
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    plot_dim_sweep(csv, a)
    plot_dim_sweep(csv, b)
    assert a.read_bytes() == b.read_bytes()


def test_cli_end_to_end(tmp_path):
    from mfp_figures.cli import main
    csv = tmp_path / "summary.csv"
    write_summary(csv)
    out = tmp_path / "out.png"
    assert main(["training", str(csv), str(out)]) == 0
    assert out.exists()
    assert main(["training", str(tmp_path / "missing.csv"),
                 str(tmp_path / "n.png")]) == 1
    assert main(["nonsense", str(csv), str(out)]) == 1
