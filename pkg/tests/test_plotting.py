import xml.etree.ElementTree as ET

from relaysim.plotting import acf_chart, edf_error_chart, line_chart, ser_chart

NS = "{http://www.w3.org/2000/svg}"


def polylines(svg):
    return ET.fromstring(svg).findall(f"{NS}polyline")


def test_line_chart_is_valid_svg_with_one_line_per_series():
    svg = line_chart({"a": [(0, 1), (1, 2)], "b": [(0, 3)], "c": []}, "t", "x", "y")
    lines = polylines(svg)
    assert len(lines) == 3
    assert len(lines[0].get("points").split()) == 2


def test_log_axis_drops_non_positive():
    svg = line_chart({"a": [(0, 0.0), (1, 0.1), (2, 0.01)]}, "t", "x", "y", logy=True)
    assert len(polylines(svg)[0].get("points").split()) == 2


def test_points_are_sorted_by_x():
    pts = polylines(line_chart({"a": [(2, 1), (0, 1), (1, 1)]}, "t", "x", "y"))[0].get("points").split()
    xs = [float(p.split(",")[0]) for p in pts]
    assert xs == sorted(xs)


def test_ser_chart_groups_by_l_when_several(tmp_path):
    p = tmp_path / "ser.csv"
    p.write_text("L,snr_db,detector,frames,errors,ser\n1,0,omap,1,1,0.5\n1,5,omap,1,1,0.25\n2,0,omap,1,1,0.4\n")
    svg = ser_chart(p)
    assert len(polylines(svg)) == 2 and "omap L=2" in svg


def test_tolerance_charts(tmp_path):
    a = tmp_path / "acf.csv"
    a.write_text("weighting,metric,epsilon,lag,acf,stuck_chains\n"
                 "sd,mahalanobis,0.5,0,1.0,0\nsd,mahalanobis,0.5,1,0.5,0\n"
                 "sd,mahalanobis,1.0,0,1.0,0\nhd,mahalanobis,1.0,0,1.0,0\n")
    assert len(polylines(acf_chart(a))) == 2
    e = tmp_path / "edf.csv"
    e.write_text("weighting,metric,epsilon,mean_max_edf_error,acceptance,stuck_chains\n"
                 "sd,mahalanobis,0.5,0.1,0.2,0\nsd,mahalanobis,1.0,0.2,0.3,0\nhd,scaled_euclidean,0.5,0.3,0.1,0\n")
    assert len(polylines(edf_error_chart(e))) == 2
