//! CSV and legacy-VTK writers.

use std::io::Write;

use crate::band::BandedGrid;

/// Full-precision float: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Node table: grid index, closest point, inner flag, then one column per field.
pub(crate) fn snapshot_csv(grid: &BandedGrid, names: &[&str], fields: &[Vec<f64>]) -> String {
    let d = grid.dim();
    let axes = ["i", "j", "k"];
    let cps = ["cp_x", "cp_y", "cp_z"];
    let mut s = String::from("node");
    for a in &axes[..d] {
        s += &format!(",{a}");
    }
    for c in &cps[..d] {
        s += &format!(",{c}");
    }
    s += ",inner";
    for n in names {
        s += &format!(",{n}");
    }
    s.push('\n');
    for n in 0..grid.len() {
        s += &n.to_string();
        let idx = grid.nodes()[n];
        for v in &idx[..d] {
            s += &format!(",{v}");
        }
        let cp = grid.cps()[n].cp;
        for k in 0..d {
            s += &format!(",{}", fmt_f64(cp[k]));
        }
        s += if grid.is_inner(n) { ",1" } else { ",0" };
        for f in fields {
            s += &format!(",{}", fmt_f64(f[n]));
        }
        s.push('\n');
    }
    s
}

/// Legacy ASCII VTK point cloud: one vertex per band node placed at its closest
/// point, with each field as point scalars.
pub fn write_vtk_points<W: Write>(
    w: &mut W,
    title: &str,
    grid: &BandedGrid,
    names: &[&str],
    fields: &[Vec<f64>],
) -> std::io::Result<()> {
    let n = grid.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {n} double")?;
    for c in grid.cps() {
        let p = c.cp.xyz();
        writeln!(w, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]))?;
    }
    writeln!(w, "VERTICES {n} {}", 2 * n)?;
    for i in 0..n {
        writeln!(w, "1 {i}")?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    for (name, f) in names.iter().zip(fields) {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in f {
            writeln!(w, "{}", fmt_f64(*v))?;
        }
    }
    w.flush()
}
