//! Finite-difference and closest point extension matrices over a band.

use rayon::prelude::*;

use crate::band::{BandedGrid, NodeIndex};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sparse::{OperatorRole, SparseOperator};

/// Lagrange basis weights on the unit-spaced nodes `0, 1, …, p` evaluated at `t`,
/// via the barycentric formula. Exact delta when `t` hits a node.
pub fn lagrange_weights_1d(p: usize, t: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), p + 1);
    for j in 0..=p {
        if t == j as f64 {
            out.iter_mut().for_each(|w| *w = 0.0);
            out[j] = 1.0;
            return;
        }
    }
    // w_j = (-1)^(p-j) / (j! (p-j)!)
    let mut fact = vec![1.0f64; p + 1];
    for k in 1..=p {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut denom = 0.0;
    for j in 0..=p {
        let sign = if (p - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let w = sign / (fact[j] * fact[p - j]) / (t - j as f64);
        out[j] = w;
        denom += w;
    }
    out.iter_mut().for_each(|w| *w /= denom);
}

/// Tensor-product interpolation stencil at `q`: `(node, weight)` pairs in
/// lexicographic node order, zero weights omitted.
pub fn interp_stencil(grid: &BandedGrid, q: &Point, p: usize) -> Result<Vec<(usize, f64)>> {
    let base = grid.stencil_base_for(q, p)?;
    let d = grid.dim();
    let mut w = [vec![0.0; p + 1], vec![0.0; p + 1], vec![0.0; p + 1]];
    for k in 0..3 {
        if k < d {
            let t = (q[k] - grid.origin()[k]) / grid.dx() - base[k] as f64;
            lagrange_weights_1d(p, t, &mut w[k]);
        } else {
            w[k].iter_mut().for_each(|v| *v = 0.0);
            w[k][0] = 1.0;
        }
    }
    let span = |k: usize| if k < d { p as i32 } else { 0 };
    let mut out = Vec::with_capacity((p + 1).pow(d as u32));
    for i in 0..=span(0) {
        for j in 0..=span(1) {
            for l in 0..=span(2) {
                let wt = w[0][i as usize] * w[1][j as usize] * w[2][l as usize];
                if wt == 0.0 {
                    continue;
                }
                let idx: NodeIndex = [base[0] + i, base[1] + j, base[2] + l];
                let n = grid.find(&idx).ok_or(Error::OutOfBand { index: idx })?;
                out.push((n, wt));
            }
        }
    }
    Ok(out)
}

/// Interpolates band values `v` at an arbitrary point with degree `p`.
pub fn interpolate(grid: &BandedGrid, v: &[f64], q: &Point, p: usize) -> Result<f64> {
    Ok(interp_stencil(grid, q, p)?
        .into_iter()
        .map(|(n, w)| w * v[n])
        .sum())
}

/// Closest point extension matrix E_p: row n interpolates at cp(n).
pub fn extension_matrix(grid: &BandedGrid, p: usize) -> Result<SparseOperator> {
    let rows: Vec<Vec<(usize, f64)>> = (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|n| interp_stencil(grid, &grid.cps()[n].cp, p))
        .collect::<Result<_>>()?;
    Ok(SparseOperator::from_rows(
        grid.len(),
        rows,
        OperatorRole::Extension(p),
    ))
}

/// Standard second-order Laplacian (5-point in 2D, 7-point in 3D).
///
/// Ghost rows, whose stencil leaves the band, treat missing neighbours as equal to
/// the centre value. Those rows are never read through an extension.
pub fn laplacian(grid: &BandedGrid) -> Result<SparseOperator> {
    let d = grid.dim();
    let h2 = 1.0 / (grid.dx() * grid.dx());
    let mut rows = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let mut row = Vec::with_capacity(2 * d + 1);
        let mut diag = 0.0;
        for axis in 0..d {
            for k in [-1, 1] {
                match grid.neighbour(n, axis, k) {
                    Some(m) => {
                        row.push((m, h2));
                        diag -= h2;
                    }
                    None if grid.is_inner(n) => return Err(Error::MissingNeighbour { node: n }),
                    None => {}
                }
            }
        }
        row.push((n, diag));
        rows.push(row);
    }
    Ok(SparseOperator::from_rows(
        grid.len(),
        rows,
        OperatorRole::Laplacian,
    ))
}

fn one_sided(grid: &BandedGrid, axis: usize, k: i32, role: OperatorRole) -> Result<SparseOperator> {
    if axis >= grid.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let inv = 1.0 / grid.dx();
    let rows = (0..grid.len())
        .map(|n| match grid.neighbour(n, axis, k) {
            // forward: (v[n+e] − v[n])/dx, backward: (v[n] − v[n−e])/dx
            Some(m) if k > 0 => Ok(vec![(m, inv), (n, -inv)]),
            Some(m) => Ok(vec![(n, inv), (m, -inv)]),
            None if grid.is_inner(n) => Err(Error::MissingNeighbour { node: n }),
            None => Ok(Vec::new()),
        })
        .collect::<Result<_>>()?;
    Ok(SparseOperator::from_rows(grid.len(), rows, role))
}

/// Forward difference `(v[n+e] − v[n]) / dx` along `axis`.
pub fn diff_forward(grid: &BandedGrid, axis: usize) -> Result<SparseOperator> {
    one_sided(grid, axis, 1, OperatorRole::DiffForward(axis))
}

/// Backward difference `(v[n] − v[n−e]) / dx` along `axis`.
pub fn diff_backward(grid: &BandedGrid, axis: usize) -> Result<SparseOperator> {
    one_sided(grid, axis, -1, OperatorRole::DiffBackward(axis))
}

/// Forward two-point average `(a[n] + a[n+e]) / 2` along `axis` (the half-point value).
pub fn avg_forward(grid: &BandedGrid, axis: usize) -> Result<SparseOperator> {
    if axis >= grid.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let rows = (0..grid.len())
        .map(|n| match grid.neighbour(n, axis, 1) {
            Some(m) => Ok(vec![(n, 0.5), (m, 0.5)]),
            None if grid.is_inner(n) => Err(Error::MissingNeighbour { node: n }),
            None => Ok(vec![(n, 1.0)]),
        })
        .collect::<Result<_>>()?;
    Ok(SparseOperator::from_rows(
        grid.len(),
        rows,
        OperatorRole::AvgForward(axis),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::StencilSpec;
    use crate::geometry::Surface;

    fn circle(dx: f64, p: usize) -> BandedGrid {
        BandedGrid::build(&Surface::unit_circle(), dx, StencilSpec::laplacian(p)).unwrap()
    }

    fn sample(g: &BandedGrid, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        (0..g.len()).map(|n| f(&g.coords(n))).collect()
    }

    #[test]
    fn lagrange_partition_of_unity_and_delta() {
        let mut w = vec![0.0; 4];
        lagrange_weights_1d(3, 1.37, &mut w);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        lagrange_weights_1d(3, 2.0, &mut w);
        assert_eq!(w, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn laplacian_exact_on_quadratics_and_constants() {
        let g = circle(0.1, 3);
        let l = laplacian(&g).unwrap();
        let q = l.apply(&sample(&g, |x| x[0] * x[0] + x[1] * x[1]));
        let c = l.apply(&vec![1.0; g.len()]);
        for n in 0..g.len() {
            assert!(c[n].abs() < 1e-10);
            if g.is_inner(n) {
                assert!((q[n] - 4.0).abs() < 1e-9, "{}", q[n]);
            }
        }
        for s in l.row_sums() {
            assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_second_order_on_quartic() {
        // f = x^4 at a node with x = 0.3: L f = 12 x^2 + dx^2 · 2 exactly (Taylor remainder)
        let mut errs = Vec::new();
        for dx in [0.1, 0.05] {
            let g = BandedGrid::cartesian_box(2, dx, [0, -3, 0], [12, 3, 0]);
            let l = laplacian(&g).unwrap();
            let v = sample(&g, |x| x[0].powi(4));
            let lv = l.apply(&v);
            let i = (0.3f64 / dx).round() as i32;
            let n = g.find(&[i, 0, 0]).unwrap();
            let err = (lv[n] - 12.0 * 0.09).abs();
            // the remainder is exactly 2 dx² up to rounding
            assert!(err <= 2.0 * dx * dx * (1.0 + 1e-6), "{err}");
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() <= 0.4, "{ratio}");
    }

    #[test]
    fn differences_on_linear_and_quadratic() {
        let g = circle(0.1, 3);
        let x = sample(&g, |p| p[0]);
        let x2 = sample(&g, |p| p[0] * p[0]);
        for axis in [0usize] {
            let f = diff_forward(&g, axis).unwrap();
            let b = diff_backward(&g, axis).unwrap();
            let fx = f.apply(&x);
            let bx = b.apply(&x);
            let bfx2 = b.apply(&f.apply(&x2));
            for n in (0..g.len()).filter(|&n| g.is_inner(n)) {
                assert!((fx[n] - 1.0).abs() < 1e-12);
                assert!((bx[n] - 1.0).abs() < 1e-12);
                // centred second difference needs n−e to be inner as well
                if g.neighbour(n, axis, -1).is_some_and(|m| g.is_inner(m)) {
                    assert!((bfx2[n] - 2.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn backward_is_minus_forward_transpose_on_interior() {
        let g = BandedGrid::cartesian_box(2, 0.2, [0, 0, 0], [5, 5, 0]);
        for axis in 0..2 {
            let f = diff_forward(&g, axis).unwrap();
            let b = diff_backward(&g, axis).unwrap();
            let ft = f.transpose();
            for r in (0..g.len()).filter(|&r| g.is_inner(r)) {
                for c in 0..g.len() {
                    assert_eq!(b.get(r, c), -ft.get(r, c), "row {r} col {c}");
                }
            }
        }
    }

    #[test]
    fn averages() {
        let g = circle(0.1, 3);
        let a = avg_forward(&g, 0).unwrap();
        let c = a.apply(&vec![2.5; g.len()]);
        let lin = a.apply(&sample(&g, |p| p[0]));
        for n in (0..g.len()).filter(|&n| g.is_inner(n)) {
            assert_eq!(c[n], 2.5);
            assert!((lin[n] - (g.coords(n)[0] + 0.05)).abs() < 1e-14);
        }
        // hand-rolled loop oracle on pseudo-random data
        let vals: Vec<f64> = (0..g.len())
            .map(|i| ((i * 7919) % 101) as f64 / 101.0)
            .collect();
        let got = avg_forward(&g, 1).unwrap().apply(&vals);
        for n in (0..g.len()).filter(|&n| g.is_inner(n)) {
            let idx = g.nodes()[n];
            let m = g.find(&[idx[0], idx[1] + 1, 0]).unwrap();
            assert!((got[n] - 0.5 * (vals[n] + vals[m])).abs() < 1e-15);
        }
    }

    #[test]
    fn extension_rows_sum_to_one() {
        for p in 1..=4 {
            let g = circle(0.1, p);
            let e = extension_matrix(&g, p).unwrap();
            for s in e.row_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extension_reproduces_polynomials() {
        for p in 1..=4 {
            let g = circle(0.1, p);
            let e = extension_matrix(&g, p).unwrap();
            // total degree p polynomial
            let poly = |x: &Point| {
                let (a, b) = (x[0], x[1]);
                0.3 + a - 2.0 * b
                    + (0..=p)
                        .map(|k| a.powi(k as i32) * b.powi((p - k) as i32) * (1.0 + k as f64) / 7.0)
                        .sum::<f64>()
            };
            let v = sample(&g, poly);
            let ev = e.apply(&v);
            for n in 0..g.len() {
                let want = poly(&g.cps()[n].cp);
                assert!((ev[n] - want).abs() < 1e-10, "p={p} err={}", ev[n] - want);
            }
        }
    }

    #[test]
    fn on_node_closest_point_gives_unit_row() {
        let g = circle(0.1, 3);
        let e = extension_matrix(&g, 3).unwrap();
        let n = g.find(&[10, 0, 0]).unwrap();
        let row: Vec<_> = e.row(n).collect();
        assert_eq!(row, vec![(n, 1.0)]);
    }
}
