//! Closest points on a triangulated torus, checked against brute force, and a
//! band built around it.

use cpmol::prelude::*;

fn main() -> cpmol::Result<()> {
    let mesh = TriMesh::torus(1.0, 0.4, 48, 24);
    println!(
        "{} vertices, {} faces",
        mesh.vertices().len(),
        mesh.faces().len()
    );
    let mut worst = 0.0f64;
    for i in 0..200 {
        let a = i as f64 * 0.731;
        let p = [1.6 * a.cos(), 1.6 * (1.3 * a).sin(), 0.5 * (2.1 * a).sin()];
        let fast = mesh.closest_point(p);
        let slow = mesh.closest_point_brute_force(p);
        worst = worst.max((fast.dist2.sqrt() - slow.dist2.sqrt()).abs());
    }
    println!("max distance mismatch over 200 queries: {worst:.2e}");
    let grid = BandedGrid::build(&Surface::mesh(mesh), 0.1, StencilSpec::laplacian(2))?;
    println!("band: {} nodes, {} inner", grid.len(), grid.inner_count());
    Ok(())
}
