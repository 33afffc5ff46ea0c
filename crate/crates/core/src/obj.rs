//! Wavefront OBJ export of an immersion sampled on a grid: one vertex
//! per node, two triangles per cell, winding chosen so triangle normals
//! agree with the surface's own orientation field.

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::smallmat::Vec3;
use std::fs;
use std::path::Path;

/// Writes `theta` as a triangle mesh. `orientation` is the unit-normal
/// field fixing the winding (the third frame vector of the
/// reconstruction); the majority vote over all cells decides a single
/// consistent winding for the whole sheet.
pub fn write_obj(
    theta: &GridField<Vec3>,
    orientation: &GridField<Vec3>,
    path: &Path,
) -> Result<()> {
    let spec = theta.spec();
    let mut flip_votes = 0i64;
    let mut votes = 0i64;
    for j in 0..spec.ny - 1 {
        for i in 0..spec.nx - 1 {
            let p00 = theta.at(i, j);
            let p10 = theta.at(i + 1, j);
            let p01 = theta.at(i, j + 1);
            let tri_normal = (p10 - p00).cross(&(p01 - p00));
            let n = orientation.at(i, j);
            votes += 1;
            if tri_normal.dot(&n) < 0.0 {
                flip_votes += 1;
            }
        }
    }
    let flip = flip_votes * 2 > votes;

    let mut out = String::new();
    out.push_str("# grid immersion export\n");
    for (_, _, v) in theta.iter_nodes() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    let idx = |i: usize, j: usize| (j * spec.nx + i + 1).to_string(); // OBJ is 1-based
    for j in 0..spec.ny - 1 {
        for i in 0..spec.nx - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if flip {
                out.push_str(&format!("f {a} {c} {b}\n"));
                out.push_str(&format!("f {a} {d} {c}\n"));
            } else {
                out.push_str(&format!("f {a} {b} {c}\n"));
                out.push_str(&format!("f {a} {c} {d}\n"));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
