//! Canonical spanning tree of grid edges used by every path integrator
//! in the crate: first the base row outward from the base node, then every
//! column outward from that row. On a rectangle all such trees are
//! homotopic, and using one shared order makes path-dependence
//! diagnostics comparable across solvers.

use crate::error::{Error, Result};
use crate::grid::{Dir, GridSpec};

/// One directed integration edge between neighbouring nodes.
/// `step` is the signed spacing (`-h` when walking toward lower indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEdge {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub dir: Dir,
    pub step: f64,
}

pub fn check_base(spec: &GridSpec, base: (usize, usize)) -> Result<()> {
    if base.0 >= spec.nx || base.1 >= spec.ny {
        return Err(Error::NodeOutOfRange {
            i: base.0,
            j: base.1,
            nx: spec.nx,
            ny: spec.ny,
        });
    }
    Ok(())
}

/// The edges of the canonical tree in deterministic order. Every node is
/// the head of exactly one edge except the base.
pub fn sweep_edges(spec: &GridSpec, base: (usize, usize)) -> Vec<SweepEdge> {
    let (bi, bj) = base;
    let h = spec.h;
    let mut edges = Vec::with_capacity(spec.node_count() - 1);

    // base row, outward in both directions
    for i in bi..spec.nx - 1 {
        edges.push(SweepEdge {
            from: (i, bj),
            to: (i + 1, bj),
            dir: Dir::X,
            step: h,
        });
    }
    for i in (1..=bi).rev() {
        edges.push(SweepEdge {
            from: (i, bj),
            to: (i - 1, bj),
            dir: Dir::X,
            step: -h,
        });
    }
    // columns, outward from the base row
    for i in 0..spec.nx {
        for j in bj..spec.ny - 1 {
            edges.push(SweepEdge {
                from: (i, j),
                to: (i, j + 1),
                dir: Dir::Y,
                step: h,
            });
        }
        for j in (1..=bj).rev() {
            edges.push(SweepEdge {
                from: (i, j),
                to: (i, j - 1),
                dir: Dir::Y,
                step: -h,
            });
        }
    }
    edges
}
