//! Patch recovery of first and second chart derivatives from nodal values.
//!
//! Around every node a polynomial of total degree `p` is fitted by least squares to the nodal
//! values of a patch of neighbouring elements. Axisymmetric functions are even across the
//! symmetry axis, so patches touching the axis are completed by mirrored copies of their
//! points; this keeps axis patches balanced and makes `f_y = 0` (resp. `f_s = 0`) exact there.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Chart, MeridianMesh};

/// Recovered `[f_a, f_b, f_aa, f_ab, f_bb, q]` at one node, with `q = f_s/tan s` in the polar
/// chart and `q = f_y/y` in the Cartesian chart (continued to the axis by `f_ss`, `f_yy`).
pub type NodalDerivatives = [f64; 6];

/// Smallest accepted ratio of extreme singular values of the scaled fit matrix.
const MIN_RCOND: f64 = 1e-4;
/// Extra element layers tried before a patch is declared deficient.
const MAX_EXTRA_LAYERS: usize = 6;

fn monomials(degree: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for total in 0..=degree as i32 {
        for j in 0..=total {
            out.push((total - j, j));
        }
    }
    out
}

fn mirror_images(chart: Chart, p: [f64; 2]) -> Vec<[f64; 2]> {
    match chart {
        Chart::Cartesian => {
            if p[1] > 0.0 {
                vec![[p[0], -p[1]]]
            } else {
                vec![]
            }
        }
        Chart::Polar => {
            let mut v = Vec::new();
            if p[1] > 0.0 {
                v.push([p[0], -p[1]]);
            }
            if p[1] < PI {
                v.push([p[0], 2.0 * PI - p[1]]);
            }
            v
        }
    }
}

fn patch(mesh: &MeridianMesh, node: usize, min_points: usize, extra_layers: usize) -> BTreeSet<usize> {
    let mut set: BTreeSet<usize> = BTreeSet::new();
    set.insert(node);
    let mut frontier = vec![node];
    let mut layers = 0;
    while set.len() < min_points || layers < 1 + extra_layers {
        let mut next = Vec::new();
        for &v in &frontier {
            for &e in mesh.elements_of_node(v) {
                for &w in &mesh.elements[e] {
                    if set.insert(w) {
                        next.push(w);
                    }
                }
            }
        }
        layers += 1;
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    set
}

fn fit(
    mesh: &MeridianMesh,
    values: &[f64],
    node: usize,
    degree: usize,
    extra_layers: usize,
) -> Option<NodalDerivatives> {
    let basis = monomials(degree);
    let center = mesh.nodes[node];
    let min_points = 2 * basis.len() + 1;
    let members = patch(mesh, node, min_points, extra_layers);
    let mut pts: Vec<([f64; 2], f64)> = members.iter().map(|&v| (mesh.nodes[v], values[v])).collect();
    let radius = pts.iter().fold(0.0f64, |m, (p, _)| m.max((p[0] - center[0]).hypot(p[1] - center[1])));
    if radius == 0.0 {
        return None;
    }
    let originals = pts.clone();
    for (p, v) in &originals {
        for q in mirror_images(mesh.chart(), *p) {
            if (q[0] - center[0]).hypot(q[1] - center[1]) <= radius * (1.0 + 1e-12) {
                pts.push((q, *v));
            }
        }
    }
    if pts.len() < basis.len() {
        return None;
    }
    let a = DMatrix::from_fn(pts.len(), basis.len(), |i, k| {
        let x = (pts[i].0[0] - center[0]) / radius;
        let y = (pts[i].0[1] - center[1]) / radius;
        x.powi(basis[k].0) * y.powi(basis[k].1)
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|(_, v)| *v));
    let gram_eigen = (a.transpose() * &a).symmetric_eigenvalues();
    let (emin, emax) = (gram_eigen.min(), gram_eigen.max());
    // patches spanning too few mesh rings are nearly degenerate for quartic fits
    if !(emin > MIN_RCOND * MIN_RCOND * emax) {
        return None;
    }
    let qr = a.qr();
    let c = qr.r().solve_upper_triangular(&(qr.q().transpose() * b))?;
    let coef = |i: i32, j: i32| basis.iter().position(|&m| m == (i, j)).map_or(0.0, |k| c[k]);
    let (r1, r2) = (radius, radius * radius);
    let fa = coef(1, 0) / r1;
    let fb = coef(0, 1) / r1;
    let faa = 2.0 * coef(2, 0) / r2;
    let fab = coef(1, 1) / r2;
    let fbb = 2.0 * coef(0, 2) / r2;
    let q = match mesh.chart() {
        Chart::Cartesian => {
            if center[1].abs() > 1e-12 {
                fb / center[1]
            } else {
                fbb
            }
        }
        Chart::Polar => {
            let sn = center[1].sin();
            if sn.abs() > 1e-12 {
                fb * center[1].cos() / sn
            } else {
                fbb
            }
        }
    };
    Some([fa, fb, faa, fab, fbb, q])
}

/// Recover derivatives at every node with a degree-`degree` patch fit (3 or 4).
pub fn recover(mesh: &MeridianMesh, values: &[f64], degree: usize) -> Result<Vec<NodalDerivatives>> {
    if !(3..=4).contains(&degree) {
        return Err(Error::BadOrder(degree));
    }
    if values.len() != mesh.num_nodes() {
        return Err(Error::SizeMismatch { expected: mesh.num_nodes(), got: values.len() });
    }
    (0..mesh.num_nodes())
        .into_par_iter()
        .map(|v| {
            (0..=MAX_EXTRA_LAYERS)
                .find_map(|extra| fit(mesh, values, v, degree, extra))
                .ok_or_else(|| Error::Mesh(format!("patch deficiency at node {v}")))
        })
        .collect()
}
