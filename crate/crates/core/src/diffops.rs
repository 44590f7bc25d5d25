//! Discrete differential operators on unstructured point clouds.
//!
//! Derivatives come from a weighted moving-least-squares quadratic fit on
//! exact k-nearest-neighbor stencils. The fit is pinned at the evaluation
//! point, so for any field that is polynomial of degree <= 2 the Jacobian
//! and Laplacian are recovered exactly (up to solver conditioning).
//!
//! Navier-Stokes residuals are evaluated on the interior+wall sub-cloud
//! and averaged over interior points only; one-sided cap neighborhoods
//! would otherwise dominate the means.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointRole, Shape};
use crate::math::{self, Vec3};
use crate::oracle::{FluidConstants, VelocityField};

/// Default stencil size; comfortably above the d(d+3)/2 = 9 unknowns of a
/// quadratic fit in three dimensions.
pub const DEFAULT_KNN: usize = 16;

/// Minimum neighbors required by the quadratic fit.
pub const MIN_KNN: usize = 9;

/// Exact k-nearest-neighbor graph. Neighbor lists exclude the point
/// itself and are sorted by ascending distance with ties broken by the
/// lower index.
#[derive(Clone, Debug)]
pub struct NeighborGraph {
    pub k: usize,
    neighbors: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.neighbors.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors_of(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = i * self.k;
        let hi = lo + self.k;
        (&self.neighbors[lo..hi], &self.distances[lo..hi])
    }
}

/// Exact k-NN under Euclidean distance by linear scan per point.
pub fn knn(points: &[Vec3], k: usize) -> Result<NeighborGraph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidParams(format!(
            "k = {k} must satisfy 0 < k < n = {n}"
        )));
    }
    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (math::dist2(points[i], points[j]), j as u32))
                .collect();
            cand.select_nth_unstable_by(k - 1, |a, b| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            });
            cand.truncate(k);
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            (
                cand.iter().map(|c| c.1).collect(),
                cand.iter().map(|c| c.0.sqrt()).collect(),
            )
        })
        .collect();

    let mut neighbors = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for (ns, ds) in rows {
        neighbors.extend(ns);
        distances.extend(ds);
    }
    Ok(NeighborGraph {
        k,
        neighbors,
        distances,
    })
}

/// Per-point first and second derivatives of a vector field.
/// Convention: `jacobian[i][a][b]` = d v_a / d x_b at point i.
#[derive(Clone, Debug)]
pub struct FieldDerivatives {
    pub jacobian: Vec<[[f64; 3]; 3]>,
    pub laplacian: Vec<[f64; 3]>,
    /// Indices whose local system was rank deficient; their rows are zero.
    pub degenerate: Vec<u32>,
}

// Quadratic monomial basis around the center point, with coordinates
// pre-scaled by the local bandwidth h: [dx, dy, dz, dx^2/2, dy^2/2,
// dz^2/2, dx*dy, dx*dz, dy*dz]. The linear coefficients are the gradient
// times h and the pure quadratic ones are second derivatives times h^2.
const BASIS: usize = 9;

fn fill_basis(row: &mut [f64], d: Vec3) {
    row[0] = d[0];
    row[1] = d[1];
    row[2] = d[2];
    row[3] = 0.5 * d[0] * d[0];
    row[4] = 0.5 * d[1] * d[1];
    row[5] = 0.5 * d[2] * d[2];
    row[6] = d[0] * d[1];
    row[7] = d[0] * d[2];
    row[8] = d[1] * d[2];
}

/// Weighted moving-least-squares quadratic fit per point. Gaussian
/// weights exp(-(d/h)^2) with h the mean neighbor distance at the point.
/// Rank-deficient neighborhoods are flagged and zero-filled.
pub fn mls_derivatives(
    points: &[Vec3],
    field: &[Vec3],
    graph: &NeighborGraph,
) -> Result<FieldDerivatives> {
    let n = points.len();
    if field.len() != n {
        return Err(Error::LengthMismatch {
            field: field.len(),
            points: n,
        });
    }
    if graph.len() != n {
        return Err(Error::LengthMismatch {
            field: graph.len(),
            points: n,
        });
    }
    if graph.k < MIN_KNN {
        return Err(Error::InvalidParams(format!(
            "quadratic fit needs k >= {MIN_KNN}, graph has k = {}",
            graph.k
        )));
    }

    struct Row {
        jacobian: [[f64; 3]; 3],
        laplacian: [f64; 3],
        degenerate: bool,
    }

    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zero = Row {
                jacobian: [[0.0; 3]; 3],
                laplacian: [0.0; 3],
                degenerate: true,
            };
            let (nbrs, dists) = graph.neighbors_of(i);
            let h = math::mean(dists);
            if !(h > 0.0) {
                return zero;
            }
            let k = nbrs.len();
            let mut a = DMatrix::<f64>::zeros(k, BASIS);
            let mut b = DMatrix::<f64>::zeros(k, 3);
            for (r, (&j, &d)) in nbrs.iter().zip(dists).enumerate() {
                let j = j as usize;
                let delta = math::scale(math::sub(points[j], points[i]), 1.0 / h);
                let w = (-(d / h) * (d / h)).exp().sqrt();
                let mut basis = [0.0; BASIS];
                fill_basis(&mut basis, delta);
                for c in 0..BASIS {
                    a[(r, c)] = w * basis[c];
                }
                let dv = math::sub(field[j], field[i]);
                for c in 0..3 {
                    b[(r, c)] = w * dv[c];
                }
            }
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let eps = smax * 1e-10;
            if svd.rank(eps) < BASIS {
                return zero;
            }
            let sol = match svd.solve(&b, eps) {
                Ok(s) => s,
                Err(_) => return zero,
            };
            let mut jac = [[0.0; 3]; 3];
            let mut lap = [0.0; 3];
            for comp in 0..3 {
                for axis in 0..3 {
                    jac[comp][axis] = sol[(axis, comp)] / h;
                }
                lap[comp] = (sol[(3, comp)] + sol[(4, comp)] + sol[(5, comp)]) / (h * h);
            }
            Row {
                jacobian: jac,
                laplacian: lap,
                degenerate: false,
            }
        })
        .collect();

    let mut jacobian = Vec::with_capacity(n);
    let mut laplacian = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        jacobian.push(row.jacobian);
        laplacian.push(row.laplacian);
        if row.degenerate {
            degenerate.push(i as u32);
        }
    }
    Ok(FieldDerivatives {
        jacobian,
        laplacian,
        degenerate,
    })
}

/// Per-point divergence: trace of the Jacobian.
pub fn divergence(derivs: &FieldDerivatives) -> Vec<f64> {
    derivs
        .jacobian
        .iter()
        .map(|j| j[0][0] + j[1][1] + j[2][2])
        .collect()
}

/// Per-point convective term (v . grad) v = J v.
pub fn convective_term(field: &[Vec3], derivs: &FieldDerivatives) -> Vec<Vec3> {
    field
        .iter()
        .zip(&derivs.jacobian)
        .map(|(v, j)| {
            [
                math::dot(j[0], *v),
                math::dot(j[1], *v),
                math::dot(j[2], *v),
            ]
        })
        .collect()
}

/// Precomputed interior+wall sub-cloud and its neighbor graph, reusable
/// across repeated residual evaluations on the same shape.
#[derive(Clone, Debug)]
pub struct SubcloudGraph {
    /// Indices into the shape's point array, in point order.
    pub indices: Vec<usize>,
    /// Rows of `indices` that are interior points.
    pub interior_rows: Vec<usize>,
    pub graph: NeighborGraph,
}

impl SubcloudGraph {
    pub fn build(shape: &Shape, k: usize) -> Result<Self> {
        let indices = shape.interior_wall_indices();
        if k >= indices.len() {
            return Err(Error::InvalidParams(format!(
                "k = {k} too large for sub-cloud of {} points",
                indices.len()
            )));
        }
        let points: Vec<Vec3> = indices.iter().map(|&i| shape.points[i]).collect();
        let interior_rows = indices
            .iter()
            .enumerate()
            .filter(|(_, &i)| shape.roles[i] == PointRole::Interior)
            .map(|(row, _)| row)
            .collect();
        Ok(Self {
            indices,
            interior_rows,
            graph: knn(&points, k)?,
        })
    }
}

/// Continuity and momentum residuals of a field on a shape, averaged
/// over interior points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsResiduals {
    /// mean |div v| over interior points, 1/s.
    pub continuity: f64,
    /// mean ||rho (v.grad)v - mu lap v|| over interior points, kg/(m^2 s^2).
    pub momentum: f64,
    pub degenerate_fits: usize,
}

/// Residuals with a freshly built sub-cloud graph (k = [`DEFAULT_KNN`]).
pub fn ns_residuals(
    shape: &Shape,
    field: &VelocityField,
    constants: &FluidConstants,
) -> Result<NsResiduals> {
    let cache = SubcloudGraph::build(shape, DEFAULT_KNN)?;
    ns_residuals_cached(shape, field, constants, &cache)
}

/// Residuals reusing a precomputed [`SubcloudGraph`].
pub fn ns_residuals_cached(
    shape: &Shape,
    field: &VelocityField,
    constants: &FluidConstants,
    cache: &SubcloudGraph,
) -> Result<NsResiduals> {
    field.check_alignment(shape)?;
    constants.validate()?;
    let points: Vec<Vec3> = cache.indices.iter().map(|&i| shape.points[i]).collect();
    let values: Vec<Vec3> = cache.indices.iter().map(|&i| field.values[i]).collect();
    let derivs = mls_derivatives(&points, &values, &cache.graph)?;
    let div = divergence(&derivs);
    let conv = convective_term(&values, &derivs);

    let rho = constants.density;
    let mu = constants.dynamic_viscosity;
    let mut cont = Vec::with_capacity(cache.interior_rows.len());
    let mut mom = Vec::with_capacity(cache.interior_rows.len());
    for &row in &cache.interior_rows {
        cont.push(div[row].abs());
        let residual = math::sub(math::scale(conv[row], rho), math::scale(derivs.laplacian[row], mu));
        mom.push(math::norm(residual));
    }
    Ok(NsResiduals {
        continuity: math::mean(&cont),
        momentum: math::mean(&mom),
        degenerate_fits: derivs.degenerate.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn knn_collinear_middle_point() {
        let points = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let graph = knn(&points, 1).unwrap();
        let (nbrs, _) = graph.neighbors_of(1);
        assert_eq!(nbrs, &[0]);
    }

    #[test]
    fn knn_matches_brute_force_full_sort() {
        let points = random_cloud(64, 12);
        let k = 7;
        let graph = knn(&points, k).unwrap();
        for i in 0..points.len() {
            // Oracle: sort the full distance list.
            let mut all: Vec<(f64, u32)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (math::dist(points[i], points[j]), j as u32))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (nbrs, dists) = graph.neighbors_of(i);
            for c in 0..k {
                assert_eq!(nbrs[c], all[c].1, "point {i} neighbor {c}");
                assert!((dists[c] - all[c].0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn knn_duplicates_pair_up_by_index() {
        let points = vec![[0.5, 0.5, 0.5], [0.5, 0.5, 0.5], [2.0, 0.0, 0.0]];
        let graph = knn(&points, 1).unwrap();
        assert_eq!(graph.neighbors_of(0).0, &[1]);
        assert_eq!(graph.neighbors_of(1).0, &[0]);
    }

    #[test]
    fn knn_rejects_k_geq_n() {
        let points = random_cloud(5, 1);
        assert!(knn(&points, 5).is_err());
        assert!(knn(&points, 0).is_err());
    }

    #[test]
    fn mls_exact_on_linear_field() {
        let points = random_cloud(200, 3);
        let field: Vec<Vec3> = points.iter().map(|p| [p[0], 2.0 * p[1], 3.0 * p[2]]).collect();
        let graph = knn(&points, DEFAULT_KNN).unwrap();
        let derivs = mls_derivatives(&points, &field, &graph).unwrap();
        assert!(derivs.degenerate.is_empty());
        let expect = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        for i in 0..points.len() {
            for a in 0..3 {
                for b in 0..3 {
                    assert!(
                        (derivs.jacobian[i][a][b] - expect[a][b]).abs() < 1e-8,
                        "jacobian[{i}][{a}][{b}] = {}",
                        derivs.jacobian[i][a][b]
                    );
                }
                assert!(derivs.laplacian[i][a].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mls_exact_on_quadratic_field() {
        let points = random_cloud(200, 4);
        let field: Vec<Vec3> = points.iter().map(|p| [p[0] * p[0], 0.0, 0.0]).collect();
        let graph = knn(&points, DEFAULT_KNN).unwrap();
        let derivs = mls_derivatives(&points, &field, &graph).unwrap();
        for i in 0..points.len() {
            assert!((derivs.laplacian[i][0] - 2.0).abs() < 1e-7);
            assert!(derivs.laplacian[i][1].abs() < 1e-8);
            assert!(derivs.laplacian[i][2].abs() < 1e-8);
            assert!((derivs.jacobian[i][0][0] - 2.0 * points[i][0]).abs() < 1e-8);
        }
    }

    #[test]
    fn mls_zero_on_constant_field() {
        let points = random_cloud(100, 5);
        let field: Vec<Vec3> = points.iter().map(|_| [0.4, -0.7, 1.1]).collect();
        let graph = knn(&points, DEFAULT_KNN).unwrap();
        let derivs = mls_derivatives(&points, &field, &graph).unwrap();
        for i in 0..points.len() {
            for a in 0..3 {
                assert!(derivs.laplacian[i][a].abs() < 1e-12);
                for b in 0..3 {
                    assert!(derivs.jacobian[i][a][b].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mls_flags_degenerate_neighborhoods() {
        // Collinear points cannot support a 3D quadratic fit.
        let points: Vec<Vec3> = (0..24).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        let field: Vec<Vec3> = points.iter().map(|p| [p[0], 0.0, 0.0]).collect();
        let graph = knn(&points, 12).unwrap();
        let derivs = mls_derivatives(&points, &field, &graph).unwrap();
        assert_eq!(derivs.degenerate.len(), points.len());
        assert!(derivs.jacobian.iter().all(|j| j[0][0] == 0.0));
    }

    #[test]
    fn divergence_examples() {
        let points = random_cloud(150, 6);
        let graph = knn(&points, DEFAULT_KNN).unwrap();

        let radial: Vec<Vec3> = points.iter().map(|p| *p).collect();
        let derivs = mls_derivatives(&points, &radial, &graph).unwrap();
        for d in divergence(&derivs) {
            assert!((d - 3.0).abs() < 1e-8);
        }

        let rotated: Vec<Vec3> = points.iter().map(|p| [p[1], p[2], p[0]]).collect();
        let derivs = mls_derivatives(&points, &rotated, &graph).unwrap();
        for d in divergence(&derivs) {
            assert!(d.abs() < 1e-8);
        }

        let zero: Vec<Vec3> = vec![[0.0; 3]; points.len()];
        let derivs = mls_derivatives(&points, &zero, &graph).unwrap();
        for d in divergence(&derivs) {
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn convective_term_examples() {
        let points = random_cloud(150, 7);
        let graph = knn(&points, DEFAULT_KNN).unwrap();
        let field: Vec<Vec3> = points.iter().map(|p| [p[0], 0.0, 0.0]).collect();
        let derivs = mls_derivatives(&points, &field, &graph).unwrap();
        let conv = convective_term(&field, &derivs);
        for (i, c) in conv.iter().enumerate() {
            assert!((c[0] - points[i][0]).abs() < 1e-8);
            assert!(c[1].abs() < 1e-8);
            assert!(c[2].abs() < 1e-8);
        }
    }

    #[test]
    fn scaling_property() {
        let points = random_cloud(120, 8);
        let graph = knn(&points, DEFAULT_KNN).unwrap();
        let field: Vec<Vec3> = points
            .iter()
            .map(|p| [p[0] * p[1], p[2] * p[2], p[0] + p[1]])
            .collect();
        let scaled: Vec<Vec3> = field.iter().map(|v| math::scale(*v, 2.5)).collect();
        let d1 = mls_derivatives(&points, &field, &graph).unwrap();
        let d2 = mls_derivatives(&points, &scaled, &graph).unwrap();
        let div1 = divergence(&d1);
        let div2 = divergence(&d2);
        for (a, b) in div1.iter().zip(&div2) {
            assert!((2.5 * a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
        let c1 = convective_term(&field, &d1);
        let c2 = convective_term(&scaled, &d2);
        for (a, b) in c1.iter().zip(&c2) {
            for k in 0..3 {
                assert!((2.5 * 2.5 * a[k] - b[k]).abs() < 1e-9 * b[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rotation_equivariance_of_divergence() {
        let points = random_cloud(150, 9);
        let graph = knn(&points, DEFAULT_KNN).unwrap();
        let field: Vec<Vec3> = points
            .iter()
            .map(|p| [p[0] * p[0] - p[1], 0.5 * p[1] * p[2], p[2]])
            .collect();

        // Rotation by 0.7 rad about z then 0.4 rad about x.
        let (c1, s1) = (0.7f64.cos(), 0.7f64.sin());
        let (c2, s2) = (0.4f64.cos(), 0.4f64.sin());
        let rot = |v: Vec3| -> Vec3 {
            let a = [c1 * v[0] - s1 * v[1], s1 * v[0] + c1 * v[1], v[2]];
            [a[0], c2 * a[1] - s2 * a[2], s2 * a[1] + c2 * a[2]]
        };
        let rpoints: Vec<Vec3> = points.iter().map(|p| rot(*p)).collect();
        let rfield: Vec<Vec3> = field.iter().map(|v| rot(*v)).collect();
        let rgraph = knn(&rpoints, DEFAULT_KNN).unwrap();

        let div = divergence(&mls_derivatives(&points, &field, &graph).unwrap());
        let rdiv = divergence(&mls_derivatives(&rpoints, &rfield, &rgraph).unwrap());
        let scale = div.iter().map(|d| d.abs()).fold(0.0, f64::max);
        for (a, b) in div.iter().zip(&rdiv) {
            assert!((a - b).abs() < 1e-6 * scale.max(1.0));
        }
    }

    #[test]
    fn zero_field_residuals_are_zero() {
        let params = crate::geometry::BifurcationParams::straight_tube(1e-3, 5e-3, 2);
        let shape = crate::geometry::generate_bifurcation(
            &params,
            &crate::geometry::GeometryConfig::with_counts(128, 64, 8),
        )
        .unwrap();
        let field = VelocityField::zeros(shape.len());
        let res = ns_residuals(&shape, &field, &FluidConstants::default()).unwrap();
        assert_eq!(res.continuity, 0.0);
        assert_eq!(res.momentum, 0.0);
    }

    #[test]
    fn straight_tube_residuals_match_analytic_profile() {
        // u = u_max (1 - r^2/R^2) x_hat with u_max = 0.1 m/s, R = 2e-3 m:
        // momentum residual |mu lap u| = 4 mu u_max / R^2 = 350 kg/(m^2 s^2)
        // at every point; continuity is exactly zero.
        let u_max: f64 = 0.1;
        let radius: f64 = 2e-3;
        let constants = FluidConstants::default();
        let params = crate::geometry::BifurcationParams::straight_tube(radius, 1e-2, 77);
        let shape = crate::geometry::generate_bifurcation(
            &params,
            &crate::geometry::GeometryConfig::with_counts(2048, 1024, 64),
        )
        .unwrap();
        let field = crate::oracle::label_shape(&shape, &constants, u_max / 2.0).unwrap();
        let res = ns_residuals(&shape, &field, &constants).unwrap();

        let analytic_momentum = 4.0 * constants.dynamic_viscosity * u_max / (radius * radius);
        assert!((analytic_momentum - 350.0).abs() < 1e-9);
        assert!(
            (res.momentum - analytic_momentum).abs() / analytic_momentum < 0.05,
            "momentum {} vs analytic {analytic_momentum}",
            res.momentum
        );
        let shear = 2.0 * u_max / radius;
        assert!(
            res.continuity < 1e-2 * shear,
            "continuity {} vs shear scale {shear}",
            res.continuity
        );
    }
}
