//! Synthetic bifurcation geometries as tagged point clouds.
//!
//! A vessel is modelled as a union of tube frusta along a polyline
//! centerline: one parent tube plus up to two children attached at the
//! parent end cap. Point clouds carry a boundary role per point
//! (interior / wall / inlet / outlet) and a 9-dimensional feature row
//! holding the offset vectors to the nearest wall, inlet, and outlet
//! points.
//!
//! All sampled coordinates are rounded through f32 so that the binary
//! interchange format (32-bit floats) round-trips bitwise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, Vec3};

/// Boundary role tag of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointRole {
    Interior,
    Wall,
    Inlet,
    Outlet,
}

impl PointRole {
    pub fn code(self) -> u8 {
        match self {
            PointRole::Interior => 0,
            PointRole::Wall => 1,
            PointRole::Inlet => 2,
            PointRole::Outlet => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(PointRole::Interior),
            1 => Ok(PointRole::Wall),
            2 => Ok(PointRole::Inlet),
            3 => Ok(PointRole::Outlet),
            other => Err(Error::Format {
                format: "role",
                reason: format!("unknown role code {other}"),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PointRole::Interior => "interior",
            PointRole::Wall => "wall",
            PointRole::Inlet => "inlet",
            PointRole::Outlet => "outlet",
        }
    }
}

/// One straight frustum of the centerline. Radii are interpolated
/// linearly along the axis; equal radii give a cylinder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterlineSegment {
    pub start: Vec3,
    pub end: Vec3,
    pub radius_start: f64,
    pub radius_end: f64,
}

impl CenterlineSegment {
    pub fn cylinder(start: Vec3, end: Vec3, radius: f64) -> Self {
        Self {
            start,
            end,
            radius_start: radius,
            radius_end: radius,
        }
    }

    pub fn length(&self) -> f64 {
        math::dist(self.start, self.end)
    }

    /// Unit axis direction from start to end.
    pub fn direction(&self) -> Vec3 {
        math::normalize(math::sub(self.end, self.start))
    }

    /// Axial coordinate (meters along the axis, unclamped) and radial
    /// distance from the infinite axis line through this segment.
    pub fn axial_radial(&self, p: Vec3) -> (f64, f64) {
        let axis = self.direction();
        let rel = math::sub(p, self.start);
        let t = math::dot(rel, axis);
        let radial_vec = math::sub(rel, math::scale(axis, t));
        (t, math::norm(radial_vec))
    }

    /// Local tube radius at axial coordinate `t` (clamped to the segment).
    pub fn radius_at(&self, t: f64) -> f64 {
        let len = self.length();
        let s = if len > 0.0 { (t / len).clamp(0.0, 1.0) } else { 0.0 };
        self.radius_start + s * (self.radius_end - self.radius_start)
    }

    /// Negative inside the frustum, positive outside. Combines radial
    /// excess with axial overshoot past either cap plane.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        let (t, r) = self.axial_radial(p);
        let radial = r - self.radius_at(t);
        let axial = (-t).max(t - self.length());
        radial.max(axial)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.signed_distance(p) <= 0.0
    }
}

/// Parameters of a synthetic bifurcation. A child with zero length is
/// disabled; disabling both children produces a straight tube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationParams {
    pub parent_radius: f64,
    pub parent_length: f64,
    pub child_radii: (f64, f64),
    pub child_lengths: (f64, f64),
    /// Angles from the parent axis, radians, in (0, pi/2).
    pub child_angles: (f64, f64),
    pub seed: u64,
}

impl BifurcationParams {
    /// Straight tube: both children disabled.
    pub fn straight_tube(radius: f64, length: f64, seed: u64) -> Self {
        Self {
            parent_radius: radius,
            parent_length: length,
            child_radii: (0.0, 0.0),
            child_lengths: (0.0, 0.0),
            child_angles: (0.0, 0.0),
            seed,
        }
    }

    /// Bifurcation with child radii chosen by [`murray_split`], so the
    /// Murray compatibility r_p^3 = r_1^3 + r_2^3 holds by construction.
    pub fn murray(
        parent_radius: f64,
        parent_length: f64,
        child_lengths: (f64, f64),
        child_angles: (f64, f64),
        asymmetry: f64,
        seed: u64,
    ) -> Result<Self> {
        let child_radii = murray_split(parent_radius, asymmetry)?;
        let params = Self {
            parent_radius,
            parent_length,
            child_radii,
            child_lengths,
            child_angles,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn is_bifurcated(&self) -> bool {
        self.child_lengths.0 > 0.0 || self.child_lengths.1 > 0.0
    }

    fn child_enabled(&self, c: usize) -> bool {
        let len = if c == 0 { self.child_lengths.0 } else { self.child_lengths.1 };
        len > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.parent_radius > 0.0 && self.parent_radius.is_finite()) {
            return Err(Error::InvalidParams("parent_radius must be positive".into()));
        }
        if !(self.parent_length > 0.0 && self.parent_length.is_finite()) {
            return Err(Error::InvalidParams("parent_length must be positive".into()));
        }
        for c in 0..2 {
            if !self.child_enabled(c) {
                continue;
            }
            let (r, len, angle) = if c == 0 {
                (self.child_radii.0, self.child_lengths.0, self.child_angles.0)
            } else {
                (self.child_radii.1, self.child_lengths.1, self.child_angles.1)
            };
            if !(r > 0.0 && r.is_finite() && len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "child {c} radius and length must be positive"
                )));
            }
            if !(angle > 0.0 && angle < std::f64::consts::FRAC_PI_2) {
                return Err(Error::InvalidParams(format!(
                    "child {c} angle must lie in (0, pi/2), got {angle}"
                )));
            }
        }
        Ok(())
    }
}

/// Split a parent radius into two child radii satisfying Murray's law
/// r1^3 + r2^3 = parent^3 with r2 = asymmetry * r1.
pub fn murray_split(parent_radius: f64, asymmetry: f64) -> Result<(f64, f64)> {
    if !(parent_radius > 0.0 && parent_radius.is_finite()) {
        return Err(Error::InvalidParams("parent_radius must be positive".into()));
    }
    if !(asymmetry > 0.0 && asymmetry <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "asymmetry must lie in (0, 1], got {asymmetry}"
        )));
    }
    let r1 = parent_radius / (1.0 + asymmetry.powi(3)).cbrt();
    Ok((r1, asymmetry * r1))
}

/// How boundary features are presented to a model: full offset vectors
/// or just their norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    VectorOffset,
    ScalarDistance,
}

/// Immutable tagged point cloud of a vessel lumen.
#[derive(Clone, Debug)]
pub struct Shape {
    pub id: String,
    pub points: Vec<Vec3>,
    pub roles: Vec<PointRole>,
    /// Row i = offsets to the nearest wall, inlet, and outlet points.
    pub features: Vec<[f64; 9]>,
    pub centerline: Vec<CenterlineSegment>,
}

impl Shape {
    /// Builds a shape and computes its feature rows. Requires at least
    /// one point of each boundary role.
    pub fn new(
        id: impl Into<String>,
        points: Vec<Vec3>,
        roles: Vec<PointRole>,
        centerline: Vec<CenterlineSegment>,
    ) -> Result<Self> {
        let id = id.into();
        if points.len() != roles.len() {
            return Err(Error::LengthMismatch {
                field: roles.len(),
                points: points.len(),
            });
        }
        let features = compute_features(&points, &roles).map_err(|e| match e {
            Error::MissingRole { role, .. } => Error::MissingRole {
                shape: id.clone(),
                role,
            },
            other => other,
        })?;
        Ok(Self {
            id,
            points,
            roles,
            features,
            centerline,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices_with_role(&self, role: PointRole) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }

    /// Indices of interior and wall points, in point order. This is the
    /// sub-cloud the differential operators are evaluated on.
    pub fn interior_wall_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| matches!(self.roles[i], PointRole::Interior | PointRole::Wall))
            .collect()
    }

    /// Scalar-distance variant of the features: the three offset norms.
    pub fn scalar_features(&self) -> Vec<[f64; 3]> {
        self.features
            .iter()
            .map(|f| {
                [
                    math::norm([f[0], f[1], f[2]]),
                    math::norm([f[3], f[4], f[5]]),
                    math::norm([f[6], f[7], f[8]]),
                ]
            })
            .collect()
    }
}

/// Point-count configuration for the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub n_interior: usize,
    pub n_wall: usize,
    /// Points per end-cap disk (inlet and each outlet).
    pub n_cap: usize,
    /// Rejection-sampling budget for the interior draw.
    pub max_attempts: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            n_interior: 2048,
            n_wall: 1024,
            n_cap: 64,
            max_attempts: 20_000_000,
        }
    }
}

impl GeometryConfig {
    pub fn with_counts(n_interior: usize, n_wall: usize, n_cap: usize) -> Self {
        Self {
            n_interior,
            n_wall,
            n_cap,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_interior == 0 || self.n_wall == 0 || self.n_cap == 0 {
            return Err(Error::InvalidParams(
                "point counts must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Centerline segments implied by the parameters: the parent tube plus
/// one segment per enabled child, children attached at the parent end cap.
pub fn centerline_of(params: &BifurcationParams) -> Vec<CenterlineSegment> {
    let junction = [params.parent_length, 0.0, 0.0];
    let mut segments = vec![CenterlineSegment::cylinder(
        [0.0, 0.0, 0.0],
        junction,
        params.parent_radius,
    )];
    let children = [
        (params.child_radii.0, params.child_lengths.0, params.child_angles.0, 1.0),
        (params.child_radii.1, params.child_lengths.1, params.child_angles.1, -1.0),
    ];
    for (radius, length, angle, side) in children {
        if length > 0.0 {
            let dir = [angle.cos(), side * angle.sin(), 0.0];
            let end = math::add(junction, math::scale(dir, length));
            segments.push(CenterlineSegment::cylinder(junction, end, radius));
        }
    }
    segments
}

fn inside_union(segments: &[CenterlineSegment], p: Vec3, margin: f64) -> bool {
    segments.iter().any(|s| s.signed_distance(p) < -margin)
}

/// Uniform random rotation matrix (Shoemake's quaternion method).
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let u1: f64 = rng.gen_range(0.0..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos());
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn rotate(rot: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [
        rot[0][0] * v[0] + rot[0][1] * v[1] + rot[0][2] * v[2],
        rot[1][0] * v[0] + rot[1][1] * v[1] + rot[1][2] * v[2],
        rot[2][0] * v[0] + rot[2][1] * v[1] + rot[2][2] * v[2],
    ]
}

/// Axis-aligned bounding box enclosing all frusta.
fn bounding_box(segments: &[CenterlineSegment]) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for seg in segments {
        let r = seg.radius_start.max(seg.radius_end);
        for endpoint in [seg.start, seg.end] {
            for a in 0..3 {
                lo[a] = lo[a].min(endpoint[a] - r);
                hi[a] = hi[a].max(endpoint[a] + r);
            }
        }
    }
    (lo, hi)
}

/// Orthonormal frame (n1, n2) perpendicular to `axis`. Deterministic:
/// seeds the cross product with the coordinate axis least aligned with it.
fn perpendicular_frame(axis: Vec3) -> (Vec3, Vec3) {
    let abs = [axis[0].abs(), axis[1].abs(), axis[2].abs()];
    let mut seed = [0.0; 3];
    let k = if abs[0] <= abs[1] && abs[0] <= abs[2] {
        0
    } else if abs[1] <= abs[2] {
        1
    } else {
        2
    };
    seed[k] = 1.0;
    let n1 = math::normalize(math::cross(axis, seed));
    let n2 = math::cross(axis, n1);
    (n1, n2)
}

const GOLDEN_ANGLE: f64 = 2.399963229728653;

/// Deterministic sunflower layout on a disk: equal-area radial rings, so
/// disk averages of radially symmetric profiles are exact to O(1/n).
fn sample_cap(center: Vec3, axis: Vec3, radius: f64, n: usize) -> Vec<Vec3> {
    let (n1, n2) = perpendicular_frame(axis);
    (0..n)
        .map(|i| {
            let r = radius * (((i as f64) + 0.5) / n as f64).sqrt();
            let theta = GOLDEN_ANGLE * i as f64;
            let offset = math::add(
                math::scale(n1, r * theta.cos()),
                math::scale(n2, r * theta.sin()),
            );
            math::add(center, offset)
        })
        .collect()
}

/// Generates the tagged point cloud of a bifurcation. Deterministic for a
/// fixed seed: interior points by rejection sampling inside the frustum
/// union, wall points on the lateral surfaces, cap points on end disks.
///
/// The cloud is emitted in a uniformly random orientation drawn from the
/// same seed; the rotated centerline carries the tube frame. Interior
/// candidates are accepted with a small inward margin so the containment
/// invariant survives rotation and f32 quantization.
pub fn generate_bifurcation(params: &BifurcationParams, cfg: &GeometryConfig) -> Result<Shape> {
    params.validate()?;
    cfg.validate()?;
    let segments = centerline_of(params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pose = random_rotation(&mut rng);

    // Interior: uniform rejection sampling in the bounding box, in the
    // canonical frame.
    let margin = 1e-5 * (params.parent_radius + params.parent_length);
    let (lo, hi) = bounding_box(&segments);
    let mut interior = Vec::with_capacity(cfg.n_interior);
    let mut attempts = 0usize;
    while interior.len() < cfg.n_interior {
        if attempts >= cfg.max_attempts {
            return Err(Error::SamplingFailed {
                attempts,
                reason: format!(
                    "accepted {} of {} interior points; degenerate geometry?",
                    interior.len(),
                    cfg.n_interior
                ),
            });
        }
        attempts += 1;
        let p = [
            rng.gen_range(lo[0]..hi[0]),
            rng.gen_range(lo[1]..hi[1]),
            rng.gen_range(lo[2]..hi[2]),
        ];
        if inside_union(&segments, p, margin) {
            interior.push(p);
        }
    }

    // Wall: sample lateral surfaces proportionally to area, rejecting
    // points that land strictly inside another tube (junction overlap).
    let areas: Vec<f64> = segments
        .iter()
        .map(|s| {
            let slant = (s.length().powi(2) + (s.radius_end - s.radius_start).powi(2)).sqrt();
            std::f64::consts::PI * (s.radius_start + s.radius_end) * slant
        })
        .collect();
    let total_area: f64 = areas.iter().sum();
    let mut wall = Vec::with_capacity(cfg.n_wall);
    attempts = 0;
    while wall.len() < cfg.n_wall {
        if attempts >= cfg.max_attempts {
            return Err(Error::SamplingFailed {
                attempts,
                reason: "wall sampling exhausted its attempt budget".into(),
            });
        }
        attempts += 1;
        let mut pick = rng.gen_range(0.0..total_area);
        let mut seg_idx = 0;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a || i == areas.len() - 1 {
                seg_idx = i;
                break;
            }
            pick -= a;
        }
        let seg = &segments[seg_idx];
        let t = rng.gen_range(0.0..seg.length());
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let axis = seg.direction();
        let (n1, n2) = perpendicular_frame(axis);
        let radius = seg.radius_at(t);
        let p = math::add(
            math::add(seg.start, math::scale(axis, t)),
            math::add(
                math::scale(n1, radius * phi.cos()),
                math::scale(n2, radius * phi.sin()),
            ),
        );
        let inside_other = segments
            .iter()
            .enumerate()
            .any(|(i, s)| i != seg_idx && s.signed_distance(p) < -1e-6 * radius);
        if !inside_other {
            wall.push(p);
        }
    }

    // Caps: inlet on the parent start disk, outlets on every open end.
    let parent = &segments[0];
    let inlet = sample_cap(parent.start, parent.direction(), parent.radius_start, cfg.n_cap);
    let outlet_segments: Vec<&CenterlineSegment> = if segments.len() > 1 {
        segments[1..].iter().collect()
    } else {
        vec![parent]
    };
    let mut outlets = Vec::new();
    for seg in outlet_segments {
        outlets.extend(sample_cap(seg.end, seg.direction(), seg.radius_end, cfg.n_cap));
    }

    let mut points = Vec::with_capacity(interior.len() + wall.len() + inlet.len() + outlets.len());
    let mut roles = Vec::with_capacity(points.capacity());
    points.extend_from_slice(&interior);
    roles.extend(std::iter::repeat(PointRole::Interior).take(interior.len()));
    points.extend_from_slice(&wall);
    roles.extend(std::iter::repeat(PointRole::Wall).take(wall.len()));
    points.extend_from_slice(&inlet);
    roles.extend(std::iter::repeat(PointRole::Inlet).take(inlet.len()));
    points.extend_from_slice(&outlets);
    roles.extend(std::iter::repeat(PointRole::Outlet).take(outlets.len()));

    // Apply the pose and quantize once.
    let points: Vec<Vec3> = points
        .iter()
        .map(|p| math::quantize_vec3(rotate(&pose, *p)))
        .collect();
    let segments: Vec<CenterlineSegment> = segments
        .iter()
        .map(|s| CenterlineSegment {
            start: rotate(&pose, s.start),
            end: rotate(&pose, s.end),
            radius_start: s.radius_start,
            radius_end: s.radius_end,
        })
        .collect();

    Shape::new(format!("shape-{:016x}", params.seed), points, roles, segments)
}

/// Per-point offsets to the nearest wall, inlet, and outlet points
/// (Euclidean nearest, ties broken by lowest point index). Results are
/// rounded through f32 to match the interchange precision.
pub fn compute_features(points: &[Vec3], roles: &[PointRole]) -> Result<Vec<[f64; 9]>> {
    let gather = |role: PointRole| -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..points.len()).filter(|&i| roles[i] == role).collect();
        if idx.is_empty() {
            return Err(Error::MissingRole {
                shape: String::new(),
                role: role.name(),
            });
        }
        Ok(idx)
    };
    let wall = gather(PointRole::Wall)?;
    let inlet = gather(PointRole::Inlet)?;
    let outlet = gather(PointRole::Outlet)?;

    let nearest = |p: Vec3, pool: &[usize]| -> Vec3 {
        let mut best = pool[0];
        let mut best_d = math::dist2(p, points[pool[0]]);
        for &j in &pool[1..] {
            let d = math::dist2(p, points[j]);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        math::sub(points[best], p)
    };

    Ok(points
        .iter()
        .map(|&p| {
            let w = nearest(p, &wall);
            let i = nearest(p, &inlet);
            let o = nearest(p, &outlet);
            let mut row = [0.0; 9];
            for (k, v) in w.iter().chain(i.iter()).chain(o.iter()).enumerate() {
                row[k] = math::quantize_f32(*v);
            }
            row
        })
        .collect())
}

/// Greedy max-min farthest-point sampling over row vectors.
///
/// With a non-empty preselected set, each pick maximizes the minimum
/// Euclidean distance to everything already selected. With an empty
/// preselected set the first pick is the row farthest from the centroid,
/// keeping the procedure fully deterministic. Ties break to the lowest
/// index.
pub fn farthest_point_sampling<R: AsRef<[f64]>>(
    vectors: &[R],
    preselected: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    let n = vectors.len();
    let mut is_selected = vec![false; n];
    for &i in preselected {
        if i >= n {
            return Err(Error::InvalidParams(format!(
                "preselected index {i} out of range ({n} rows)"
            )));
        }
        is_selected[i] = true;
    }
    let preselected_count = is_selected.iter().filter(|&&s| s).count();
    let available = n - preselected_count;
    if k > available {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available,
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let dim = vectors[0].as_ref().len();
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };

    // Min squared distance from each row to the selected set.
    let mut min_d2 = vec![f64::INFINITY; n];
    let relax = |min_d2: &mut Vec<f64>, chosen: usize| {
        let c = vectors[chosen].as_ref();
        for (j, row) in vectors.iter().enumerate() {
            let d = dist2(row.as_ref(), c);
            if d < min_d2[j] {
                min_d2[j] = d;
            }
        }
    };
    for (i, &sel) in is_selected.iter().enumerate() {
        if sel {
            relax(&mut min_d2, i);
        }
    }

    let mut picks = Vec::with_capacity(k);
    if preselected_count == 0 {
        let mut centroid = vec![0.0; dim];
        for row in vectors {
            for (c, x) in centroid.iter_mut().zip(row.as_ref()) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }
        let first = (0..n)
            .max_by(|&a, &b| {
                dist2(vectors[a].as_ref(), &centroid)
                    .total_cmp(&dist2(vectors[b].as_ref(), &centroid))
                    .then(b.cmp(&a)) // ties: keep the lower index
            })
            .expect("non-empty input");
        is_selected[first] = true;
        picks.push(first);
        relax(&mut min_d2, first);
    }

    while picks.len() < k {
        let next = (0..n)
            .filter(|&i| !is_selected[i])
            .max_by(|&a, &b| min_d2[a].total_cmp(&min_d2[b]).then(b.cmp(&a)))
            .expect("candidates remain");
        is_selected[next] = true;
        picks.push(next);
        relax(&mut min_d2, next);
    }
    Ok(picks)
}
