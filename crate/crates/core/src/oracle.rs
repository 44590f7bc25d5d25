//! Analytic steady-flow labeler standing in for a CFD engine.
//!
//! Each tube carries a fully developed Poiseuille profile. Child mean
//! speeds follow from mass conservation with Murray flow fractions
//! f_c = R_c^3 / (R_1^3 + R_2^3). Inside the junction the parent and
//! child profiles are joined by a cosine partition of unity over one
//! parent radius along the parent axis; the divergence this introduces
//! is confined to that window. Wall points are exactly zero (no slip).

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CenterlineSegment, PointRole, Shape};
use crate::math::{self, Vec3};

/// Fluid constants used by the momentum residual and recorded with labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidConstants {
    /// Density rho, kg/m^3.
    pub density: f64,
    /// Dynamic viscosity mu, Pa*s.
    pub dynamic_viscosity: f64,
}

impl Default for FluidConstants {
    fn default() -> Self {
        // Typical blood values.
        Self {
            density: 1060.0,
            dynamic_viscosity: 3.5e-3,
        }
    }
}

impl FluidConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.dynamic_viscosity > 0.0) {
            return Err(Error::InvalidParams(
                "density and dynamic_viscosity must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-point 3-vector field (m/s), index-aligned with a shape's points.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub values: Vec<Vec3>,
}

impl VelocityField {
    pub fn new(values: Vec<Vec3>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![[0.0; 3]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Rounds every component through f32, matching the interchange format.
    pub fn quantized(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| math::quantize_vec3(*v)).collect(),
        }
    }

    pub fn check_alignment(&self, shape: &Shape) -> Result<()> {
        if self.len() != shape.len() {
            return Err(Error::LengthMismatch {
                field: self.len(),
                points: shape.len(),
            });
        }
        Ok(())
    }
}

/// Optional zero-mean Gaussian label noise emulating solver error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Fully developed parabolic profile of a tube segment:
/// 2 * mean_speed * (1 - r^2/R^2) along the axis direction.
pub fn poiseuille_velocity(
    point: Vec3,
    segment: &CenterlineSegment,
    mean_speed: f64,
) -> Result<Vec3> {
    let (t, r) = segment.axial_radial(point);
    let radius = segment.radius_at(t);
    if r > radius {
        return Err(Error::OutsideTube { radial: r, radius });
    }
    let magnitude = 2.0 * mean_speed * (1.0 - (r * r) / (radius * radius));
    Ok(math::scale(segment.direction(), magnitude))
}

/// Flow fraction of each child segment under Murray splitting:
/// f_c = R_c^3 / sum of child radii cubed. Children are `segments[1..]`.
pub fn flow_fractions(segments: &[CenterlineSegment]) -> Vec<f64> {
    let cubes: Vec<f64> = segments[1..]
        .iter()
        .map(|s| s.radius_start.powi(3))
        .collect();
    let total: f64 = cubes.iter().sum();
    cubes.iter().map(|c| c / total).collect()
}

struct BlendedFlow<'a> {
    parent: &'a CenterlineSegment,
    children: Vec<&'a CenterlineSegment>,
    child_mean_speeds: Vec<f64>,
    inflow: f64,
}

impl<'a> BlendedFlow<'a> {
    fn new(segments: &'a [CenterlineSegment], inflow: f64) -> Self {
        let parent = &segments[0];
        let children: Vec<&CenterlineSegment> = segments[1..].iter().collect();
        let fractions = if children.is_empty() {
            Vec::new()
        } else {
            flow_fractions(segments)
        };
        let child_mean_speeds = children
            .iter()
            .zip(&fractions)
            .map(|(c, f)| {
                inflow * parent.radius_start.powi(2) * f / c.radius_start.powi(2)
            })
            .collect();
        Self {
            parent,
            children,
            child_mean_speeds,
            inflow,
        }
    }

    /// Parent-side blend weight at parent axial coordinate `s`: 1 before
    /// the window, cosine ramp to 0 across the last parent radius.
    fn parent_weight(&self, s: f64) -> f64 {
        if self.children.is_empty() {
            return 1.0;
        }
        let window = self.parent.radius_start;
        let start = self.parent.length() - window;
        let x = ((s - start) / window).clamp(0.0, 1.0);
        0.5 * (1.0 + (std::f64::consts::PI * x).cos())
    }

    /// Child-side velocity: flux-weighted mix of the child profiles whose
    /// (axially unbounded) tubes cover the point, with weights vanishing
    /// at each tube boundary so the mix stays continuous.
    fn child_velocity(&self, p: Vec3) -> Vec3 {
        let mut acc = [0.0; 3];
        let mut weight_sum = 0.0;
        let fractions = flow_fractions_of(&self.children);
        for ((child, mean_speed), fraction) in
            self.children.iter().zip(&self.child_mean_speeds).zip(&fractions)
        {
            let (t, r) = child.axial_radial(p);
            let radius = child.radius_at(t);
            let coverage = 1.0 - (r * r) / (radius * radius);
            if coverage <= 0.0 {
                continue;
            }
            let w = coverage * fraction;
            let u = math::scale(child.direction(), 2.0 * mean_speed * coverage);
            acc = math::add(acc, math::scale(u, w));
            weight_sum += w;
        }
        if weight_sum > 0.0 {
            math::scale(acc, 1.0 / weight_sum)
        } else {
            [0.0; 3]
        }
    }

    fn velocity(&self, p: Vec3) -> Vec3 {
        let (s, r) = self.parent.axial_radial(p);
        let w = self.parent_weight(s);
        let mut u = [0.0; 3];
        if w > 0.0 {
            let radius = self.parent.radius_at(s);
            let coverage = 1.0 - (r * r) / (radius * radius);
            if coverage > 0.0 {
                u = math::scale(self.parent.direction(), 2.0 * self.inflow * coverage * w);
            }
        }
        if w < 1.0 {
            u = math::add(u, math::scale(self.child_velocity(p), 1.0 - w));
        }
        u
    }
}

fn flow_fractions_of(children: &[&CenterlineSegment]) -> Vec<f64> {
    let cubes: Vec<f64> = children.iter().map(|s| s.radius_start.powi(3)).collect();
    let total: f64 = cubes.iter().sum();
    if total > 0.0 {
        cubes.iter().map(|c| c / total).collect()
    } else {
        Vec::new()
    }
}

/// Labels a shape with the analytic steady flow for the given mean inlet
/// speed. Wall points receive exactly zero velocity. Fails if any
/// non-wall point is outside every centerline segment.
pub fn label_shape(shape: &Shape, constants: &FluidConstants, inflow: f64) -> Result<VelocityField> {
    constants.validate()?;
    if !(inflow > 0.0 && inflow.is_finite()) {
        return Err(Error::InvalidParams("inflow must be positive".into()));
    }
    if shape.centerline.is_empty() {
        return Err(Error::InvalidParams(format!(
            "shape '{}' has no centerline",
            shape.id
        )));
    }
    let flow = BlendedFlow::new(&shape.centerline, inflow);
    let mut values = Vec::with_capacity(shape.len());
    for (i, (&p, &role)) in shape.points.iter().zip(&shape.roles).enumerate() {
        if role == PointRole::Wall {
            values.push([0.0; 3]);
            continue;
        }
        // Tolerance admits cap points on end planes and f32-quantized
        // coordinates a hair off the exact surface.
        let covered = shape
            .centerline
            .iter()
            .any(|seg| seg.signed_distance(p) <= 1e-6 * (seg.radius_start + seg.length()));
        if !covered {
            return Err(Error::Unassignable {
                shape: shape.id.clone(),
                index: i,
            });
        }
        values.push(flow.velocity(p));
    }
    Ok(VelocityField::new(values))
}

/// Analytic labeler with fixed constants and inflow; the engine counts
/// invocations of [`Oracle::label`] as oracle calls.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub constants: FluidConstants,
    pub inflow: f64,
    pub noise: Option<LabelNoise>,
}

impl Oracle {
    pub fn new(constants: FluidConstants, inflow: f64) -> Self {
        Self {
            constants,
            inflow,
            noise: None,
        }
    }

    pub fn with_noise(mut self, noise: LabelNoise) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn label(&self, shape: &Shape) -> Result<VelocityField> {
        let mut field = label_shape(shape, &self.constants, self.inflow)?;
        if let Some(noise) = self.noise {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(math::mix_seed(
                noise.seed,
                math::hash_str(&shape.id),
            ));
            let normal = Normal::new(0.0, noise.sigma)
                .map_err(|e| Error::InvalidParams(format!("label noise: {e}")))?;
            for v in &mut field.values {
                for x in v.iter_mut() {
                    *x += normal.sample(&mut rng);
                }
            }
        }
        Ok(field)
    }
}
