//! Renderable scenes: a seabed plus randomly placed wreck meshes.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::Bvh;
use crate::geometry::{Aabb, Ray, Triangle, Vec3};
use crate::math;
use crate::mesh::TriangleMesh;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("range `{name}` is empty or inverted: [{lo}, {hi}]")]
    BadRange { name: &'static str, lo: f64, hi: f64 },
    #[error("reflectance {0} outside (0, 1]")]
    BadReflectance(f64),
    #[error("scale {0} must be positive")]
    BadScale(f64),
    #[error("placement {index} lies outside the ensonified swath")]
    OutsideSwath { index: usize },
    #[error("placement {index} is {height} m tall, sensor altitude is {altitude} m")]
    TooTall {
        index: usize,
        height: f64,
        altitude: f64,
    },
    #[error("placement {index} refers to mesh {mesh} but only {available} meshes were given")]
    UnknownMesh {
        index: usize,
        mesh: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Unitless acoustic reflectance in (0, 1].
    pub reflectance: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, reflectance: f64) -> Result<Self, SceneError> {
        check_reflectance(reflectance)?;
        Ok(Self {
            name: name.into(),
            reflectance,
        })
    }
}

fn check_reflectance(r: f64) -> Result<(), SceneError> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(SceneError::BadReflectance(r))
    }
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Range {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Range { lo, hi }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn validate(&self, name: &'static str) -> Result<(), SceneError> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(SceneError::BadRange {
                name,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Uniform draw. One RNG word is consumed even for point ranges so the
    /// stream stays aligned when a range is collapsed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Sampling ranges for wreck placement. Angles are radians, positions meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationRanges {
    pub scale: Range,
    pub yaw: Range,
    pub position_x: Range,
    pub position_y: Range,
    pub reflectance: Range,
    /// Also sample roll and pitch. Off by default: wrecks rest upright-ish.
    #[serde(default)]
    pub full_rotation: bool,
    #[serde(default = "zero_range")]
    pub roll: Range,
    #[serde(default = "zero_range")]
    pub pitch: Range,
}

fn zero_range() -> Range {
    Range::point(0.0)
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        Self {
            scale: Range::new(0.8, 1.2),
            yaw: Range::new(0.0, TAU),
            position_x: Range::new(20.0, 40.0),
            position_y: Range::new(20.0, 40.0),
            reflectance: Range::new(0.5, 1.0),
            full_rotation: false,
            roll: Range::new(-0.3, 0.3),
            pitch: Range::new(-0.1, 0.1),
        }
    }
}

impl RandomizationRanges {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.scale.validate("scale")?;
        self.yaw.validate("yaw")?;
        self.position_x.validate("position_x")?;
        self.position_y.validate("position_y")?;
        self.reflectance.validate("reflectance")?;
        self.roll.validate("roll")?;
        self.pitch.validate("pitch")?;
        if self.scale.lo <= 0.0 {
            return Err(SceneError::BadScale(self.scale.lo));
        }
        check_reflectance(self.reflectance.lo)?;
        check_reflectance(self.reflectance.hi)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlacement {
    pub mesh_index: usize,
    pub mesh_name: String,
    /// Where the mesh's footprint center lands; `z` is the seabed contact height.
    pub position: Vec3,
    /// Radians in `[0, 2π)`.
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub scale: f64,
    pub material: Material,
}

pub fn randomize_placement<R: Rng + ?Sized>(
    mesh_index: usize,
    mesh: &TriangleMesh,
    ranges: &RandomizationRanges,
    rng: &mut R,
) -> Result<ScenePlacement, SceneError> {
    ranges.validate()?;
    let scale = ranges.scale.sample(rng);
    let yaw = wrap_angle(ranges.yaw.sample(rng));
    let x = ranges.position_x.sample(rng);
    let y = ranges.position_y.sample(rng);
    let reflectance = ranges.reflectance.sample(rng);
    let (roll, pitch) = if ranges.full_rotation {
        (ranges.roll.sample(rng), ranges.pitch.sample(rng))
    } else {
        (0.0, 0.0)
    };
    Ok(ScenePlacement {
        mesh_index,
        mesh_name: mesh.name.clone(),
        position: Vec3::new(x, y, 0.0),
        yaw,
        pitch,
        roll,
        scale,
        material: Material::new("wreck", reflectance)?,
    })
}

/// Wrap into `[0, 2π)`.
fn wrap_angle(a: f64) -> f64 {
    let r = a % TAU;
    let r = if r < 0.0 { r + TAU } else { r };
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl ScenePlacement {
    /// Move a mesh-local point into the world.
    fn transform_fn(&self, mesh: &TriangleMesh) -> impl Fn(Vec3) -> Vec3 + '_ {
        let b = mesh.bounds();
        let anchor = Vec3::new(b.center().x, b.center().y, b.min.z);
        let (sy, cy) = (math::sin(self.yaw), math::cos(self.yaw));
        let (sp, cp) = (math::sin(self.pitch), math::cos(self.pitch));
        let (sr, cr) = (math::sin(self.roll), math::cos(self.roll));
        let scale = self.scale;
        let rotate = move |p: Vec3| {
            // roll about x, pitch about y, yaw about z
            let p = Vec3::new(p.x, cr * p.y - sr * p.z, sr * p.y + cr * p.z);
            let p = Vec3::new(cp * p.x + sp * p.z, p.y, -sp * p.x + cp * p.z);
            Vec3::new(cy * p.x - sy * p.y, sy * p.x + cy * p.y, p.z)
        };
        // Re-ground after roll/pitch so the lowest point touches the seabed.
        let drop = mesh
            .vertices
            .iter()
            .map(|&v| rotate((v - anchor) * scale).z)
            .fold(f64::INFINITY, f64::min);
        let drop = if drop.is_finite() { drop } else { 0.0 };
        let position = self.position;
        move |v: Vec3| {
            let p = rotate((v - anchor) * scale);
            Vec3::new(p.x, p.y, p.z - drop) + position
        }
    }

    /// World-space triangles of `mesh` under this placement, same order and winding.
    pub fn world_triangles(&self, mesh: &TriangleMesh) -> Vec<Triangle> {
        let f = self.transform_fn(mesh);
        let verts: Vec<Vec3> = mesh.vertices.iter().map(|&v| f(v)).collect();
        mesh.triangles
            .iter()
            .map(|&[a, b, c]| Triangle::new(verts[a as usize], verts[b as usize], verts[c as usize]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeabedConfig {
    pub reflectance: f64,
    /// Peak amplitude of value-noise relief in meters. Zero keeps an exact plane.
    #[serde(default)]
    pub noise_amplitude: f64,
    /// Value-noise lattice spacing in meters.
    #[serde(default = "default_noise_cell")]
    pub noise_cell: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

fn default_noise_cell() -> f64 {
    2.0
}

impl Default for SeabedConfig {
    fn default() -> Self {
        Self {
            reflectance: 0.3,
            noise_amplitude: 0.0,
            noise_cell: default_noise_cell(),
            noise_seed: 0,
        }
    }
}

impl SeabedConfig {
    /// Smoothed value-noise height at `(x, y)`, in `[-amplitude, amplitude]`.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        if self.noise_amplitude == 0.0 {
            return 0.0;
        }
        let fx = x / self.noise_cell;
        let fy = y / self.noise_cell;
        let (ix, iy) = (math::floor(fx), math::floor(fy));
        let (tx, ty) = (smooth(fx - ix), smooth(fy - iy));
        let lattice = |i: f64, j: f64| {
            let h = seed::derive(
                seed::derive(self.noise_seed ^ seed::stage::SEABED, i as i64 as u64),
                j as i64 as u64,
            );
            (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let a = lattice(ix, iy);
        let b = lattice(ix + 1.0, iy);
        let c = lattice(ix, iy + 1.0);
        let d = lattice(ix + 1.0, iy + 1.0);
        let top = a + (b - a) * tx;
        let bottom = c + (d - c) * tx;
        self.noise_amplitude * (top + (bottom - top) * ty)
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Footprint the sensor can see: along-track `x ∈ [0, along_track]`,
/// across-track `|y| ≤ max_ground_range` (starboard `y ≥ 0` only unless two-sided).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Swath {
    pub altitude: f64,
    pub along_track: f64,
    pub max_ground_range: f64,
    pub two_sided: bool,
}

impl Swath {
    pub fn contains(&self, b: &Aabb) -> bool {
        let y_lo = if self.two_sided {
            -self.max_ground_range
        } else {
            0.0
        };
        b.min.x >= 0.0
            && b.max.x <= self.along_track
            && b.min.y >= y_lo
            && b.max.y <= self.max_ground_range
    }
}

/// What a triangle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Owner {
    Seabed,
    Wreck(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneHit {
    pub distance: f64,
    /// Unit normal facing back toward the ray origin.
    pub normal: Vec3,
    pub reflectance: f64,
    pub owner: Owner,
}

impl SceneHit {
    pub fn is_wreck(&self) -> bool {
        matches!(self.owner, Owner::Wreck(_))
    }
}

/// Immutable scene. Shareable across render workers.
#[derive(Debug, Clone)]
pub struct Scene {
    seabed: SeabedConfig,
    swath: Swath,
    placements: Vec<ScenePlacement>,
    triangles: Vec<Triangle>,
    owners: Vec<Owner>,
    bvh: Bvh,
}

/// JSON-friendly summary of a scene, for debugging and determinism checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDump {
    pub seabed: SeabedConfig,
    pub swath: Swath,
    pub placements: Vec<ScenePlacement>,
    pub triangle_count: usize,
    pub wreck_triangle_count: usize,
    pub wreck_bounds: Vec<Aabb>,
}

pub fn build_scene(
    seabed: SeabedConfig,
    swath: Swath,
    meshes: &[TriangleMesh],
    placements: Vec<ScenePlacement>,
) -> Result<Scene, SceneError> {
    check_reflectance(seabed.reflectance)?;
    let mut triangles = Vec::new();
    let mut owners = Vec::new();
    for (index, p) in placements.iter().enumerate() {
        let mesh = meshes.get(p.mesh_index).ok_or(SceneError::UnknownMesh {
            index,
            mesh: p.mesh_index,
            available: meshes.len(),
        })?;
        if p.scale <= 0.0 {
            return Err(SceneError::BadScale(p.scale));
        }
        check_reflectance(p.material.reflectance)?;
        let world = p.world_triangles(mesh);
        let bounds = world.iter().fold(Aabb::EMPTY, |b, t| b.union(t.bounds()));
        if !swath.contains(&bounds) {
            return Err(SceneError::OutsideSwath { index });
        }
        if bounds.max.z >= swath.altitude {
            return Err(SceneError::TooTall {
                index,
                height: bounds.max.z,
                altitude: swath.altitude,
            });
        }
        owners.extend(core::iter::repeat_n(Owner::Wreck(index as u32), world.len()));
        triangles.extend(world);
    }
    if seabed.noise_amplitude != 0.0 {
        let relief = tessellate_seabed(&seabed, &swath);
        owners.extend(core::iter::repeat_n(Owner::Seabed, relief.len()));
        triangles.extend(relief);
    }
    let bvh = Bvh::build(&triangles);
    Ok(Scene {
        seabed,
        swath,
        placements,
        triangles,
        owners,
        bvh,
    })
}

fn tessellate_seabed(seabed: &SeabedConfig, swath: &Swath) -> Vec<Triangle> {
    let step = seabed.noise_cell * 0.5;
    let margin = 2.0 * seabed.noise_cell;
    let x0 = -margin;
    let x1 = swath.along_track + margin;
    let y0 = if swath.two_sided {
        -swath.max_ground_range - margin
    } else {
        -margin
    };
    let y1 = swath.max_ground_range + margin;
    let nx = ((x1 - x0) / step) as usize + 1;
    let ny = ((y1 - y0) / step) as usize + 1;
    let p = |i: usize, j: usize| {
        let x = x0 + i as f64 * step;
        let y = y0 + j as f64 * step;
        Vec3::new(x, y, seabed.height(x, y))
    };
    let mut out = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1));
            out.push(Triangle::new(a, b, c));
            out.push(Triangle::new(a, c, d));
        }
    }
    out
}

impl Scene {
    pub fn swath(&self) -> &Swath {
        &self.swath
    }

    pub fn altitude(&self) -> f64 {
        self.swath.altitude
    }

    pub fn seabed(&self) -> &SeabedConfig {
        &self.seabed
    }

    pub fn placements(&self) -> &[ScenePlacement] {
        &self.placements
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn owners(&self) -> &[Owner] {
        &self.owners
    }

    pub fn wreck_triangle_count(&self) -> usize {
        self.owners.iter().filter(|o| matches!(o, Owner::Wreck(_))).count()
    }

    fn surface_hit(&self, ray: &Ray, tri: usize, distance: f64) -> SceneHit {
        let mut n = self.triangles[tri].normal();
        if n.dot(ray.dir) > 0.0 {
            n = -n;
        }
        let owner = self.owners[tri];
        let reflectance = match owner {
            Owner::Seabed => self.seabed.reflectance,
            Owner::Wreck(i) => self.placements[i as usize].material.reflectance,
        };
        SceneHit {
            distance,
            normal: n,
            reflectance,
            owner,
        }
    }

    fn plane_hit(&self, ray: &Ray, t_max: f64) -> Option<SceneHit> {
        if self.seabed.noise_amplitude != 0.0 || ray.dir.z >= 0.0 {
            return None;
        }
        let t = -ray.origin.z / ray.dir.z;
        (t > 0.0 && t < t_max).then_some(SceneHit {
            distance: t,
            normal: Vec3::new(0.0, 0.0, 1.0),
            reflectance: self.seabed.reflectance,
            owner: Owner::Seabed,
        })
    }

    /// Nearest surface along `ray` closer than `t_max`, via the BVH.
    pub fn nearest_hit(&self, ray: &Ray, t_max: f64) -> Option<SceneHit> {
        let plane = self.plane_hit(ray, t_max);
        let limit = plane.map_or(t_max, |h| h.distance);
        match self.bvh.nearest(&self.triangles, ray, limit) {
            Some(h) => Some(self.surface_hit(ray, h.triangle, h.distance)),
            None => plane,
        }
    }

    /// Same as [`Scene::nearest_hit`] but scanning every triangle; the test oracle.
    pub fn nearest_hit_brute_force(&self, ray: &Ray, t_max: f64) -> Option<SceneHit> {
        let plane = self.plane_hit(ray, t_max);
        let limit = plane.map_or(t_max, |h| h.distance);
        match crate::bvh::nearest_brute_force(&self.triangles, ray, limit) {
            Some(h) => Some(self.surface_hit(ray, h.triangle, h.distance)),
            None => plane,
        }
    }

    pub fn dump(&self) -> SceneDump {
        let mut wreck_bounds = alloc::vec![Aabb::EMPTY; self.placements.len()];
        for (t, o) in self.triangles.iter().zip(&self.owners) {
            if let Owner::Wreck(i) = o {
                wreck_bounds[*i as usize] = wreck_bounds[*i as usize].union(t.bounds());
            }
        }
        SceneDump {
            seabed: self.seabed.clone(),
            swath: self.swath,
            placements: self.placements.clone(),
            triangle_count: self.triangles.len(),
            wreck_triangle_count: self.wreck_triangle_count(),
            wreck_bounds,
        }
    }
}
