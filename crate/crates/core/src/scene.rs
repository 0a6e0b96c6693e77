//! Room geometry: transmitter, receiver panels, target grid and jammer region,
//! plus scenario and jammer-position sampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec3,
    pub side: Vec3,
}

impl Region {
    /// Distance from `p` to the closest point of the box.
    pub fn distance_to(&self, p: Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let excess = (p[i] - self.center[i]).abs() - self.side[i] / 2.0;
            if excess > 0.0 {
                d2 += excess * excess;
            }
        }
        d2.sqrt()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= self.side[i] / 2.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub tx_pos: Vec3,
    pub panel_centers: Vec<Vec3>,
    /// `element_pos[chain][n]`.
    pub element_pos: Vec<Vec<Vec3>>,
    pub grid_centers: Vec<Vec3>,
    pub jammer_region: Region,
    pub wavelength_m: f64,
    /// Zero-based chain hit by the jammer's direct path.
    pub attacked_chain: usize,
}

impl Scene {
    pub fn n_rf(&self) -> usize {
        self.element_pos.len()
    }

    pub fn n_elements(&self) -> usize {
        self.element_pos[0].len()
    }

    pub fn n_cells(&self) -> usize {
        self.grid_centers.len()
    }

    /// Smallest transmitter-cell or cell-element distance.
    pub fn min_signal_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for g in &self.grid_centers {
            d = d.min(distance(self.tx_pos, *g));
            for e in self.element_pos.iter().flatten() {
                d = d.min(distance(*g, *e));
            }
        }
        d
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Orthonormal in-plane axes of a panel whose normal points from `center`
/// towards `facing`.
pub fn panel_basis(center: Vec3, facing: Vec3) -> (Vec3, Vec3) {
    let normal = normalize(sub(facing, center));
    let helper = if normal[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let u = normalize(cross(helper, normal));
    let w = cross(normal, u);
    (u, w)
}

/// Offsets of a `rows × cols` lattice with the given pitch, centered on the
/// origin of the plane spanned by `basis`.
pub fn lattice_offsets(rows: usize, cols: usize, pitch: f64, basis: (Vec3, Vec3)) -> Vec<Vec3> {
    let (u, w) = basis;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let a = (r as f64 - (rows as f64 - 1.0) / 2.0) * pitch;
            let b = (c as f64 - (cols as f64 - 1.0) / 2.0) * pitch;
            out.push(add(scale(u, a), scale(w, b)));
        }
    }
    out
}

pub fn build_scene(cfg: &ExperimentConfig) -> Result<Scene> {
    let geo = &cfg.geometry;
    if cfg.n_rf > geo.panel_centers.len() {
        return Err(Error::Configuration(format!(
            "n_rf = {} but only {} panel centers are configured",
            cfg.n_rf,
            geo.panel_centers.len()
        )));
    }
    let wavelength = cfg.wavelength_m();
    let pitch = geo.element_spacing_wavelengths * wavelength;
    let panel_centers: Vec<Vec3> = geo.panel_centers[..cfg.n_rf].to_vec();

    let element_pos = match &geo.element_offsets {
        Some(offsets) => {
            if offsets.len() != cfg.n_rf || offsets.iter().any(|o| o.len() != cfg.n_elements) {
                return Err(Error::Layout(format!(
                    "element_offsets must hold {} chains of {} offsets",
                    cfg.n_rf, cfg.n_elements
                )));
            }
            panel_centers
                .iter()
                .zip(offsets)
                .map(|(c, offs)| offs.iter().map(|o| add(*c, *o)).collect())
                .collect()
        }
        None => {
            let side = (cfg.n_elements as f64).sqrt().round() as usize;
            if side * side != cfg.n_elements {
                return Err(Error::Layout(format!(
                    "{} elements do not form a square lattice; supply geometry.element_offsets",
                    cfg.n_elements
                )));
            }
            panel_centers
                .iter()
                .map(|c| {
                    let basis = panel_basis(*c, geo.target_center);
                    lattice_offsets(side, side, pitch, basis)
                        .into_iter()
                        .map(|o| add(*c, o))
                        .collect()
                })
                .collect()
        }
    };

    let [nx, ny, nz] = cfg.grid_dims;
    let [dx, dy, dz] = cfg.cell_size_m;
    let mut grid_centers = Vec::with_capacity(nx * ny * nz);
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                grid_centers.push([
                    geo.target_center[0] + (ix as f64 - (nx as f64 - 1.0) / 2.0) * dx,
                    geo.target_center[1] + (iy as f64 - (ny as f64 - 1.0) / 2.0) * dy,
                    geo.target_center[2] + (iz as f64 - (nz as f64 - 1.0) / 2.0) * dz,
                ]);
            }
        }
    }

    let jammer_region = Region { center: geo.jammer_center, side: geo.jammer_side_m };
    let attacked_chain = match geo.attacked_chain {
        Some(c) => c,
        None => panel_centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, distance(*c, geo.jammer_center)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0),
    };
    if attacked_chain >= cfg.n_rf {
        return Err(Error::Configuration(format!(
            "attacked chain {attacked_chain} out of range for {} chains",
            cfg.n_rf
        )));
    }

    let scene = Scene {
        tx_pos: geo.tx_pos,
        panel_centers,
        element_pos,
        grid_centers,
        jammer_region,
        wavelength_m: wavelength,
        attacked_chain,
    };
    check_far_field(&scene, cfg)?;
    Ok(scene)
}

/// All propagation distances must exceed ten cell sizes.
fn check_far_field(scene: &Scene, cfg: &ExperimentConfig) -> Result<()> {
    let limit = 10.0 * cfg.cell_size_m.iter().cloned().fold(0.0, f64::max);
    let d_signal = scene.min_signal_distance();
    let mut d_jam = f64::INFINITY;
    for g in &scene.grid_centers {
        d_jam = d_jam.min(scene.jammer_region.distance_to(*g));
    }
    for e in &scene.element_pos[scene.attacked_chain] {
        d_jam = d_jam.min(scene.jammer_region.distance_to(*e));
    }
    let d = d_signal.min(d_jam);
    if d <= limit {
        return Err(Error::Geometry(format!(
            "minimum propagation distance {d:.4} m does not exceed 10 cell sizes ({limit:.4} m)"
        )));
    }
    Ok(())
}

/// Reflection coefficient of an element per configuration, shared across
/// elements and grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementResponseTable {
    pub r: Vec<Complex64>,
}

impl ElementResponseTable {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let r = match &cfg.receiver.response_table {
            Some(t) => t.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            None => cfg.phase_set.iter().map(|p| Complex64::from_polar(1.0, *p)).collect(),
        };
        Self { r }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// One occupancy pattern of the target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub occupancy: Vec<bool>,
    /// Complex reflection coefficient per cell, zero where unoccupied.
    pub reflection: Vec<Complex64>,
}

impl Scenario {
    pub fn from_reflection(reflection: Vec<Complex64>) -> Self {
        let occupancy = reflection.iter().map(|v| v.norm() > 0.0).collect();
        Self { occupancy, reflection }
    }

    /// Occupancy as 0/1 labels.
    pub fn labels(&self) -> Vec<f64> {
        self.occupancy.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.occupancy.len()
    }
}

pub fn sample_scenarios<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Vec<Scenario> {
    let m = cfg.n_cells();
    let [lo, hi] = cfg.scenario.reflection_magnitude;
    (0..cfg.n_scenarios)
        .map(|_| {
            let reflection = (0..m)
                .map(|_| {
                    // Both draws are always taken so the stream layout does
                    // not depend on occupancy.
                    let occupied = rng.random::<f64>() < cfg.p_occupied;
                    let mag = lo + (hi - lo) * rng.random::<f64>();
                    let phase = 2.0 * PI * rng.random::<f64>();
                    if occupied {
                        Complex64::from_polar(mag, phase)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            Scenario::from_reflection(reflection)
        })
        .collect()
}

/// Uniform draw from the jammer region.
pub fn sample_jammer_position<R: Rng>(scene: &Scene, rng: &mut R) -> Vec3 {
    let Region { center, side } = scene.jammer_region;
    let mut p = center;
    for i in 0..3 {
        p[i] += side[i] * (rng.random::<f64>() - 0.5);
    }
    p
}
