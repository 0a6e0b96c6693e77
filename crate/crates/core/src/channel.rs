//! Free-space line-of-sight channel gains and projection matrices.
//!
//! The reflected-path gain through element `n` of a chain in configuration
//! `i`, for grid cell `m`, is
//!
//! ```text
//! α = λ² r(i) √g exp(-j2π(d_src,m + d_m,n)/λ) / ((4π)² d_src,m d_m,n)
//! ```
//!
//! It factors into a source term depending only on the cell and a receive
//! term depending only on the (cell, element) pair, which is how the hot
//! paths evaluate it: see [`ReceiveGains`] and [`SourceGains`].
//!
//! Projection-matrix rows are ordered element-major, configuration-minor:
//! row `n·N_s + i` holds element `n` in configuration `i`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::scene::{distance, ElementResponseTable, Scene, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Transmitter,
    Jammer,
}

/// A radiating source: the probe transmitter or the jammer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub kind: SourceKind,
    pub pos: Vec3,
    /// Linear antenna gain.
    pub gain: f64,
}

impl Source {
    pub fn transmitter(scene: &Scene, cfg: &ExperimentConfig) -> Self {
        Self { kind: SourceKind::Transmitter, pos: scene.tx_pos, gain: cfg.tx_gain_linear() }
    }

    pub fn jammer(pos: Vec3, cfg: &ExperimentConfig) -> Self {
        Self { kind: SourceKind::Jammer, pos, gain: cfg.jammer_gain_linear() }
    }
}

/// exp(-j2πd/λ)
fn propagation_phase(d: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * d / wavelength)
}

/// Closed-form gain of the source → cell `m` → element `n` of `chain` path
/// with the element in configuration `i`, for a unit reflection coefficient.
pub fn path_gain(
    scene: &Scene,
    table: &ElementResponseTable,
    source: &Source,
    m: usize,
    chain: usize,
    n: usize,
    i: usize,
) -> Result<Complex64> {
    check_index("cell", m, scene.n_cells())?;
    check_index("chain", chain, scene.n_rf())?;
    check_index("element", n, scene.n_elements())?;
    check_index("configuration", i, table.len())?;
    let cell = scene.grid_centers[m];
    let d1 = distance(source.pos, cell);
    let d2 = distance(cell, scene.element_pos[chain][n]);
    reflected_gain(scene.wavelength_m, table.r[i], source.gain, d1, d2)
}

/// λ² r √g e^{-j2π(d1+d2)/λ} / ((4π)² d1 d2)
pub fn reflected_gain(wavelength: f64, r: Complex64, gain: f64, d1: f64, d2: f64) -> Result<Complex64> {
    if d1 <= 0.0 {
        return Err(Error::ZeroDistance("source and grid cell"));
    }
    if d2 <= 0.0 {
        return Err(Error::ZeroDistance("grid cell and element"));
    }
    let mag = wavelength * wavelength * gain.sqrt() / ((4.0 * PI).powi(2) * d1 * d2);
    Ok(r * mag * propagation_phase(d1 + d2, wavelength))
}

fn check_index(what: &str, i: usize, len: usize) -> Result<()> {
    if i < len {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{what} index {i} >= {len}")))
    }
}

/// Per-chain projection matrices of shape (N·N_s) × M.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub blocks: Vec<DMatrix<Complex64>>,
    pub source: SourceKind,
}

impl ProjectionMatrix {
    pub fn n_states(&self, n_elements: usize) -> usize {
        self.blocks[0].nrows() / n_elements
    }

    /// Column-major (re, im) pairs per chain, for cross-checking elsewhere.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Block {
            rows: usize,
            cols: usize,
            entries: Vec<[f64; 2]>,
        }
        #[derive(Serialize)]
        struct Doc {
            source: SourceKind,
            blocks: Vec<Block>,
        }
        let doc = Doc {
            source: self.source,
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    rows: b.nrows(),
                    cols: b.ncols(),
                    entries: b.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("projection serializes")
    }
}

/// Assemble A (or A_J) entry by entry from [`path_gain`].
pub fn build_projection(
    scene: &Scene,
    table: &ElementResponseTable,
    source: &Source,
) -> Result<ProjectionMatrix> {
    let n_states = table.len();
    let n_el = scene.n_elements();
    let m_cells = scene.n_cells();
    let mut blocks = Vec::with_capacity(scene.n_rf());
    for chain in 0..scene.n_rf() {
        let mut block = DMatrix::zeros(n_el * n_states, m_cells);
        for n in 0..n_el {
            for i in 0..n_states {
                for m in 0..m_cells {
                    block[(n * n_states + i, m)] = path_gain(scene, table, source, m, chain, n, i)?;
                }
            }
        }
        blocks.push(block);
    }
    Ok(ProjectionMatrix { blocks, source: source.kind })
}

/// Receive half of the factored gain, λ e^{-j2πd/λ}/(4πd) for every
/// (chain, element, cell), with the response table alongside.
#[derive(Debug, Clone)]
pub struct ReceiveGains {
    pub n_rf: usize,
    pub n_elements: usize,
    pub n_cells: usize,
    /// `[chain][n][m]`, flattened.
    pub gains: Vec<Complex64>,
    pub response: Vec<Complex64>,
}

impl ReceiveGains {
    pub fn new(scene: &Scene, table: &ElementResponseTable) -> Self {
        let lambda = scene.wavelength_m;
        let (n_rf, n_el, m_cells) = (scene.n_rf(), scene.n_elements(), scene.n_cells());
        let mut gains = Vec::with_capacity(n_rf * n_el * m_cells);
        for chain in 0..n_rf {
            for n in 0..n_el {
                for m in 0..m_cells {
                    let d = distance(scene.grid_centers[m], scene.element_pos[chain][n]);
                    gains.push(lambda / (4.0 * PI * d) * propagation_phase(d, lambda));
                }
            }
        }
        Self { n_rf, n_elements: n_el, n_cells: m_cells, gains, response: table.r.clone() }
    }

    /// Gains of element `n` on `chain` over all cells.
    pub fn element(&self, chain: usize, n: usize) -> &[Complex64] {
        let start = (chain * self.n_elements + n) * self.n_cells;
        &self.gains[start..start + self.n_cells]
    }

    pub fn n_states(&self) -> usize {
        self.response.len()
    }
}

/// Source half of the factored gain, λ √g e^{-j2πd/λ}/(4πd) per cell.
#[derive(Debug, Clone)]
pub struct SourceGains {
    pub per_cell: Vec<Complex64>,
}

impl SourceGains {
    pub fn new(scene: &Scene, source: &Source) -> Self {
        let lambda = scene.wavelength_m;
        let per_cell = scene
            .grid_centers
            .iter()
            .map(|g| {
                let d = distance(source.pos, *g);
                lambda * source.gain.sqrt() / (4.0 * PI * d) * propagation_phase(d, lambda)
            })
            .collect();
        Self { per_cell }
    }
}

/// Direct jammer path into the attacked chain, one entry per chain.
#[derive(Debug, Clone, PartialEq)]
pub struct JammerLosVector {
    pub h: Vec<Complex64>,
}

/// Sum over the attacked panel's elements of (λ/4π) √g_J e^{-j2πd/λ} / d.
pub fn build_jammer_los(scene: &Scene, jammer_pos: Vec3, jammer_gain: f64) -> JammerLosVector {
    let lambda = scene.wavelength_m;
    let mut h = vec![Complex64::new(0.0, 0.0); scene.n_rf()];
    h[scene.attacked_chain] = scene.element_pos[scene.attacked_chain]
        .iter()
        .map(|e| {
            let d = distance(jammer_pos, *e);
            lambda / (4.0 * PI) * jammer_gain.sqrt() * propagation_phase(d, lambda) / d
        })
        .sum();
    JammerLosVector { h }
}
