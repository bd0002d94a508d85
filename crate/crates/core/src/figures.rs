//! Data behind the four figures: truncated Hadamard products of Ai, and
//! `f_Z`, `-log f_Z`, `(-log f_Z)''` at `c = 1`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::airy::{ai_hadamard, airy_real};
use crate::chernoff::ChernoffDist;
use crate::error::Result;
use crate::report::{svg_chart, write_columns, Series};

/// Truncation orders shown in the Hadamard-product figure.
pub const PRODUCT_TERMS: [usize; 3] = [25, 125, 500];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FigureConfig {
    /// Spacing of the Airy grid on `[-12, 2]`.
    pub airy_step: f64,
    /// Half-width and spacing of the density grid.
    pub density_half_width: f64,
    pub density_step: f64,
    pub svg: bool,
}

impl Default for FigureConfig {
    fn default() -> Self {
        FigureConfig { airy_step: 0.02, density_half_width: 3.0, density_step: 0.01, svg: false }
    }
}

/// Structural facts about the emitted curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiguresSummary {
    /// `sup |Ai - product_m|` over `[-12, 2]` for each of [`PRODUCT_TERMS`].
    pub product_sup_gap: [f64; 3],
    /// Location of the maximum of `f_Z` on the grid.
    pub density_argmax: f64,
    pub curvature_min: f64,
    pub curvature_argmin: f64,
    pub files: Vec<PathBuf>,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn write_csv_file(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    write_columns(BufWriter::new(File::create(path)?), header, columns)
}

/// Writes `fig1_airy_products.csv`, `fig2_density.csv`,
/// `fig3_neg_log_density.csv`, `fig4_curvature.csv` (and SVGs if asked)
/// into `dir`.
pub fn emit_figures(dir: &Path, config: &FigureConfig) -> Result<FiguresSummary> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    let xs = grid(-12.0, 2.0, config.airy_step);
    let ai: Vec<f64> = xs.iter().map(|&x| airy_real(x).0).collect();
    let mut products: Vec<Vec<f64>> = Vec::new();
    for m in PRODUCT_TERMS {
        let p = xs
            .par_iter()
            .map(|&x| ai_hadamard(Complex64::new(x, 0.0), m).map(|v| v.re))
            .collect::<Result<Vec<f64>>>()?;
        products.push(p);
    }
    let mut product_sup_gap = [0.0; 3];
    for (gap, p) in product_sup_gap.iter_mut().zip(&products) {
        *gap = ai.iter().zip(p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    }
    let path = dir.join("fig1_airy_products.csv");
    write_csv_file(&path, &["x", "ai", "product_25", "product_125", "product_500"], &[&xs, &ai, &products[0], &products[1], &products[2]])?;
    files.push(path);

    let dist = ChernoffDist::new(1.0)?;
    let ts = grid(-config.density_half_width, config.density_half_width, config.density_step);
    let profile = dist.strong_lc_profile(&ts)?;
    for (name, header, values) in [
        ("fig2_density.csv", "f", &profile.f),
        ("fig3_neg_log_density.csv", "neg_log_f", &profile.neg_log_f),
        ("fig4_curvature.csv", "w", &profile.w),
    ] {
        let path = dir.join(name);
        write_csv_file(&path, &["t", header], &[&ts, values])?;
        files.push(path);
    }

    if config.svg {
        let charts = [
            ("fig1_airy_products.svg", "Product approximations of Ai(x)", vec![
                Series { name: "Ai", x: &xs, y: &ai },
                Series { name: "m = 25", x: &xs, y: &products[0] },
                Series { name: "m = 125", x: &xs, y: &products[1] },
                Series { name: "m = 500", x: &xs, y: &products[2] },
            ]),
            ("fig2_density.svg", "The density f_Z", vec![Series { name: "f_Z", x: &ts, y: &profile.f }]),
            ("fig3_neg_log_density.svg", "-log f_Z", vec![Series { name: "-log f_Z", x: &ts, y: &profile.neg_log_f }]),
            ("fig4_curvature.svg", "(-log f_Z)''", vec![Series { name: "(-log f_Z)''", x: &ts, y: &profile.w }]),
        ];
        for (name, title, series) in charts {
            let path = dir.join(name);
            std::fs::write(&path, svg_chart(title, &series))?;
            files.push(path);
        }
    }

    let argmax = (0..ts.len()).fold(0, |b, i| if profile.f[i] > profile.f[b] { i } else { b });
    let argmin = (0..ts.len()).fold(0, |b, i| if profile.w[i] < profile.w[b] { i } else { b });
    Ok(FiguresSummary {
        product_sup_gap,
        density_argmax: ts[argmax],
        curvature_min: profile.w[argmin],
        curvature_argmin: ts[argmin],
        files,
    })
}
