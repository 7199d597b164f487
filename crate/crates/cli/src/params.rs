use std::sync::Arc;

use kwr_core::collision::{load_or_build, FrequencyGrid, KernelTable, SpectralDensity, Spacing, TableConfig};
use kwr_core::{Dimension, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "uniform")]
    pub spacing: Spacing,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

fn uniform() -> Spacing {
    Spacing::Uniform
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<FrequencyGrid>> {
        Ok(Arc::new(FrequencyGrid::new(self.spacing, self.lo, self.hi, self.n)?))
    }
}

/// Spectral densities `ρ(ω)` for the radial equation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `a·exp(−((ω−c)/w)²)`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// `T/(ω+μ)`.
    RayleighJeans { temperature: f64, mu: f64 },
    Constant { value: f64 },
}

impl DensitySpec {
    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            DensitySpec::Gaussian { center, width, amplitude } => amplitude * (-((w - center) / width).powi(2)).exp(),
            DensitySpec::RayleighJeans { temperature, mu } => temperature / (w + mu),
            DensitySpec::Constant { value } => value,
        }
    }

    pub fn sample(&self, grid: Arc<FrequencyGrid>) -> Result<SpectralDensity> {
        SpectralDensity::from_fn(grid, |w| self.eval(w))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TablePreset {
    #[default]
    Default,
    Coarse,
}

/// Kernel table layout: a preset, optionally overridden field by field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    #[serde(default)]
    pub preset: TablePreset,
    #[serde(default)]
    pub omega_cut: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

impl TableSpec {
    pub fn config(&self) -> TableConfig {
        let mut c = match self.preset {
            TablePreset::Default => TableConfig::default(),
            TablePreset::Coarse => TableConfig::coarse(),
        };
        if let Some(cut) = self.omega_cut {
            c = c.with_cut(cut);
        }
        if let Some(tol) = self.tol {
            c.tol = tol;
        }
        c
    }

    /// Through the `KWR_CACHE_DIR` cache when it is set.
    pub fn load(&self, d: Dimension, grid: Arc<FrequencyGrid>) -> Result<KernelTable> {
        load_or_build(d, grid, self.config(), None)
    }
}
