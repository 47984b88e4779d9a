use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use hrg_core::rg::{Grid, RGParams};
use hrg_core::tree::Window;

/// Which block-integral backend drives RG steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Fourier,
    Mc,
}

/// Everything a run depends on. Loaded from TOML, then overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p: u32,
    pub d: usize,
    pub l: u32,
    pub eps: f64,
    #[serde(rename = "S")]
    pub s: i32,
    pub grid_n: usize,
    pub phimax: f64,
    pub g: f64,
    pub mu: f64,
    /// CSV of `layer,index,g,mu` rows overriding the uniform couplings on
    /// every leaf under the named ball.
    pub couplings: Option<PathBuf>,
    pub seed: u64,
    pub backend: Backend,
    /// Sibling vectors per MC block integral.
    pub mc_samples: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = Grid::default();
        RunConfig {
            p: 2,
            d: 3,
            l: 1,
            eps: 0.1,
            s: 3,
            grid_n: grid.n,
            phimax: grid.phimax,
            g: 0.0,
            mu: 0.0,
            couplings: None,
            seed: 1,
            backend: Backend::Fourier,
            mc_samples: 20_000,
            output: None,
        }
    }
}

/// A validation failure naming the offending field.
#[derive(Debug)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for FieldError {}

fn field(field: &'static str, message: impl Into<String>) -> FieldError {
    FieldError {
        field,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.p < 2 {
            return Err(field("p", format!("must be >= 2, got {}", self.p)));
        }
        if !(2..self.p).all(|k| self.p % k != 0) {
            return Err(field("p", format!("must be prime, got {}", self.p)));
        }
        if self.d < 1 {
            return Err(field("d", "must be >= 1"));
        }
        if self.l < 1 {
            return Err(field("l", "must be >= 1"));
        }
        if !(self.eps >= 0.0 && self.eps < self.d as f64) {
            return Err(field("eps", format!("must satisfy 0 <= eps < d = {}, got {}", self.d, self.eps)));
        }
        if self.s < 1 {
            return Err(field("S", format!("must be >= 1, got {}", self.s)));
        }
        if self.grid_n % 2 == 0 || self.grid_n < 5 {
            return Err(field("grid_n", format!("must be odd and >= 5, got {}", self.grid_n)));
        }
        if !(self.phimax > 0.0 && self.phimax.is_finite()) {
            return Err(field("phimax", format!("must be positive, got {}", self.phimax)));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(field("g", format!("must be >= 0, got {}", self.g)));
        }
        if !self.mu.is_finite() {
            return Err(field("mu", "must be finite"));
        }
        if self.mc_samples < 2 {
            return Err(field("mc_samples", "must be >= 2"));
        }
        Ok(())
    }

    pub fn params(&self) -> hrg_core::Result<RGParams> {
        Ok(RGParams::new(self.p, self.d, self.eps)?.with_l(self.l))
    }

    pub fn grid(&self) -> hrg_core::Result<Grid> {
        Grid::new(self.grid_n, self.phimax)
    }

    pub fn window(&self) -> hrg_core::Result<Window> {
        Window::new(self.p, self.d, self.s)
    }
}
