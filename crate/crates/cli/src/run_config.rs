//! Persisted run configuration: one TOML file reproduces a run byte for
//! byte given the same binary.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub out_dir: String,
    pub geometry: GeometrySection,
    pub params: ParamsSection,
    pub grid: GridSection,
    pub family: FamilySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySection {
    pub spec: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamsSection {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub cells: usize,
    pub box_half: f64,
    /// 0 means the default max(2Δ, 5h).
    pub tube_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySection {
    pub stride: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub max_balls: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            threads: 0,
            out_dir: "codimlab-out".into(),
            geometry: GeometrySection::default(),
            params: ParamsSection::default(),
            grid: GridSection::default(),
            family: FamilySection::default(),
        }
    }
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection { spec: "flat:d=1,n=3,extent=10,h=0.01".into() }
    }
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection { beta: 1.0, gamma: 0.0, alpha: 1.0 }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: 48, box_half: 2.0, tube_radius: 0.0 }
    }
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection { stride: 8, r_min: 0.0, r_max: 0.0, max_balls: 64 }
    }
}

impl RunConfig {
    pub fn default_toml() -> String {
        toml::to_string_pretty(&RunConfig::default()).expect("serializable defaults")
    }
}
