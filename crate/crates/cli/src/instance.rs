//! The JSON instance document and its conversion into library objects.

use std::collections::BTreeMap;

use agler_core::family::{annulus_family, disc_family, KernelFamily, DEFAULT_THETA_GRID};
use agler_core::kernel::{Kernel, Point, PointSet, ScalarFunction};
use agler_core::{c64, CMatrix, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Complex numbers are `[re, im]` pairs.
pub type JsonComplex = [f64; 2];

pub fn to_c64(v: JsonComplex) -> C64 {
    c64(v[0], v[1])
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate: Option<JsonComplex>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Disc {
        #[serde(default = "one")]
        n_max: usize,
    },
    Annulus {
        r: f64,
        #[serde(default)]
        theta_grid: Option<usize>,
        #[serde(default)]
        truncation: Option<usize>,
    },
    Explicit,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub x: String,
    pub y: String,
    /// Row-major `n×n` block.
    pub matrix: Vec<Vec<JsonComplex>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub n: usize,
    /// Blocks with `x` not after `y` in point order.
    pub entries: Vec<KernelEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub psd: Option<f64>,
    pub rank: Option<f64>,
    pub rho: Option<f64>,
    pub qnorm: Option<f64>,
}

/// Command-specific arguments.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Query {
    /// Generator index within the family.
    pub kernel: Option<usize>,
    /// Subset the command works on (all points when absent).
    pub on: Option<String>,
    /// Ambient subset for `qnorm` and `extend`.
    pub x: Option<String>,
    /// Data subset for `qnorm` and `extend`.
    pub y: Option<String>,
    pub function: Option<String>,
    pub rho: Option<f64>,
    /// Label of the new point (`region`) or compression point (`compress`).
    pub point: Option<String>,
    pub gamma: Option<Vec<JsonComplex>>,
    pub samples: Option<usize>,
    pub r: Option<f64>,
    pub theta: Option<f64>,
    pub z: Option<JsonComplex>,
    pub w: Option<JsonComplex>,
    pub lambda: Option<JsonComplex>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub subsets: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub functions: BTreeMap<String, BTreeMap<String, JsonComplex>>,
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub kernels: Vec<KernelSpec>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub query: Query,
}

impl InstanceDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: InstanceDocument = serde_json::from_str(text).map_err(|e| CliError::schema(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    /// Cross-reference checks the JSON shape alone cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.points {
            if !seen.insert(p.label.as_str()) {
                return Err(CliError::schema(format!("duplicate point label {}", p.label)));
            }
        }
        let known = |l: &str, what: &str| -> Result<(), CliError> {
            if seen.contains(l) {
                Ok(())
            } else {
                Err(CliError::schema(format!("{what} references undeclared point {l}")))
            }
        };
        for (name, labels) in &self.subsets {
            for l in labels {
                known(l, &format!("subset {name}"))?;
            }
        }
        for (name, map) in &self.functions {
            for l in map.keys() {
                known(l, &format!("function {name}"))?;
            }
        }
        for (i, k) in self.kernels.iter().enumerate() {
            for e in &k.entries {
                known(&e.x, &format!("kernel {i}"))?;
                known(&e.y, &format!("kernel {i}"))?;
                if e.matrix.len() != k.n || e.matrix.iter().any(|row| row.len() != k.n) {
                    return Err(CliError::schema(format!(
                        "kernel {i} block ({},{}) is not {}x{}",
                        e.x, e.y, k.n, k.n
                    )));
                }
            }
        }
        if let Some(l) = &self.query.point {
            known(l, "query.point")?;
        }
        Ok(())
    }

    pub fn all_points(&self) -> PointSet {
        let pts = self
            .points
            .iter()
            .map(|p| match p.coordinate {
                Some(c) => Point::new(p.label.clone(), to_c64(c)),
                None => Point::labelled(p.label.clone()),
            })
            .collect();
        PointSet::new(pts).expect("labels validated as distinct")
    }

    /// Named subset in the order of the point list, or every point.
    pub fn subset(&self, name: Option<&str>) -> Result<PointSet, CliError> {
        let all = self.all_points();
        match name {
            None => Ok(all),
            Some(n) => {
                let labels = self
                    .subsets
                    .get(n)
                    .ok_or_else(|| CliError::schema(format!("unknown subset {n}")))?;
                let wanted: std::collections::BTreeSet<&str> = labels.iter().map(String::as_str).collect();
                if wanted.len() != labels.len() {
                    return Err(CliError::schema(format!("subset {n} repeats a label")));
                }
                let ordered: Vec<&str> = all.labels().filter(|l| wanted.contains(l)).collect();
                Ok(all.select(&ordered)?)
            }
        }
    }

    /// Named function restricted to the labels it defines, in point order.
    pub fn function(&self, name: &str) -> Result<ScalarFunction, CliError> {
        let map = self
            .functions
            .get(name)
            .ok_or_else(|| CliError::schema(format!("unknown function {name}")))?;
        let all = self.all_points();
        let labels: Vec<&str> = all.labels().filter(|l| map.contains_key(*l)).collect();
        let pts = all.select(&labels)?;
        let values = labels.iter().map(|l| to_c64(map[*l])).collect();
        Ok(ScalarFunction::new(pts, values)?)
    }

    pub fn explicit_kernels(&self) -> Result<Vec<Kernel>, CliError> {
        let all = self.all_points();
        self.kernels
            .iter()
            .map(|k| {
                let entries: Vec<(String, String, CMatrix)> = k
                    .entries
                    .iter()
                    .map(|e| {
                        let flat: Vec<C64> = e.matrix.iter().flatten().map(|v| to_c64(*v)).collect();
                        (e.x.clone(), e.y.clone(), CMatrix::from_row_slice(k.n, k.n, &flat))
                    })
                    .collect();
                Ok(Kernel::from_upper_blocks(all.clone(), k.n, &entries)?)
            })
            .collect()
    }

    /// The family, with `theta_grid` and `truncation` overriding the
    /// document's annulus parameters.
    pub fn family(&self, theta_grid: Option<usize>, truncation: Option<usize>) -> Result<KernelFamily, CliError> {
        match &self.family {
            None => Err(CliError::schema("the instance has no family")),
            Some(FamilySpec::Disc { n_max }) => {
                if *n_max == 0 {
                    return Err(CliError::schema("disc family needs n_max >= 1"));
                }
                Ok(disc_family(*n_max))
            }
            Some(FamilySpec::Annulus {
                r,
                theta_grid: grid,
                truncation: trunc,
            }) => Ok(annulus_family(
                *r,
                theta_grid.or(*grid).unwrap_or(DEFAULT_THETA_GRID),
                truncation.or(*trunc),
            )?),
            Some(FamilySpec::Explicit) => Ok(KernelFamily::explicit(self.explicit_kernels()?)?),
        }
    }
}
