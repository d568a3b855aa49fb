//! JSON system description.
//!
//! ```json
//! {
//!   "version": "1",
//!   "modes": [{ "E": [[1, 0], [0, 1]], "A": [[-1, 0], [0, -2]] }, ...],
//!   "jumps": [{ "from": 0, "to": 1, "M": [[...]], "restriction": { "surface": "x1 = x3" } }],
//!   "tolerances": { "rank": 1e-10 }
//! }
//! ```
//!
//! Modes are numbered from 0. A restriction is either a linear surface or
//! `{ "subspace": [v1, v2, ...] }` with spanning vectors. The optional
//! `lyapunov`, `mechanical` and `decompositions` entries feed `check` and
//! `reduce`.

use std::path::Path;

use descr_switch::matkit::{from_rows, identity, to_rows};
use descr_switch::sim::MechanicalParams;
use descr_switch::DescriptorPair;
use descr_switch::{JumpRule, Matrix, Restriction, SubspaceBasis, SwitchedSystem, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: &str = "1";

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub modes: Vec<ModeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<JumpSpec>,
    /// Transitions without a rule keep the state.
    #[serde(default = "yes")]
    pub continuous_by_default: bool,
    /// Allowed `[from, to]` pairs; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    /// Lyapunov matrices for `check --method theorem1`: one shared or one per mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lyapunov: Vec<Rows>,
    /// Spring-mass parameters; lets theorem1 search its own certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanical: Option<MechanicalParams>,
    /// Full-rank factors `E_i = X_i Y_i'` used by `reduce` and spectral12.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decompositions: Vec<DecompositionSpec>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(rename = "A")]
    pub a: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub from: usize,
    pub to: usize,
    /// Identity when absent.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction: Option<RestrictionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RestrictionSpec {
    Surface(String),
    Subspace(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    #[serde(rename = "X")]
    pub x: Rows,
    #[serde(rename = "Y")]
    pub y: Rows,
}

/// A parsed file turned into library objects.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: SwitchedSystem,
    pub decompositions: Option<Vec<(Matrix, Matrix)>>,
    pub lyapunov: Vec<Matrix>,
    pub mechanical: Option<MechanicalParams>,
}

fn matrix(rows: &Rows, path: &str) -> Result<Matrix, CliError> {
    from_rows(rows).map_err(|e| CliError::field(path, e))
}

impl SystemFile {
    /// Parses and checks the version; `origin` names the source in messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: SystemFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let path = if field == "." {
                origin.to_string()
            } else {
                format!("{origin}: field {field}")
            };
            CliError::field(path, inner)
        })?;
        if file.version != FORMAT_VERSION {
            return Err(CliError::field(
                format!("{origin}: field version"),
                format!("unsupported version {:?}, expected {FORMAT_VERSION:?}", file.version),
            ));
        }
        if file.modes.is_empty() {
            return Err(CliError::field(format!("{origin}: field modes"), "no modes given"));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        crate::json::to_pretty(self).expect("system files always serialize")
    }

    /// File tolerances, with the rank cutoff replaced by `rank_override`.
    pub fn tolerances(&self, rank_override: Option<f64>) -> Tolerances {
        let mut tol = self.tolerances.unwrap_or_default();
        if rank_override.is_some() {
            tol.rank = rank_override;
        }
        tol
    }

    /// `(E_i, A_i)` without any structural checks.
    pub fn mode_matrices(&self) -> Result<Vec<(Matrix, Matrix)>, CliError> {
        self.modes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                Ok((
                    matrix(&m.e, &format!("modes[{k}].E"))?,
                    matrix(&m.a, &format!("modes[{k}].A"))?,
                ))
            })
            .collect()
    }

    pub fn build(&self, rank_override: Option<f64>) -> Result<LoadedSystem, CliError> {
        let tol = self.tolerances(rank_override);
        let mut pairs = Vec::new();
        for (k, (e, a)) in self.mode_matrices()?.into_iter().enumerate() {
            pairs.push(
                DescriptorPair::with_tolerances(e, a, tol).map_err(|e| CliError::field(format!("modes[{k}]"), e))?,
            );
        }
        let mut system = SwitchedSystem::new(pairs)
            .map_err(|e| CliError::field("modes", e))?
            .with_tolerances(tol)
            .with_continuous_default(self.continuous_by_default);
        let n = system.dim();
        if let Some(allowed) = &self.allowed {
            system = system
                .with_allowed(allowed.iter().map(|[i, j]| (*i, *j)))
                .map_err(|e| CliError::field("allowed", e))?;
        }
        for (k, jump) in self.jumps.iter().enumerate() {
            let here = format!("jumps[{k}]");
            let map = match &jump.m {
                Some(rows) => matrix(rows, &format!("{here}.M"))?,
                None => identity(n),
            };
            let restriction = match &jump.restriction {
                None => None,
                Some(RestrictionSpec::Surface(text)) => Some(
                    Restriction::parse_surface(text, n)
                        .map_err(|e| CliError::field(format!("{here}.restriction.surface"), e))?,
                ),
                Some(RestrictionSpec::Subspace(vectors)) => {
                    let path = format!("{here}.restriction.subspace");
                    if vectors.iter().any(|v| v.len() != n) {
                        return Err(CliError::field(path, format!("every vector needs {n} entries")));
                    }
                    let cols = Matrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
                    Some(Restriction::Subspace(
                        SubspaceBasis::span(&cols, None).map_err(|e| CliError::field(path, e))?,
                    ))
                }
            };
            system
                .set_jump(jump.from, jump.to, JumpRule::new(map, restriction))
                .map_err(|e| CliError::field(here, e))?;
        }
        let lyapunov = self
            .lyapunov
            .iter()
            .enumerate()
            .map(|(k, rows)| matrix(rows, &format!("lyapunov[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let decompositions = if self.decompositions.is_empty() {
            None
        } else {
            Some(
                self.decompositions
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        Ok((
                            matrix(&d.x, &format!("decompositions[{k}].X"))?,
                            matrix(&d.y, &format!("decompositions[{k}].Y"))?,
                        ))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?,
            )
        };
        Ok(LoadedSystem {
            system,
            decompositions,
            lyapunov,
            mechanical: self.mechanical,
        })
    }

    /// Describes an in-memory system. Every stored jump rule is written out.
    pub fn from_system(sys: &SwitchedSystem, name: Option<&str>) -> Self {
        let count = sys.num_modes();
        let modes = sys
            .modes()
            .iter()
            .map(|m| ModeSpec {
                e: to_rows(m.e()),
                a: to_rows(m.a()),
            })
            .collect();
        let jumps = sys
            .explicit_jumps()
            .map(|((from, to), rule)| JumpSpec {
                from,
                to,
                m: Some(to_rows(&rule.map)),
                restriction: rule.restriction.as_ref().map(|r| match r {
                    Restriction::Hyperplane(_) => RestrictionSpec::Surface(r.surface_text().expect("hyperplane")),
                    Restriction::Subspace(s) => RestrictionSpec::Subspace(
                        s.basis().column_iter().map(|c| c.iter().copied().collect()).collect(),
                    ),
                }),
            })
            .collect();
        let allowed: Vec<[usize; 2]> = sys.allowed().map(|(i, j)| [i, j]).collect();
        let tol = *sys.tolerances();
        SystemFile {
            version: FORMAT_VERSION.into(),
            name: name.map(str::to_string),
            modes,
            jumps,
            continuous_by_default: sys.continuous_by_default(),
            allowed: (allowed.len() != count * (count - 1)).then_some(allowed),
            tolerances: (tol != Tolerances::default()).then_some(tol),
            lyapunov: Vec::new(),
            mechanical: None,
            decompositions: Vec::new(),
        }
    }

    pub fn with_decompositions(mut self, d: &[(Matrix, Matrix)]) -> Self {
        self.decompositions = d
            .iter()
            .map(|(x, y)| DecompositionSpec {
                x: to_rows(x),
                y: to_rows(y),
            })
            .collect();
        self
    }
}

/// Lyapunov matrices from a `--P` file: one matrix or a list of them.
pub fn read_lyapunov(path: &Path) -> Result<Vec<Matrix>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ps {
        One(Rows),
        Many(Vec<Rows>),
    }
    let origin = path.display().to_string();
    let ps: Ps = serde_json::from_str(&text).map_err(|e| CliError::field(&origin, e))?;
    match ps {
        Ps::One(rows) => Ok(vec![matrix(&rows, &origin)?]),
        Ps::Many(all) => all
            .iter()
            .enumerate()
            .map(|(k, rows)| matrix(rows, &format!("{origin}[{k}]")))
            .collect(),
    }
}
