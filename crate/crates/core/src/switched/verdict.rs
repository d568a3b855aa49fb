use serde::{Deserialize, Serialize};

use crate::lyapunov::LyapunovCertificate;
use crate::serde_ext;

/// Every test here is sufficient only: `NoCertificate` means the search came
/// up empty, `HypothesisViolated` means a checked hypothesis is false.
/// Neither disproves stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    GuesCertified,
    NoCertificate,
    HypothesisViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremTag {
    Theorem1,
    RankCondition,
    Spectral01,
    Spectral12,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub passed: bool,
    #[serde(with = "serde_ext::ext_f64_opt", default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
    /// Reported but not part of the decision.
    #[serde(default)]
    pub informational: bool,
}

impl Diagnostic {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed,
            margin: None,
            detail: String::new(),
            informational: false,
        }
    }

    pub fn margin(mut self, m: f64) -> Self {
        self.margin = Some(m);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub status: VerdictStatus,
    pub theorem_used: TheoremTag,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<LyapunovCertificate>,
    pub diagnostics: Vec<Diagnostic>,
    /// Guaranteed decay rate of the Lyapunov functions, when known.
    #[serde(with = "serde_ext::ext_f64_opt", default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Eigenvalues `[re, im]` of the mode product used by the spectral tests.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product_eigenvalues: Vec<[f64; 2]>,
}

impl StabilityVerdict {
    /// Certified iff every decision diagnostic passed; otherwise `failure`.
    pub fn decide(theorem_used: TheoremTag, diagnostics: Vec<Diagnostic>, failure: VerdictStatus) -> Self {
        let ok = diagnostics.iter().all(|d| d.informational || d.passed);
        Self {
            status: if ok { VerdictStatus::GuesCertified } else { failure },
            theorem_used,
            certificates: Vec::new(),
            diagnostics,
            alpha: None,
            product_eigenvalues: Vec::new(),
        }
    }

    pub fn certified(&self) -> bool {
        self.status == VerdictStatus::GuesCertified
    }

    pub fn failed_diagnostics(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| !d.informational && !d.passed)
    }

    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }
}
