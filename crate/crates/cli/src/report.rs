//! Machine-readable command output. Reports carry no timestamp, so equal
//! inputs give byte-identical files.

use descr_switch::lyapunov::LyapunovCertificate;
use descr_switch::serde_ext;
use descr_switch::switched::{Diagnostic, TheoremTag};
use descr_switch::{DescriptorPair, StabilityVerdict, VerdictStatus};
use serde::{Deserialize, Serialize};

pub const TOOL: &str = "descr-switch";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem_used: Option<TheoremTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<LyapunovCertificate>,
    #[serde(with = "serde_ext::ext_f64_opt", default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Parameter of the mechanical certificate, when one was searched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product_eigenvalues: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ModeReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: usize,
    pub dim: usize,
    pub regular: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_e: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
    /// Finite pencil eigenvalues as `[re, im]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub finite_eigenvalues: Vec<[f64; 2]>,
    /// Why the mode could not be analysed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ModeReport {
    pub fn analysed(mode: usize, pair: &DescriptorPair) -> Self {
        let s = pair.summary();
        let mut eigs: Vec<[f64; 2]> = pair
            .analysis()
            .finite_eigenvalues
            .iter()
            .map(|z| [z.re, z.im])
            .collect();
        eigs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        Self {
            mode,
            dim: s.dim,
            regular: s.regular,
            index: Some(s.index),
            consistency_dim: Some(s.consistency_dim),
            rank_e: Some(s.rank_e),
            stable: Some(s.stable),
            finite_eigenvalues: eigs,
            error: None,
        }
    }

    pub fn failed(mode: usize, dim: usize, regular: bool, error: String) -> Self {
        Self {
            mode,
            dim,
            regular,
            index: None,
            consistency_dim: None,
            rank_e: None,
            stable: None,
            finite_eigenvalues: Vec::new(),
            error: Some(error),
        }
    }
}

impl ReportFile {
    pub fn new(command: &str, system: &str) -> Self {
        Self {
            tool: TOOL.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            system: system.into(),
            method: None,
            verdict: None,
            theorem_used: None,
            diagnostics: Vec::new(),
            certificates: Vec::new(),
            alpha: None,
            epsilon: None,
            product_eigenvalues: Vec::new(),
            modes: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn set_verdict(&mut self, v: StabilityVerdict) {
        self.verdict = Some(v.status);
        self.theorem_used = Some(v.theorem_used);
        self.diagnostics = v.diagnostics;
        self.certificates = v.certificates;
        self.alpha = v.alpha;
        self.product_eigenvalues = v.product_eigenvalues;
    }

    pub fn certified(&self) -> bool {
        self.verdict == Some(VerdictStatus::GuesCertified)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_pretty(self).expect("reports always serialize")
    }

    pub fn parse(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// A few human-readable lines for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for m in &self.modes {
            match (&m.error, m.index) {
                (Some(err), _) => out.push_str(&format!("mode {}: {err}\n", m.mode)),
                (None, Some(index)) => out.push_str(&format!(
                    "mode {}: regular, index {index}, consistency dim {}, {}\n",
                    m.mode,
                    m.consistency_dim.unwrap_or(0),
                    if m.stable == Some(true) { "stable" } else { "not stable" }
                )),
                (None, None) => {}
            }
        }
        if let (Some(v), Some(t)) = (self.verdict, self.theorem_used) {
            out.push_str(&format!("verdict: {} ({})\n", status_text(v), tag_text(t)));
            for d in self.diagnostics.iter().filter(|d| !d.informational && !d.passed) {
                out.push_str(&format!("  failed: {}{}\n", d.name, detail(&d.detail)));
            }
        }
        if !self.product_eigenvalues.is_empty() {
            let eigs: Vec<String> = self
                .product_eigenvalues
                .iter()
                .map(|[re, im]| {
                    if *im == 0.0 {
                        format!("{re:.4}")
                    } else {
                        format!("{re:.4}{im:+.4}i")
                    }
                })
                .collect();
            out.push_str(&format!("product eigenvalues: {{{}}}\n", eigs.join(", ")));
        }
        if let Some(eps) = self.epsilon {
            out.push_str(&format!("epsilon: {eps:.6}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn detail(d: &str) -> String {
    if d.is_empty() {
        String::new()
    } else {
        format!(" ({d})")
    }
}

pub fn status_text(v: VerdictStatus) -> &'static str {
    match v {
        VerdictStatus::GuesCertified => "GUES certified",
        VerdictStatus::NoCertificate => "no certificate found",
        VerdictStatus::HypothesisViolated => "hypothesis violated",
    }
}

pub fn tag_text(t: TheoremTag) -> &'static str {
    match t {
        TheoremTag::Theorem1 => "theorem1",
        TheoremTag::RankCondition => "rank",
        TheoremTag::Spectral01 => "spectral01",
        TheoremTag::Spectral12 => "spectral12",
    }
}
