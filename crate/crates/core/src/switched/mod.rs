//! Switched descriptor systems `E_s x' = A_s x`, `s` piecewise constant.
//!
//! A transition `i -> j` is described by a [`JumpRule`]: the state map
//! `x+ = M x-` and an optional [`Restriction`] on the pre-switch state. When
//! `continuous_by_default` is set, transitions without an explicit rule keep
//! the state (`M = I`) and may happen anywhere.

mod checks;
mod reduction;
mod verdict;

pub use checks::{
    check_rank_condition, check_rank_condition_test, check_theorem1, impulse_free_condition, spectral_test_index01,
};
pub use reduction::{admissible_entry_space, reduce_order, spectral_test_index12, ReductionData};
pub use verdict::{Diagnostic, StabilityVerdict, TheoremTag, VerdictStatus};

use std::collections::{BTreeMap, BTreeSet};

use crate::descriptor::DescriptorPair;
use crate::error::{Error, Result};
use crate::matkit::{identity, kernel_basis, Matrix, SubspaceBasis, Tolerances, Vector};

/// Set of pre-switch states from which a transition may fire.
#[derive(Debug, Clone, PartialEq)]
pub enum Restriction {
    Subspace(SubspaceBasis),
    /// `{x : normal . x = 0}`.
    Hyperplane(Vector),
}

impl Restriction {
    /// Parses a linear surface such as `"0.15*x1 + x2 = 0"` or `"x1 = x3"`
    /// (variables are 1-based). Constant terms must cancel: only surfaces
    /// through the origin are supported.
    pub fn parse_surface(text: &str, n: usize) -> Result<Self> {
        let (lhs, rhs) = text
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("surface {text:?} has no '='")))?;
        let (a, ca) = parse_linear(lhs, n)?;
        let (b, cb) = parse_linear(rhs, n)?;
        if (ca - cb).abs() > 0.0 {
            return Err(Error::InvalidArgument(format!(
                "surface {text:?} does not pass through the origin"
            )));
        }
        let normal = a - b;
        if normal.norm() == 0.0 {
            return Err(Error::InvalidArgument(format!("surface {text:?} is degenerate")));
        }
        Ok(Restriction::Hyperplane(normal))
    }

    pub fn subspace(&self, tol: Option<f64>) -> Result<SubspaceBasis> {
        match self {
            Restriction::Subspace(s) => Ok(s.clone()),
            Restriction::Hyperplane(c) => kernel_basis(&Matrix::from_row_slice(1, c.len(), c.as_slice()), tol),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Restriction::Subspace(s) => s.ambient_dim(),
            Restriction::Hyperplane(c) => c.len(),
        }
    }

    pub fn contains(&self, x: &Vector, rel_tol: f64) -> bool {
        let scale = rel_tol * x.norm().max(f64::MIN_POSITIVE);
        match self {
            Restriction::Subspace(s) => s.distance(x) <= scale,
            Restriction::Hyperplane(c) => c.dot(x).abs() <= scale * c.norm(),
        }
    }

    /// Renders a hyperplane back into the surface syntax.
    pub fn surface_text(&self) -> Option<String> {
        let Restriction::Hyperplane(c) = self else {
            return None;
        };
        let mut out = String::new();
        for (k, v) in c.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let sign = if v.is_sign_negative() { "-" } else { "+" };
            if out.is_empty() {
                if sign == "-" {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {sign} "));
            }
            out.push_str(&format!("{:?}*x{}", v.abs(), k + 1));
        }
        out.push_str(" = 0");
        Some(out)
    }
}

fn parse_linear(side: &str, n: usize) -> Result<(Vector, f64)> {
    let bad = |why: &str| Error::InvalidArgument(format!("cannot parse {side:?}: {why}"));
    let mut coeffs = Vector::zeros(n);
    let mut constant = 0.0;
    let cleaned: String = side.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() {
        return Err(bad("empty side"));
    }
    // split into signed terms, leaving exponent signs ("1e-3") alone
    let mut terms = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for ch in cleaned.chars() {
        if (ch == '+' || ch == '-') && !current.is_empty() && !matches!(prev, Some('e' | 'E')) {
            terms.push(std::mem::take(&mut current));
        }
        current.push(ch);
        prev = Some(ch);
    }
    terms.push(current);
    for term in terms {
        let (sign, body) = match term.strip_prefix('-') {
            Some(rest) => (-1.0, rest),
            None => (1.0, term.strip_prefix('+').unwrap_or(&term)),
        };
        match body.find('x') {
            Some(pos) => {
                let coef_text = body[..pos].trim_end_matches('*');
                let coef = if coef_text.is_empty() {
                    1.0
                } else {
                    coef_text.parse::<f64>().map_err(|_| bad("bad coefficient"))?
                };
                let idx: usize = body[pos + 1..].parse().map_err(|_| bad("bad variable"))?;
                if idx == 0 || idx > n {
                    return Err(bad(&format!("variable x{idx} outside x1..x{n}")));
                }
                coeffs[idx - 1] += sign * coef;
            }
            None => constant += sign * body.parse::<f64>().map_err(|_| bad("bad constant"))?,
        }
    }
    Ok((coeffs, constant))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRule {
    pub map: Matrix,
    pub restriction: Option<Restriction>,
}

impl JumpRule {
    pub fn identity(n: usize) -> Self {
        Self {
            map: identity(n),
            restriction: None,
        }
    }

    pub fn new(map: Matrix, restriction: Option<Restriction>) -> Self {
        Self { map, restriction }
    }
}

#[derive(Debug, Clone)]
pub struct SwitchedSystem {
    modes: Vec<DescriptorPair>,
    jumps: BTreeMap<(usize, usize), JumpRule>,
    allowed: BTreeSet<(usize, usize)>,
    continuous_by_default: bool,
    tol: Tolerances,
}

impl SwitchedSystem {
    /// All transitions `i != j` are allowed and continuous until told
    /// otherwise.
    pub fn new(modes: Vec<DescriptorPair>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::InvalidArgument("a switched system needs at least one mode".into()))?;
        let n = first.dim();
        let tol = *first.tolerances();
        for (k, m) in modes.iter().enumerate() {
            if m.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "mode {k} has dimension {}, mode 0 has {n}",
                    m.dim()
                )));
            }
            if !m.is_regular() {
                return Err(Error::NotRegular);
            }
        }
        let count = modes.len();
        let allowed = (0..count)
            .flat_map(|i| (0..count).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        Ok(Self {
            modes,
            jumps: BTreeMap::new(),
            allowed,
            continuous_by_default: true,
            tol,
        })
    }

    /// Tolerances for the system-level checks (the modes keep their own).
    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_jump(mut self, from: usize, to: usize, rule: JumpRule) -> Result<Self> {
        self.set_jump(from, to, rule)?;
        Ok(self)
    }

    pub fn set_jump(&mut self, from: usize, to: usize, rule: JumpRule) -> Result<()> {
        self.check_pair(from, to)?;
        let n = self.dim();
        if rule.map.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "jump map {from}->{to} is {}x{}, expected {n}x{n}",
                rule.map.nrows(),
                rule.map.ncols()
            )));
        }
        if let Some(r) = &rule.restriction {
            if r.ambient_dim() != n {
                return Err(Error::DimensionMismatch(format!("restriction of {from}->{to}")));
            }
        }
        crate::matkit::ensure_finite(&rule.map, "jump map")?;
        self.jumps.insert((from, to), rule);
        Ok(())
    }

    pub fn with_allowed(mut self, allowed: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let set: BTreeSet<_> = allowed.into_iter().collect();
        for &(i, j) in &set {
            self.check_pair(i, j)?;
        }
        self.allowed = set;
        Ok(self)
    }

    pub fn with_continuous_default(mut self, yes: bool) -> Self {
        self.continuous_by_default = yes;
        self
    }

    fn check_pair(&self, from: usize, to: usize) -> Result<()> {
        let n = self.modes.len();
        if from >= n || to >= n || from == to {
            return Err(Error::InvalidArgument(format!(
                "transition {from}->{to} is not between two distinct modes of {n}"
            )));
        }
        Ok(())
    }

    pub fn modes(&self) -> &[DescriptorPair] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> &DescriptorPair {
        &self.modes[k]
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.modes[0].dim()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn continuous_by_default(&self) -> bool {
        self.continuous_by_default
    }

    pub fn allowed(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.allowed.iter().copied()
    }

    pub fn is_allowed(&self, from: usize, to: usize) -> bool {
        self.allowed.contains(&(from, to))
    }

    /// Explicitly stored rules only.
    pub fn explicit_jumps(&self) -> impl Iterator<Item = ((usize, usize), &JumpRule)> {
        self.jumps.iter().map(|(k, v)| (*k, v))
    }

    /// Effective rule of a transition, falling back to continuity.
    pub fn jump_rule(&self, from: usize, to: usize) -> Result<JumpRule> {
        self.check_pair(from, to)?;
        match self.jumps.get(&(from, to)) {
            Some(rule) => Ok(rule.clone()),
            None if self.continuous_by_default => Ok(JumpRule::identity(self.dim())),
            None => Err(Error::IncompleteModel(format!(
                "transition {from}->{to} has no jump rule and continuity is not the default"
            ))),
        }
    }

    /// `C_from` intersected with the restriction of the transition.
    pub fn jump_domain(&self, from: usize, to: usize) -> Result<SubspaceBasis> {
        let rule = self.jump_rule(from, to)?;
        let c = self.modes[from].consistency();
        match rule.restriction {
            None => Ok(c.clone()),
            Some(r) => c.intersect(&r.subspace(None)?, None),
        }
    }

    /// Mode indices in order.
    pub fn indices(&self) -> Vec<usize> {
        self.modes.iter().map(DescriptorPair::index).collect()
    }
}
