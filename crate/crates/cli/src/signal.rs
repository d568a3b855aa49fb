//! Switching-signal specs for `simulate`:
//!
//! - `hybrid:T=0.2`: surface-triggered switches from the file, return after `T`
//! - `periodic:T1=0.5,T2=0.3` (or `periodic:0.5,0.3`): fixed dwell per mode
//! - `event`: switch whenever a surface from the file is crossed
//! - `event:x1 = x3` or `event:0->1:x1 = x3;1->0:x2 = 0`: explicit surfaces

use descr_switch::sim::{Surface, SwitchingSignal};
use descr_switch::{Restriction, SwitchedSystem};

use crate::error::CliError;

pub fn parse_signal(spec: &str, sys: &SwitchedSystem) -> Result<SwitchingSignal, CliError> {
    let bad = |msg: String| CliError::field("--signal", msg);
    let (kind, rest) = match spec.split_once(':') {
        Some((k, r)) => (k.trim(), r.trim()),
        None => (spec.trim(), ""),
    };
    match kind {
        "hybrid" => {
            let value = rest
                .strip_prefix("T=")
                .or_else(|| rest.strip_prefix("T ="))
                .ok_or_else(|| bad(format!("expected hybrid:T=<dwell>, got {spec:?}")))?;
            let dwell = number(value.trim()).map_err(bad)?;
            if dwell.is_nan() || dwell <= 0.0 {
                return Err(bad(format!("dwell must be positive, got {dwell}")));
            }
            Ok(SwitchingSignal::Hybrid {
                surfaces: file_surfaces(sys)?,
                dwell,
            })
        }
        "periodic" => {
            let mut dwell = Vec::new();
            for (k, item) in rest.split(',').enumerate() {
                let item = item.trim();
                let value = match item.split_once('=') {
                    Some((name, v)) => {
                        if name.trim() != format!("T{}", k + 1) {
                            return Err(bad(format!("expected T{} in {spec:?}", k + 1)));
                        }
                        v
                    }
                    None => item,
                };
                dwell.push(number(value.trim()).map_err(bad)?);
            }
            if dwell.len() != sys.num_modes() {
                return Err(bad(format!(
                    "{} dwell times for {} modes",
                    dwell.len(),
                    sys.num_modes()
                )));
            }
            Ok(SwitchingSignal::Periodic(dwell))
        }
        "event" if rest.is_empty() => Ok(SwitchingSignal::StateEvent(file_surfaces(sys)?)),
        "event" => {
            let mut surfaces = Vec::new();
            for part in rest.split(';') {
                let (from, to, text) = match part.split_once(':') {
                    Some((arrow, text)) => {
                        let (f, t) = arrow
                            .split_once("->")
                            .ok_or_else(|| bad(format!("expected FROM->TO before ':' in {part:?}")))?;
                        let f = f.trim().parse().map_err(|_| bad(format!("bad mode {f:?}")))?;
                        let t = t.trim().parse().map_err(|_| bad(format!("bad mode {t:?}")))?;
                        (f, t, text)
                    }
                    None if sys.num_modes() == 2 => (0, 1, part),
                    None => return Err(bad("with more than two modes write FROM->TO:surface".into())),
                };
                let Restriction::Hyperplane(normal) =
                    Restriction::parse_surface(text, sys.dim()).map_err(|e| bad(e.to_string()))?
                else {
                    unreachable!("surfaces parse to hyperplanes")
                };
                surfaces.push(Surface { from, to, normal });
            }
            Ok(SwitchingSignal::StateEvent(surfaces))
        }
        _ => Err(bad(format!(
            "unknown signal {kind:?}; use hybrid:T=.., periodic:T1=..,T2=.. or event[:surface]"
        ))),
    }
}

fn number(text: &str) -> Result<f64, String> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{text:?} is not a number"))
}

/// Surfaces implied by the jump restrictions: hyperplanes directly, and
/// subspaces of codimension one through their normal.
pub fn file_surfaces(sys: &SwitchedSystem) -> Result<Vec<Surface>, CliError> {
    let mut out = Vec::new();
    for ((from, to), rule) in sys.explicit_jumps() {
        let normal = match &rule.restriction {
            Some(Restriction::Hyperplane(c)) => c.clone(),
            Some(Restriction::Subspace(s)) if s.dim() + 1 == sys.dim() => s.complement().basis().column(0).into_owned(),
            _ => continue,
        };
        if sys.is_allowed(from, to) {
            out.push(Surface { from, to, normal });
        }
    }
    if out.is_empty() {
        return Err(CliError::field(
            "--signal",
            "the system file has no switching surfaces; give one as event:FROM->TO:<surface>",
        ));
    }
    Ok(out)
}

/// Comma or space separated numbers.
pub fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| number(s).map_err(|m| CliError::field(what, m)))
        .collect()
}
