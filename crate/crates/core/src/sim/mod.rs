//! Trajectories of switched descriptor systems.
//!
//! Each mode is integrated on its consistency space as the standard system
//! `x' = Atilde x` with classical RK4 (for a linear field one RK4 step is the
//! degree-4 Taylor polynomial of the exponential). State-dependent switches
//! are located by bisection on the surface value.

mod examples;

pub use examples::{
    build_example2, build_example3, build_mechanical, find_epsilon, mechanical_p, Example2, Example3, MechanicalParams,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matkit::{identity, Matrix, Vector};
use crate::switched::SwitchedSystem;

/// Time accuracy of located switching instants.
pub const EVENT_TIME_TOL: f64 = 1e-10;
const MAX_EVENTS: usize = 100_000;

/// Linear switching surface `normal . x = 0`, watched while in `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub from: usize,
    pub to: usize,
    pub normal: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchingSignal {
    /// Dwell time per mode; modes are visited cyclically `0, 1, ..., N-1, 0`.
    Periodic(Vec<f64>),
    StateEvent(Vec<Surface>),
    /// Surface-triggered entries; after such an entry the system stays `dwell`
    /// time units and then returns to the mode it came from.
    Hybrid {
        surfaces: Vec<Surface>,
        dwell: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub x_pre: Vector,
    pub x_post: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// Envelope fit, `None` when the run does not decay.
    pub decay: Option<DecayFit>,
}

impl Trajectory {
    /// Header `t,x1..xn,mode`.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("t");
        for k in 1..=n {
            let _ = write!(out, ",x{k}");
        }
        out.push_str(",mode\n");
        for s in &self.samples {
            let _ = write!(out, "{}", s.t);
            for v in s.x.iter() {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", s.mode);
        }
        out
    }

    /// Header `t,from,to,pre_x1..,post_x1..`.
    pub fn events_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        let mut out = String::from("t,from,to");
        for k in 1..=n {
            let _ = write!(out, ",pre_x{k}");
        }
        for k in 1..=n {
            let _ = write!(out, ",post_x{k}");
        }
        out.push('\n');
        for e in &self.events {
            let _ = write!(out, "{},{},{}", e.t, e.from, e.to);
            for v in e.x_pre.iter().chain(e.x_post.iter()) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.x.norm()).fold(0.0, f64::max)
    }
}

/// Taylor polynomial of degree 4 of `exp(h A)`, i.e. one RK4 step.
fn rk4_propagator(a: &Matrix, h: f64) -> Matrix {
    let n = a.nrows();
    let ha = a * h;
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=4 {
        term = &term * &ha / k as f64;
        sum += &term;
    }
    sum
}

struct ModeData {
    a: Matrix,
    step: Matrix,
}

struct Sim<'a> {
    sys: &'a SwitchedSystem,
    modes: Vec<ModeData>,
    tol_consist: f64,
    dt: f64,
}

impl Sim<'_> {
    fn reproject(&self, mode: usize, x: &mut Vector) {
        let c = self.sys.mode(mode).consistency();
        if c.distance(x) > self.tol_consist / 10.0 {
            *x = c.project(x);
        }
    }

    fn advance(&self, mode: usize, x: &Vector, h: f64) -> Vector {
        let m = &self.modes[mode];
        if (h - self.dt).abs() <= f64::EPSILON * self.dt {
            &m.step * x
        } else {
            rk4_propagator(&m.a, h) * x
        }
    }

    fn jump(&self, from: usize, to: usize, t: f64, x: &Vector) -> Result<Vector> {
        let invalid = |reason: String| Error::InvalidJump { from, to, t, reason };
        if !self.sys.is_allowed(from, to) {
            return Err(invalid("transition not allowed".into()));
        }
        let rule = self.sys.jump_rule(from, to)?;
        if let Some(r) = &rule.restriction {
            let tol = (self.tol_consist / x.norm().max(f64::MIN_POSITIVE)).max(1e-8);
            if !r.contains(x, tol) {
                return Err(invalid("pre-switch state violates the restriction".into()));
            }
        }
        let post = &rule.map * x;
        let c = self.sys.mode(to).consistency();
        let dist = c.distance(&post);
        if dist > self.tol_consist.max(1e-9 * post.norm()) {
            return Err(invalid(format!(
                "post-switch state is {dist:.3e} away from the target consistency space"
            )));
        }
        Ok(c.project(&post))
    }
}

/// Simulates on `[t_span.0, t_span.1]` with step `dt`, starting in
/// `initial_mode`. `x0` may be off the consistency space by at most
/// `tol.consistency * |x0|`; it is projected first.
pub fn simulate(
    sys: &SwitchedSystem,
    signal: &SwitchingSignal,
    initial_mode: usize,
    x0: &Vector,
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    let n = sys.dim();
    let (t0, t1) = t_span;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    if !(t1 >= t0 && t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad time span [{t0}, {t1}]")));
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x0 has {} entries, system has {n}",
            x0.len()
        )));
    }
    if initial_mode >= sys.num_modes() {
        return Err(Error::InvalidArgument(format!(
            "initial mode {initial_mode} out of range"
        )));
    }
    validate_signal(sys, signal)?;

    let tol_consist = sys.tolerances().consistency * x0.norm();
    let c0 = sys.mode(initial_mode).consistency();
    let distance = c0.distance(x0);
    if distance > tol_consist {
        return Err(Error::InconsistentInitialState {
            mode: initial_mode,
            distance,
        });
    }
    let modes = sys
        .modes()
        .iter()
        .map(|m| {
            let a = m.analysis().restricted_a.clone();
            let step = rk4_propagator(&a, dt);
            ModeData { a, step }
        })
        .collect();
    let sim = Sim {
        sys,
        modes,
        tol_consist,
        dt,
    };

    let surfaces: &[Surface] = match signal {
        SwitchingSignal::StateEvent(s) | SwitchingSignal::Hybrid { surfaces: s, .. } => s,
        SwitchingSignal::Periodic(_) => &[],
    };

    let mut mode = initial_mode;
    let mut x = c0.project(x0);
    let mut t = t0;
    let mut samples = vec![Sample { t, x: x.clone(), mode }];
    let mut events = Vec::new();
    // time of the next timed switch and its target
    let mut timer: Option<(f64, usize)> = match signal {
        SwitchingSignal::Periodic(d) if sys.num_modes() > 1 => Some((t0 + d[mode], (mode + 1) % sys.num_modes())),
        _ => None,
    };
    let mut armed = vec![false; surfaces.len()];
    let arm = |armed: &mut [bool], x: &Vector, mode: usize| {
        for (k, s) in surfaces.iter().enumerate() {
            if s.from == mode && !armed[k] {
                armed[k] = s.normal.dot(x).abs() > 1e-9 * s.normal.norm() * x.norm();
            }
        }
    };
    arm(&mut armed, &x, mode);

    while t < t1 - 1e-14 * t1.abs().max(1.0) {
        let mut h = dt.min(t1 - t);
        let timed = timer.filter(|(ts, _)| *ts <= t + h + 1e-14);
        if let Some((ts, _)) = timed {
            h = (ts - t).max(0.0);
        }
        let mut x_new = sim.advance(mode, &x, h);

        // earliest armed surface crossing within the step
        let mut crossing: Option<(f64, usize)> = None;
        for (k, s) in surfaces.iter().enumerate() {
            if s.from != mode || !armed[k] {
                continue;
            }
            let (sa, sb) = (s.normal.dot(&x), s.normal.dot(&x_new));
            if sa == 0.0 || sa.signum() == sb.signum() && sb != 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > EVENT_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                let sm = s.normal.dot(&sim.advance(mode, &x, mid));
                if sm.signum() == sa.signum() && sm != 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if crossing.is_none_or(|(tau, _)| hi < tau) {
                crossing = Some((hi, k));
            }
        }

        let switch_to = if let Some((tau, k)) = crossing {
            x_new = sim.advance(mode, &x, tau);
            t += tau;
            Some((surfaces[k].to, true))
        } else {
            t = timed.map_or(t + h, |(at, _)| at);
            timed.map(|(_, to)| (to, false))
        };
        sim.reproject(mode, &mut x_new);
        x = x_new;
        samples.push(Sample { t, x: x.clone(), mode });

        if let Some((to, by_event)) = switch_to {
            if events.len() >= MAX_EVENTS {
                return Err(Error::InvalidArgument(format!(
                    "more than {MAX_EVENTS} switches; the signal looks Zeno"
                )));
            }
            let from = mode;
            let post = sim.jump(from, to, t, &x)?;
            events.push(Event {
                t,
                from,
                to,
                x_pre: x.clone(),
                x_post: post.clone(),
            });
            mode = to;
            x = post;
            samples.push(Sample { t, x: x.clone(), mode });
            armed.iter_mut().for_each(|a| *a = false);
            timer = match signal {
                SwitchingSignal::Periodic(d) => Some((t + d[mode], (mode + 1) % sys.num_modes())),
                SwitchingSignal::Hybrid { dwell, .. } if by_event => Some((t + dwell, from)),
                _ => None,
            };
        }
        arm(&mut armed, &x, mode);
    }
    let mut traj = Trajectory {
        samples,
        events,
        decay: None,
    };
    traj.decay = fit_decay(&traj).ok();
    Ok(traj)
}

fn validate_signal(sys: &SwitchedSystem, signal: &SwitchingSignal) -> Result<()> {
    let n_modes = sys.num_modes();
    let check_surfaces = |surfaces: &[Surface]| -> Result<()> {
        for s in surfaces {
            if s.from >= n_modes || s.to >= n_modes || s.from == s.to {
                return Err(Error::InvalidArgument(format!(
                    "surface transition {}->{} is invalid",
                    s.from, s.to
                )));
            }
            if s.normal.len() != sys.dim() || s.normal.norm() == 0.0 {
                return Err(Error::InvalidArgument(
                    "surface normal has the wrong size or is zero".into(),
                ));
            }
        }
        Ok(())
    };
    match signal {
        SwitchingSignal::Periodic(d) => {
            if d.len() != n_modes || d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "periodic signal needs {n_modes} positive dwell times"
                )));
            }
            Ok(())
        }
        SwitchingSignal::StateEvent(s) => check_surfaces(s),
        SwitchingSignal::Hybrid { surfaces, dwell } => {
            if !(*dwell > 0.0 && dwell.is_finite()) {
                return Err(Error::InvalidArgument(format!("dwell must be positive, got {dwell}")));
            }
            check_surfaces(surfaces)
        }
    }
}

/// Exponential envelope `|x(t)| <= beta e^{-alpha (t - t0)} |x(t0)|`.
///
/// `alpha` is the least-squares slope of the running (suffix) maximum of
/// `log |x|`, which is non-increasing and so ignores transient bumps between
/// switches. `beta` is then the smallest constant making the bound hold at
/// every sample.
pub fn fit_decay(traj: &Trajectory) -> Result<DecayFit> {
    let s = &traj.samples;
    if s.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 samples, got {}",
            s.len()
        )));
    }
    let x0 = s[0].x.norm();
    if x0 == 0.0 {
        return Err(Error::InvalidArgument("initial state is zero".into()));
    }
    let t0 = s[0].t;
    let span = s[s.len() - 1].t - t0;
    // zero states are reached in finite time only by nilpotent modes; floor them
    let logs: Vec<f64> = s.iter().map(|p| (p.x.norm().max(x0 * 1e-300)).ln()).collect();
    let mut env = logs.clone();
    for k in (0..env.len() - 1).rev() {
        env[k] = env[k].max(env[k + 1]);
    }
    let n = s.len() as f64;
    let mean_t = s.iter().map(|p| p.t).sum::<f64>() / n;
    let mean_e = env.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (p, e) in s.iter().zip(&env) {
        sxy += (p.t - mean_t) * (e - mean_e);
        sxx += (p.t - mean_t).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::NoDecay);
    }
    let alpha = -sxy / sxx;
    if alpha.is_nan() || alpha * span <= 1e-6 {
        return Err(Error::NoDecay);
    }
    let beta = s
        .iter()
        .zip(&logs)
        .map(|(p, l)| (l - x0.ln() + alpha * (p.t - t0)).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        alpha_hat: alpha,
        beta_hat: beta,
    })
}
