use std::path::{Path, PathBuf};

use descr_switch::descriptor::is_regular;
use descr_switch::matkit::{to_rows, Matrix};
use descr_switch::sim::{find_epsilon, mechanical_p, simulate, SwitchingSignal};
use descr_switch::switched::{
    check_rank_condition, check_theorem1, reduce_order, spectral_test_index01, spectral_test_index12, Diagnostic,
    TheoremTag,
};
use descr_switch::{DescriptorPair, Error, StabilityVerdict, SwitchedSystem, Vector, VerdictStatus};
use serde::Serialize;

use crate::error::CliError;
use crate::files::{read_lyapunov, LoadedSystem, SystemFile, FORMAT_VERSION};
use crate::report::{status_text, tag_text, ModeReport, ReportFile};
use crate::signal::{parse_signal, parse_vector};
use crate::svg::trajectory_svg;
use crate::{Method, Output};

fn core(e: Error) -> CliError {
    match e {
        Error::MethodMismatch(m) => CliError::Mismatch(m),
        other => CliError::Model(other),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes the report to `--out` or stdout and the summary to stderr.
fn emit(report: &ReportFile, out_path: Option<&Path>, io: &mut Output) -> Result<(), CliError> {
    let json = report.to_json();
    match out_path {
        Some(p) => write_file(p, &json)?,
        None => io.out(&json),
    }
    io.err(&report.summary());
    Ok(())
}

pub fn analyze(path: &Path, out_path: Option<&Path>, rank: Option<f64>, io: &mut Output) -> Result<i32, CliError> {
    let file = SystemFile::read(path)?;
    let tol = file.tolerances(rank);
    let mut report = ReportFile::new("analyze", &path.display().to_string());
    let mut all_ok = true;
    for (k, (e, a)) in file.mode_matrices()?.into_iter().enumerate() {
        match DescriptorPair::with_tolerances(e.clone(), a.clone(), tol) {
            Ok(pair) => report.modes.push(ModeReport::analysed(k, &pair)),
            Err(err @ (Error::SingularA { .. } | Error::NotRegular)) => {
                all_ok = false;
                report
                    .modes
                    .push(ModeReport::failed(k, e.nrows(), is_regular(&e, &a), err.to_string()));
            }
            Err(err) => return Err(CliError::field(format!("modes[{k}]"), err)),
        }
    }
    if all_ok {
        // the rest of the file must still make sense
        file.build(rank)?;
    } else {
        report
            .notes
            .push("jump rules were not checked because a mode could not be analysed".into());
    }
    emit(&report, out_path, io)?;
    Ok(0)
}

fn require_indices(sys: &SwitchedSystem, want: [usize; 2], method: &str) -> Result<(), CliError> {
    let mut idx = sys.indices();
    idx.sort_unstable();
    if sys.num_modes() != 2 || idx != want {
        return Err(CliError::Mismatch(format!(
            "{method} needs two modes of indices {} and {}, the file has indices {:?}",
            want[0],
            want[1],
            sys.indices()
        )));
    }
    Ok(())
}

/// Lyapunov matrices for theorem1, from `--P`, the file, or the mechanical
/// parameters (in that order). `None` when there is nothing to try.
fn theorem1(
    loaded: &LoadedSystem,
    cli_p: Option<&[Matrix]>,
    report: &mut ReportFile,
) -> Result<Option<StabilityVerdict>, CliError> {
    let sys = &loaded.system;
    let count = sys.num_modes();
    let given = cli_p
        .filter(|p| !p.is_empty())
        .or((!loaded.lyapunov.is_empty()).then_some(&loaded.lyapunov[..]));
    let ps: Vec<Matrix> = match (given, loaded.mechanical) {
        (Some(ps), _) => match ps.len() {
            1 => vec![ps[0].clone(); count],
            k if k == count => ps.to_vec(),
            k => return Err(CliError::Usage(format!("{k} Lyapunov matrices for {count} modes"))),
        },
        (None, Some(params)) => match find_epsilon(&params) {
            Ok(eps) => {
                report.epsilon = Some(eps);
                vec![mechanical_p(&params, eps); count]
            }
            Err(Error::EpsilonNotFound) => {
                let d = Diagnostic::new("epsilon search", false).detail("no admissible epsilon in (0, 1]");
                return Ok(Some(StabilityVerdict::decide(
                    TheoremTag::Theorem1,
                    vec![d],
                    VerdictStatus::NoCertificate,
                )));
            }
            Err(e) => return Err(core(e)),
        },
        (None, None) => return Ok(None),
    };
    check_theorem1(sys, &ps).map(Some).map_err(core)
}

pub fn check(
    path: &Path,
    method: Method,
    p_path: Option<&Path>,
    out_path: Option<&Path>,
    rank: Option<f64>,
    io: &mut Output,
) -> Result<i32, CliError> {
    let loaded = SystemFile::read(path)?.build(rank)?;
    let cli_p = p_path.map(read_lyapunov).transpose()?;
    let sys = &loaded.system;
    let mut report = ReportFile::new("check", &path.display().to_string());
    report.method = Some(method.name().into());
    report.modes = sys
        .modes()
        .iter()
        .enumerate()
        .map(|(k, m)| ModeReport::analysed(k, m))
        .collect();
    let verdict = match method {
        Method::Spectral01 => {
            require_indices(sys, [0, 1], "spectral01")?;
            spectral_test_index01(sys).map_err(core)?
        }
        Method::Spectral12 => {
            require_indices(sys, [1, 2], "spectral12")?;
            spectral_test_index12(sys, loaded.decompositions.as_deref()).map_err(core)?
        }
        Method::Rank => check_rank_condition(sys).map_err(core)?,
        Method::Theorem1 => theorem1(&loaded, cli_p.as_deref(), &mut report)?.ok_or_else(|| {
            CliError::Usage(
                "theorem1 needs a Lyapunov matrix: pass --P FILE, or add \"lyapunov\" or \"mechanical\" to the system file"
                    .into(),
            )
        })?,
        Method::Auto => auto(&loaded, cli_p.as_deref(), &mut report)?,
    };
    report.set_verdict(verdict);
    emit(&report, out_path, io)?;
    Ok(if report.certified() { 0 } else { 1 })
}

/// Cheapest applicable test first; stops at the first certificate.
fn auto(
    loaded: &LoadedSystem,
    cli_p: Option<&[Matrix]>,
    report: &mut ReportFile,
) -> Result<StabilityVerdict, CliError> {
    let sys = &loaded.system;
    let mut idx = sys.indices();
    idx.sort_unstable();
    let mut last: Option<StabilityVerdict> = None;
    let record = |v: &StabilityVerdict, report: &mut ReportFile| {
        report.notes.push(format!(
            "auto: {} gave {}",
            tag_text(v.theorem_used),
            status_text(v.status)
        ));
    };
    if sys.num_modes() == 2 && (idx == [0, 1] || idx == [1, 2]) {
        let v = if idx == [0, 1] {
            spectral_test_index01(sys).map_err(core)?
        } else {
            spectral_test_index12(sys, loaded.decompositions.as_deref()).map_err(core)?
        };
        record(&v, report);
        if v.certified() {
            return Ok(v);
        }
        last = Some(v);
    }
    match check_rank_condition(sys) {
        Ok(v) => {
            record(&v, report);
            if v.certified() {
                return Ok(v);
            }
            last = Some(v);
        }
        Err(Error::MethodMismatch(m)) => report.notes.push(format!("auto: rank not applicable ({m})")),
        Err(e) => return Err(core(e)),
    }
    if let Some(v) = theorem1(loaded, cli_p, report)? {
        record(&v, report);
        return Ok(v);
    }
    last.ok_or_else(|| CliError::Mismatch("no test applies to this system".into()))
}

#[derive(Serialize)]
struct LiftMode {
    #[serde(rename = "T")]
    t: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    y: Vec<Vec<f64>>,
    #[serde(rename = "E_tilde")]
    e_tilde: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct LiftFile {
    version: String,
    /// Reduced state dimension; `x = T_i z` and `z = Y_i' x` in mode `i`.
    r: usize,
    modes: Vec<LiftMode>,
}

pub fn lift_path(out: &Path) -> PathBuf {
    out.with_extension("lift.json")
}

pub fn reduce(path: &Path, out: &Path, rank: Option<f64>, io: &mut Output) -> Result<i32, CliError> {
    let file = SystemFile::read(path)?;
    let loaded = file.build(rank)?;
    let (reduced, data) = reduce_order(&loaded.system, loaded.decompositions.as_deref()).map_err(core)?;
    let name = file.name.as_deref().map(|n| format!("{n} (reduced)"));
    write_file(out, &SystemFile::from_system(&reduced, name.as_deref()).to_json())?;
    let lift = LiftFile {
        version: FORMAT_VERSION.into(),
        r: data.r,
        modes: (0..reduced.num_modes())
            .map(|k| LiftMode {
                t: to_rows(&data.t[k]),
                x: to_rows(&data.x[k]),
                y: to_rows(&data.y[k]),
                e_tilde: to_rows(&data.e_tilde[k]),
            })
            .collect(),
    };
    let sidecar = lift_path(out);
    write_file(&sidecar, &crate::json::to_pretty(&lift).expect("lift maps serialize"))?;
    io.out(&format!(
        "reduced {} -> {} states, indices {:?} -> {:?}\nwrote {} and {}\n",
        loaded.system.dim(),
        data.r,
        loaded.system.indices(),
        reduced.indices(),
        out.display(),
        sidecar.display()
    ));
    Ok(0)
}

pub struct SimulateArgs<'a> {
    pub path: &'a Path,
    pub signal: &'a str,
    pub x0: &'a str,
    pub tspan: (f64, f64),
    pub dt: f64,
    pub mode: usize,
    pub csv: Option<&'a Path>,
    pub events_csv: Option<&'a Path>,
    pub svg: Option<&'a Path>,
}

fn fmt_vec(v: &Vector) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")
}

pub fn simulate_cmd(args: &SimulateArgs, rank: Option<f64>, io: &mut Output) -> Result<i32, CliError> {
    let loaded = SystemFile::read(args.path)?.build(rank)?;
    let sys = &loaded.system;
    let signal: SwitchingSignal = parse_signal(args.signal, sys)?;
    let x0 = Vector::from_vec(parse_vector(args.x0, "--x0")?);
    if x0.len() != sys.dim() {
        return Err(CliError::field(
            "--x0",
            format!("{} entries for a {}-state system", x0.len(), sys.dim()),
        ));
    }
    if args.mode >= sys.num_modes() {
        return Err(CliError::field("--mode", format!("mode {} out of range", args.mode)));
    }
    let traj = match simulate(sys, &signal, args.mode, &x0, args.tspan, args.dt) {
        Ok(t) => t,
        Err(e @ Error::InconsistentInitialState { .. }) => {
            let nearest = sys.mode(args.mode).consistency().project(&x0);
            return Err(CliError::Failed(format!(
                "{e}\nhint: the nearest consistent state is --x0 {}",
                fmt_vec(&nearest)
            )));
        }
        Err(e) => return Err(core(e)),
    };
    match args.csv {
        Some(p) => write_file(p, &traj.to_csv())?,
        None => io.out(&traj.to_csv()),
    }
    if let Some(p) = args.events_csv {
        write_file(p, &traj.events_csv())?;
    }
    if let Some(p) = args.svg {
        write_file(p, &trajectory_svg(&traj))?;
    }
    let mut summary = format!("{} samples, {} switches", traj.samples.len(), traj.events.len());
    match &traj.decay {
        Some(fit) => summary.push_str(&format!(
            ", |x(t)| <= {:.4} exp(-{:.4} t) |x0|\n",
            fit.beta_hat, fit.alpha_hat
        )),
        None => summary.push_str(", no exponential decay detected\n"),
    }
    io.err(&summary);
    Ok(0)
}
