//! Subcommand bodies. Each returns the process exit code or a [`CliError`].
//!
//! Exit codes: 0 success, 1 bad input (configuration, schema, I/O), 2 a
//! numerical failure or a failed check.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use djwave::analysis::{analyze, displacement_profile, AnalysisReport};
use djwave::error::WaveError;
use djwave::fields::{pressure_by_integration, streamlines, velocity_from_height};
use djwave::grid::Grid;
use djwave::height::{
    continue_branch, directional_fd_error, newton_solve, start_branch, Constraint, HeightField,
    NewtonOptions, WaveSetup,
};
use djwave::verdict::Status;
use djwave::vorticity::{MonotonicityClass, VorticitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::plots;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_FAILED: u8 = 2;

pub const TRACE_SCHEMA: &str = "djwave.trace.v1";
pub const SWEEP_SCHEMA: &str = "djwave.sweep.v1";
pub const TRACE_FILE: &str = "trace.json";
pub const REFINED_FILE: &str = "field_refined.json";

/// Directions probed by the Jacobian spot check.
const JACOBIAN_DIRECTIONS: usize = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Relative error of the analytic Jacobian against central differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobianCheck {
    pub seed: u64,
    pub step: f64,
    /// One entry per random direction; `None` when the Jacobian could not be assembled.
    pub errors: Vec<Option<f64>>,
    pub max_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberDoc {
    pub index: usize,
    pub amplitude: f64,
    pub head: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinedDoc {
    pub file: String,
    pub grid: Grid,
    pub head: f64,
    pub newton_iterations: usize,
    pub residual: f64,
}

/// Index of a continuation run, written as `trace.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDoc {
    pub schema: String,
    pub setup: WaveSetup,
    pub newton: NewtonOptions,
    pub steps: usize,
    /// Target amplitude in units of the laminar depth.
    pub amplitude_fraction: f64,
    pub target_amplitude: Option<f64>,
    pub depth: Option<f64>,
    pub bifurcation_head: Option<f64>,
    pub members: Vec<MemberDoc>,
    pub failure: Option<String>,
    pub jacobian_check: Option<JacobianCheck>,
    pub refined: Option<RefinedDoc>,
    pub refinement_failure: Option<String>,
}

impl TraceDoc {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let t: TraceDoc = serde_json::from_str(s).map_err(|e| CliError::input(format!("trace: {e}")))?;
        if t.schema != TRACE_SCHEMA {
            return Err(CliError::input(format!(
                "trace: expected schema {TRACE_SCHEMA}, found {}",
                t.schema
            )));
        }
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.refinement_failure.is_none()
    }
}

/// Seeded spot check of the Jacobian along random directions.
pub fn jacobian_check(field: &HeightField, seed: u64) -> JacobianCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-6 * field.params.depth;
    let errors: Vec<Option<f64>> = (0..JACOBIAN_DIRECTIONS)
        .map(|_| {
            let dir: Vec<f64> = (0..field.h.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            directional_fd_error(field, &dir, step).ok().filter(|e| e.is_finite())
        })
        .collect();
    let max_error = errors
        .iter()
        .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)));
    JacobianCheck {
        seed,
        step,
        errors,
        max_error,
    }
}

fn members_csv(t: &TraceDoc) -> String {
    let mut s = String::from("index,amplitude,head,newton_iterations,residual\n");
    for m in &t.members {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            m.index, m.amplitude, m.head, m.newton_iterations, m.residual
        ));
    }
    s
}

/// Plots of one field into `dir`.
pub fn write_field_plots(field: &HeightField, dir: &Path) -> Result<(), CliError> {
    let vf = velocity_from_height(field).map_err(|e| CliError {
        code: EXIT_FAILED,
        message: format!("plots: {e}"),
    })?;
    let sls = streamlines(&vf);
    let top = sls.len() - 1;
    write(&dir.join("surface.svg"), &plots::surface_profile(&vf, &sls[top]))?;
    write(&dir.join("v_streamlines.svg"), &plots::v_along_streamlines(&sls))?;
    write(&dir.join("height_vs_depth.svg"), &plots::height_vs_depth(&displacement_profile(field).0))?;
    for j in plots::selected_levels(sls.len()) {
        write(&dir.join(format!("triptych_{j:03}.svg")), &plots::triptych(&sls[j]))?;
    }
    Ok(())
}

/// Continuation run for one vorticity, artifacts written into `out`.
///
/// Never fails on numerical trouble: that is recorded in the returned trace.
pub fn solve_into(
    cfg: &RunConfig,
    vorticity: VorticitySpec,
    amplitude_fraction: f64,
    out: &Path,
    plots: bool,
) -> Result<(TraceDoc, Option<HeightField>, Option<HeightField>), CliError> {
    let setup = cfg.setup(vorticity);
    let opts = cfg.newton();
    let mut doc = TraceDoc {
        schema: TRACE_SCHEMA.into(),
        setup,
        newton: opts,
        steps: cfg.physics.steps,
        amplitude_fraction,
        target_amplitude: None,
        depth: None,
        bifurcation_head: None,
        members: Vec::new(),
        failure: None,
        jacobian_check: None,
        refined: None,
        refinement_failure: None,
    };
    let mut last: Option<HeightField> = None;
    let mut refined: Option<HeightField> = None;
    match start_branch(&setup) {
        Err(e) => doc.failure = Some(format!("bifurcation: {e}")),
        Ok(branch) => {
            let depth = branch.depth();
            let target = amplitude_fraction * depth;
            doc.depth = Some(depth);
            doc.bifurcation_head = Some(branch.bifurcation.head);
            doc.target_amplitude = Some(target);
            match continue_branch(&branch, target, cfg.physics.steps, &opts) {
                Err(e) => doc.failure = Some(format!("step 1: {e}")),
                Ok(trace) => {
                    doc.failure = trace.failure.clone();
                    for (k, m) in trace.members.iter().enumerate() {
                        let file = format!("field_{:03}.json", k + 1);
                        write(&out.join(&file), &m.field.to_json())?;
                        doc.members.push(MemberDoc {
                            index: k + 1,
                            amplitude: m.amplitude,
                            head: m.head,
                            newton_iterations: m.newton_iterations,
                            residual: m.residual,
                            file,
                        });
                    }
                    last = trace.members.last().map(|m| m.field.clone());
                }
            }
            let probe = last.as_ref().unwrap_or(&branch.base);
            doc.jacobian_check = Some(jacobian_check(probe, cfg.run.seed));
        }
    }
    if let (Some(field), true, true) = (&last, cfg.run.refine, doc.failure.is_none()) {
        let guess = field.refine_cubic();
        match newton_solve(&guess, Constraint::Amplitude(field.surface_amplitude()), &opts, None) {
            Ok((fine, rep)) => {
                write(&out.join(REFINED_FILE), &fine.to_json())?;
                doc.refined = Some(RefinedDoc {
                    file: REFINED_FILE.into(),
                    grid: fine.grid,
                    head: fine.params.head,
                    newton_iterations: rep.iterations,
                    residual: rep.residual,
                });
                refined = Some(fine);
            }
            Err(e) => doc.refinement_failure = Some(e.to_string()),
        }
    }
    if let Some(field) = &last {
        if let Ok(vf) = velocity_from_height(field) {
            write(&out.join("fields.csv"), &vf.to_csv(&pressure_by_integration(&vf)))?;
            let sls = streamlines(&vf);
            write(&out.join("surface.csv"), &sls[sls.len() - 1].to_csv())?;
        }
        if plots {
            write_field_plots(field, &out.join("plots"))?;
        }
    }
    write(&out.join("trace.csv"), &members_csv(&doc))?;
    write(&out.join(TRACE_FILE), &doc.to_json())?;
    Ok((doc, last, refined))
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, plots: bool) -> Result<u8, CliError> {
    let (doc, _, _) = solve_into(cfg, cfg.vorticity, cfg.physics.amplitude, out, plots)?;
    for m in &doc.members {
        println!(
            "member {:>3}  a = {:.6e}  Q = {:.12}  newton {:>2}  residual {:.2e}",
            m.index, m.amplitude, m.head, m.newton_iterations, m.residual
        );
    }
    if let Some(j) = &doc.jacobian_check {
        match j.max_error {
            Some(e) => println!("jacobian spot check (seed {}): max relative error {e:.2e}", j.seed),
            None => println!("jacobian spot check (seed {}): could not be evaluated", j.seed),
        }
    }
    if let Some(r) = &doc.refined {
        println!("refined {}x{}: Q = {:.12}, residual {:.2e}", r.grid.nq, r.grid.np, r.head, r.residual);
    }
    println!("wrote {}", out.join(TRACE_FILE).display());
    if let Some(f) = &doc.failure {
        eprintln!("continuation stopped: {f}");
    }
    if let Some(f) = &doc.refinement_failure {
        eprintln!("refinement failed: {f}");
    }
    Ok(if doc.is_complete() { EXIT_OK } else { EXIT_FAILED })
}

fn load_field(path: &Path) -> Result<HeightField, CliError> {
    HeightField::from_json(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn report_stem(field_file: &Path) -> String {
    let stem = field_file.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    format!("{stem}.report")
}

/// Analysis of one field; numerical errors become a failure message.
fn analyze_one(
    field: &HeightField,
    refined: Option<&HeightField>,
) -> Result<AnalysisReport, String> {
    analyze(field, refined).map_err(|e| {
        let broken = field.check_invariants(djwave::analysis::INVARIANT_TOL);
        if broken.is_empty() || matches!(e, WaveError::InvariantViolation { .. }) {
            e.to_string()
        } else {
            format!("{e}; invariants: {}", broken.join("; "))
        }
    })
}

pub fn cmd_analyze(input: &Path, out: Option<&Path>, plots: bool) -> Result<u8, CliError> {
    let (jobs, refined_path): (Vec<PathBuf>, Option<PathBuf>) = if input.is_dir() {
        let trace = TraceDoc::from_json(&read(&input.join(TRACE_FILE))?)?;
        let jobs = trace.members.iter().map(|m| input.join(&m.file)).collect();
        (jobs, trace.refined.map(|r| input.join(r.file)))
    } else {
        (vec![input.to_path_buf()], None)
    };
    if jobs.is_empty() {
        eprintln!("{}: trace has no converged members", input.display());
        return Ok(EXIT_FAILED);
    }
    let out_dir = match out {
        Some(o) => o.to_path_buf(),
        None if input.is_dir() => input.to_path_buf(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let fields = jobs.iter().map(|p| load_field(p)).collect::<Result<Vec<_>, _>>()?;
    let refined = refined_path.as_deref().map(load_field).transpose()?;
    let mut code = EXIT_OK;
    for (k, (path, field)) in jobs.iter().zip(&fields).enumerate() {
        let fine = if k + 1 == fields.len() { refined.as_ref() } else { None };
        let stem = report_stem(path);
        match analyze_one(field, fine) {
            Ok(report) => {
                let text = report.text_summary();
                write(&out_dir.join(format!("{stem}.json")), &report.to_json())?;
                write(&out_dir.join(format!("{stem}.txt")), &text)?;
                println!("== {}", path.display());
                print!("{text}");
                if report.any_failed() {
                    code = EXIT_FAILED;
                }
            }
            Err(msg) => {
                eprintln!("{}: analysis failed: {msg}", path.display());
                write(&out_dir.join(format!("{stem}.error.txt")), &format!("{msg}\n"))?;
                code = EXIT_FAILED;
            }
        }
        if plots && k + 1 == fields.len() {
            if let Err(e) = write_field_plots(field, &out_dir.join("plots")) {
                eprintln!("{e}");
                code = EXIT_FAILED;
            }
        }
    }
    Ok(code)
}

pub fn cmd_report(input: &Path, out: Option<&Path>, plots: bool) -> Result<u8, CliError> {
    let report = AnalysisReport::from_json(&read(input)?)
        .map_err(|e| CliError::input(format!("{}: {e}", input.display())))?;
    print!("{}", report.text_summary());
    if plots {
        let dir = match out {
            Some(o) => o.to_path_buf(),
            None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        for (name, svg) in plots::report_figures(&report) {
            write(&dir.join(name), &svg)?;
        }
    }
    Ok(if report.any_failed() { EXIT_FAILED } else { EXIT_OK })
}

/// One verdict of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellVerdict {
    pub property: String,
    pub status: Status,
    #[serde(with = "djwave::verdict::nonfinite")]
    pub worst_violation: f64,
    #[serde(with = "djwave::verdict::nonfinite")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub index: usize,
    pub dir: String,
    pub vorticity: VorticitySpec,
    pub class: MonotonicityClass,
    pub amplitude_fraction: f64,
    pub amplitude: Option<f64>,
    pub depth: Option<f64>,
    pub head: Option<f64>,
    pub trace_complete: bool,
    pub error: Option<String>,
    pub surface_inflections: Option<usize>,
    pub verdicts: Vec<CellVerdict>,
}

impl SweepCell {
    pub fn failed(&self) -> bool {
        !self.trace_complete || self.error.is_some() || self.verdicts.iter().any(|v| v.status == Status::Fail)
    }

    pub fn status_of(&self, property: &str) -> Option<Status> {
        self.verdicts.iter().find(|v| v.property == property).map(|v| v.status)
    }
}

/// Summary matrix of a sweep, written as `sweep.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub schema: String,
    pub grid: Grid,
    pub newton: NewtonOptions,
    pub steps: usize,
    pub seed: u64,
    pub refine: bool,
    /// Verdict names in first-seen order; the columns of the CSV table.
    pub columns: Vec<String>,
    pub cells: Vec<SweepCell>,
}

impl SweepDoc {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let d: SweepDoc = serde_json::from_str(s).map_err(|e| CliError::input(format!("sweep: {e}")))?;
        if d.schema != SWEEP_SCHEMA {
            return Err(CliError::input(format!(
                "sweep: expected schema {SWEEP_SCHEMA}, found {}",
                d.schema
            )));
        }
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(SweepCell::failed)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,kind,gamma0,beta,amplitude_fraction,amplitude,head,trace_complete,error");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                c.index,
                serde_json::to_value(c.vorticity.kind).expect("enum").as_str().unwrap_or(""),
                c.vorticity.gamma0,
                c.vorticity.beta,
                c.amplitude_fraction,
                opt(c.amplitude),
                opt(c.head),
                c.trace_complete,
                c.error.is_some()
            ));
            for col in &self.columns {
                s.push(',');
                s.push_str(c.status_of(col).map_or("", Status::label));
            }
            s.push('\n');
        }
        s
    }

    pub fn text_summary(&self) -> String {
        let mut s = format!(
            "sweep on {}x{}: {} cells, {} failing\n",
            self.grid.nq,
            self.grid.np,
            self.cells.len(),
            self.cells.iter().filter(|c| c.failed()).count()
        );
        for c in &self.cells {
            let failing: Vec<&str> = c
                .verdicts
                .iter()
                .filter(|v| v.status == Status::Fail)
                .map(|v| v.property.as_str())
                .collect();
            s.push_str(&format!(
                "{:>3} {:<9} gamma0 {:>6} beta {:>6} a/d {:<6} ",
                c.index,
                format!("{:?}", c.vorticity.kind).to_lowercase(),
                c.vorticity.gamma0,
                c.vorticity.beta,
                c.amplitude_fraction
            ));
            if let Some(e) = &c.error {
                s.push_str(&format!("error: {e}\n"));
            } else if failing.is_empty() {
                s.push_str("all applicable checks pass\n");
            } else {
                s.push_str(&format!("FAIL {}\n", failing.join(" ")));
            }
        }
        s
    }
}

fn run_cell(
    cfg: &RunConfig,
    index: usize,
    vorticity: VorticitySpec,
    fraction: f64,
    root: &Path,
    plots: bool,
) -> Result<SweepCell, CliError> {
    let dir_name = format!("cell_{index:02}");
    let dir = root.join(&dir_name);
    let (trace, last, refined) = solve_into(cfg, vorticity, fraction, &dir, plots)?;
    let mut cell = SweepCell {
        index,
        dir: dir_name,
        vorticity,
        class: vorticity.monotonicity_class(),
        amplitude_fraction: fraction,
        amplitude: trace.target_amplitude,
        depth: trace.depth,
        head: trace.members.last().map(|m| m.head),
        trace_complete: trace.is_complete(),
        error: trace.failure.clone().or(trace.refinement_failure.clone()),
        surface_inflections: None,
        verdicts: Vec::new(),
    };
    if let (Some(field), true) = (&last, trace.failure.is_none()) {
        let stem = report_stem(Path::new(&trace.members.last().expect("nonempty").file));
        match analyze_one(field, refined.as_ref()) {
            Ok(report) => {
                write(&dir.join(format!("{stem}.json")), &report.to_json())?;
                write(&dir.join(format!("{stem}.txt")), &report.text_summary())?;
                cell.surface_inflections = report.surface_inflections().map(|s| s.count);
                cell.verdicts = report
                    .verdicts
                    .iter()
                    .map(|v| CellVerdict {
                        property: v.property.clone(),
                        status: v.status,
                        worst_violation: v.worst_violation,
                        tolerance: v.tolerance,
                    })
                    .collect();
            }
            Err(msg) => cell.error = Some(format!("analysis: {msg}")),
        }
    }
    Ok(cell)
}

/// Cross product of the `[sweep]` lists, cells run concurrently on a bounded pool.
pub fn run_sweep(cfg: &RunConfig, out: &Path, plots: bool) -> Result<SweepDoc, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::input("sweep requires a [sweep] table"))?;
    if sweep.vorticity.is_empty() || sweep.amplitudes.is_empty() {
        return Err(CliError::input("[sweep] vorticity and amplitudes must be nonempty"));
    }
    let jobs: Vec<(usize, VorticitySpec, f64)> = sweep
        .vorticity
        .iter()
        .flat_map(|v| sweep.amplitudes.iter().map(move |a| (*v, *a)))
        .enumerate()
        .map(|(k, (v, a))| (k, v, a))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.workers)
        .build()
        .map_err(|e| CliError::input(format!("worker pool: {e}")))?;
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, v, a)| run_cell(cfg, k, v, a, out, plots))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut seen = BTreeSet::new();
    let mut columns = Vec::new();
    for c in &cells {
        for v in &c.verdicts {
            if seen.insert(v.property.clone()) {
                columns.push(v.property.clone());
            }
        }
    }
    let doc = SweepDoc {
        schema: SWEEP_SCHEMA.into(),
        grid: Grid::new(cfg.grid.nq, cfg.grid.np, cfg.p0()).map_err(|e| CliError::input(e.to_string()))?,
        newton: cfg.newton(),
        steps: cfg.physics.steps,
        seed: cfg.run.seed,
        refine: cfg.run.refine,
        columns,
        cells,
    };
    write(&out.join("sweep.json"), &doc.to_json())?;
    write(&out.join("sweep.csv"), &doc.to_csv())?;
    write(&out.join("sweep.txt"), &doc.text_summary())?;
    Ok(doc)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, plots: bool) -> Result<u8, CliError> {
    let doc = run_sweep(cfg, out, plots)?;
    print!("{}", doc.text_summary());
    Ok(if doc.any_failed() { EXIT_FAILED } else { EXIT_OK })
}
