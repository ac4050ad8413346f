use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use quadric_core::classifier::{classify_degree, gamma_report, signature_set, SphereSampler};
use quadric_core::green::{eval_batch, EvalPoint, KernelKind, QuadratureSpec};
use quadric_core::levi_spectral::unit_direction;
use quadric_core::transformed_kernels::HeatKernel;
use quadric_core::verify::run_suite;
use quadric_core::{MultiIndex, QuadricForm};

use crate::config::{Command, JobConfig, Point};
use crate::error::{CliError, CliResult};
use crate::table::{Cell, Table};

/// Command-line overrides of the job document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub suite: Option<String>,
}

/// The table of a finished job, plus a failure to report after it has been
/// written (non-converged quadrature, failed checks).
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub failure: Option<CliError>,
}

struct Context {
    form: QuadricForm,
    spec: QuadratureSpec,
    sampler: SphereSampler,
    seed: u64,
}

fn floats(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

fn numbered(prefix: &str, count: usize, suffixes: &[&str]) -> Vec<String> {
    (1..=count)
        .flat_map(|i| suffixes.iter().map(move |s| format!("{prefix}_{i}{s}")))
        .collect()
}

fn z_cells(p: &Point) -> Vec<Cell> {
    p.z.iter().flat_map(|w| [Cell::Float(w.re), Cell::Float(w.im)]).collect()
}

fn spectrum(job: &JobConfig, cx: &Context) -> CliResult<Report> {
    let (n, m) = (cx.form.n(), cx.form.m());
    let mut columns = numbered("lambda", m, &[""]);
    columns.push("lambda_norm".into());
    columns.extend(numbered("mu", n, &[""]));
    columns.extend(["n_plus", "n_minus", "nu"].map(String::from));
    let mut table = Table::new(columns);
    for lambda in &job.lambda {
        let (norm, alpha) = unit_direction(lambda)?;
        let s = cx.form.spectral(&alpha, cx.spec.zero_tol)?;
        let mut row: Vec<Cell> = lambda.iter().map(|&x| x.into()).collect();
        row.push(norm.into());
        row.extend(s.mu().iter().map(|&mu| Cell::Float(norm * mu)));
        row.extend([s.n_plus().into(), s.n_minus().into(), s.nu().into()]);
        table.push(row);
    }
    Ok(Report { table, failure: None })
}

fn degrees(job: &JobConfig, n: usize) -> Vec<usize> {
    job.q.map_or_else(|| (0..=n).collect(), |q| vec![q])
}

fn classify(job: &JobConfig, cx: &Context) -> CliResult<Report> {
    let set = signature_set(&cx.form, &cx.sampler);
    let set_text = set.iter().map(|(p, m)| format!("({p},{m})")).collect::<Vec<_>>().join("|");
    let mut table = Table::new(
        [
            "q",
            "solvable",
            "hypoelliptic",
            "solvability_witness",
            "hypoellipticity_witness",
            "sample_size",
            "signature_set",
        ]
        .map(String::from)
        .to_vec(),
    );
    for d in degrees(job, cx.form.n()) {
        let c = classify_degree(&cx.form, d, &cx.sampler);
        table.push(vec![
            d.into(),
            c.solvable.into(),
            c.hypoelliptic.into(),
            c.solvability_witness.as_deref().map(floats).unwrap_or_default().into(),
            c.hypoellipticity_witness.as_deref().map(floats).unwrap_or_default().into(),
            c.sample_size.into(),
            set_text.clone().into(),
        ]);
    }
    Ok(Report { table, failure: None })
}

fn gamma(job: &JobConfig, cx: &Context) -> CliResult<Report> {
    let mut table = Table::new(
        ["L", "nonempty", "sphere_fraction", "sample_members", "first_member"]
            .map(String::from)
            .to_vec(),
    );
    for d in degrees(job, cx.form.n()) {
        for l in MultiIndex::all(cx.form.n(), d) {
            let g = gamma_report(&cx.form, &l, &cx.sampler);
            table.push(vec![
                l.to_string().into(),
                g.nonempty_positive_measure.into(),
                g.sphere_fraction_estimate.into(),
                g.sample_points.len().into(),
                g.sample_points.first().map(|p| floats(p)).unwrap_or_default().into(),
            ]);
        }
    }
    Ok(Report { table, failure: None })
}

fn kernel(job: &JobConfig, cx: &Context, kind: KernelKind) -> CliResult<Report> {
    let (n, m) = (cx.form.n(), cx.form.m());
    let k = job.input_index();
    let points = job.points.as_ref().expect("validated").expand(n);
    let eval: Vec<EvalPoint> = points.iter().map(|p| EvalPoint::new(p.z.clone(), p.t.clone(), k.clone())).collect();
    let results = eval_batch(&cx.form, kind, &eval, &cx.spec)?;
    let mut columns = numbered("z", n, &["_re", "_im"]);
    columns.extend(numbered("t", m, &[""]));
    columns.extend(["Kprime", "value_re", "value_im", "abs_err", "formula_used"].map(String::from));
    let mut table = Table::new(columns);
    let mut unconverged = 0;
    for (p, r) in points.iter().zip(results) {
        let f = r?;
        if !f.converged {
            unconverged += 1;
        }
        for (kp, v) in &f.coeffs {
            let mut row = z_cells(p);
            row.extend(p.t.iter().map(|&x| Cell::Float(x)));
            row.extend([
                kp.to_string().into(),
                v.re.into(),
                v.im.into(),
                f.abs_error[kp].into(),
                f.formula_used.to_string().into(),
            ]);
            table.push(row);
        }
    }
    let failure = (unconverged > 0).then(|| {
        CliError::tolerance(format!(
            "{unconverged} of {} points did not reach rel_tol {:e}; best estimates written",
            points.len(),
            cx.spec.rel_tol
        ))
    });
    Ok(Report { table, failure })
}

fn heat(job: &JobConfig, cx: &Context) -> CliResult<Report> {
    let (n, m) = (cx.form.n(), cx.form.m());
    let l = job.l.as_ref().expect("validated");
    let points = job.points.as_ref().expect("validated").expand(n);
    let mut columns = numbered("z", n, &["_re", "_im"]);
    columns.push("s".into());
    columns.extend(numbered("lambda", m, &[""]));
    columns.extend(["L", "heat", "szego", "heat_minus_szego"].map(String::from));
    let mut table = Table::new(columns);
    for lambda in &job.lambda {
        let hk = HeatKernel::new(&cx.form, l, lambda, cx.spec.zero_tol)?;
        for &s in &job.s {
            for p in &points {
                let mut row = z_cells(p);
                row.push(s.into());
                row.extend(lambda.iter().map(|&x| Cell::Float(x)));
                row.extend([
                    l.to_string().into(),
                    hk.heat(s, &p.z)?.into(),
                    hk.szego(&p.z)?.into(),
                    hk.heat_minus_szego(s, &p.z)?.into(),
                ]);
                table.push(row);
            }
        }
    }
    Ok(Report { table, failure: None })
}

fn verify(job: &JobConfig, cx: &Context, suite: Option<&str>) -> CliResult<Report> {
    let suite = suite.or(job.suite.as_deref()).unwrap_or("all");
    let reports = run_suite(suite, &cx.spec, cx.seed)?;
    let mut table = Table::new(
        ["check", "passed", "metric", "bound", "seconds", "budget_seconds", "detail"]
            .map(String::from)
            .to_vec(),
    );
    for r in &reports {
        table.push(vec![
            r.name.into(),
            r.passed.into(),
            r.metric.into(),
            r.bound.into(),
            r.seconds.into(),
            r.budget_seconds.map_or(Cell::Text(String::new()), Cell::Float),
            r.detail.clone().into(),
        ]);
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    let failure = (!failed.is_empty()).then(|| CliError::tolerance(format!("checks failed: {}", failed.join(", "))));
    Ok(Report { table, failure })
}

/// Runs the job and returns its table without writing anything.
pub fn execute(job: &JobConfig, opts: &RunOptions) -> CliResult<Report> {
    let mut spec = job.quadrature.apply(QuadratureSpec::default())?;
    if let Some(tol) = opts.tol {
        spec.rel_tol = tol;
        spec.validate()?;
    }
    spec.seed = opts.seed;
    let cx = Context {
        form: job.quadric.quadric()?,
        sampler: SphereSampler {
            seed: opts.seed,
            zero_tol: spec.zero_tol,
            ..SphereSampler::default()
        },
        spec,
        seed: opts.seed,
    };
    let work = || match job.command {
        Command::Spectrum => spectrum(job, &cx),
        Command::Classify => classify(job, &cx),
        Command::Gamma => gamma(job, &cx),
        Command::Green => kernel(job, &cx, KernelKind::Green),
        Command::Szego => kernel(job, &cx, KernelKind::Szego),
        Command::Heat => heat(job, &cx),
        Command::Verify => verify(job, &cx, opts.suite.as_deref()),
    };
    match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {t} threads: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Runs the job and writes its table to the configured path, or to `stdout`
/// when there is none.
pub fn run<W: Write>(job: &JobConfig, opts: &RunOptions, stdout: W) -> CliResult<()> {
    let report = execute(job, opts)?;
    let format = job.output.format;
    match opts.out.as_ref().or(job.output.path.as_ref()) {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))?;
            report.table.write(BufWriter::new(file), format)?;
        }
        None => report.table.write(stdout, format)?,
    }
    report.failure.map_or(Ok(()), Err)
}
