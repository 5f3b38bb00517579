use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use ordinal_embed_core::geometry::{
    gauge_align_vector_model, orthogonal_align, similarity_procrustes, AlignmentResult, SphericalConfiguration,
};
use ordinal_embed_core::harness::{
    run_identifiability_experiment, CounterexampleReport, ExperimentReport, ExperimentSpec, TrialStatus,
};
use ordinal_embed_core::io::{
    configuration_to_csv, document_to_json, generate, looks_like_triples, ranks_from_csv, ranks_to_csv,
    read_configuration, read_text, render_report_svg, triples_from_csv, triples_to_csv, write_text, GenerateRequest,
    RunManifest,
};
use ordinal_embed_core::rankings::{ranks_for_model, triples_from_ranks, ComparisonModel, TripleSet};
use ordinal_embed_core::solvers::{
    solve_external_point, solve_external_vector, solve_internal_point, solve_internal_vector, solve_ordinal_mds,
    solve_sphere_mds, SolveResult, SolverError, SolverOptions, Variant,
};

use crate::{AlignArgs, Cli, Command, CounterexampleArgs, ExperimentArgs, GenerateArgs, Group, RankArgs, SolveArgs};

const EXIT_FLAGGED: u8 = 2;

struct Ctx {
    seed: Option<u64>,
    output: Option<PathBuf>,
    quiet: bool,
    command: String,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(path) => write_text(path, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn manifest(&self, inputs: &[&Path], seed: u64) -> Result<RunManifest> {
        Ok(RunManifest::new(self.command.clone(), inputs, seed)?)
    }

    fn emit_document<T: Serialize>(&self, inputs: &[&Path], seed: u64, body: &T) -> Result<()> {
        let manifest = self.manifest(inputs, seed)?;
        self.emit(&document_to_json(&manifest, body)?)
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    let command = std::iter::once("ordinal-embed".to_string())
        .chain(std::env::args().skip(1))
        .collect::<Vec<_>>()
        .join(" ");
    let ctx = Ctx {
        seed: cli.seed,
        output: cli.output,
        quiet: cli.quiet,
        command,
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Solve(a) => cmd_solve(&ctx, a),
        Command::Experiment(a) => cmd_experiment(&ctx, a),
        Command::Counterexample(a) => cmd_counterexample(&ctx, a),
        Command::Align(a) => cmd_align(&ctx, a),
        Command::Rank(a) => cmd_rank(&ctx, a),
    }
}

fn cmd_generate(ctx: &Ctx, a: GenerateArgs) -> Result<u8> {
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    let wants_ranks = a.ranks.is_some() || a.triples.is_some();
    let model = match (a.model, a.individuals) {
        (Some(ComparisonModel::SelfDistance), _) => Some(ComparisonModel::SelfDistance),
        (Some(m), Some(_)) => Some(m),
        (Some(m), None) => bail!("--model {m} needs --individuals"),
        (None, Some(_)) => Some(ComparisonModel::PointDistance),
        (None, None) if wants_ranks => bail!("--ranks and --triples need --model"),
        (None, None) => None,
    };
    let seed = ctx.seed.unwrap_or(0);
    let req = GenerateRequest {
        design: a.design,
        dim: a.dim,
        count: a.count,
        seed,
        ranking: model.map(|m| (m, a.individuals.unwrap_or(a.count))),
    };
    let data = generate(&req).context("generation failed")?;
    let no_inputs: [&Path; 0] = [];
    let manifest = ctx.manifest(&no_inputs, seed)?;
    let write_config = |path: &Path, c| -> Result<()> {
        if is_json(path) {
            write_text(path, &document_to_json(&manifest, c)?)?;
        } else {
            write_text(path, &configuration_to_csv(c))?;
        }
        Ok(())
    };
    match &ctx.output {
        Some(path) => write_config(path, &data.objects)?,
        None => ctx.emit(&configuration_to_csv(&data.objects))?,
    }
    if let Some(path) = &a.individuals_output {
        match &data.individuals {
            Some(x) => write_config(path, x)?,
            None => bail!("--individuals-output needs --individuals and a point or vector --model"),
        }
    }
    if let (Some(ranks), Some(model)) = (&data.ranks, model) {
        if let Some(path) = &a.ranks {
            write_text(path, &ranks_to_csv(ranks))?;
        }
        if let Some(path) = &a.triples {
            let t = triples_from_ranks(ranks, model, a.sample, seed)?;
            write_text(path, &triples_to_csv(&t))?;
        }
    }
    ctx.note(format!("generated {} points ({}, p = {})", a.count, a.design, a.dim));
    Ok(0)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
enum Status {
    Solved,
    NonConverged,
    Infeasible,
    Degenerate,
    Failed,
}

#[derive(Serialize)]
struct TraceSummary {
    accepted_steps: usize,
    initial: Option<f64>,
    last: Option<f64>,
}

#[derive(Serialize)]
struct Outcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    row: Option<usize>,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<SolveResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_trace_summary: Option<TraceSummary>,
}

impl Outcome {
    fn new(row: Option<usize>, outcome: Result<SolveResult, SolverError>) -> Result<Self> {
        let (status, result, error) = match outcome {
            Ok(r) => (Status::Solved, Some(r), None),
            Err(e) => {
                let msg = e.to_string();
                let status = match &e {
                    SolverError::NonConverged(_) => Status::NonConverged,
                    SolverError::Infeasible(_) => Status::Infeasible,
                    SolverError::DegenerateSolution(_) => Status::Degenerate,
                    _ if row.is_some() => Status::Failed,
                    _ => return Err(e).context("solve failed"),
                };
                (status, e.into_partial_result(), Some(msg))
            }
        };
        let loss_trace_summary = result.as_ref().map(|r| TraceSummary {
            accepted_steps: r.loss_trace.len(),
            initial: r.loss_trace.first().copied(),
            last: r.loss_trace.last().copied(),
        });
        Ok(Outcome {
            row,
            status,
            error,
            result,
            loss_trace_summary,
        })
    }

    fn flagged(&self) -> bool {
        matches!(self.status, Status::Infeasible | Status::Degenerate)
    }
}

#[derive(Serialize)]
struct SolveOutput {
    variant: Variant,
    dim: usize,
    violations: usize,
    comparisons: usize,
    results: Vec<Outcome>,
}

fn read_opts(path: Option<&Path>) -> Result<SolverOptions> {
    match path {
        None => Ok(SolverOptions::default()),
        Some(p) => {
            serde_json::from_str(&read_text(p)?).with_context(|| format!("{}: invalid solver options", p.display()))
        }
    }
}

fn read_self_triples(path: &Path, seed: u64) -> Result<(TripleSet, usize)> {
    let text = read_text(path)?;
    if looks_like_triples(&text) {
        let t = triples_from_csv(&text).with_context(|| path.display().to_string())?;
        let n = t.index_bounds().0.max(t.index_bounds().1);
        Ok((t, n))
    } else {
        let ranks = ranks_from_csv(&text).with_context(|| path.display().to_string())?;
        let n = ranks.cols();
        Ok((
            triples_from_ranks(&ranks, ComparisonModel::SelfDistance, None, seed)?,
            n,
        ))
    }
}

fn cmd_solve(ctx: &Ctx, a: SolveArgs) -> Result<u8> {
    let mut opts = read_opts(a.opts.as_deref())?;
    if let Some(seed) = ctx.seed {
        opts.seed = seed;
    }
    opts.validate()?;
    let mut inputs: Vec<&Path> = vec![&a.input];
    inputs.extend(a.objects.as_deref());
    inputs.extend(a.opts.as_deref());

    let results = match a.variant {
        Variant::ExternalPoint | Variant::ExternalVector => {
            let objects_path = a.objects.as_deref().context("external variants need --objects")?;
            let objects = read_configuration(objects_path)?;
            if objects.dim() != a.dim {
                bail!(
                    "--dim {} does not match the objects' dimension {}",
                    a.dim,
                    objects.dim()
                );
            }
            let ranks = ranks_from_csv(&read_text(&a.input)?).with_context(|| a.input.display().to_string())?;
            if ranks.cols() != objects.len() {
                bail!(
                    "rank rows have {} entries but there are {} objects",
                    ranks.cols(),
                    objects.len()
                );
            }
            (0..ranks.rows())
                .map(|i| {
                    let outcome = if a.variant == Variant::ExternalPoint {
                        solve_external_point(&objects, ranks.row(i), &opts)
                    } else {
                        solve_external_vector(&objects, ranks.row(i), &opts)
                    };
                    Outcome::new(Some(i), outcome)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Variant::Mds | Variant::SphereMds => {
            let (triples, n) = read_self_triples(&a.input, opts.seed)?;
            let outcome = if a.variant == Variant::Mds {
                solve_ordinal_mds(&triples, n, a.dim, &opts)
            } else {
                solve_sphere_mds(&triples, n, a.dim, &opts)
            };
            vec![Outcome::new(None, outcome)?]
        }
        Variant::InternalPoint | Variant::InternalVector => {
            let text = read_text(&a.input)?;
            if looks_like_triples(&text) {
                bail!("{} needs a rank CSV, not triples", a.variant);
            }
            let ranks = ranks_from_csv(&text).with_context(|| a.input.display().to_string())?;
            let outcome = if a.variant == Variant::InternalPoint {
                solve_internal_point(&ranks, a.dim, &opts)
            } else {
                solve_internal_vector(&ranks, a.dim, &opts)
            };
            vec![Outcome::new(None, outcome)?]
        }
    };

    let out = SolveOutput {
        variant: a.variant,
        dim: a.dim,
        violations: results
            .iter()
            .filter_map(|o| o.result.as_ref())
            .map(|r| r.violations)
            .sum(),
        comparisons: results
            .iter()
            .filter_map(|o| o.result.as_ref())
            .map(|r| r.comparisons)
            .sum(),
        results,
    };
    ctx.emit_document(&inputs, opts.seed, &out)?;
    ctx.note(format!(
        "{}: {} of {} comparisons violated",
        a.variant, out.violations, out.comparisons
    ));
    Ok(if out.results.iter().any(Outcome::flagged) {
        EXIT_FLAGGED
    } else {
        0
    })
}

#[derive(Serialize)]
struct ExperimentOutput<'a> {
    report: &'a ExperimentReport,
}

fn fresh_seed() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos() as u64)
}

fn cmd_experiment(ctx: &Ctx, a: ExperimentArgs) -> Result<u8> {
    let mut spec: ExperimentSpec = serde_json::from_str(&read_text(&a.spec)?)
        .with_context(|| format!("{}: invalid experiment spec", a.spec.display()))?;
    if a.fresh_seeds {
        spec.seed = fresh_seed();
    } else if let Some(seed) = ctx.seed {
        spec.seed = seed;
    }
    let report = run_identifiability_experiment(&spec)?;
    ctx.emit_document(&[&a.spec], spec.seed, &ExperimentOutput { report: &report })?;
    if let Some(plot) = &a.plot {
        write_text(plot, &render_report_svg(&report))?;
    }
    for s in &report.summary {
        let failed = report
            .records_for(s.size)
            .filter(|r| r.status == TrialStatus::Failed)
            .count();
        ctx.note(format!(
            "{:?}: {}/{} trials with zero violations, median recovery error {}, {} failed",
            s.size,
            s.zero_violation,
            s.trials,
            s.median_recovery_error.map_or("n/a".into(), |v| format!("{v:.3e}")),
            failed
        ));
    }
    Ok(0)
}

#[derive(Serialize)]
struct CounterexampleOutput<'a> {
    counterexample: &'a CounterexampleReport,
}

fn cmd_counterexample(ctx: &Ctx, a: CounterexampleArgs) -> Result<u8> {
    let report = a.which.build()?;
    let no_inputs: [&Path; 0] = [];
    ctx.emit_document(
        &no_inputs,
        ctx.seed.unwrap_or(0),
        &CounterexampleOutput {
            counterexample: &report,
        },
    )?;
    ctx.note(format!(
        "{}: rank data equal = {}, alignment residual {:.4} (floor {})",
        report.name, report.rank_data_equal, report.alignment_residual, report.residual_floor
    ));
    Ok(if report.holds { 0 } else { EXIT_FLAGGED })
}

#[derive(Serialize)]
struct AlignOutput {
    alignment: AlignmentResult,
}

fn cmd_align(ctx: &Ctx, a: AlignArgs) -> Result<u8> {
    let source = read_configuration(&a.source)?;
    let target = read_configuration(&a.target)?;
    let mut inputs: Vec<&Path> = vec![&a.source, &a.target];
    let alignment = match a.group {
        Group::Similarity => similarity_procrustes(&source, &target, !a.no_reflection)?,
        Group::Orthogonal => orthogonal_align(
            &SphericalConfiguration::new(source).context("source is not on the unit sphere")?,
            &SphericalConfiguration::new(target).context("target is not on the unit sphere")?,
        )?,
        Group::VectorGauge => {
            let (Some(sx), Some(tx)) = (&a.source_individuals, &a.target_individuals) else {
                bail!("vector-gauge needs --source-individuals and --target-individuals");
            };
            inputs.extend([sx.as_path(), tx.as_path()]);
            let sx = SphericalConfiguration::new(read_configuration(sx)?)
                .context("source individuals are not unit vectors")?;
            let tx = SphericalConfiguration::new(read_configuration(tx)?)
                .context("target individuals are not unit vectors")?;
            gauge_align_vector_model(&sx, &source, &tx, &target)?
        }
    };
    ctx.note(format!("alignment residual {:.6e}", alignment.residual));
    ctx.emit_document(&inputs, ctx.seed.unwrap_or(0), &AlignOutput { alignment })?;
    Ok(0)
}

fn cmd_rank(ctx: &Ctx, a: RankArgs) -> Result<u8> {
    let objects = read_configuration(&a.objects)?;
    let viewers = match (a.model, &a.viewers) {
        (ComparisonModel::SelfDistance, None) => objects.clone(),
        (ComparisonModel::SelfDistance, Some(_)) => bail!("the self model takes no --viewers"),
        (_, Some(v)) => read_configuration(v)?,
        (m, None) => bail!("the {m} model needs --viewers"),
    };
    let ranks = ranks_for_model(a.model, &viewers, &objects)?;
    ctx.emit(&ranks_to_csv(&ranks))?;
    if let Some(path) = &a.triples {
        let t = triples_from_ranks(&ranks, a.model, a.sample, ctx.seed.unwrap_or(0))?;
        write_text(path, &triples_to_csv(&t))?;
    }
    Ok(0)
}
