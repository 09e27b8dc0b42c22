//! `gravpanel` command-line driver.
//!
//! Exit codes: 0 success, 1 validation error (config, schema, data), 2
//! estimation error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gravpanel::dgp::generate;
use gravpanel::ingest::save_panels;
use gravpanel::montecarlo::{run_mc, write_summary};
use gravpanel::report::config::{dgp_from_document, ConfigDocument};
use gravpanel::report::{run_stages, McConfig, PipelineConfig, PipelineReport, Stages, Table};
use gravpanel::{Error, Relation, Result};

#[derive(Parser)]
#[command(name = "gravpanel", version, about = "Panel gravity models for bilateral trade and FDI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file (`key = value` lines under `[section]` headers).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Input CSV, overriding `input.path`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Reporter(s), comma separated, overriding `input.reporters`.
    #[arg(long)]
    reporter: Option<String>,
    /// Master seed, overriding `run.seed` (or `dgp.seed` for mc/generate).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the input; report repairs and unrepaired gaps.
    Validate(Common),
    /// Bilateral shares of world totals and data coverage.
    Describe(Common),
    /// Cross-sectional dependence tests (cd_tests.csv).
    Cdtest(Common),
    /// Panel unit-root tests (unit_roots.csv).
    Urtest(Common),
    /// FE, RE and 2SLS with diagnostics (reg_*.csv).
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Restrict to one relationship, e.g. exports_outfdi.
        #[arg(long)]
        relationship: Option<String>,
    },
    /// Every stage; writes all tables and report.md.
    Pipeline(Common),
    /// Monte Carlo experiment from the `[dgp]` and `[mc]` sections (mc_summary.csv).
    Mc {
        #[command(flatten)]
        common: Common,
        /// Replications, overriding `mc.reps`.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Writes one synthetic panel drawn from `[dgp]` (generated_panel.csv).
    Generate(Common),
}

fn load_document(c: &Common) -> Result<(ConfigDocument, PathBuf)> {
    match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((ConfigDocument::parse(&text)?, base))
        }
        None => Ok((ConfigDocument::default(), PathBuf::new())),
    }
}

fn pipeline_config(c: &Common) -> Result<PipelineConfig> {
    let (doc, base) = load_document(c)?;
    let mut cfg = PipelineConfig::from_document(&doc, &base)?;
    if let Some(i) = &c.input {
        cfg.input = i.clone();
    }
    if let Some(r) = &c.reporter {
        cfg.reporters = gravpanel::report::config::split_list(r);
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_tables(tables: &[&Table], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        let path = dir.join(format!("{}.csv", t.key));
        t.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_tables(report: &PipelineReport) {
    for t in report.tables() {
        println!("{}", t.to_markdown());
    }
}

fn staged(c: &Common, stages: Stages) -> Result<(PipelineConfig, PipelineReport)> {
    let cfg = pipeline_config(c)?;
    let report = run_stages(&cfg, stages)?;
    Ok((cfg, report))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(c) => {
            let cfg = pipeline_config(&c)?;
            let prepared = gravpanel::report::prepare_panels(&cfg)?;
            let mut open = 0;
            for p in &prepared {
                let idx = p.panel.index();
                let fills = p.repairs.iter().filter(|r| r.is_fill()).count();
                let unrepaired: Vec<_> = p.repairs.iter().filter(|r| !r.is_fill()).collect();
                open += unrepaired.len();
                println!(
                    "{}: {} partners x {} years, {} rows; {fills} interpolated, {} unrepaired",
                    p.panel.reporter(),
                    idx.n_entities(),
                    idx.n_periods(),
                    idx.n_entities() * idx.n_periods(),
                    unrepaired.len()
                );
                for r in unrepaired {
                    println!("  {} at {}: {}", r.variable, r.cell, r.action);
                }
            }
            if open > 0 {
                return Err(Error::Panel(format!("{open} cell(s) could not be repaired")));
            }
            println!("ok");
        }
        Command::Describe(c) => {
            let (cfg, report) = staged(&c, Stages { shares: true, ..Stages::NONE })?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            for run in &report.runs {
                let idx = run.prepared.panel.index();
                println!(
                    "{}: partners {} ({} years)",
                    run.reporter,
                    idx.entities().join(", "),
                    idx.n_periods()
                );
            }
            if report.shares.is_empty() {
                println!("no totals configured; share block omitted");
            } else {
                for b in &report.shares {
                    for r in &b.rows {
                        let cells: Vec<String> = r
                            .shares
                            .iter()
                            .map(|s| s.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "NA".into()))
                            .collect();
                        println!("  {} {} {}", b.reporter, r.year, cells.join(" "));
                    }
                }
                let path = cfg.output_dir.join("shares.csv");
                gravpanel::report::shares::write_shares(&report.shares, std::fs::File::create(&path)?)?;
                println!("wrote {}", path.display());
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            let path = cfg.output_dir.join("repairs.csv");
            gravpanel::report::write_repairs_csv(&report.repairs(), std::fs::File::create(&path)?)?;
            println!("wrote {}", path.display());
        }
        Command::Cdtest(c) => {
            let (cfg, report) = staged(&c, Stages { cd: true, ..Stages::NONE })?;
            print_tables(&report);
            write_tables(&report.tables(), &cfg.output_dir)?;
        }
        Command::Urtest(c) => {
            let (cfg, report) = staged(&c, Stages { unit_roots: true, ..Stages::NONE })?;
            print_tables(&report);
            write_tables(&report.tables(), &cfg.output_dir)?;
        }
        Command::Estimate { common, relationship } => {
            let mut cfg = pipeline_config(&common)?;
            if let Some(r) = relationship {
                cfg.relations = vec![r.parse::<Relation>()?];
            }
            let report = run_stages(&cfg, Stages { estimation: true, ..Stages::NONE })?;
            print_tables(&report);
            for n in &report.notes {
                println!("note: {n}");
            }
            write_tables(&report.tables(), &cfg.output_dir)?;
        }
        Command::Pipeline(c) => {
            let cfg = pipeline_config(&c)?;
            let report = gravpanel::report::run_pipeline(&cfg)?;
            for path in report.write_to(&cfg.output_dir)? {
                println!("wrote {}", path.display());
            }
            println!("{}", report.provenance.footer());
        }
        Command::Mc { common, reps } => {
            let (doc, _) = load_document(&common)?;
            let mut mc = McConfig::from_document(&doc)?;
            if let Some(s) = common.seed {
                mc.dgp.seed = s;
            }
            if let Some(r) = reps {
                mc.reps = r;
            }
            let summary = run_mc(&mc.dgp, &mc.analyses, mc.reps)?;
            println!(
                "{} replications, {} failed, seed {}",
                summary.replications, summary.failures, summary.master_seed
            );
            for t in &summary.tests {
                println!(
                    "  {:<20} reject 10% {:.3}  5% {:.3}  1% {:.3}",
                    t.name, t.rate_10, t.rate_05, t.rate_01
                );
            }
            for c in &summary.coefficients {
                println!(
                    "  {:<20} truth {:.3}  mean {:.4}  bias {:+.4}  rmse {:.4}  cover95 {:.3}",
                    c.name, c.truth, c.mean, c.bias, c.rmse, c.coverage_95
                );
            }
            let dir = common.out.clone().unwrap_or_else(|| {
                doc.get("output", "dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
            });
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("mc_summary.csv");
            write_summary(&summary, std::fs::File::create(&path)?)?;
            println!("wrote {}", path.display());
        }
        Command::Generate(c) => {
            let (doc, _) = load_document(&c)?;
            let mut spec = dgp_from_document(&doc)?;
            if let Some(s) = c.seed {
                spec.seed = s;
            }
            let panel = generate(&spec)?;
            let dir = c.out.clone().unwrap_or_else(|| {
                doc.get("output", "dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
            });
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("generated_panel.csv");
            save_panels(&[panel], &path)?;
            println!("wrote {} (seed {})", path.display(), spec.seed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
