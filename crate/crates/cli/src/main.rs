mod commands;
mod config;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use quasilab::report::RunRecord;

use crate::commands::Outcome;
use crate::config::{ConfigFile, Settings};

#[derive(Parser)]
#[command(name = "quasilab", version, about = "Harmonic measure, rotation and spectra of fractal Jordan domains")]
struct Cli {
    /// Flat-key TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include per-disk, per-word and per-arc diagnostics.
    #[arg(long, global = true)]
    verbose_items: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Args, Default)]
struct DomainArgs {
    /// koch, twisted_koch, carleson_linear, disk, wedge:<alpha> or spiral:<alpha>:<beta>.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    twist: Option<f64>,
    /// Prefractal generation.
    #[arg(long)]
    gen: Option<i64>,
}

#[derive(Args, Default)]
struct McArgs {
    #[arg(long)]
    walks: Option<i64>,
    #[arg(long)]
    seed: Option<i64>,
}

#[derive(Args, Default)]
struct WindowArgs {
    #[arg(long)]
    eta: Option<f64>,
    /// plus, minus or both.
    #[arg(long)]
    sign_measure: Option<String>,
    #[arg(long)]
    sign_rotation: Option<String>,
    /// tracking or path.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args, Default)]
struct WeightArgs {
    /// Use product surrogate weights.
    #[arg(long)]
    surrogate: bool,
    /// Use Monte Carlo cylinder weights.
    #[arg(long, conflicts_with = "surrogate")]
    mc: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a domain and write its boundary vertices.
    Gen {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        dilatation_samples: Option<i64>,
        #[arg(long)]
        seed: Option<i64>,
    },
    /// Sample harmonic measure by walk on spheres.
    Measure {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Cylinder depth of the histogram.
        #[arg(long)]
        depth: Option<i64>,
    },
    /// Rotation of a disk, or of a cylinder's crosscut.
    Rotate {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        /// One-based dot-joined word, e.g. 1.3.2.
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Packing counts over scales.
    Pack {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Word counts over scales.
    Words {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Crosscut counts over radii.
    Crosscuts {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
    },
    /// Distortion counts over radii.
    Distortion {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
    },
    /// Check a lemma: carleson, rotation, propagation, finite-scale or stability.
    Verify {
        lemma: String,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Modulus and rotation ratios on a closed-form domain.
    AtlasCheck {
        /// disk, wedge or spiral.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
}

#[derive(Default)]
struct Overrides(BTreeMap<String, toml::Value>);

impl Overrides {
    fn f(&mut self, k: &str, v: Option<f64>) {
        if let Some(v) = v {
            self.0.insert(k.into(), toml::Value::Float(v));
        }
    }
    fn i(&mut self, k: &str, v: Option<i64>) {
        if let Some(v) = v {
            self.0.insert(k.into(), toml::Value::Integer(v));
        }
    }
    fn s(&mut self, k: &str, v: Option<String>) {
        if let Some(v) = v {
            self.0.insert(k.into(), toml::Value::String(v));
        }
    }
    fn list(&mut self, k: &str, v: Vec<f64>) {
        if !v.is_empty() {
            self.0.insert(k.into(), toml::Value::Array(v.into_iter().map(toml::Value::Float).collect()));
        }
    }
    fn domain(&mut self, d: DomainArgs) {
        self.s("preset", d.preset);
        self.f("twist", d.twist);
        self.i("gen", d.gen);
    }
    fn mc(&mut self, m: McArgs) {
        self.i("walks", m.walks);
        self.i("seed", m.seed);
    }
    fn window(&mut self, w: WindowArgs) {
        self.f("eta", w.eta);
        self.s("sign.measure", w.sign_measure);
        self.s("sign.rotation", w.sign_rotation);
        self.s("method", w.method);
    }
    fn weights(&mut self, w: WeightArgs) {
        if w.surrogate {
            self.s("weights", Some("surrogate".into()));
            self.0.insert("surrogate".into(), toml::Value::Boolean(true));
        }
        if w.mc {
            self.s("weights", Some("mc".into()));
            self.0.insert("surrogate".into(), toml::Value::Boolean(false));
        }
    }
}

/// Runs the command; `Ok(false)` marks a failed check.
fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut o = Overrides::default();
    let (name, default_format) = match &cli.command {
        Command::Gen { .. } => ("gen", Format::Csv),
        Command::Measure { .. } => ("measure", Format::Csv),
        Command::Rotate { .. } => ("rotate", Format::Json),
        Command::Pack { .. } => ("pack", Format::Csv),
        Command::Words { .. } => ("words", Format::Csv),
        Command::Crosscuts { .. } => ("crosscuts", Format::Csv),
        Command::Distortion { .. } => ("distortion", Format::Csv),
        Command::Verify { .. } => ("verify", Format::Text),
        Command::AtlasCheck { .. } => ("atlas-check", Format::Text),
    };
    let mut lemma = None;
    match cli.command {
        Command::Gen { domain, dilatation_samples, seed } => {
            o.domain(domain);
            o.i("dilatation.samples", dilatation_samples);
            o.i("seed", seed);
        }
        Command::Measure { domain, mc, depth } => {
            o.domain(domain);
            o.mc(mc);
            o.i("depth", depth);
        }
        Command::Rotate { domain, x, y, radius, word, method } => {
            o.domain(domain);
            o.f("x", x);
            o.f("y", y);
            o.f("radius", radius);
            o.s("word", word);
            o.s("method", method);
        }
        Command::Pack { domain, mc, window, delta, alpha, gamma } => {
            o.domain(domain);
            o.mc(mc);
            o.window(window);
            o.list("delta", delta);
            o.f("alpha", alpha);
            o.f("gamma", gamma);
        }
        Command::Words { domain, mc, window, weights, delta, alpha, gamma } => {
            o.domain(domain);
            o.mc(mc);
            o.window(window);
            o.weights(weights);
            o.list("delta", delta);
            o.f("alpha", alpha);
            o.f("gamma", gamma);
        }
        Command::Crosscuts { domain, mc, weights, r, a, b } => {
            o.domain(domain);
            o.mc(mc);
            o.weights(weights);
            o.list("r", r);
            o.f("a", a);
            o.f("b", b);
        }
        Command::Distortion { domain, mc, window, r, a, b } => {
            o.domain(domain);
            o.mc(mc);
            o.window(window);
            o.list("r", r);
            o.f("a", a);
            o.f("b", b);
        }
        Command::Verify { lemma: l, domain, mc, window, weights, delta, alpha, gamma } => {
            o.domain(domain);
            o.mc(mc);
            o.window(window);
            o.weights(weights);
            o.f("delta", delta);
            o.f("alpha", alpha);
            o.f("gamma", gamma);
            lemma = Some(l);
        }
        Command::AtlasCheck { kind, alpha, beta } => {
            o.s("atlas.kind", kind);
            o.f("atlas.alpha", alpha);
            o.f("atlas.beta", beta);
        }
    }
    let settings = Settings::new(file, o.0);
    let outcome: Outcome = match name {
        "gen" => commands::gen(&settings)?,
        "measure" => commands::measure(&settings)?,
        "rotate" => commands::rotate(&settings)?,
        "pack" => commands::pack(&settings)?,
        "words" => commands::words(&settings)?,
        "crosscuts" => commands::crosscuts(&settings)?,
        "distortion" => commands::distortion(&settings)?,
        "verify" => commands::verify(&settings, lemma.as_deref().unwrap_or_default())?,
        _ => commands::atlas_check(&settings)?,
    };
    let mut cfg = settings.finish()?;
    if let Some(l) = &lemma {
        cfg.insert("lemma".into(), serde_json::Value::from(l.as_str()));
    }
    let format = cli.format.unwrap_or(default_format);
    let mut result = outcome.result;
    if cli.verbose_items {
        if let (Some(items), Some(obj)) = (outcome.items.clone(), result.as_object_mut()) {
            obj.insert("items".into(), items);
        }
    }
    let record = RunRecord::new(name, cfg, result);
    let text = match format {
        Format::Json => record.to_json()?,
        Format::Csv | Format::Text => {
            let mut t = record.config_header();
            t.push_str(&outcome.table);
            if cli.verbose_items {
                if let Some(items) = &outcome.items {
                    t.push_str("# items\n");
                    t.push_str(&serde_json::to_string(items)?);
                    t.push('\n');
                }
            }
            t
        }
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
