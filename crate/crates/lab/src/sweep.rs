//! Experiment plans and the sweep runner.
//!
//! A plan is a base config plus named runs, each a set of key overrides,
//! trained on a list of seeds and evaluated on a fixed corrupted test set.
//! Reports are plain CSV and depend only on the plan; wall-clock data goes to
//! a separate `metadata.txt`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use textadain::config::Config;
use textadain::corruptions::{CorruptionKind, CorruptionSpec};
use textadain::toyocr::{self, gap_table, metrics_csv, TrainConfig};
use textadain::{AxisSet, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub name: String,
    /// Config keys applied over the plan's base config.
    pub overrides: Vec<(String, String)>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    /// Test-set kinds; `none` (clean) is always evaluated first.
    pub kinds: Vec<CorruptionKind>,
    pub size: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            kinds: CorruptionKind::ALL.to_vec(),
            size: 1000,
            seed: 777,
        }
    }
}

impl EvalSettings {
    fn columns(&self) -> Vec<CorruptionKind> {
        let mut out = vec![CorruptionKind::None];
        out.extend(self.kinds.iter().copied().filter(|&k| k != CorruptionKind::None));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    pub base: Config,
    pub runs: Vec<RunSpec>,
    /// Runs share seeds (same initialization and data) on purpose.
    pub paired: bool,
    /// Run the gap table is computed against.
    pub baseline: Option<String>,
    pub eval: EvalSettings,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ExperimentPlan {
    pub fn empty(name: &str) -> Self {
        ExperimentPlan {
            name: name.to_string(),
            base: Config::new(),
            runs: Vec::new(),
            paired: false,
            baseline: None,
            eval: EvalSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let mut names = BTreeSet::new();
        for r in &self.runs {
            if !valid_name(&r.name) {
                return bad(format!("run name {:?} must be non-empty [A-Za-z0-9_-]", r.name));
            }
            if !names.insert(r.name.as_str()) {
                return bad(format!("duplicate run name {:?}", r.name));
            }
            if r.seeds.is_empty() {
                return bad(format!("run {:?} has no seeds", r.name));
            }
            if r.seeds.iter().collect::<BTreeSet<_>>().len() != r.seeds.len() {
                return bad(format!("run {:?} repeats a seed", r.name));
            }
            self.train_config(r, r.seeds[0])?;
        }
        if !self.paired {
            let mut seen = BTreeSet::new();
            for r in &self.runs {
                for s in &r.seeds {
                    if !seen.insert(s) {
                        return bad(format!("seed {s} shared across runs but the plan is not paired"));
                    }
                }
            }
        }
        if let Some(b) = &self.baseline {
            if !names.contains(b.as_str()) {
                return bad(format!("baseline {b:?} is not a run"));
            }
        }
        if self.eval.size == 0 {
            return bad("eval.size must be positive".into());
        }
        Ok(())
    }

    /// Effective training config of `run` at `seed`.
    pub fn train_config(&self, run: &RunSpec, seed: u64) -> Result<TrainConfig> {
        let mut c = self.base.clone();
        for (k, v) in &run.overrides {
            c.set(k, v);
        }
        c.set("train.seed", &seed.to_string());
        TrainConfig::from_config(&c)
    }

    /// Parse the flat plan format:
    ///
    /// ```text
    /// plan.name=direction
    /// plan.paired=true
    /// plan.seeds=0,1,2,3,4
    /// plan.baseline=baseline
    /// eval.kinds=dropout,cutout,noise
    /// eval.size=1000
    /// base.train.iterations=2000
    /// run.baseline.textadain.enabled=false
    /// run.high.textadain.enabled=true
    /// run.high.textadain.p=0.25
    /// run.high.seeds=10,11
    /// ```
    ///
    /// Runs appear in order of first mention; `run.<name>.seeds` overrides
    /// `plan.seeds` for that run.
    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::empty("sweep");
        let mut default_seeds = vec![0];
        let mut run_seeds: Vec<Option<Vec<u64>>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let err = |m: &str| Error::Config(format!("line {}: {m}", lineno + 1));
            if let Some(rest) = key.strip_prefix("run.") {
                let (name, sub) = rest.split_once('.').ok_or_else(|| err("expected run.<name>.<key>"))?;
                let idx = match plan.runs.iter().position(|r| r.name == name) {
                    Some(i) => i,
                    None => {
                        plan.runs.push(RunSpec {
                            name: name.to_string(),
                            overrides: Vec::new(),
                            seeds: Vec::new(),
                        });
                        run_seeds.push(None);
                        plan.runs.len() - 1
                    }
                };
                if sub == "seeds" {
                    run_seeds[idx] = Some(parse_list(value).map_err(|m| err(&m))?);
                } else {
                    plan.runs[idx].overrides.push((sub.to_string(), value.to_string()));
                }
            } else if let Some(sub) = key.strip_prefix("base.") {
                plan.base.set(sub, value);
            } else {
                match key {
                    "plan.name" => plan.name = value.to_string(),
                    "plan.paired" => plan.paired = value.parse().map_err(|_| err("plan.paired must be true|false"))?,
                    "plan.seeds" => default_seeds = parse_list(value).map_err(|m| err(&m))?,
                    "plan.baseline" => plan.baseline = Some(value.to_string()),
                    "eval.size" => plan.eval.size = value.parse().map_err(|_| err("bad eval.size"))?,
                    "eval.seed" => plan.eval.seed = value.parse().map_err(|_| err("bad eval.seed"))?,
                    "eval.kinds" => plan.eval.kinds = parse_list(value).map_err(|m| err(&m))?,
                    _ => return Err(err(&format!("unknown key {key:?}"))),
                }
            }
        }
        for (r, s) in plan.runs.iter_mut().zip(run_seeds) {
            r.seeds = s.unwrap_or_else(|| default_seeds.clone());
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| format!("cannot parse list item {p:?}")))
        .collect()
}

pub const PRESETS: [&str; 6] = ["p", "k", "axes", "donor", "gap", "direction"];

pub const P_GRID: [f64; 5] = [0.001, 0.01, 0.05, 0.1, 0.25];
pub const K_GRID: [usize; 5] = [1, 2, 3, 5, 8];

fn run(name: impl Into<String>, overrides: &[(&str, String)], seeds: &[u64]) -> RunSpec {
    RunSpec {
        name: name.into(),
        overrides: overrides.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        seeds: seeds.to_vec(),
    }
}

fn baseline(seeds: &[u64]) -> RunSpec {
    run("baseline", &[("textadain.enabled", "false".into())], seeds)
}

fn on() -> (&'static str, String) {
    ("textadain.enabled", "true".into())
}

/// Dot-free run label for a probability, e.g. `0.01 -> p0_01`.
pub fn p_label(p: f64) -> String {
    format!("p{p}").replace('.', "_")
}

/// A named paired sweep over `seeds` on top of `base`.
pub fn preset(name: &str, base: Config, seeds: &[u64]) -> Result<ExperimentPlan> {
    let mut runs = vec![baseline(seeds)];
    let mut eval = EvalSettings::default();
    match name {
        "p" => {
            for p in P_GRID {
                runs.push(run(p_label(p), &[on(), ("textadain.p", p.to_string())], seeds));
            }
            eval.kinds.clear();
        }
        "k" => {
            for k in K_GRID {
                runs.push(run(format!("k{k}"), &[on(), ("textadain.k", k.to_string())], seeds));
            }
            eval.kinds.clear();
        }
        "axes" => {
            for kept in AxisSet::VARIANTS {
                for k in [1, 5] {
                    let o = [on(), ("textadain.kept", kept.name()), ("textadain.k", k.to_string())];
                    runs.push(run(format!("{}_k{k}", kept.name()), &o, seeds));
                }
            }
            eval.kinds.clear();
        }
        "donor" => {
            for d in ["batch", "gauss", "blank"] {
                runs.push(run(d, &[on(), ("textadain.donor", d.into())], seeds));
            }
            eval.kinds.clear();
        }
        "gap" => runs.push(run("textadain", &[on()], seeds)),
        "direction" => {
            for p in [0.01, 0.25] {
                runs.push(run(p_label(p), &[on(), ("textadain.p", p.to_string())], seeds));
            }
            eval.kinds = vec![CorruptionKind::CoarseDropout, CorruptionKind::Cutout, CorruptionKind::AdditiveGaussianNoise];
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset {other:?} (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    }
    let plan = ExperimentPlan {
        name: name.to_string(),
        base,
        runs,
        paired: true,
        baseline: Some("baseline".into()),
        eval,
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok {
        val_acc: f64,
        /// Accuracy per evaluated kind, clean first.
        acc: Vec<f64>,
    },
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run: String,
    pub seed: u64,
    pub status: RunStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub run: String,
    pub metric: String,
    /// Successful seeds.
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (NaN for fewer than two seeds).
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub columns: Vec<CorruptionKind>,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SweepReport {
    pub fn mean(&self, run: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.run == run && r.metric == metric && r.n > 0)
            .map(|r| r.mean)
    }

    pub fn failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r.status, RunStatus::Failed(_)))
            .count()
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

struct Task<'a> {
    run: &'a RunSpec,
    seed: u64,
}

fn execute(plan: &ExperimentPlan, task: &Task<'_>, columns: &[CorruptionKind], dir: &Path) -> Result<RunStatus> {
    let cfg = plan.train_config(task.run, task.seed)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_config().to_text())?;
    let out = toyocr::train(&cfg)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(&out.metrics))?;
    let acc = columns
        .iter()
        .map(|&k| toyocr::evaluate(&out.model, &CorruptionSpec::default_for(k), plan.eval.seed, plan.eval.size))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunStatus::Ok {
        val_acc: out.final_val_acc(),
        acc,
    })
}

/// Train and evaluate every `(run, seed)` of `plan` on up to `jobs` threads,
/// writing the report under `out`. A failing run is recorded and the sweep
/// goes on; only plan or I/O errors of the report itself abort.
pub fn run_sweep(plan: &ExperimentPlan, out: &Path, jobs: usize, log: impl Fn(&str) + Sync) -> Result<SweepReport> {
    plan.validate()?;
    fs::create_dir_all(out)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let columns = plan.eval.columns();
    let tasks: Vec<Task<'_>> = plan
        .runs
        .iter()
        .flat_map(|run| run.seeds.iter().map(move |&seed| Task { run, seed }))
        .collect();
    let results: Mutex<Vec<Option<(RunStatus, f64)>>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, tasks.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let t0 = Instant::now();
                let dir = run_dir(out, &task.run.name, task.seed);
                let status = execute(plan, task, &columns, &dir).unwrap_or_else(|e| RunStatus::Failed(e.to_string()));
                let secs = t0.elapsed().as_secs_f64();
                log(&match &status {
                    RunStatus::Ok { acc, .. } => {
                        format!("{} seed {}: clean {:.4} ({secs:.1}s)", task.run.name, task.seed, acc[0])
                    }
                    RunStatus::Failed(e) => format!("{} seed {}: FAILED {e}", task.run.name, task.seed),
                });
                results.lock().expect("no panics while holding the lock")[i] = Some((status, secs));
            });
        }
    });
    let results: Vec<(RunStatus, f64)> = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect();

    let records: Vec<RunRecord> = tasks
        .iter()
        .zip(&results)
        .map(|(t, (status, _))| RunRecord {
            run: t.run.name.clone(),
            seed: t.seed,
            status: status.clone(),
        })
        .collect();
    let summary = summarize(plan, &columns, &records);
    let report = SweepReport {
        columns,
        records,
        summary,
    };
    fs::write(out.join("runs.csv"), runs_csv(&report))?;
    fs::write(out.join("summary.csv"), summary_csv(&report.summary))?;
    if let Some(b) = &plan.baseline {
        fs::write(out.join("gap.csv"), gap_csv(&report, b))?;
    }
    let mut meta = String::new();
    let epoch = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(meta, "plan={}", plan.name);
    let _ = writeln!(meta, "started_unix={epoch}");
    let _ = writeln!(meta, "wall_seconds={:.1}", clock.elapsed().as_secs_f64());
    let _ = writeln!(meta, "jobs={jobs}");
    for (t, (_, secs)) in tasks.iter().zip(&results) {
        let _ = writeln!(meta, "run.{}.seed{}.seconds={secs:.1}", t.run.name, t.seed);
    }
    fs::write(out.join("metadata.txt"), meta)?;
    Ok(report)
}

pub fn run_dir(out: &Path, run: &str, seed: u64) -> PathBuf {
    out.join("runs").join(run).join(format!("seed{seed}"))
}

fn summarize(plan: &ExperimentPlan, columns: &[CorruptionKind], records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for run in &plan.runs {
        let ok: Vec<(f64, &Vec<f64>)> = records
            .iter()
            .filter(|r| r.run == run.name)
            .filter_map(|r| match &r.status {
                RunStatus::Ok { val_acc, acc } => Some((*val_acc, acc)),
                RunStatus::Failed(_) => None,
            })
            .collect();
        let mut push = |metric: String, xs: Vec<f64>| {
            let (mean, sd) = mean_sd(&xs);
            rows.push(SummaryRow {
                run: run.name.clone(),
                metric,
                n: xs.len(),
                mean,
                sd,
            });
        };
        push("val".into(), ok.iter().map(|(v, _)| *v).collect());
        for (j, kind) in columns.iter().enumerate() {
            push(kind.name().into(), ok.iter().map(|(_, a)| a[j]).collect());
        }
    }
    rows
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.4}")
    }
}

fn csv_field(s: &str) -> String {
    let flat = s.replace(['\n', '\r'], " ");
    if flat.contains([',', '"']) {
        format!("\"{}\"", flat.replace('"', "\"\""))
    } else {
        flat
    }
}

pub fn runs_csv(report: &SweepReport) -> String {
    let mut s = String::from("run,seed,status,val");
    for k in &report.columns {
        s += ",";
        s += k.name();
    }
    s += ",error\n";
    for r in &report.records {
        let _ = write!(s, "{},{}", r.run, r.seed);
        match &r.status {
            RunStatus::Ok { val_acc, acc } => {
                let _ = write!(s, ",ok,{}", fmt_num(*val_acc));
                for a in acc {
                    let _ = write!(s, ",{}", fmt_num(*a));
                }
                s += ",\n";
            }
            RunStatus::Failed(e) => {
                s += ",failed,";
                s += &",".repeat(report.columns.len());
                let _ = writeln!(s, ",{}", csv_field(e));
            }
        }
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("run,metric,n,mean,sd\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.run, r.metric, r.n, fmt_num(r.mean), fmt_num(r.sd));
    }
    s
}

/// Gap rows of every other run against `baseline`, from per-run means.
pub fn gap_csv(report: &SweepReport, baseline: &str) -> String {
    let means = |run: &str| -> Vec<(CorruptionKind, f64)> {
        report
            .columns
            .iter()
            .filter_map(|k| report.mean(run, k.name()).map(|m| (*k, m)))
            .collect()
    };
    let base = means(baseline);
    let mut runs: Vec<&str> = Vec::new();
    for r in &report.records {
        if r.run != baseline && !runs.contains(&r.run.as_str()) {
            runs.push(&r.run);
        }
    }
    let mut s = String::from("run,corruption,category,baseline,textadain,gap,normalized_gap\n");
    for run in runs {
        let table = toyocr::gap_table_csv(&gap_table(&base, &means(run)));
        for line in table.lines().skip(1) {
            let _ = writeln!(s, "{run},{line}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> Config {
        let mut c = Config::new();
        c.set("train.iterations", "3");
        c.set("train.batch_size", "2");
        c.set("train.eval_every", "3");
        c.set("data.val_size", "4");
        c
    }

    #[test]
    fn presets_cover_the_grids() {
        let p = preset("p", Config::new(), &[0, 1]).unwrap();
        let names: Vec<_> = p.runs.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["baseline", "p0_001", "p0_01", "p0_05", "p0_1", "p0_25"]);
        let k = preset("k", Config::new(), &[0]).unwrap();
        assert!(k.runs.iter().any(|r| r.name == "k5"));
        assert_eq!(preset("axes", Config::new(), &[0]).unwrap().runs.len(), 13);
        for name in PRESETS {
            assert!(preset(name, Config::new(), &[0]).is_ok(), "{name}");
        }
        assert!(preset("lr", Config::new(), &[0]).is_err());
    }

    #[test]
    fn validation_rules() {
        let mut plan = ExperimentPlan::empty("t");
        plan.runs = vec![run("a", &[], &[0, 1]), run("b", &[], &[1])];
        assert!(plan.validate().is_err(), "shared seed without pairing");
        plan.paired = true;
        assert!(plan.validate().is_ok());
        plan.runs[1].name = "a".into();
        assert!(plan.validate().is_err(), "duplicate name");
        plan.runs[1].name = "b.c".into();
        assert!(plan.validate().is_err(), "dot in name");
        plan.runs[1].name = "b".into();
        plan.runs[1].overrides.push(("train.nonsense".into(), "1".into()));
        assert!(plan.validate().is_err(), "unknown key");
    }

    #[test]
    fn plan_file_round() {
        let text = "plan.name=demo\nplan.seeds=3,4\nplan.paired=true\nplan.baseline=base\n\
                    eval.kinds=cutout,noise\neval.size=10\nbase.train.iterations=5\n\
                    run.base.textadain.enabled=false\nrun.hi.textadain.enabled=true\n\
                    run.hi.textadain.p=0.25 # high\nrun.hi.seeds=4\n";
        let plan = ExperimentPlan::parse(text).unwrap();
        assert_eq!(plan.name, "demo");
        assert_eq!(plan.runs[0].seeds, [3, 4]);
        assert_eq!(plan.runs[1].seeds, [4]);
        assert_eq!(plan.eval.kinds, [CorruptionKind::Cutout, CorruptionKind::AdditiveGaussianNoise]);
        let cfg = plan.train_config(&plan.runs[1], 4).unwrap();
        assert_eq!((cfg.iterations, cfg.seed, cfg.textadain.p), (5, 4, 0.25));
        assert!(cfg.textadain_enabled);
        assert!(ExperimentPlan::parse("plan.bogus=1").is_err());
        assert!(ExperimentPlan::parse("run.x=1").is_err());
    }

    #[test]
    fn empty_plan_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_sweep(&ExperimentPlan::empty("e"), dir.path(), 1, |_| {}).unwrap();
        assert!(report.records.is_empty() && report.summary.is_empty());
        let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        assert_eq!(runs.lines().count(), 1);
    }

    #[test]
    fn failures_are_recorded_and_reports_reproduce() {
        let mut plan = ExperimentPlan::empty("t");
        plan.base = tiny_base();
        plan.paired = true;
        plan.baseline = Some("ok".into());
        plan.eval = EvalSettings {
            kinds: vec![CorruptionKind::AdditiveGaussianNoise],
            size: 4,
            seed: 1,
        };
        plan.runs = vec![
            run("ok", &[], &[0, 1]),
            // A learning rate this large overflows to a non-finite loss.
            run("boom", &[("train.lr", "1e30".into())], &[0]),
        ];
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let r1 = run_sweep(&plan, d1.path(), 1, |_| {}).unwrap();
        let r2 = run_sweep(&plan, d2.path(), 2, |_| {}).unwrap();
        assert_eq!(r1.records, r2.records);
        assert_eq!(r1.records.len(), 3);
        assert_eq!(r1.failures(), 1);
        for f in ["runs.csv", "summary.csv", "gap.csv"] {
            let a = fs::read(d1.path().join(f)).unwrap();
            assert_eq!(a, fs::read(d2.path().join(f)).unwrap(), "{f}");
        }
        let runs = fs::read_to_string(d1.path().join("runs.csv")).unwrap();
        assert!(runs.lines().any(|l| l.starts_with("boom,0,failed")));
        assert!(run_dir(d1.path(), "ok", 1).join("metrics.csv").exists());
        assert!(d1.path().join("metadata.txt").exists());
    }

    #[test]
    fn sample_sd() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_sd(&[1.0]).1.is_nan());
    }
}
