//! Command implementations. Each returns the process exit code on success.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use gbpf_core::covariance::check_assumption;
use gbpf_core::field::{FieldSample, FieldSimulator, FieldSpec};
use gbpf_core::gbp::GbpModel;
use gbpf_core::presets::{PresetSpec, DEFAULT_LENGTH};
use gbpf_core::process::{ProcessSimulator, ProcessSpec};
use gbpf_core::rng::{replicate_seed, stream, Purpose};
use gbpf_core::stats::{autocovariance, field_correlogram, mean_se, Centering, Normalization};

use crate::config::RunConfig;
use crate::output::{names, num, Table};
use crate::{AnalyzeArgs, CliError, CommonArgs};

const DEFAULT_OUT: &str = "gbpf-out";
const DEFAULT_MAX_LAG: usize = 50;
const DEFAULT_WINDOW: usize = 25;

fn load(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.preset.is_some() {
        cfg.preset = args.preset.clone();
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.replicates.is_some() {
        cfg.replicates = args.replicates;
    }
    if args.unchecked {
        cfg.unchecked = Some(true);
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn seed(cfg: &RunConfig) -> Result<u64, CliError> {
    cfg.seed.ok_or_else(|| CliError::Usage("a seed is required (--seed or `seed`)".into()))
}

fn replicates(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.replicates.unwrap_or(1) {
        0 => Err(CliError::Usage("replicates must be positive".into())),
        r => Ok(r),
    }
}

/// Refuses models whose covariance fails the validity check unless the
/// run is explicitly unchecked.
fn gate(gbps: &[&GbpModel], cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.unchecked() {
        return Ok(());
    }
    for g in gbps {
        if !g.validity().pass {
            return Err(gbpf_core::Error::InvalidCovariance(Box::new(g.validity().clone())).into());
        }
    }
    Ok(())
}

/// Latent models named by the config: a preset's, the `axes` block, or `p`/`covariance`.
fn all_gbps(cfg: &RunConfig) -> Result<Vec<GbpModel>, CliError> {
    if let Some(p) = cfg.preset()? {
        return Ok(match p.spec {
            PresetSpec::Process(s) => vec![s.gbp().clone()],
            PresetSpec::Field(f) => f.gbps().to_vec(),
        });
    }
    if let Some(axes) = cfg.axis_gbps()? {
        return Ok(axes);
    }
    cfg.single_gbp()?
        .map(|g| vec![g])
        .ok_or_else(|| CliError::Usage("config needs `p` and `covariance`, `axes`, or a preset".into()))
}

pub fn check(args: &CommonArgs) -> Result<u8, CliError> {
    let cfg = load(args)?;
    let horizon = cfg.horizon();
    let unchecked = cfg.unchecked();
    let mut all_pass = true;
    let mut tables_ok = true;
    let mut models = Vec::new();
    for (k, g) in all_gbps(&cfg)?.iter().enumerate() {
        let report = check_assumption(g.covariance(), g.p(), horizon)?;
        all_pass &= report.pass;
        let gaps = if unchecked {
            let ok = match g.build_gap_tables(horizon as usize) {
                Ok(_) => json!({"nonnegative": true}),
                Err(gbpf_core::Error::NegativeGapProbability { k, value }) => {
                    json!({"nonnegative": false, "k": k, "value": value})
                }
                Err(e) => return Err(e.into()),
            };
            tables_ok &= ok["nonnegative"] == json!(true);
            Some(ok)
        } else {
            None
        };
        eprintln!("axis {}: p = {}: {}", k + 1, g.p(), report);
        models.push(json!({
            "axis": k + 1,
            "p": g.p(),
            "report": report,
            "gap_tables": gaps,
        }));
    }
    let ok = all_pass || (unchecked && tables_ok);
    let doc = json!({"pass": all_pass, "unchecked": unchecked, "ok": ok, "horizon": horizon, "models": models});
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("check.json"), format!("{text}\n"))?;
    }
    Ok(if ok { 0 } else { 1 })
}

fn default_max_lag(n: usize) -> usize {
    DEFAULT_MAX_LAG.min(n.saturating_sub(1) / 4)
}

pub fn simulate_gbp(args: &CommonArgs) -> Result<u8, CliError> {
    let cfg = load(args)?;
    let gbp = match cfg.preset()? {
        Some(p) => match p.spec {
            PresetSpec::Process(s) => s.gbp().clone(),
            PresetSpec::Field(f) => f.gbps()[0].clone(),
        },
        None => cfg
            .single_gbp()?
            .ok_or_else(|| CliError::Usage("config needs `p` and `covariance`".into()))?,
    };
    gate(&[&gbp], &cfg)?;
    let seed = seed(&cfg)?;
    let n = cfg.n.unwrap_or(DEFAULT_LENGTH);
    let reps = replicates(&cfg)?;
    let max_lag = cfg.max_lag.unwrap_or_else(|| default_max_lag(n));
    let dir = out_dir(&cfg)?;
    let tables = gbp.build_gap_tables(n)?;
    let mut per_rep = Vec::with_capacity(reps);
    for r in 0..reps {
        let s = replicate_seed(seed, r as u64);
        let bits = tables.sample_bits(n, &mut stream(s, Purpose::Latent, 0))?;
        if r == 0 {
            let mut t = Table::create(&dir.join("gbp.csv"), &["i".into(), "xi".into()])?;
            for (i, b) in bits.iter().enumerate() {
                t.row(&[i.to_string(), b.to_string()])?;
            }
            t.finish()?;
        }
        let x: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let a = autocovariance(&x, 1, max_lag, &Centering::SampleMean, Normalization::Biased)?;
        per_rep.push(a.matrices.iter().map(|m| m[0][0]).collect::<Vec<_>>());
    }
    let mut t = Table::create(
        &dir.join("gbp_stats.csv"),
        &["lag", "estimate", "se", "theoretical"].map(String::from),
    )?;
    for k in 0..=max_lag {
        let col: Vec<f64> = per_rep.iter().map(|v| v[k]).collect();
        let (m, se) = mean_se(&col);
        t.row(&[k.to_string(), num(m), se_field(se), num(gbp.cov_at(k as u64))])?;
    }
    t.finish()?;
    log::info!("wrote {} bits and {} lags to {}", n, max_lag + 1, dir.display());
    Ok(0)
}

fn se_field(se: f64) -> String {
    if se.is_nan() {
        String::new()
    } else {
        num(se)
    }
}

pub fn simulate_process(args: &CommonArgs) -> Result<u8, CliError> {
    let cfg = load(args)?;
    let spec = cfg.process_spec()?;
    gate(&[spec.gbp()], &cfg)?;
    let seed = seed(&cfg)?;
    let n = cfg.n.unwrap_or(DEFAULT_LENGTH);
    let reps = replicates(&cfg)?;
    let max_lag = cfg.max_lag.unwrap_or_else(|| default_max_lag(n));
    let dir = out_dir(&cfg)?;
    let d = spec.dim();
    let sim = ProcessSimulator::new(spec, n)?;
    let mut per_rep: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(reps);
    for r in 0..reps {
        let path = sim.simulate(n, replicate_seed(seed, r as u64))?;
        if r == 0 {
            let mut header = vec!["i".to_string()];
            header.extend(names("x", d));
            header.push("xi".into());
            let mut t = Table::create(&dir.join("process.csv"), &header)?;
            for i in 0..n {
                let mut row = vec![i.to_string()];
                row.extend(path.row(i).iter().map(|v| num(*v)));
                row.push(path.latent.bits[i].to_string());
                t.row(&row)?;
            }
            t.finish()?;
        }
        per_rep.push(autocovariance(&path.values, d, max_lag, &Centering::SampleMean, Normalization::Biased)?.matrices);
    }
    write_lag_stats(&dir.join("process_stats.csv"), &per_rep, d, max_lag, Some(sim.spec()))?;
    log::info!("wrote {reps} replicate(s) of length {n} to {}", dir.display());
    Ok(0)
}

fn write_lag_stats(
    path: &Path,
    per_rep: &[Vec<Vec<Vec<f64>>>],
    d: usize,
    max_lag: usize,
    spec: Option<&ProcessSpec>,
) -> Result<(), CliError> {
    let mut header = ["lag", "a", "b", "estimate", "se"].map(String::from).to_vec();
    if spec.is_some() {
        header.push("theoretical".into());
    }
    let mut t = Table::create(path, &header)?;
    for k in 0..=max_lag {
        let theory = spec.map(|s| s.cov_at_lag(k as u64)).transpose()?;
        for a in 0..d {
            for b in 0..d {
                let col: Vec<f64> = per_rep.iter().map(|m| m[k][a][b]).collect();
                let (m, se) = mean_se(&col);
                let mut row = vec![k.to_string(), (a + 1).to_string(), (b + 1).to_string(), num(m), se_field(se)];
                if let Some(th) = &theory {
                    row.push(num(th[a][b]));
                }
                t.row(&row)?;
            }
        }
    }
    t.finish()
}

fn default_window(extents: &[usize]) -> Vec<usize> {
    extents.iter().map(|&e| DEFAULT_WINDOW.min(e / 2)).collect()
}

pub fn simulate_field(args: &CommonArgs) -> Result<u8, CliError> {
    let cfg = load(args)?;
    let spec = cfg.field_spec()?;
    let gbps: Vec<&GbpModel> = spec.gbps().iter().collect();
    gate(&gbps, &cfg)?;
    let seed = seed(&cfg)?;
    let reps = replicates(&cfg)?;
    let dir = out_dir(&cfg)?;
    let window = cfg.window.clone().unwrap_or_else(|| default_window(spec.extents()));
    let d = spec.dim();
    let sim = FieldSimulator::new(spec)?;
    let mut per_rep = Vec::with_capacity(reps);
    for r in 0..reps {
        let field = sim.simulate(replicate_seed(seed, r as u64))?;
        if r == 0 {
            write_field(&dir.join("field.csv"), &field)?;
        }
        per_rep.push(field_correlogram(&field, 0, &window)?);
    }
    write_correlogram(&dir.join("field_stats.csv"), &per_rep, Some(sim.spec()))?;
    log::info!("wrote {reps} field replicate(s) of dimension {d} to {}", dir.display());
    Ok(0)
}

fn write_field(path: &Path, field: &FieldSample) -> Result<(), CliError> {
    let n = field.extents.len();
    let mut header = names("t", n);
    header.extend(names("x", field.dim));
    let mut t = Table::create(path, &header)?;
    for i in 0..field.sites() {
        let coords = field.coords(i);
        let mut row: Vec<String> = coords.iter().map(|c| (c + 1).to_string()).collect();
        row.extend(field.value(&coords).iter().map(|v| num(*v)));
        t.row(&row)?;
    }
    t.finish()
}

fn write_correlogram(
    path: &Path,
    per_rep: &[gbpf_core::stats::Correlogram],
    spec: Option<&FieldSpec>,
) -> Result<(), CliError> {
    let first = &per_rep[0];
    let n = first.window.len();
    let mut header = names("s", n);
    header.extend(["estimate", "se", "pairs"].map(String::from));
    if spec.is_some() {
        header.push("theoretical".into());
    }
    let mut t = Table::create(path, &header)?;
    for (slot, lag) in first.lags().iter().enumerate() {
        let col: Vec<f64> = per_rep.iter().map(|c| c.values[slot]).collect();
        let (m, se) = mean_se(&col);
        let mut row: Vec<String> = lag.iter().map(|l| l.to_string()).collect();
        row.extend([num(m), se_field(se), first.counts[slot].to_string()]);
        if let Some(s) = spec {
            row.push(num(s.theoretical_field_cov(lag)?[0][0]));
        }
        t.row(&row)?;
    }
    t.finish()
}

/// Input columns by name.
struct Input {
    columns: HashMap<String, Vec<f64>>,
    rows: usize,
}

impl Input {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        let mut rows = 0;
        for rec in reader.records() {
            let rec = rec.map_err(|e| CliError::Usage(e.to_string()))?;
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| CliError::Usage(format!("row {}: `{field}` is not a number", rows + 1)))?;
                cols[c].push(v);
            }
            rows += 1;
        }
        Ok(Input {
            columns: headers.into_iter().zip(cols).collect(),
            rows,
        })
    }

    /// `prefix1, prefix2, ...` while present.
    fn numbered(&self, prefix: &str) -> Vec<&Vec<f64>> {
        (1..).map_while(|k| self.columns.get(&format!("{prefix}{k}"))).collect()
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<u8, CliError> {
    let mut cfg = load(&args.common)?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if args.max_lag.is_some() {
        cfg.max_lag = args.max_lag;
    }
    if args.window.is_some() {
        cfg.window = args.window.clone();
    }
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("analyze needs --input or `input`".into()))?;
    let data = Input::read(&input)?;
    let xs = data.numbered("x");
    if xs.is_empty() {
        return Err(CliError::Usage(format!("{} has no x1 column", input.display())));
    }
    let d = xs.len();
    let dir = out_dir(&cfg)?;
    let has_model = cfg.preset.is_some() || cfg.marginal.is_some();
    let ts = data.numbered("t");
    if !ts.is_empty() {
        let n = ts.len();
        let extents: Vec<usize> = ts
            .iter()
            .map(|c| c.iter().fold(0.0f64, |a, &v| a.max(v)) as usize)
            .collect();
        if extents.iter().product::<usize>() != data.rows {
            return Err(CliError::Usage("field coordinates do not cover a full lattice".into()));
        }
        let mut field = FieldSample {
            values: vec![0.0; data.rows * d],
            dim: d,
            extents: extents.clone(),
            latent: Vec::new(),
            seed: 0,
        };
        for r in 0..data.rows {
            let t: Vec<usize> = (0..n).map(|k| ts[k][r] as usize - 1).collect();
            let i = field.index(&t);
            for (a, col) in xs.iter().enumerate() {
                field.values[i * d + a] = col[r];
            }
        }
        let window = cfg.window.clone().unwrap_or_else(|| default_window(&extents));
        let spec = if has_model { Some(cfg.field_spec()?) } else { None };
        let corr = field_correlogram(&field, 0, &window)?;
        write_correlogram(&dir.join("analysis.csv"), &[corr], spec.as_ref())?;
    } else {
        if !data.columns.contains_key("i") {
            return Err(CliError::Usage(format!("{} has neither an i nor a t1 column", input.display())));
        }
        let n = data.rows;
        let max_lag = cfg.max_lag.unwrap_or_else(|| default_max_lag(n));
        let mut values = vec![0.0; n * d];
        for (a, col) in xs.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                values[r * d + a] = *v;
            }
        }
        let spec = if has_model { Some(cfg.process_spec()?) } else { None };
        let m = autocovariance(&values, d, max_lag, &Centering::SampleMean, Normalization::Biased)?;
        write_lag_stats(&dir.join("analysis.csv"), &[m.matrices], d, max_lag, spec.as_ref())?;
    }
    Ok(0)
}
