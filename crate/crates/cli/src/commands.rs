use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use countsynth::calibration::{write_sweep_csv, CalibrationTarget, FreeParameter, TargetMetric};
use countsynth::distributions::CountModel;
use countsynth::io::{load_ensemble, read_schema, save_ensemble, write_table_csv};
use countsynth::metrics::{
    ci_overlap, count_transitions, fit_loglinear, l1_analytic, loss_report, risk_utility_analytic,
    risk_utility_empirical, tau_analytic, tau_empirical, tau_value, total_coverage, total_report, total_variance,
    FitResult, TauKind,
};
use countsynth::table::{
    gen_fixture, ingest_aggregated, ingest_microdata, school_census_schema, school_census_target, write_microdata,
    TargetHistogram,
};
use countsynth::{calibrate, sweep, synthesize, CellHistogram, ContingencyTable, Family, MechanismConfig};
use rayon::prelude::*;
use serde_json::json;

use crate::args::*;
use crate::manifest::RunManifest;

/// Outputs of a command and where its manifest goes by default.
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub manifest_dir: Option<PathBuf>,
}

impl Outcome {
    fn none() -> Self {
        Self {
            written: Vec::new(),
            manifest_dir: None,
        }
    }
}

fn load_table(input: &TableInput, manifest: &mut RunManifest) -> Result<ContingencyTable> {
    manifest.input(&input.schema)?;
    manifest.input(&input.table)?;
    let schema = read_schema(&input.schema).with_context(|| format!("reading {}", input.schema.display()))?;
    let file = File::open(&input.table).with_context(|| format!("opening {}", input.table.display()))?;
    ingest_aggregated(BufReader::new(file), &schema).with_context(|| format!("reading {}", input.table.display()))
}

/// `size,frequency` rows; every size listed is exact.
fn read_histogram_csv(path: &Path) -> Result<CellHistogram> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing `{name}` column", path.display()))
    };
    let (size_col, freq_col) = (col("size")?, col("frequency")?);
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize| -> Result<u64> {
            let raw = rec.get(c).unwrap_or("").replace(',', "");
            raw.parse()
                .map_err(|_| anyhow!("{}: row {}: `{raw}` is not a non-negative integer", path.display(), i + 1))
        };
        pairs.push((parse(size_col)?, parse(freq_col)?));
    }
    Ok(CellHistogram::from_frequencies(pairs, 10)?)
}

fn load_histogram(input: &HistogramInput, manifest: &mut RunManifest) -> Result<Option<CellHistogram>> {
    match (&input.schema, &input.table, &input.histogram) {
        (Some(schema), Some(table), _) => {
            let t = load_table(
                &TableInput {
                    schema: schema.clone(),
                    table: table.clone(),
                },
                manifest,
            )?;
            Ok(Some(t.histogram(10)))
        }
        (_, _, Some(path)) => {
            manifest.input(path)?;
            Ok(Some(read_histogram_csv(path)?))
        }
        _ => Ok(None),
    }
}

fn require_histogram(h: Option<CellHistogram>) -> Result<CellHistogram> {
    h.ok_or_else(|| anyhow!("this metric needs a histogram: pass --schema and --table, or --histogram"))
}

fn count_model(family: FamilyArg, sigma: Option<f64>, nu: Option<f64>) -> Result<CountModel> {
    let model = match family {
        FamilyArg::Poisson => CountModel::Poisson,
        FamilyArg::Nbi => CountModel::Nbi {
            sigma: sigma.ok_or_else(|| anyhow!("--sigma is required for nbi"))?,
        },
        FamilyArg::Gaf => CountModel::Gaf {
            sigma: sigma.ok_or_else(|| anyhow!("--sigma is required for gaf"))?,
            nu: nu.ok_or_else(|| anyhow!("--nu is required for gaf"))?,
        },
    };
    model.validate()?;
    Ok(model)
}

fn parse_sizes(list: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
            if a > b {
                bail!("empty size range `{part}`");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad size `{part}`"))?);
        }
    }
    if out.is_empty() {
        bail!("no sizes given");
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn ingest(a: &IngestArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let schema = match &a.schema {
        Some(p) => {
            manifest.input(p)?;
            Some(read_schema(p)?)
        }
        None => None,
    };
    let table = if let Some(path) = &a.microdata {
        manifest.input(path)?;
        ingest_microdata(BufReader::new(File::open(path)?), schema.as_ref())
            .with_context(|| format!("reading {}", path.display()))?
    } else {
        let path = a.aggregated.as_ref().expect("clap enforces one input");
        manifest.input(path)?;
        let schema = schema.as_ref().expect("clap enforces --schema");
        ingest_aggregated(BufReader::new(File::open(path)?), schema).with_context(|| format!("reading {}", path.display()))?
    };
    let mut w = create(&a.out)?;
    countsynth::table::write_aggregated(&table, &mut w, a.include_zero)?;
    w.flush()?;
    let mut written = vec![a.out.clone()];
    if let Some(p) = &a.schema_out {
        std::fs::write(p, table.schema().to_json()?)?;
        written.push(p.clone());
    }
    eprintln!("{} cells, total {}", table.num_cells(), table.total());
    Ok(Outcome {
        written,
        manifest_dir: None,
    })
}

pub fn synth(a: &SynthArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let table = load_table(&a.input, manifest)?;
    let config = MechanismConfig::new(
        a.model.family.into(),
        a.model.sigma,
        a.model.nu,
        a.model.zero_policy,
        a.m,
        a.seed,
    )?;
    manifest.master_seed = Some(a.seed);
    let ensemble = synthesize(&table, &config)?;
    let stats = *ensemble.stats();
    manifest.warn("clamped_draws", stats.clamped);
    manifest.warn("zeros_converted", stats.zeros_converted);
    manifest.warn("max_zero_draw", stats.max_zero_draw);
    if stats.clamped > 0 {
        eprintln!(
            "warning: {} draws exceeded {} and were clamped",
            stats.clamped,
            countsynth::distributions::COUNT_CEILING
        );
    }
    if let Some(rate) = stats.conversion_rate() {
        eprintln!(
            "zero cells synthesized as nonzero: {} of {} ({rate:.6}), largest {}",
            stats.zeros_converted, stats.zero_cell_draws, stats.max_zero_draw
        );
    }
    let written = save_ensemble(&ensemble, &a.out_dir, a.per_replicate)?;
    Ok(Outcome {
        written,
        manifest_dir: Some(a.out_dir.clone()),
    })
}

fn default_fit_vars(table: &ContingencyTable) -> Option<Vec<String>> {
    let wanted = ["ETHNICITY", "AGE", "LANGUAGE"];
    wanted
        .iter()
        .all(|v| table.schema().variable_index(v).is_some())
        .then(|| wanted.iter().map(|s| s.to_string()).collect())
}

pub fn metrics(a: &MetricsArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let original = load_table(&a.input, manifest)?;
    for f in [countsynth::io::ENSEMBLE_CSV, countsynth::io::ENSEMBLE_JSON] {
        manifest.input(&a.ensemble.join(f))?;
    }
    let ensemble = load_ensemble(&a.ensemble).with_context(|| format!("loading {}", a.ensemble.display()))?;
    ensemble.check_aligned(&original)?;
    let config = ensemble.config().clone();
    manifest.master_seed = Some(config.master_seed);
    let model = config.model()?;
    let sizes = parse_sizes(&a.sizes)?;
    let hist = original.histogram(10);
    let m = ensemble.num_replicates();
    std::fs::create_dir_all(&a.out_dir)?;
    let mut written = Vec::new();
    let out = |name: &str| a.out_dir.join(name);

    let tau_emp = tau_empirical(&original, &ensemble, &sizes)?;
    let tau_ana = tau_analytic(&model, &config.zero_policy, &hist, &sizes)?;
    tau_emp.write_csv(create(&out("tau_empirical.csv"))?)?;
    tau_ana.write_csv(create(&out("tau_analytic.csv"))?)?;
    written.extend([out("tau_empirical.csv"), out("tau_analytic.csv")]);

    let loss = loss_report(&original, &ensemble, Some(&model))?;
    let totals = total_report(&original, &ensemble)?;
    let sd = totals.analytic_sd();
    let coverage: Vec<_> = sd
        .into_iter()
        .flat_map(|s| [s, 2.0 * s])
        .map(|d| json!({"d": d, "analytic": totals.coverage(d), "empirical": totals.empirical_coverage(d)}))
        .collect();

    let transitions = count_transitions(&original, &ensemble, a.cap)?;
    transitions.write_by_original(create(&out("synthetic_given_original.csv"))?)?;
    transitions.write_by_synthetic(create(&out("original_given_synthetic.csv"))?)?;
    written.extend([out("synthetic_given_original.csv"), out("original_given_synthetic.csv")]);

    let fit_vars = a.fit_vars.clone().or_else(|| default_fit_vars(&original));
    let overlap = match &fit_vars {
        Some(vars) => {
            let names: Vec<&str> = vars.iter().map(String::as_str).collect();
            let orig_fit = fit_loglinear(&original, &names, a.order)?;
            let syn_fits = (0..m)
                .into_par_iter()
                .map(|r| fit_loglinear(&ensemble.to_table(r)?, &names, a.order))
                .collect::<countsynth::Result<Vec<FitResult>>>()?;
            let report = ci_overlap(&orig_fit, &syn_fits)?;
            report.write_csv(create(&out("ci_overlap.csv"))?)?;
            written.push(out("ci_overlap.csv"));
            let not_converged = syn_fits.iter().chain([&orig_fit]).filter(|f| !f.converged).count();
            manifest.warn("fits_not_converged", not_converged as u64);
            Some(json!({
                "variables": vars,
                "order": a.order,
                "terms": report.terms.len(),
                "median": report.median,
                "separated_terms_original": orig_fit.separated.iter().filter(|&&s| s).count(),
                "fits_not_converged": not_converged,
            }))
        }
        None => None,
    };

    let ru_emp = risk_utility_empirical(&original, &ensemble)?;
    let ru_ana = risk_utility_analytic(&model, &config.zero_policy, &hist, m)?;
    {
        let mut wtr = csv::Writer::from_writer(create(&out("risk_utility.csv"))?);
        wtr.write_record(["source", "risk", "utility", "L1_raw"])?;
        for (src, p) in [("empirical", ru_emp), ("analytic", ru_ana)] {
            wtr.write_record([
                src.to_string(),
                p.risk.map(|x| x.to_string()).unwrap_or_default(),
                p.utility.to_string(),
                p.l1.to_string(),
            ])?;
        }
        wtr.flush()?;
    }
    written.push(out("risk_utility.csv"));

    let report = json!({
        "mechanism": config,
        "original_hash": ensemble.original_hash(),
        "replicates": m,
        "synthesis": ensemble.stats(),
        "tau": {"empirical": tau_emp, "analytic": tau_ana},
        "loss": loss,
        "total": {
            "n": totals.n,
            "n_syn": totals.n_syn,
            "analytic_variance": totals.analytic_variance,
            "coverage": coverage,
        },
        "ci_overlap": overlap,
        "risk_utility": {"empirical": ru_emp, "analytic": ru_ana},
    });
    std::fs::write(out("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    written.push(out("report.json"));
    Ok(Outcome {
        written,
        manifest_dir: Some(a.out_dir.clone()),
    })
}

fn tau_kind(metric: MetricArg) -> Option<TauKind> {
    match metric {
        MetricArg::Tau1 => Some(TauKind::Tau1),
        MetricArg::Tau2 => Some(TauKind::Tau2),
        MetricArg::Tau3 => Some(TauKind::Tau3),
        MetricArg::Tau4 => Some(TauKind::Tau4),
        _ => None,
    }
}

pub fn apriori(a: &AprioriArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let model = count_model(a.model.family, a.model.sigma, a.model.nu)?;
    let zp = a.model.zero_policy;
    let hist = load_histogram(&a.histogram, manifest)?;
    let value = match a.metric {
        m @ (MetricArg::Tau1 | MetricArg::Tau2 | MetricArg::Tau3 | MetricArg::Tau4) => {
            tau_value(tau_kind(m).expect("tau metric"), &model, &zp, hist.as_ref(), a.k)?
        }
        MetricArg::L1 => l1_analytic(&model, &require_histogram(hist)?, a.m)?,
        MetricArg::Variance => total_variance(&model, &zp, &require_histogram(hist)?),
        MetricArg::Coverage => {
            let d = a.d.ok_or_else(|| anyhow!("--d is required for coverage"))?;
            total_coverage(&model, &zp, &require_histogram(hist)?, d)
        }
    };
    println!("{value}");
    Ok(Outcome::none())
}

pub fn calibrate_cmd(a: &CalibrateArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let free = match a.free {
        FreeArg::Sigma => FreeParameter::Sigma,
        FreeArg::Nu => FreeParameter::Nu,
    };
    // the free parameter needs a placeholder value for model construction
    let (sigma, nu) = match free {
        FreeParameter::Sigma => (Some(a.model.sigma.unwrap_or(1.0)), a.model.nu),
        FreeParameter::Nu => (a.model.sigma, Some(a.model.nu.unwrap_or(0.0))),
    };
    let model = count_model(a.model.family, sigma, nu)?;
    let metric = match a.metric {
        MetricArg::Tau3 => TargetMetric::Tau3 { k: a.k },
        MetricArg::Tau4 => TargetMetric::Tau4 { k: a.k },
        MetricArg::L1 => TargetMetric::L1 { m: a.m },
        MetricArg::Coverage => TargetMetric::TotalCoverage {
            d: a.d.ok_or_else(|| anyhow!("--d is required for coverage"))?,
        },
        other => bail!("{other:?} cannot be calibrated (it does not depend on sigma or nu)"),
    };
    let hist = match load_histogram(&a.histogram, manifest)? {
        Some(h) => h,
        None if matches!(metric, TargetMetric::Tau3 { .. }) => CellHistogram::from_frequencies([(a.k, 1)], 10)?,
        None => bail!("this metric needs a histogram: pass --schema and --table, or --histogram"),
    };
    let mut target = CalibrationTarget::new(model, metric, a.target, free);
    target.zero_policy = a.model.zero_policy;
    target.tolerance = a.tol;
    let (lo, hi) = free.default_bounds();
    target.bounds = (a.lower.unwrap_or(lo), a.upper.unwrap_or(hi));
    let result = calibrate(&hist, &target)?;
    if !result.monotone {
        eprintln!("warning: metric is not monotone over the bounds; result comes from the bracketing scan interval");
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(Outcome::none())
}

pub fn sweep_cmd(a: &SweepArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let hist = require_histogram(load_histogram(&a.histogram, manifest)?)?;
    let families: Vec<Family> = a.families.iter().map(|&f| f.into()).collect();
    let rows = sweep(&hist, &a.sigmas, &a.nus, &families, &a.zero_policy, a.m)?;
    match &a.out {
        Some(path) => {
            write_sweep_csv(&rows, create(path)?)?;
            Ok(Outcome {
                written: vec![path.clone()],
                manifest_dir: None,
            })
        }
        None => {
            write_sweep_csv(&rows, io::stdout().lock())?;
            Ok(Outcome::none())
        }
    }
}

pub fn genfixture(a: &GenfixtureArgs, manifest: &mut RunManifest) -> Result<Outcome> {
    let schema = match &a.schema {
        Some(p) => {
            manifest.input(p)?;
            read_schema(p)?
        }
        None => school_census_schema(),
    };
    let target = match &a.histogram {
        Some(p) => {
            manifest.input(p)?;
            TargetHistogram::from_csv(BufReader::new(File::open(p)?), a.tail_mean)?
        }
        None => school_census_target(a.tail_mean),
    };
    manifest.master_seed = Some(a.seed);
    let fixture = gen_fixture(&schema, &target, a.seed)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let out = |name: &str| a.out_dir.join(name);
    std::fs::write(out("schema.json"), schema.to_json()?)?;
    write_table_csv(&fixture.table, &out("table.csv"))?;
    std::fs::write(out("fixture.json"), fixture.sidecar_json()?)?;
    let mut written = vec![out("schema.json"), out("table.csv"), out("fixture.json")];
    if !a.no_microdata {
        let mut w = create(&out("microdata.csv"))?;
        write_microdata(&fixture.table, &mut w)?;
        w.flush()?;
        written.push(out("microdata.csv"));
    }
    let h = fixture.table.histogram(10);
    eprintln!(
        "{} cells, total {}, zero proportion {:.4}",
        fixture.table.num_cells(),
        fixture.table.total(),
        h.proportion(0)
    );
    Ok(Outcome {
        written,
        manifest_dir: Some(a.out_dir.clone()),
    })
}

pub fn dist_pmf(a: &PmfArgs) -> Result<Outcome> {
    let model = count_model(a.family, a.sigma, a.nu)?;
    let pmf = model.pmf_table(a.mu, a.tail_eps)?;
    match &a.out {
        Some(path) => {
            pmf.write_csv(create(path)?)?;
            Ok(Outcome {
                written: vec![path.clone()],
                manifest_dir: None,
            })
        }
        None => {
            pmf.write_csv(io::stdout().lock())?;
            Ok(Outcome::none())
        }
    }
}

