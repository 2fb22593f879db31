//! Monte Carlo study drivers. Each (N, replicate) cell derives its randomness
//! from the study seed, so a study is reproducible from its configuration.

use super::config::{ExperimentConfig, ExperimentKind, KlSourceKind, PriorKind};
use super::io;
use crate::error::{Error, Result};
use crate::estimator::{estimate_f, l2_error};
use crate::geometry::NestedRegions;
use crate::likelihood::{mc_transition_kl, mc_transition_kl_many, KlSpec, TransitionSource};
use crate::model::{assouad_family, assouad::AssouadParams, rate_sequences, Bump, DiffusivityField, ScalarField};
use crate::prior::{run_chain, ChainConfig, MaternSpec, Posterior, PosteriorSummary, PriorSpec, WaveletPriorSpec};
use crate::rng::{cell_seed, stream};
use crate::sim::{default_substeps, sample_path, ObservationSet};
use crate::stats::{log_median_slope, mean, median, ols_fit, SlopeFit};
use crate::wavelet::{BasisSpec, WaveletFamily};
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

/// Bootstrap resamples for slope standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord {
    pub n: usize,
    pub replicate: usize,
    /// `‖f̂ - f‖_2`; NaN when the cell failed.
    pub error: f64,
    pub runtime_s: f64,
    /// Study-specific second metric: the contraction fraction for posterior
    /// studies, the corner index for Assouad studies.
    pub aux: f64,
    /// Error of a reference estimator on the same data (least squares in
    /// posterior studies), NaN otherwise.
    pub reference: f64,
    pub failure: Option<String>,
}

impl CellRecord {
    fn failed(n: usize, replicate: usize, runtime_s: f64, e: &Error) -> Self {
        Self { n, replicate, error: f64::NAN, runtime_s, aux: f64::NAN, reference: f64::NAN, failure: Some(e.to_string()) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub median_error: f64,
    /// Median of `aux` (posterior), worst-corner risk (Assouad).
    pub aux: f64,
    /// Average-corner risk (Assouad), median reference error (posterior).
    pub secondary: f64,
    pub successes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KlRow {
    pub epsilon: f64,
    pub n: usize,
    pub mean: f64,
    pub var_sum: f64,
    pub stderr: f64,
    pub var_sum_stderr: f64,
    pub sup_distance: f64,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub cells: Vec<CellRecord>,
    pub summary: Vec<SummaryRow>,
    /// Main log-log slope: median error vs N, or KL mean vs ε.
    pub slope: Option<SlopeFit>,
    /// Secondary slope: worst-case risk vs N, or KL variance vs N.
    pub aux_slope: Option<SlopeFit>,
    pub kl_rows: Vec<KlRow>,
    pub notes: BTreeMap<String, String>,
}

impl StudyResult {
    fn empty() -> Self {
        Self { cells: Vec::new(), summary: Vec::new(), slope: None, aux_slope: None, kl_rows: Vec::new(), notes: BTreeMap::new() }
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.failure.is_some()).count()
    }
}

fn require_grid(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.n_grid.len() < 3 {
        return Err(Error::Config("a slope fit needs at least three sample sizes".into()));
    }
    Ok(())
}

struct Setup {
    regions: NestedRegions,
    family: Arc<WaveletFamily>,
    bases: BTreeMap<usize, Arc<BasisSpec>>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let regions = cfg.regions()?;
    let family = cfg.family()?;
    let mut bases = BTreeMap::new();
    for &n in &cfg.n_grid {
        bases.insert(n, cfg.basis_for(&family, &regions, n)?);
    }
    Ok(Setup { regions, family, bases })
}

fn cells(cfg: &ExperimentConfig, reps: usize) -> Vec<(usize, usize)> {
    cfg.n_grid.iter().flat_map(|&n| (0..reps).map(move |r| (n, r))).collect()
}

fn groups_by_n(cfg: &ExperimentConfig, cells: &[CellRecord], value: impl Fn(&CellRecord) -> f64) -> Vec<Vec<f64>> {
    cfg.n_grid
        .iter()
        .map(|&n| cells.iter().filter(|c| c.n == n && c.failure.is_none()).map(&value).collect())
        .collect()
}

fn median_slope(cfg: &ExperimentConfig, groups: &[Vec<f64>]) -> Option<SlopeFit> {
    let (xs, gs): (Vec<f64>, Vec<Vec<f64>>) = cfg
        .n_grid
        .iter()
        .zip(groups)
        .filter(|(_, g)| !g.is_empty())
        .map(|(&n, g)| (n as f64, g.clone()))
        .unzip();
    (xs.len() >= 3).then(|| log_median_slope(&xs, &gs, BOOTSTRAP_RESAMPLES, cfg.seed))
}

fn estimate_error(
    cfg: &ExperimentConfig,
    f0: &Arc<DiffusivityField>,
    sup: f64,
    basis: &Arc<BasisSpec>,
    n: usize,
    seed: u64,
) -> Result<(f64, ObservationSet)> {
    let sde = cfg.sde(f0.clone(), sup, n, seed)?;
    let obs = sample_path(&sde)?;
    let est = estimate_f(&obs, basis, cfg.truncation())?;
    Ok((l2_error(&est.f_hat_star, f0, &basis.regions.domain, basis.j), obs))
}

/// Simulate, estimate and score every (N, replicate) cell; fit the log-log
/// slope of the median error.
pub fn run_rate_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require_grid(cfg)?;
    let st = setup(cfg)?;
    let f0 = Arc::new(cfg.truth.field());
    let sup = cfg.truth.sup();
    let records: Vec<CellRecord> = cells(cfg, cfg.replicates)
        .into_par_iter()
        .map(|(n, r)| {
            let t = Instant::now();
            let seed = cell_seed(cfg.seed, &[n as u64, r as u64]);
            match estimate_error(cfg, &f0, sup, &st.bases[&n], n, seed) {
                Ok((e, _)) => CellRecord {
                    n,
                    replicate: r,
                    error: e,
                    runtime_s: t.elapsed().as_secs_f64(),
                    aux: f64::NAN,
                    reference: f64::NAN,
                    failure: None,
                },
                Err(e) => CellRecord::failed(n, r, t.elapsed().as_secs_f64(), &e),
            }
        })
        .collect();
    let groups = groups_by_n(cfg, &records, |c| c.error);
    let mut out = StudyResult::empty();
    out.summary = cfg
        .n_grid
        .iter()
        .zip(&groups)
        .map(|(&n, g)| SummaryRow {
            n,
            median_error: if g.is_empty() { f64::NAN } else { median(g) },
            aux: f64::NAN,
            secondary: f64::NAN,
            successes: g.len(),
        })
        .collect();
    out.slope = median_slope(cfg, &groups);
    out.notes.insert("target_slope".into(), format!("{}", -cfg.rate.s / (2.0 * cfg.rate.s + cfg.dim() as f64)));
    out.notes.insert("levels".into(), format!("{:?}", st.bases.iter().map(|(n, b)| (*n, b.j)).collect::<Vec<_>>()));
    out.notes.insert("wavelet_order".into(), st.family.order.to_string());
    out.cells = records;
    Ok(out)
}

/// Worst-case risk of the estimator over random corners of the Assouad
/// hypercube.
pub fn run_assouad_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require_grid(cfg)?;
    let st = setup(cfg)?;
    let d = cfg.dim();
    let (klo, khi) = st.regions.k.bounding_box();
    let (c1, c2) = cfg.assouad.cube.clone().unwrap_or((klo, khi));
    let corners = cfg.assouad.corners.max(1);
    let mut out = StudyResult::empty();
    let mut jobs = Vec::new();
    let mut bounds = Vec::new();
    for &n in &cfg.n_grid {
        let p = AssouadParams {
            s: cfg.rate.s,
            n: n as f64,
            gamma_scale: cfg.assouad.gamma_scale,
            j_scale: cfg.assouad.j_scale,
            norm_bound: cfg.assouad.norm_bound.unwrap_or(f64::INFINITY),
            f_min: cfg.prior.f_min,
        };
        let fam = Arc::new(assouad_family(st.family.clone(), &st.regions, (&c1, &c2), &p)?);
        let lower = 2f64.powf((fam.level as usize * d) as f64) * fam.gamma * fam.gamma;
        bounds.push((n, lower, fam.level, fam.gamma));
        let mut rng = stream(cell_seed(cfg.seed, &[n as u64, 0xA55]), 0);
        for c in 0..corners {
            let signs: Vec<bool> = (0..fam.len()).map(|_| rng.next_u64() & 1 == 1).collect();
            let member = Arc::new(fam.member(&signs)?);
            for r in 0..cfg.replicates {
                jobs.push((n, c, r, member.clone()));
            }
        }
    }
    let sup = 2.0 - 2.0 * cfg.prior.f_min;
    let records: Vec<CellRecord> = jobs
        .into_par_iter()
        .map(|(n, c, r, member)| {
            let t = Instant::now();
            let seed = cell_seed(cfg.seed, &[n as u64, c as u64, r as u64]);
            let replicate = c * cfg.replicates + r;
            match estimate_error(cfg, &member, sup, &st.bases[&n], n, seed) {
                Ok((e, _)) => CellRecord {
                    n,
                    replicate,
                    error: e,
                    runtime_s: t.elapsed().as_secs_f64(),
                    aux: c as f64,
                    reference: f64::NAN,
                    failure: None,
                },
                Err(e) => CellRecord { aux: c as f64, ..CellRecord::failed(n, replicate, t.elapsed().as_secs_f64(), &e) },
            }
        })
        .collect();
    // Risk per corner = mean squared error over replicates.
    let risks = |cells: &[&CellRecord]| -> Vec<f64> {
        (0..corners)
            .filter_map(|c| {
                let e: Vec<f64> = cells.iter().filter(|x| x.aux == c as f64).map(|x| x.error * x.error).collect();
                (!e.is_empty()).then(|| mean(&e))
            })
            .collect()
    };
    let mut worst = Vec::new();
    for &n in &cfg.n_grid {
        let cs: Vec<&CellRecord> = records.iter().filter(|c| c.n == n && c.failure.is_none()).collect();
        let r = risks(&cs);
        let w = r.iter().cloned().fold(f64::NAN, f64::max);
        worst.push(w);
        out.summary.push(SummaryRow {
            n,
            median_error: median(&cs.iter().map(|c| c.error).collect::<Vec<_>>()),
            aux: w,
            secondary: if r.is_empty() { f64::NAN } else { mean(&r) },
            successes: cs.len(),
        });
    }
    let lx: Vec<f64> = cfg.n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = worst.iter().map(|w| w.ln()).collect();
    if ly.iter().all(|v| v.is_finite()) {
        // Bootstrap over replicates within each corner.
        let mut fit = ols_fit(&lx, &ly);
        let mut rng = stream(cfg.seed, 0xB00);
        let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let ys: Vec<f64> = cfg
                .n_grid
                .iter()
                .map(|&n| {
                    (0..corners)
                        .filter_map(|c| {
                            let e: Vec<f64> = records
                                .iter()
                                .filter(|x| x.n == n && x.aux == c as f64 && x.failure.is_none())
                                .map(|x| x.error * x.error)
                                .collect();
                            (!e.is_empty()).then(|| {
                                (0..e.len()).map(|_| e[(rng.next_u64() % e.len() as u64) as usize]).sum::<f64>() / e.len() as f64
                            })
                        })
                        .fold(f64::NAN, f64::max)
                        .ln()
                })
                .collect();
            slopes.push(crate::stats::ols(&lx, &ys).0);
        }
        fit.stderr = crate::stats::variance(&slopes).sqrt();
        out.aux_slope = Some(fit);
    }
    out.slope = median_slope(cfg, &groups_by_n(cfg, &records, |c| c.error));
    for (n, lower, level, gamma) in bounds {
        out.notes.insert(format!("lower_bound_N{n}"), format!("{lower:e} (J = {level}, gamma = {gamma:e})"));
    }
    out.notes.insert("minimax_risk_slope".into(), format!("{}", -2.0 * cfg.rate.s / (2.0 * cfg.rate.s + d as f64)));
    out.cells = records;
    Ok(out)
}

/// Prior for a basis at sample size `n`.
pub fn prior_for(cfg: &ExperimentConfig, basis: &Arc<BasisSpec>) -> Result<PriorSpec> {
    let s = cfg.prior.s.unwrap_or(cfg.rate.s);
    let d = basis.dim();
    Ok(match cfg.prior.kind {
        PriorKind::Wavelet => PriorSpec::Wavelet(WaveletPriorSpec {
            s,
            amplitude: cfg.prior.amplitude.unwrap_or_else(|| 2f64.powf(-(basis.j0 as f64) * d as f64 / 2.0)),
            reference_level: cfg.prior.reference_level.unwrap_or(basis.j0),
            basis: basis.clone(),
        }),
        PriorKind::Matern => {
            let (lower, upper) = basis.regions.domain.bounding_box();
            let per_axis = cfg.prior.matern_nodes.min((crate::prior::MATERN_MAX_POINTS as f64).powf(1.0 / d as f64) as usize);
            PriorSpec::Matern(MaternSpec {
                s,
                lower,
                upper,
                counts: vec![per_axis; d],
                jitter: cfg.prior.jitter,
                amplitude: cfg.prior.amplitude.unwrap_or(1.0),
            })
        }
    })
}

/// Builds the posterior for `obs` and runs the configured chains, pooled.
pub fn posterior_for(
    cfg: &ExperimentConfig,
    obs: &ObservationSet,
    basis: &Arc<BasisSpec>,
    truth: Option<&DiffusivityField>,
    seed: u64,
) -> Result<(Posterior, PosteriorSummary)> {
    let prior = prior_for(cfg, basis)?;
    let eval_nodes =
        cfg.chain.eval_nodes.unwrap_or(if basis.dim() == 1 { (1usize << (basis.j + 4).min(14)) + 1 } else { 65 });
    let post = Posterior::new(obs, &prior, &basis.regions, cfg.prior.f_min, eval_nodes)?;
    let chains = (0..cfg.chain.chains)
        .map(|c| {
            let cc = ChainConfig {
                iters: cfg.chain.iters,
                burn_in: cfg.chain.burn_in,
                thin: cfg.chain.thin,
                beta: cfg.chain.beta,
                adapt: cfg.chain.adapt,
                seed: cell_seed(seed, &[0xC4A1, c as u64]),
            };
            run_chain(&post, &cc, truth)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = PosteriorSummary::pool(&chains)?;
    Ok((post, summary))
}

/// Per cell: simulate, run the pCN chains, record the posterior-mean error,
/// the contraction fraction at `M ξ_N` and the least-squares error.
pub fn run_posterior_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    require_grid(cfg)?;
    let st = setup(cfg)?;
    let f0 = Arc::new(cfg.truth.field());
    let sup = cfg.truth.sup();
    let m = cfg.chain.contraction_m;
    let records: Vec<CellRecord> = cells(cfg, cfg.replicates)
        .into_par_iter()
        .map(|(n, r)| {
            let t = Instant::now();
            let seed = cell_seed(cfg.seed, &[n as u64, r as u64]);
            let basis = &st.bases[&n];
            let run = || -> Result<CellRecord> {
                let xi = rate_sequences(&cfg.rate_params(n.max(2))?)?.xi_n;
                let sde = cfg.sde(f0.clone(), sup, n, seed)?;
                let obs = sample_path(&sde)?;
                let (_, summary) = posterior_for(cfg, &obs, basis, Some(&f0), seed)?;
                let mean_f = DiffusivityField::direct(ScalarField::Grid(summary.mean_field.clone()), cfg.prior.f_min);
                let error = l2_error(&mean_f, &f0, &st.regions.domain, basis.j);
                let frac = crate::prior::contraction_diag(&summary, m, xi)?;
                let lsq = estimate_f(&obs, basis, cfg.truncation())
                    .map(|e| l2_error(&e.f_hat_star, &f0, &st.regions.domain, basis.j))
                    .unwrap_or(f64::NAN);
                Ok(CellRecord {
                    n,
                    replicate: r,
                    error,
                    runtime_s: t.elapsed().as_secs_f64(),
                    aux: frac,
                    reference: lsq,
                    failure: None,
                })
            };
            run().unwrap_or_else(|e| CellRecord::failed(n, r, t.elapsed().as_secs_f64(), &e))
        })
        .collect();
    let groups = groups_by_n(cfg, &records, |c| c.error);
    let fracs = groups_by_n(cfg, &records, |c| c.aux);
    let refs = groups_by_n(cfg, &records, |c| c.reference);
    let mut out = StudyResult::empty();
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let med = |g: &Vec<f64>| if g.is_empty() { f64::NAN } else { median(g) };
        out.summary.push(SummaryRow {
            n,
            median_error: med(&groups[k]),
            aux: med(&fracs[k]),
            secondary: med(&refs[k]),
            successes: groups[k].len(),
        });
    }
    out.slope = median_slope(cfg, &groups);
    out.notes.insert("likelihood".into(), "pseudo-posterior: Gaussian proxy transition density".into());
    out.notes.insert("contraction_m".into(), m.to_string());
    out.cells = records;
    Ok(out)
}

/// KL diagnostics: the per-transition mean over an ε grid and the variance
/// of the summed log-ratio over an N grid.
pub fn run_kl_sweep(cfg: &ExperimentConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let kl = &cfg.kl;
    if kl.epsilons.len() < 3 || kl.n_grid.len() < 3 {
        return Err(Error::Config("the KL sweep needs at least three epsilons and three path lengths".into()));
    }
    let regions = cfg.regions()?;
    let bump = kl.bump.clone().unwrap_or_else(|| {
        let (lo, hi) = regions.domain.bounding_box();
        Bump { center: lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(), radius: 0.2, amplitude: 1.0 }
    });
    let f0 = Arc::new(cfg.truth.field());
    let eps_max = kl.epsilons.iter().cloned().fold(kl.n_epsilon, f64::max);
    let sup = cfg.truth.sup() + eps_max * bump.amplitude.abs();
    let substeps = kl.substeps.unwrap_or_else(|| default_substeps(kl.d_interval, cfg.delta, sup, cfg.sampling.max_dt));
    let source = match kl.source {
        KlSourceKind::Simulated => TransitionSource::Simulated { substeps },
        KlSourceKind::Proxy => TransitionSource::Proxy,
    };
    let fields: Vec<Arc<DiffusivityField>> =
        kl.epsilons.iter().map(|&e| Arc::new(cfg.truth.perturbed(&bump, e).field())).collect();
    let spec = KlSpec { n: kl.eps_transitions, replicates: kl.eps_replicates, source, seed: cell_seed(cfg.seed, &[1]) };
    let est = mc_transition_kl_many(&f0, &fields, kl.d_interval, &regions, &spec)?;
    let mut out = StudyResult::empty();
    for (&e, r) in kl.epsilons.iter().zip(&est) {
        out.kl_rows.push(KlRow {
            epsilon: e,
            n: kl.eps_transitions,
            mean: r.mean,
            var_sum: r.var_sum,
            stderr: r.stderr,
            var_sum_stderr: r.var_sum_stderr,
            sup_distance: r.sup_distance,
        });
    }
    let fe = Arc::new(cfg.truth.perturbed(&bump, kl.n_epsilon).field());
    let n_rows: Vec<KlRow> = kl
        .n_grid
        .iter()
        .map(|&n| {
            let spec = KlSpec { n, replicates: kl.n_replicates, source, seed: cell_seed(cfg.seed, &[2, n as u64]) };
            mc_transition_kl(&f0, &fe, kl.d_interval, &regions, &spec).map(|r| KlRow {
                epsilon: kl.n_epsilon,
                n,
                mean: r.mean,
                var_sum: r.var_sum,
                stderr: r.stderr,
                var_sum_stderr: r.var_sum_stderr,
                sup_distance: r.sup_distance,
            })
        })
        .collect::<Result<_>>()?;
    let log = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    let eps_x: Vec<f64> = kl.epsilons.clone();
    let eps_y: Vec<f64> = out.kl_rows.iter().map(|r| r.mean).collect();
    if eps_y.iter().all(|v| *v > 0.0) {
        out.slope = Some(ols_fit(&log(&eps_x), &log(&eps_y)));
    }
    let nx: Vec<f64> = n_rows.iter().map(|r| r.n as f64).collect();
    let ny: Vec<f64> = n_rows.iter().map(|r| r.var_sum).collect();
    if ny.iter().all(|v| *v > 0.0) {
        out.aux_slope = Some(ols_fit(&log(&nx), &log(&ny)));
    }
    out.kl_rows.extend(n_rows);
    out.notes.insert("likelihood".into(), "proxy KL: the Gaussian proxy stands in for the exact transition density".into());
    out.notes.insert("substeps".into(), substeps.to_string());
    Ok(out)
}

/// Appends the study's CSVs to `dir` and records a manifest with the config
/// hash, content hashes of the inputs and wall-clock runtimes.
pub fn write_study(dir: &Path, cfg: &ExperimentConfig, config_bytes: &[u8], result: &StudyResult, wall_s: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (name, produced) = match cfg.experiment {
        ExperimentKind::RateStudy => {
            io::append_rate_study(&dir.join("rate_study.csv"), &result.cells)?;
            ("rate_study", true)
        }
        ExperimentKind::AssouadStudy => {
            io::append_cells_with_aux(&dir.join("assouad_study.csv"), &result.cells, "corner")?;
            ("assouad_study", true)
        }
        ExperimentKind::Posterior => {
            io::append_cells_with_aux(&dir.join("posterior_study.csv"), &result.cells, "contraction_fraction")?;
            ("posterior_study", true)
        }
        ExperimentKind::KlSweep => {
            io::append_kl_sweep(&dir.join("kl_sweep.csv"), &result.kl_rows)?;
            ("kl_sweep", false)
        }
        _ => return Err(Error::Config("this experiment kind is not a study".into())),
    };
    if produced {
        let rows: Vec<Vec<String>> = result
            .summary
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.median_error.to_string(),
                    r.aux.to_string(),
                    r.secondary.to_string(),
                    r.successes.to_string(),
                ]
            })
            .collect();
        io::append_csv(&dir.join(format!("{name}_summary.csv")), &["N", "median_error", "aux", "secondary", "successes"], &rows)?;
    }
    let canonical = serde_json::to_vec(cfg).map_err(|e| Error::Parse(e.to_string()))?;
    let mut entries = vec![
        ("study".to_string(), name.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("config_sha256".to_string(), io::sha256_hex(&canonical)),
        ("config_file_hash".to_string(), io::content_hash(config_bytes)),
        ("wall_clock_s".to_string(), format!("{wall_s:.3}")),
        ("cell_runtime_total_s".to_string(), format!("{:.3}", result.cells.iter().map(|c| c.runtime_s).sum::<f64>())),
        ("failed_cells".to_string(), result.failures().to_string()),
    ];
    if let Some(s) = &result.slope {
        entries.push(("slope".into(), s.slope.to_string()));
        entries.push(("slope_stderr".into(), s.stderr.to_string()));
    }
    if let Some(s) = &result.aux_slope {
        entries.push(("aux_slope".into(), s.slope.to_string()));
        entries.push(("aux_slope_stderr".into(), s.stderr.to_string()));
    }
    entries.extend(result.notes.iter().map(|(k, v)| (k.clone(), v.clone())));
    io::append_manifest(&dir.join("manifest.csv"), &entries)
}
