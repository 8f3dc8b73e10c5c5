use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{AlphaPolicy, ScenarioConfig, ScenarioId};
use super::registry::entry;
use crate::dimension::{correlation_dimension, quantile};
use crate::error::{LabError, Result};
use crate::observables::{probe_basis, sample_alpha, BaseObservable, DelayMap, Observable, Probes};
use crate::prediction::{
    aggregate_verdict, default_epsilon_ladder, delta_ladder, exceedance_scan, predictability_verdict, scaling_exponent,
    EmbeddedCloud, EpsilonLadderOptions, ExceedanceCurve, ScalingFit, ScanOptions, Verdict, VerdictRule,
};
use crate::dimension::ScaleLadder;
use crate::slices::{
    default_probe_radii, empirical_lipschitz, geometric_slice, injectivity_probe, pushforward_density_diagnostic,
    pushforward_local_dimension, slice_dimension, DensityOptions,
};
use crate::systems::{SampleOptions, SampledMeasure, System};

pub const SCHEMA: &str = "delaylab.scenario/1";

/// Fraction of observables that must behave as expected.
pub const SUPERMAJORITY: f64 = 7.0 / 8.0;
/// Looser fraction for the rate scenario, whose slope fits are noisier.
pub const RATE_MAJORITY: f64 = 6.0 / 8.0;
/// Allowed shortfall of a fitted exceedance slope below `k − D`.
pub const RATE_TOLERANCE: f64 = 0.2;
/// Allowed distance of local and slice dimensions from their targets.
pub const DIMENSION_TOLERANCE: f64 = 0.15;
/// Exceedance must vanish on at least this many of the smallest scales.
pub const MIN_ZERO_SCALES: usize = 3;
/// Slab centers per slice scenario run and members per slab.
pub const SLICE_CENTERS: usize = 20;
pub const SLICE_MEMBERS: usize = 1500;
/// Sample points for local dimension estimates.
pub const LOCAL_DIM_SAMPLES: usize = 200;
/// Orbit points for the algebraic identity check of the solenoid.
pub const IDENTITY_POINTS: usize = 10_000;

/// Outcome for one observable and one delay dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRun {
    pub alpha_index: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<ExceedanceCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<ScalingFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub metrics: BTreeMap<String, f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AlphaRun {
    fn new(alpha_index: usize, k: usize, alpha_seed: Option<u64>) -> Self {
        Self {
            alpha_index,
            k,
            alpha_seed,
            curves: Vec::new(),
            verdicts: Vec::new(),
            fits: Vec::new(),
            verdict: None,
            metrics: BTreeMap::new(),
            passed: false,
            error: None,
        }
    }

    fn metric(&mut self, name: &str, v: f64) {
        if v.is_finite() {
            self.metrics.insert(name.to_string(), v);
        }
    }

    /// Slope at the smallest δ whose curve could be fitted.
    pub fn small_delta_slope(&self) -> Option<(f64, f64)> {
        self.curves
            .iter()
            .zip(&self.fits)
            .filter_map(|(c, f)| f.slope.map(|s| (c.delta, s)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub schema: String,
    pub id: ScenarioId,
    pub anchor: String,
    pub claim: String,
    pub config: ScenarioConfig,
    pub verdict_rule: VerdictRule,
    pub runs: Vec<AlphaRun>,
    pub diagnostics: BTreeMap<String, f64>,
    pub required: usize,
    pub passed_runs: usize,
    pub passed: bool,
    /// Some runs failed with an error.
    pub partial: bool,
}

/// Timing data kept out of the deterministic result files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema: String,
    pub id: ScenarioId,
    pub finished_unix: u64,
    pub runtime_seconds: f64,
    pub version: String,
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    system: System,
    cloud: SampledMeasure,
    rule: VerdictRule,
}

impl Ctx<'_> {
    fn delay_map(&self, k: usize, i: usize) -> Result<DelayMap> {
        let basis = probe_basis(self.system.dim(), k, self.cfg.observable.degree)?;
        let probes = Probes::for_system(basis, &self.system)?;
        let base = self.cfg.observable.base;
        if let BaseObservable::Coord(c) = base {
            if c >= self.system.dim() {
                return Err(LabError::InvalidParameter(format!("coord_{c} out of range")));
            }
        }
        let h = Observable::new(base, probes);
        let h = match &self.cfg.observable.alpha {
            AlphaPolicy::Fixed { alpha } if alpha.is_empty() => h,
            AlphaPolicy::Fixed { alpha } => h.perturb(alpha)?,
            policy @ AlphaPolicy::Sampled { radius, .. } => {
                let seed = policy.draw_seed(i).expect("sampled policy");
                h.perturb(&sample_alpha(h.alpha().len(), *radius, seed)?)?
            }
        };
        DelayMap::new(h, k, self.system.clone())
    }

    fn perturbed(&self) -> bool {
        match &self.cfg.observable.alpha {
            AlphaPolicy::Fixed { alpha } => alpha.iter().any(|&a| a != 0.0),
            AlphaPolicy::Sampled { .. } => true,
        }
    }

    fn embed(&self, k: usize, i: usize) -> Result<EmbeddedCloud> {
        EmbeddedCloud::embed(&self.cloud, &self.delay_map(k, i)?)
    }

    /// Exceedance curves, per-δ verdicts and fits, stored on `run`.
    fn scan(&self, ec: &EmbeddedCloud, run: &mut AlphaRun) -> Result<()> {
        let ladder = match &self.cfg.epsilons {
            Some(e) => ScaleLadder::new(e.clone())?,
            None => default_epsilon_ladder(ec, EpsilonLadderOptions::default())?,
        };
        let deltas = self.cfg.deltas.clone().unwrap_or_else(|| delta_ladder(ec));
        let curves = exceedance_scan(ec, &deltas, &ladder, ScanOptions { max_queries: self.cfg.max_queries })?;
        run.verdicts = curves.iter().map(|c| predictability_verdict(c, self.rule)).collect();
        run.fits = curves.iter().map(scaling_exponent).collect();
        run.verdict = Some(aggregate_verdict(&run.verdicts));
        run.curves = curves;
        Ok(())
    }
}

/// Run a scenario. Failures of individual observables are recorded and the
/// result is marked partial; configuration errors abort.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let started = Instant::now();
    cfg.validate()?;
    let system = cfg.system.build()?;
    let cloud = system.sample(cfg.n_pairs, cfg.sample_seed, SampleOptions::default())?;
    let ctx = Ctx { cfg, system, cloud, rule: VerdictRule::default() };
    let mut diagnostics = BTreeMap::new();
    let mut global_ok = true;

    match cfg.id {
        ScenarioId::V4 => {
            if let Some(err) = solenoid_identity_error(&ctx)? {
                diagnostics.insert("identity_max_error".into(), err);
                global_ok &= err <= 1e-10;
            }
        }
        ScenarioId::V8 => {
            let d = phase_dimension(&ctx, 0)?;
            diagnostics.insert("phase_dimension".into(), d);
            let need = *cfg.k.iter().max().expect("validated") as f64 + 0.1;
            diagnostics.insert("phase_dimension_floor".into(), need);
            global_ok &= d >= need;
        }
        _ => {}
    }
    let mut slice_bounds = BTreeMap::new();
    if cfg.id == ScenarioId::V5 {
        for &k in &cfg.k {
            let d = phase_dimension(&ctx, k - 1)?;
            diagnostics.insert(format!("phase_dimension_iterate_{}", k - 1), d);
            slice_bounds.insert(k, ctx.system.reference_dimension(k - 1) - k as f64);
        }
    }

    let mut runs = Vec::new();
    for &k in &cfg.k {
        for i in 0..cfg.observable.alpha.count() {
            let mut run = AlphaRun::new(i, k, cfg.observable.alpha.draw_seed(i));
            let outcome = match cfg.id {
                ScenarioId::V1 => run_verdict(&ctx, &mut run, Verdict::Collapses),
                ScenarioId::V2 => run_verdict(&ctx, &mut run, Verdict::BoundedBelow),
                ScenarioId::V3 => run_rate(&ctx, &mut run),
                ScenarioId::V4 => run_counterexample(&ctx, &mut run),
                ScenarioId::V5 => run_slices(&ctx, &mut run, slice_bounds[&k]),
                ScenarioId::V6 => run_density(&ctx, &mut run),
                ScenarioId::V7 => run_local_dimension(&ctx, &mut run),
                ScenarioId::V8 => run_iterate_example(&ctx, &mut run),
            };
            if let Err(e) = outcome {
                run.passed = false;
                run.error = Some(e.to_string());
            }
            runs.push(run);
        }
    }

    let total = runs.len();
    let fraction = match cfg.id {
        ScenarioId::V3 => RATE_MAJORITY,
        ScenarioId::V4 => 1.0,
        _ => SUPERMAJORITY,
    };
    let required = (fraction * total as f64 - 1e-9).ceil() as usize;
    let passed_runs = runs.iter().filter(|r| r.passed).count();
    let e = entry(cfg.id);
    let result = ScenarioResult {
        schema: SCHEMA.into(),
        id: cfg.id,
        anchor: e.anchor.into(),
        claim: e.claim.into(),
        config: cfg.clone(),
        verdict_rule: ctx.rule,
        partial: runs.iter().any(|r| r.error.is_some()),
        runs,
        diagnostics,
        required,
        passed_runs,
        passed: global_ok && total > 0 && passed_runs >= required,
    };
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(&result, dir, started.elapsed().as_secs_f64())?;
    }
    Ok(result)
}

fn run_verdict(ctx: &Ctx, run: &mut AlphaRun, expected: Verdict) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    ctx.scan(&ec, run)?;
    run.passed = run.verdict == Some(expected);
    Ok(())
}

fn probe(ctx: &Ctx, ec: &EmbeddedCloud, run: &mut AlphaRun) -> Result<usize> {
    let (tol_u, sep_x) = default_probe_radii(ec, ctx.system.phase_diameter())?;
    let lip = empirical_lipschitz(ec, 2000, 8)?;
    let report = injectivity_probe(ec, tol_u, sep_x, Some(lip))?;
    run.metric("probe_tol_u", tol_u);
    run.metric("probe_sep_x", sep_x);
    run.metric("lipschitz_empirical", lip);
    run.metric("collisions", report.count as f64);
    run.metric("collision_mass", report.mass_fraction);
    if let Some(m) = report.collisions.iter().map(|c| c.dx).reduce(f64::min) {
        run.metric("min_collision_separation", m);
    }
    Ok(report.count)
}

fn run_rate(ctx: &Ctx, run: &mut AlphaRun) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    ctx.scan(&ec, run)?;
    let collisions = probe(ctx, &ec, run)?;
    let target = run.k as f64 - ctx.system.reference_dimension(0);
    run.metric("rate_target", target);
    match run.small_delta_slope() {
        Some((delta, slope)) => {
            run.metric("slope", slope);
            run.metric("slope_delta", delta);
            run.passed = collisions > 0 && slope >= target - RATE_TOLERANCE;
        }
        None => run.passed = false,
    }
    Ok(())
}

fn run_counterexample(ctx: &Ctx, run: &mut AlphaRun) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    ctx.scan(&ec, run)?;
    let scales = run.curves[0].epsilons.clone();
    // Trailing scales at which every δ has zero exceedance.
    let zero = (0..scales.len())
        .rev()
        .take_while(|&j| run.curves.iter().all(|c| c.fractions[j] == 0.0))
        .count();
    run.metric("zero_scales", zero as f64);
    if zero > 0 {
        run.metric("eps0", scales[scales.len() - zero]);
    }
    let collisions = probe(ctx, &ec, run)?;
    run.passed = zero >= MIN_ZERO_SCALES && collisions > 0;
    Ok(())
}

fn run_slices(ctx: &Ctx, run: &mut AlphaRun, bound: f64) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    let phase = ec.phase().expect("embedded from a phase cloud");
    let centers = crate::dimension::ladder::strided(ec.len(), SLICE_CENTERS);
    let mut dims = Vec::new();
    for &c in &centers {
        let y = ec.u(c).to_vec();
        let radius = ec.index().knn_distances(&y, SLICE_MEMBERS, None).last().copied().unwrap_or(0.0);
        let slice = geometric_slice(&ec, &y, radius)?;
        if let Ok(e) = slice_dimension(&slice, &ctx.system, phase, run.k - 1) {
            dims.push(e.value);
        }
    }
    if dims.len() < 4 {
        return Err(LabError::TooFewSamples { needed: 4, have: dims.len() });
    }
    dims.sort_by(f64::total_cmp);
    let p10 = quantile(&dims, 0.1);
    run.metric("slices", dims.len() as f64);
    run.metric("slice_dim_p10", p10);
    run.metric("slice_dim_median", quantile(&dims, 0.5));
    run.metric("slice_dim_bound", bound);
    run.passed = p10 >= bound - DIMENSION_TOLERANCE;
    Ok(())
}

fn run_density(ctx: &Ctx, run: &mut AlphaRun) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    let report = pushforward_density_diagnostic(&ec, DensityOptions::default())?;
    let expect_density = ctx.perturbed() && (run.k as f64) < ctx.system.reference_dimension(run.k - 1);
    run.metric("tail_slope", report.tail_slope);
    run.metric("growth_slope", report.growth_slope);
    run.metric("expect_divergence", if expect_density { 0.0 } else { 1.0 });
    run.metric("diverges", if report.diverges { 1.0 } else { 0.0 });
    run.passed = report.diverges != expect_density;
    Ok(())
}

fn run_local_dimension(ctx: &Ctx, run: &mut AlphaRun) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    let pairs = pushforward_local_dimension(&ec, LOCAL_DIM_SAMPLES, ctx.cfg.analysis_seed)?;
    if pairs.is_empty() {
        return Err(LabError::TooFewSamples { needed: 1, have: 0 });
    }
    let n = pairs.len() as f64;
    let mean_r = pairs.iter().map(|p| p.reconstruction).sum::<f64>() / n;
    let mean_p = pairs.iter().map(|p| p.phase).sum::<f64>() / n;
    let target = (run.k as f64).min(ctx.system.reference_dimension(0));
    run.metric("points", n);
    run.metric("mean_phase", mean_p);
    run.metric("mean_reconstruction", mean_r);
    run.metric("target", target);
    run.passed = (mean_r - target).abs() <= DIMENSION_TOLERANCE;
    Ok(())
}

fn run_iterate_example(ctx: &Ctx, run: &mut AlphaRun) -> Result<()> {
    let ec = ctx.embed(run.k, run.alpha_index)?;
    ctx.scan(&ec, run)?;
    let report = pushforward_density_diagnostic(&ec, DensityOptions::default())?;
    run.metric("tail_slope", report.tail_slope);
    run.metric("diverges", if report.diverges { 1.0 } else { 0.0 });
    run.passed = run.verdict == Some(Verdict::Collapses) && report.diverges;
    Ok(())
}

/// Correlation dimension of `T^iterate` applied to an `n_points` cloud.
fn phase_dimension(ctx: &Ctx, iterate: usize) -> Result<f64> {
    let mut cloud = ctx.system.sample(ctx.cfg.n_points, ctx.cfg.sample_seed, SampleOptions::default())?;
    if iterate > 0 {
        let n = cloud.dim();
        cloud = cloud.map_points(n, |x, out| {
            let mut p = x.to_vec();
            for _ in 0..iterate {
                p = ctx.system.step(&p)?;
            }
            out.copy_from_slice(&p);
            Ok(())
        })?;
    }
    Ok(correlation_dimension(&cloud, None)?.value)
}

/// Largest violation of `h(Tx) = 2(2h(x)² − 1)² − 1` for `h = cos t` along
/// an orbit, when the configuration is the squared solenoid with that base.
fn solenoid_identity_error(ctx: &Ctx) -> Result<Option<f64>> {
    let squared = matches!(ctx.cfg.system.kind, crate::systems::SystemKind::Solenoid { squared: true });
    if !squared || ctx.cfg.observable.base != BaseObservable::CosAngle {
        return Ok(None);
    }
    let pts = crate::systems::sample_srb(IDENTITY_POINTS, crate::systems::DEFAULT_BURN_IN, ctx.cfg.analysis_seed)?;
    let mut worst: f64 = 0.0;
    for p in pts.points() {
        let h = p[0].cos();
        let next = ctx.system.step(p)?[0].cos();
        let c = 2.0 * h * h - 1.0;
        worst = worst.max((next - (2.0 * c * c - 1.0)).abs());
    }
    Ok(Some(worst))
}

/// `result.json`, per-curve CSV files, `summary.txt`, and a `meta.json`
/// sidecar holding the only non-deterministic fields.
pub fn write_artifacts(result: &ScenarioResult, dir: &Path, runtime_seconds: f64) -> Result<()> {
    fs::create_dir_all(dir.join("curves"))?;
    fs::write(dir.join("result.json"), serde_json::to_string_pretty(result)? + "\n")?;
    for run in &result.runs {
        for (j, c) in run.curves.iter().enumerate() {
            let name = format!("{}_k{}_a{}_d{}.csv", result.id, run.k, run.alpha_index, j);
            fs::write(dir.join("curves").join(name), c.to_csv())?;
        }
    }
    fs::write(dir.join("summary.txt"), summary_text(result))?;
    let meta = RunMeta {
        schema: SCHEMA.into(),
        id: result.id,
        finished_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        runtime_seconds,
        version: env!("CARGO_PKG_VERSION").into(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn summary_text(result: &ScenarioResult) -> String {
    let mut s = format!(
        "scenario {} ({}): {} {}/{} runs, need {}\n{}\n",
        result.id,
        result.anchor,
        if result.passed { "PASS" } else { "FAIL" },
        result.passed_runs,
        result.runs.len(),
        result.required,
        result.claim
    );
    for (name, v) in &result.diagnostics {
        s.push_str(&format!("  {name} = {v:.6}\n"));
    }
    for run in &result.runs {
        s.push_str(&format!(
            "  k={} alpha={} {} verdict={}",
            run.k,
            run.alpha_index,
            if run.passed { "ok" } else { "no" },
            run.verdict.map_or("-".to_string(), |v| format!("{v:?}"))
        ));
        for (name, v) in &run.metrics {
            s.push_str(&format!(" {name}={v:.6}"));
        }
        if let Some(e) = &run.error {
            s.push_str(&format!(" error=\"{e}\""));
        }
        s.push('\n');
    }
    s
}
