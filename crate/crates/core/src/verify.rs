//! Seeded verification suites: each runs one family of checks and returns a
//! machine-readable report.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::decimation::{constants, phi_branch, psi, psi_inverse, psi_with_tol, PSI_TOL, BranchWord, Series, Sign};
use crate::eigenfunction::{gauss_green_residual, EigenFn};
use crate::error::{Error, Result};
use crate::extrema::{count_discrete, count_exact, CountReport, ExtremaOptions, ExtremeKind, Locus};
use crate::gasket::{vertex_of, BoundaryKind, VertexId, Word};
use crate::oracle::{crosscheck_decimation, find_prelocalized, prelocalized_sum, sample_series};
use crate::projective::{apply_p, apply_p_proj, lift, p_matrix, project, RP2Point};
use crate::regions::{classify, classify_triple, preimage_classify, sample_points, scale, RegionClass};
use crate::spectrum::{enumerate_spectrum, theta_partition};

/// Verification suites; `name` is the command-line identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Decimation,
    SmallEigenvalues,
    BranchFunctions,
    Growth,
    Partition,
    Prelocalized,
    SmallInterior,
    Signs,
    GaussGreen,
    Projective,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Decimation,
        Suite::SmallEigenvalues,
        Suite::BranchFunctions,
        Suite::Growth,
        Suite::Partition,
        Suite::Prelocalized,
        Suite::SmallInterior,
        Suite::Signs,
        Suite::GaussGreen,
        Suite::Projective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Decimation => "decimation",
            Suite::SmallEigenvalues => "thm34",
            Suite::BranchFunctions => "thm35",
            Suite::Growth => "thm1",
            Suite::Partition => "prop13",
            Suite::Prelocalized => "prop14",
            Suite::SmallInterior => "conditionA",
            Suite::Signs => "signs",
            Suite::GaussGreen => "gaussgreen",
            Suite::Projective => "projective",
        }
    }
}

impl Serialize for Suite {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub seed: u64,
    pub eig_tol: f64,
    /// Stopping tolerance of the series behind `psi` in the decimation suite.
    pub psi_tol: f64,
    pub extrema: ExtremaOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 20240611, eig_tol: 1e-8, psi_tol: PSI_TOL, extrema: ExtremaOptions::default() }
    }
}

pub fn run(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Decimation => decimation(cfg)?,
        Suite::SmallEigenvalues => small_eigenvalues(cfg)?,
        Suite::BranchFunctions => branch_functions(cfg)?,
        Suite::Growth => growth(cfg)?,
        Suite::Partition => partition()?,
        Suite::Prelocalized => prelocalized(cfg)?,
        Suite::SmallInterior => small_interior(cfg)?,
        Suite::Signs => signs(cfg)?,
        Suite::GaussGreen => gauss_green(cfg)?,
        Suite::Projective => projective(cfg)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { suite, seed: cfg.seed, passed, checks })
}

fn check(name: &str, passed: bool, detail: Value) -> Check {
    Check { name: name.to_string(), passed, detail }
}

fn gaussian3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// Branch word of length `n` with random signs and a final `+`.
pub fn random_eps(rng: &mut ChaCha8Rng, n: usize) -> BranchWord {
    let mut signs: Vec<Sign> = (0..n).map(|_| if rng.gen() { Sign::Plus } else { Sign::Minus }).collect();
    if let Some(last) = signs.last_mut() {
        *last = Sign::Plus;
    }
    BranchWord::new(signs).expect("word ends in plus")
}

/// Sets whose value has the wrong sign for their kind.
pub fn sign_violations(rep: &CountReport) -> usize {
    rep.sets
        .iter()
        .filter(|s| match s.kind {
            ExtremeKind::Max => !(s.value > 0.0),
            ExtremeKind::Min => !(s.value < 0.0),
        })
        .count()
}

/// Finest grid tried when diagnosing a disagreement.
pub const REFINE_LEVEL: usize = 12;

/// Running totals shared by the counting suites.
#[derive(Debug, Default, Clone, Serialize)]
pub struct Tally {
    pub functions: usize,
    pub flagged: usize,
    pub discrete_compared: usize,
    /// Disagreements at level `small_level + 6`.
    pub discrete_mismatches: usize,
    /// Of those, disagreements still present at `REFINE_LEVEL`.
    pub persistent_mismatches: usize,
    pub sets_checked: usize,
    pub sign_violations: usize,
    pub witnesses: Vec<Value>,
}

impl Tally {
    /// Records a report. The discrete count at `small_level + 6` is compared
    /// when the report carries no fragile classification. A disagreement is
    /// then re-examined on finer grids to tell mesh effects (an extremum
    /// closer to `V_0` than the mesh) from real ones; it stays a mismatch.
    fn record(&mut self, f: &EigenFn, rep: &CountReport, label: Value) -> Result<()> {
        self.functions += 1;
        self.sets_checked += rep.sets.len();
        let bad = sign_violations(rep);
        self.sign_violations += bad;
        if bad > 0 && self.witnesses.len() < 5 {
            self.witnesses.push(json!({"sign": label.clone()}));
        }
        if rep.near_boundary() {
            self.flagged += 1;
            return Ok(());
        }
        let base = f.small_level() + 6;
        let d = count_discrete(&f.extend(base)?, 1e-12);
        self.discrete_compared += 1;
        if d.count == rep.count {
            return Ok(());
        }
        self.discrete_mismatches += 1;
        let mut agrees_at = None;
        for level in base + 1..=REFINE_LEVEL.max(base) {
            if count_discrete(&f.extend(level)?, 1e-12).count == rep.count {
                agrees_at = Some(level);
                break;
            }
        }
        if agrees_at.is_none() {
            self.persistent_mismatches += 1;
        }
        if self.witnesses.len() < 5 {
            self.witnesses.push(json!({
                "function": label,
                "exact": rep.count,
                "grid": d.count,
                "grid_level": base,
                "agrees_from_level": agrees_at,
            }));
        }
        Ok(())
    }

    fn checks(&self, prefix: &str) -> Vec<Check> {
        vec![
            check(
                &format!("{prefix}_discrete_agreement"),
                self.discrete_mismatches == 0,
                json!({
                    "compared": self.discrete_compared,
                    "mismatches": self.discrete_mismatches,
                    "persistent": self.persistent_mismatches,
                    "witnesses": self.witnesses,
                }),
            ),
            check(
                &format!("{prefix}_signs"),
                self.sign_violations == 0,
                json!({"sets": self.sets_checked, "violations": self.sign_violations}),
            ),
        ]
    }
}

fn decimation(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
        for m in 1..=4 {
            let rows = crosscheck_decimation(m, kind, cfg.eig_tol)?;
            let bad: Vec<f64> = rows.iter().filter(|r| !r.matched).map(|r| r.lambda_m).collect();
            out.push(check(
                &format!("spectrum_{kind}_{m}"),
                bad.is_empty(),
                json!({"clusters": rows.len(), "unmatched": bad}),
            ));
        }
    }
    let mut worst = 0.0f64;
    for k in 1..=100 {
        let x = 6.0 * k as f64 / 101.0;
        let lhs = 5.0 * psi_with_tol(phi_branch(Sign::Minus, x)?, cfg.psi_tol)?;
        worst = worst.max((lhs - psi_with_tol(x, cfg.psi_tol)?).abs());
    }
    out.push(check("psi_functional_equation", worst <= 1e-11, json!({"max_error": worst})));
    let mut worst = 0.0f64;
    for k in 1..=100 {
        let x = 6.0 * k as f64 / 101.0;
        worst = worst.max((psi_inverse(psi(x)?)? - x).abs());
    }
    out.push(check("psi_inverse_round_trip", worst <= 1e-9, json!({"max_error": worst})));
    Ok(out)
}

/// Whether every point of a grid locus lies in cell `i` away from `F_i V_0`.
fn strictly_inside_cell(locus: &Locus, i: u8) -> bool {
    let points: Vec<VertexId> = match locus {
        Locus::Vertex(v) => vec![*v],
        Locus::CellTriangle(w) => vec![vertex_of(&w.child(1), 2), vertex_of(&w.child(2), 3), vertex_of(&w.child(3), 1)],
        Locus::Plateau(vs) => vs.clone(),
        Locus::CellLimit(_) => return false,
    };
    let corner = Word::new(vec![i]).expect("corner word");
    let excluded: Vec<VertexId> = (1..=3).map(|j| vertex_of(&corner, j).canonical()).collect();
    points.iter().all(|v| {
        let half = 1u64 << v.level;
        2 * v.bary[i as usize - 1] as u64 >= half && !excluded.contains(&v.canonical())
    })
}

/// Random `(lambda, a)` with `lambda` uniform in `(lo, hi) * lambda_1^D`:
/// counts in `{0, 1}`, agreement with the region test, and for sub-triangle
/// classifications the grid plateau inside the predicted cell.
fn small_family(cfg: &VerifyConfig, samples: usize, lo: f64, hi: f64, cells: bool, tally: &mut Tally) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x34);
    let l1 = constants().lambda1_dirichlet;
    let (mut outside01, mut disagree, mut cell_checked, mut cell_bad) = (0, 0, 0, 0);
    let mut witnesses = Vec::new();
    for _ in 0..samples {
        let lam = loop {
            let t: f64 = rng.gen_range(lo..hi);
            if t > 0.0 {
                break t * l1;
            }
        };
        let a = gaussian3(&mut rng);
        let f = EigenFn::small(lam, a)?;
        let rep = count_exact(&f, &cfg.extrema)?;
        tally.record(&f, &rep, json!({"lambda": lam, "a": a}))?;
        if rep.near_boundary() {
            continue;
        }
        let cl = classify_triple(f.lambda_at(0), a, cfg.extrema.region_tol)?;
        if rep.count > 1 {
            outside01 += 1;
        }
        if rep.count != usize::from(cl.class.is_interior()) {
            disagree += 1;
            if witnesses.len() < 5 {
                witnesses.push(json!({"lambda": lam, "a": a, "count": rep.count, "class": cl.class}));
            }
        }
        if let (true, RegionClass::SubTriangleG(i)) = (cells, cl.class) {
            cell_checked += 1;
            let d = count_discrete(&f.extend(10)?, cfg.extrema.tie_tol);
            if d.count != 1 || !strictly_inside_cell(&d.sets[0].locus, i) {
                cell_bad += 1;
                if witnesses.len() < 5 {
                    witnesses.push(json!({"lambda": lam, "a": a, "cell": i, "grid": d.to_json()}));
                }
            }
        }
    }
    let mut out = vec![
        check("count_in_0_1", outside01 == 0, json!({"samples": samples, "violations": outside01})),
        check("count_matches_region", disagree == 0, json!({"disagreements": disagree, "witnesses": witnesses})),
    ];
    if cells {
        out.push(check("subtriangle_plateau_in_cell", cell_bad == 0, json!({"checked": cell_checked, "failures": cell_bad})));
    }
    let frac = tally.flagged as f64 / samples as f64;
    out.push(check("flagged_fraction", frac < 0.01, json!({"flagged": tally.flagged, "fraction": frac})));
    Ok(out)
}

fn small_tally(cfg: &VerifyConfig) -> Result<(Vec<Check>, Tally)> {
    let mut tally = Tally::default();
    let checks = small_family(cfg, 1000, 0.0, 1.0, true, &mut tally)?;
    Ok((checks, tally))
}

fn small_eigenvalues(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let (mut checks, tally) = small_tally(cfg)?;
    checks.extend(tally.checks("small"));
    Ok(checks)
}

fn small_interior(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut tally = Tally::default();
    let mut checks = small_family(cfg, 1000, 0.01, 0.99, false, &mut tally)?;
    checks.extend(tally.checks("interior"));
    Ok(checks)
}

fn branch_tally(cfg: &VerifyConfig) -> Result<(Vec<Check>, Tally)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x35);
    let c = constants();
    let mut tally = Tally::default();
    let mut out = Vec::new();
    for n in 1..=6usize {
        let (lo, hi) = (3usize.pow(n as u32 - 1), 4 * 3usize.pow(n as u32));
        let (mut counts, mut bracket_bad, mut lambda_bad, mut floor_bad) = (Vec::new(), 0, 0, 0);
        for _ in 0..20 {
            let eps = random_eps(&mut rng, n);
            let lambda0 = loop {
                let x: f64 = rng.gen_range(0.0..6.0);
                if x > 0.0 {
                    break x;
                }
            };
            let a = gaussian3(&mut rng);
            let f = EigenFn::u_eps(lambda0, eps.clone(), a)?;
            let rep = count_exact(&f, &cfg.extrema)?;
            tally.record(&f, &rep, json!({"lambda0": lambda0, "eps": eps, "a": a}))?;
            counts.push(rep.count);
            if rep.count < lo || rep.count > hi {
                bracket_bad += 1;
            }
            let p5 = 5f64.powi(n as i32);
            if !(p5 * c.psi3 < f.lambda && f.lambda < p5 * c.psi5) {
                lambda_bad += 1;
            }
            for w in Word::all_of_length(n - 1) {
                let cell = count_exact(&f.restrict_to_cell(&w)?, &cfg.extrema)?;
                if cell.count < 1 {
                    floor_bad += 1;
                }
            }
        }
        out.push(check(
            &format!("bracket_n{n}"),
            bracket_bad == 0,
            json!({"lower": lo, "upper": hi, "min": counts.iter().min(), "max": counts.iter().max(), "violations": bracket_bad}),
        ));
        out.push(check(&format!("eigenvalue_range_n{n}"), lambda_bad == 0, json!({"violations": lambda_bad})));
        out.push(check(&format!("cell_floor_n{n}"), floor_bad == 0, json!({"violations": floor_bad})));
    }
    Ok((out, tally))
}

fn branch_functions(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let (mut checks, tally) = branch_tally(cfg)?;
    checks.extend(tally.checks("branch"));
    Ok(checks)
}

/// Bracket `(lower, upper)` on `N(u)` for an eigenvalue with the given series data.
pub fn growth_bracket(series: Series, eps_empty: bool, lambda: f64) -> (f64, f64) {
    let c = constants();
    let h = c.d_s / 2.0;
    let r = lambda.powf(h);
    if !eps_empty {
        let lower = c.psi5.powf(-h) / 3.0 * r;
        let upper = (4.0 * c.psi3.powf(-h) + c.psi2.powf(-h)) * r;
        return (lower, upper);
    }
    match series {
        Series::D2 => (1.0, 6.0),
        Series::N0 | Series::N6Prime => (0.0, 0.0),
        Series::D5 | Series::N5 | Series::Generic => (c.psi5.powf(-h) / 3.0 * r, 4.0 * c.psi2.powf(-h) * r),
        Series::D6 | Series::N6 => (c.psi5.powf(-h) / 9.0 * r, 4.0 * c.psi2.powf(-h) * r),
    }
}

/// Whether every level-`small_level` cell carries a nonzero corner value.
fn full_support(f: &EigenFn) -> Result<bool> {
    let n = f.small_level();
    let g = f.extend(n)?;
    let norm = g.sup_norm();
    Ok(g.graph.cells(n).iter().all(|c| c.iter().any(|&v| g.values[v as usize].abs() >= 1e-9 * norm)))
}

fn growth_tally(cfg: &VerifyConfig) -> Result<(Vec<Check>, Tally)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x11);
    let c = constants();
    let x_max = 5f64.powi(5) * c.psi5;
    let h = c.d_s / 2.0;
    let mut tally = Tally::default();
    let (mut eigenvalues, mut violations, mut rejected, mut zero_bad) = (0, Vec::new(), 0, 0);
    let mut tight = 0.0f64;
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
        for e in enumerate_spectrum(kind, x_max)? {
            eigenvalues += 1;
            if e.series == Series::N0 {
                let f = sample_series(e.series, e.m0, e.eps.clone(), &mut rng)?;
                if count_exact(&f, &cfg.extrema)?.count != 0 {
                    zero_bad += 1;
                }
                continue;
            }
            let (lo, hi) = growth_bracket(e.series, e.eps.is_empty(), e.lambda);
            let mut taken = 0;
            while taken < 5 {
                let f = sample_series(e.series, e.m0, e.eps.clone(), &mut rng)?;
                if !full_support(&f)? {
                    rejected += 1;
                    if rejected > 1000 {
                        return Err(Error::Invalid("too many samples without full support".into()));
                    }
                    continue;
                }
                taken += 1;
                let rep = count_exact(&f, &cfg.extrema)?;
                let label = json!({"series": e.series, "m0": e.m0, "eps": e.eps, "lambda": e.lambda});
                tally.record(&f, &rep, label.clone())?;
                let n = rep.count as f64;
                if e.series == Series::N6Prime && e.eps.is_empty() {
                    if rep.count != 0 {
                        zero_bad += 1;
                    }
                    continue;
                }
                if n < lo || n > hi {
                    violations.push(json!({"case": label, "count": rep.count, "lower": lo, "upper": hi}));
                }
                let r = e.lambda.powf(h);
                tight = tight.max(n / r).max(r / n);
            }
        }
    }
    let out = vec![
        check(
            "growth_bracket",
            violations.is_empty(),
            json!({"eigenvalues": eigenvalues, "violations": violations, "tightest_c": tight, "rejected": rejected}),
        ),
        check("zero_count_cases", zero_bad == 0, json!({"violations": zero_bad})),
    ];
    Ok((out, tally))
}

fn growth(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let (mut checks, tally) = growth_tally(cfg)?;
    checks.extend(tally.checks("growth"));
    Ok(checks)
}

fn partition() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let equal = [0.2f64.sqrt(); 3];
    let triples = [("equal", equal), ("unequal", [0.5, 0.4, 0.3])];
    for (name, gammas) in triples {
        let mut failures = Vec::new();
        for k in 0..20 {
            let x = 10f64.powf(6.0 * k as f64 / 19.0);
            let part = theta_partition(x, gammas)?;
            let c = part.check();
            if !(c.prefix_free && c.covering && c.mass_defect <= 1e-12 && c.bounds_hold) {
                failures.push(json!({"x": x, "check": c}));
            }
        }
        out.push(check(&format!("partition_{name}"), failures.is_empty(), json!({"gammas": gammas, "failures": failures})));
    }
    Ok(out)
}

fn prelocalized(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let found = find_prelocalized(2)?;
    let mut out = vec![check("prelocalized_exists", !found.is_empty(), json!({"count": found.len()}))];
    let Some(p) = found.first() else { return Ok(out) };
    for n in 1..=2usize {
        let f = prelocalized_sum(p, n)?;
        let rep = count_exact(&f, &cfg.extrema)?;
        let bound = 3usize.pow(n as u32);
        out.push(check(
            &format!("count_n{n}"),
            rep.count >= bound,
            json!({"lambda_level": p.lambda_m, "count": rep.count, "lower": bound}),
        ));
        let boundary = f.boundary().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let derivs = f.normal_derivatives()?;
        let d = derivs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        out.push(check(
            &format!("vanishing_n{n}"),
            boundary <= 1e-7 && d <= 1e-7,
            json!({"boundary": boundary, "derivatives": derivs}),
        ));
    }
    Ok(out)
}

fn signs(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, tally) in [("small", small_tally(cfg)?.1), ("branch", branch_tally(cfg)?.1), ("growth", growth_tally(cfg)?.1)] {
        out.push(check(
            &format!("{name}_signs"),
            tally.sign_violations == 0,
            json!({"sets": tally.sets_checked, "violations": tally.sign_violations}),
        ));
    }
    Ok(out)
}

fn gauss_green(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x66);
    let (mut worst_match, mut worst_gg) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.gen_range(0..=3);
        let f = EigenFn::u_eps(rng.gen_range(0.05..5.95), random_eps(&mut rng, n), gaussian3(&mut rng))?;
        let norm = f.extend(f.small_level() + 2)?.sup_norm();
        let cells: Vec<[f64; 3]> = (1..=3u8)
            .map(|i| f.restrict_to_cell(&Word::new(vec![i]).expect("corner")).and_then(|g| g.normal_derivatives()))
            .collect::<Result<_>>()?;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    worst_match = worst_match.max((cells[i][j] + cells[j][i]).abs() / norm);
                }
            }
        }
        worst_gg = worst_gg.max(gauss_green_residual(&f, 9)?.relative_residual);
    }
    let mut zero_worst = 0.0f64;
    let mut perturbed_min = f64::INFINITY;
    for _ in 0..200 {
        let lam = rng.gen_range(0.01..0.99) * constants().lambda1_dirichlet;
        let l0 = psi_inverse(lam)?;
        let (a2, a3): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let i = rng.gen_range(0..3usize);
        let mut a = [0.0; 3];
        a[i] = 2.0 * (a2 + a3) / (4.0 - l0);
        a[(i + 1) % 3] = a2;
        a[(i + 2) % 3] = a3;
        let scale_a = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let a = a.map(|x| x / scale_a);
        let d = EigenFn::small(lam, a)?.normal_derivative(i as u8 + 1)?;
        zero_worst = zero_worst.max(d.abs());
        let mut b = a;
        b[i] += if rng.gen() { 0.1 } else { -0.1 };
        let d = EigenFn::small(lam, b)?.normal_derivative(i as u8 + 1)?;
        perturbed_min = perturbed_min.min(d.abs());
    }
    Ok(vec![
        check("derivative_matching", worst_match <= 1e-6, json!({"max_relative": worst_match})),
        check("zero_criterion", zero_worst < 1e-6, json!({"max_abs": zero_worst})),
        check("perturbed_nonzero", perturbed_min > 1e-3, json!({"min_abs": perturbed_min})),
        check("gauss_green_level9", worst_gg <= 1e-3, json!({"max_relative": worst_gg})),
    ])
}

fn random_alpha(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let a: f64 = rng.gen_range(-2.0..8.0);
        if [2.0, 5.0, 6.0].iter().all(|f| (a - f).abs() > 1e-3) {
            return a;
        }
    }
}

/// Largest deviation between `pi(P x)` and `P(pi x)`, with sum-zero inputs in
/// every tenth sample.
pub fn projective_commutation(rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..samples {
        let alpha = random_alpha(rng);
        let mut x = gaussian3(rng);
        if k % 10 == 0 {
            let m = (x[0] + x[1] + x[2]) / 3.0;
            x = x.map(|v| v - m);
        }
        for i in 1..=3u8 {
            let direct = project(apply_p(i, alpha, x));
            let via = apply_p_proj(i, alpha, &project(x));
            let d = match (direct, via) {
                (RP2Point::Affine(a), RP2Point::Affine(b)) => {
                    (a[0] - b[0]).hypot(a[1] - b[1]) / (1.0 + a[0].hypot(a[1]))
                }
                (p, q) => p.distance(&q),
            };
            worst = worst.max(d);
        }
    }
    worst
}

/// Worst residual of `det(P - mu I)` over the three predicted eigenvalues, and
/// of trace and determinant against their sum and product.
pub fn p_eigen_residual(alpha: f64) -> f64 {
    let m = p_matrix(1, alpha);
    let mus = [1.0, (6.0 - alpha) / ((2.0 - alpha) * (5.0 - alpha)), 1.0 / (5.0 - alpha)];
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let scale = mus.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let mut worst = 0.0f64;
    for mu in mus {
        let mut s = m;
        for (r, row) in s.iter_mut().enumerate() {
            row[r] -= mu;
        }
        worst = worst.max(det(s).abs() / scale.powi(3));
    }
    let trace = m[0][0] + m[1][1] + m[2][2];
    worst = worst.max((trace - mus.iter().sum::<f64>()).abs() / scale);
    worst.max((det(m) - mus.iter().product::<f64>()).abs() / scale.powi(3))
}

/// Closed-form preimage test against the forward image, counting disagreements
/// that are not explained by a fragile forward classification.
pub fn preimage_consistency(alpha: f64, samples: usize, rng: &mut ChaCha8Rng) -> Result<(usize, usize)> {
    let pts = sample_points(rng, samples, scale(alpha));
    let (mut mismatches, mut fragile) = (0, 0);
    for p in pts {
        for i in 1..=3u8 {
            let closed = preimage_classify(alpha, i, &p)?;
            let cl = classify(alpha, &apply_p_proj(i, alpha, &p), crate::regions::REGION_TOL)?;
            if closed != cl.class.is_interior() {
                if cl.near_boundary || cl.class.is_boundary() {
                    fragile += 1;
                } else {
                    mismatches += 1;
                }
            }
        }
    }
    Ok((mismatches, fragile))
}

fn projective(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x41);
    let worst = projective_commutation(&mut rng, 1000);
    let mut out = vec![check("commutation", worst <= 1e-9, json!({"max_error": worst}))];
    let eig = (0..20).map(|k| p_eigen_residual(-1.9 + 0.47 * k as f64)).fold(0.0f64, f64::max);
    out.push(check("p_eigenvalues", eig <= 1e-9, json!({"max_residual": eig})));
    let lift_err = (0..200)
        .map(|_| {
            let x = gaussian3(&mut rng);
            let p = project(x);
            p.distance(&project(lift(&p)))
        })
        .fold(0.0f64, f64::max);
    out.push(check("lift_round_trip", lift_err <= 1e-12, json!({"max_error": lift_err})));
    for (name, lo, hi) in [("regime_0_2", 0.0, 2.0), ("regime_3", 3.0, 3.0), ("regime_3_5", 3.0, 5.0)] {
        let (mut mismatches, mut fragile) = (0, 0);
        for k in 0..4 {
            let alpha = if lo == hi { lo } else { lo + (hi - lo) * (k as f64 + 0.5) / 4.0 };
            let (m, f) = preimage_consistency(alpha, 10_000 / 4, &mut rng)?;
            mismatches += m;
            fragile += f;
        }
        out.push(check(&format!("preimage_{name}"), mismatches == 0, json!({"mismatches": mismatches, "fragile": fragile})));
    }
    Ok(out)
}
