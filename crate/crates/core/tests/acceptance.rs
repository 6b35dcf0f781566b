//! One PASS/FAIL line per acceptance criterion; fails if any criterion fails.

use std::time::Instant;

use sg_extrema::gasket::BoundaryKind;
use sg_extrema::oracle::crosscheck_decimation;
use sg_extrema::verify::{run, Suite, SuiteReport, VerifyConfig};

struct Outcome {
    id: usize,
    title: &'static str,
    passed: bool,
    note: String,
}

/// Named checks of a report, all required to pass.
fn checks_pass(report: &SuiteReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for name in names {
        match report.check(name) {
            Some(c) => {
                ok &= c.passed;
                if !c.passed {
                    notes.push(format!("{name} failed: {}", c.detail));
                }
            }
            None => {
                ok = false;
                notes.push(format!("{name} missing"));
            }
        }
    }
    (ok, notes.join("; "))
}

fn prefixed(report: &SuiteReport, prefixes: &[&str]) -> Vec<String> {
    report
        .checks
        .iter()
        .filter(|c| prefixes.iter().any(|p| c.name.starts_with(p)))
        .map(|c| c.name.clone())
        .collect()
}

#[test]
fn acceptance() {
    let cfg = VerifyConfig::default();
    let mut out = Vec::new();

    let t = Instant::now();
    let mut bad = Vec::new();
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
        for m in 1..=3 {
            let rows = crosscheck_decimation(m, kind, 1e-9).unwrap();
            if rows.iter().any(|r| !r.matched) {
                bad.push(format!("{kind} level {m}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.push(Outcome {
        id: 1,
        title: "oracle spectra match decimation, levels 1-3",
        passed: bad.is_empty() && secs < 30.0,
        note: format!("{secs:.2}s {}", bad.join(", ")),
    });

    let dec = run(Suite::Decimation, &cfg).unwrap();
    let (ok, note) = checks_pass(&dec, &["psi_functional_equation", "psi_inverse_round_trip"]);
    let note = format!(
        "{} {}",
        dec.check("psi_functional_equation").map_or(String::new(), |c| c.detail.to_string()),
        note
    );
    out.push(Outcome { id: 2, title: "psi functional equation and inverse", passed: ok, note });

    let small = run(Suite::SmallEigenvalues, &cfg).unwrap();
    let (ok, note) = checks_pass(
        &small,
        &["count_in_0_1", "count_matches_region", "subtriangle_plateau_in_cell", "flagged_fraction"],
    );
    let flagged = small.check("flagged_fraction").map_or(String::new(), |c| c.detail.to_string());
    out.push(Outcome { id: 3, title: "small eigenvalues: count in {0,1}, region test", passed: ok, note: format!("{flagged} {note}") });

    let t = Instant::now();
    let branch = run(Suite::BranchFunctions, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let names = prefixed(&branch, &["bracket_", "eigenvalue_range_", "cell_floor_"]);
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let (ok, note) = checks_pass(&branch, &names);
    out.push(Outcome {
        id: 4,
        title: "branch functions: 3^(n-1) <= N <= 4 3^n, n = 1..6",
        passed: ok && names.len() == 18 && secs < 120.0,
        note: format!("{secs:.1}s {note}"),
    });

    let growth = run(Suite::Growth, &cfg).unwrap();
    let (ok, note) = checks_pass(&growth, &["growth_bracket", "zero_count_cases"]);
    let tight = growth.check("growth_bracket").map_or(Default::default(), |c| c.detail["tightest_c"].clone());
    out.push(Outcome {
        id: 5,
        title: "two-sided growth bracket over the spectrum",
        passed: ok,
        note: format!("tightest C {tight} {note}"),
    });

    let mut ok6 = true;
    let mut notes = Vec::new();
    for (rep, prefix) in [(&small, "small"), (&branch, "branch"), (&growth, "growth")] {
        let name = format!("{prefix}_discrete_agreement");
        let (ok, note) = checks_pass(rep, &[name.as_str()]);
        ok6 &= ok;
        let d = rep.check(&name).map(|c| c.detail.clone()).unwrap_or_default();
        notes.push(format!("{prefix}: {}/{} {note}", d["mismatches"], d["compared"]));
    }
    out.push(Outcome { id: 6, title: "exact and grid counts agree", passed: ok6, note: notes.join(", ") });

    let gg = run(Suite::GaussGreen, &cfg).unwrap();
    let (ok, note) = checks_pass(&gg, &["derivative_matching", "zero_criterion", "perturbed_nonzero"]);
    out.push(Outcome { id: 7, title: "normal derivative identities", passed: ok, note });

    let prelocalized = run(Suite::Prelocalized, &cfg).unwrap();
    out.push(Outcome {
        id: 8,
        title: "pre-localized sums",
        passed: prelocalized.passed && prelocalized.checks.len() == 5,
        note: checks_pass(&prelocalized, &["prelocalized_exists"]).1,
    });

    let mut ok9 = true;
    let mut sets = 0;
    for (rep, prefix) in [(&small, "small"), (&branch, "branch"), (&growth, "growth")] {
        let name = format!("{prefix}_signs");
        ok9 &= checks_pass(rep, &[name.as_str()]).0;
        sets += rep.check(&name).and_then(|c| c.detail["sets"].as_u64()).unwrap_or(0);
    }
    out.push(Outcome { id: 9, title: "maxima positive, minima negative", passed: ok9, note: format!("{sets} sets") });

    let partition = run(Suite::Partition, &cfg).unwrap();
    let (ok, note) = checks_pass(&partition, &["partition_equal", "partition_unequal"]);
    out.push(Outcome { id: 10, title: "word partition by cell size", passed: ok, note });

    let proj = run(Suite::Projective, &cfg).unwrap();
    out.push(Outcome {
        id: 11,
        title: "projective transfer maps and preimages",
        passed: proj.passed,
        note: proj.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>().join(", "),
    });

    for o in &out {
        println!(
            "criterion {:>2} {} {}{}",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.title,
            if o.note.trim().is_empty() { String::new() } else { format!(" [{}]", o.note.trim()) }
        );
    }
    let failed: Vec<usize> = out.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
