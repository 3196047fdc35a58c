use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cantor_tits::certify::{
    self, assemble_free_pair, check_morse_smale, find_finite_orbit, find_morse_smale, free_group_sanity, solve_invariant_measure,
    verify_certificate, Certificate, MapSpec, MeasureOutcome, MorseSmaleOutcome, ORBIT_BOUND,
};
use cantor_tits::giet::{blow_up, discontinuity_closure, Exactness};
use cantor_tits::rational::{fmt_q, Q};
use cantor_tits::walk::{
    backward_cluster, compatible_depth, delta_sum_statistic, estimate_entropy, estimate_stationary_measure, global_contraction_report, invariance_residual,
};
use serde_json::{json, Value};

use crate::scenario::{Budgets, Instance, Kind, Profile, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Certified,
    Completed,
    Undecided,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Certified | Status::Completed => 0,
            Status::Undecided => 2,
        }
    }
}

pub struct RunOutcome {
    pub status: Status,
    pub verdict: String,
    pub report: Value,
    pub certificates: Vec<(String, Certificate)>,
    /// (file stem, column names, rows).
    pub series: Vec<(String, Vec<String>, Vec<Vec<f64>>)>,
}

fn qs(v: &[Q]) -> Vec<String> {
    v.iter().map(fmt_q).collect()
}

fn words(maps: &[cantor_tits::maps::PAHomeo]) -> Vec<Vec<String>> {
    maps.iter().map(|g| g.label().to_vec()).collect()
}

/// Dispatches a validated scenario. `base` resolves relative paths inside it.
pub fn run_scenario(s: &Scenario, profile: Profile, base: &Path) -> Result<RunOutcome> {
    let inst = s.build()?;
    let b = s.budgets.resolve(profile);
    match s.kind {
        Kind::Simulate => simulate(&inst, &b),
        Kind::CertifyFree => certify_free(&inst, &b),
        Kind::FindMeasure => find_measure(&inst, &b),
        Kind::MorseSmale => morse_smale(s, &inst, &b),
        Kind::GietBlowup => giet_blowup(&inst, &b),
        Kind::Verify => {
            let p = s.certificate.as_ref().expect("validated");
            verify_file(&base.join(p))
        }
    }
}

fn simulate(inst: &Instance, b: &Budgets) -> Result<RunOutcome> {
    let model = inst.model()?;
    let k = model.space();
    let mu = estimate_stationary_measure(model, b.steps, b.depth, 4)?;
    let residual = invariance_residual(&mu, model)?;
    let (entropy_depth, _) = compatible_depth(k, model.gens(), b.depth);
    let entropy = estimate_entropy(&mu, model, entropy_depth)?;
    let reports = (0..b.runs)
        .map(|r| global_contraction_report(&mut model.run(r as u64), b.depth, b.n, &b.eps, b.p_cap))
        .collect::<cantor_tits::Result<Vec<_>>>()?;
    let succeeded = reports.iter().filter(|r| r.succeeded(b.p_cap, 0.05)).count();
    let ends = [k.lo().clone(), k.hi().clone()];
    let delta = delta_sum_statistic(model, &ends, b.n, b.runs)?;
    let backward = backward_cluster(model, k.lo(), b.n, b.runs, &b.eps)?;
    let report = json!({
        "kind": "simulate",
        "generators": model.names(),
        "budgets": b,
        "stationary_measure": mu,
        "invariance_residual": residual,
        "entropy": entropy,
        "global_contraction": { "succeeded": succeeded, "runs": b.runs, "reports": reports },
        "delta_sum": delta,
        "backward_cluster": backward,
    });
    let rows = delta.series.iter().enumerate().map(|(i, v)| vec![(i + 1) as f64, *v]).collect();
    Ok(RunOutcome {
        status: Status::Completed,
        verdict: format!(
            "SIMULATED: contraction in {succeeded}/{} runs, entropy estimate {:.4}",
            b.runs, entropy.h_estimate
        ),
        report,
        certificates: vec![],
        series: vec![("delta_sum".into(), vec!["step".into(), "mean_delta_sum".into()], rows)],
    })
}

fn certify_budgets(b: &Budgets) -> certify::Budgets {
    certify::Budgets { max_len: b.max_len, runs: b.runs, d_max: b.d_max, n_max: b.n_max, p_cap: b.p_cap, ..certify::Budgets::default() }
}

fn certify_free(inst: &Instance, b: &Budgets) -> Result<RunOutcome> {
    let model = inst.model()?;
    let out = assemble_free_pair(model, &b.eps, &certify_budgets(b))?;
    let contraction = out.contraction.as_ref().map(|c| {
        json!({ "run": c.run, "n": c.n, "word": c.g.label(), "A": qs(c.a.points()), "B": qs(c.b.points()) })
    });
    let mut certificates = vec![];
    if let Some(orbit) = &out.finite_orbit {
        let c = find_finite_orbit(model.gens(), &orbit[..1], ORBIT_BOUND)?.expect("orbit was found finite");
        certificates.push(("finite_orbit".to_string(), Certificate::finite_orbit(model.gens(), &c)));
    }
    let Some(pair) = out.certificate else {
        let orbit_note = if out.finite_orbit.is_some() { "; finite orbit found" } else { "" };
        let stage = out.failed_stage.as_ref().map(|s| serde_json::to_value(s).unwrap());
        return Ok(RunOutcome {
            status: Status::Undecided,
            verdict: format!("UNDECIDED within budget: {}{orbit_note}", out.note.clone().unwrap_or_default()),
            report: json!({
                "kind": "certify-free",
                "budgets": b,
                "certified": false,
                "failed_stage": stage,
                "note": out.note,
                "finite_orbit": out.finite_orbit.as_deref().map(qs),
                "contraction": contraction,
            }),
            certificates,
            series: vec![],
        });
    };
    let sanity = free_group_sanity(&pair.a1, &pair.a2, b.sanity_len)?;
    let cert = Certificate::ping_pong(&pair);
    let report = json!({
        "kind": "certify-free",
        "budgets": b,
        "certified": true,
        "a1": pair.a1.label(),
        "a2": pair.a2.label(),
        "contraction": contraction,
        "sanity": sanity,
    });
    certificates.push(("ping_pong".to_string(), cert));
    Ok(RunOutcome { status: Status::Certified, verdict: "FREE (ping-pong verified)".into(), report, certificates, series: vec![] })
}

fn find_measure(inst: &Instance, b: &Budgets) -> Result<RunOutcome> {
    let k = inst.space.as_ref().expect("built space");
    let out = solve_invariant_measure(&inst.gens, b.depth, b.d_max)?;
    let orbit = find_finite_orbit(&inst.gens, &[k.lo().clone()], ORBIT_BOUND)?;
    let mut certificates = vec![("measure".to_string(), Certificate::measure_outcome(&inst.gens, &out))];
    if let Some(o) = &orbit {
        certificates.push(("finite_orbit".to_string(), Certificate::finite_orbit(&inst.gens, o)));
    }
    let (verdict, body) = match &out {
        MeasureOutcome::Certified(c) => (
            format!("INVARIANT MEASURE at depth {} (consistent to depth {})", c.depth, c.consistency_depth),
            json!({ "feasible": true, "depth": c.depth, "measure": c.measure, "consistency_depth": c.consistency_depth, "face": c.face }),
        ),
        MeasureOutcome::Infeasible(c) => (
            format!("NO INVARIANT MEASURE at depth {} (Farkas certificate)", c.depth),
            json!({ "feasible": false, "depth": c.depth, "fine_depth": c.fine_depth }),
        ),
    };
    let report = json!({
        "kind": "find-measure",
        "generators": words(&inst.gens),
        "budgets": b,
        "result": body,
        "finite_orbit": orbit.map(|o| qs(&o.orbit)),
    });
    Ok(RunOutcome { status: Status::Certified, verdict, report, certificates, series: vec![] })
}

fn morse_smale(s: &Scenario, inst: &Instance, b: &Budgets) -> Result<RunOutcome> {
    let found = match &b.map {
        Some(name) => {
            let g = inst.generator(name).expect("validated name");
            let r = s.regions.as_ref().expect("validated regions");
            check_morse_smale(g, &r.a, &r.b)?
        }
        None => match find_morse_smale(inst.model()?, &b.eps, b.n_max, b.runs)? {
            Some(c) => MorseSmaleOutcome::Certified(c),
            None => MorseSmaleOutcome::Rejected("no Morse-Smale word within budget".into()),
        },
    };
    Ok(match found {
        MorseSmaleOutcome::Certified(c) => {
            let periodic = c.periodic.clone();
            RunOutcome {
                status: Status::Certified,
                verdict: format!("MORSE-SMALE element {} verified", c.g.label().join(" ")),
                report: json!({ "kind": "morse-smale", "budgets": b, "certified": true, "word": c.g.label(), "periodic": periodic }),
                certificates: vec![("morse_smale".into(), Certificate::morse_smale(&c))],
                series: vec![],
            }
        }
        MorseSmaleOutcome::Rejected(reason) => RunOutcome {
            status: Status::Undecided,
            verdict: format!("UNDECIDED within budget: {reason}"),
            report: json!({ "kind": "morse-smale", "budgets": b, "certified": false, "reason": reason }),
            certificates: vec![],
            series: vec![],
        },
    })
}

fn giet_blowup(inst: &Instance, b: &Budgets) -> Result<RunOutcome> {
    let closure = discontinuity_closure(&inst.giets, b.level)?;
    let res = blow_up(&inst.giets, b.level, &b.rho)?;
    let k = &res.space;
    let gaps: Vec<(String, String)> = res
        .blown_points
        .iter()
        .map(|(c, _)| (fmt_q(&res.conjugacy.eval_left(c)), fmt_q(&res.conjugacy.eval(c))))
        .collect();
    let orbit = find_finite_orbit(&res.induced, &[k.lo().clone()], ORBIT_BOUND)?;
    let exact = res.exactness == Exactness::Exact;
    let missing = match &res.exactness {
        Exactness::Exact => vec![],
        Exactness::Approximate(v) => qs(v),
    };
    let report = json!({
        "kind": "giet-blowup",
        "budgets": b,
        "closure": { "points": qs(&closure.points), "closed": closure.closed },
        "exact": exact,
        "missing_points": missing,
        "components": k.intervals().len(),
        "space": k.spec(),
        "gaps": gaps,
        "induced": res.induced.iter().map(MapSpec::of).collect::<Vec<_>>(),
        "finite_orbit": orbit.as_ref().map(|o| qs(&o.orbit)),
    });
    let mut certificates = vec![];
    if let Some(o) = &orbit {
        certificates.push(("finite_orbit".to_string(), Certificate::finite_orbit(&res.induced, o)));
    }
    Ok(RunOutcome {
        status: Status::Completed,
        verdict: format!(
            "BLOW-UP {}: |D| = {}, {} components",
            if exact { "exact" } else { "approximate" },
            closure.points.len(),
            k.intervals().len()
        ),
        report,
        certificates,
        series: vec![],
    })
}

/// Re-checks a certificate file.
pub fn verify_file(path: &Path) -> Result<RunOutcome> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cert = Certificate::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let v = verify_certificate(&cert)?;
    let report = json!({ "kind": "verify", "certificate_kind": cert.kind(), "ok": v.ok, "reason": v.reason });
    Ok(if v.ok {
        RunOutcome { status: Status::Certified, verdict: format!("VERIFIED {} certificate", cert.kind()), report, certificates: vec![], series: vec![] }
    } else {
        RunOutcome {
            status: Status::Undecided,
            verdict: format!("REJECTED {} certificate: {}", cert.kind(), v.reason.unwrap_or_default()),
            report,
            certificates: vec![],
            series: vec![],
        }
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn csv_bytes(columns: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string()))?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes report.json, meta.json, certificates and (optionally) series
/// CSVs into `dir`; returns the paths written.
pub fn write_outputs(out: &RunOutcome, dir: &Path, emit_series: bool, meta: &Value) -> Result<Vec<PathBuf>> {
    let mut written = vec![];
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    let mut report = serde_json::to_vec_pretty(&out.report)?;
    report.push(b'\n');
    put("report.json".into(), report)?;
    let mut m = serde_json::to_vec_pretty(meta)?;
    m.push(b'\n');
    put("meta.json".into(), m)?;
    for (name, c) in &out.certificates {
        put(format!("{name}.cert.json"), format!("{}\n", c.to_json()).into_bytes())?;
    }
    if emit_series {
        for (name, cols, rows) in &out.series {
            put(format!("{name}.csv"), csv_bytes(cols, rows)?)?;
        }
    }
    Ok(written)
}

pub fn check_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("{} exists and is not a directory", dir.display());
    }
    Ok(())
}
