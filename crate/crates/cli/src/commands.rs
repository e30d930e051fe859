//! The subcommands. Each returns the process exit code on completion.

use std::fs;
use std::io::Write;
use std::path::Path;

use hopf_dbc::continuation::{write_branch_csv, write_profiles_csv};
use hopf_dbc::dispersion::ScanConfig;
use hopf_dbc::fieldsim::{write_field_csv, write_trajectory_csv};
use hopf_dbc::kinetics::equilibrium;
use hopf_dbc::{
    check_assumptions, classify, continue_branch, cubic_hopf, expansion_coefficients, extract_period, fit_far_field,
    fit_mu2, floquet_numeric, gamma_crit, leading_eigenvalue, mu2_omega2, reconstruct, reduced_coeffs, seed_branch,
    Bvp, ClassifyMethod, Coefficients, Criticality, Cubic, CubicKinetics, Diagram, Error, Grid, Hopf, Point, Stability,
    State,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, StabilityMethod};
use crate::error::CliError;
use crate::io::{self, document, num, read_branch, read_profiles, write_branch, write_header, write_json, BranchRecord};
use crate::svg::branch_diagram;

/// `|mu2|` at or below this counts as degenerate.
const DEGENERATE_TOL: f64 = 1e-10;

fn kinetics(cfg: &RunConfig) -> Result<Cubic, CliError> {
    let k = &cfg.kinetics;
    Ok(CubicKinetics::new(k.alpha, k.beta, k.gamma)?)
}

fn label(cfg: &RunConfig) -> String {
    let k = &cfg.kinetics;
    format!("alpha={} beta={} gamma={} sigma={}", k.alpha, k.beta, k.gamma, cfg.sigma)
}

pub fn hopf(cfg: &RunConfig) -> Result<u8, CliError> {
    let k = kinetics(cfg)?;
    let h = cubic_hopf(&k, cfg.sigma)?;
    let rep = check_assumptions(&h, &k, &ScanConfig::default())?;
    let doc = document(
        "hopf",
        cfg,
        json!({
            "omega_star": h.omega_star,
            "mu_star": h.mu_star,
            "sigma": h.sigma_star,
            "u_star": h.u_star,
            "crossing": h.crossing,
            "assumptions": {
                "root_ok": rep.root_ok,
                "uniqueness_ok": rep.uniqueness_ok,
                "simple_ok": rep.simple_ok,
                "crossing_ok": rep.crossing_ok,
                "root_residual": num(rep.root_residual),
                "min_off_root": num(rep.min_off_root),
            },
        }),
    );
    write_json(cfg.output.out.as_deref(), &doc)?;
    if rep.all_ok() {
        Ok(0)
    } else {
        eprintln!("hopf-dbc: assumption check failed: {rep:?}");
        Ok(4)
    }
}

pub fn expand(cfg: &RunConfig) -> Result<u8, CliError> {
    let k = kinetics(cfg)?;
    let h = cubic_hopf(&k, cfg.sigma)?;
    let c = expansion_coefficients(&k, &h)?;
    let crit = Criticality::of(c.mu2, DEGENERATE_TOL);
    let gc = (cfg.sigma == 0.0).then_some(c.gamma_crit);
    let doc = document(
        "expand",
        cfg,
        json!({
            "omega_star": h.omega_star,
            "mu_star": h.mu_star,
            "sigma": cfg.sigma,
            "mu2": c.mu2,
            "omega2": c.omega2,
            "uinf2": c.uinf2,
            "gamma_crit": gc,
            "v20": c.v20,
            "v22_re": c.v22.re,
            "v22_im": c.v22.im,
            "criticality": crit.as_str(),
        }),
    );
    write_json(cfg.output.out.as_deref(), &doc)?;
    Ok(0)
}

/// Seeds and continues the branch of `cfg`, stopping after `max_points`.
fn run_branch(cfg: &RunConfig, k: &Cubic, max_points: usize, ds_max: Option<f64>) -> Result<(Hopf, Coefficients, Diagram), CliError> {
    let h = cubic_hopf(k, cfg.sigma)?;
    let c = expansion_coefficients(k, &h)?;
    let bvp = Bvp::new(k, Grid::new(cfg.grid_n)?);
    let seeds = seed_branch(&bvp, &h, &c, cfg.seeds.r0, cfg.seeds.r1, &cfg.continuation.newton)?;
    let mut settings = cfg.continuation;
    settings.max_points = max_points;
    if let Some(d) = ds_max {
        settings.ds_max = d;
        settings.ds0 = settings.ds0.min(d);
    }
    let br = continue_branch(&bvp, seeds, &settings)?;
    Ok((h, c, br))
}

pub fn cont(cfg: &RunConfig) -> Result<u8, CliError> {
    let k = kinetics(cfg)?;
    let (h, c, br) = run_branch(cfg, &k, cfg.continuation.max_points, None)?;
    let mut w = io::sink(cfg.output.out.as_deref())?;
    write_header(&mut *w, cfg)?;
    write_branch_csv(&mut *w, &br)?;
    w.flush()?;
    if let Some(p) = &cfg.output.profiles {
        let mut w = io::sink(Some(p))?;
        write_header(&mut *w, cfg)?;
        write_profiles_csv(&mut *w, &br)?;
        w.flush()?;
    }
    if let Some(p) = &cfg.output.svg {
        let pts: Vec<(f64, f64)> = br.points.iter().map(|p| (p.mu, p.r)).collect();
        let mut text = format!("<!-- config_sha256={} -->\n", cfg.hash());
        text.push_str(&branch_diagram(&pts, h.mu_star, c.mu2, &label(cfg)));
        fs::write(p, text)?;
    }
    eprintln!("hopf-dbc: {} branch points, termination {}", br.points.len(), br.termination);
    Ok(0)
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Branch point rebuilt from a CSV row and, if present, its stored profile.
fn point_from_row(cfg: &RunConfig, row: &BranchRecord, profile: Option<&[f64]>) -> Result<Point, CliError> {
    let profile = match profile {
        Some(v) => Grid::new(v.len())?.profile(v.to_vec())?,
        None => Grid::new(4)?.zero_profile(),
    };
    let st = State { profile, omega: row.omega, mu: row.mu, sigma: cfg.sigma };
    let u_star = row.u_inf - st.profile.mean();
    let mut p = Point::from_state(&st, u_star, row.newton_iters, row.residual);
    p.r = row.r;
    Ok(p)
}

pub fn stability(cfg: &RunConfig) -> Result<u8, CliError> {
    let path = cfg
        .output
        .branch
        .as_deref()
        .ok_or_else(|| CliError::Config("stability needs a branch file (--branch)".into()))?;
    let mut rows = read_branch(path)?;
    let profiles = match &cfg.output.profiles {
        Some(p) => {
            let v = read_profiles(p)?;
            if v.len() != rows.len() {
                return Err(CliError::Config(format!(
                    "{} has {} profiles for {} branch points",
                    p.display(),
                    v.len(),
                    rows.len()
                )));
            }
            Some(v)
        }
        None => None,
    };
    let k = kinetics(cfg)?;
    let st = &cfg.stability;
    if st.method == StabilityMethod::Numeric && profiles.is_none() {
        return Err(CliError::Config("numeric stability needs the profile sidecar (--profiles)".into()));
    }
    let closed_rate = leading_eigenvalue(&reduced_coeffs(k.alpha, k.beta, k.gamma));
    // The expansion only describes the stretch leaving the Hopf point.
    let onset_end = rows.windows(2).position(|w| w[1].r <= w[0].r).map_or(rows.len(), |i| i + 1);
    let mut unresolved = 0usize;
    for (i, row) in rows.iter_mut().enumerate() {
        let prof = profiles.as_ref().map(|v| v[i].as_slice());
        let near_onset = i < onset_end && row.r <= st.closed_form_r_max;
        let numeric = match st.method {
            StabilityMethod::ClosedForm => false,
            StabilityMethod::Numeric => true,
            StabilityMethod::Auto => !near_onset,
        };
        let (label, lambda1) = if !numeric && near_onset {
            let p = point_from_row(cfg, row, None)?;
            classify(&p, ClassifyMethod::ClosedForm(&k), st.resolution)?
        } else if let (true, Some(v), true) = (numeric, prof, cfg.sigma == 0.0) {
            let p = point_from_row(cfg, row, Some(v))?;
            let estimate = closed_rate * row.r * row.r;
            match floquet_numeric(&p, &k, estimate, &st.floquet) {
                Ok(res) => classify(&p, ClassifyMethod::Numeric(&res), st.resolution)?,
                Err(e) => {
                    eprintln!("hopf-dbc: point {}: {e}", row.index);
                    unresolved += 1;
                    (Stability::Unknown, None)
                }
            }
        } else {
            unresolved += 1;
            (Stability::Unknown, None)
        };
        row.stability = label.as_str().to_string();
        row.lambda1 = lambda1;
    }
    let mut w = io::sink(cfg.output.out.as_deref())?;
    write_header(&mut *w, cfg)?;
    writeln!(w, "# source_sha256={}", file_sha256(path)?)?;
    write_branch(&mut *w, &rows)?;
    w.flush()?;
    if unresolved > 0 {
        eprintln!("hopf-dbc: {unresolved} points left unknown");
    }
    Ok(0)
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<u8, CliError> {
    let k = kinetics(cfg)?;
    let sim = &cfg.simulate;
    let (cells, _) = sim.settings.sizes();
    let dx = sim.settings.depth / cells as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise: Vec<f64> = (0..=cells)
        .map(|_| if sim.init_noise > 0.0 { sim.init_noise * rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let a = sim.init_amplitude;
    let bulk0 = |x: f64| {
        let j = ((x / dx).round() as usize).min(cells);
        a * (-x).exp() + noise[j]
    };
    let tr = hopf_dbc::simulate(&k, sim.mu, cfg.sigma, &sim.settings, a, bulk0)?;
    let mut w = io::sink(cfg.output.out.as_deref())?;
    write_header(&mut *w, cfg)?;
    write_trajectory_csv(&mut *w, &tr)?;
    w.flush()?;
    let last = tr.u_minus.last().copied().unwrap_or(0.0);
    let body = match extract_period(&tr.t, &tr.u_minus, sim.amp_tol) {
        Ok(pe) => json!({
            "mu": sim.mu,
            "oscillating": true,
            "omega": pe.omega,
            "r": pe.r,
            "mean": pe.mean,
            "crossings": pe.crossings,
            "final_u_minus": last,
        }),
        Err(Error::SteadyState) | Err(Error::InsufficientData(_)) => json!({
            "mu": sim.mu,
            "oscillating": false,
            "final_u_minus": last,
        }),
        Err(e) => return Err(e.into()),
    };
    eprintln!("hopf-dbc: {body}");
    if let Some(p) = &cfg.output.summary {
        write_json(Some(p), &document("simulate", cfg, body))?;
    }
    Ok(0)
}

pub fn reconstruct_cmd(cfg: &RunConfig) -> Result<u8, CliError> {
    let k = kinetics(cfg)?;
    let rc = &cfg.reconstruct;
    let (trace, omega, mu, index) = match rc.index {
        None => {
            let u_star = equilibrium(&k, rc.mu, cfg.sigma, 0.0)?;
            let omega = cubic_hopf(&k, cfg.sigma).map(|h| h.omega_star).unwrap_or(1.0);
            (Grid::new(cfg.grid_n)?.sample(|_| u_star), omega, rc.mu, None)
        }
        Some(i) => {
            let p = match (&cfg.output.branch, &cfg.output.profiles) {
                (Some(b), Some(pr)) => {
                    let rows = read_branch(b)?;
                    let profs = read_profiles(pr)?;
                    let (row, prof) = rows
                        .get(i)
                        .zip(profs.get(i))
                        .ok_or_else(|| CliError::Config(format!("branch point {i} is not in {}", b.display())))?;
                    point_from_row(cfg, row, Some(prof))?
                }
                (None, None) => {
                    let (_, _, br) = run_branch(cfg, &k, i + 1, None)?;
                    br.points.get(i).cloned().ok_or_else(|| {
                        CliError::Numeric(format!("branch ended ({}) before point {i}", br.termination))
                    })?
                }
                _ => return Err(CliError::Config("reconstruct needs both --branch and --profiles, or neither".into())),
            };
            let grid = Grid::new(p.profile.n())?;
            let shifted: Vec<f64> = p.profile.values().iter().map(|v| v + p.u_star).collect();
            (grid.profile(shifted)?, p.omega, p.mu, Some(i))
        }
    };
    let xs: Vec<f64> = (0..rc.x_points).map(|j| rc.x_max * j as f64 / (rc.x_points - 1) as f64).collect();
    let slice = reconstruct(&trace, omega, cfg.sigma, &xs)?;
    let ff = fit_far_field(&slice)?;
    let mut w = io::sink(cfg.output.out.as_deref())?;
    write_header(&mut *w, cfg)?;
    write_field_csv(&mut *w, &slice)?;
    w.flush()?;
    let body = json!({
        "index": index,
        "mu": mu,
        "omega": omega,
        "sigma": cfg.sigma,
        "u_inf": ff.u_inf,
        "eta": num(ff.eta),
        "c": ff.c,
        "transient": ff.eta.is_finite(),
    });
    eprintln!("hopf-dbc: {body}");
    if let Some(p) = &cfg.output.summary {
        write_json(Some(p), &document("reconstruct", cfg, body))?;
    }
    Ok(0)
}

struct SweepRow {
    gamma: f64,
    closed: Option<f64>,
    fit: Option<f64>,
    status: String,
}

fn sweep_point(cfg: &RunConfig, gamma: f64) -> SweepRow {
    let a = cfg.kinetics.alpha;
    let b = cfg.kinetics.beta;
    let closed = mu2_omega2(a, b, gamma, cfg.sigma).map(|m| m.0);
    let fit = (|| -> Result<f64, CliError> {
        let mut c = cfg.clone();
        c.kinetics.gamma = gamma;
        let k = kinetics(&c)?;
        let sw = &cfg.sweep;
        let (h, _, br) = run_branch(&c, &k, sw.max_points, Some(sw.ds_max))?;
        Ok(fit_mu2(&br, (sw.r_window[0], sw.r_window[1]), h.mu_star, h.omega_star)?.mu2)
    })();
    let status = match (&closed, &fit) {
        (Ok(_), Ok(_)) => "ok".to_string(),
        (Err(e), _) => e.to_string(),
        (_, Err(e)) => e.to_string(),
    };
    SweepRow { gamma, closed: closed.ok(), fit: fit.ok(), status }
}

/// Sign change of the closed-form `mu2` between adjacent grid values,
/// refined by bisection.
fn locate_flip(cfg: &RunConfig, rows: &[SweepRow]) -> Option<f64> {
    let mu2 = |g: f64| mu2_omega2(cfg.kinetics.alpha, cfg.kinetics.beta, g, cfg.sigma).ok().map(|m| m.0);
    rows.windows(2).find_map(|w| {
        let (fa, fb) = (w[0].closed?, w[1].closed?);
        if fa == 0.0 {
            return Some(w[0].gamma);
        }
        if fb == 0.0 {
            return Some(w[1].gamma);
        }
        if fa.signum() == fb.signum() {
            return None;
        }
        let (mut lo, mut hi, flo) = (w[0].gamma, w[1].gamma, fa);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match mu2(mid) {
                Some(v) if v.signum() == flo.signum() => lo = mid,
                Some(_) => hi = mid,
                None => return None,
            }
        }
        Some(0.5 * (lo + hi))
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<u8, CliError> {
    let sw = &cfg.sweep;
    let gammas: Vec<f64> = if sw.points == 1 {
        vec![sw.gamma_min]
    } else {
        (0..sw.points)
            .map(|i| {
                let (a, b) = ((sw.points - 1 - i) as f64, i as f64);
                (a * sw.gamma_min + b * sw.gamma_max) / (a + b)
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sw.threads)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| gammas.par_iter().map(|&g| sweep_point(cfg, g)).collect());
    let flip = locate_flip(cfg, &rows);

    let mut w = io::sink(cfg.output.out.as_deref())?;
    write_header(&mut *w, cfg)?;
    match flip {
        Some(g) => writeln!(w, "# gamma_flip={}", g + 0.0)?,
        None => writeln!(w, "# gamma_flip=none")?,
    }
    if cfg.sigma == 0.0 {
        writeln!(w, "# gamma_crit={}", gamma_crit(cfg.kinetics.alpha, cfg.kinetics.beta) + 0.0)?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["gamma", "mu2_closed", "mu2_fit", "agree", "status"])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut failures = 0;
    for r in &rows {
        let agree = matches!((r.closed, r.fit),
            (Some(a), Some(b)) if Criticality::of(a, DEGENERATE_TOL) == Criticality::of(b, DEGENERATE_TOL));
        if r.status != "ok" {
            failures += 1;
        }
        let opt = |v: Option<f64>| v.map(|x| (x + 0.0).to_string()).unwrap_or_default();
        out.write_record([(r.gamma + 0.0).to_string(), opt(r.closed), opt(r.fit), agree.to_string(), r.status.clone()])
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    out.flush()?;
    if failures > 0 {
        eprintln!("hopf-dbc: {failures} sweep points failed");
    }
    Ok(0)
}
