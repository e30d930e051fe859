//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs at desk scale (n = 256).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use hopf_dbc::normalform::{initial_profile, mu2_omega2_sigma0};
use hopf_dbc::stability::leading_eigenvalue;
use hopf_dbc::*;
use num_complex::Complex;

type Outcome = std::result::Result<String, String>;

const N: usize = 256;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cubic(a: f64, b: f64, g: f64) -> Cubic {
    CubicKinetics::new(a, b, g).unwrap()
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

/// Branch of `(alpha, beta, gamma)` at sigma = 0 from seeds at r = 0.01, 0.02.
fn branch(k: &Cubic, settings: &ContinuationSettings) -> Diagram {
    let h = cubic_hopf(k, 0.0).unwrap();
    let c = expansion_coefficients(k, &h).unwrap();
    let bvp = Bvp::new(k, Grid::new(N).unwrap());
    let seeds = seed_branch(&bvp, &h, &c, 0.01, 0.02, &NewtonSettings::default()).unwrap();
    continue_branch(&bvp, seeds, settings).unwrap()
}

fn hopf_detection() -> Outcome {
    let k = cubic(1.0, 1.0, 0.0);
    let h = find_hopf(&k, 0.0, (0.7, 0.2)).map_err(|e| e.to_string())?;
    let res = char_fn(&k, Complex::new(0.0, h.omega_star), h.mu_star, 0.0).map_err(|e| e.to_string())?.norm();
    let h5 = find_hopf(&k, 0.5, (0.6, 0.1)).map_err(|e| e.to_string())?;
    let e5 = (h5.omega_star - 0.5f64.sqrt()).abs();
    check(
        (h.omega_star - 1.0).abs() <= 1e-10 && h.mu_star.abs() <= 1e-10 && res <= 1e-10 && e5 <= 1e-10,
        format!("omega* = {:.12}, mu* = {:.1e}, |d| = {res:.1e}; sigma=0.5 error {e5:.1e}", h.omega_star, h.mu_star),
    )
}

fn crossing_rate() -> Outcome {
    let mut worst = 0.0f64;
    let mut positive = true;
    for &a in &[0.5, 1.0, 2.0, 4.0] {
        let h = cubic_hopf(&cubic(a, 0.0, 0.0), 0.0).map_err(|e| e.to_string())?;
        let ia = Complex::new(0.0, a);
        let formula = (ia / (ia.sqrt() - Complex::from((a / 2.0).sqrt()))).re;
        worst = worst.max((h.crossing - formula).abs());
        positive &= h.crossing > 0.0;
    }
    let h1 = cubic_hopf(&cubic(1.0, 0.0, 0.0), 0.0).unwrap();
    let e1 = (h1.crossing - 2f64.sqrt()).abs();
    check(
        e1 <= 1e-8 && worst <= 1e-8 && positive,
        format!("Re dlambda/dmu at alpha=1: {:.12} (error {e1:.1e}); worst formula gap {worst:.1e}", h1.crossing),
    )
}

fn closed_form_consistency() -> Outcome {
    let mut worst = 0.0f64;
    for &a in &[0.5, 1.0, 2.0] {
        for &b in &[0.0, 1.0, 5.0] {
            for &g in &[-1.0, -0.1, 0.0, 1.0] {
                let (m, w, u) = mu2_omega2::<f64>(a, b, g, 0.0).map_err(|e| e.to_string())?;
                let (mc, wc, uc) = mu2_omega2_sigma0(a, b, g);
                for (x, y) in [(m, mc), (w, wc), (u, uc)] {
                    let e = if y == 0.0 { x.abs() } else { rel(x, y) };
                    worst = worst.max(e);
                }
            }
        }
    }
    let (m, w, u) = mu2_omega2::<f64>(1.0, 1.0, 0.0, 0.0).unwrap();
    let reference = (m + 0.020220).abs() < 1e-6 && (w + 1.166667).abs() < 1e-6 && (u - 0.5).abs() < 1e-12;
    check(
        worst <= 1e-12 && reference,
        format!("worst relative gap {worst:.1e} over 36 points; (1,1,0) -> ({m:.6}, {w:.6}, {u})"),
    )
}

fn criticality_boundary() -> Outcome {
    let mu2 = |g: f64| mu2_omega2(1.0, 1.0, g, 0.0).unwrap().0;
    let (mut lo, mut hi) = (-0.1, 0.05);
    if mu2(lo).signum() == mu2(hi).signum() {
        return Err("no sign change on [-0.1, 0.05]".into());
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if mu2(mid).signum() == mu2(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flip = 0.5 * (lo + hi);
    let gc = gamma_crit(1.0, 1.0);
    check(
        (flip + 0.038105).abs() <= 1e-3 && (flip - gc).abs() <= 1e-8,
        format!("flip at {flip:.7}, formula {gc:.7}, reference -0.038105"),
    )
}

fn residual_order() -> Outcome {
    let k = cubic(1.0, 1.0, 0.0);
    let h = cubic_hopf(&k, 0.0).unwrap();
    let c = expansion_coefficients(&k, &h).unwrap();
    let grid = Grid::new(N).unwrap();
    let bvp = Bvp::new(&k, grid.clone());
    let res = |r: f64| {
        let st = BvpState {
            profile: initial_profile(&grid, r, &k, &h, &c, 2).unwrap(),
            omega: h.omega_star + c.omega2 * r * r,
            mu: h.mu_star + c.mu2 * r * r,
            sigma: 0.0,
        };
        bvp.residual(&st).unwrap().sup_norm()
    };
    let (a, b, d) = (res(0.08), res(0.04), res(0.02));
    let (q1, q2) = (a / b, b / d);
    check(
        (6.0..=10.0).contains(&q1) && (6.0..=10.0).contains(&q2),
        format!("residuals {a:.3e}, {b:.3e}, {d:.3e}; ratios {q1:.3}, {q2:.3}"),
    )
}

fn branch_asymptotics() -> Outcome {
    let k = cubic(1.0, 1.0, 0.0);
    let s = ContinuationSettings { ds_max: 0.01, max_points: 40, ..Default::default() };
    let br = branch(&k, &s);
    let f = fit_mu2(&br, (0.02, 0.1), 0.0, 1.0).map_err(|e| e.to_string())?;
    let (m, w, u) = mu2_omega2_sigma0(1.0, 1.0, 0.0);
    let (em, ew, eu) = (rel(f.mu2, m), rel(f.omega2, w), rel(f.uinf2, u));
    check(
        em <= 0.05 && ew <= 0.05 && eu <= 0.05,
        format!(
            "{} points: mu2 {:.6} ({:.2}%), omega2 {:.6} ({:.2}%), u_inf/r^2 {:.6} ({:.2}%)",
            f.points,
            f.mu2,
            100.0 * em,
            f.omega2,
            100.0 * ew,
            f.uinf2,
            100.0 * eu
        ),
    )
}

fn hysteresis_shape() -> Outcome {
    let k = cubic(1.0, 1.0, 0.0);
    let s = ContinuationSettings { ds_max: 0.02, max_points: 200, ..Default::default() };
    let br = branch(&k, &s);
    let mus: Vec<f64> = br.points.iter().map(|p| p.mu).collect();
    // The fold is the first turning point of mu; the far end of the branch
    // heads off to large negative mu and must not be mistaken for it.
    let Some(i_min) = (1..mus.len()).find(|&i| mus[i] > mus[i - 1]).map(|i| i - 1) else {
        return Err("mu never turns along the branch".into());
    };
    let mu_min = mus[i_min];
    let mu_max = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // First point past the fold where mu is positive again.
    let Some(i_pos) = (i_min..mus.len()).find(|&i| mus[i] > 0.0) else {
        return Err(format!("no mu > 0 after the fold at index {i_min}"));
    };
    let monotone = br.points[..=i_pos].windows(2).all(|w| w[1].r > w[0].r);
    check(
        mu_min < 0.0 && 0.0 < mu_max && monotone,
        format!(
            "min mu {mu_min:.3e} at r = {:.4}, max mu {mu_max:.3e}; r increasing through index {i_pos}: {monotone}",
            br.points[i_min].r
        ),
    )
}

fn stability_sign_law() -> Outcome {
    let e = |b: f64, g: f64| -> f64 { leading_eigenvalue(&reduced_coeffs(1.0, b, g)) };
    let (p, m, q): (f64, f64, f64) = (e(0.0, 1.0), e(0.0, -1.0), e(1.0, 0.0));
    let values = rel(p, 1.5) < 1e-12 && rel(m, -1.5) < 1e-12 && (q - 0.0572).abs() < 1e-4;
    let mut agree = 0;
    let mut total = 0;
    for &b in &[0.5, 1.0, 2.0] {
        let gc: f64 = gamma_crit(1.0, b);
        for &off in &[-0.5, -0.1, 0.1, 0.5] {
            let g = gc + off * gc.abs();
            let mu2 = mu2_omega2(1.0, b, g, 0.0).unwrap().0;
            total += 1;
            if e(b, g).signum() == -mu2.signum() {
                agree += 1;
            }
        }
    }
    check(
        values && agree == total && total == 12,
        format!("exponents/r^2: {p:.6}, {m:.6}, {q:.6}; sign law {agree}/{total}"),
    )
}

fn floquet_agreement() -> Outcome {
    let k = cubic(1.0, 0.0, 1.0);
    let h = cubic_hopf(&k, 0.0).unwrap();
    let c = expansion_coefficients(&k, &h).unwrap();
    let bvp = Bvp::new(&k, Grid::new(N).unwrap());
    let (p, _) = seed_branch(&bvp, &h, &c, 0.05, 0.0505, &NewtonSettings::default()).map_err(|e| e.to_string())?;
    let want = 1.5 * p.r * p.r;
    let res = floquet_numeric(&p, &k, want, &FloquetSettings::default()).map_err(|e| e.to_string())?;
    let lead = res.leading(1e-8).ok_or("no nonzero exponent found")?;
    let has_zero = res.exponents.first().is_some_and(|z| z.norm() == 0.0);
    let e = rel(lead.re, want);
    check(
        e <= 0.1 && has_zero && res.translation_residual <= 1e-8 && res.truncation_change <= 1e-6,
        format!(
            "r = {:.5}: exponent {:.6e} vs 1.5 r^2 = {want:.6e} ({:.2}%); translation residual {:.1e}; doubling change {:.1e}",
            p.r,
            lead.re,
            100.0 * e,
            res.translation_residual,
            res.truncation_change
        ),
    )
}

fn time_domain_oracle() -> Outcome {
    let k = cubic(1.0, 0.0, -1.0);
    let mu = 0.05;
    let settings = SimSettings { horizon: 200.0, ..Default::default() };
    let tr = simulate(&k, mu, 0.0, &settings, 0.05, |_| 0.0).map_err(|e| e.to_string())?;
    let pe = extract_period(&tr.t, &tr.u_minus, 1e-6).map_err(|e| e.to_string())?;
    let mu2 = mu2_omega2(1.0, 0.0, -1.0, 0.0).unwrap().0;
    let r_pred = (mu / mu2).sqrt();

    let br = branch(&k, &ContinuationSettings { ds_max: 0.02, max_points: 400, ..Default::default() });
    let omega_branch = br
        .points
        .windows(2)
        .find(|w| (w[0].mu - mu) * (w[1].mu - mu) <= 0.0)
        .map(|w| {
            let f = (mu - w[0].mu) / (w[1].mu - w[0].mu);
            w[0].omega + f * (w[1].omega - w[0].omega)
        })
        .ok_or("branch does not reach mu = 0.05")?;

    let decay = simulate(&k, -mu, 0.0, &settings, 0.05, |_| 0.0).map_err(|e| e.to_string())?;
    let tail = decay.u_minus[3 * decay.u_minus.len() / 4..].iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let (er, ew) = (rel(pe.r, r_pred), rel(pe.omega, omega_branch));
    check(
        er <= 0.1 && ew <= 0.02 && tail < 1e-3 * 0.05,
        format!(
            "mu=0.05: r {:.4} vs {r_pred:.4} ({:.2}%), omega {:.5} vs branch {omega_branch:.5} ({:.2}%); mu=-0.05: late |u-| {tail:.1e}",
            pe.r,
            100.0 * er,
            pe.omega,
            100.0 * ew
        ),
    )
}

fn homoclinic_trend() -> Outcome {
    let k = cubic(1.0, 0.0, 1.0);
    let br = branch(&k, &ContinuationSettings { ds_max: 0.05, ..Default::default() });
    let n = br.points.len();
    let q = &br.points[n - n.div_ceil(4)..];
    let monotone = q.windows(2).all(|w| w[1].omega < w[0].omega);
    let last = br.points[n - 1].omega;
    check(
        monotone && last < 0.1,
        format!("{n} points, termination {}; final omega {last:.3e}; final-quartile decrease: {monotone}", br.termination),
    )
}

fn far_field() -> Outcome {
    let k = cubic(1.0, 1.0, 0.0);
    let h = cubic_hopf(&k, 0.0).unwrap();
    let c = expansion_coefficients(&k, &h).unwrap();
    let bvp = Bvp::new(&k, Grid::new(N).unwrap());
    let mut worst = 0.0f64;
    let mut exact = true;
    let mut bounded = true;
    for &r in &[0.02, 0.05] {
        let (p, _) = seed_branch(&bvp, &h, &c, r, 1.01 * r, &NewtonSettings::default()).map_err(|e| e.to_string())?;
        let xs: Vec<f64> = (0..=120).map(|j| 0.25 * j as f64).collect();
        let slice = reconstruct(&p.profile, p.omega, 0.0, &xs).map_err(|e| e.to_string())?;
        let ff = fit_far_field(&slice).map_err(|e| e.to_string())?;
        worst = worst.max(rel(ff.eta, (p.omega / 2.0).sqrt()));
        exact &= slice.u_inf == p.profile.mode(0).re && p.u_inf == p.u_star + p.profile.mean();
        let env = slice.transient_envelope();
        bounded &= env.iter().zip(&xs).all(|(e, x)| *e <= ff.c * (-ff.eta * x).exp() * (1.0 + 1e-12));
    }
    check(
        worst <= 0.05 && exact && bounded,
        format!("eta vs sqrt(omega/2): worst {:.3}%; u_inf exact: {exact}; envelope bound: {bounded}", 100.0 * worst),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("Hopf detection", hopf_detection),
        ("crossing rate", crossing_rate),
        ("closed-form consistency", closed_form_consistency),
        ("criticality boundary", criticality_boundary),
        ("residual order", residual_order),
        ("branch asymptotics", branch_asymptotics),
        ("hysteresis shape", hysteresis_shape),
        ("stability sign law", stability_sign_law),
        ("numeric Floquet agreement", floquet_agreement),
        ("time-domain oracle", time_domain_oracle),
        ("homoclinic trend", homoclinic_trend),
        ("far field", far_field),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(d) => println!("PASS {label}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {label}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
