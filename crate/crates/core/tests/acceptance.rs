//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use hardycalc::admissibility::{
    default_lambda_sequence, default_t_sequence, lambda_limit, lebesgue_limit, observability_gramian,
    probe_vectors, sqrt_t_sup, ObservationOperator,
};
use hardycalc::calculus::{ga_convolution, ga_toeplitz};
use hardycalc::hardy::GridSpec;
use hardycalc::numkernel::{c, identity, inverse, op_norm, vec_norm, ComplexMatrix};
use hardycalc::semigroup::{evaluate_t, example26, random_dissipative, random_stable, Generator};
use hardycalc::symbols::{battery, hinf_norm, SymbolExpr};
use hardycalc::verifier::{
    check_analytic_lemma, check_cor33a, check_eq21, check_eq26, check_square_function, check_t0,
    check_thm33, check_thm34, decaying_signals, default_s_samples, toeplitz_battery, toeplitz_residuals,
    CheckReport, REFINEMENT_FLOOR,
};

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn component<'a>(r: &'a CheckReport, name: &str) -> Result<&'a CheckReport, String> {
    r.components.iter().find(|c| c.name == name).ok_or_else(|| format!("{} has no component {name}", r.name))
}

/// Independent oracle: `(αI − A)⁻¹` by Gauss–Jordan on the dense matrix.
fn resolvent_oracle(a: &ComplexMatrix, alpha: f64) -> Result<ComplexMatrix, String> {
    let m = identity(a.nrows()).mapv(|z| z * alpha) - a;
    inverse(&m).map_err(err)
}

fn criterion_1() -> Outcome {
    let (gen, cop) = example26(64).map_err(err)?;
    let g = observability_gramian(&gen, &cop).map_err(err)?;
    let (da, de) = ((g.m_admissible - 0.5).abs(), (g.m_exact - 0.5).abs());
    let pass = da <= 1e-10 && de <= 1e-10 && g.quadrature_mismatch <= 1e-4;
    Ok((pass, format!("|m_adm-1/2| = {da:.1e}, |m_exact-1/2| = {de:.1e}, quadrature {:.1e}", g.quadrature_mismatch)))
}

fn criterion_2() -> Outcome {
    let modes = 64;
    let (gen, cop) = example26(modes).map_err(err)?;
    let e1 = (-1f64).exp();
    let mut pass = true;
    let mut worst = 0.0f64;
    for n in [1usize, 2, 4, 8] {
        let t = 1.0 / (n * n) as f64;
        let ct = cop.matrix().dot(&evaluate_t(&gen, t).map_err(err)?);
        let mut phi = ndarray::Array1::zeros(modes);
        phi[n - 1] = c(1.0, 0.0);
        let d = (vec_norm(&ct.dot(&phi)) - n as f64 * e1).abs();
        worst = worst.max(d);
        pass &= d <= 1e-9 && t.sqrt() * op_norm(&ct) >= e1;
    }
    let (sup, t_star) = sqrt_t_sup(&gen, cop.matrix(), 1e-6, 10.0).map_err(err)?;
    // sup_t √t·max_n n e^{−n²t} = max_u u e^{−u²} = (2e)^{−1/2}.
    let oracle = 1.0 / (2.0 * std::f64::consts::E).sqrt();
    pass &= sup <= 0.5f64.sqrt() && (sup - oracle).abs() <= 1e-6;
    Ok((pass, format!("orbit error {worst:.1e}; scan sup {sup:.9} at t = {t_star:.3e} (bound 0.707107, exact {oracle:.9})")))
}

fn criterion_3() -> Outcome {
    let grid = GridSpec::reference();
    let g = SymbolExpr::pole(2.0);
    let (mut conv, mut toep) = (0.0f64, 0.0f64);
    for seed in 0..10 {
        let gen = random_stable(8, seed).and_then(|g| g.shifted(-3.0)).map_err(err)?;
        let exact = resolvent_oracle(&gen.matrix(), 2.0)?;
        conv = conv.max(op_norm(&(&ga_convolution(&gen, &g).map_err(err)?.matrix - &exact)));
        toep = toep.max(op_norm(&(&ga_toeplitz(&gen, &g, grid).map_err(err)?.matrix - &exact)));
    }
    Ok((conv <= 1e-7 && toep <= 1e-3, format!("convolution {conv:.2e} (<= 1e-7), toeplitz {toep:.2e} (<= 1e-3)")))
}

fn criterion_4() -> Outcome {
    let symbols = toeplitz_battery();
    let signals = decaying_signals();
    let grid = GridSpec::reference();
    let coarse = toeplitz_residuals(&symbols, &signals, grid).map_err(err)?;
    let fine = toeplitz_residuals(&symbols, &signals, grid.refined()).map_err(err)?;
    let max = |v: &[hardycalc::verifier::ToeplitzCase]| v.iter().map(|c| c.residual).fold(f64::NEG_INFINITY, f64::max);
    let (mult, shift, excess) = (max(&coarse.multiplicative), max(&coarse.shift), max(&coarse.norm_excess));
    let mut shrink = f64::INFINITY;
    let mut above_floor = 0;
    for (a, b) in coarse.multiplicative.iter().chain(&coarse.shift).zip(fine.multiplicative.iter().chain(&fine.shift)) {
        if a.residual > REFINEMENT_FLOOR {
            above_floor += 1;
            shrink = shrink.min(a.residual / b.residual);
        }
    }
    let pass = symbols.len() == 6 && signals.len() == 5 && mult <= 1e-6 && shift <= 1e-6 && excess <= 1e-6 && shrink >= 4.0;
    Ok((
        pass,
        format!(
            "multiplicative {mult:.1e}, shift {shift:.1e}, norm excess {excess:.1e}; min shrink {shrink:.1} over {above_floor} residuals above {REFINEMENT_FLOOR:.0e}"
        ),
    ))
}

fn criterion_5() -> Outcome {
    let symbols = battery();
    let mut gens = vec![example26(16).map_err(err)?.0];
    for seed in 0..3 {
        gens.push(random_stable(8, seed).map_err(err)?);
    }
    let mut worst = 0.0f64;
    for gen in &gens {
        let single: Vec<ComplexMatrix> =
            symbols.iter().map(|(_, g)| ga_convolution(gen, g).map(|r| r.matrix)).collect::<Result<_, _>>().map_err(err)?;
        for (i, (_, g1)) in symbols.iter().enumerate() {
            for (j, (_, g2)) in symbols.iter().enumerate() {
                let prod = ga_convolution(gen, &SymbolExpr::Product(vec![g1.clone(), g2.clone()])).map_err(err)?;
                worst = worst.max(op_norm(&(&prod.matrix - &single[i].dot(&single[j]))));
            }
        }
    }
    Ok((worst <= 1e-6, format!("max ||(g1 g2)(A) - g1(A) g2(A)|| = {worst:.2e} over 25 pairs x 4 generators")))
}

fn criterion_6() -> Outcome {
    let symbols = battery();
    let (mut ratio, mut gram) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed as usize % 16);
        let gen = random_dissipative(n, seed).map_err(err)?;
        for (_, g) in &symbols {
            let r = check_cor33a(&gen, g).map_err(err)?;
            let vn = component(&r, "von_neumann")?;
            let ug = component(&r, "unit_gramian")?;
            ratio = ratio.max(vn.bound_measured / vn.bound_claimed);
            gram = gram.max(ug.bound_measured);
            if !(vn.bound_measured <= vn.bound_claimed * (1.0 + 1e-6) + 1e-8 && ug.bound_measured <= 1e-8 && r.pass) {
                failures += 1;
            }
        }
    }
    Ok((failures == 0, format!("max ||g(A)||/||g|| = {ratio:.9}, max ||Gramian - I|| = {gram:.1e}, failures {failures}/500")))
}

fn criterion_7() -> Outcome {
    let symbols = battery();
    let cop = ObservationOperator::identity(8);
    let (mut ratio, mut failures) = (0.0f64, 0);
    for seed in 0..20 {
        let gen = random_stable(8, seed).map_err(err)?;
        for (_, g) in &symbols {
            let r = check_thm33(&gen, &cop, g).map_err(err)?;
            let b = component(&r, "calculus_bound")?;
            ratio = ratio.max(b.bound_measured / b.bound_claimed);
            if !(b.bound_measured <= b.bound_claimed * (1.0 + 1e-6) + b.abs_tolerance && r.pass) {
                failures += 1;
            }
        }
    }
    Ok((failures == 0, format!("max ||g(A)|| / (sqrt(m2/m1)||g||) = {ratio:.4}, failures {failures}/100")))
}

fn weighted_resolvent_generators() -> Result<Vec<Generator>, String> {
    let mut gens = vec![example26(16).map_err(err)?.0];
    for seed in 0..5 {
        gens.push(random_dissipative(8, seed).and_then(|g| g.shifted(-0.25)).map_err(err)?);
    }
    Ok(gens)
}

fn criterion_8() -> Outcome {
    let samples = default_s_samples();
    let (mut ratio, mut failures) = (0.0f64, 0);
    for gen in weighted_resolvent_generators()? {
        for (_, g) in &battery() {
            let r = check_eq21(&gen, g, &samples).map_err(err)?;
            let h = component(&r, "resolvent_hinf")?;
            ratio = ratio.max(h.bound_measured / hinf_norm(g));
            if !(h.bound_measured <= hinf_norm(g) * (1.0 + 1e-6)) {
                failures += 1;
            }
        }
    }
    Ok((failures == 0, format!("max sqrt(Re s)||g(A)R(s)||/||g|| = {ratio:.9} over 15 s-samples, failures {failures}/30")))
}

fn criterion_9() -> Outcome {
    let mut gens = vec![example26(16).map_err(err)?.0];
    for seed in 0..5 {
        gens.push(random_dissipative(8, seed).map_err(err)?);
    }
    let (mut sq, mut gr, mut failures) = (0.0f64, 0.0f64, 0);
    for gen in &gens {
        for (_, g) in &battery() {
            let r = check_t0(gen, g).map_err(err)?;
            let s = component(&r, "sqrt_t_semigroup_sup")?;
            let q = component(&r, "output_gramian")?;
            sq = sq.max(s.bound_measured / s.bound_claimed);
            gr = gr.max(q.bound_measured / q.bound_claimed);
            let ok = s.bound_measured <= s.bound_claimed * (1.0 + 1e-4) && q.pass && r.pass;
            failures += usize::from(!ok);
        }
    }
    Ok((failures == 0, format!("max sqrt(t)||g(A)T(t)||/(M||g||) = {sq:.6}, max lambda(Q_g)/(gamma_A||g||^2) = {gr:.6}, failures {failures}/30")))
}

fn criterion_10() -> Outcome {
    let gen = example26(32).map_err(err)?.0;
    let mut notes = Vec::new();
    let mut pass = true;
    let mut worst34 = 0.0f64;
    for (_, g) in &battery() {
        let r = check_thm34(&gen, g, 1.0).map_err(err)?;
        pass &= r.pass;
        worst34 = worst34.max(r.ratio());
    }
    notes.push(format!("smoothing bound ratio {worst34:.4}"));
    let lemma = check_analytic_lemma(&gen).map_err(err)?;
    let exact = component(&lemma, "analytic_exact")?;
    pass &= lemma.pass && exact.bound_measured <= (-1f64).exp() + 1e-9;
    notes.push(format!("sup t||AT(t)|| = {:.12}", exact.bound_measured));
    let e26 = check_eq26(&gen).map_err(err)?;
    pass &= e26.pass;
    notes.push(format!("observability ratio {:.9}", e26.ratio()));
    let sf = check_square_function(&gen).map_err(err)?;
    let rel = sf.components.iter().map(|c| c.bound_measured / c.witness_norm).fold(0.0, f64::max);
    pass &= sf.pass && rel <= 1e-6;
    notes.push(format!("square function rel gap {rel:.1e}"));
    Ok((pass, notes.join(", ")))
}

fn criterion_11() -> Outcome {
    let (gen, cop) = example26(16).map_err(err)?;
    let mut worst = 0.0f64;
    let mut pass = true;
    for x in probe_vectors(16, 5, 11) {
        // Oracle: C = diag(n) acting on x directly.
        let cx = ndarray::Array1::from_shape_fn(16, |i| x[i] * (i + 1) as f64);
        let leb = lebesgue_limit(&gen, &cop, &x, &default_t_sequence()).map_err(err)?;
        let lam = lambda_limit(&gen, &cop, &x, &default_lambda_sequence()).map_err(err)?;
        pass &= !leb.diverged && !lam.diverged;
        for d in [&leb.value - &cx, &lam.value - &cx, &leb.value - &lam.value] {
            worst = worst.max(vec_norm(&d));
        }
    }
    Ok((pass && worst <= 1e-6, format!("max deviation {worst:.2e} over 5 probes")))
}

fn strip_runtime(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("runtime_ms");
            m.values_mut().for_each(strip_runtime);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

fn criterion_12() -> Outcome {
    let spawn = || {
        Command::new(env!("CARGO_BIN_EXE_hardycalc"))
            .args(["run", "--scenario", "all", "--seed", "7", "--json"])
            .env_remove("HARDYCALC_SEED")
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
    };
    let (a, b) = (spawn().map_err(err)?, spawn().map_err(err)?);
    let (a, b) = (a.wait_with_output().map_err(err)?, b.wait_with_output().map_err(err)?);
    let parse = |o: &std::process::Output| -> Result<serde_json::Value, String> {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(err)?;
        strip_runtime(&mut v);
        Ok(v)
    };
    let fingerprint = |o: &std::process::Output| {
        String::from_utf8_lossy(&o.stderr).lines().find(|l| l.starts_with("fingerprint")).map(str::to_owned)
    };
    let (va, vb) = (parse(&a)?, parse(&b)?);
    let n = va.as_array().map_or(0, Vec::len);
    let same = va == vb && fingerprint(&a).is_some() && fingerprint(&a) == fingerprint(&b);
    let codes = (a.status.code(), b.status.code());
    Ok((
        same && n > 0 && codes == (Some(0), Some(0)),
        format!("{n} reports, identical = {same}, exit codes {codes:?}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("example26 admissibility constant", criterion_1),
        ("example26 sharpness and sqrt(t) scan", criterion_2),
        ("resolvent identity", criterion_3),
        ("Toeplitz algebra", criterion_4),
        ("calculus multiplicativity", criterion_5),
        ("von Neumann inequality", criterion_6),
        ("commuting observation bound", criterion_7),
        ("resolvent-weighted bound", criterion_8),
        ("output map bounds", criterion_9),
        ("self-adjoint checks", criterion_10),
        ("Lebesgue and Lambda extensions", criterion_11),
        ("determinism", criterion_12),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (title, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "{} [{:>2}] {title}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("{} of 12 criteria passed in {:.1}s", 12 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
