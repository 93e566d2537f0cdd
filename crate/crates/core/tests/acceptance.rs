//! Acceptance suite. Run with `cargo test --test acceptance -- --nocapture`
//! to see one result line per criterion.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vcslab::hilbert::{
    build_b_gamma, build_boson_ladder, shifted_hamiltonian, BlockOperator, PolynomialSuperpotential, SectorSpace,
};
use vcslab::intertwine::{
    commutation_probe, construct_h, example_factory, h_tau_identity_check, nonisospectral_construct, quon_problem,
    sufficient_condition_check, susy_grid_sweep, IntertwiningProblem, SpectralMap,
};
use vcslab::linalg::{max_abs, max_dev, CMatrix};
use vcslab::moments::{cross_entry, resolution_sweep, MomentWeight, QuadratureSpec};
use vcslab::spectra::{q_numbers, shift, ShiftedSequence, SpectralSequence};
use vcslab::vcs::{action_identity_check, build, eigenstate_check, temporal_stability_check, Family, VcsParams};
use vcslab::Error;

fn line(n: usize, what: &str, ok: bool, detail: String) {
    println!(
        "criterion {n} [{what}]: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Largest entrywise deviation from a diagonal matrix with entries `d(k)`,
/// optionally divided by `max(1, |d(k)|)`.
fn diag_deviation(m: &CMatrix, d: impl Fn(usize) -> f64, relative: bool) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let e = if i == j { d(i) } else { 0.0 };
            let scale = if relative { e.abs().max(1.0) } else { 1.0 };
            worst = worst.max((m[(i, j)].re - e).hypot(m[(i, j)].im) / scale);
        }
    }
    worst
}

fn linear_pair(dim: usize) -> Vec<ShiftedSequence> {
    vec![
        shift(&SpectralSequence::linear(1.0, 0.0, dim).unwrap()),
        shift(&SpectralSequence::linear(SQRT_2, 0.0, dim).unwrap()),
    ]
}

#[test]
fn criterion_1_boson_closed_forms() {
    let start = Instant::now();
    let p = quon_problem(60, 1.0).unwrap();
    let n = |k: usize| k as f64;
    let id = nonisospectral_construct(&p, &SpectralMap::identity()).unwrap();
    let n1 = diag_deviation(&id.n1, |k| n(k) * n(k) + 3.0 * n(k) + 2.0, false);
    let h = diag_deviation(&id.big_h, |k| n(k) + 2.0, false);
    let sq = nonisospectral_construct(&p, &SpectralMap::square()).unwrap();
    let h_sq = diag_deviation(&sq.big_h, |k| (n(k) + 2.0).powi(2), false);
    let ex = nonisospectral_construct(&p, &SpectralMap::Exp).unwrap();
    let h_exp = diag_deviation(&ex.big_h, |k| (n(k) + 2.0).exp(), true);
    let secs = start.elapsed().as_secs_f64();
    let ok = n1 <= 1e-11 && h <= 1e-11 && h_sq <= 1e-11 && h_exp <= 1e-11 && secs < 1.0;
    line(
        1,
        "boson closed forms",
        ok,
        format!("N1 {n1:.1e}, H {h:.1e}, H(t^2) {h_sq:.1e}, H(exp) relative {h_exp:.1e}, {secs:.2} s"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_quon_closed_forms() {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for q in [0.3, 0.5, 0.9, 1.0] {
        let p = quon_problem(60, q).unwrap();
        let r = construct_h(&p).unwrap();
        let qn = q_numbers(q, 60);
        let n1 = diag_deviation(
            &r.n1,
            |k| q.powi(3) * qn[k] * qn[k] + q * (1.0 + 2.0 * q) * qn[k] + 1.0 + q,
            false,
        );
        let h = diag_deviation(&r.big_h, |k| 1.0 + q + q * q * qn[k], false);
        worst = worst.max(n1).max(h);
        detail.push(format!("q={q}: {:.1e}", n1.max(h)));
    }
    // At q = 1 the quon forms reduce to the boson ones.
    let qn = q_numbers(1.0, 60);
    let limit = qn
        .iter()
        .enumerate()
        .map(|(k, v)| (v - k as f64).abs())
        .fold(0.0, f64::max);
    let ok = worst <= 1e-11 && limit == 0.0;
    line(2, "quon closed forms", ok, detail.join(", "));
    assert!(ok);
}

#[test]
fn criterion_3_example_certificates() {
    let dim = 80;
    let seqs = linear_pair(dim);
    let mut ok = true;
    let (mut a, mut b, mut g) = (0.0f64, 0.0f64, 0.0f64);
    let (mut indep_abs, mut indep_rel) = (0.0f64, 0.0f64);
    for which in 1..=4 {
        let mut first: Option<(CMatrix, CMatrix)> = None;
        for gamma in [0.0, 0.7, 3.1] {
            let p = example_factory(which, &seqs, dim, gamma).unwrap();
            let r = construct_h(&p).unwrap();
            let c = &r.certificate;
            a = a.max(c.alpha_scaled);
            b = b.max(c.beta_scaled);
            g = g.max(c.gamma_scaled);
            ok &= c.passed && c.eigenvectors_checked > 0;
            let h = p.window.restrict(p.h.matrix());
            match &first {
                None => first = Some((h, r.big_h)),
                Some((h0, big0)) => {
                    for (m0, m) in [(h0, &h), (big0, &r.big_h)] {
                        let d = max_dev(m0, m);
                        indep_abs = indep_abs.max(d);
                        indep_rel = indep_rel.max(d / max_abs(m0).max(1.0));
                    }
                }
            }
        }
    }
    ok &= a <= 1e-10 && b <= 1e-10 && g <= 1e-9 && indep_rel <= 1e-12;
    line(
        3,
        "examples 1-4 certificates",
        ok,
        format!(
            "scaled alpha {a:.1e}, beta {b:.1e}, gamma {g:.1e}; gamma-independence relative {indep_rel:.1e}, absolute {indep_abs:.1e}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_vcs_properties() {
    let start = Instant::now();
    let dim = 60;
    let seqs = vec![
        SpectralSequence::linear(1.0, 0.3, dim).unwrap(),
        SpectralSequence::linear(SQRT_2, 0.5 * SQRT_2, dim).unwrap(),
    ];
    let shifted: Vec<ShiftedSequence> = seqs.iter().map(shift).collect();
    let space = SectorSpace::new(2, dim).unwrap();
    let ham = shifted_hamiltonian(space, &shifted).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut tail, mut action, mut eigen, mut temporal) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut trials = 0;
    while trials < 100 {
        let p = VcsParams::new(
            vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)],
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let psi = match build(Family::Eds, &seqs, dim, &p) {
            Ok(s) => s,
            Err(Error::TailTooLarge { .. } | Error::OutOfDisc { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        trials += 1;
        tail = tail.max(psi.tail_bound);
        action = action.max(action_identity_check(&psi, &ham).unwrap());
        let b = build_b_gamma(space, &shifted, p.gamma).unwrap();
        eigen = eigen.max(eigenstate_check(&psi, &b).unwrap());
        for t in [0.1, 1.0, 10.0] {
            temporal = temporal.max(temporal_stability_check(&seqs, dim, Family::Eds, &p, t).unwrap());
        }
    }
    // Nonlinear witness: lowering operator at the wrong phase.
    let quad: Vec<SpectralSequence> = vec![
        SpectralSequence::new((0..dim).map(|n| (n * n) as f64 + 0.3).collect(), 1.0).unwrap(),
        SpectralSequence::new((0..dim).map(|n| SQRT_2 * (n * n) as f64 + 0.7).collect(), SQRT_2).unwrap(),
    ];
    let qs: Vec<ShiftedSequence> = quad.iter().map(shift).collect();
    let p = VcsParams::new(vec![2.0, 2.0], 0.4);
    let psi = build(Family::Eds, &quad, dim, &p).unwrap();
    let matched = eigenstate_check(&psi, &build_b_gamma(space, &qs, 0.4).unwrap()).unwrap();
    let witness = eigenstate_check(&psi, &build_b_gamma(space, &qs, 1.4).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = tail <= 1e-10
        && action <= 1e-9
        && temporal <= 1e-9
        && eigen <= 1e-9
        && matched <= 1e-9
        && witness >= 1e-2
        && secs < 30.0;
    line(
        4,
        "VCS property suite",
        ok,
        format!(
            "tail {tail:.1e}, action {action:.1e}, temporal {temporal:.1e}, eigenstate {eigen:.1e}, witness {witness:.2e}, {secs:.1} s"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_resolution_of_identity() {
    let start = Instant::now();
    let dim = 30;
    let seqs = vec![
        SpectralSequence::linear(1.0, 0.3, dim).unwrap(),
        SpectralSequence::linear(SQRT_2, 0.5 * SQRT_2, dim).unwrap(),
    ];
    let weights = vec![MomentWeight::gamma(1.0), MomentWeight::gamma(SQRT_2)];
    let quad = QuadratureSpec::for_dim(dim);
    let sweep = resolution_sweep(Family::Eds, &seqs, dim, &weights, &quad, &[1e2, 1e3, 1e4]).unwrap();
    let diag = sweep.rows.iter().map(|r| r.diagonal_error).fold(0.0, f64::max);
    let exponent = -sweep.off_diagonal_slope;
    let secs = start.elapsed().as_secs_f64();
    let ok = diag <= 1e-7 && (0.8..=1.2).contains(&exponent) && secs < 300.0;
    line(
        5,
        "resolution of identity",
        ok,
        format!("diagonal {diag:.1e}, off-diagonal decay exponent {exponent:.3}, {secs:.1} s"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_delta_dichotomy() {
    let dim = 10;
    let lin = SpectralSequence::linear(1.0, 0.0, dim).unwrap();
    let seqs = vec![lin.clone(), lin];
    let w = vec![MomentWeight::gamma(1.0); 2];
    let quad = QuadratureSpec::for_dim(dim);
    let entry = |delta: f64, g: f64| {
        cross_entry(&seqs, dim, delta, &w, &quad.with_gamma(g))
            .unwrap()
            .value
            .abs()
    };
    let change = (entry(0.0, 1e4) - entry(0.0, 1e2)).abs() / entry(0.0, 1e2);
    let ratio = entry(0.5, 1e2) / entry(0.5, 1e4);
    let ok = change < 0.05 && (50.0..=200.0).contains(&ratio);
    line(
        6,
        "delta dichotomy",
        ok,
        format!(
            "delta = 0 change {:.2}%, delta = 0.5 decay factor {ratio:.1}",
            100.0 * change
        ),
    );
    assert!(ok);
}

fn invertible_problem(dim: usize) -> IntertwiningProblem {
    let boson = build_boson_ladder(dim).unwrap();
    let space = boson.lowering.space();
    let n = boson.number().into_matrix();
    let h = BlockOperator::hermitian(space, n.clone()).unwrap();
    let x = BlockOperator::new(space, n + CMatrix::identity(dim, dim)).unwrap();
    IntertwiningProblem::new(h, x, 0).unwrap()
}

#[test]
fn criterion_7_commutation_probes() {
    let dim = 40;
    let cases = [
        ("boson", quon_problem(dim, 1.0).unwrap(), Some(2)),
        ("quon", quon_problem(dim, 0.5).unwrap(), Some(2)),
        ("invertible", invertible_problem(dim), None),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, p, deficiency) in &cases {
        let probe = commutation_probe(p, &SpectralMap::square(), 1).unwrap();
        let s = sufficient_condition_check(p, 4).unwrap();
        let proj = s.projection.iter().copied().fold(0.0, f64::max);
        ok &= probe.residual <= 1e-10 && proj <= 1e-10;
        if let Some(d) = deficiency {
            ok &= s.deficiency.iter().all(|x| x == d);
        }
        detail.push(format!(
            "{name}: probe {:.1e}, (l <= 4) {proj:.1e}, deficiency {:?}",
            probe.residual, s.deficiency
        ));
    }
    line(7, "commutation probes", ok, detail.join("; "));
    assert!(ok);
}

#[test]
fn criterion_8_susy_grid() {
    let start = Instant::now();
    let w = PolynomialSuperpotential { coeffs: vec![0.0, 1.0] };
    let sweep = susy_grid_sweep(
        &w,
        -10.0,
        10.0,
        2.0,
        &[256, 512, 1024],
        1.0,
        1.0,
        &SpectralMap::identity(),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let range = 1.7..=2.3;
    let ok = range.contains(&sweep.commutator_order) && range.contains(&sweep.h_order) && secs < 60.0;
    line(
        8,
        "SUSY grid convergence",
        ok,
        format!(
            "commutator order {:.3}, H order {:.3}, {secs:.1} s",
            sweep.commutator_order, sweep.h_order
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_9_h_tau_factorization() {
    let (mut rel, mut abs_small, mut abs_all) = (0.0f64, 0.0f64, 0.0f64);
    for dim in [12, 30, 60, 80] {
        for omega in [1.0, SQRT_2, 0.5] {
            let seqs = vec![
                shift(&SpectralSequence::linear(1.0, 0.0, dim).unwrap()),
                shift(&SpectralSequence::linear(omega, 0.0, dim).unwrap()),
            ];
            for gamma in [0.0, 0.7, 3.1] {
                let c = h_tau_identity_check(&seqs, dim, gamma).unwrap();
                rel = rel.max(c.relative);
                abs_all = abs_all.max(c.absolute);
                if dim == 12 {
                    abs_small = abs_small.max(c.absolute);
                }
            }
        }
    }
    let ok = rel <= 1e-14 && abs_small <= 1e-14;
    line(
        9,
        "H_tau factorization",
        ok,
        format!("relative {rel:.1e}; absolute {abs_small:.1e} at D = 12, {abs_all:.1e} over all configurations"),
    );
    assert!(ok);
}
