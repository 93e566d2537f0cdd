//! Runs a configured experiment and records its checks.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, ExperimentConfig, FamilySpec, LadderSpec, ProbeCase, Tolerances};
use crate::error::{Error, Result};
use crate::hilbert::{
    build_a_gamma_delta_variant, build_b_gamma, build_boson_ladder, hamiltonian, shifted_hamiltonian, BlockOperator,
    PolynomialSuperpotential, SectorSpace,
};
use crate::intertwine::{
    commutation_probe, construct_h, example_degree, example_factory, h_tau_identity_check, nonisospectral_construct,
    quon_closed_forms_with, quon_problem, sufficient_condition_check, susy_grid_sweep, Certificate,
    IntertwiningProblem, ALPHA_TOL, BETA_TOL, GAMMA_TOL,
};
use crate::linalg::{max_abs, max_dev, CMatrix};
use crate::moments::{cross_entry, resolution_sweep, MomentWeight, QuadratureSpec};
use crate::report::{Bound, Recorder, VerificationReport};
use crate::spectra::{shift, ShiftedSequence, SpectralSequence, SpectrumSpec};
use crate::vcs::{
    action_identity_check, build, eigenstate_check, temporal_stability_check, CoherentState, Family, VcsParams,
};

/// Default tolerances, overridable per config.
struct Tol {
    action: f64,
    temporal: f64,
    eigenstate: f64,
    witness: f64,
    diagonal: f64,
    hermiticity: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    closed_form: f64,
    gamma_independence: f64,
    h_tau: f64,
    probe: f64,
    projection: f64,
    commutant: f64,
    leakage: f64,
}

impl Tol {
    fn from(t: &Tolerances) -> Self {
        Self {
            action: t.action.unwrap_or(1e-9),
            temporal: t.temporal.unwrap_or(1e-9),
            eigenstate: t.eigenstate.unwrap_or(1e-9),
            witness: t.witness.unwrap_or(1e-2),
            diagonal: t.diagonal.unwrap_or(1e-7),
            hermiticity: t.hermiticity.unwrap_or(1e-12),
            alpha: t.alpha.unwrap_or(ALPHA_TOL),
            beta: t.beta.unwrap_or(BETA_TOL),
            gamma: t.gamma.unwrap_or(GAMMA_TOL),
            closed_form: t.closed_form.unwrap_or(1e-11),
            gamma_independence: t.gamma_independence.unwrap_or(1e-12),
            h_tau: t.h_tau.unwrap_or(1e-14),
            probe: t.probe.unwrap_or(1e-10),
            projection: t.projection.unwrap_or(1e-10),
            commutant: t.commutant.unwrap_or(1e-10),
            leakage: t.leakage.unwrap_or(1e-8),
        }
    }
}

fn build_spectra(specs: &[SpectrumSpec], dim: usize) -> Result<Vec<SpectralSequence>> {
    specs.iter().map(|s| s.build(dim)).collect()
}

fn family_of(f: FamilySpec) -> Family {
    match f {
        FamilySpec::Eds => Family::Eds,
        FamilySpec::Delta { delta } => Family::Delta { delta },
    }
}

/// Runs the experiment, timing it, and assembles the report.
pub fn run(cfg: &ExperimentConfig) -> (VerificationReport, Recorder) {
    let start = Instant::now();
    let mut rec = Recorder::default();
    let error = dispatch(cfg, &mut rec).err().map(|e| e.to_string());
    let report = VerificationReport::new(cfg, &rec, error, start.elapsed().as_secs_f64());
    (report, rec)
}

fn dispatch(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<()> {
    let tol = Tol::from(&cfg.tolerances);
    match &cfg.experiment {
        Experiment::VcsVerify {
            dim,
            family,
            spectra,
            trials,
            j_max,
            times,
            witness_offset,
        } => vcs_verify(
            rec,
            &tol,
            cfg.seed,
            *dim,
            family_of(*family),
            &build_spectra(spectra, *dim)?,
            *trials,
            *j_max,
            times,
            *witness_offset,
        ),
        Experiment::Resolution {
            dim,
            family,
            spectra,
            weights,
            horizons,
            nodes,
            decay_range,
        } => {
            let seqs = build_spectra(spectra, *dim)?;
            let mut quad = QuadratureSpec::for_dim(*dim);
            if let Some(n) = nodes {
                quad.nodes = *n;
            }
            match *family {
                FamilySpec::Delta { delta: 0.0 } => delta_zero(rec, &seqs, *dim, weights, &quad, horizons),
                f => resolution(
                    rec,
                    &tol,
                    family_of(f),
                    &seqs,
                    *dim,
                    weights,
                    &quad,
                    horizons,
                    decay_range.unwrap_or([0.8, 1.2]),
                ),
            }
        }
        Experiment::IntertwineExample {
            dim,
            example,
            spectra,
            gammas,
        } => {
            let seqs: Vec<ShiftedSequence> = build_spectra(spectra, *dim)?.iter().map(shift).collect();
            intertwine_example(rec, &tol, *dim, *example, &seqs, gammas)
        }
        Experiment::Nonisospectral { dim, ladders, map } => {
            for l in ladders {
                nonisospectral(rec, &tol, *dim, *l, map)?;
            }
            Ok(())
        }
        Experiment::CommutationProbe {
            dim,
            case,
            q,
            map,
            l_max,
            expected_deficiency,
        } => {
            let p = match case {
                ProbeCase::Boson => quon_problem(*dim, 1.0)?,
                ProbeCase::Quon => quon_problem(*dim, q.unwrap_or(1.0))?,
                ProbeCase::Invertible => invertible_problem(*dim)?,
            };
            let probe = commutation_probe(&p, map, cfg.seed)?;
            rec.at_most(
                "f(H) vs companion of f(h)",
                probe.residual,
                tol.probe,
                "numerical evidence on whether the construction commutes with f; not a proof",
            );
            rec.report(
                "f(H) vs companion of f(h), relative",
                probe.relative,
                "same, divided by max(1, |f(H)|)",
            );
            rec.report(
                "trial vectors",
                probe.trials as f64,
                "window basis plus seeded random unit vectors",
            );
            let s = sufficient_condition_check(&p, *l_max)?;
            for (l, r) in s.projection.iter().enumerate() {
                rec.at_most(
                    format!("projection identity, l = {l}"),
                    *r,
                    tol.projection,
                    "x N1^-1 x† h^l x phi = h^l x phi (sufficient condition)",
                );
            }
            rec.report("[x N1^-1 x†, h]", s.commutant, "commutant of the range projection");
            for (j, d) in s.deficiency.iter().enumerate() {
                let name = format!("rank deficiency of x, sector {j}");
                let anchor = "range of x on the window versus window dimension (diagnostic)";
                match expected_deficiency {
                    Some(e) => rec.check(
                        name,
                        *d as f64,
                        Bound::Within {
                            lo: *e as f64,
                            hi: *e as f64,
                        },
                        anchor,
                    ),
                    None => rec.report(name, *d as f64, anchor),
                }
            }
            if *case == ProbeCase::Invertible {
                rec.at_most(
                    "commutant, invertible x",
                    s.commutant,
                    tol.commutant,
                    "hypothesis of the equality criterion",
                );
            }
            Ok(())
        }
        Experiment::SusyGrid {
            superpotential,
            lo,
            hi,
            margin,
            sizes,
            map,
            hbar,
            mass,
            order_range,
        } => {
            let w = PolynomialSuperpotential {
                coeffs: superpotential.clone(),
            };
            let sweep = susy_grid_sweep(&w, *lo, *hi, *margin, sizes, *hbar, *mass, map)?;
            let range = Bound::Within {
                lo: order_range[0],
                hi: order_range[1],
            };
            for r in &sweep.rows {
                rec.report(
                    format!("commutator residual, {} points", r.points),
                    r.commutator_residual,
                    "[a, a†] = (2 hbar / sqrt(2m)) W'",
                );
                rec.report(
                    format!("H residual, {} points", r.points),
                    r.h_residual,
                    "H = f(a†a + (2 hbar / sqrt(2m)) W')",
                );
                rec.at_most(
                    format!("eigenvector leakage, {} points", r.points),
                    r.leakage,
                    tol.leakage,
                    "low eigenvectors stay inside the interior window",
                );
            }
            if sizes.len() >= 2 {
                rec.check(
                    "commutator order in the grid step",
                    sweep.commutator_order,
                    range,
                    "second-order discretization",
                );
                rec.check(
                    "H residual order in the grid step",
                    sweep.h_order,
                    range,
                    "second-order discretization",
                );
            }
            let mut t = Vec::new();
            sweep
                .write_table(&mut t)
                .map_err(|e| Error::BadParameter(e.to_string()))?;
            rec.table("grid_convergence.csv", String::from_utf8(t).unwrap_or_default());
            Ok(())
        }
    }
}

fn invertible_problem(dim: usize) -> Result<IntertwiningProblem> {
    let boson = build_boson_ladder(dim)?;
    let space = boson.lowering.space();
    let n = boson.number();
    let h = BlockOperator::hermitian(space, n.matrix().clone())?;
    let x = BlockOperator::new(space, n.matrix() + CMatrix::identity(dim, dim))?;
    IntertwiningProblem::new(h, x, 0)
}

fn sample_state(
    rng: &mut ChaCha8Rng,
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    j_max: f64,
) -> Result<CoherentState> {
    let mut last = None;
    for _ in 0..100 {
        let j: Vec<f64> = seqs.iter().map(|_| rng.random_range(0.0..j_max)).collect();
        let p = VcsParams::new(j, rng.random_range(0.0..2.0 * PI));
        match build(family, seqs, dim, &p) {
            Ok(s) => return Ok(s),
            Err(e @ (Error::TailTooLarge { .. } | Error::OutOfDisc { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

fn lowering_for(family: Family, space: SectorSpace, seqs: &[SpectralSequence], gamma: f64) -> Result<BlockOperator> {
    match family {
        Family::Eds => build_b_gamma(space, &seqs.iter().map(shift).collect::<Vec<_>>(), gamma),
        Family::Delta { .. } => build_a_gamma_delta_variant(space, seqs, gamma),
    }
}

#[allow(clippy::too_many_arguments)]
fn vcs_verify(
    rec: &mut Recorder,
    tol: &Tol,
    seed: u64,
    dim: usize,
    family: Family,
    seqs: &[SpectralSequence],
    trials: usize,
    j_max: f64,
    times: &[f64],
    witness_offset: Option<f64>,
) -> Result<()> {
    let space = SectorSpace::new(seqs.len(), dim)?;
    let truncated: Vec<SpectralSequence> = seqs.iter().map(|s| s.truncated(dim)).collect::<Result<_>>()?;
    let action_op = match family {
        Family::Eds => shifted_hamiltonian(space, &truncated.iter().map(shift).collect::<Vec<_>>())?,
        Family::Delta { .. } => hamiltonian(space, &truncated)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tail, mut norm, mut action, mut eigen) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut temporal = vec![0.0f64; times.len()];
    let mut table = None;
    for _ in 0..trials {
        let psi = sample_state(&mut rng, family, &truncated, dim, j_max)?;
        tail = tail.max(psi.tail_bound);
        norm = norm.max((psi.vector.norm() - 1.0).abs());
        action = action.max(action_identity_check(&psi, &action_op)?);
        let a = lowering_for(family, space, &truncated, psi.params.gamma)?;
        eigen = eigen.max(eigenstate_check(&psi, &a)?);
        for (k, &t) in times.iter().enumerate() {
            temporal[k] = temporal[k].max(temporal_stability_check(&truncated, dim, family, &psi.params, t)?);
        }
        if table.is_none() {
            let mut buf = Vec::new();
            psi.write_table(&mut buf)
                .map_err(|e| Error::BadParameter(e.to_string()))?;
            table = Some(String::from_utf8(buf).unwrap_or_default());
        }
    }
    rec.at_most(
        "tail bound",
        tail,
        1e-10,
        "truncated states carry negligible mass beyond D",
    );
    rec.at_most("normalization", norm, 1e-12, "unit norm on the truncated space");
    rec.at_most(
        "action identity",
        action,
        tol.action,
        "<Psi|H|Psi> = sum J_j M_j / sum M_j",
    );
    rec.at_most(
        "eigenstate",
        eigen,
        tol.eigenstate,
        "lowering operator eigenvector with eigenvalue sqrt(J_j)",
    );
    let evolution = match family {
        Family::Eds => "exp(-iHt) Psi(J, gamma) = Psi(J, gamma + t)",
        Family::Delta { .. } => "ad hoc delta evolution maps Psi(J, gamma) to Psi(J, gamma + t)",
    };
    for (k, &t) in times.iter().enumerate() {
        rec.at_most(
            format!("temporal stability, t = {t}"),
            temporal[k],
            tol.temporal,
            evolution,
        );
    }
    if let Some(off) = witness_offset {
        let j: Vec<f64> = seqs.iter().map(|_| 0.5 * j_max).collect();
        let p = VcsParams::new(j, 0.4);
        let psi = build(family, &truncated, dim, &p)?;
        let a = lowering_for(family, space, &truncated, p.gamma + off)?;
        rec.check(
            "mismatched-gamma eigenstate",
            eigenstate_check(&psi, &a)?,
            Bound::AtLeast { limit: tol.witness },
            "a lowering operator at another gamma does not have the state as eigenvector",
        );
    }
    if let Some(t) = table {
        rec.table("state.csv", t);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn resolution(
    rec: &mut Recorder,
    tol: &Tol,
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
    horizons: &[f64],
    decay: [f64; 2],
) -> Result<()> {
    let sweep = resolution_sweep(family, seqs, dim, weights, quad, horizons)?;
    let anchor = "resolution of the identity by the coherent states";
    for r in &sweep.rows {
        let g = r.grid.big_gamma;
        rec.at_most(
            format!("diagonal error, Gamma = {g:e}"),
            r.diagonal_error,
            tol.diagonal,
            anchor,
        );
        rec.at_most(
            format!("hermiticity, Gamma = {g:e}"),
            r.hermiticity,
            tol.hermiticity,
            "assembled operator is hermitian",
        );
        rec.report(
            format!("off-diagonal error, Gamma = {g:e}"),
            r.off_diagonal_error,
            "Cesaro-limited, O(1/Gamma)",
        );
        rec.report(
            format!("decay constant C = Gamma * off-diagonal, Gamma = {g:e}"),
            r.decay_constant(),
            "off-diagonal <= C / Gamma",
        );
        rec.report(
            format!("full-space residual, Gamma = {g:e}"),
            r.full_residual,
            "includes truncation-contaminated levels",
        );
    }
    if let Some(r) = sweep.rows.first() {
        rec.report(
            "moment verification error",
            r.moment_error,
            "weights reproduce the factorial moments",
        );
    }
    if horizons.len() >= 2 {
        rec.check(
            "off-diagonal decay exponent",
            -sweep.off_diagonal_slope,
            Bound::Within {
                lo: decay[0],
                hi: decay[1],
            },
            "phase average decays like 1/Gamma",
        );
    }
    let mut t = Vec::new();
    sweep
        .write_table(&mut t)
        .map_err(|e| Error::BadParameter(e.to_string()))?;
    rec.table("resolution_vs_gamma.csv", String::from_utf8(t).unwrap_or_default());
    Ok(())
}

fn delta_zero(
    rec: &mut Recorder,
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
    horizons: &[f64],
) -> Result<()> {
    let anchor = "at delta = 0 the cross-sector entry does not average out (expected failure)";
    let mut table = String::from("big_gamma,cross_entry,j_integral,cesaro\n");
    let mut values = Vec::new();
    for &g in horizons {
        let e = cross_entry(seqs, dim, 0.0, weights, &quad.with_gamma(g))?;
        table.push_str(&format!("{:e},{:e},{:e},{:e}\n", g, e.value, e.j_integral, e.cesaro));
        values.push(e.value.abs());
    }
    let first = values[0];
    rec.check("cross entry magnitude", first, Bound::AtLeast { limit: 0.5 }, anchor);
    let change = values.iter().map(|v| (v - first).abs() / first).fold(0.0, f64::max);
    rec.at_most(
        "relative change over horizons",
        change,
        0.05,
        "the failing entry is independent of Gamma",
    );
    rec.table("cross_entry.csv", table);
    Ok(())
}

fn record_certificate(rec: &mut Recorder, tol: &Tol, label: &str, c: &Certificate) {
    rec.at_most(
        format!("{label} [alpha] hermiticity, scaled"),
        c.alpha_scaled,
        tol.alpha,
        "H = H†",
    );
    rec.at_most(
        format!("{label} [beta] weak intertwining, scaled"),
        c.beta_scaled,
        tol.beta,
        "x†(xH - hx) = 0",
    );
    rec.at_most(
        format!("{label} [gamma] Rayleigh residual, scaled"),
        c.gamma_scaled,
        tol.gamma,
        "H Phi_n = e_n Phi_n for Phi_n = x† phi_n != 0",
    );
    rec.report(format!("{label} [alpha] absolute"), c.alpha, "|H - H†|_max");
    rec.report(format!("{label} [beta] absolute"), c.beta, "|x†(xH - hx)|_max");
    rec.report(
        format!("{label} [gamma] absolute"),
        c.gamma,
        "max |H Phi - e Phi| / |Phi|",
    );
}

fn diag_dev(m: &CMatrix, expected: impl Fn(usize) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let e = if i == j { expected(i) } else { 0.0 };
            worst = worst.max((m[(i, j)].re - e).abs().max(m[(i, j)].im.abs()) / e.abs().max(1.0));
        }
    }
    worst
}

fn intertwine_example(
    rec: &mut Recorder,
    tol: &Tol,
    dim: usize,
    which: usize,
    seqs: &[ShiftedSequence],
    gammas: &[f64],
) -> Result<()> {
    let degree = example_degree(which)?;
    let mut first: Option<(CMatrix, CMatrix)> = None;
    let (mut dev_h, mut dev_big) = (0.0f64, 0.0f64);
    for &g in gammas {
        let p = example_factory(which, seqs, dim, g)?;
        let r = construct_h(&p)?;
        record_certificate(rec, tol, &format!("gamma = {g}"), &r.certificate);
        let keep = p.window.keep();
        let e = |k: usize| &seqs[k / keep].values()[k % keep..];
        let n1 = diag_dev(&r.n1, |k| (1..=degree).map(|s| e(k)[s]).product());
        rec.at_most(
            format!("gamma = {g} N1 closed form, relative"),
            n1,
            tol.closed_form,
            "N1 = x†x is diagonal with products of shifted levels",
        );
        let h_expected = |k: usize| if which == 4 { e(k)[1] * e(k)[0] } else { e(k)[degree] };
        let hc = diag_dev(&r.big_h, h_expected);
        rec.at_most(
            format!("gamma = {g} H closed form, relative"),
            hc,
            tol.closed_form,
            "companion H is diagonal with the shifted spectrum of h",
        );
        let tau = h_tau_identity_check(seqs, dim, g)?;
        rec.at_most(
            format!("gamma = {g} H_tau = B†B, relative"),
            tau.relative,
            tol.h_tau,
            "every positive operator factorizes as W†W",
        );
        rec.report(
            format!("gamma = {g} H_tau = B†B, absolute"),
            tau.absolute,
            "|H_tau - B†B|_max",
        );
        let h = p.window.restrict(p.h.matrix());
        match &first {
            None => first = Some((h, r.big_h)),
            Some((h0, big0)) => {
                dev_h = dev_h.max(max_dev(h0, &h) / max_abs(h0).max(1.0));
                dev_big = dev_big.max(max_dev(big0, &r.big_h) / max_abs(big0).max(1.0));
            }
        }
    }
    if gammas.len() >= 2 {
        rec.at_most(
            "gamma independence of h, relative",
            dev_h,
            tol.gamma_independence,
            "h does not depend on gamma",
        );
        rec.at_most(
            "gamma independence of H, relative",
            dev_big,
            tol.gamma_independence,
            "H does not depend on gamma",
        );
    }
    Ok(())
}

fn nonisospectral(
    rec: &mut Recorder,
    tol: &Tol,
    dim: usize,
    ladder: LadderSpec,
    map: &crate::intertwine::SpectralMap,
) -> Result<()> {
    let q = ladder.q();
    let label = match ladder {
        LadderSpec::Boson => "boson".to_string(),
        LadderSpec::Quon { q } => format!("quon q = {q}"),
    };
    let anchor = "closed forms of N1 and H for x = (a†)^2";
    match quon_closed_forms_with(dim, q, map) {
        Ok(r) => {
            rec.at_most(
                format!("{label} N1 closed form"),
                r.n1_deviation,
                tol.closed_form,
                anchor,
            );
            rec.at_most(format!("{label} H closed form"), r.h_deviation, tol.closed_form, anchor);
        }
        Err(Error::ClosedFormMismatch { what, deviation, .. }) => {
            rec.at_most(
                format!("{label} {what} closed form"),
                deviation,
                tol.closed_form,
                anchor,
            );
        }
        Err(e) => return Err(e),
    }
    let p = quon_problem(dim, q)?;
    let r = nonisospectral_construct(&p, map)?;
    record_certificate(rec, tol, &label, &r.certificate);
    Ok(())
}
