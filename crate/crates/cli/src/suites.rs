//! Verification suites and demos. Each returns its checks and a JSON body.

use qincompat_core::compat::check_channels;
use qincompat_core::games::{self, advantage_ratio, game_from_channel_witness, game_from_pair_witness, success_prob, Member};
use qincompat_core::matrix::{self, ComplexMatrix};
use qincompat_core::qobjects::{cloning_channel, cloning_visibility};
use qincompat_core::random::{random_kraus, random_povm, seeded_rng, trial_seed, SeededRng};
use qincompat_core::robustness::{
    identity_pair_closed_form, robustness_channels_dual, robustness_channels_primal, robustness_pair_dual, robustness_pair_primal,
    verify_prop1, verify_prop2,
};
use qincompat_core::{ChoiMatrix, Complex64, DiscriminationGame, Povm, PovmCollection, Result, SolverOptions, Strategy};
use serde_json::json;

use crate::report::Check;

pub const RATIO_TOL: f64 = 1e-5;
pub const ROBUSTNESS_TOL: f64 = 1e-6;
pub const BOUND_TOL: f64 = 1e-6;
pub const CLONING_TOL: f64 = 1e-9;
/// Sampled objects with smaller robustness count as compatible and are redrawn.
pub const INCOMPATIBLE_MIN: f64 = 1e-4;
const MAX_DRAWS: usize = 200;

pub type Outcome = (Vec<Check>, serde_json::Value);

fn relative(primal: f64) -> f64 {
    ROBUSTNESS_TOL * (1.0 + primal.abs())
}

/// Eigenbasis of the generalised Pauli X (the Fourier basis).
pub fn fourier_povm(d: usize) -> Result<Povm> {
    let s = 1.0 / (d as f64).sqrt();
    let u = ComplexMatrix::from_fn(d, d, |j, k| {
        Complex64::from_polar(s, 2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64)
    });
    Povm::from_basis(&u)
}

/// Channel of Kraus rank 1 or 2 (alternating with `t`), so that pairs are
/// frequently incompatible.
pub fn sample_channel(rng: &mut SeededRng, d: usize, t: usize) -> Result<ChoiMatrix> {
    ChoiMatrix::from_kraus(&random_kraus(rng, d, d, 1 + t % 2))
}

pub fn incompatible_channel_pair(seed: u64, d: usize, opts: &SolverOptions) -> Result<(Vec<ChoiMatrix>, f64)> {
    let mut rng = seeded_rng(seed);
    let mut last = None;
    for t in 0..MAX_DRAWS {
        let chs = vec![sample_channel(&mut rng, d, t)?, sample_channel(&mut rng, d, t + 1)?];
        let r = robustness_channels_primal(&chs, opts)?.primal_value;
        if r >= INCOMPATIBLE_MIN {
            return Ok((chs, r));
        }
        last = Some((chs, r));
    }
    Ok(last.expect("at least one draw"))
}

pub fn incompatible_pair(seed: u64, d: usize, opts: &SolverOptions) -> Result<(Povm, ChoiMatrix, f64)> {
    let mut rng = seeded_rng(seed);
    let mut last = None;
    for t in 0..MAX_DRAWS {
        let m = random_povm(&mut rng, d, 2);
        let ch = sample_channel(&mut rng, d, t)?;
        let r = robustness_pair_primal(&m, &ch, opts)?.primal_value;
        if r >= INCOMPATIBLE_MIN {
            return Ok((m, ch, r));
        }
        last = Some((m, ch, r));
    }
    Ok(last.expect("at least one draw"))
}

/// Advantage ratio of the game built from the channel witness.
pub fn channel_witness_ratio(chs: &[ChoiMatrix], opts: &SolverOptions) -> Result<(f64, f64)> {
    let report = robustness_channels_primal(chs, opts)?;
    let (game, meas) = game_from_channel_witness(&report.witness)?;
    let resource = Strategy::Preprocessed { channels: chs.to_vec(), measurements: meas };
    Ok((report.primal_value, advantage_ratio(&game, &resource, opts)?))
}

/// Advantage ratio of the game built from the pair witness.
pub fn pair_witness_ratio(m: &Povm, ch: &ChoiMatrix, opts: &SolverOptions) -> Result<(f64, f64)> {
    let report = robustness_pair_primal(m, ch, opts)?;
    let (game, readout) = game_from_pair_witness(&report.witness)?;
    let resource = Strategy::Pair { povm: m.clone(), channel: ch.clone(), readout };
    Ok((report.primal_value, advantage_ratio(&game, &resource, opts)?))
}

pub fn channel_witness_game(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<Outcome> {
    let id = ChoiMatrix::identity(d)?;
    let (r, ratio) = channel_witness_ratio(&[id.clone(), id], opts)?;
    let df = d as f64;
    let mut checks = vec![
        Check::close("identity pair: R_C vs (d-1)/(d+1)", r, identity_pair_closed_form(d)?, ROBUSTNESS_TOL),
        Check::close("identity pair: ratio vs 1 + R_C", ratio, 1.0 + r, RATIO_TOL),
        Check::close("identity pair: ratio vs 2d/(d+1)", ratio, 2.0 * df / (df + 1.0), RATIO_TOL),
    ];
    let mut rows = vec![json!({"instance": "identity pair", "robustness": r, "ratio": ratio})];
    for t in 0..trials {
        let (chs, _) = incompatible_channel_pair(trial_seed(seed, t as u64), d, opts)?;
        let (r, ratio) = channel_witness_ratio(&chs, opts)?;
        checks.push(Check::close(format!("random pair {t}: ratio vs 1 + R_C"), ratio, 1.0 + r, RATIO_TOL));
        rows.push(json!({"instance": format!("random pair {t}"), "robustness": r, "ratio": ratio}));
    }
    Ok((checks, json!({"dim": d, "trials": trials, "instances": rows})))
}

pub fn pair_witness_game(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<Outcome> {
    let mut instances = vec![("z-projective + identity".to_string(), Povm::computational(d), ChoiMatrix::identity(d)?)];
    for t in 0..trials {
        let (m, ch, _) = incompatible_pair(trial_seed(seed, t as u64), d, opts)?;
        instances.push((format!("random pair {t}"), m, ch));
    }
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (name, m, ch) in &instances {
        let (r, ratio) = pair_witness_ratio(m, ch, opts)?;
        checks.push(Check::close(format!("{name}: ratio vs 1 + R_MC"), ratio, 1.0 + r, RATIO_TOL));
        rows.push(json!({"instance": name, "robustness": r, "ratio": ratio}));
    }
    Ok((checks, json!({"dim": d, "trials": trials, "instances": rows})))
}

pub fn measurement_reduction(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<Outcome> {
    let mut collections = vec![("mutually unbiased pair".to_string(), PovmCollection::new(vec![Povm::computational(d), fourier_povm(d)?])?)];
    for t in 0..trials {
        let mut rng = seeded_rng(trial_seed(seed, t as u64));
        let ms = PovmCollection::new(vec![random_povm(&mut rng, d, 2), random_povm(&mut rng, d, 2)])?;
        collections.push((format!("random pair {t}"), ms));
    }
    let mut rows = Vec::new();
    let mut max_delta: f64 = 0.0;
    for (name, ms) in &collections {
        let c = verify_prop1(ms, opts)?;
        max_delta = max_delta.max(c.delta);
        rows.push(json!({"instance": name, "r_m": c.rm, "r_c": c.rc, "delta": c.delta}));
    }
    let checks = vec![Check::at_most("max |R_M - R_C|", max_delta, 0.0, ROBUSTNESS_TOL)];
    Ok((checks, json!({"dim": d, "trials": trials, "instances": rows})))
}

pub fn pair_reduction(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<Outcome> {
    let mut pairs = vec![("z-projective + identity".to_string(), Povm::computational(d), ChoiMatrix::identity(d)?)];
    for t in 0..trials {
        let mut rng = seeded_rng(trial_seed(seed, t as u64));
        let m = random_povm(&mut rng, d, 2);
        let ch = sample_channel(&mut rng, d, t)?;
        pairs.push((format!("random pair {t}"), m, ch));
    }
    let mut rows = Vec::new();
    let mut max_delta: f64 = 0.0;
    for (name, m, ch) in &pairs {
        let c = verify_prop2(m, ch, opts)?;
        max_delta = max_delta.max(c.delta);
        rows.push(json!({"instance": name, "r_mc": c.rmc, "r_c": c.rc, "delta": c.delta}));
    }
    let checks = vec![Check::at_most("max |R_MC - R_C|", max_delta, 0.0, ROBUSTNESS_TOL)];
    Ok((checks, json!({"dim": d, "trials": trials, "instances": rows})))
}

/// Distance of the cloning marginals from the depolarizing channel.
pub fn cloning_marginal_distance(d: usize) -> Result<f64> {
    let clone = cloning_channel(d)?;
    let depol = ChoiMatrix::depolarizing(d, cloning_visibility(d))?;
    let mut dist: f64 = 0.0;
    for x in 0..2 {
        dist = dist.max(matrix::max_abs(&(clone.marginal(x)?.matrix - &depol.matrix)));
    }
    Ok(dist)
}

pub fn cloning_bound(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<Outcome> {
    let df = d as f64;
    let check = games::unassisted_bound_check(d, trials, seed, opts)?;
    let checks = vec![
        Check::close("cloning visibility vs (d+2)/(2(d+1))", cloning_visibility(d), (df + 2.0) / (2.0 * (df + 1.0)), CLONING_TOL),
        Check::at_most("cloning marginals vs depolarizing", cloning_marginal_distance(d)?, 0.0, CLONING_TOL),
        Check::at_most("max sampled ratio vs 2(d+1)/(d+3)", check.max_ratio, check.bound, BOUND_TOL),
        Check::holds("ratio <= P(id,id)/P(clones) <= bound on every sample", check.chain_holds),
        Check::holds("bound < 2d/(d+1)", check.bound < check.assisted_value),
    ];
    Ok((checks, serde_json::to_value(&check).expect("bound check serialises")))
}

pub fn duality(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let id = ChoiMatrix::identity(d)?;
    let mut instances = vec![("identity pair".to_string(), vec![id.clone(), id])];
    for t in 0..trials {
        let mut rng = seeded_rng(trial_seed(seed, t as u64));
        instances.push((format!("random pair {t}"), vec![sample_channel(&mut rng, d, t)?, sample_channel(&mut rng, d, t + 1)?]));
    }
    for (name, chs) in &instances {
        let report = robustness_channels_primal(chs, opts)?;
        let witness = robustness_channels_dual(chs, opts)?;
        let p = report.primal_value;
        checks.push(Check::close(format!("{name}: primal vs dual"), p, report.dual_value, relative(p)));
        checks.push(Check::close(format!("{name}: primal vs dual program"), p, witness.value, relative(p)));
        rows.push(json!({"instance": name, "primal": p, "dual": report.dual_value, "dual_program": witness.value}));
    }
    let (m, ch) = (Povm::computational(d), ChoiMatrix::identity(d)?);
    let report = robustness_pair_primal(&m, &ch, opts)?;
    let witness = robustness_pair_dual(&m, &ch, opts)?;
    let p = report.primal_value;
    checks.push(Check::close("z-projective + identity: primal vs dual", p, report.dual_value, relative(p)));
    checks.push(Check::close("z-projective + identity: primal vs dual program", p, witness.value, relative(p)));
    rows.push(json!({"instance": "z-projective + identity", "primal": p, "dual": report.dual_value, "dual_program": witness.value}));
    Ok((checks, json!({"dim": d, "trials": trials, "instances": rows})))
}

pub fn demo_identity_pair(d: usize, opts: &SolverOptions) -> Result<Outcome> {
    let id = ChoiMatrix::identity(d)?;
    let report = robustness_channels_primal(&[id.clone(), id], opts)?;
    let df = d as f64;
    let r = report.primal_value;
    let checks = vec![
        Check::close("R_C vs (d-1)/(d+1)", r, identity_pair_closed_form(d)?, ROBUSTNESS_TOL),
        Check::close("1 + R_C vs 2d/(d+1)", 1.0 + r, 2.0 * df / (df + 1.0), ROBUSTNESS_TOL),
    ];
    let body = json!({"dim": d, "robustness": r, "advantage": 1.0 + r, "expected_advantage": 2.0 * df / (df + 1.0), "report": report});
    Ok((checks, body))
}

pub fn bb84_game() -> Result<(DiscriminationGame, PovmCollection)> {
    let z = Povm::computational(2);
    let x = fourier_povm(2)?;
    let ensembles = [&z, &x]
        .iter()
        .map(|m| m.elements.iter().map(|e| Member { p: 0.5, state: e.clone() }).collect())
        .collect();
    Ok((DiscriminationGame::new(vec![0.5, 0.5], ensembles, false)?, PovmCollection::new(vec![z, x])?))
}

pub fn demo_bb84(opts: &SolverOptions) -> Result<Outcome> {
    let (game, meas) = bb84_game()?;
    let strategy = Strategy::Direct { measurements: meas.clone() };
    let p = success_prob(&game, &strategy)?;
    let compatible = games::best_compatible_channels(&game, &meas, opts)?;
    let checks = vec![Check::close("success probability with matched projectors", p, 1.0, 1e-12)];
    Ok((checks, json!({"success_probability": p, "best_compatible": compatible, "ratio": p / compatible, "game": game})))
}

pub fn demo_cloning(d: usize, opts: &SolverOptions) -> Result<Outcome> {
    let df = d as f64;
    let clone = cloning_channel(d)?;
    let marginals = vec![clone.marginal(0)?, clone.marginal(1)?];
    let verdict = check_channels(&marginals, opts)?;
    let c = cloning_visibility(d);
    let checks = vec![
        Check::close("visibility vs (d+2)/(2(d+1))", c, (df + 2.0) / (2.0 * (df + 1.0)), CLONING_TOL),
        Check::at_most("marginals vs depolarizing", cloning_marginal_distance(d)?, 0.0, CLONING_TOL),
        Check::holds("marginals compatible", verdict.compatible),
    ];
    Ok((checks, json!({"dim": d, "visibility": c, "margin": verdict.margin})))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_basis_is_unbiased() {
        let f = fourier_povm(3).unwrap();
        let z = Povm::computational(3);
        for a in &f.elements {
            for b in &z.elements {
                assert!((matrix::trace_product_re(a, b) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_pairs_are_incompatible() {
        let opts = SolverOptions::default();
        for s in 0..3 {
            let (_, r) = incompatible_channel_pair(s, 2, &opts).unwrap();
            assert!(r >= INCOMPATIBLE_MIN);
            let (_, _, r) = incompatible_pair(s, 2, &opts).unwrap();
            assert!(r >= INCOMPATIBLE_MIN);
        }
    }

    #[test]
    fn demos_pass() {
        let opts = SolverOptions::default();
        for (checks, _) in [demo_bb84(&opts).unwrap(), demo_cloning(2, &opts).unwrap(), demo_identity_pair(3, &opts).unwrap()] {
            assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        }
    }
}
