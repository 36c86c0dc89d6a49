//! State-discrimination games and advantage ratios.
//!
//! A game is a prior `p(x)` over ensembles `{p(i|x), ρ_{i|x}}`. The player
//! learns `x`, processes the state and guesses `i`. In assisted games the
//! states live on `H ⊗ H` and preprocessing acts as `Λ_x ⊗ id`.
//!
//! The best success probability over compatible resources is linear in the
//! joint Choi matrix (or the instrument), so it is an SDP. Every success
//! probability term `Tr[(Φ ⊗ id)(ρ) E]` is rewritten as `Tr[J_Φ W]` with
//! the operator `W` from [`effect_operator`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compat::{choi_input_term, input_term};
use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix, TensorShape};
use crate::qobjects::{apply_channel, apply_channel_extended, cloning_channel, joint_shape, max_entangled_state, ChoiMatrix, Povm, PovmCollection};
use crate::random::{random_density_matrix, random_distribution, random_projective_povm, seeded_rng, trial_seed};
use crate::robustness::{WitnessOperators, WitnessSet};
use crate::sdp::{self, BlockId, SdpProblem, SolverOptions, Term};

/// Tolerance on probability normalisation.
pub const PROBABILITY_TOL: f64 = 1e-12;
/// Witness components with smaller norm are dropped from constructed games.
pub const NEGLIGIBLE_NORM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub p: f64,
    #[serde(with = "matrix::json")]
    pub state: ComplexMatrix,
}

pub type Ensemble = Vec<Member>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameJson", into = "GameJson")]
pub struct DiscriminationGame {
    pub assisted: bool,
    pub prior: Vec<f64>,
    pub ensembles: Vec<Ensemble>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct GameJson {
    assisted: bool,
    prior: Vec<f64>,
    ensembles: Vec<Ensemble>,
}

impl TryFrom<GameJson> for DiscriminationGame {
    type Error = Error;
    fn try_from(g: GameJson) -> Result<Self> {
        DiscriminationGame::new(g.prior, g.ensembles, g.assisted)
    }
}

impl From<DiscriminationGame> for GameJson {
    fn from(g: DiscriminationGame) -> Self {
        Self { assisted: g.assisted, prior: g.prior, ensembles: g.ensembles }
    }
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&v| !(0.0..=1.0 + PROBABILITY_TOL).contains(&v)) {
        return Err(Error::Contract(format!("{what} has entries outside [0, 1]")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_TOL * p.len().max(1) as f64 {
        return Err(Error::Contract(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl DiscriminationGame {
    pub fn new(prior: Vec<f64>, ensembles: Vec<Ensemble>, assisted: bool) -> Result<Self> {
        if prior.len() != ensembles.len() || prior.is_empty() {
            return Err(Error::Dimension(format!("{} priors for {} ensembles", prior.len(), ensembles.len())));
        }
        check_distribution(&prior, "prior")?;
        let state_dim = ensembles
            .iter()
            .flat_map(|e| e.first())
            .map(|m| m.state.nrows())
            .next()
            .ok_or_else(|| Error::Contract("game has no states".into()))?;
        for (x, e) in ensembles.iter().enumerate() {
            let p: Vec<f64> = e.iter().map(|m| m.p).collect();
            check_distribution(&p, &format!("ensemble {x}"))?;
            for m in e {
                if m.state.nrows() != state_dim || m.state.ncols() != state_dim {
                    return Err(Error::Dimension("all states must share one dimension".into()));
                }
                if !matrix::is_hermitian(&m.state, matrix::HERMITIAN_TOL)
                    || !matrix::is_psd(&m.state, matrix::PSD_TOL)
                    || (matrix::trace(&m.state).re - 1.0).abs() > 1e-9
                {
                    return Err(Error::Contract(format!("ensemble {x} contains an invalid state")));
                }
            }
        }
        let dim = if assisted {
            let d = (state_dim as f64).sqrt().round() as usize;
            if d * d != state_dim {
                return Err(Error::Dimension(format!("assisted states need dimension d², got {state_dim}")));
            }
            d
        } else {
            state_dim
        };
        Ok(Self { assisted, prior, ensembles, dim })
    }

    /// Dimension of the system the preprocessing acts on.
    pub fn system_dim(&self) -> usize {
        self.dim
    }

    /// Ancilla dimension (1 for unassisted games).
    pub fn ancilla_dim(&self) -> usize {
        if self.assisted {
            self.dim
        } else {
            1
        }
    }

    pub fn n(&self) -> usize {
        self.ensembles.len()
    }

    /// Same game with all weights `p(x)p(i|x)` multiplied by `factor`
    /// (the result is no longer normalised; only ratios are meaningful).
    pub fn scaled_weights(&self, factor: f64) -> Self {
        let mut g = self.clone();
        g.prior.iter_mut().for_each(|p| *p *= factor);
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game serialises")
    }
}

/// How the player processes the states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Strategy {
    /// Measure `M_x` directly.
    Direct { measurements: PovmCollection },
    /// Apply `Λ_x` (tensored with the identity on the ancilla), then measure `M_x`.
    Preprocessed { channels: Vec<ChoiMatrix>, measurements: PovmCollection },
    /// Two ensembles: measure `M ⊗ I` for the first, apply `Λ ⊗ id` and
    /// measure `L` for the second.
    Pair { povm: Povm, channel: ChoiMatrix, readout: Povm },
}

fn check_outcomes(game: &DiscriminationGame, x: usize, povm: &Povm) -> Result<()> {
    if povm.outcomes() != game.ensembles[x].len() {
        return Err(Error::Dimension(format!(
            "ensemble {x} has {} members but its measurement has {} outcomes",
            game.ensembles[x].len(),
            povm.outcomes()
        )));
    }
    Ok(())
}

fn process(game: &DiscriminationGame, ch: &ChoiMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if game.assisted {
        apply_channel_extended(ch, rho)
    } else {
        apply_channel(ch, rho)
    }
}

fn guess_value(game: &DiscriminationGame, x: usize, povm: &Povm, state: impl Fn(&ComplexMatrix) -> Result<ComplexMatrix>) -> Result<f64> {
    check_outcomes(game, x, povm)?;
    let mut acc = 0.0;
    for (m, e) in game.ensembles[x].iter().zip(&povm.elements) {
        if m.p == 0.0 {
            continue;
        }
        let rho = state(&m.state)?;
        if rho.nrows() != e.nrows() {
            return Err(Error::Dimension(format!("state of dimension {} measured on dimension {}", rho.nrows(), e.nrows())));
        }
        acc += m.p * matrix::trace_product_re(&rho, e);
    }
    Ok(game.prior[x] * acc)
}

/// `Σ_{x,i} p(x) p(i|x) Tr[ρ'_{i|x} M_{i|x}]` with `ρ'` the processed state.
pub fn success_prob(game: &DiscriminationGame, strat: &Strategy) -> Result<f64> {
    match strat {
        Strategy::Direct { measurements } => {
            if measurements.len() != game.n() {
                return Err(Error::Dimension("one measurement per ensemble is required".into()));
            }
            (0..game.n()).map(|x| guess_value(game, x, &measurements.povms[x], |r| Ok(r.clone()))).sum()
        }
        Strategy::Preprocessed { channels, measurements } => {
            if measurements.len() != game.n() || channels.len() != game.n() {
                return Err(Error::Dimension("one channel and one measurement per ensemble are required".into()));
            }
            (0..game.n())
                .map(|x| guess_value(game, x, &measurements.povms[x], |r| process(game, &channels[x], r)))
                .sum()
        }
        Strategy::Pair { povm, channel, readout } => {
            if game.n() != 2 {
                return Err(Error::Dimension("pair strategies need exactly two ensembles".into()));
            }
            let da = game.ancilla_dim();
            let first = Povm {
                dim: povm.dim * da,
                elements: povm.elements.iter().map(|m| matrix::kron(m, &matrix::identity(da))).collect(),
            };
            Ok(guess_value(game, 0, &first, |r| Ok(r.clone()))? + guess_value(game, 1, readout, |r| process(game, channel, r))?)
        }
    }
}

/// `W` on `K ⊗ H` with `Tr[(Φ ⊗ id_A)(ρ) E] = Tr[J_Φ W]` for every channel `Φ: H → K`.
///
/// `rho` lives on `H ⊗ A` and `effect` on `K ⊗ A`; `A` may be trivial.
pub fn effect_operator(rho: &ComplexMatrix, effect: &ComplexMatrix, d: usize, k: usize) -> Result<ComplexMatrix> {
    let da = rho.nrows() / d;
    if da * d != rho.nrows() || effect.nrows() != k * da {
        return Err(Error::Dimension(format!(
            "state of dimension {} and effect of dimension {} do not fit H = {d}, K = {k}",
            rho.nrows(),
            effect.nrows()
        )));
    }
    let mut w = matrix::zeros(k * d, k * d);
    let df = c(d as f64);
    for i in 0..d {
        for j in 0..d {
            // N_ij = Tr_A[(I_K ⊗ ρ_ij) E] with ρ_ij = (⟨i| ⊗ I) ρ (|j⟩ ⊗ I)
            for k1 in 0..k {
                for k2 in 0..k {
                    let mut n = Complex64::new(0.0, 0.0);
                    for a in 0..da {
                        for b in 0..da {
                            n += rho[(i * da + a, j * da + b)] * effect[(k1 * da + b, k2 * da + a)];
                        }
                    }
                    w[(k1 * d + j, k2 * d + i)] += n * df;
                }
            }
        }
    }
    Ok(w)
}

fn output_dim(game: &DiscriminationGame, measured_dim: usize) -> Result<usize> {
    let da = game.ancilla_dim();
    if !measured_dim.is_multiple_of(da) {
        return Err(Error::Dimension(format!("measurement dimension {measured_dim} is not a multiple of {da}")));
    }
    Ok(measured_dim / da)
}

/// `W_x = Σ_i p(x) p(i|x) W(ρ_{i|x}, M_{i|x})`.
fn ensemble_operator(game: &DiscriminationGame, x: usize, povm: &Povm, k: usize) -> Result<ComplexMatrix> {
    check_outcomes(game, x, povm)?;
    let d = game.system_dim();
    let mut w = matrix::zeros(k * d, k * d);
    for (m, e) in game.ensembles[x].iter().zip(&povm.elements) {
        let weight = game.prior[x] * m.p;
        if weight != 0.0 {
            w += effect_operator(&m.state, e, d, k)? * c(weight);
        }
    }
    Ok(w)
}

fn maximise(p: &SdpProblem, opts: &SolverOptions, what: &str) -> Result<f64> {
    let sol = sdp::solve(p, opts).require_optimal(what)?;
    Ok(-sol.primal_value)
}

/// Best success probability over compatible channel collections `{Φ_x}`
/// followed by the fixed measurements.
pub fn best_compatible_channels(game: &DiscriminationGame, meas: &PovmCollection, opts: &SolverOptions) -> Result<f64> {
    let n = game.n();
    if meas.len() != n {
        return Err(Error::Dimension("one measurement per ensemble is required".into()));
    }
    let (d, k) = (game.system_dim(), output_dim(game, meas.dim())?);
    let shape = joint_shape(d, k, n);
    let big = shape.dim();
    let mut cost = matrix::zeros(big, big);
    for x in 0..n {
        let w = ensemble_operator(game, x, &meas.povms[x], k)?;
        cost -= matrix::lift(&w, &shape, &[x, n])?;
    }
    let mut p = SdpProblem::new();
    let g = p.add_hermitian(big);
    p.add_objective(g, &matrix::hermitian_part(&cost))?;
    p.add_equality(&[input_term(g, d, k, n)], &(matrix::identity(d) * c(1.0 / d as f64)))?;
    maximise(&p, opts, "compatible channel optimum")
}

/// Best success probability over compatible measurement–channel pairs with
/// the fixed readout measurement `L`.
pub fn best_compatible_pair(game: &DiscriminationGame, readout: &Povm, opts: &SolverOptions) -> Result<f64> {
    if game.n() != 2 {
        return Err(Error::Dimension("pair games need exactly two ensembles".into()));
    }
    let (d, k) = (game.system_dim(), output_dim(game, readout.dim)?);
    let da = game.ancilla_dim();
    let o = game.ensembles[0].len();
    let w = ensemble_operator(game, 1, readout, k)?;
    let mut p = SdpProblem::new();
    let blocks: Vec<BlockId> = (0..o).map(|_| p.add_hermitian(k * d)).collect();
    for (i, m) in game.ensembles[0].iter().enumerate() {
        let reduced = if da > 1 {
            matrix::partial_trace(&m.state, &TensorShape::new(vec![d, da]), &[0])?
        } else {
            m.state.clone()
        };
        let v = matrix::kron(&matrix::identity(k), &reduced.transpose()) * c(d as f64 * game.prior[0] * m.p);
        p.add_objective(blocks[i], &matrix::hermitian_part(&((v + &w) * c(-1.0))))?;
    }
    let terms: Vec<Term> = blocks.iter().map(|&b| choi_input_term(b, d, k)).collect();
    p.add_equality(&terms, &(matrix::identity(d) * c(1.0 / d as f64)))?;
    maximise(&p, opts, "compatible pair optimum")
}

/// Denominator of the advantage ratio: the best compatible resource used
/// with the strategy's own measurements.
pub fn best_compatible_success(game: &DiscriminationGame, strat: &Strategy, opts: &SolverOptions) -> Result<f64> {
    match strat {
        Strategy::Direct { measurements } | Strategy::Preprocessed { measurements, .. } => {
            best_compatible_channels(game, measurements, opts)
        }
        Strategy::Pair { readout, .. } => best_compatible_pair(game, readout, opts),
    }
}

/// `P_succ(resource) / max over compatible resources`.
pub fn advantage_ratio(game: &DiscriminationGame, resource: &Strategy, opts: &SolverOptions) -> Result<f64> {
    let num = success_prob(game, resource)?;
    let den = best_compatible_success(game, resource, opts)?;
    if den <= 0.0 {
        return Err(Error::Contract(format!("compatible optimum {den} is not positive")));
    }
    Ok(num / den)
}

fn maximally_mixed(d: usize) -> ComplexMatrix {
    matrix::identity(d) * c(1.0 / d as f64)
}

/// Assisted game and measurements attaining the channel witness value.
pub fn game_from_channel_witness(w: &WitnessSet) -> Result<(DiscriminationGame, PovmCollection)> {
    let WitnessOperators::Channels { a } = &w.operators else {
        return Err(Error::Contract("expected a channel witness".into()));
    };
    let (d, k) = (w.dim_in, w.dim_out);
    let norms = a
        .iter()
        .map(|op| matrix::op_norm(&matrix::hermitian_part(op)))
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = norms.iter().map(|&v| if v < NEGLIGIBLE_NORM { 0.0 } else { v }).collect();
    let total: f64 = kept.iter().sum();
    if total == 0.0 {
        return Err(Error::DegenerateWitness("every witness component vanishes".into()));
    }
    let psi = max_entangled_state(d)?;
    let filler = maximally_mixed(d * d);
    let mut povms = Vec::with_capacity(a.len());
    let mut ensembles = Vec::with_capacity(a.len());
    for (op, &norm) in a.iter().zip(&kept) {
        let first = if norm > 0.0 { matrix::hermitian_part(op) * c(1.0 / norm) } else { matrix::zeros(k * d, k * d) };
        let second = matrix::identity(k * d) - &first;
        povms.push(Povm::new(k * d, vec![first, second])?);
        ensembles.push(vec![Member { p: 1.0, state: psi.clone() }, Member { p: 0.0, state: filler.clone() }]);
    }
    let prior = kept.iter().map(|v| v / total).collect();
    Ok((DiscriminationGame::new(prior, ensembles, true)?, PovmCollection::new(povms)?))
}

/// Assisted two-ensemble game and readout measurement attaining the pair
/// witness value.
pub fn game_from_pair_witness(w: &WitnessSet) -> Result<(DiscriminationGame, Povm)> {
    let WitnessOperators::Pair { a, b } = &w.operators else {
        return Err(Error::Contract("expected a pair witness".into()));
    };
    let (d, k, o) = (w.dim_in, w.dim_out, a.len());
    if o < 2 {
        return Err(Error::Domain("the readout needs at least two outcomes".into()));
    }
    let traces: Vec<f64> = a
        .iter()
        .map(|op| matrix::trace(op).re)
        .map(|t| if t < NEGLIGIBLE_NORM { 0.0 } else { t })
        .collect();
    let trace_sum: f64 = traces.iter().sum();
    let b = matrix::hermitian_part(b);
    let b_norm = match matrix::op_norm(&b)? {
        v if v < NEGLIGIBLE_NORM => 0.0,
        v => v,
    };
    if trace_sum + b_norm == 0.0 {
        return Err(Error::DegenerateWitness("witness operators vanish".into()));
    }
    let sigma = maximally_mixed(d);
    let filler = maximally_mixed(d * d);
    let first: Ensemble = a
        .iter()
        .zip(&traces)
        .map(|(op, &t)| {
            if t > 0.0 && trace_sum > 0.0 {
                let state = matrix::kron(&(matrix::hermitian_part(op) * c(1.0 / t)), &sigma);
                Member { p: t / trace_sum, state }
            } else {
                Member { p: if trace_sum > 0.0 { 0.0 } else { 1.0 / o as f64 }, state: filler.clone() }
            }
        })
        .collect();
    let mut second: Ensemble = vec![Member { p: 1.0, state: max_entangled_state(d)? }];
    second.extend((1..o).map(|_| Member { p: 0.0, state: filler.clone() }));
    let total = trace_sum + b_norm;
    let prior = vec![trace_sum / total, b_norm / total];

    let dim = k * d;
    let l1 = if b_norm > 0.0 { &b * c(1.0 / b_norm) } else { matrix::zeros(dim, dim) };
    let mut readout = vec![l1.clone(), matrix::identity(dim) - l1];
    readout.extend((2..o).map(|_| matrix::zeros(dim, dim)));
    Ok((DiscriminationGame::new(prior, vec![first, second], true)?, Povm::new(dim, readout)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// Largest sampled advantage of `{id, id}` over compatible channels.
    pub max_ratio: f64,
    /// `2(d+1)/(d+3)`.
    pub bound: f64,
    /// Entanglement-assisted value `2d/(d+1)`.
    pub assisted_value: f64,
    /// Largest sampled ratio against the cloning marginals.
    pub max_cloning_ratio: f64,
    /// Every sample satisfied `ratio ≤ cloning ratio ≤ bound`.
    pub chain_holds: bool,
    pub passed: bool,
}

/// Samples unassisted games for the resource `{id, id}` and compares the
/// advantage against `2(d+1)/(d+3)`.
pub fn unassisted_bound_check(d: usize, trials: usize, seed: u64, opts: &SolverOptions) -> Result<BoundCheck> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    let df = d as f64;
    let bound = 2.0 * (df + 1.0) / (df + 3.0);
    let clone = cloning_channel(d)?;
    let cloning = vec![clone.marginal(0)?, clone.marginal(1)?];
    let mut max_ratio = f64::NEG_INFINITY;
    let mut max_cloning_ratio = f64::NEG_INFINITY;
    let mut chain_holds = true;
    for t in 0..trials {
        let mut rng = seeded_rng(trial_seed(seed, t as u64));
        let prior = random_distribution(&mut rng, 2);
        let ensembles = (0..2)
            .map(|_| {
                let p = random_distribution(&mut rng, d);
                p.into_iter().map(|p| Member { p, state: random_density_matrix(&mut rng, d) }).collect()
            })
            .collect();
        let game = DiscriminationGame::new(prior, ensembles, false)?;
        let meas = PovmCollection::new(vec![random_projective_povm(&mut rng, d), random_projective_povm(&mut rng, d)])?;
        let p_id = success_prob(&game, &Strategy::Direct { measurements: meas.clone() })?;
        let p_clone = success_prob(&game, &Strategy::Preprocessed { channels: cloning.clone(), measurements: meas.clone() })?;
        let ratio = p_id / best_compatible_channels(&game, &meas, opts)?;
        let cloning_ratio = p_id / p_clone;
        chain_holds &= cloning_ratio >= ratio - 1e-7 && cloning_ratio <= bound + 1e-9;
        max_ratio = max_ratio.max(ratio);
        max_cloning_ratio = max_cloning_ratio.max(cloning_ratio);
    }
    let passed = trials > 0 && max_ratio <= bound + 1e-6 && chain_holds;
    Ok(BoundCheck {
        dim: d,
        trials,
        seed,
        max_ratio,
        bound,
        assisted_value: 2.0 * df / (df + 1.0),
        max_cloning_ratio,
        chain_holds,
        passed,
    })
}
