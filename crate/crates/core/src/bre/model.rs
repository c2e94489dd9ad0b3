//! Reduced Λ system: one active atom in `|e>` or `|r>` over a frozen
//! background of `|g>` bosons, evolved with the non-Hermitian effective
//! Hamiltonian until its first photon escapes.
//!
//! Every time-ordered integral `∫ e^{L0 t} C dt` is a Sylvester solve
//! `G X + X G^H = -C` with `G = -i H0`. Since `H0` never changes the `|g>`
//! configuration, operators are stored as dense blocks indexed by a pair of
//! configurations and each block is solved on its own.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::franck_condon::{CouplingTensor, Direction};
use super::sylvester::{schur, solve_triangular, CMatrix, Lyapunov};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Rates and couplings of the reduced Λ system (units of choice, usually `gamma_er = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSystemSpec {
    /// Amplitude decay rate of `|e>` on the fast `e -> r` line.
    pub gamma_er: f64,
    /// Amplitude decay rate on the slow `e -> g` line.
    pub gamma_eg: f64,
    /// Rabi frequency of the `r <-> e` laser.
    pub omega_rabi: f64,
    /// Laser detuning `omega_L - omega_0`.
    pub delta: f64,
    /// Common trap frequency of `|e>`, `|r>` and `|g>`.
    pub omega_trap: f64,
    /// Lamb-Dicke parameter of the slow line.
    pub eta: f64,
}

impl Default for LambdaSystemSpec {
    fn default() -> Self {
        Self {
            gamma_er: 1.0,
            gamma_eg: 1e-3,
            omega_rabi: 0.0,
            delta: 0.0,
            omega_trap: 0.01,
            eta: 0.3,
        }
    }
}

impl LambdaSystemSpec {
    pub fn epsilon(&self) -> f64 {
        self.gamma_eg / self.gamma_er
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.gamma_eg = epsilon * self.gamma_er;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_er > 0.0 && self.gamma_er.is_finite()) {
            return Err(Error::invalid("gamma_er must be positive"));
        }
        if !(self.gamma_eg >= 0.0 && self.gamma_eg.is_finite()) {
            return Err(Error::invalid("gamma_eg must be non-negative"));
        }
        if !(self.omega_rabi >= 0.0 && self.omega_trap >= 0.0 && self.eta >= 0.0) {
            return Err(Error::invalid("omega_rabi, omega_trap and eta must be non-negative"));
        }
        if ![self.omega_rabi, self.delta, self.omega_trap, self.eta]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::invalid("Λ-system parameters must be finite"));
        }
        Ok(())
    }
}

/// Internal and motional state the active atom starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialLevel {
    Excited(usize),
    Auxiliary(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedBREModel {
    /// Retained oscillator levels, shared by `|e>`, `|r>` and `|g>`.
    pub levels: usize,
    /// Background `|g>` occupations, one entry per level.
    pub background: Vec<u64>,
    pub initial: InitialLevel,
    /// Number of reabsorption transfers kept by the non-perturbative route.
    pub transfers: usize,
}

impl ReducedBREModel {
    /// `n0` condensed atoms in level 0, other levels empty, atom in `|e, 0>`.
    pub fn with_condensate(levels: usize, n0: u64) -> Self {
        let mut background = vec![0; levels];
        if levels > 0 {
            background[0] = n0;
        }
        Self {
            levels,
            background,
            initial: InitialLevel::Excited(0),
            transfers: 2,
        }
    }

    pub fn condensate(&self) -> u64 {
        self.background.first().copied().unwrap_or(0)
    }

    /// Same model with `extra` more (empty) levels.
    pub fn widened(&self, extra: usize) -> Self {
        let mut wide = self.clone();
        wide.levels += extra;
        wide.background.resize(wide.levels, 0);
        wide
    }

    pub fn validate(&self, spec: &LambdaSystemSpec) -> Result<()> {
        spec.validate()?;
        if self.levels == 0 {
            return Err(Error::invalid("the reduced model needs at least one level"));
        }
        if self.background.len() != self.levels {
            return Err(Error::invalid("background occupations must list every level"));
        }
        let (level, aux) = match self.initial {
            InitialLevel::Excited(l) => (l, false),
            InitialLevel::Auxiliary(l) => (l, true),
        };
        if level >= self.levels {
            return Err(Error::invalid("initial level outside the retained levels"));
        }
        if aux && spec.omega_rabi <= 0.0 {
            return Err(Error::invalid("an atom starting in |r> needs omega_rabi > 0"));
        }
        Ok(())
    }
}

type Config = Vec<u64>;
type BlockOp = BTreeMap<(usize, usize), CMatrix>;

/// Probabilities of fast-line outcomes grouped by how the background changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeClasses {
    /// Background unchanged.
    pub neutral: f64,
    /// One condensed atom moved to an excited level.
    pub bad: f64,
    /// One excited-level atom moved into the condensate.
    pub good: f64,
    /// Any other change.
    pub other: f64,
}

impl OutcomeClasses {
    pub fn total(&self) -> f64 {
        self.neutral + self.bad + self.good + self.other
    }
}

/// Order-by-order probabilities of the expansion in `gamma_eg`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderTerms {
    /// Fast escape, no slow-line coupling.
    pub a0: f64,
    /// Slow escape, no reabsorption.
    pub a1a: f64,
    /// First-order correction to fast escape.
    pub a1b: f64,
    pub a2a_neutral: f64,
    pub a2a_bad: f64,
    pub a2a_good: f64,
    pub a2a_other: f64,
    /// First-order correction to slow escape.
    pub a2b: f64,
    /// Part of `a1b` whose final state changes the background (zero by construction).
    pub a1b_population_changing: f64,
    /// Part of `a2b` whose final state moves a background atom (zero by construction).
    pub a2b_population_changing: f64,
}

impl OrderTerms {
    pub fn a2a(&self) -> f64 {
        self.a2a_neutral + self.a2a_bad + self.a2a_good + self.a2a_other
    }

    pub fn total(&self) -> f64 {
        self.a0 + self.a1a + self.a1b + self.a2a() + self.a2b
    }

    pub fn residual(&self) -> f64 {
        1.0 - self.total()
    }
}

/// Non-perturbative escape probabilities on the transfer-truncated space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactProbabilities {
    pub fast: OutcomeClasses,
    /// Slow-line escape, all final states.
    pub slow: f64,
    /// Slow-line escape with a background atom moved as well.
    pub slow_population_changing: f64,
    /// Basis states retained (configurations times active-atom states).
    pub dimension: usize,
}

impl ExactProbabilities {
    pub fn total(&self) -> f64 {
        self.fast.total() + self.slow
    }
}

struct Interner {
    list: Vec<Config>,
    index: HashMap<Config, usize>,
}

impl Interner {
    fn new() -> Self {
        Self {
            list: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn intern(&mut self, c: Config) -> usize {
        if let Some(&k) = self.index.get(&c) {
            return k;
        }
        let k = self.list.len();
        self.index.insert(c.clone(), k);
        self.list.push(c);
        k
    }
}

/// Assembled operators of one (model, spec) pair.
struct System {
    spec: LambdaSystemSpec,
    levels: usize,
    /// Active-atom dimension: `levels` for `|e>`, doubled when `|r>` is coupled.
    dim: usize,
    tensor: CouplingTensor,
    h_act: CMatrix,
    schur_u: CMatrix,
    schur_t: CMatrix,
    initial_config: Config,
    initial_index: usize,
    configs: Interner,
}

impl System {
    fn new(model: &ReducedBREModel, spec: &LambdaSystemSpec) -> Result<Self> {
        model.validate(spec)?;
        let m = model.levels;
        let with_aux = spec.omega_rabi > 0.0;
        let dim = if with_aux { 2 * m } else { m };
        let mut h = CMatrix::zeros(dim, dim);
        for l in 0..m {
            h[(l, l)] = Complex64::new(spec.omega_trap * l as f64 - spec.delta, -spec.gamma_er);
            if with_aux {
                h[(m + l, m + l)] = Complex64::new(spec.omega_trap * l as f64, 0.0);
                h[(l, m + l)] = Complex64::new(0.5 * spec.omega_rabi, 0.0);
                h[(m + l, l)] = Complex64::new(0.5 * spec.omega_rabi, 0.0);
            }
        }
        let (schur_u, schur_t) = schur(&(h.clone() * -I))?;
        let initial_index = match model.initial {
            InitialLevel::Excited(l) => l,
            InitialLevel::Auxiliary(l) => m + l,
        };
        let mut configs = Interner::new();
        configs.intern(model.background.clone());
        Ok(Self {
            spec: *spec,
            levels: m,
            dim,
            tensor: CouplingTensor::new(m, spec.eta),
            h_act: h,
            schur_u,
            schur_t,
            initial_config: model.background.clone(),
            initial_index,
            configs,
        })
    }

    fn energy(&self, c: &[u64]) -> f64 {
        self.spec.omega_trap * c.iter().enumerate().map(|(m, &n)| m as f64 * n as f64).sum::<f64>()
    }

    fn initial_state(&self) -> BlockOp {
        let mut rho = CMatrix::zeros(self.dim, self.dim);
        rho[(self.initial_index, self.initial_index)] = Complex64::new(1.0, 0.0);
        BTreeMap::from([((0, 0), rho)])
    }

    /// Blocks of `H1` leaving configuration `c`: target configuration and the
    /// `dim x dim` matrix acting on the active atom. Sorted by target.
    fn h1_from(&self, c: &[u64]) -> Vec<(Config, CMatrix)> {
        let m = self.levels;
        let mut out: BTreeMap<Config, CMatrix> = BTreeMap::new();
        if self.spec.gamma_eg == 0.0 {
            return Vec::new();
        }
        for mp in 0..m {
            let created = c[mp] + 1;
            for mm in 0..m {
                let available = c[mm] + u64::from(mm == mp);
                if available == 0 {
                    continue;
                }
                let factor = ((created * available) as f64).sqrt();
                let mut target = c.to_vec();
                target[mp] += 1;
                target[mm] -= 1;
                let block = out.entry(target).or_insert_with(|| CMatrix::zeros(self.dim, self.dim));
                for l in 0..m {
                    for lp in 0..m {
                        block[(l, lp)] += -I * self.spec.gamma_eg * factor * self.tensor.alpha(l, mm, mp, lp);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// `X = ∫ e^{L0 t} Y dt`, block by block.
    fn resolvent(&self, y: &BlockOp) -> BlockOp {
        let mut out = BTreeMap::new();
        let shift = |e: f64| &self.schur_t - CMatrix::identity(self.dim, self.dim) * (I * e);
        for (&(i, j), block) in y {
            let ta = shift(self.energy(&self.configs.list[i]));
            let sb = shift(self.energy(&self.configs.list[j]));
            let rhs = -(self.schur_u.adjoint() * block * &self.schur_u);
            let x = solve_triangular(&ta, &sb, &rhs);
            out.insert((i, j), &self.schur_u * x * self.schur_u.adjoint());
        }
        out
    }

    /// `L1 X = -i H1 X + i X H1^H`.
    fn apply_l1(&mut self, x: &BlockOp) -> BlockOp {
        let mut out: BlockOp = BTreeMap::new();
        let add = |out: &mut BlockOp, key: (usize, usize), m: CMatrix| {
            if let Some(b) = out.get_mut(&key) {
                *b += m;
            } else {
                out.insert(key, m);
            }
        };
        for (&(i, j), block) in x {
            let ci = self.configs.list[i].clone();
            for (target, h) in self.h1_from(&ci) {
                let k = self.configs.intern(target);
                add(&mut out, (k, j), (&h * block) * -I);
            }
            let cj = self.configs.list[j].clone();
            for (target, h) in self.h1_from(&cj) {
                let k = self.configs.intern(target);
                add(&mut out, (i, k), (block * h.adjoint()) * I);
            }
        }
        out
    }

    /// Fast-line jump: trace out the active atom from its `|e>` population.
    fn jump_fast(&self, x: &BlockOp) -> BTreeMap<Config, f64> {
        let mut out = BTreeMap::new();
        for (&(i, j), block) in x {
            if i != j {
                continue;
            }
            let pop: f64 = (0..self.levels).map(|l| block[(l, l)].re).sum();
            *out.entry(self.configs.list[i].clone()).or_insert(0.0) += 2.0 * self.spec.gamma_er * pop;
        }
        out
    }

    /// Slow-line jump: the active atom lands in `|g, m'>`.
    fn jump_slow(&self, x: &BlockOp) -> BTreeMap<Config, f64> {
        let m = self.levels;
        let mut out = BTreeMap::new();
        if self.spec.gamma_eg == 0.0 {
            return out;
        }
        for (&(i, j), block) in x {
            let (ci, cj) = (&self.configs.list[i], &self.configs.list[j]);
            for mp in 0..m {
                let mut f = ci.clone();
                f[mp] += 1;
                for mpp in 0..m {
                    let matches = f
                        .iter()
                        .zip(cj.iter())
                        .enumerate()
                        .all(|(k, (&a, &b))| a == b + u64::from(k == mpp));
                    if !matches {
                        continue;
                    }
                    let scale = ((ci[mp] + 1) as f64 * (cj[mpp] + 1) as f64).sqrt();
                    let mut amp = ZERO;
                    for dir in [Direction::Forward, Direction::Backward] {
                        let eta = self.tensor.factors(dir);
                        for lp in 0..m {
                            for lpp in 0..m {
                                amp += 0.5 * eta[(lp, mp)].conj() * block[(lp, lpp)] * eta[(lpp, mpp)];
                            }
                        }
                    }
                    *out.entry(f.clone()).or_insert(0.0) += 2.0 * self.spec.gamma_eg * scale * amp.re;
                }
            }
        }
        out
    }

    fn classify_fast(&self, outcomes: &BTreeMap<Config, f64>) -> OutcomeClasses {
        let mut classes = OutcomeClasses::default();
        for (f, &p) in outcomes {
            let diff: Vec<i64> = f
                .iter()
                .zip(&self.initial_config)
                .map(|(&a, &b)| a as i64 - b as i64)
                .collect();
            let moved_from = |m: usize| diff[m] == -1;
            let single = diff.iter().filter(|&&d| d != 0).count() == 2 && diff.iter().sum::<i64>() == 0;
            if diff.iter().all(|&d| d == 0) {
                classes.neutral += p;
            } else if single && moved_from(0) {
                classes.bad += p;
            } else if single && diff[0] == 1 {
                classes.good += p;
            } else {
                classes.other += p;
            }
        }
        classes
    }

    /// Slow outcomes that are not "initial background plus the emitted atom".
    fn slow_population_changing(&self, outcomes: &BTreeMap<Config, f64>) -> f64 {
        outcomes
            .iter()
            .filter(|(f, _)| {
                let added: Vec<i64> = f
                    .iter()
                    .zip(&self.initial_config)
                    .map(|(&a, &b)| a as i64 - b as i64)
                    .collect();
                !(added.iter().all(|&d| d == 0 || d == 1) && added.iter().sum::<i64>() == 1)
            })
            .map(|(_, &p)| p)
            .sum()
    }
}

fn total(outcomes: &BTreeMap<Config, f64>) -> f64 {
    outcomes.values().sum()
}

/// Evaluates the time-ordered integrals of the expansion up to second order.
pub fn compute_order_terms(model: &ReducedBREModel, spec: &LambdaSystemSpec) -> Result<OrderTerms> {
    let mut sys = System::new(model, spec)?;
    let rho0 = sys.initial_state();
    let x0 = sys.resolvent(&rho0);
    let y1 = sys.apply_l1(&x0);
    let x1 = sys.resolvent(&y1);
    let y2 = sys.apply_l1(&x1);
    let x2 = sys.resolvent(&y2);

    let fast0 = sys.jump_fast(&x0);
    let fast1 = sys.jump_fast(&x1);
    let fast2 = sys.jump_fast(&x2);
    let slow0 = sys.jump_slow(&x0);
    let slow1 = sys.jump_slow(&x1);
    let classes = sys.classify_fast(&fast2);
    let a1b_classes = sys.classify_fast(&fast1);
    Ok(OrderTerms {
        a0: total(&fast0),
        a1a: total(&slow0),
        a1b: total(&fast1),
        a2a_neutral: classes.neutral,
        a2a_bad: classes.bad,
        a2a_good: classes.good,
        a2a_other: classes.other,
        a2b: total(&slow1),
        a1b_population_changing: a1b_classes.total() - a1b_classes.neutral,
        a2b_population_changing: sys.slow_population_changing(&slow1),
    })
}

/// Escape probabilities with the full `H_eff`, keeping every configuration
/// reachable in at most `model.transfers` reabsorption transfers.
pub fn exact_probabilities(model: &ReducedBREModel, spec: &LambdaSystemSpec) -> Result<ExactProbabilities> {
    let mut sys = System::new(model, spec)?;
    // Breadth-first enumeration of the retained configurations.
    let mut frontier = vec![0usize];
    let mut kept: BTreeSet<usize> = BTreeSet::from([0]);
    for _ in 0..model.transfers {
        let mut next = Vec::new();
        for &k in &frontier {
            let c = sys.configs.list[k].clone();
            for (target, _) in sys.h1_from(&c) {
                let t = sys.configs.intern(target);
                if kept.insert(t) {
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    let order: Vec<usize> = kept.iter().copied().collect();
    let position: HashMap<usize, usize> = order.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let d = sys.dim;
    let n = order.len() * d;
    let mut h = CMatrix::zeros(n, n);
    for (p, &k) in order.iter().enumerate() {
        let c = sys.configs.list[k].clone();
        let e = sys.energy(&c);
        for a in 0..d {
            for b in 0..d {
                h[(p * d + a, p * d + b)] = sys.h_act[(a, b)];
            }
            h[(p * d + a, p * d + a)] += e;
        }
        for (target, block) in sys.h1_from(&c) {
            let Some(&q) = sys.configs.index.get(&target).and_then(|t| position.get(t)) else {
                continue;
            };
            for a in 0..d {
                for b in 0..d {
                    h[(q * d + a, p * d + b)] += block[(a, b)];
                }
            }
        }
    }
    let g = h * -I;
    let mut rho0 = CMatrix::zeros(n, n);
    let start = position[&0] * d + sys.initial_index;
    rho0[(start, start)] = Complex64::new(1.0, 0.0);
    let x = Lyapunov::new(&g)?.solve(&(-rho0));

    let mut blocks: BlockOp = BTreeMap::new();
    for (p, &i) in order.iter().enumerate() {
        for (q, &j) in order.iter().enumerate() {
            blocks.insert((i, j), x.view((p * d, q * d), (d, d)).into_owned());
        }
    }
    let fast = sys.jump_fast(&blocks);
    let slow = sys.jump_slow(&blocks);
    Ok(ExactProbabilities {
        fast: sys.classify_fast(&fast),
        slow: total(&slow),
        slow_population_changing: sys.slow_population_changing(&slow),
        dimension: n,
    })
}

/// Integrand of the condensate-depleting part of `A2a` at separation
/// `tau = t' - t''` between the ket-side and bra-side transfers.
///
/// `A2a_bad = 2 Re ∫_0^∞ F(tau) dtau`.
pub fn a2a_bad_correlation(model: &ReducedBREModel, spec: &LambdaSystemSpec, tau: f64) -> Result<Complex64> {
    let mut sys = System::new(model, spec)?;
    let x0 = sys.resolvent(&sys.initial_state());
    let x0 = &x0[&(0, 0)];
    let propagator = |e: f64| ((sys.h_act.clone() + CMatrix::identity(sys.dim, sys.dim) * Complex64::new(e, 0.0)) * (-I * tau)).exp();
    let u0 = propagator(sys.energy(&sys.initial_config));
    let mut acc = BTreeMap::new();
    for (target, b) in sys.h1_from(&sys.initial_config.clone()) {
        if target == sys.initial_config {
            continue;
        }
        let ub = propagator(sys.energy(&target));
        let k = sys.configs.intern(target);
        let m = &b * (&u0 * x0) * b.adjoint() * ub.adjoint();
        acc.insert((k, k), m);
    }
    let x = sys.resolvent(&acc);
    let mut f = ZERO;
    for (&(k, _), block) in &x {
        let outcome = BTreeMap::from([(sys.configs.list[k].clone(), 1.0)]);
        if sys.classify_fast(&outcome).bad > 0.0 {
            let trace: Complex64 = (0..sys.levels).map(|l| block[(l, l)]).sum();
            f += 2.0 * sys.spec.gamma_er * trace;
        }
    }
    Ok(f)
}
