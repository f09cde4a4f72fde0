//! Lower and upper bounds on the joint spectral radius of a matrix set.
//!
//! Applied to a lifted set these bound the constrained JSR of its source.
//! Witness words are in canonical orientation: the product of `w` is
//! `M_{w_k} ⋯ M_{w_1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::automaton::Tsm;
use crate::error::{Error, Result};
use crate::lift::canonical_product;
use crate::linalg::{frobenius_norm, spectral_norm, spectral_radius, veronese_lift, Mat};
use crate::sdp::{self, Atom, Block, Lift, Outcome, Problem, Settings};
use crate::sos::MomentLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMethod {
    Brute,
    Gripenberg,
    SosPrimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub method: BoundsMethod,
    /// Products evaluated (enumeration, branch-and-bound) or Newton steps (SOS).
    pub budget_used: u64,
    /// Deepest product length examined.
    pub depth: usize,
    pub witness_word: Vec<usize>,
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

fn check_set(set: &[Mat]) -> Result<usize> {
    let first = set
        .first()
        .ok_or_else(|| Error::InvalidArgument("matrix set is empty".into()))?;
    let n = first.nrows();
    for a in set {
        crate::linalg::ensure_square(a)?;
        crate::linalg::ensure_finite(a, "matrix set")?;
        if a.nrows() != n {
            return Err(Error::DimensionMismatch("matrices differ in size".into()));
        }
    }
    Ok(n)
}

fn root(value: f64, k: usize) -> f64 {
    value.powf(1.0 / k as f64)
}

/// Exhaustive enumeration of all words of length `1..=k`.
///
/// `lower` is the best `ρ(P(w))^{1/|w|}` over enumerated words (restricted to
/// words accepted by `accept_filter` when given). `upper` is
/// `max_{|w| = k} ‖P(w)‖^{1/k}` without a filter and `+∞` with one.
pub fn brute_force_rho_k(set: &[Mat], k: usize, accept_filter: Option<&Tsm>) -> Result<BoundsReport> {
    brute_force_rho_k_capped(set, k, accept_filter, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_rho_k_capped(
    set: &[Mat],
    k: usize,
    accept_filter: Option<&Tsm>,
    cap: u128,
) -> Result<BoundsReport> {
    check_set(set)?;
    if k == 0 {
        return Err(Error::InvalidArgument("word length must be at least 1".into()));
    }
    if let Some(tsm) = accept_filter {
        if tsm.num_labels() != set.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices but the automaton has {} labels",
                set.len(),
                tsm.num_labels()
            )));
        }
    }
    let m = set.len() as u128;
    let mut words: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..k {
        layer = layer.saturating_mul(m);
        words = words.saturating_add(layer);
    }
    if words > cap {
        return Err(Error::EnumerationCap { words, cap });
    }

    struct Search<'a> {
        set: &'a [Mat],
        tsm: Option<&'a Tsm>,
        k: usize,
        lower: f64,
        upper: f64,
        witness: Vec<usize>,
        word: Vec<usize>,
        evaluated: u64,
    }

    impl Search<'_> {
        // Appending a letter multiplies the canonical product on the left.
        fn visit(&mut self, product: &Mat, fprod: Option<&Mat>) -> Result<()> {
            self.evaluated += 1;
            let len = self.word.len();
            let accepted = fprod.map_or(true, |f| f.iter().any(|&v| v != 0.0));
            if accepted {
                let r = root(spectral_radius(product)?, len);
                if r > self.lower {
                    self.lower = r;
                    self.witness = self.word.clone();
                }
            }
            if len == self.k {
                if self.tsm.is_none() {
                    self.upper = self.upper.max(root(spectral_norm(product), len));
                }
                return Ok(());
            }
            for (j, a) in self.set.iter().enumerate() {
                let next = a * product;
                let nf = match (self.tsm, fprod) {
                    (Some(t), Some(f)) => Some(&t.blocks()[j] * f),
                    _ => None,
                };
                self.word.push(j + 1);
                self.visit(&next, nf.as_ref())?;
                self.word.pop();
            }
            Ok(())
        }
    }

    let mut search = Search {
        set,
        tsm: accept_filter,
        k,
        lower: 0.0,
        upper: 0.0,
        witness: Vec::new(),
        word: Vec::new(),
        evaluated: 0,
    };
    for (j, a) in set.iter().enumerate() {
        let f = accept_filter.map(|t| t.blocks()[j].clone());
        search.word.push(j + 1);
        search.visit(a, f.as_ref())?;
        search.word.pop();
    }
    let upper = if accept_filter.is_some() {
        f64::INFINITY
    } else {
        search.upper
    };
    let witness = if search.witness.is_empty() {
        vec![1]
    } else {
        search.witness
    };
    Ok(BoundsReport {
        lower: search.lower,
        upper: upper.max(search.lower),
        method: BoundsMethod::Brute,
        budget_used: search.evaluated,
        depth: k,
        witness_word: witness,
    })
}

/// Result of a branch-and-bound run; words are in generation order
/// (`Π(X) = M_{x_1} ⋯ M_{x_i}`).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GripRun {
    pub alpha: f64,
    pub best_generation_word: Vec<usize>,
    pub upper: f64,
    pub depth: usize,
    pub evaluated: u64,
    pub alpha_by_depth: Vec<f64>,
}

struct Node {
    product: Mat,
    prefix_measure: f64,
    // index into the arena of the previous level plus the appended label
    parent: u32,
    label: u8,
}

/// Branch-and-bound over products, extending each surviving product on the
/// right and keeping children whose smallest prefix norm root exceeds
/// `α + ε`. Levels are expanded in FIFO order with labels ascending; ties in
/// `α` keep the first product found.
pub(crate) fn gripenberg_engine(set: &[Mat], epsilon: f64, max_depth: usize) -> Result<GripRun> {
    check_set(set)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if max_depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if set.len() > u8::MAX as usize {
        return Err(Error::InvalidArgument("at most 255 matrices are supported".into()));
    }

    let mut alpha = 0.0;
    let mut best: (usize, usize) = (0, 0); // (depth, index in that level)
    let mut frontier: Vec<Node> = Vec::with_capacity(set.len());
    for (j, a) in set.iter().enumerate() {
        let r = spectral_radius(a)?;
        if r > alpha {
            alpha = r;
            best = (1, j);
        }
        frontier.push(Node {
            product: a.clone(),
            prefix_measure: spectral_norm(a),
            parent: 0,
            label: j as u8,
        });
    }
    if alpha == 0.0 {
        return Err(Error::Degenerate("every matrix has spectral radius zero".into()));
    }
    // history[i] = (parent, label) for every node kept at depth i + 1
    let mut history: Vec<Vec<(u32, u8)>> = vec![frontier.iter().map(|n| (n.parent, n.label)).collect()];
    let mut alpha_by_depth = vec![alpha];
    let mut evaluated = set.len() as u64;
    let frontier_max = |f: &[Node]| f.iter().map(|n| n.prefix_measure).fold(0.0, f64::max);
    let mut upper = (alpha + epsilon).max(frontier_max(&frontier));
    let mut depth = 1;

    while depth < max_depth && !frontier.is_empty() {
        let i = depth + 1;
        let threshold = alpha + epsilon;
        // A child survives only if ‖ΠΦ‖^{1/i} > threshold; ‖·‖₂ ≤ ‖·‖_F allows a cheap reject.
        let power_threshold = threshold.powi(i as i32);
        let children: Vec<Vec<(Node, f64)>> = frontier
            .par_iter()
            .enumerate()
            .map(|(pi, parent)| {
                let mut out = Vec::new();
                for (j, a) in set.iter().enumerate() {
                    let product = &parent.product * a;
                    let fro = frobenius_norm(&product);
                    if fro == 0.0 || fro <= power_threshold {
                        continue;
                    }
                    let measure = parent.prefix_measure.min(root(spectral_norm(&product), i));
                    if measure <= threshold {
                        continue;
                    }
                    let r = spectral_radius(&product).map(|r| root(r, i)).unwrap_or(f64::NAN);
                    out.push((
                        Node {
                            product,
                            prefix_measure: measure,
                            parent: pi as u32,
                            label: j as u8,
                        },
                        r,
                    ));
                }
                out
            })
            .collect();
        evaluated += (frontier.len() * set.len()) as u64;

        let mut next = Vec::new();
        let mut level_best = alpha;
        let mut level_best_index = None;
        for (node, r) in children.into_iter().flatten() {
            if r.is_nan() {
                return Err(Error::Inconclusive("spectral radius did not converge".into()));
            }
            if r > level_best {
                level_best = r;
                level_best_index = Some(next.len());
            }
            next.push(node);
        }
        if next.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("frontier too large".into()));
        }
        if let Some(idx) = level_best_index {
            alpha = level_best;
            best = (i, idx);
        }
        history.push(next.iter().map(|n| (n.parent, n.label)).collect());
        frontier = next;
        depth = i;
        alpha_by_depth.push(alpha);
        upper = upper.min((alpha + epsilon).max(frontier_max(&frontier)));
    }

    // Walk parent links back to recover the best word.
    let (mut level, mut idx) = best;
    let mut word = Vec::with_capacity(level);
    while level > 0 {
        let (parent, label) = history[level - 1][idx];
        word.push(label as usize + 1);
        idx = parent as usize;
        level -= 1;
    }
    word.reverse();

    Ok(GripRun {
        alpha,
        best_generation_word: word,
        upper: upper.max(alpha),
        depth,
        evaluated,
        alpha_by_depth,
    })
}

/// Gripenberg branch-and-bound bracket `lower ≤ ρ(set) ≤ upper`.
pub fn gripenberg_bounds(set: &[Mat], epsilon: f64, max_depth: usize) -> Result<BoundsReport> {
    check_set(set)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if set.len() == 1 {
        let r = spectral_radius(&set[0])?;
        if r == 0.0 {
            return Err(Error::Degenerate("every matrix has spectral radius zero".into()));
        }
        return Ok(BoundsReport {
            lower: r,
            upper: r,
            method: BoundsMethod::Gripenberg,
            budget_used: 1,
            depth: 1,
            witness_word: vec![1],
        });
    }
    let run = gripenberg_engine(set, epsilon, max_depth)?;
    Ok(BoundsReport {
        lower: run.alpha,
        upper: run.upper,
        method: BoundsMethod::Gripenberg,
        budget_used: run.evaluated,
        depth: run.depth,
        witness_word: run.best_generation_word.into_iter().rev().collect(),
    })
}

/// `ρ(P(w))^{1/|w|}` for a canonical-orientation word.
pub fn word_value(set: &[Mat], word: &[usize]) -> Result<f64> {
    crate::automaton::validate_word(word, set.len())?;
    Ok(root(spectral_radius(&canonical_product(set, word))?, word.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosPrimalReport {
    /// Smallest `γ` at which a certificate was found; a valid upper bound.
    pub upper: f64,
    /// Largest `γ` shown infeasible (or treated as such).
    pub infeasible_below: f64,
    /// Total degree `2d`.
    pub degree: usize,
    pub bisection_steps: usize,
    /// Bisection steps whose solve was inconclusive; these were counted as
    /// infeasible, which can only loosen the bound.
    pub inconclusive_steps: usize,
    pub newton_steps: u64,
}

impl SosPrimalReport {
    /// Combine with the trivial lower bound `max_i ρ(M_i)`.
    pub fn to_bounds_report(&self, set: &[Mat]) -> Result<BoundsReport> {
        let mut lower = 0.0;
        let mut witness = vec![1];
        for (j, a) in set.iter().enumerate() {
            let r = spectral_radius(a)?;
            if r > lower {
                lower = r;
                witness = vec![j + 1];
            }
        }
        Ok(BoundsReport {
            lower,
            upper: self.upper.max(lower),
            method: BoundsMethod::SosPrimal,
            budget_used: self.newton_steps,
            depth: self.degree,
            witness_word: witness,
        })
    }
}

/// Primal SOS program at half degree `d`: find a homogeneous form `p` of
/// degree `2d` with Gram matrix `G ⪰ τI`, `tr G = 1`, such that every
/// `γ^{2d} p − p ∘ M_i` is a sum of squares. The SOS condition is modelled
/// exactly, with one free element of the Gram kernel per mode.
struct PrimalProgram {
    layout: MomentLayout,
    lifts_t: Vec<Mat>,
    norm_scale: f64,
    kernel: Vec<Vec<(usize, usize, f64)>>,
}

impl PrimalProgram {
    fn new(set: &[Mat], d: usize) -> Result<Self> {
        let n = check_set(set)?;
        let layout = MomentLayout::new(n, d)?;
        let norm_scale = set.iter().map(spectral_norm).fold(0.0, f64::max);
        if norm_scale == 0.0 {
            return Err(Error::Degenerate("every matrix is zero".into()));
        }
        let lifts_t = set
            .iter()
            .map(|a| veronese_lift(&(a / norm_scale), layout.half()).map(|v| v.transpose()))
            .collect::<Result<Vec<_>>>()?;
        // Gram matrices of the zero polynomial: for each monomial with several
        // representing pairs, differences of unit coefficient contributions.
        let s = layout.half().scales();
        let weight = |a: usize, b: usize| s[a] * s[b] * if a == b { 1.0 } else { 2.0 };
        let mut kernel = Vec::new();
        for pairs in layout.pairs() {
            let (a0, b0) = pairs[0];
            for &(a, b) in &pairs[1..] {
                kernel.push(vec![(a0, b0, 1.0 / weight(a0, b0)), (a, b, -1.0 / weight(a, b))]);
            }
        }
        Ok(Self {
            layout,
            lifts_t,
            norm_scale,
            kernel,
        })
    }

    fn gram_vars(&self) -> usize {
        let dim = self.layout.half().len();
        dim * (dim + 1) / 2
    }

    fn gram_index(&self, a: usize, b: usize) -> usize {
        let dim = self.layout.half().len();
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * dim - a * (a + 1) / 2 + b
    }

    fn num_vars(&self) -> usize {
        self.gram_vars() + self.lifts_t.len() * self.kernel.len()
    }

    fn problem(&self, gamma_scaled: f64) -> Problem {
        let dim = self.layout.half().len();
        let tau = 1e-8 / dim as f64;
        let g2d = gamma_scaled.powi(2 * self.layout.half().degree() as i32);
        let mut gram_block = Block::new(dim, vec![Lift::Identity]).with_constant(-Mat::identity(dim, dim) * tau);
        let mut mode_blocks: Vec<Block> = self
            .lifts_t
            .iter()
            .map(|vt| Block::new(dim, vec![Lift::Identity, Lift::Dense(vt.clone())]))
            .collect();
        for a in 0..dim {
            for b in a..dim {
                let var = self.gram_index(a, b);
                gram_block.push(Atom { var, weight: 1.0, lift: 0, row: a, col: b });
                for block in &mut mode_blocks {
                    block.push(Atom { var, weight: g2d, lift: 0, row: a, col: b });
                    block.push(Atom { var, weight: -1.0, lift: 1, row: a, col: b });
                }
            }
        }
        let nk = self.kernel.len();
        for (i, block) in mode_blocks.iter_mut().enumerate() {
            for (k, vec) in self.kernel.iter().enumerate() {
                let var = self.gram_vars() + i * nk + k;
                for &(a, b, w) in vec {
                    block.push(Atom { var, weight: w, lift: 0, row: a, col: b });
                }
            }
        }
        let mut blocks = vec![gram_block];
        blocks.extend(mode_blocks);
        let mut eq = Mat::zeros(1, self.num_vars());
        for a in 0..dim {
            eq[(0, self.gram_index(a, a))] = 1.0;
        }
        Problem {
            num_vars: self.num_vars(),
            blocks,
            eq,
            eq_rhs: nalgebra::DVector::from_element(1, 1.0),
        }
    }

    fn start(&self) -> Vec<f64> {
        let dim = self.layout.half().len();
        let mut y = vec![0.0; self.num_vars()];
        for a in 0..dim {
            y[self.gram_index(a, a)] = 1.0 / dim as f64;
        }
        y
    }

    fn feasible(&self, gamma_scaled: f64) -> Result<(bool, usize)> {
        let dim = self.layout.half().len();
        // Near the bound the optimal margin is tiny (~1e-11) and certifying
        // its sign takes hundreds of steps; demanding a small positive margin
        // keeps every accepted certificate valid and settles such cases fast.
        let settings = Settings {
            scale: 1.0 / dim as f64,
            threshold: 1e-7 / dim as f64,
            stop_when_feasible: true,
            gap_tol: 1e-10,
            max_newton_steps: 800,
        };
        let sol = sdp::maximize_margin(&self.problem(gamma_scaled), &self.start(), &settings)?;
        Ok((sol.outcome == Outcome::Feasible, sol.newton_steps))
    }
}

/// Upper bound from the degree-`2d` SOS program by bisection over `γ`,
/// between a short-product lower bound and `max_i ‖M_i‖` (or the quadratic
/// bound when `d > 1`).
pub fn sos_primal_upper(set: &[Mat], d: usize, bisect_tol: f64) -> Result<SosPrimalReport> {
    if d == 0 {
        return Err(Error::InvalidArgument("half degree must be at least 1".into()));
    }
    if !(bisect_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {bisect_tol}")));
    }
    let program = PrimalProgram::new(set, d)?;
    let s = program.norm_scale;
    // Short products bound the JSR from below, and no certificate exists
    // under it. Raising a quadratic certificate to the d-th power gives one of
    // degree 2d, so the cheap quadratic bound caps the search from above.
    let depth = (1..=8u32)
        .take_while(|&k| (set.len() as f64).powi(k as i32) <= 1e5)
        .last()
        .unwrap_or(1) as usize;
    let (mut lo, mut hi) = ((brute_force_rho_k(set, depth, None)?.lower / s).min(1.0), 1.0);
    let (mut steps, mut inconclusive, mut newton) = (0, 0, 0u64);
    if d > 1 {
        let base = sos_primal_upper(set, 1, bisect_tol)?;
        hi = (base.upper / s).clamp(lo, 1.0);
        newton += base.newton_steps;
    }
    while (hi - lo) * s > bisect_tol {
        let mid = 0.5 * (lo + hi);
        steps += 1;
        match program.feasible(mid) {
            Ok((true, n)) => {
                hi = mid;
                newton += n as u64;
            }
            Ok((false, n)) => {
                lo = mid;
                newton += n as u64;
            }
            Err(Error::Inconclusive(_)) => {
                inconclusive += 1;
                lo = mid;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SosPrimalReport {
        upper: hi * s,
        infeasible_below: lo * s,
        degree: 2 * d,
        bisection_steps: steps,
        inconclusive_steps: inconclusive,
        newton_steps: newton,
    })
}
