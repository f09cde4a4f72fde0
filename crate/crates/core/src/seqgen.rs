//! Generation of high-growth accepted switching sequences.
//!
//! Two generators work on the lifted set:
//!
//! * [`alg1_generate`] greedily follows dual pseudo-expectations: each block
//!   of `h` labels maximises `Ẽ_{τ_h}[p(Φ_{τ_1} ⋯ Φ_{τ_h} x)]` for the current
//!   form `p`, then replaces `p` by `p ∘ (Φ_{τ_1} ⋯ Φ_{τ_h})`.
//! * [`alg2_generate`] runs the branch-and-bound search and keeps the product
//!   with the best averaged spectral radius.
//!
//! Both compose products in generation order `Φ_{σ_1} ⋯ Φ_{σ_k}`, which is the
//! canonical product of the *reversed* word; [`SwitchingWord::canonical`]
//! returns that reversal, on which acceptance and cycle checks operate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::automaton::{find_cycle_path, is_accepted, AcceptancePath, Dfa, Tsm};
use crate::bounds::gripenberg_engine;
use crate::error::{Error, Result};
use crate::lift::{canonical_product, LiftedSet, MatrixSet};
use crate::linalg::{scaled_product, spectral_norm, spectral_radius, veronese_lift, Mat, MonomialBasis};
use crate::sos::{pairing, DualCertificate, MomentLayout};

pub const DEFAULT_TUPLE_CAP: u64 = 1_000_000;
pub const DEFAULT_MAX_CYCLE_LEN: usize = 12;
pub const SUCCESS_TOL: f64 = 1e-6;

/// A homogeneous form `p(x) = x^[d]ᵀ G x^[d]`, stored as `exp(log_scale) · G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPoly {
    pub basis: MonomialBasis,
    pub gram: Mat,
    pub log_scale: f64,
}

/// Relative ridge added to the sampled Gram matrix to keep it strictly positive definite.
pub const P0_RIDGE: f64 = 1e-6;

/// A seeded random form in the interior of the SOS cone: `G = RRᵀ + ridge`,
/// `R` standard normal, normalised to unit trace.
pub fn random_interior_poly(basis: &MonomialBasis, seed: u64) -> GramPoly {
    let n = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = Mat::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let mut g = &r * r.transpose();
    let ridge = P0_RIDGE * g.trace() / n as f64;
    for i in 0..n {
        g[(i, i)] += ridge;
    }
    let tr = g.trace();
    g /= tr;
    GramPoly {
        basis: basis.clone(),
        gram: (&g + g.transpose()) * 0.5,
        log_scale: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `labels[0]` is read first; the product is `M_{l_k} ⋯ M_{l_1}`.
    ReadsLeftToRight,
    /// Generation order; the product is `M_{l_1} ⋯ M_{l_k}`.
    ReadsRightToLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordSource {
    Alg1,
    Alg2,
    Brute,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingWord {
    pub labels: Vec<usize>,
    pub orientation: Orientation,
    /// `ln θ` at the start and after every block (dual generator only).
    pub log_theta: Vec<f64>,
    pub source: WordSource,
}

impl SwitchingWord {
    pub fn canonical_word(labels: Vec<usize>, source: WordSource) -> Self {
        Self {
            labels,
            orientation: Orientation::ReadsLeftToRight,
            log_theta: Vec::new(),
            source,
        }
    }

    /// The word in reading order.
    pub fn canonical(&self) -> Vec<usize> {
        match self.orientation {
            Orientation::ReadsLeftToRight => self.labels.clone(),
            Orientation::ReadsRightToLeft => self.labels.iter().rev().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Greedy generation from a dual certificate: `k / h` blocks of `h` labels.
pub fn alg1_generate(
    lifted: &LiftedSet,
    cert: &DualCertificate,
    h: usize,
    k: usize,
    seed: u64,
) -> Result<SwitchingWord> {
    let basis = MonomialBasis::new(lifted.dim(), cert.degree() / 2)?;
    let p0 = random_interior_poly(&basis, seed);
    alg1_generate_from(lifted, cert, h, k, &p0)
}

/// As [`alg1_generate`], starting from a given form.
pub fn alg1_generate_from(
    lifted: &LiftedSet,
    cert: &DualCertificate,
    h: usize,
    k: usize,
    p0: &GramPoly,
) -> Result<SwitchingWord> {
    let m = lifted.num_modes();
    if h == 0 || k == 0 || k % h != 0 {
        return Err(Error::InvalidArgument(format!(
            "run length {k} must be a positive multiple of the horizon {h}"
        )));
    }
    if (m as f64).powi(h as i32) > DEFAULT_TUPLE_CAP as f64 {
        return Err(Error::InvalidArgument(format!(
            "{m}^{h} candidate tuples exceed the cap of {DEFAULT_TUPLE_CAP}"
        )));
    }
    if cert.duals.len() != m || cert.duals.iter().any(|e| e.num_vars != lifted.dim()) {
        return Err(Error::DimensionMismatch(
            "certificate does not belong to this lifted set".into(),
        ));
    }
    let d = cert.degree() / 2;
    if d == 0 || p0.basis.degree() != d || p0.basis.num_vars() != lifted.dim() {
        return Err(Error::DimensionMismatch("initial form does not match the certificate degree".into()));
    }
    let layout = MomentLayout::new(lifted.dim(), d)?;
    let moments: Vec<Mat> = cert
        .duals
        .iter()
        .map(|e| layout.moment_matrix(e))
        .collect::<Result<_>>()?;
    let lifts: Vec<Mat> = lifted
        .phis()
        .iter()
        .map(|p| veronese_lift(p, layout.half()))
        .collect::<Result<_>>()?;

    let mut g = p0.gram.clone();
    let mut log_scale = p0.log_scale;
    let theta0: f64 = moments.iter().map(|mm| pairing(&g, mm)).sum();
    if !(theta0 > 0.0) {
        return Err(Error::DegenerateCertificate(format!("initial pairing {theta0:e} is not positive")));
    }
    let mut log_theta = vec![log_scale + theta0.ln()];
    let mut labels = Vec::with_capacity(k);
    let mut tuple = vec![0usize; h];

    for _ in 0..k / h {
        let mut best = Best {
            value: f64::NEG_INFINITY,
            tuple: Vec::new(),
            gram: Mat::zeros(0, 0),
        };
        search_tuples(&g, &lifts, &moments, &mut tuple, 0, &mut best);
        if !(best.value > 0.0) {
            return Err(Error::DegenerateCertificate(format!(
                "best block value {:e} is not positive",
                best.value
            )));
        }
        log_theta.push(log_scale + best.value.ln());
        labels.extend(best.tuple.iter().map(|j| j + 1));
        let tr = best.gram.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::DegenerateCertificate("form collapsed to zero".into()));
        }
        g = best.gram / tr;
        log_scale += tr.ln();
    }

    let word = SwitchingWord {
        labels,
        orientation: Orientation::ReadsRightToLeft,
        log_theta,
        source: WordSource::Alg1,
    };
    if !is_accepted(lifted.tsm(), &word.canonical())? {
        return Err(Error::DegenerateCertificate("generated word is rejected by the automaton".into()));
    }
    Ok(word)
}

struct Best {
    value: f64,
    tuple: Vec<usize>,
    gram: Mat,
}

// Depth-first over tuples in lexicographic order; `w` is the Gram matrix of
// `p ∘ (Φ_{τ_1} ⋯ Φ_{τ_j})`. Strict comparison keeps the smallest tuple on ties.
fn search_tuples(w: &Mat, lifts: &[Mat], moments: &[Mat], tuple: &mut Vec<usize>, depth: usize, best: &mut Best) {
    for (j, v) in lifts.iter().enumerate() {
        let next = v.tr_mul(w) * v;
        tuple[depth] = j;
        if depth + 1 == tuple.len() {
            let value = pairing(&next, &moments[j]);
            if value > best.value {
                best.value = value;
                best.tuple = tuple.clone();
                best.gram = next;
            }
        } else {
            search_tuples(&next, lifts, moments, tuple, depth + 1, best);
        }
    }
}

/// Checks `θ_k ≥ (γ^{2dh} / m^h) θ_{k−h}` along a trace of `ln θ`; returns the
/// smallest slack `ln θ_k − ln θ_{k−h} − ln(γ^{2dh}/m^h)` and whether every
/// step holds within relative tolerance `rel_tol`.
pub fn check_theta_recursion(
    log_theta: &[f64],
    gamma: f64,
    degree: usize,
    h: usize,
    num_modes: usize,
    rel_tol: f64,
) -> (f64, bool) {
    let log_rate = (degree * h) as f64 * gamma.ln() - h as f64 * (num_modes as f64).ln();
    let mut worst = f64::INFINITY;
    for pair in log_theta.windows(2) {
        worst = worst.min(pair[1] - pair[0] - log_rate);
    }
    // θ_k ≥ c θ_{k−h} (1 − rel_tol)  ⇔  slack ≥ ln(1 − rel_tol)
    (worst, worst >= (1.0 - rel_tol).ln())
}

/// Branch-and-bound generation: the best averaged spectral radius found over
/// products of length at most `t`.
pub fn alg2_generate(lifted: &LiftedSet, epsilon: f64, t: usize) -> Result<SwitchingWord> {
    let run = gripenberg_engine(lifted.phis(), epsilon, t)?;
    let word = SwitchingWord {
        labels: run.best_generation_word,
        orientation: Orientation::ReadsRightToLeft,
        log_theta: Vec::new(),
        source: WordSource::Alg2,
    };
    if !is_accepted(lifted.tsm(), &word.canonical())? {
        return Err(Error::Degenerate("best product is rejected by the automaton".into()));
    }
    Ok(word)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    /// Lexicographically smallest rotation, in reading order.
    pub cycle: Vec<usize>,
    /// `ρ(A_{c_T} ⋯ A_{c_1})^{1/T}`.
    pub value: f64,
    /// The same on the lifted matrices.
    pub lifted_value: f64,
    pub path: AcceptancePath,
    pub length: usize,
}

/// Lexicographically smallest rotation.
pub fn minimal_rotation(word: &[usize]) -> Vec<usize> {
    (0..word.len().max(1))
        .map(|i| word[i..].iter().chain(&word[..i]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Shortest `r` with `word = r^j`.
pub fn primitive_root(word: &[usize]) -> &[usize] {
    let n = word.len();
    (1..=n)
        .find(|&p| n % p == 0 && (p..n).all(|i| word[i] == word[i - p]))
        .map_or(word, |p| &word[..p])
}

/// Repeatable cycles among the contiguous subwords (length `≤ max_len`) of the
/// canonical word, one per rotation class, sorted by value descending.
pub fn extract_cycles(word: &SwitchingWord, tsm: &Tsm, a: &MatrixSet, max_len: usize) -> Result<Vec<CycleReport>> {
    if tsm.num_labels() != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} modes but the automaton has {} labels",
            a.len(),
            tsm.num_labels()
        )));
    }
    let cw = word.canonical();
    crate::automaton::validate_word(&cw, a.len())?;
    let dfa = tsm.to_dfa();
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..cw.len() {
        for len in 1..=max_len.min(cw.len() - i) {
            let sub = &cw[i..i + len];
            if find_cycle_path(&dfa, sub).is_none() {
                continue;
            }
            let root = primitive_root(sub);
            let c = if find_cycle_path(&dfa, root).is_some() { root } else { sub };
            seen.insert(minimal_rotation(c));
        }
    }
    let lifted: Vec<Mat> = tsm
        .blocks()
        .iter()
        .zip(a.modes())
        .map(|(f, m)| crate::linalg::kron(f, m))
        .collect();
    let mut out = seen
        .into_iter()
        .map(|c| cycle_report(&dfa, a.modes(), &lifted, c))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| y.value.total_cmp(&x.value).then_with(|| x.length.cmp(&y.length)));
    Ok(out)
}

fn cycle_report(dfa: &Dfa, modes: &[Mat], lifted: &[Mat], cycle: Vec<usize>) -> Result<CycleReport> {
    let t = cycle.len();
    let value = spectral_radius(&canonical_product(modes, &cycle))?.powf(1.0 / t as f64);
    let lifted_value = spectral_radius(&canonical_product(lifted, &cycle))?.powf(1.0 / t as f64);
    let path = find_cycle_path(dfa, &cycle).expect("only repeatable cycles are reported");
    Ok(CycleReport {
        cycle,
        value,
        lifted_value,
        path,
        length: t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthWindow {
    pub length: usize,
    /// `‖Φ-product‖^{1/length}` over the first `length` letters.
    pub lifted_rate: f64,
    /// `‖A-product‖^{1/length}`.
    pub source_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub word_length: usize,
    pub windows: Vec<GrowthWindow>,
    /// `γ / m^{1/(2d)}`.
    pub floor: f64,
    pub best_cycle_value: f64,
    /// Best extracted cycle value `≥ floor − 1e-6`.
    pub satisfied: bool,
}

/// `‖M_{w_k} ⋯ M_{w_1}‖^{1/k}` with log-scaled accumulation.
pub fn growth_rate(mats: &[Mat], canonical: &[usize]) -> Result<f64> {
    crate::automaton::validate_word(canonical, mats.len())?;
    let n = mats[0].nrows();
    // scaled_product multiplies on the right, so feed the letters last-first
    let (p, log_scale) = scaled_product(n, canonical.iter().rev().map(|&l| &mats[l - 1]));
    let norm = spectral_norm(&p);
    if norm == 0.0 || log_scale == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok(((norm.ln() + log_scale) / canonical.len() as f64).exp())
}

/// Growth of the full word and its prefixes against `γ / m^{1/(2d)}`.
pub fn growth_report(word: &SwitchingWord, lifted: &LiftedSet, gamma: f64, half_degree: usize) -> Result<GrowthReport> {
    let cw = word.canonical();
    let k = cw.len();
    let mut lengths: Vec<usize> = std::iter::successors(Some(1usize), |l| Some(l * 2))
        .take_while(|&l| l < k)
        .collect();
    lengths.push(k);
    let windows = lengths
        .into_iter()
        .map(|len| {
            Ok(GrowthWindow {
                length: len,
                lifted_rate: growth_rate(lifted.phis(), &cw[..len])?,
                source_rate: growth_rate(lifted.source().modes(), &cw[..len])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cycles = extract_cycles(word, lifted.tsm(), lifted.source(), DEFAULT_MAX_CYCLE_LEN)?;
    let best_cycle_value = cycles.first().map_or(0.0, |c| c.value);
    let floor = gamma / (lifted.num_modes() as f64).powf(1.0 / (2 * half_degree) as f64);
    Ok(GrowthReport {
        word_length: k,
        windows,
        floor,
        best_cycle_value,
        satisfied: best_cycle_value >= floor - SUCCESS_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build_tsm, is_repeatable_cycle};
    use crate::lift::build_lift;
    use crate::sos::max_feasible_gamma;

    fn example1() -> LiftedSet {
        let a = MatrixSet::new(vec![
            Mat::from_row_slice(2, 2, &[0.94, 0.56, -0.35, 0.73]),
            Mat::from_row_slice(2, 2, &[0.94, 0.56, 0.14, 0.73]),
            Mat::from_row_slice(2, 2, &[0.94, 0.56, -0.35, 0.46]),
            Mat::from_row_slice(2, 2, &[0.94, 0.56, 0.14, 0.46]),
        ])
        .unwrap();
        let dfa = Dfa::new(
            4,
            4,
            [(1, 1, 3), (2, 1, 3), (3, 1, 3), (4, 1, 3), (2, 2, 1), (3, 2, 1), (1, 3, 2), (3, 3, 2), (3, 4, 4)],
        )
        .unwrap();
        build_lift(&a, &build_tsm(&dfa)).unwrap()
    }

    fn single_mode(c: f64) -> LiftedSet {
        let a = MatrixSet::new(vec![Mat::from_row_slice(2, 2, &[c, 0.3, 0.0, 0.5 * c])]).unwrap();
        build_lift(&a, &build_tsm(&Dfa::unconstrained(1).unwrap())).unwrap()
    }

    #[test]
    fn p0_is_seeded_and_interior() {
        let basis = MonomialBasis::new(4, 1).unwrap();
        let a = random_interior_poly(&basis, 7);
        let b = random_interior_poly(&basis, 7);
        let c = random_interior_poly(&basis, 8);
        assert_eq!(a, b);
        assert!((&a.gram - &c.gram).norm() > 0.0);
        assert!((a.gram.trace() - 1.0).abs() < 1e-12);
        assert!(crate::linalg::min_sym_eigenvalue(&a.gram) > 0.0);
    }

    #[test]
    fn rotation_helpers() {
        assert_eq!(minimal_rotation(&[2, 1, 2, 3, 1, 1, 1, 1]), vec![1, 1, 1, 1, 2, 1, 2, 3]);
        assert_eq!(minimal_rotation(&[1, 1, 2, 1, 2, 3, 1, 1]), vec![1, 1, 1, 1, 2, 1, 2, 3]);
        assert_eq!(primitive_root(&[1, 2, 1, 2]), &[1, 2]);
        assert_eq!(primitive_root(&[1, 2, 1]), &[1, 2, 1]);
        assert_eq!(primitive_root(&[3, 3, 3]), &[3]);
    }

    #[test]
    fn canonical_reverses_generation_order() {
        let w = SwitchingWord {
            labels: vec![1, 2, 3],
            orientation: Orientation::ReadsRightToLeft,
            log_theta: vec![],
            source: WordSource::Alg2,
        };
        assert_eq!(w.canonical(), vec![3, 2, 1]);
    }

    #[test]
    fn example1_cycle_extraction() {
        let lifted = example1();
        let w = SwitchingWord::canonical_word(vec![3, 2, 1, 2, 3, 1, 1, 1, 1, 2, 1, 2, 3, 1, 1, 1, 1, 4], WordSource::User);
        let cycles = extract_cycles(&w, lifted.tsm(), lifted.source(), 12).unwrap();
        assert_eq!(cycles[0].cycle, vec![1, 1, 1, 1, 2, 1, 2, 3]);
        assert!((cycles[0].value - 0.9748172).abs() < 1e-6);
        assert!((cycles[0].value - cycles[0].lifted_value).abs() < 1e-10);
        for c in &cycles {
            assert!(is_repeatable_cycle(lifted.tsm(), &c.cycle).unwrap());
            assert!(c.path.is_valid_for(&lifted.tsm().to_dfa()));
        }
        assert!(cycles.windows(2).all(|p| p[0].value >= p[1].value));
    }

    #[test]
    fn constant_word_single_cycle() {
        let lifted = single_mode(0.9);
        let w = SwitchingWord::canonical_word(vec![1; 6], WordSource::User);
        let cycles = extract_cycles(&w, lifted.tsm(), lifted.source(), 12).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].cycle, vec![1]);
        assert!((cycles[0].value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn single_mode_generators() {
        let lifted = single_mode(0.9);
        let search = max_feasible_gamma(&lifted, 1, 1e-4).unwrap();
        let w = alg1_generate(&lifted, &search.certificate, 2, 8, 3).unwrap();
        assert_eq!(w.canonical(), vec![1; 8]);
        let g = growth_report(&w, &lifted, search.gamma, 1).unwrap();
        assert!(g.satisfied);
        assert!(g.floor <= 0.9 + 1e-4);
        let a2 = alg2_generate(&lifted, 0.0, 6).unwrap();
        assert_eq!(a2.labels, vec![1]);
    }

    #[test]
    fn alg1_argument_checks() {
        let lifted = single_mode(0.9);
        let cert = max_feasible_gamma(&lifted, 1, 1e-3).unwrap().certificate;
        assert!(alg1_generate(&lifted, &cert, 3, 8, 1).is_err());
        assert!(alg1_generate(&lifted, &cert, 0, 8, 1).is_err());
        assert!(alg1_generate(&example1(), &cert, 1, 4, 1).is_err());
    }

    #[test]
    fn example1_alg1_respects_theta_recursion_and_scale() {
        let lifted = example1();
        let search = max_feasible_gamma(&lifted, 1, 1e-4).unwrap();
        let basis = MonomialBasis::new(8, 1).unwrap();
        for seed in 1..=5 {
            let p0 = random_interior_poly(&basis, seed);
            let w = alg1_generate_from(&lifted, &search.certificate, 3, 24, &p0).unwrap();
            assert!(is_accepted(lifted.tsm(), &w.canonical()).unwrap());
            let (_, ok) = check_theta_recursion(&w.log_theta, search.gamma, 2, 3, 4, 1e-8);
            assert!(ok);
            // positive rescaling of the initial form does not change the choices
            for factor in [1e-6, 1e6] {
                let scaled = GramPoly {
                    gram: &p0.gram * factor,
                    ..p0.clone()
                };
                let ws = alg1_generate_from(&lifted, &search.certificate, 3, 24, &scaled).unwrap();
                assert_eq!(ws.labels, w.labels);
            }
        }
    }

    #[test]
    fn example1_alg2_finds_the_cycle_value() {
        let lifted = example1();
        let w = alg2_generate(&lifted, 0.01, 12).unwrap();
        let cw = w.canonical();
        let v = crate::bounds::word_value(lifted.source().modes(), &cw).unwrap();
        assert!(v >= 0.9748172 - 1e-6);
    }

    #[test]
    fn growth_rate_matches_direct_norm() {
        let lifted = example1();
        let w = [1, 1, 2, 1, 2, 3, 1, 1];
        let direct = spectral_norm(&canonical_product(lifted.source().modes(), &w)).powf(1.0 / 8.0);
        assert!((growth_rate(lifted.source().modes(), &w).unwrap() - direct).abs() < 1e-12);
        let f = canonical_product(lifted.tsm().blocks(), &w);
        let lifted_direct = spectral_norm(&f) * spectral_norm(&canonical_product(lifted.source().modes(), &w));
        assert!((growth_rate(lifted.phis(), &w).unwrap() - lifted_direct.powf(1.0 / 8.0)).abs() < 1e-12);
    }
}
