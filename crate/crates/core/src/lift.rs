//! The Kronecker lift `Φ_i = F_i ⊗ A_i` of a constrained switching system.
//!
//! Products of the lifted matrices factor as `kron(F-product, A-product)`,
//! and the JSR of the lifted set equals the constrained JSR of the source.

use crate::automaton::{validate_word, Tsm};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square, kron, Mat};

/// Mode matrices `A_1 … A_m`, all `n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSet {
    modes: Vec<Mat>,
}

impl MatrixSet {
    pub fn new(modes: Vec<Mat>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::InvalidArgument("matrix set is empty".into()))?;
        let n = first.nrows();
        for (i, a) in modes.iter().enumerate() {
            ensure_square(a)?;
            ensure_finite(a, &format!("mode {}", i + 1))?;
            if a.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "mode {} is {}x{}, mode 1 is {n}x{n}",
                    i + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        Ok(Self { modes })
    }

    pub fn modes(&self) -> &[Mat] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.modes[0].nrows()
    }

    /// `A_{σ_k} ⋯ A_{σ_1}`.
    pub fn word_product(&self, word: &[usize]) -> Result<Mat> {
        validate_word(word, self.len())?;
        Ok(canonical_product(&self.modes, word))
    }
}

/// `mats[σ_k - 1] ⋯ mats[σ_1 - 1]` for an already validated word.
pub(crate) fn canonical_product(mats: &[Mat], word: &[usize]) -> Mat {
    let mut acc = mats[word[0] - 1].clone();
    for &label in &word[1..] {
        acc = &mats[label - 1] * acc;
    }
    acc
}

/// The lifted arbitrary switching system, together with the sources it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSet {
    phis: Vec<Mat>,
    source: MatrixSet,
    tsm: Tsm,
}

impl LiftedSet {
    pub fn phis(&self) -> &[Mat] {
        &self.phis
    }

    pub fn source(&self) -> &MatrixSet {
        &self.source
    }

    pub fn tsm(&self) -> &Tsm {
        &self.tsm
    }

    pub fn num_modes(&self) -> usize {
        self.phis.len()
    }

    /// `n · ℓ`.
    pub fn dim(&self) -> usize {
        self.phis[0].nrows()
    }
}

pub fn build_lift(a: &MatrixSet, tsm: &Tsm) -> Result<LiftedSet> {
    if a.len() != tsm.num_labels() {
        return Err(Error::DimensionMismatch(format!(
            "{} modes but the automaton has {} labels",
            a.len(),
            tsm.num_labels()
        )));
    }
    let phis = tsm
        .blocks()
        .iter()
        .zip(a.modes())
        .map(|(f, ai)| kron(f, ai))
        .collect();
    Ok(LiftedSet {
        phis,
        source: a.clone(),
        tsm: tsm.clone(),
    })
}

/// `Φ_{σ_k} ⋯ Φ_{σ_1}`, the same orientation as the structure-matrix product.
pub fn lifted_word_product(lifted: &LiftedSet, word: &[usize]) -> Result<Mat> {
    validate_word(word, lifted.num_modes())?;
    Ok(canonical_product(&lifted.phis, word))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build_tsm, word_product, Dfa};
    use crate::linalg::{spectral_norm, spectral_radius};
    use proptest::prelude::*;

    fn example1() -> (MatrixSet, Tsm) {
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
            [
                (1, 1, 3),
                (2, 1, 3),
                (3, 1, 3),
                (4, 1, 3),
                (2, 2, 1),
                (3, 2, 1),
                (1, 3, 2),
                (3, 3, 2),
                (3, 4, 4),
            ],
        )
        .unwrap();
        (a, build_tsm(&dfa))
    }

    #[test]
    fn matrix_set_validation() {
        assert!(MatrixSet::new(vec![]).is_err());
        assert!(matches!(
            MatrixSet::new(vec![Mat::identity(2, 2), Mat::identity(3, 3)]),
            Err(Error::DimensionMismatch(_))
        ));
        let mut bad = Mat::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(MatrixSet::new(vec![bad]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn example1_phi1_block_row_three() {
        let (a, tsm) = example1();
        let lifted = build_lift(&a, &tsm).unwrap();
        let phi1 = &lifted.phis()[0];
        assert_eq!(phi1.shape(), (8, 8));
        for bc in 0..4 {
            for br in 0..4 {
                let block = phi1.view((2 * br, 2 * bc), (2, 2));
                if br == 2 {
                    assert_eq!(block, a.modes()[0]);
                } else {
                    assert!(block.iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn unconstrained_lift_is_identity_transform() {
        let (a, _) = example1();
        let tsm = build_tsm(&Dfa::unconstrained(4).unwrap());
        let lifted = build_lift(&a, &tsm).unwrap();
        assert_eq!(lifted.phis(), a.modes());
    }

    #[test]
    fn label_count_mismatch() {
        let (a, _) = example1();
        let tsm = build_tsm(&Dfa::unconstrained(3).unwrap());
        assert!(matches!(build_lift(&a, &tsm), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejected_word_lifts_to_zero() {
        let (a, tsm) = example1();
        let lifted = build_lift(&a, &tsm).unwrap();
        assert!(lifted_word_product(&lifted, &[4, 4]).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(lifted_word_product(&lifted, &[3]).unwrap(), lifted.phis()[2]);
    }

    #[test]
    fn example1_cycle_values_agree_after_lifting() {
        let (a, tsm) = example1();
        let lifted = build_lift(&a, &tsm).unwrap();
        for w in [[1, 1, 2, 1, 2, 3, 1, 1], [2, 1, 2, 3, 1, 1, 1, 1]] {
            let t = w.len() as f64;
            let ra = spectral_radius(&a.word_product(&w).unwrap()).unwrap().powf(1.0 / t);
            let rl = spectral_radius(&lifted_word_product(&lifted, &w).unwrap())
                .unwrap()
                .powf(1.0 / t);
            assert!((ra - 0.9748172).abs() < 1e-6);
            assert!((ra - rl).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn lifted_product_factorizes(word in proptest::collection::vec(1usize..=4, 1..10)) {
            let (a, tsm) = example1();
            let lifted = build_lift(&a, &tsm).unwrap();
            let f = word_product(&tsm, &word).unwrap();
            let ap = a.word_product(&word).unwrap();
            let phi = lifted_word_product(&lifted, &word).unwrap();
            prop_assert!((&phi - kron(&f, &ap)).amax() < 1e-10);
            let (nf, na) = (spectral_norm(&f), spectral_norm(&ap));
            prop_assert!((spectral_norm(&phi) - nf * na).abs() <= 1e-8 * (1.0 + nf * na));
        }
    }
}
