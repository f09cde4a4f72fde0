//! Pseudo-expectations on homogeneous polynomials and the dual SOS program.
//!
//! A pseudo-expectation of degree `2d` on `N` variables is a moment vector
//! `z[γ]`, one entry per monomial with `|γ| = 2d`. Its moment matrix on the
//! scaled degree-`d` basis is `M[α, β] = s_α s_β z[α + β]`; it is PSD exactly
//! when the functional is nonnegative on sums of squares, and a polynomial
//! with Gram matrix `G` pairs with it as `tr(G M)` for any Gram representative.
//!
//! The dual program asks for `Ẽ_1 … Ẽ_m`, each PSD, with
//! `Σ_i Ẽ_i[p ∘ Φ_i] ≥ γ^{2d} Σ_i Ẽ_i[p]` for every SOS `p` and
//! `Σ_i Σ_j Ẽ_i[x_j^{2d}] = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::LiftedSet;
use crate::linalg::{min_sym_eigenvalue, spectral_norm, veronese_lift, Mat, MonomialBasis};
use crate::sdp::{self, Atom, Block, Lift, Outcome, Problem, Settings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoExpectation {
    pub num_vars: usize,
    /// Total degree `2d`.
    pub degree: usize,
    /// One value per degree-`2d` monomial, in graded lexicographic order.
    pub moments: Vec<f64>,
}

impl PseudoExpectation {
    pub fn new(num_vars: usize, degree: usize, moments: Vec<f64>) -> Result<Self> {
        if degree == 0 || degree % 2 != 0 {
            return Err(Error::InvalidArgument(format!("degree {degree} must be even and positive")));
        }
        let expected = MonomialBasis::new(num_vars, degree)?.len();
        if moments.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} moments given, {expected} monomials of degree {degree} in {num_vars} variables",
                moments.len()
            )));
        }
        if moments.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("moment vector".into()));
        }
        Ok(Self {
            num_vars,
            degree,
            moments,
        })
    }

    /// Moments of the point mass at `x`.
    pub fn point_mass(x: &[f64], degree: usize) -> Result<Self> {
        let full = MonomialBasis::new(x.len(), degree)?;
        let moments = full
            .monomials()
            .iter()
            .map(|g| g.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product())
            .collect();
        Self::new(x.len(), degree, moments)
    }

    /// Moments of the standard Gaussian: `Π_j (γ_j − 1)!!` when every exponent is even.
    pub fn gaussian(num_vars: usize, degree: usize) -> Result<Self> {
        let full = MonomialBasis::new(num_vars, degree)?;
        let moments = full
            .monomials()
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&e| {
                        if e % 2 == 1 {
                            0.0
                        } else {
                            (1..e).step_by(2).map(|k| k as f64).product::<f64>()
                        }
                    })
                    .product()
            })
            .collect();
        Self::new(num_vars, degree, moments)
    }

    /// `Σ_j Ẽ[x_j^{2d}]`.
    pub fn power_sum(&self) -> f64 {
        let full = MonomialBasis::new(self.num_vars, self.degree).expect("validated on construction");
        (0..self.num_vars)
            .map(|j| {
                let mut g = vec![0u16; self.num_vars];
                g[j] = self.degree as u16;
                self.moments[full.index_of(&g).expect("pure power is a monomial")]
            })
            .sum()
    }
}

/// Index bookkeeping between the degree-`d` basis and degree-`2d` moments.
#[derive(Debug, Clone)]
pub struct MomentLayout {
    half: MonomialBasis,
    full: MonomialBasis,
    /// For each degree-`2d` monomial, the pairs `(a, b)`, `a ≤ b`, of half-basis
    /// indices with `α_a + α_b` equal to it.
    pairs: Vec<Vec<(usize, usize)>>,
}

impl MomentLayout {
    pub fn new(num_vars: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("half degree must be at least 1".into()));
        }
        let half = MonomialBasis::new(num_vars, d)?;
        let full = MonomialBasis::new(num_vars, 2 * d)?;
        let mut pairs = vec![Vec::new(); full.len()];
        for a in 0..half.len() {
            for b in a..half.len() {
                let g: Vec<u16> = half
                    .monomial(a)
                    .iter()
                    .zip(half.monomial(b))
                    .map(|(x, y)| x + y)
                    .collect();
                pairs[full.index_of(&g).expect("sum has degree 2d")].push((a, b));
            }
        }
        Ok(Self { half, full, pairs })
    }

    pub fn half(&self) -> &MonomialBasis {
        &self.half
    }

    pub fn full(&self) -> &MonomialBasis {
        &self.full
    }

    pub fn pairs(&self) -> &[Vec<(usize, usize)>] {
        &self.pairs
    }

    fn check(&self, e: &PseudoExpectation) -> Result<()> {
        if e.num_vars != self.half.num_vars() || e.degree != 2 * self.half.degree() {
            return Err(Error::DimensionMismatch(format!(
                "pseudo-expectation has {} variables and degree {}, basis has {} variables and degree {}",
                e.num_vars,
                e.degree,
                self.half.num_vars(),
                self.half.degree()
            )));
        }
        Ok(())
    }

    pub fn moment_matrix(&self, e: &PseudoExpectation) -> Result<Mat> {
        self.check(e)?;
        let s = self.half.scales();
        let n = self.half.len();
        let mut m = Mat::zeros(n, n);
        for (g, pairs) in self.pairs.iter().enumerate() {
            for &(a, b) in pairs {
                let v = s[a] * s[b] * e.moments[g];
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }

    /// Inverse of [`moment_matrix`](Self::moment_matrix) on its range.
    pub fn moments_from_matrix(&self, m: &Mat) -> Vec<f64> {
        let s = self.half.scales();
        self.pairs
            .iter()
            .map(|pairs| {
                let (a, b) = pairs[0];
                0.5 * (m[(a, b)] + m[(b, a)]) / (s[a] * s[b])
            })
            .collect()
    }

    pub fn pushforward(&self, e: &PseudoExpectation, phi: &Mat) -> Result<PseudoExpectation> {
        let v = veronese_lift(phi, &self.half)?;
        self.pushforward_lifted(e, &v)
    }

    /// Pushforward through an already computed Veronese lift `V(Φ)`.
    pub fn pushforward_lifted(&self, e: &PseudoExpectation, v: &Mat) -> Result<PseudoExpectation> {
        let m = self.moment_matrix(e)?;
        let pushed = v * m * v.transpose();
        Ok(PseudoExpectation {
            num_vars: e.num_vars,
            degree: e.degree,
            moments: self.moments_from_matrix(&pushed),
        })
    }
}

/// `M[α, β] = s_α s_β z[α + β]` on `basis` (degree `d = e.degree / 2`).
pub fn moment_matrix(e: &PseudoExpectation, basis: &MonomialBasis) -> Result<Mat> {
    if e.degree != 2 * basis.degree() {
        return Err(Error::DimensionMismatch(format!(
            "pseudo-expectation degree {} needs a basis of degree {}",
            e.degree,
            e.degree / 2
        )));
    }
    MomentLayout::new(basis.num_vars(), basis.degree())?.moment_matrix(e)
}

/// `z'[γ] = Ẽ[(Φx)^γ]`.
pub fn pushforward(e: &PseudoExpectation, phi: &Mat) -> Result<PseudoExpectation> {
    if phi.nrows() != e.num_vars || !phi.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "map is {}x{}, pseudo-expectation has {} variables",
            phi.nrows(),
            phi.ncols(),
            e.num_vars
        )));
    }
    if e.degree == 0 || e.degree % 2 != 0 {
        return Err(Error::InvalidArgument(format!("degree {} must be even and positive", e.degree)));
    }
    MomentLayout::new(e.num_vars, e.degree / 2)?.pushforward(e, phi)
}

/// `Ẽ[p]` for `p(x) = x^[d]ᵀ G x^[d]`.
pub fn pairing(gram: &Mat, moment_matrix: &Mat) -> f64 {
    gram.component_mul(moment_matrix).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub gamma: f64,
    pub duals: Vec<PseudoExpectation>,
    /// Smallest eigenvalue of each moment matrix.
    pub moment_margins: Vec<f64>,
    /// Smallest eigenvalue of `Σ V_i M_i V_iᵀ − γ^{2d} Σ M_i`.
    pub coupling_margin: f64,
    pub normalization_residual: f64,
}

impl DualCertificate {
    /// Total degree `2d`.
    pub fn degree(&self) -> usize {
        self.duals.first().map_or(0, |e| e.degree)
    }
}

/// Tolerances and results of a solver-independent certificate check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub moment_min_eigs: Vec<f64>,
    pub moment_traces: Vec<f64>,
    pub coupling_min_eig: f64,
    /// `γ^{2d} Σ tr M_i`, the scale for the coupling tolerance.
    pub coupling_scale: f64,
    pub normalization_residual: f64,
    pub moments_psd: bool,
    pub coupling_psd: bool,
    pub normalized: bool,
    /// Every moment matrix has smallest eigenvalue `≥ 1e-9 · trace`.
    pub strictly_interior: bool,
}

impl CertificateCheck {
    pub fn passed(&self) -> bool {
        self.moments_psd && self.coupling_psd && self.normalized
    }
}

pub const PSD_TOL: f64 = 1e-9;
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Re-checks a certificate against the mode matrices using eigenvalues and residuals only.
pub fn verify_certificate(phis: &[Mat], cert: &DualCertificate) -> Result<CertificateCheck> {
    if phis.len() != cert.duals.len() || phis.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} maps but {} pseudo-expectations",
            phis.len(),
            cert.duals.len()
        )));
    }
    let first = &cert.duals[0];
    if first.degree == 0 || first.degree % 2 != 0 {
        return Err(Error::InvalidArgument(format!("degree {} must be even and positive", first.degree)));
    }
    let layout = MomentLayout::new(first.num_vars, first.degree / 2)?;
    let dim = layout.half().len();
    let g2d = cert.gamma.powi(first.degree as i32);
    let mut coupling = Mat::zeros(dim, dim);
    let mut mins = Vec::new();
    let mut traces = Vec::new();
    let mut power_sum = 0.0;
    for (e, phi) in cert.duals.iter().zip(phis) {
        let m = layout.moment_matrix(e)?;
        let v = veronese_lift(phi, layout.half())?;
        coupling += &v * &m * v.transpose() - &m * g2d;
        mins.push(min_sym_eigenvalue(&m));
        traces.push(m.trace());
        power_sum += e.power_sum();
    }
    let trace_sum: f64 = traces.iter().sum();
    let coupling_min_eig = min_sym_eigenvalue(&coupling);
    let coupling_scale = g2d * trace_sum;
    let normalization_residual = (power_sum - 1.0).abs();
    Ok(CertificateCheck {
        moments_psd: mins.iter().zip(&traces).all(|(m, t)| *m >= -PSD_TOL * t.abs().max(f64::MIN_POSITIVE)),
        coupling_psd: coupling_min_eig >= -PSD_TOL * coupling_scale,
        normalized: normalization_residual <= NORMALIZATION_TOL,
        strictly_interior: mins.iter().zip(&traces).all(|(m, t)| *m >= PSD_TOL * t),
        moment_min_eigs: mins,
        moment_traces: traces,
        coupling_min_eig,
        coupling_scale,
        normalization_residual,
    })
}

/// Outcome of a single dual feasibility solve.
#[derive(Debug, Clone, PartialEq)]
pub enum DualOutcome {
    Feasible(DualCertificate),
    /// The best achievable margin is certified below the feasibility threshold.
    Infeasible { margin_upper: f64 },
}

/// Dual program at fixed `γ`, prepared once per lifted set and degree.
struct DualProgram {
    layout: MomentLayout,
    phis: Vec<Mat>,
    lifts: Vec<Mat>,
    norm_scale: f64,
    num_modes: usize,
}

impl DualProgram {
    fn new(phis: &[Mat], d: usize) -> Result<Self> {
        if phis.is_empty() {
            return Err(Error::InvalidArgument("no modes".into()));
        }
        let n = phis[0].nrows();
        let layout = MomentLayout::new(n, d)?;
        let norm_scale = phis.iter().map(spectral_norm).fold(0.0, f64::max);
        if norm_scale == 0.0 {
            return Err(Error::NoFeasibleGamma);
        }
        let lifts = phis
            .iter()
            .map(|p| veronese_lift(&(p / norm_scale), layout.half()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout,
            phis: phis.to_vec(),
            lifts,
            norm_scale,
            num_modes: phis.len(),
        })
    }

    fn num_moments(&self) -> usize {
        self.layout.full().len()
    }

    fn scale(&self) -> f64 {
        1.0 / (self.num_modes * self.layout.half().len()) as f64
    }

    fn problem(&self, gamma: f64) -> Problem {
        let q = self.num_moments();
        let dim = self.layout.half().len();
        let s = self.layout.half().scales();
        let g2d = (gamma / self.norm_scale).powi(2 * self.layout.half().degree() as i32);
        let mut blocks = Vec::with_capacity(self.num_modes + 1);
        let mut coupling_lifts = vec![Lift::Identity];
        coupling_lifts.extend(self.lifts.iter().cloned().map(Lift::Dense));
        let mut coupling = Block::new(dim, coupling_lifts);
        for i in 0..self.num_modes {
            let mut block = Block::new(dim, vec![Lift::Identity]);
            for (g, pairs) in self.layout.pairs().iter().enumerate() {
                let var = i * q + g;
                for &(a, b) in pairs {
                    let w = s[a] * s[b];
                    block.push(Atom { var, weight: w, lift: 0, row: a, col: b });
                    coupling.push(Atom { var, weight: w, lift: i + 1, row: a, col: b });
                    coupling.push(Atom { var, weight: -g2d * w, lift: 0, row: a, col: b });
                }
            }
            blocks.push(block);
        }
        blocks.push(coupling);

        let mut eq = Mat::zeros(1, self.num_modes * q);
        for i in 0..self.num_modes {
            for g in self.pure_powers() {
                eq[(0, i * q + g)] = 1.0;
            }
        }
        Problem {
            num_vars: self.num_modes * q,
            blocks,
            eq,
            eq_rhs: nalgebra::DVector::from_element(1, 1.0),
        }
    }

    fn pure_powers(&self) -> Vec<usize> {
        let n = self.layout.half().num_vars();
        let deg = self.layout.full().degree() as u16;
        (0..n)
            .map(|j| {
                let mut g = vec![0u16; n];
                g[j] = deg;
                self.layout.full().index_of(&g).expect("pure power is a monomial")
            })
            .collect()
    }

    fn start(&self) -> Result<Vec<f64>> {
        let gauss = PseudoExpectation::gaussian(self.layout.half().num_vars(), self.layout.full().degree())?;
        let total = gauss.power_sum() * self.num_modes as f64;
        Ok((0..self.num_modes)
            .flat_map(|_| gauss.moments.iter().map(move |v| v / total))
            .collect())
    }

    fn solve(&self, gamma: f64, stop_when_feasible: bool) -> Result<DualOutcome> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let problem = self.problem(gamma);
        let scale = self.scale();
        let settings = Settings {
            scale,
            threshold: 1e-7 * scale,
            stop_when_feasible,
            gap_tol: 1e-9,
            max_newton_steps: 800,
        };
        let sol = sdp::maximize_margin(&problem, &self.start()?, &settings)?;
        match sol.outcome {
            Outcome::Infeasible => Ok(DualOutcome::Infeasible {
                margin_upper: sol.margin_upper,
            }),
            Outcome::Feasible => {
                let q = self.num_moments();
                let n = self.layout.half().num_vars();
                let degree = self.layout.full().degree();
                let duals = (0..self.num_modes)
                    .map(|i| PseudoExpectation::new(n, degree, sol.y[i * q..(i + 1) * q].to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                let mut cert = DualCertificate {
                    gamma,
                    duals,
                    moment_margins: Vec::new(),
                    coupling_margin: 0.0,
                    normalization_residual: 0.0,
                };
                let check = verify_certificate(&self.phis, &cert)?;
                cert.moment_margins = check.moment_min_eigs;
                cert.coupling_margin = check.coupling_min_eig;
                cert.normalization_residual = check.normalization_residual;
                Ok(DualOutcome::Feasible(cert))
            }
        }
    }
}

/// Solves the dual program at `γ` to its maximum margin.
pub fn solve_dual(lifted: &LiftedSet, d: usize, gamma: f64) -> Result<DualOutcome> {
    DualProgram::new(lifted.phis(), d)?.solve(gamma, false)
}

/// Result of the `γ` bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSearch {
    pub gamma: f64,
    pub certificate: DualCertificate,
    /// Bisection steps whose solve was inconclusive (treated as infeasible).
    pub inconclusive_steps: usize,
    pub steps: usize,
}

/// Bisection on `γ ∈ [0, max_i ‖Φ_i‖]` for the largest `γ` with a verified certificate.
pub fn max_feasible_gamma(lifted: &LiftedSet, d: usize, tol: f64) -> Result<GammaSearch> {
    max_feasible_gamma_for(lifted.phis(), d, tol)
}

pub fn max_feasible_gamma_for(phis: &[Mat], d: usize, tol: f64) -> Result<GammaSearch> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let program = DualProgram::new(phis, d)?;
    let mut lo = 0.0;
    let mut hi = program.norm_scale;
    let mut inconclusive = 0;
    let mut steps = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        steps += 1;
        match program.solve(mid, true) {
            Ok(DualOutcome::Feasible(_)) => lo = mid,
            Ok(DualOutcome::Infeasible { .. }) => hi = mid,
            Err(Error::Inconclusive(_)) => {
                inconclusive += 1;
                hi = mid;
            }
            Err(e) => return Err(e),
        }
    }
    // Final solve to the maximum margin; back off if the certificate is not strictly interior.
    let mut gamma = lo;
    for _ in 0..8 {
        if gamma <= 0.0 {
            break;
        }
        if let Ok(DualOutcome::Feasible(cert)) = program.solve(gamma, false) {
            let check = verify_certificate(phis, &cert)?;
            if check.passed() && check.strictly_interior {
                return Ok(GammaSearch {
                    gamma,
                    certificate: cert,
                    inconclusive_steps: inconclusive,
                    steps,
                });
            }
        }
        gamma -= tol;
    }
    Err(Error::NoFeasibleGamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build_tsm, Dfa};
    use crate::lift::{build_lift, MatrixSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_expectation(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> PseudoExpectation {
        let len = MonomialBasis::new(n, degree).unwrap().len();
        PseudoExpectation::new(n, degree, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn degree_two_moment_matrix_is_second_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random_expectation(&mut rng, 3, 2);
        let basis = MonomialBasis::new(3, 1).unwrap();
        let m = moment_matrix(&e, &basis).unwrap();
        let full = MonomialBasis::new(3, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut g = vec![0u16; 3];
                g[i] += 1;
                g[j] += 1;
                assert_eq!(m[(i, j)], e.moments[full.index_of(&g).unwrap()]);
            }
        }
    }

    #[test]
    fn point_mass_moment_matrix_is_rank_one() {
        let x = [0.4, -1.1, 0.3];
        let e = PseudoExpectation::point_mass(&x, 4).unwrap();
        let basis = MonomialBasis::new(3, 2).unwrap();
        let v = basis.evaluate(&x).unwrap();
        let m = moment_matrix(&e, &basis).unwrap();
        assert!((m - &v * v.transpose()).amax() < 1e-12);
    }

    #[test]
    fn pushforward_identity_and_point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = random_expectation(&mut rng, 3, 4);
        let same = pushforward(&e, &Mat::identity(3, 3)).unwrap();
        for (a, b) in e.moments.iter().zip(&same.moments) {
            assert!((a - b).abs() < 1e-12);
        }
        let phi = random_mat(&mut rng, 3);
        let x = [0.2, 0.9, -0.5];
        let px: Vec<f64> = (&phi * nalgebra::DVector::from_column_slice(&x)).iter().copied().collect();
        let pushed = pushforward(&PseudoExpectation::point_mass(&x, 4).unwrap(), &phi).unwrap();
        let direct = PseudoExpectation::point_mass(&px, 4).unwrap();
        for (a, b) in pushed.moments.iter().zip(&direct.moments) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_two_pushforward_is_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_expectation(&mut rng, 4, 2);
        let phi = random_mat(&mut rng, 4);
        let basis = MonomialBasis::new(4, 1).unwrap();
        let m = moment_matrix(&e, &basis).unwrap();
        let pushed = moment_matrix(&pushforward(&e, &phi).unwrap(), &basis).unwrap();
        assert!((pushed - &phi * m * phi.transpose()).amax() < 1e-12);
    }

    #[test]
    fn pushforward_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = random_expectation(&mut rng, 3, 4);
        let (phi, psi) = (random_mat(&mut rng, 3), random_mat(&mut rng, 3));
        let twice = pushforward(&pushforward(&e, &phi).unwrap(), &psi).unwrap();
        let once = pushforward(&e, &(&psi * &phi)).unwrap();
        for (a, b) in twice.moments.iter().zip(&once.moments) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let e = PseudoExpectation::gaussian(3, 2).unwrap();
        assert!(moment_matrix(&e, &MonomialBasis::new(2, 1).unwrap()).is_err());
        assert!(moment_matrix(&e, &MonomialBasis::new(3, 2).unwrap()).is_err());
        assert!(pushforward(&e, &Mat::identity(2, 2)).is_err());
        assert!(PseudoExpectation::new(3, 3, vec![0.0; 10]).is_err());
        assert!(PseudoExpectation::new(3, 2, vec![0.0; 5]).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let e = PseudoExpectation::gaussian(2, 4).unwrap();
        // x^4, x^3y, x^2y^2, xy^3, y^4
        assert_eq!(e.moments, vec![3.0, 0.0, 1.0, 0.0, 3.0]);
        assert_eq!(e.power_sum(), 6.0);
    }

    fn scalar_lift(c: f64, n: usize) -> LiftedSet {
        let a = MatrixSet::new(vec![Mat::identity(n, n) * c]).unwrap();
        build_lift(&a, &build_tsm(&Dfa::unconstrained(1).unwrap())).unwrap()
    }

    #[test]
    fn scalar_mode_feasible_below_c() {
        let lifted = scalar_lift(0.7, 2);
        match solve_dual(&lifted, 1, 0.6).unwrap() {
            DualOutcome::Feasible(cert) => {
                let check = verify_certificate(lifted.phis(), &cert).unwrap();
                assert!(check.passed() && check.strictly_interior);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
        assert!(matches!(solve_dual(&lifted, 1, 0.8).unwrap(), DualOutcome::Infeasible { .. }));
        let search = max_feasible_gamma(&lifted, 1, 1e-4).unwrap();
        assert!((search.gamma - 0.7).abs() < 2e-4, "{}", search.gamma);
    }

    #[test]
    fn tampered_certificate_fails_verification() {
        let lifted = scalar_lift(1.0, 2);
        let DualOutcome::Feasible(mut cert) = solve_dual(&lifted, 1, 0.5).unwrap() else {
            panic!("expected feasible");
        };
        assert!(verify_certificate(lifted.phis(), &cert).unwrap().passed());
        cert.duals[0].moments[1] += 1.0;
        assert!(!verify_certificate(lifted.phis(), &cert).unwrap().passed());
    }
}
