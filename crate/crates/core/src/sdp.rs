//! A small dense max-margin semidefinite solver.
//!
//! Solves `maximize t` subject to `S_b(y) − t·I ≻ 0` for every block `b` and
//! linear equalities `E y = f`, by a primal log-barrier path-following method.
//! Each block is affine in `y`:
//!
//! ```text
//! S_b(y) = C_b + Σ_atoms y[var] · weight · L_f · Sym(row, col) · L_fᵀ
//! ```
//!
//! where `Sym(a, b) = e_a e_bᵀ + e_b e_aᵀ` (or `e_a e_aᵀ` when `a = b`) and
//! `L_f` is one of a few per-block lift matrices. Keeping coefficients in this
//! factored form lets the Newton Hessian `tr(A_r X A_s X)` be assembled from
//! entries of `L_fᵀ X L_g` without forming any `A_r` densely.
//!
//! Any iterate with `t > threshold` certifies feasibility. At an approximately
//! centred point for barrier weight `μ`, the optimum is at most `t + 2μν`
//! (`ν` = sum of block sizes), which certifies infeasibility once it drops
//! below the threshold.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone)]
pub enum Lift {
    Identity,
    /// `block_dim × k` matrix.
    Dense(Mat),
}

impl Lift {
    fn inner_dim(&self, block_dim: usize) -> usize {
        match self {
            Lift::Identity => block_dim,
            Lift::Dense(l) => l.ncols(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub var: usize,
    pub weight: f64,
    pub lift: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct Block {
    dim: usize,
    constant: Option<Mat>,
    lifts: Vec<Lift>,
    atoms: Vec<Atom>,
}

impl Block {
    pub fn new(dim: usize, lifts: Vec<Lift>) -> Self {
        Self {
            dim,
            constant: None,
            lifts,
            atoms: Vec::new(),
        }
    }

    pub fn with_constant(mut self, c: Mat) -> Self {
        self.constant = Some(c);
        self
    }

    pub fn push(&mut self, atom: Atom) {
        self.atoms.push(atom);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `S_b(y) − t·I`.
    pub fn evaluate(&self, y: &[f64], t: f64) -> Mat {
        let mut inner: Vec<Mat> = self
            .lifts
            .iter()
            .map(|l| {
                let k = l.inner_dim(self.dim);
                Mat::zeros(k, k)
            })
            .collect();
        for a in &self.atoms {
            let v = y[a.var] * a.weight;
            if v == 0.0 {
                continue;
            }
            let m = &mut inner[a.lift];
            m[(a.row, a.col)] += v;
            if a.row != a.col {
                m[(a.col, a.row)] += v;
            }
        }
        let mut s = match &self.constant {
            Some(c) => c.clone(),
            None => Mat::zeros(self.dim, self.dim),
        };
        for (lift, y_f) in self.lifts.iter().zip(inner) {
            match lift {
                Lift::Identity => s += y_f,
                Lift::Dense(l) => s += l * y_f * l.transpose(),
            }
        }
        for i in 0..self.dim {
            s[(i, i)] -= t;
        }
        s
    }

    fn validate(&self, num_vars: usize) -> Result<()> {
        for a in &self.atoms {
            let k = self
                .lifts
                .get(a.lift)
                .ok_or_else(|| Error::InvalidArgument(format!("atom references lift {}", a.lift)))?
                .inner_dim(self.dim);
            if a.var >= num_vars || a.row >= k || a.col >= k || !a.weight.is_finite() {
                return Err(Error::InvalidArgument(format!("malformed atom {a:?}")));
            }
        }
        for l in &self.lifts {
            if let Lift::Dense(m) = l {
                if m.nrows() != self.dim {
                    return Err(Error::DimensionMismatch(format!(
                        "lift has {} rows, block has dimension {}",
                        m.nrows(),
                        self.dim
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub num_vars: usize,
    pub blocks: Vec<Block>,
    /// Equality constraints `eq · y = eq_rhs`.
    pub eq: Mat,
    pub eq_rhs: DVector<f64>,
}

impl Problem {
    /// Smallest eigenvalue over all blocks at `y`.
    pub fn margin(&self, y: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| crate::linalg::min_sym_eigenvalue(&b.evaluate(y, 0.0)))
            .fold(f64::INFINITY, f64::min)
    }

    fn barrier_dim(&self) -> f64 {
        self.blocks.iter().map(|b| b.dim).sum::<usize>() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    /// Typical magnitude of block eigenvalues; sets the starting barrier weight.
    pub scale: f64,
    /// Margin required to call the problem feasible.
    pub threshold: f64,
    /// Return as soon as feasibility is certified instead of optimising further.
    pub stop_when_feasible: bool,
    /// Terminate once the duality gap bound `μν` falls below `gap_tol · scale`.
    pub gap_tol: f64,
    pub max_newton_steps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            scale: 1.0,
            threshold: 0.0,
            stop_when_feasible: false,
            gap_tol: 1e-9,
            max_newton_steps: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub outcome: Outcome,
    pub y: Vec<f64>,
    /// Achieved margin `t` (all blocks `⪰ t·I` at `y`).
    pub margin: f64,
    /// Upper bound on the optimal margin.
    pub margin_upper: f64,
    pub newton_steps: usize,
}

/// Centring stops once the squared Newton decrement `λ²` is below this. For
/// `λ ≤ 0.1` the gap to the optimum is at most `μ(ν + (λ + √ν)λ/(1 − λ))`,
/// which `2μν` covers for every `ν ≥ 1`.
const CENTERING_DECREMENT: f64 = 1e-2;
const MU_DECREASE: f64 = 8.0;

pub fn maximize_margin(problem: &Problem, y0: &[f64], settings: &Settings) -> Result<Solution> {
    let nv = problem.num_vars;
    if y0.len() != nv {
        return Err(Error::DimensionMismatch(format!(
            "start point has {} entries, problem has {nv} variables",
            y0.len()
        )));
    }
    if problem.eq.ncols() != nv || problem.eq.nrows() != problem.eq_rhs.len() {
        return Err(Error::DimensionMismatch("equality constraint shape".into()));
    }
    for b in &problem.blocks {
        b.validate(nv)?;
    }
    let residual = (&problem.eq * DVector::from_column_slice(y0) - &problem.eq_rhs).amax();
    if residual > 1e-8 * (1.0 + problem.eq_rhs.amax()) {
        return Err(Error::InvalidArgument(format!(
            "start point violates the equality constraints by {residual:e}"
        )));
    }

    let nu = problem.barrier_dim();
    let mut y = y0.to_vec();
    let mut t = problem.margin(&y) - settings.scale;
    let mut mu = 10.0 * settings.scale / nu;
    let mut steps = 0usize;

    let feasible = |y: &[f64], t: f64, steps: usize| Solution {
        outcome: Outcome::Feasible,
        y: y.to_vec(),
        margin: t,
        margin_upper: f64::INFINITY,
        newton_steps: steps,
    };

    loop {
        // centre for the current μ
        loop {
            if steps >= settings.max_newton_steps {
                return Err(Error::Inconclusive(format!(
                    "{steps} Newton steps without a decision (margin {t:e}, gap {:e})",
                    mu * nu
                )));
            }
            let (dx, decrement) = newton_direction(problem, &y, t, mu)?;
            steps += 1;
            // Backtracking on the barrier objective, starting from a full
            // step; the damped step 1/(1 + √λ²) always decreases it, so it
            // is the fallback once backtracking passes below it.
            let damped = if decrement > 0.25 {
                1.0 / (1.0 + decrement.sqrt())
            } else {
                1.0
            };
            let f0 = barrier_objective(problem, &y, t, mu).unwrap_or(f64::INFINITY);
            let mut step = 1.0;
            let (ny, nt) = loop {
                let ny: Vec<f64> = y.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
                let nt = t + step * dx[nv];
                if let Some(f1) = barrier_objective(problem, &ny, nt, mu) {
                    if f1 <= f0 - 0.25 * step * decrement || step <= damped {
                        break (ny, nt);
                    }
                }
                step = if step > damped { (0.5 * step).max(damped) } else { 0.5 * step };
                if step < 1e-14 {
                    return Err(Error::Inconclusive("line search stalled".into()));
                }
            };
            y = ny;
            t = nt;
            if settings.stop_when_feasible && t > settings.threshold {
                return Ok(feasible(&y, t, steps));
            }
            if decrement < CENTERING_DECREMENT {
                break;
            }
        }
        let upper = t + 2.0 * mu * nu;
        if upper < settings.threshold {
            return Ok(Solution {
                outcome: Outcome::Infeasible,
                y,
                margin: t,
                margin_upper: upper,
                newton_steps: steps,
            });
        }
        if mu * nu < settings.gap_tol * settings.scale {
            let outcome = if t > settings.threshold {
                Outcome::Feasible
            } else {
                Outcome::Infeasible
            };
            return Ok(Solution {
                outcome,
                y,
                margin: t,
                margin_upper: upper,
                newton_steps: steps,
            });
        }
        mu /= MU_DECREASE;
    }
}

/// `−t/μ − Σ_b log det(S_b(y) − tI)`, or `None` outside the interior.
fn barrier_objective(problem: &Problem, y: &[f64], t: f64, mu: f64) -> Option<f64> {
    let mut f = -t / mu;
    for b in &problem.blocks {
        let chol = Cholesky::new(b.evaluate(y, t))?;
        f -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    }
    Some(f)
}

/// Newton direction for `maximize t/μ + Σ log det(S_b(y) − tI)` on `E y = f`,
/// and the squared Newton decrement.
fn newton_direction(problem: &Problem, y: &[f64], t: f64, mu: f64) -> Result<(Vec<f64>, f64)> {
    let nv = problem.num_vars;
    let n = nv + 1;
    let mut h = Mat::zeros(n, n);
    let mut g = DVector::zeros(n);
    g[nv] = 1.0 / mu;
    for block in &problem.blocks {
        accumulate_block(block, y, t, &mut h, &mut g)?;
    }

    let rows = problem.eq.nrows();
    let mut e = Mat::zeros(rows, n);
    e.view_mut((0, 0), (rows, nv)).copy_from(&problem.eq);
    // Uniform shifts of y and t can leave every block unchanged, so H may be
    // singular along directions the equalities exclude. Adding c·EᵀE does not
    // change the constrained step but makes the system definite.
    let hmax = (0..n).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
    let hreg = if rows == 0 {
        h.clone()
    } else {
        let ete = e.tr_mul(&e);
        let c = hmax / ete.amax().max(1e-300);
        &h + ete * c
    };
    let mut hreg = hreg;
    for i in 0..n {
        hreg[(i, i)] += 1e-13 * hmax;
    }
    let chol = Cholesky::new(hreg)
        .ok_or_else(|| Error::Inconclusive("Newton system is not positive definite".into()))?;

    let dx = if rows == 0 {
        chol.solve(&g)
    } else {
        let hinv_et = chol.solve(&e.transpose());
        let hinv_g = chol.solve(&g);
        let schur = &e * &hinv_et;
        let rhs = -(&e * &hinv_g);
        let lambda = Cholesky::new(schur)
            .ok_or_else(|| Error::Inconclusive("degenerate equality constraints".into()))?
            .solve(&rhs);
        hinv_g + hinv_et * lambda
    };
    let decrement = dx.dot(&(&h * &dx));
    Ok((dx.iter().copied().collect(), decrement))
}

/// Adds the block's barrier gradient to `g` and Hessian `tr(A_r X A_s X)` to `h`.
fn accumulate_block(block: &Block, y: &[f64], t: f64, h: &mut Mat, g: &mut DVector<f64>) -> Result<()> {
    let nv = g.len() - 1;
    let s = block.evaluate(y, t);
    let x = Cholesky::<f64, Dyn>::new(s)
        .ok_or_else(|| Error::Inconclusive("iterate left the feasible region".into()))?
        .inverse();
    let x2 = &x * &x;

    // P[f][g] = L_fᵀ X L_g, Q[f] = L_fᵀ X² L_f
    let left: Vec<Mat> = block
        .lifts
        .iter()
        .map(|l| match l {
            Lift::Identity => x.clone(),
            Lift::Dense(lm) => lm.tr_mul(&x),
        })
        .collect();
    let p: Vec<Vec<Mat>> = left
        .iter()
        .map(|lx| {
            block
                .lifts
                .iter()
                .map(|l| match l {
                    Lift::Identity => lx.clone(),
                    Lift::Dense(lm) => lx * lm,
                })
                .collect()
        })
        .collect();
    let q: Vec<Mat> = block
        .lifts
        .iter()
        .map(|l| match l {
            Lift::Identity => x2.clone(),
            Lift::Dense(lm) => lm.tr_mul(&x2) * lm,
        })
        .collect();

    g[nv] -= x.trace();
    h[(nv, nv)] += x2.trace();

    let atoms = &block.atoms;
    for (ip, ap) in atoms.iter().enumerate() {
        let pff = &p[ap.lift][ap.lift];
        let qf = &q[ap.lift];
        let (gr, hr) = if ap.row == ap.col {
            (pff[(ap.row, ap.row)], qf[(ap.row, ap.row)])
        } else {
            (
                pff[(ap.row, ap.col)] + pff[(ap.col, ap.row)],
                qf[(ap.row, ap.col)] + qf[(ap.col, ap.row)],
            )
        };
        g[ap.var] += ap.weight * gr;
        h[(ap.var, nv)] -= ap.weight * hr;
        h[(nv, ap.var)] -= ap.weight * hr;

        for aq in &atoms[ip..] {
            let pm = &p[ap.lift][aq.lift];
            let v = ap.weight * aq.weight * sym_pair_trace(pm, ap, aq);
            if std::ptr::eq(ap, aq) {
                h[(ap.var, ap.var)] += v;
            } else {
                h[(ap.var, aq.var)] += v;
                h[(aq.var, ap.var)] += v;
            }
        }
    }
    Ok(())
}

/// `tr(Sym(a) · P · Sym(b) · Pᵀ)` for atoms `a`, `b`.
#[inline]
fn sym_pair_trace(p: &Mat, a: &Atom, b: &Atom) -> f64 {
    let ea: &[(usize, usize)] = &if a.row == a.col {
        [(a.row, a.row), (usize::MAX, 0)]
    } else {
        [(a.row, a.col), (a.col, a.row)]
    };
    let eb: &[(usize, usize)] = &if b.row == b.col {
        [(b.row, b.row), (usize::MAX, 0)]
    } else {
        [(b.row, b.col), (b.col, b.row)]
    };
    let mut acc = 0.0;
    for &(i, j) in ea {
        if i == usize::MAX {
            continue;
        }
        for &(k, l) in eb {
            if k == usize::MAX {
                continue;
            }
            acc += p[(j, k)] * p[(i, l)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym_var_block(n: usize, offset: usize) -> Block {
        let mut b = Block::new(n, vec![Lift::Identity]);
        let mut v = offset;
        for i in 0..n {
            for j in i..n {
                b.push(Atom {
                    var: v,
                    weight: 1.0,
                    lift: 0,
                    row: i,
                    col: j,
                });
                v += 1;
            }
        }
        b
    }

    #[test]
    fn evaluate_assembles_symmetric_matrix() {
        let b = sym_var_block(2, 0);
        let s = b.evaluate(&[1.0, 2.0, 3.0], 0.5);
        assert_eq!(s, Mat::from_row_slice(2, 2, &[0.5, 2.0, 2.0, 2.5]));
    }

    #[test]
    fn hessian_matches_dense_trace_formula() {
        // block with an identity lift and a dense lift
        let l = Mat::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let mut b = Block::new(3, vec![Lift::Identity, Lift::Dense(l.clone())])
            .with_constant(Mat::identity(3, 3) * 4.0);
        let atoms = [
            Atom { var: 0, weight: 0.7, lift: 0, row: 0, col: 1 },
            Atom { var: 0, weight: -0.2, lift: 1, row: 1, col: 1 },
            Atom { var: 1, weight: 1.3, lift: 1, row: 0, col: 1 },
            Atom { var: 1, weight: 0.4, lift: 0, row: 2, col: 2 },
            Atom { var: 2, weight: 0.9, lift: 1, row: 0, col: 0 },
        ];
        for a in atoms {
            b.push(a);
        }
        let y = [0.3, -0.2, 0.5];
        let t = 0.1;
        let mut h = Mat::zeros(4, 4);
        let mut g = DVector::zeros(4);
        accumulate_block(&b, &y, t, &mut h, &mut g).unwrap();

        // dense oracle
        let sym = |a: &Atom| {
            let k = if a.lift == 0 { 3 } else { 2 };
            let mut e = Mat::zeros(k, k);
            e[(a.row, a.col)] += 1.0;
            if a.row != a.col {
                e[(a.col, a.row)] += 1.0;
            }
            let full = if a.lift == 0 { e } else { &l * e * l.transpose() };
            full * a.weight
        };
        let mut coeff = vec![Mat::zeros(3, 3); 4];
        for a in &atoms {
            coeff[a.var] += sym(a);
        }
        coeff[3] = -Mat::identity(3, 3);
        let x = b.evaluate(&y, t).try_inverse().unwrap();
        for r in 0..4 {
            assert!((g[r] - (&x * &coeff[r]).trace()).abs() < 1e-12 || r == 3);
            for s in 0..4 {
                let want = (&coeff[r] * &x * &coeff[s] * &x).trace();
                assert!((h[(r, s)] - want).abs() < 1e-12, "H[{r},{s}] {} vs {want}", h[(r, s)]);
            }
        }
        assert!((g[3] + x.trace()).abs() < 1e-12);
    }

    #[test]
    fn max_min_eigenvalue_with_trace_constraint() {
        // maximize λ_min(Y) subject to tr Y = 1 → Y = I/n, margin 1/n
        let n = 3;
        let b = sym_var_block(n, 0);
        let nv = n * (n + 1) / 2;
        let mut eq = Mat::zeros(1, nv);
        let mut y0 = vec![0.0; nv];
        let mut v = 0;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    eq[(0, v)] = 1.0;
                    y0[v] = 1.0 / n as f64;
                }
                v += 1;
            }
        }
        let problem = Problem {
            num_vars: nv,
            blocks: vec![b],
            eq,
            eq_rhs: DVector::from_element(1, 1.0),
        };
        let sol = maximize_margin(&problem, &y0, &Settings { scale: 0.3, ..Settings::default() }).unwrap();
        assert_eq!(sol.outcome, Outcome::Feasible);
        assert!((sol.margin - 1.0 / 3.0).abs() < 1e-8);
        assert!(sol.margin_upper >= sol.margin);
    }

    #[test]
    fn detects_infeasible_threshold() {
        // 2x2 with tr Y = 1: the best margin is 1/2
        let b = sym_var_block(2, 0);
        let eq = Mat::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
        let problem = Problem {
            num_vars: 3,
            blocks: vec![b],
            eq,
            eq_rhs: DVector::from_element(1, 1.0),
        };
        let settings = Settings {
            scale: 0.5,
            threshold: 0.6,
            stop_when_feasible: true,
            ..Settings::default()
        };
        let sol = maximize_margin(&problem, &[0.5, 0.0, 0.5], &settings).unwrap();
        assert_eq!(sol.outcome, Outcome::Infeasible);
        assert!(sol.margin_upper < 0.6);
        let feasible = Settings { threshold: 0.4, ..settings };
        assert_eq!(
            maximize_margin(&problem, &[0.5, 0.0, 0.5], &feasible).unwrap().outcome,
            Outcome::Feasible
        );
    }

    #[test]
    fn rejects_bad_start() {
        let b = sym_var_block(2, 0);
        let problem = Problem {
            num_vars: 3,
            blocks: vec![b],
            eq: Mat::from_row_slice(1, 3, &[1.0, 0.0, 1.0]),
            eq_rhs: DVector::from_element(1, 1.0),
        };
        assert!(matches!(
            maximize_margin(&problem, &[1.0, 0.0, 1.0], &Settings::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
