//! Dense real linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Eigenvalues of general matrices come
//! from balancing, Hessenberg reduction and Francis double-shift QR with
//! exceptional shifts; symmetric problems go through the symmetric eigensolver.
//!
//! The degree-`d` Veronese lift acts on the *scaled* monomial basis
//! `y_α = sqrt(d!/α!) · x^α`, in which `‖x^[d]‖ = ‖x‖^d` and the lift is an
//! exact matrix homomorphism: `V(AB) = V(A)V(B)`, `V(I) = I`, `V(Aᵀ) = V(A)ᵀ`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Hessenberg, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// QR sweeps allowed per eigenvalue before giving up.
const QR_ITERS_PER_EIGENVALUE: usize = 60;

pub fn ensure_finite(a: &Mat, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!("{what} is empty")));
    }
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_square(a: &Mat) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        })
    }
}

/// Kronecker product `a ⊗ b`; block `(i, j)` is `a[i,j] · b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Largest singular value.
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let gram = if a.nrows() >= a.ncols() {
        a.tr_mul(a)
    } else {
        a * a.transpose()
    };
    max_sym_eigenvalue(&gram).max(0.0).sqrt()
}

pub fn frobenius_norm(a: &Mat) -> f64 {
    a.norm()
}

/// Maximum modulus over the (complex) eigenvalues of a square matrix.
pub fn spectral_radius(a: &Mat) -> Result<f64> {
    ensure_square(a)?;
    let n = a.nrows();
    if n == 1 {
        return Ok(a[(0, 0)].abs());
    }
    if a.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    Ok(eigenvalues(a)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

/// Eigenvalues of a general square matrix as `(re, im)` pairs, unordered.
pub fn eigenvalues(a: &Mat) -> Result<Vec<(f64, f64)>> {
    ensure_square(a)?;
    ensure_finite(a, "eigenvalue input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // A permutation brings `a` to block-triangular form with one diagonal
    // block per strongly connected component of its sparsity graph, so the
    // spectrum is the union of the blocks' spectra. Lifted products are
    // mostly zero blocks, and nilpotent pieces defeat plain QR.
    let mut out = Vec::with_capacity(n);
    for comp in strong_components(a) {
        if comp.len() == 1 {
            out.push((a[(comp[0], comp[0])], 0.0));
            continue;
        }
        let mut b = a.select_rows(&comp).select_columns(&comp);
        balance(&mut b);
        let h = Hessenberg::new(b).h();
        let ev = hessenberg_qr(&h)
            .ok_or_else(|| Error::Inconclusive(format!("QR iteration did not converge ({0}x{0} block)", comp.len())))?;
        out.extend(ev);
    }
    Ok(out)
}

/// Strongly connected components of the graph with an edge `i → j` for every
/// nonzero `a[i][j]` (Tarjan).
fn strong_components(a: &Mat) -> Vec<Vec<usize>> {
    struct State<'a> {
        a: &'a Mat,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(st: &mut State, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for w in 0..st.a.ncols() {
            if st.a[(v, w)] == 0.0 {
                continue;
            }
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.out.push(comp);
        }
    }
    let n = a.nrows();
    let mut st = State {
        a,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}

/// Diagonal similarity by powers of two that equalises row and column norms.
fn balance(a: &mut Mat) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                c += a[(j, i)].abs();
                r += a[(i, j)].abs();
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                a.row_mut(i).scale_mut(1.0 / f);
                a.column_mut(i).scale_mut(f);
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, deflating one or
/// two eigenvalues at a time. Exceptional shifts every ten sweeps break the
/// cycles that plain shifts fall into on symmetric spectra.
fn hessenberg_qr(h: &Mat) -> Option<Vec<(f64, f64)>> {
    let n = h.nrows();
    // 1-based working copy keeps the index arithmetic of the classic algorithm
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=n {
            a[i][j] = if i > j + 1 { 0.0 } else { h[(i - 1, j - 1)] };
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a negligible subdiagonal element
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if its == QR_ITERS_PER_EIGENVALUE {
                return None;
            }
            if its % 10 == 0 && its > 0 {
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // two consecutive small subdiagonal elements
            let (mut p, mut q, mut r): (f64, f64, f64);
            let mut m = nn - 2;
            loop {
                let z = a[m][m];
                let r0 = x - z;
                let s0 = y - z;
                p = (r0 * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r0 - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            // double QR step on rows l..nn, columns m..nn
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        let mut p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Some((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_sym_eigenvalue(a: &Mat) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn max_sym_eigenvalue(a: &Mat) -> f64 {
    sym_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// Product of a sequence of square matrices, accumulated with renormalisation.
///
/// Returns `(P / s, ln s)` where `P` is the plain product `factors[0] · factors[1] · …`.
/// `s` is chosen so the returned matrix has unit max-abs entry (or is zero).
pub fn scaled_product<'a, I>(dim: usize, factors: I) -> (Mat, f64)
where
    I: IntoIterator<Item = &'a Mat>,
{
    let mut acc = Mat::identity(dim, dim);
    let mut log_scale = 0.0;
    for f in factors {
        acc = &acc * f;
        let m = acc.amax();
        if m == 0.0 {
            return (acc, f64::NEG_INFINITY);
        }
        acc /= m;
        log_scale += m.ln();
    }
    (acc, log_scale)
}

/// Scaled basis of homogeneous monomials of a fixed degree, in graded
/// lexicographic order (`x_1^d` first).
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    num_vars: usize,
    degree: usize,
    monomials: Vec<Vec<u16>>,
    scales: Vec<f64>,
    index: HashMap<Vec<u16>, usize>,
}

impl MonomialBasis {
    pub fn new(num_vars: usize, degree: usize) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidArgument("monomial basis needs at least one variable".into()));
        }
        if degree > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("degree {degree} too large")));
        }
        let mut monomials = Vec::new();
        let mut current = vec![0u16; num_vars];
        fill_monomials(0, degree as u16, &mut current, &mut monomials);
        let scales = monomials.iter().map(|a| multinomial(a).sqrt()).collect();
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(Self {
            num_vars,
            degree,
            monomials,
            scales,
            index,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u16>] {
        &self.monomials
    }

    pub fn monomial(&self, i: usize) -> &[u16] {
        &self.monomials[i]
    }

    /// `sqrt(d! / Π α_j!)` per monomial.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn index_of(&self, exponents: &[u16]) -> Option<usize> {
        self.index.get(exponents).copied()
    }

    /// The scaled monomial vector `x^[d]`.
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.num_vars {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, basis has {} variables",
                x.len(),
                self.num_vars
            )));
        }
        Ok(DVector::from_iterator(
            self.len(),
            self.monomials.iter().zip(&self.scales).map(|(alpha, s)| {
                s * alpha
                    .iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product::<f64>()
            }),
        ))
    }
}

fn fill_monomials(var: usize, remaining: u16, current: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    let n = current.len();
    if var == n - 1 {
        current[var] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        fill_monomials(var + 1, remaining - e, current, out);
    }
    current[var] = 0;
}

/// `(Σα)! / Π α_j!` as a float.
pub fn multinomial(alpha: &[u16]) -> f64 {
    let mut total = 0u32;
    let mut value = 1.0;
    for &e in alpha {
        for k in 1..=e as u32 {
            total += 1;
            value *= total as f64 / k as f64;
        }
    }
    value
}

/// Matrix of the degree-`d` symmetric power of `a` on the scaled monomial basis:
/// `(a·x)^[d] = V(a) · x^[d]`.
pub fn veronese_lift(a: &Mat, basis: &MonomialBasis) -> Result<Mat> {
    ensure_square(a)?;
    let n = basis.num_vars();
    if a.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, basis has {} variables",
            a.nrows(),
            a.ncols(),
            n
        )));
    }
    let dim = basis.len();
    let mut v = Mat::zeros(dim, dim);
    for (row, alpha) in basis.monomials().iter().enumerate() {
        // Expand Π_i (a_i · x)^{α_i} term by term.
        let mut poly: HashMap<Vec<u16>, f64> = HashMap::new();
        poly.insert(vec![0u16; n], 1.0);
        for (i, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                let mut next: HashMap<Vec<u16>, f64> = HashMap::with_capacity(poly.len() * n);
                for (mono, c) in &poly {
                    for j in 0..n {
                        let aij = a[(i, j)];
                        if aij == 0.0 {
                            continue;
                        }
                        let mut m2 = mono.clone();
                        m2[j] += 1;
                        *next.entry(m2).or_insert(0.0) += c * aij;
                    }
                }
                poly = next;
            }
        }
        let s_row = basis.scales()[row];
        for (mono, c) in poly {
            if c == 0.0 {
                continue;
            }
            let col = basis
                .index_of(&mono)
                .expect("expanded monomial has the basis degree");
            v[(row, col)] += s_row * c / basis.scales()[col];
        }
    }
    Ok(v)
}
