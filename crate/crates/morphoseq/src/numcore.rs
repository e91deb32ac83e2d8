//! Minimal dense linear algebra and the Adadelta optimizer, all f64.
//!
//! Everything here is a pure function over value types; the model is small
//! enough that naive row-major loops are plenty. `finite_diff_grad` is the
//! independent oracle used to verify the hand-written backward pass.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumError {
    #[error("{op}: dimension mismatch, {lhs:?} vs {rhs:?}")]
    DimMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Dense row-major f64 matrix. Bias vectors are stored as n-by-1 matrices so
/// that the optimizer and the gradient checker treat every parameter alike.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::Argument(format!(
                "from_vec: {} values for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(NumError::Argument("from_rows: ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// self += other, elementwise.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<(), NumError> {
        if self.shape() != other.shape() {
            return Err(NumError::DimMismatch {
                op: "add_assign",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// self *= s, elementwise.
    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

/// Standard matrix product. Shapes must agree.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, NumError> {
    if a.cols != b.rows {
        return Err(NumError::DimMismatch {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = b.row(k);
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    debug_assert!(out.is_finite(), "matmul produced non-finite values");
    Ok(out)
}

/// y = M v for a row-major M and a vector v of length M.cols.
pub fn matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols, v.len(), "matvec: {}x{} by {}", m.rows, m.cols, v.len());
    (0..m.rows)
        .map(|r| {
            m.row(r)
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// out += Mᵀ u, the transpose product, accumulated in place.
pub fn matvec_t_add(out: &mut [f64], m: &Matrix, u: &[f64]) {
    assert_eq!(m.rows, u.len(), "matvec_t_add: rows {} vs {}", m.rows, u.len());
    assert_eq!(m.cols, out.len(), "matvec_t_add: cols {} vs {}", m.cols, out.len());
    for (r, &ur) in u.iter().enumerate() {
        for (o, &mrc) in out.iter_mut().zip(m.row(r)) {
            *o += mrc * ur;
        }
    }
}

/// g += u vᵀ, the outer-product accumulation used by every weight gradient.
pub fn outer_add(g: &mut Matrix, u: &[f64], v: &[f64]) {
    assert_eq!(g.rows, u.len(), "outer_add: rows {} vs {}", g.rows, u.len());
    assert_eq!(g.cols, v.len(), "outer_add: cols {} vs {}", g.cols, v.len());
    for (r, &ur) in u.iter().enumerate() {
        for (grc, &vc) in g.row_mut(r).iter_mut().zip(v) {
            *grc += ur * vc;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: {} vs {}", a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax (max subtraction). Errors on empty input.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>, NumError> {
    if v.is_empty() {
        return Err(NumError::EmptyInput("softmax"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NumError::NonFinite("softmax input".into()));
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Accumulators for one parameter matrix under Adadelta.
#[derive(Clone, Debug)]
pub struct AdadeltaState {
    acc_grad: Matrix,
    acc_update: Matrix,
    rho: f64,
    eps: f64,
}

impl AdadeltaState {
    /// Fresh state (zero accumulators) shaped like `param`.
    pub fn new(param: &Matrix, rho: f64, eps: f64) -> Result<Self, NumError> {
        if !(0.0 < rho && rho < 1.0) {
            return Err(NumError::Argument(format!("adadelta rho {rho} not in (0,1)")));
        }
        if eps <= 0.0 {
            return Err(NumError::Argument(format!("adadelta eps {eps} not positive")));
        }
        Ok(AdadeltaState {
            acc_grad: Matrix::zeros(param.rows, param.cols),
            acc_update: Matrix::zeros(param.rows, param.cols),
            rho,
            eps,
        })
    }

    pub fn acc_grad(&self) -> &Matrix {
        &self.acc_grad
    }

    pub fn acc_update(&self) -> &Matrix {
        &self.acc_update
    }
}

/// One Adadelta update, elementwise:
/// acc_grad <- rho*acc_grad + (1-rho)g^2
/// delta     = -sqrt(acc_update+eps)/sqrt(acc_grad+eps) * g
/// acc_update <- rho*acc_update + (1-rho)delta^2
/// param    <- param + delta
pub fn adadelta_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdadeltaState,
) -> Result<(), NumError> {
    if param.shape() != grad.shape() || param.shape() != state.acc_grad.shape() {
        return Err(NumError::DimMismatch {
            op: "adadelta_step",
            lhs: param.shape(),
            rhs: grad.shape(),
        });
    }
    let (rho, eps) = (state.rho, state.eps);
    for i in 0..param.data.len() {
        let g = grad.data[i];
        let ag = rho * state.acc_grad.data[i] + (1.0 - rho) * g * g;
        let delta = -((state.acc_update.data[i] + eps).sqrt() / (ag + eps).sqrt()) * g;
        state.acc_grad.data[i] = ag;
        state.acc_update.data[i] = rho * state.acc_update.data[i] + (1.0 - rho) * delta * delta;
        param.data[i] += delta;
    }
    debug_assert!(param.is_finite(), "adadelta_step produced non-finite params");
    Ok(())
}

/// Central-difference gradient estimate, one scalar parameter at a time:
/// (L(theta+h) - L(theta-h)) / 2h. The loss function must be deterministic
/// and pure in the parameters.
pub fn finite_diff_grad<F>(
    mut loss_fn: F,
    params: &[Matrix],
    h: f64,
) -> Result<Vec<Matrix>, NumError>
where
    F: FnMut(&[Matrix]) -> f64,
{
    if !(h > 0.0) {
        return Err(NumError::Argument(format!("finite_diff_grad: h {h} not positive")));
    }
    let mut work: Vec<Matrix> = params.to_vec();
    let mut grads: Vec<Matrix> = params
        .iter()
        .map(|p| Matrix::zeros(p.rows, p.cols))
        .collect();
    for t in 0..work.len() {
        for i in 0..work[t].data.len() {
            let orig = work[t].data[i];
            work[t].data[i] = orig + h;
            let plus = loss_fn(&work);
            work[t].data[i] = orig - h;
            let minus = loss_fn(&work);
            work[t].data[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NumError::NonFinite(format!(
                    "finite_diff_grad: loss at tensor {t} element {i}"
                )));
            }
            grads[t].data[i] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let i2 = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(matmul(&i2, &b).unwrap(), b);
    }

    #[test]
    fn matmul_hand_arithmetic() {
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(matmul(&a, &b).unwrap(), m(2, 2, &[19.0, 22.0, 43.0, 50.0]));
    }

    #[test]
    fn matmul_row_by_column_of_ones() {
        let a = m(1, 3, &[1.0, 1.0, 1.0]);
        let b = m(3, 1, &[1.0, 1.0, 1.0]);
        assert_eq!(matmul(&a, &b).unwrap(), m(1, 1, &[3.0]));
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = m(2, 3, &[0.0; 6]);
        let b = m(2, 2, &[0.0; 4]);
        let err = matmul(&a, &b).unwrap_err();
        assert_eq!(
            err,
            NumError::DimMismatch {
                op: "matmul",
                lhs: (2, 3),
                rhs: (2, 2)
            }
        );
        assert!(err.to_string().contains("(2, 3)"));
        assert!(err.to_string().contains("(2, 2)"));
    }

    #[test]
    fn softmax_equal_logits() {
        let p = softmax(&[2.5, 2.5, 2.5]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_ln2() {
        let p = softmax(&[0.0, 2.0f64.ln()]).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_large_logits_no_overflow() {
        let p = softmax(&[1000.0, 1000.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[0.3, -2.0, 5.5, 0.0, 1.1]).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn softmax_empty_is_error() {
        assert_eq!(softmax(&[]).unwrap_err(), NumError::EmptyInput("softmax"));
    }

    #[test]
    fn softmax_permutation_equivariant() {
        let v = [0.4, -1.0, 3.0, 0.2];
        let perm = [2, 0, 3, 1];
        let shuffled: Vec<f64> = perm.iter().map(|&i| v[i]).collect();
        let p = softmax(&v).unwrap();
        let ps = softmax(&shuffled).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(ps[k], p[i]);
        }
    }

    #[test]
    fn adadelta_zero_grad_is_fixed_point() {
        let mut p = m(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        let before = p.clone();
        let g = Matrix::zeros(2, 2);
        let mut st = AdadeltaState::new(&p, 0.95, 1e-6).unwrap();
        adadelta_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p, before);
        // accumulators stay at zero when they started there
        assert!(st.acc_grad().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adadelta_first_step_closed_form() {
        // fresh state, rho=0.95, eps=1e-6, g=1: delta = -sqrt(1e-6/(0.05+1e-6))
        let mut p = m(1, 1, &[0.0]);
        let g = m(1, 1, &[1.0]);
        let mut st = AdadeltaState::new(&p, 0.95, 1e-6).unwrap();
        adadelta_step(&mut p, &g, &mut st).unwrap();
        let expected = -(1e-6f64 / (0.05 + 1e-6)).sqrt();
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn adadelta_acc_grad_grows_under_constant_grad() {
        let mut p = m(1, 1, &[0.0]);
        let g = m(1, 1, &[1.0]);
        let mut st = AdadeltaState::new(&p, 0.95, 1e-6).unwrap();
        adadelta_step(&mut p, &g, &mut st).unwrap();
        let acc1 = st.acc_grad().get(0, 0);
        adadelta_step(&mut p, &g, &mut st).unwrap();
        let acc2 = st.acc_grad().get(0, 0);
        assert!(acc2 > acc1);
    }

    #[test]
    fn adadelta_shape_mismatch() {
        let mut p = Matrix::zeros(2, 2);
        let g = Matrix::zeros(2, 3);
        let mut st = AdadeltaState::new(&p, 0.95, 1e-6).unwrap();
        assert!(matches!(
            adadelta_step(&mut p, &g, &mut st),
            Err(NumError::DimMismatch { .. })
        ));
    }

    #[test]
    fn finite_diff_quadratic() {
        // loss = theta^2 at theta=3 -> gradient 6, exact under central differences
        let params = vec![m(1, 1, &[3.0])];
        let g = finite_diff_grad(|p| p[0].get(0, 0).powi(2), &params, 1e-5).unwrap();
        assert!((g[0].get(0, 0) - 6.0).abs() < 1e-8);
    }

    #[test]
    fn finite_diff_constant_loss() {
        let params = vec![m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])];
        let g = finite_diff_grad(|_| 42.0, &params, 1e-5).unwrap();
        assert!(g[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finite_diff_rejects_non_finite_loss() {
        let params = vec![m(1, 1, &[0.0])];
        let err = finite_diff_grad(|_| f64::NAN, &params, 1e-5).unwrap_err();
        assert!(matches!(err, NumError::NonFinite(_)));
    }

    #[test]
    fn matvec_and_transpose_agree_with_matmul() {
        let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = [1.0, 0.5, -1.0];
        let got = matvec(&a, &v);
        assert_eq!(got, vec![1.0 + 1.0 - 3.0, 4.0 + 2.5 - 6.0]);
        let mut tout = vec![0.0; 3];
        matvec_t_add(&mut tout, &a, &[1.0, -1.0]);
        assert_eq!(tout, vec![-3.0, -3.0, -3.0]);
    }

    #[test]
    fn outer_add_accumulates() {
        let mut g = Matrix::zeros(2, 2);
        outer_add(&mut g, &[1.0, 2.0], &[3.0, 4.0]);
        outer_add(&mut g, &[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(g, m(2, 2, &[6.0, 8.0, 12.0, 16.0]));
    }
}
