//! Small dense linear algebra on row-major `Vec<Vec<T>>` matrices.

use crate::scalar::Real;

pub type Mat<T> = Vec<Vec<T>>;

pub fn zeros<T: Real>(r: usize, c: usize) -> Mat<T> {
    vec![vec![T::zero(); c]; r]
}

pub fn identity<T: Real>(n: usize) -> Mat<T> {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn mat_vec<T: Real>(m: &Mat<T>, v: &[T]) -> Vec<T> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
        .collect()
}

pub fn transpose<T: Real>(m: &Mat<T>) -> Mat<T> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j]).collect())
        .collect()
}

/// Quadratic form `a^T m b`.
pub fn bilinear<T: Real>(m: &Mat<T>, a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(m)
        .map(|(&ai, row)| ai * row.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>())
        .sum()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(a: &Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Mat<T> = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(m[piv][col].abs() > T::min_positive_value()) {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != T::zero() {
                for c in col..n {
                    let v = m[col][c];
                    m[r][c] -= f * v;
                }
                let v = rhs[col];
                rhs[r] -= f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Damped least squares step: minimizes `|J dx + r|^2 + lambda |dx|^2`.
pub fn damped_step<T: Real>(jac: &Mat<T>, res: &[T], lambda: T) -> Option<Vec<T>> {
    let m = jac.len();
    let n = if m == 0 { 0 } else { jac[0].len() };
    if m <= n {
        // (J J^T + lambda I) y = -r, dx = J^T y
        let mut a = zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[i][j] = jac[i].iter().zip(&jac[j]).map(|(&x, &y)| x * y).sum();
            }
            a[i][i] += lambda;
        }
        let rhs: Vec<T> = res.iter().map(|&r| -r).collect();
        let y = solve(&a, &rhs)?;
        Some(
            (0..n)
                .map(|k| (0..m).map(|i| jac[i][k] * y[i]).sum())
                .collect(),
        )
    } else {
        let mut a = zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..m).map(|k| jac[k][i] * jac[k][j]).sum();
            }
            a[i][i] += lambda;
        }
        let rhs: Vec<T> = (0..n)
            .map(|i| -(0..m).map(|k| jac[k][i] * res[k]).sum::<T>())
            .collect();
        solve(&a, &rhs)
    }
}

/// Forward-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<T: Real, F>(f: &F, x: &[T], fx: &[T], h: T) -> Option<Mat<T>>
where
    F: Fn(&[T]) -> Option<Vec<T>>,
{
    let m = fx.len();
    let mut jac = zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let step = h * (T::one() + x[k].abs());
        xp[k] = x[k] + step;
        let fp = f(&xp)?;
        xp[k] = x[k];
        for i in 0..m {
            jac[i][k] = (fp[i] - fx[i]) / step;
        }
    }
    Some(jac)
}
