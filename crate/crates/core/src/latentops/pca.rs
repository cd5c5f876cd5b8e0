use nalgebra::{DMatrix, SymmetricEigen};

/// Exact PCA of a row set via eigen-decomposition of the smaller of the covariance and Gram matrices.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, largest variance first.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (unbiased, `/(n − 1)`).
    pub variances: Vec<f64>,
}

pub(crate) fn fit(rows: &[Vec<f64>], n_components: usize) -> Pca {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let denom = (n.max(2) - 1) as f64;

    let (mut pairs, via_gram): (Vec<(f64, Vec<f64>)>, bool) = if d <= n {
        let cov = centered.transpose() * &centered;
        let eig = SymmetricEigen::new(cov);
        (
            (0..d)
                .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
                .collect(),
            false,
        )
    } else {
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        (
            (0..n)
                .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
                .collect(),
            true,
        )
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs.first().map(|p| p.0.max(0.0)).unwrap_or(0.0);
    let floor = top * 1e-12;

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(n_components);
    let mut variances = Vec::with_capacity(n_components);
    for (lambda, vec) in pairs.into_iter() {
        if components.len() == n_components {
            break;
        }
        if lambda <= floor || lambda <= 0.0 {
            continue;
        }
        let dir = if via_gram {
            // v = Xᵀu / sqrt(λ)
            let u = nalgebra::DVector::from_vec(vec);
            let v = centered.transpose() * u / lambda.sqrt();
            v.iter().copied().collect()
        } else {
            vec
        };
        variances.push(lambda / denom);
        components.push(orthonormalize(dir, &components));
    }
    // rank-deficient data: complete the basis with arbitrary orthonormal directions
    let mut axis = 0;
    while components.len() < n_components && axis < d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        axis += 1;
        let v = orthonormalize(e, &components);
        if v.iter().any(|x| x.is_nan()) {
            continue;
        }
        components.push(v);
        variances.push(0.0);
    }
    for c in &mut components {
        fix_sign(c);
    }
    Pca {
        mean,
        components,
        variances,
    }
}

/// Gram–Schmidt against `basis`, then unit-normalize (NaN if `v` lies in the span).
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Vec<f64> {
    for _ in 0..2 {
        for b in basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return vec![f64::NAN; v.len()];
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Flips `v` so its largest-magnitude coefficient is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

impl Pca {
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row)
                    .zip(&self.mean)
                    .map(|((ci, x), m)| ci * (x - m))
                    .sum()
            })
            .collect()
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, a) in self.components.iter().zip(coords) {
            out.iter_mut().zip(c).for_each(|(o, ci)| *o += a * ci);
        }
        out
    }
}
