use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::density_families::std_normal;
use crate::error::{Error, Result};

fn cholesky(cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = cov.len();
    if d == 0 || cov.iter().any(|r| r.len() != d) {
        return Err(Error::LinearAlgebra("scale matrix must be square and non-empty".into()));
    }
    let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::LinearAlgebra("scale matrix is not positive definite".into()))
}

/// Multivariate Student-t with location μ, scale Σ and ν degrees of freedom.
#[derive(Clone, Debug)]
pub struct MultivariateT {
    center: DVector<f64>,
    chol: DMatrix<f64>,
    df: f64,
}

impl MultivariateT {
    pub fn new(center: Vec<f64>, scale: &[Vec<f64>], df: f64) -> Result<Self> {
        if !(df > 0.0) {
            return Err(Error::input(format!("t degrees of freedom must be positive, got {df}")));
        }
        let chol = cholesky(scale)?;
        if chol.nrows() != center.len() {
            return Err(Error::input("t location and scale dimensions differ"));
        }
        Ok(Self {
            center: DVector::from_vec(center),
            chol,
            df,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        self.center.as_slice()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| std_normal(rng));
        let w: f64 = ChiSquared::new(self.df).expect("df checked positive").sample(rng) / self.df;
        let x = &self.center + (&self.chol * z) / w.sqrt();
        x.iter().copied().collect()
    }

    /// Log density up to an additive constant.
    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.center;
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        let d = self.dim() as f64;
        -0.5 * (self.df + d) * (z.norm_squared() / self.df).ln_1p()
    }
}

/// Symmetric Gaussian random-walk step with a fixed covariance.
#[derive(Clone, Debug)]
pub struct RandomWalk {
    chol: DMatrix<f64>,
}

impl RandomWalk {
    pub fn new(cov: &[Vec<f64>]) -> Result<Self> {
        Ok(Self { chol: cholesky(cov)? })
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn step<R: Rng + ?Sized>(&self, from: &[f64], rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| std_normal(rng));
        let s = &self.chol * z;
        from.iter().zip(s.iter()).map(|(a, b)| a + b).collect()
    }
}

/// Dirichlet proposal centred at the current weights: α = c·π + floor.
#[derive(Clone, Copy, Debug)]
pub struct DirichletStep {
    pub concentration: f64,
    pub floor: f64,
}

impl DirichletStep {
    fn alphas(&self, center: &[f64]) -> Vec<f64> {
        center.iter().map(|w| self.concentration * w + self.floor).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, center: &[f64], rng: &mut R) -> Vec<f64> {
        let draws: Vec<f64> = self
            .alphas(center)
            .into_iter()
            .map(|a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        draws.into_iter().map(|g| g / total).collect()
    }

    /// ln q(x | center).
    pub fn ln_density(&self, x: &[f64], center: &[f64]) -> f64 {
        let alphas = self.alphas(center);
        let total: f64 = alphas.iter().sum();
        let mut ln = ln_gamma(total);
        for (a, xi) in alphas.iter().zip(x) {
            if !(*xi > 0.0) {
                return f64::NEG_INFINITY;
            }
            ln += (a - 1.0) * xi.ln() - ln_gamma(*a);
        }
        ln
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn t_density_peaks_at_center_and_is_symmetric() {
        let t = MultivariateT::new(vec![1.0, -1.0], &[vec![2.0, 0.5], vec![0.5, 1.0]], 3.0).unwrap();
        assert_eq!(t.ln_density(&[1.0, -1.0]), 0.0);
        let a = t.ln_density(&[1.5, -0.7]);
        let b = t.ln_density(&[0.5, -1.3]);
        assert!((a - b).abs() < 1e-14);
        assert!(a < 0.0);
    }

    #[test]
    fn t_samples_have_the_right_covariance() {
        let scale = vec![vec![2.0, 0.6], vec![0.6, 1.0]];
        let t = MultivariateT::new(vec![0.0, 3.0], &scale, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..100_000).map(|_| t.sample(&mut rng)).collect();
        let c0: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let c1: Vec<f64> = xs.iter().map(|x| x[1]).collect();
        // Cov = ν/(ν−2) Σ
        let f = 10.0 / 8.0;
        assert!((stats::mean(&c1) - 3.0).abs() < 0.02);
        assert!((stats::variance(&c0) / (f * 2.0) - 1.0).abs() < 0.05);
        assert!((stats::variance(&c1) / (f * 1.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_indefinite_scale() {
        assert!(MultivariateT::new(vec![0.0], &[vec![-1.0]], 3.0).is_err());
        assert!(MultivariateT::new(vec![0.0], &[vec![1.0]], 0.0).is_err());
        assert!(RandomWalk::new(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn dirichlet_draws_are_on_the_simplex() {
        let step = DirichletStep {
            concentration: 50.0,
            floor: 0.05,
        };
        let center = vec![0.7, 0.2, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mean = [0.0; 3];
        for _ in 0..20_000 {
            let x = step.sample(&center, &mut rng);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(step.ln_density(&x, &center).is_finite());
            for (m, v) in mean.iter_mut().zip(&x) {
                *m += v / 20_000.0;
            }
        }
        // E[x_k] = α_k / Σα
        let total = 50.0 + 0.15;
        for (m, c) in mean.iter().zip(&center) {
            assert!((m - (50.0 * c + 0.05) / total).abs() < 0.005);
        }
    }

    #[test]
    fn dirichlet_density_matches_beta_for_two_components() {
        let step = DirichletStep {
            concentration: 4.0,
            floor: 1.0,
        };
        let center = [0.5, 0.5];
        // α = (3, 3): Beta(3,3) density at 0.3 is 30·0.3²·0.7²
        let want = (30.0 * 0.09 * 0.49f64).ln();
        assert!((step.ln_density(&[0.3, 0.7], &center) - want).abs() < 1e-12);
    }
}
