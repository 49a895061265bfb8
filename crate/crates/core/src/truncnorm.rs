//! Upper-truncated normal sampling.
//!
//! For a standardized bound `beta >= 0` we split the mass at zero: the lower
//! half is a reflected half-normal, the `[0, beta]` slab is drawn by rejection.
//! For `beta < 0` the tail is drawn with Robert's (1995) exponential proposal,
//! which stays efficient however deep the truncation.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Normal(mu, sigma) conditioned on `x <= upper`.
#[derive(Debug, Clone, Copy)]
pub struct UpperTruncatedNormal {
    mu: f64,
    sigma: f64,
    upper: f64,
    beta: f64,
    p_lower: f64,
}

impl UpperTruncatedNormal {
    pub fn new(mu: f64, sigma: f64, upper: f64) -> Result<Self> {
        if !upper.is_finite() || !mu.is_finite() {
            return Err(Error::NonFiniteBound);
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("truncated normal scale must be > 0, got {sigma}")));
        }
        let beta = (upper - mu) / sigma;
        let p_lower = if beta >= 0.0 {
            0.5 / std_normal_cdf(beta)
        } else {
            0.0
        };
        Ok(Self {
            mu,
            sigma,
            upper,
            beta,
            p_lower,
        })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    fn sample_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let beta = self.beta;
        if beta < 0.0 {
            // -x with x >= alpha
            let alpha = -beta;
            let lambda = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
            loop {
                let e: f64 = Exp1.sample(rng);
                let x = alpha + e / lambda;
                let u: f64 = rng.random();
                if u <= (-0.5 * (x - lambda).powi(2)).exp() {
                    return -x;
                }
            }
        }
        if rng.random::<f64>() < self.p_lower {
            let z: f64 = StandardNormal.sample(rng);
            return -z.abs();
        }
        if beta < 1.0 {
            loop {
                let x = beta * rng.random::<f64>();
                if rng.random::<f64>() <= (-0.5 * x * x).exp() {
                    return x;
                }
            }
        }
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = z.abs();
            if x <= beta {
                return x;
            }
        }
    }
}

impl Distribution<f64> for UpperTruncatedNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.mu + self.sigma * self.sample_standard(rng);
        x.min(self.upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_finite_bound() {
        assert!(matches!(
            UpperTruncatedNormal::new(0.0, 1.0, f64::INFINITY),
            Err(Error::NonFiniteBound)
        ));
        assert!(UpperTruncatedNormal::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn respects_bound_in_every_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for upper in [-12.0, -3.0, -0.2, 0.0, 0.4, 2.5, 9.0] {
            let d = UpperTruncatedNormal::new(0.0, 1.0, upper).unwrap();
            for _ in 0..20_000 {
                assert!(d.sample(&mut rng) <= upper);
            }
        }
    }

    #[test]
    fn deep_tail_mean_is_near_bound() {
        // E[X | X <= -6] = -phi(6)/Phi(-6) ~ -6.158
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = UpperTruncatedNormal::new(0.0, 1.0, -6.0).unwrap();
        let n = 100_000;
        let m = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m + 6.158).abs() < 0.01, "{m}");
    }
}
