//! Initial latent skills come from an upper-truncated normal. The sampler
//! stays exact and cheap even when the bound sits far in the lower tail.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use roylab::truncnorm::UpperTruncatedNormal;

pub fn run() -> roylab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for upper in [2.0, 0.0, -3.0, -20.0] {
        let d = UpperTruncatedNormal::new(0.0, 1.0, upper)?;
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("N(0,1) | x <= {upper:>5}: mean {mean:>8.4}, largest draw {max:>8.4}");
    }
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
