//! Deterministic sample generation for field audits and constant estimation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::tensor::GradMatrix;

/// Where and how to probe a structure field: x-samples in the unit domain,
/// z-samples with log-uniform magnitudes plus a cluster near the field's
/// mu-scale.
#[derive(Clone, Debug)]
pub struct SampleSpec {
    pub seed: u64,
    pub n_comp: usize,
    pub n_dir: usize,
    pub samples: usize,
    /// log10 range of |z| magnitudes.
    pub z_log_range: (f64, f64),
    /// mu of the field under study; used for the near-mu cluster.
    pub mu_scale: f64,
}

impl SampleSpec {
    pub fn new(seed: u64, n_comp: usize, n_dir: usize, samples: usize) -> Self {
        Self {
            seed,
            n_comp,
            n_dir,
            samples,
            z_log_range: (-3.0, 3.0),
            mu_scale: 1.0,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu_scale = mu.max(1e-8);
        self
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Deterministic (x, z) sample stream.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<f64>, GradMatrix)> + '_ {
        let mut rng = self.rng();
        let spec = self.clone();
        (0..self.samples).map(move |k| {
            let x: Vec<f64> = (0..spec.n_dir).map(|_| rng.gen_range(0.0..1.0)).collect();
            let z = spec.sample_z(&mut rng, k);
            (x, z)
        })
    }

    fn sample_z(&self, rng: &mut ChaCha8Rng, k: usize) -> GradMatrix {
        let (nc, nd) = (self.n_comp, self.n_dir);
        let mut z = GradMatrix::zeros(nc, nd);
        let mut norm2 = 0.0;
        for c in 0..nc {
            for d in 0..nd {
                let v: f64 = rng.gen_range(-1.0..1.0);
                z.set(c, d, v);
                norm2 += v * v;
            }
        }
        if norm2 == 0.0 {
            z.set(0, 0, 1.0);
            norm2 = 1.0;
        }
        // every 5th sample clusters near the mu scale, rest log-uniform
        let mag = if k % 5 == 4 {
            self.mu_scale * 10f64.powf(rng.gen_range(-1.0..1.0))
        } else {
            10f64.powf(rng.gen_range(self.z_log_range.0..self.z_log_range.1))
        };
        z.scale_mut(mag / norm2.sqrt());
        z
    }
}
