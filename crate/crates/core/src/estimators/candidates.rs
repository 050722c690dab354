use rand::seq::index;

use crate::data::CensoredSample;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

use super::SearchConfig;

/// Exact fits of random size-`p` subsamples.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub betas: Vec<Vec<f64>>,
    /// Sorted row indices of the subsample behind each candidate.
    pub provenance: Vec<Vec<usize>>,
    /// Singular subsamples drawn and discarded.
    pub rejected: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Builds a set from explicit coefficient vectors (no provenance).
    pub fn from_betas(betas: Vec<Vec<f64>>) -> Self {
        let provenance = vec![Vec::new(); betas.len()];
        Self { betas, provenance, rejected: 0 }
    }
}

/// Draws `cfg.n_candidates` uniformly random size-`p` subsamples with a
/// nonsingular design and solves each exactly. Singular draws are redrawn,
/// up to `100·N` draws in total.
pub fn generate_candidates(sample: &CensoredSample, cfg: &SearchConfig) -> Result<CandidateSet> {
    let (n, p) = (sample.n(), sample.p());
    let wanted = cfg.n_candidates;
    if wanted == 0 {
        return Err(Error::InvalidInput("n_candidates must be at least 1".into()));
    }
    if n < p {
        return Err(Error::TooFewObservations { n, p });
    }
    let mut rng = rng::stream(cfg.seed, cfg.rng_stream_id);
    let max_attempts = 100 * wanted;
    let mut betas = Vec::with_capacity(wanted);
    let mut provenance = Vec::with_capacity(wanted);
    let mut attempts = 0;
    let mut a = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    while betas.len() < wanted {
        if attempts == max_attempts {
            return Err(Error::SingularSubsamples { wanted, attempts });
        }
        attempts += 1;
        let mut idx = index::sample(&mut rng, n, p).into_vec();
        idx.sort_unstable();
        for (r, &i) in idx.iter().enumerate() {
            a[r * p..(r + 1) * p].copy_from_slice(sample.row(i));
            rhs[r] = sample.y()[i];
        }
        if let Some(beta) = linalg::solve(&a, &rhs) {
            betas.push(beta);
            provenance.push(idx);
        }
    }
    Ok(CandidateSet { betas, provenance, rejected: attempts - wanted })
}
