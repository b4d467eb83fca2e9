use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::Result;
use crate::linalg::{
    default_oversample, spectral_profile, svd_randomized, Matrix, SpectralProfile,
    DEFAULT_POWER_ITERS,
};
use crate::rng::{seeded_rng, uniform_matrix};
use crate::scaling::ScalingOperator;

/// The random probe `E` with i.i.d. `U[-1, 1]` entries for a given seed.
pub fn probe_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    uniform_matrix(rows, cols, &mut seeded_rng(seed))
}

/// Full spectral profile of `S·E` for one probe draw.
pub fn probe_profile(s: &ScalingOperator, rows: usize, cols: usize, seed: u64) -> Result<SpectralProfile> {
    let se = s.forward(&probe_matrix(rows, cols, seed))?;
    spectral_profile(&se)
}

/// Leading `top` singular values of `S·E` from a randomized SVD, with the
/// total energy taken from the entries.
pub(crate) fn probe_profile_partial(
    s: &ScalingOperator,
    rows: usize,
    cols: usize,
    seed: u64,
    top: usize,
) -> Result<SpectralProfile> {
    let se = s.forward(&probe_matrix(rows, cols, seed))?;
    partial_profile(&se, top, seed)
}

pub(crate) fn partial_profile(a: &Matrix, top: usize, seed: u64) -> Result<SpectralProfile> {
    let top = top.max(1).min(a.min_dim());
    let oversample = default_oversample(top).min(a.min_dim() - top);
    let f = svd_randomized(a, top, oversample, DEFAULT_POWER_ITERS, seed)?;
    Ok(SpectralProfile::partial(f.s, a.frobenius_norm_sq(), a.shape()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ProbeKey {
    scaling: u64,
    rows: usize,
    cols: usize,
    seed: u64,
    /// `None` for a complete profile, `Some(top)` for a randomized partial one.
    top: Option<usize>,
}

/// Probe profiles keyed by (scaling, shape, seed).
///
/// One probe serves every `k` and every matrix that shares the layer shape
/// and scaling. Reads take a shared lock; inserts keep whichever value landed
/// first, so concurrent callers always observe the same profile.
#[derive(Debug, Default)]
pub struct ProbeCache {
    entries: RwLock<HashMap<ProbeKey, Arc<SpectralProfile>>>,
}

impl ProbeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("probe cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Complete probe profile, computed on first use.
    pub fn get_or_compute(
        &self,
        s: &ScalingOperator,
        rows: usize,
        cols: usize,
        seed: u64,
    ) -> Result<Arc<SpectralProfile>> {
        let key = ProbeKey { scaling: s.fingerprint(), rows, cols, seed, top: None };
        self.lookup_or_insert(key, || probe_profile(s, rows, cols, seed))
    }

    pub(crate) fn get_or_compute_partial(
        &self,
        s: &ScalingOperator,
        rows: usize,
        cols: usize,
        seed: u64,
        top: usize,
    ) -> Result<Arc<SpectralProfile>> {
        let key = ProbeKey { scaling: s.fingerprint(), rows, cols, seed, top: Some(top) };
        self.lookup_or_insert(key, || probe_profile_partial(s, rows, cols, seed, top))
    }

    fn lookup_or_insert(
        &self,
        key: ProbeKey,
        compute: impl FnOnce() -> Result<SpectralProfile>,
    ) -> Result<Arc<SpectralProfile>> {
        if let Some(hit) = self.entries.read().expect("probe cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(compute()?);
        let mut map = self.entries.write().expect("probe cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(fresh)))
    }
}

/// Process-wide cache used by [`super::srr_decompose`].
pub fn global_probe_cache() -> &'static ProbeCache {
    static CACHE: OnceLock<ProbeCache> = OnceLock::new();
    CACHE.get_or_init(ProbeCache::new)
}
