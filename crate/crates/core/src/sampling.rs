//! Seeded random matrices.
//!
//! Every sampler takes an explicit RNG; nothing touches thread-local or
//! global randomness, so results depend only on the seed.

use nalgebra::SVD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{CMatrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries (unit variance).
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Closest isometry to `g` (the unitary polar factor `U V†` of its SVD).
///
/// Requires `rows >= cols`. An input that is already an isometry is returned
/// unchanged up to rounding.
pub fn isometry_from_generator(g: &CMatrix) -> CMatrix {
    debug_assert!(g.nrows() >= g.ncols());
    let svd = SVD::new(g.clone(), true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * v_t
}

pub fn random_isometry<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    isometry_from_generator(&complex_gaussian(rng, rows, cols))
}

pub fn random_unitary<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    random_isometry(rng, dim, dim)
}

/// Random density matrix `G G† / tr(G G†)` with a square Gaussian `G`.
pub fn random_density_matrix<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = complex_gaussian(rng, dim, dim);
    let h = &g * g.adjoint();
    let tr = h.trace().re;
    h / C64::new(tr, 0.0)
}
