//! Mean squared error between two fields over sampled domain points.

use arrayvec::ArrayVec;
use rand_chacha::ChaCha8Rng;

/// A field evaluable at 2-coordinate points with up to 2 output components.
pub trait Field {
    fn eval(&self, x: [f64; 2]) -> ArrayVec<f64, 2>;
}

impl<F: Fn([f64; 2]) -> ArrayVec<f64, 2>> Field for F {
    fn eval(&self, x: [f64; 2]) -> ArrayVec<f64, 2> {
        self(x)
    }
}

/// Mean squared difference between two fields at `n` points drawn by the
/// domain sampler. Deterministic given the seed.
pub fn mse_eval<A, B, S>(a: &A, b: &B, mut sample: S, n: usize, rng: &mut ChaCha8Rng) -> f64
where
    A: Field + ?Sized,
    B: Field + ?Sized,
    S: FnMut(&mut ChaCha8Rng) -> [f64; 2],
{
    let mut acc = 0.0;
    let mut count = 0usize;
    for _ in 0..n {
        let x = sample(rng);
        let va = a.eval(x);
        let vb = b.eval(x);
        debug_assert_eq!(va.len(), vb.len());
        for (p, q) in va.iter().zip(vb.iter()) {
            acc += (p - q) * (p - q);
            count += 1;
        }
    }
    acc / count as f64
}
