//! Central finite-difference oracle for gradient verification. Lives in the
//! library so integration and acceptance tests can share it; it never touches
//! the reverse-mode path it is used to check.

/// Central-difference gradient of `f` at `params` with step `h`.
/// `f` must be a pure function of the parameter vector.
pub fn central_diff<F>(mut f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; params.len()];
    let mut work = params.to_vec();
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let plus = f(&work);
        work[i] = orig - h;
        let minus = f(&work);
        work[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Largest elementwise relative error between two gradient vectors, with a
/// floor on the denominator so near-zero components compare absolutely.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // f(p) = sum p_i^2 has gradient 2p
        let p = [0.5, -1.5, 2.0];
        let g = central_diff(|q| q.iter().map(|v| v * v).sum(), &p, 1e-5);
        let expected = [1.0, -3.0, 4.0];
        assert!(max_rel_error(&g, &expected) < 1e-8);
    }
}
