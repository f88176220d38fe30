use std::f64::consts::PI;

/// Multi-frequency sinusoidal position code: for `k = 0..dim/2` the pair
/// `(sin(2π·p·(k+1)/period), cos(2π·p·(k+1)/period))`, with `p` reduced
/// modulo `period` so that positions one period apart encode identically.
pub fn cyclical_encode(position: usize, period: usize, dim: usize) -> Vec<f64> {
    assert!(dim.is_multiple_of(2), "cyclical encoding dimension must be even");
    let period = period.max(1);
    let p = (position % period) as f64;
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let angle = 2.0 * PI * p * (k + 1) as f64 / period as f64;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    out
}
