//! Compensated accumulation used by the series kernels and the integrators.

use num_complex::Complex64;

/// Neumaier (improved Kahan) summation for a complex accumulator, applied
/// independently to the real and imaginary parts.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(Complex64::new(other.re, other.im));
        self.add(Complex64::new(other.re_c, other.im_c));
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_summation() {
        let mut acc = CompensatedSum::new();
        acc.add(Complex64::new(1.0, -1.0));
        for _ in 0..1000 {
            acc.add(Complex64::new(1e-16, 1e-16));
        }
        acc.add(Complex64::new(-1.0, 1.0));
        let v = acc.value();
        assert!((v.re - 1e-13).abs() < 1e-25, "{}", v.re);
        assert!((v.im - 1e-13).abs() < 1e-25, "{}", v.im);
    }
}
