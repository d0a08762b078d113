/// Neumaier's variant of Kahan compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = NeumaierSum::new();
    s.extend(values);
    s.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(xs), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn ten_million_mixed_magnitudes_match_exact_reference() {
        // Values k/2^20 and 1e8 + k/2^20 alternate in sign pattern so the exact sum
        // is an integer combination representable in closed form.
        let n: u64 = 10_000_000;
        let mut s = NeumaierSum::new();
        let mut exact_small: u128 = 0;
        for k in 0..n {
            let small = (k % 1024) as f64 / 1_048_576.0;
            exact_small += (k % 1024) as u128;
            s.add(1e8);
            s.add(small);
            s.add(-1e8);
        }
        let exact = exact_small as f64 / 1_048_576.0;
        let rel = (s.total() - exact).abs() / exact;
        assert!(rel < 1e-12, "relative error {rel}");
    }
}
