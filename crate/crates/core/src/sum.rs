//! Compensated summation used for every reduction whose result must not depend
//! on thread scheduling.

/// Neumaier's variant of Kahan summation.
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

    #[inline]
    pub fn value(&self) -> f64 {
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

/// Sums in slice order with compensation.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut s = NeumaierSum::new();
    s.extend(values.iter().copied());
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(&v), 2.0);
    }

    #[test]
    fn integers_stay_exact() {
        let v: Vec<f64> = (0..1000).map(|i| if i % 3 == 0 { -1.0 } else { 2.0 }).collect();
        let exact: i64 = (0..1000).map(|i| if i % 3 == 0 { -1 } else { 2 }).sum();
        assert_eq!(compensated_sum(&v), exact as f64);
    }
}
