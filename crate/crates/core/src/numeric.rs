//! Small numerical helpers shared by the exact engine.

use std::sync::OnceLock;

const LN_FACTORIAL_TABLE: usize = 4096;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE + 1);
        let mut acc = NeumaierSum::default();
        table.push(0.0);
        for n in 1..=LN_FACTORIAL_TABLE {
            acc.add((n as f64).ln());
            table.push(acc.value());
        }
        table
    })
}

/// `ln(n!)`, tabulated up to 4096.
pub fn ln_factorial(n: usize) -> f64 {
    assert!(n <= LN_FACTORIAL_TABLE, "ln_factorial({n}) beyond table");
    ln_factorial_table()[n]
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = NeumaierSum::default();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Binomial pmf `P(X = x)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf(n: usize, p: f64, x: usize) -> f64 {
    if x > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    let ln = ln_choose(n, x) + x as f64 * p.ln() + (n - x) as f64 * (-p).ln_1p();
    ln.exp()
}

/// Logistic function `1 / (1 + e^{-x})` without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
