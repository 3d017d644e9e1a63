use std::str::FromStr;

use serde::Serialize;

/// Correctly rounded floating-point sum (Shewchuk's non-overlapping
/// partials, as in Python's `math.fsum`). The result does not depend on
/// the order of additions, which keeps reductions identical across rank
/// counts.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    /// Sum of non-finite inputs, which bypass the exact path.
    special: Option<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        if !x.is_finite() {
            self.special = Some(self.special.unwrap_or(0.0) + x);
            return;
        }
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Folds another accumulator into this one.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        if let Some(s) = other.special {
            self.add(s);
        }
    }

    pub fn value(&self) -> f64 {
        if let Some(s) = self.special {
            return s;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // Round half-even across the remaining partials.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceOp {
    L1,
    L2,
    Linf,
    Min,
    Max,
    Sum,
}

impl FromStr for ReduceOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "l1" => ReduceOp::L1,
            "l2" => ReduceOp::L2,
            "linf" => ReduceOp::Linf,
            "min" => ReduceOp::Min,
            "max" => ReduceOp::Max,
            "sum" => ReduceOp::Sum,
            other => return Err(format!("unknown reduction `{other}`")),
        })
    }
}

/// Per-rank partial result, combined in rank order.
#[derive(Debug, Clone)]
pub(crate) enum Partial {
    Sum(ExactSum),
    Extreme(Option<f64>),
}

impl ReduceOp {
    pub(crate) fn partial<'a>(self, values: impl Iterator<Item = &'a f64>) -> Partial {
        match self {
            ReduceOp::L1 => Partial::Sum(values.map(|v| v.abs()).collect()),
            ReduceOp::L2 => Partial::Sum(values.map(|v| v * v).collect()),
            ReduceOp::Sum => Partial::Sum(values.copied().collect()),
            ReduceOp::Linf => Partial::Extreme(values.map(|v| v.abs()).reduce(f64::max)),
            ReduceOp::Min => Partial::Extreme(values.copied().reduce(f64::min)),
            ReduceOp::Max => Partial::Extreme(values.copied().reduce(f64::max)),
        }
    }

    pub(crate) fn combine(self, partials: &[Partial], cell_volume: f64) -> f64 {
        match self {
            ReduceOp::L1 | ReduceOp::L2 | ReduceOp::Sum => {
                let mut total = ExactSum::new();
                for p in partials {
                    if let Partial::Sum(s) = p {
                        total.merge(s);
                    }
                }
                match self {
                    ReduceOp::L1 => total.value() * cell_volume,
                    ReduceOp::L2 => (total.value() * cell_volume).sqrt(),
                    _ => total.value(),
                }
            }
            _ => {
                let pick = |a: f64, b: f64| match self {
                    ReduceOp::Min => a.min(b),
                    _ => a.max(b),
                };
                partials
                    .iter()
                    .filter_map(|p| match p {
                        Partial::Extreme(v) => *v,
                        Partial::Sum(_) => None,
                    })
                    .reduce(pick)
                    .unwrap_or(f64::NAN)
            }
        }
    }
}
