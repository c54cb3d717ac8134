//! Independent oracles for the solver tests.

use railcg_lp::{ColId, LinearProgram, MipModel, RowId, Sense};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random LP that is feasible by construction around a hidden point.
pub fn random_lp(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut point = Vec::new();
    for _ in 0..cols {
        let lo = -(rng.random_range(0..5) as f64);
        let cost = rng.random_range(-10..=10) as f64;
        let hi = if cost >= 0.0 && rng.random_bool(0.2) {
            f64::INFINITY
        } else {
            lo + rng.random_range(1..10) as f64
        };
        let top = if hi.is_finite() { hi } else { lo + 10.0 };
        point.push(rng.random_range(lo..=top));
        lp.add_column(cost, lo, hi, &[]).unwrap();
    }
    for _ in 0..rows {
        let mut entries = Vec::new();
        let mut act = 0.0;
        for (j, &p) in point.iter().enumerate() {
            if rng.random_bool(0.5) {
                let a = rng.random_range(-5..=5) as f64;
                act += a * p;
                entries.push((ColId(j), a));
            }
        }
        let (sense, rhs) = match rng.random_range(0..5) {
            0 => (Sense::Eq, act),
            1 | 2 => (Sense::Le, (act + rng.random_range(0.0..3.0)).ceil()),
            _ => (Sense::Ge, (act - rng.random_range(0.0..3.0)).floor()),
        };
        lp.add_row(sense, rhs, &entries).unwrap();
    }
    lp
}

/// Residuals recomputed from the raw model: primal feasibility, stationarity
/// with complementary slackness, dual signs and the duality gap.
pub struct Kkt {
    pub primal: f64,
    pub complementarity: f64,
    pub dual_sign: f64,
    pub gap: f64,
}

pub fn kkt(lp: &LinearProgram, x: &[f64], y: &[f64]) -> Kkt {
    let m = lp.num_rows();
    let n = lp.num_cols();
    let primal = lp.max_violation(x);
    let act = lp.activities(x);
    let mut dual_sign: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut dual_obj = 0.0;
    for i in 0..m {
        let r = RowId(i);
        let yi = y[i];
        match lp.row_sense(r) {
            Sense::Le => dual_sign = dual_sign.max(yi),
            Sense::Ge => dual_sign = dual_sign.max(-yi),
            Sense::Eq => {}
        }
        complementarity = complementarity.max((yi * (lp.rhs(r) - act[i])).abs());
        dual_obj += yi * lp.rhs(r);
    }
    for j in 0..n {
        let c = ColId(j);
        let d = lp.cost(c) - lp.column_entries(c).map(|(r, a)| a * y[r.0]).sum::<f64>();
        let (lo, hi) = lp.bounds(c);
        let at_lo = lo.is_finite() && (x[j] - lo).abs() <= 1e-7;
        let at_hi = hi.is_finite() && (x[j] - hi).abs() <= 1e-7;
        let viol = if at_lo && at_hi {
            0.0
        } else if at_lo {
            (-d).max(0.0)
        } else if at_hi {
            d.max(0.0)
        } else {
            d.abs()
        };
        complementarity = complementarity.max(viol);
        if d > 0.0 {
            dual_obj += d * if lo.is_finite() { lo } else { x[j] };
        } else {
            dual_obj += d * if hi.is_finite() { hi } else { x[j] };
        }
    }
    let obj = lp.objective_value(x);
    Kkt {
        primal,
        complementarity,
        dual_sign,
        gap: (obj - dual_obj).abs() / (1.0 + obj.abs()),
    }
}

/// Small binary program with a handful of inequality rows.
pub struct BinaryProgram {
    pub costs: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

impl BinaryProgram {
    pub fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let costs = (0..n).map(|_| rng.random_range(-10..=10) as f64).collect();
        let rows = (0..rng.random_range(1..=6))
            .map(|_| {
                let coefs: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=6) as f64).collect();
                let rhs = rng.random_range(0..=8) as f64;
                if rng.random_bool(0.8) {
                    (coefs, Sense::Le, rhs)
                } else {
                    (coefs, Sense::Ge, -rhs / 2.0)
                }
            })
            .collect();
        BinaryProgram { costs, rows }
    }

    pub fn model(&self) -> MipModel {
        let mut mip = MipModel::new();
        let cols: Vec<ColId> = self
            .costs
            .iter()
            .map(|&c| mip.add_binary(c, &[]).unwrap())
            .collect();
        for (coefs, sense, rhs) in &self.rows {
            let entries: Vec<(ColId, f64)> =
                cols.iter().zip(coefs).map(|(&c, &a)| (c, a)).collect();
            mip.add_row(*sense, *rhs, &entries).unwrap();
        }
        mip
    }

    /// Optimum over all 0/1 vectors, `None` when none is feasible.
    pub fn enumerate(&self) -> Option<f64> {
        let n = self.costs.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
            let ok = self.rows.iter().all(|(a, s, b)| {
                let act: f64 = a.iter().zip(&x).map(|(a, x)| a * x).sum();
                match s {
                    Sense::Le => act <= b + 1e-9,
                    Sense::Ge => act >= b - 1e-9,
                    Sense::Eq => (act - b).abs() <= 1e-9,
                }
            });
            if ok {
                best = best.min(self.costs.iter().zip(&x).map(|(c, x)| c * x).sum());
            }
        }
        best.is_finite().then_some(best)
    }
}
