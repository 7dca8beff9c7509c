//! Dense phase-one simplex for `A x = b, x >= 0`.
//!
//! One artificial variable per row; the phase-one objective is their sum. At
//! optimum the simplex multipliers `y` satisfy `yᵀA <= 0` column-wise and
//! `yᵀb = z`, so a strictly positive optimum `z` makes `y` a Farkas
//! certificate of infeasibility.

const REDUCED_COST_EPS: f64 = 1e-11;
const PIVOT_EPS: f64 = 1e-9;
/// Consecutive non-improving pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone)]
pub(crate) enum PhaseOne {
    Feasible { x: Vec<f64> },
    Infeasible { dual: Vec<f64> },
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + 1)`, the last column is the right-hand side.
    data: Vec<f64>,
    /// Reduced costs, length `cols + 1`; the last entry is `-z`.
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let p = self.at(pr, pc);
        let row_start = pr * width;
        for c in 0..width {
            self.data[row_start + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[row_start..row_start + width].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * width + pc];
            if f != 0.0 {
                let row = &mut self.data[r * width..(r + 1) * width];
                for (x, pv) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pv;
                }
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for (x, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *x -= f * pv;
            }
        }
        self.basis[pr] = pc;
    }

    fn objective(&self) -> f64 {
        -self.cost[self.cols]
    }
}

/// Solves the phase-one problem. `a` is row-major with `b.len()` rows.
pub(crate) fn phase_one(a: &[Vec<f64>], b: &[f64], feasibility_tol: f64) -> PhaseOne {
    let m = b.len();
    let n = a.first().map_or(0, Vec::len);
    let cols = n + m;
    let width = cols + 1;
    let mut data = vec![0.0; m * width];
    let mut flipped = vec![false; m];
    for r in 0..m {
        let sign = if b[r] < 0.0 {
            flipped[r] = true;
            -1.0
        } else {
            1.0
        };
        for c in 0..n {
            data[r * width + c] = sign * a[r][c];
        }
        data[r * width + n + r] = 1.0;
        data[r * width + cols] = sign * b[r];
    }
    let mut cost = vec![0.0; width];
    for r in 0..m {
        for c in 0..n {
            cost[c] -= data[r * width + c];
        }
        cost[cols] -= data[r * width + cols];
    }
    cost[n..cols].fill(0.0);
    let mut t = Tableau {
        rows: m,
        cols,
        data,
        cost,
        basis: (n..cols).collect(),
    };

    let mut stall = 0;
    let mut last = t.objective();
    for _ in 0..MAX_PIVOTS {
        let bland = stall >= STALL_LIMIT;
        let entering = if bland {
            (0..cols).find(|&c| t.cost[c] < -REDUCED_COST_EPS)
        } else {
            (0..cols)
                .filter(|&c| t.cost[c] < -REDUCED_COST_EPS)
                .min_by(|&x, &y| t.cost[x].total_cmp(&t.cost[y]))
        };
        let Some(pc) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let e = t.at(r, pc);
            if e > PIVOT_EPS {
                let ratio = t.rhs(r) / e;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        if ratio < bv - 1e-12 || (ratio <= bv + 1e-12 && t.basis[r] < t.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
        }
        // phase one is bounded below by zero, so a column with no positive
        // entry cannot have negative reduced cost unless drift crept in
        let Some((pr, _)) = leave else { break };
        t.pivot(pr, pc);

        let z = t.objective();
        if z < last - 1e-14 {
            stall = 0;
            last = z;
        } else {
            stall += 1;
        }
    }

    let z = t.objective();
    if z > feasibility_tol {
        let dual = (0..m)
            .map(|r| {
                let y = 1.0 - t.cost[n + r];
                if flipped[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        PhaseOne::Infeasible { dual }
    } else {
        let mut x = vec![0.0; n];
        for (r, &var) in t.basis.iter().enumerate() {
            if var < n {
                x[var] = t.rhs(r).max(0.0);
            }
        }
        PhaseOne::Feasible { x }
    }
}
