//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0` for the small instances produced by
//! the cone test. Dual multipliers are read off the reduced costs of the
//! artificial columns, which stay in the tableau for that purpose but never
//! re-enter the basis in phase two.

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        /// Dual solution: `yᵀA ≤ c` componentwise and `yᵀb = value`.
        y: Vec<f64>,
        value: f64,
    },
    /// `yᵀA ≤ 0` and `yᵀb = infeasibility > 0`.
    Infeasible { farkas: Vec<f64>, infeasibility: f64 },
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows, each `cols + 1` wide (last entry is the rhs).
    t: Vec<Vec<f64>>,
    /// Reduced costs, `cols` wide, plus the objective value in the last slot.
    z: Vec<f64>,
    basis: Vec<usize>,
    eps: f64,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.t[r][c];
        for j in 0..width {
            self.t[r][j] /= p;
        }
        self.t[r][c] = 1.0;
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..width {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.z[c];
        if f != 0.0 {
            for j in 0..width {
                self.z[j] -= f * pivot_row[j];
            }
            self.z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland iterations over columns `< allowed`. Returns false if unbounded.
    fn run(&mut self, allowed: usize) -> bool {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.z[j] < -self.eps) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[i][enter];
                if a > self.eps {
                    let ratio = self.t[i][self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - self.eps
                                || (ratio <= best + self.eps && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return false,
            }
        }
    }
}

/// Minimizes `cᵀx` over `{x ≥ 0 : Ax = b}`; `a` is row-major `b.len() × c.len()`.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let m = b.len();
    let k = c.len();
    assert_eq!(a.len(), m);
    assert!(a.iter().all(|row| row.len() == k));

    let scale = a
        .iter()
        .flatten()
        .chain(b)
        .chain(c)
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let eps = 1e-11 * scale;

    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let cols = k + m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    for i in 0..m {
        for j in 0..k {
            t[i][j] = sign[i] * a[i][j];
        }
        t[i][k + i] = 1.0;
        t[i][cols] = sign[i] * b[i];
    }

    // Phase one: minimize the sum of artificials.
    let mut z = vec![0.0; cols + 1];
    for row in &t {
        for j in 0..k {
            z[j] -= row[j];
        }
        z[cols] -= row[cols];
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        z,
        basis: (k..k + m).collect(),
        eps,
    };
    tab.run(k);

    let infeasibility = -tab.z[cols];
    if infeasibility > 1e-9 * scale {
        let farkas = (0..m).map(|i| sign[i] * (1.0 - tab.z[k + i])).collect();
        return LpOutcome::Infeasible {
            farkas,
            infeasibility,
        };
    }

    // Drive zero-level artificials out of the basis; rows where that is
    // impossible are redundant and keep their artificial forever.
    for r in 0..m {
        if tab.basis[r] >= k {
            if let Some(j) = (0..k).find(|&j| tab.t[r][j].abs() > eps) {
                tab.pivot(r, j);
            }
        }
    }

    // Phase two reduced costs.
    let mut z = vec![0.0; cols + 1];
    z[..k].copy_from_slice(c);
    for r in 0..m {
        let cb = if tab.basis[r] < k { c[tab.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=cols {
                z[j] -= cb * tab.t[r][j];
            }
        }
    }
    tab.z = z;
    if !tab.run(k) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; k];
    for r in 0..m {
        if tab.basis[r] < k {
            x[tab.basis[r]] = tab.t[r][cols];
        }
    }
    let y = (0..m).map(|i| -sign[i] * tab.z[k + i]).collect();
    LpOutcome::Optimal {
        x,
        y,
        value: -tab.z[cols],
    }
}
