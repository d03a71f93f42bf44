//! Dense tableau simplex for small problems of the form
//! `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The origin is always feasible for this form, so no phase one is needed.
//! Bland's rule is used for pivot selection, which guarantees termination.

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Unbounded,
}

pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    debug_assert!(b.iter().all(|&v| v >= 0.0));
    let width = n + m + 1;
    // Row layout: [ x (n) | slack (m) | rhs ]
    let mut tab = vec![vec![0.0; width]; m + 1];
    for (i, row) in a.iter().enumerate() {
        tab[i][..n].copy_from_slice(row);
        tab[i][n + i] = 1.0;
        tab[i][width - 1] = b[i];
    }
    // Objective row holds reduced costs of the minimisation of -c·x.
    for j in 0..n {
        tab[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let coef = tab[i][enter];
            if coef > EPS {
                let ratio = tab[i][width - 1] / coef;
                let better = ratio < best - EPS
                    || (ratio <= best + EPS && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return LpOutcome::Unbounded;
        };
        pivot(&mut tab, row, enter);
        basis[row] = enter;
    }

    let mut x = vec![0.0; n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = tab[i][width - 1];
        }
    }
    LpOutcome::Optimal { value: tab[m][width - 1], x }
}

fn pivot(tab: &mut [Vec<f64>], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col];
        if factor != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
        }
    }
}
