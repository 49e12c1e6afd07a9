//! Basis factorization: singleton peeling around a dense LU of the bump,
//! followed by a product-form eta file for basis updates.

/// Basis columns whose pivots were too small, paired with rows nobody covers.
#[derive(Debug)]
pub(super) struct Singular {
    pub slots: Vec<usize>,
    pub rows: Vec<usize>,
}

const PEEL_TOL: f64 = 1e-7;
const LU_TOL: f64 = 1e-10;

#[derive(Debug)]
struct DenseLu {
    s: usize,
    /// Row-major; unit lower factor below the diagonal, upper on and above.
    lu: Vec<f64>,
    /// `perm[i]` is the original bump row placed at LU row `i`.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors in place; returns the LU columns without an acceptable pivot
    /// and the bump rows left unpivoted.
    fn factor(s: usize, mut a: Vec<f64>) -> (Self, Vec<usize>, Vec<usize>) {
        let mut perm: Vec<usize> = (0..s).collect();
        let mut dependent = Vec::new();
        let mut next = 0usize;
        for col in 0..s {
            let mut best = next;
            let mut best_abs = 0.0;
            for i in next..s {
                let v = a[i * s + col].abs();
                if v > best_abs {
                    best_abs = v;
                    best = i;
                }
            }
            if next >= s || best_abs < LU_TOL {
                dependent.push(col);
                continue;
            }
            if best != next {
                for c in 0..s {
                    a.swap(best * s + c, next * s + c);
                }
                perm.swap(best, next);
            }
            let piv = a[next * s + col];
            for i in next + 1..s {
                let f = a[i * s + col] / piv;
                if f != 0.0 {
                    a[i * s + col] = f;
                    for c in col + 1..s {
                        a[i * s + c] -= f * a[next * s + c];
                    }
                } else {
                    a[i * s + col] = 0.0;
                }
            }
            next += 1;
        }
        let unpivoted = perm[next..].to_vec();
        (Self { s, lu: a, perm }, dependent, unpivoted)
    }

    fn solve(&self, b: &mut [f64]) {
        let s = self.s;
        let mut z: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..s {
            let mut acc = z[i];
            for k in 0..i {
                acc -= self.lu[i * s + k] * z[k];
            }
            z[i] = acc;
        }
        for i in (0..s).rev() {
            let mut acc = z[i];
            for k in i + 1..s {
                acc -= self.lu[i * s + k] * z[k];
            }
            z[i] = acc / self.lu[i * s + i];
        }
        b.copy_from_slice(&z);
    }

    fn solve_transpose(&self, b: &mut [f64]) {
        let s = self.s;
        let mut z = b.to_vec();
        for i in 0..s {
            let mut acc = z[i];
            for k in 0..i {
                acc -= self.lu[k * s + i] * z[k];
            }
            z[i] = acc / self.lu[i * s + i];
        }
        for i in (0..s).rev() {
            let mut acc = z[i];
            for k in i + 1..s {
                acc -= self.lu[k * s + i] * z[k];
            }
            z[i] = acc;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = z[i];
        }
    }
}

/// Factorization of the basis matrix, with columns indexed by basis slot.
#[derive(Debug)]
pub(super) struct Factor {
    m: usize,
    row_at: Vec<usize>,
    row_pos: Vec<usize>,
    slot_at: Vec<usize>,
    diag: Vec<f64>,
    /// Off-diagonal entries of each position's column at earlier positions,
    /// excluding the dense bump block; `above_start` delimits positions.
    above_start: Vec<usize>,
    above: Vec<(usize, f64)>,
    b0: usize,
    b1: usize,
    bump: DenseLu,
    eta_slot: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_entries: Vec<(usize, f64)>,
    /// Each eta column laid out densely (pivot entry zeroed).
    eta_dense: Vec<f64>,
}

/// Basis columns in compressed form: column `k` is
/// `entries[start[k]..start[k + 1]]`.
pub(super) struct Columns<'a> {
    pub start: &'a [usize],
    pub entries: &'a [(usize, f64)],
}

impl Columns<'_> {
    fn col(&self, k: usize) -> &[(usize, f64)] {
        &self.entries[self.start[k]..self.start[k + 1]]
    }
}

impl Factor {
    /// `columns[k]` lists `(row, value)` of the basic column in slot `k`.
    #[cfg(test)]
    pub fn build(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        let mut start = vec![0];
        let mut entries = Vec::new();
        for c in columns {
            entries.extend_from_slice(c);
            start.push(entries.len());
        }
        Self::build_from(m, &Columns { start: &start, entries: &entries })
    }

    pub fn build_from(m: usize, columns: &Columns<'_>) -> Result<Self, Singular> {
        debug_assert_eq!(columns.start.len(), m + 1);
        // row-wise pattern in compressed form
        let mut row_start = vec![0usize; m + 1];
        for &(r, _) in columns.entries {
            row_start[r + 1] += 1;
        }
        for r in 0..m {
            row_start[r + 1] += row_start[r];
        }
        let mut fill = row_start.clone();
        let mut row_cols = vec![0usize; columns.entries.len()];
        for k in 0..m {
            for &(r, _) in columns.col(k) {
                row_cols[fill[r]] = k;
                fill[r] += 1;
            }
        }
        let row_list = |r: usize| &row_cols[row_start[r]..row_start[r + 1]];

        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_count: Vec<usize> = (0..m).map(|k| columns.start[k + 1] - columns.start[k]).collect();
        let mut row_count: Vec<usize> = (0..m).map(|r| row_start[r + 1] - row_start[r]).collect();

        let mut front: Vec<(usize, usize)> = Vec::new();
        let mut stack: Vec<usize> = (0..m).filter(|&k| col_count[k] == 1).collect();
        while let Some(k) = stack.pop() {
            if !col_active[k] || col_count[k] != 1 {
                continue;
            }
            let col = columns.col(k);
            let Some(&(r, v)) = col.iter().find(|&&(r, _)| row_active[r]) else {
                continue;
            };
            let col_max = col.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            if v.abs() < PEEL_TOL * col_max.max(1.0) {
                continue;
            }
            col_active[k] = false;
            row_active[r] = false;
            front.push((r, k));
            for &k2 in row_list(r) {
                if col_active[k2] {
                    col_count[k2] -= 1;
                    if col_count[k2] == 1 {
                        stack.push(k2);
                    }
                }
            }
        }

        // row counts over the columns still active
        for r in 0..m {
            if row_active[r] {
                row_count[r] = row_list(r).iter().filter(|&&k| col_active[k]).count();
            }
        }
        let mut back: Vec<(usize, usize)> = Vec::new();
        let mut stack: Vec<usize> = (0..m).filter(|&r| row_active[r] && row_count[r] == 1).collect();
        while let Some(r) = stack.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            let Some(&k) = row_list(r).iter().find(|&&k| col_active[k]) else {
                continue;
            };
            let col = columns.col(k);
            let v = col.iter().filter(|&&(rr, _)| rr == r).map(|&(_, v)| v).sum::<f64>();
            let col_max = col.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            if v.abs() < PEEL_TOL * col_max.max(1.0) {
                continue;
            }
            col_active[k] = false;
            row_active[r] = false;
            back.push((r, k));
            for &(r2, _) in col {
                if row_active[r2] {
                    row_count[r2] -= 1;
                    if row_count[r2] == 1 {
                        stack.push(r2);
                    }
                }
            }
        }

        let bump_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let bump_cols: Vec<usize> = (0..m).filter(|&k| col_active[k]).collect();
        debug_assert_eq!(bump_rows.len(), bump_cols.len());
        let b0 = front.len();
        let s = bump_rows.len();
        let b1 = b0 + s;

        let mut row_at = Vec::with_capacity(m);
        let mut slot_at = Vec::with_capacity(m);
        for &(r, k) in &front {
            row_at.push(r);
            slot_at.push(k);
        }
        row_at.extend(&bump_rows);
        slot_at.extend(&bump_cols);
        for &(r, k) in back.iter().rev() {
            row_at.push(r);
            slot_at.push(k);
        }
        let mut row_pos = vec![0usize; m];
        for (p, &r) in row_at.iter().enumerate() {
            row_pos[r] = p;
        }

        let mut diag = vec![0.0; m];
        let mut above_start = Vec::with_capacity(m + 1);
        let mut above = Vec::with_capacity(columns.entries.len());
        let mut dense = vec![0.0; s * s];
        above_start.push(0);
        for p in 0..m {
            for &(r, v) in columns.col(slot_at[p]) {
                let q = row_pos[r];
                if (b0..b1).contains(&p) && (b0..b1).contains(&q) {
                    dense[(q - b0) * s + (p - b0)] += v;
                } else if q == p {
                    diag[p] += v;
                } else {
                    debug_assert!(q < p, "factor structure violated");
                    above.push((q, v));
                }
            }
            above_start.push(above.len());
        }
        let (bump, dependent, unpivoted) = DenseLu::factor(s, dense);
        if !dependent.is_empty() {
            return Err(Singular {
                slots: dependent.iter().map(|&c| bump_cols[c]).collect(),
                rows: unpivoted.iter().map(|&i| bump_rows[i]).collect(),
            });
        }
        Ok(Self {
            m,
            row_at,
            row_pos,
            slot_at,
            diag,
            above_start,
            above,
            b0,
            b1,
            bump,
            eta_slot: Vec::new(),
            eta_pivot: Vec::new(),
            eta_start: vec![0],
            eta_entries: Vec::new(),
            eta_dense: Vec::new(),
        })
    }

    pub fn n_updates(&self) -> usize {
        self.eta_slot.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_entries.len() + self.eta_slot.len()
    }

    /// Records that slot `slot` now holds a column whose FTRAN image is `alpha`.
    pub fn update(&mut self, slot: usize, alpha: &[f64]) {
        if self.eta_dense.capacity() == 0 {
            self.eta_dense.reserve(16 * self.m);
        }
        self.eta_slot.push(slot);
        self.eta_pivot.push(alpha[slot]);
        let base = self.eta_dense.len();
        self.eta_dense.extend_from_slice(alpha);
        self.eta_dense[base + slot] = 0.0;
        for (i, &a) in alpha.iter().enumerate() {
            if i != slot && a != 0.0 {
                self.eta_entries.push((i, a));
            }
        }
        self.eta_start.push(self.eta_entries.len());
    }

    fn eta(&self, k: usize) -> &[(usize, f64)] {
        &self.eta_entries[self.eta_start[k]..self.eta_start[k + 1]]
    }

    fn above(&self, p: usize) -> &[(usize, f64)] {
        &self.above[self.above_start[p]..self.above_start[p + 1]]
    }

    /// Solves `B z = a`; input indexed by row, output by slot.
    pub fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self.row_at.iter().map(|&r| a[r]).collect();
        self.ftran_positions(w)
    }

    /// As [`Factor::ftran`] for a sparse right-hand side.
    pub fn ftran_sparse(&self, a: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for (r, v) in a {
            w[self.row_pos[r]] += v;
        }
        self.ftran_positions(w)
    }

    fn ftran_positions(&self, mut w: Vec<f64>) -> Vec<f64> {
        let m = self.m;
        for p in (self.b1..m).rev() {
            self.back_step(p, &mut w);
        }
        if self.b1 > self.b0 {
            self.bump.solve(&mut w[self.b0..self.b1]);
            for p in self.b0..self.b1 {
                let z = w[p];
                if z != 0.0 {
                    for &(q, v) in self.above(p) {
                        w[q] -= v * z;
                    }
                }
            }
        }
        for p in (0..self.b0).rev() {
            self.back_step(p, &mut w);
        }
        let mut out = vec![0.0; m];
        for (p, &k) in self.slot_at.iter().enumerate() {
            out[k] = w[p];
        }
        for k in 0..self.eta_slot.len() {
            let slot = self.eta_slot[k];
            let xk = out[slot] / self.eta_pivot[k];
            out[slot] = xk;
            if xk != 0.0 {
                for &(i, a) in self.eta(k) {
                    out[i] -= a * xk;
                }
            }
        }
        out
    }

    #[inline]
    fn back_step(&self, p: usize, w: &mut [f64]) {
        let z = w[p] / self.diag[p];
        w[p] = z;
        if z != 0.0 {
            for &(q, v) in self.above(p) {
                w[q] -= v * z;
            }
        }
    }

    /// Solves `Bᵀ y = c`; input indexed by slot, output by row.
    pub fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for k in (0..self.eta_slot.len()).rev() {
            let slot = self.eta_slot[k];
            let mut acc = c[slot];
            for &(i, a) in self.eta(k) {
                acc -= a * c[i];
            }
            c[slot] = acc / self.eta_pivot[k];
        }
        self.btran_positions(c)
    }

    /// `Bᵀ y = e_slot`, tracking the few nonzeros through the eta file.
    pub fn btran_unit(&self, slot: usize) -> Vec<f64> {
        let m = self.m;
        let mut c = vec![0.0; m];
        c[slot] = 1.0;
        let mut nz = vec![slot];
        for k in (0..self.eta_slot.len()).rev() {
            let s = self.eta_slot[k];
            let col = &self.eta_dense[k * m..(k + 1) * m];
            let mut acc = c[s];
            for &i in &nz {
                acc -= col[i] * c[i];
            }
            let v = acc / self.eta_pivot[k];
            if c[s] == 0.0 && v != 0.0 {
                nz.push(s);
            }
            c[s] = v;
        }
        self.btran_positions(c)
    }

    fn btran_positions(&self, c: Vec<f64>) -> Vec<f64> {
        let m = self.m;
        let mut z: Vec<f64> = self.slot_at.iter().map(|&k| c[k]).collect();
        for p in 0..self.b0 {
            self.forward_step(p, &mut z);
        }
        if self.b1 > self.b0 {
            for p in self.b0..self.b1 {
                let mut acc = z[p];
                for &(q, v) in self.above(p) {
                    acc -= v * z[q];
                }
                z[p] = acc;
            }
            self.bump.solve_transpose(&mut z[self.b0..self.b1]);
        }
        for p in self.b1..m {
            self.forward_step(p, &mut z);
        }
        let mut y = vec![0.0; m];
        for (p, &r) in self.row_at.iter().enumerate() {
            y[r] = z[p];
        }
        y
    }

    #[inline]
    fn forward_step(&self, p: usize, z: &mut [f64]) {
        let mut acc = z[p];
        for &(q, v) in self.above(p) {
            acc -= v * z[q];
        }
        z[p] = acc / self.diag[p];
    }
}
