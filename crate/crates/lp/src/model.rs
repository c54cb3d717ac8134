//! Model containers: a minimisation LP in row/column form and its MIP extension.

use std::fmt;

use crate::LpError;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone)]
pub(crate) struct Column {
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c'x  s.t.  a_i x (<=|>=|=) b_i,  lower <= x <= upper`.
///
/// Rows and columns can be appended at any time; ids stay stable.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub(crate) cols: Vec<Column>,
    pub(crate) rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.cols.iter().map(|c| c.entries.len()).sum()
    }

    /// Appends a column. Entries referencing the same row are summed.
    pub fn add_column(
        &mut self,
        cost: f64,
        lower: f64,
        upper: f64,
        entries: &[(RowId, f64)],
    ) -> Result<ColId, LpError> {
        check_bounds(lower, upper)?;
        if !cost.is_finite() {
            return Err(LpError::NonFinite("column cost"));
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for &(row, coef) in entries {
            if row.0 >= self.rows.len() {
                return Err(LpError::UnknownRow(row.0));
            }
            if !coef.is_finite() {
                return Err(LpError::NonFinite("matrix coefficient"));
            }
            match merged.iter_mut().find(|(r, _)| *r == row.0) {
                Some(e) => e.1 += coef,
                None => merged.push((row.0, coef)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        merged.sort_by_key(|&(r, _)| r);
        self.cols.push(Column {
            cost,
            lower,
            upper,
            entries: merged,
        });
        Ok(ColId(self.cols.len() - 1))
    }

    /// Appends a row. Entries referencing the same column are summed.
    pub fn add_row(
        &mut self,
        sense: Sense,
        rhs: f64,
        entries: &[(ColId, f64)],
    ) -> Result<RowId, LpError> {
        if !rhs.is_finite() {
            return Err(LpError::NonFinite("row rhs"));
        }
        for &(col, coef) in entries {
            if col.0 >= self.cols.len() {
                return Err(LpError::UnknownColumn(col.0));
            }
            if !coef.is_finite() {
                return Err(LpError::NonFinite("matrix coefficient"));
            }
        }
        let row = self.rows.len();
        self.rows.push(Row { sense, rhs });
        for &(col, coef) in entries {
            let c = &mut self.cols[col.0];
            match c.entries.iter_mut().find(|(r, _)| *r == row) {
                Some(e) => e.1 += coef,
                None => c.entries.push((row, coef)),
            }
        }
        for &(col, _) in entries {
            self.cols[col.0].entries.retain(|&(_, v)| v != 0.0);
        }
        Ok(RowId(row))
    }

    /// Adds `coef` to the coefficient at (row, col).
    pub fn add_entry(&mut self, row: RowId, col: ColId, coef: f64) -> Result<(), LpError> {
        if row.0 >= self.rows.len() {
            return Err(LpError::UnknownRow(row.0));
        }
        let c = self
            .cols
            .get_mut(col.0)
            .ok_or(LpError::UnknownColumn(col.0))?;
        match c.entries.iter_mut().find(|(r, _)| *r == row.0) {
            Some(e) => e.1 += coef,
            None => {
                c.entries.push((row.0, coef));
                c.entries.sort_by_key(|&(r, _)| r);
            }
        }
        c.entries.retain(|&(_, v)| v != 0.0);
        Ok(())
    }

    pub fn set_cost(&mut self, col: ColId, cost: f64) -> Result<(), LpError> {
        if !cost.is_finite() {
            return Err(LpError::NonFinite("column cost"));
        }
        self.cols
            .get_mut(col.0)
            .ok_or(LpError::UnknownColumn(col.0))?
            .cost = cost;
        Ok(())
    }

    pub fn set_bounds(&mut self, col: ColId, lower: f64, upper: f64) -> Result<(), LpError> {
        check_bounds(lower, upper)?;
        let c = self
            .cols
            .get_mut(col.0)
            .ok_or(LpError::UnknownColumn(col.0))?;
        c.lower = lower;
        c.upper = upper;
        Ok(())
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) -> Result<(), LpError> {
        if !rhs.is_finite() {
            return Err(LpError::NonFinite("row rhs"));
        }
        self.rows
            .get_mut(row.0)
            .ok_or(LpError::UnknownRow(row.0))?
            .rhs = rhs;
        Ok(())
    }

    pub fn cost(&self, col: ColId) -> f64 {
        self.cols[col.0].cost
    }

    pub fn bounds(&self, col: ColId) -> (f64, f64) {
        let c = &self.cols[col.0];
        (c.lower, c.upper)
    }

    pub fn row_sense(&self, row: RowId) -> Sense {
        self.rows[row.0].sense
    }

    pub fn rhs(&self, row: RowId) -> f64 {
        self.rows[row.0].rhs
    }

    /// Sparse column entries as `(row, coefficient)`.
    pub fn column_entries(&self, col: ColId) -> impl Iterator<Item = (RowId, f64)> + '_ {
        self.cols[col.0].entries.iter().map(|&(r, v)| (RowId(r), v))
    }

    pub fn coefficient(&self, row: RowId, col: ColId) -> f64 {
        self.cols[col.0]
            .entries
            .iter()
            .find(|(r, _)| *r == row.0)
            .map_or(0.0, |&(_, v)| v)
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows.len()];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in &col.entries {
                act[i] += v * x[j];
            }
        }
        act
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cols.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.cols.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
        }
        for (row, act) in self.rows.iter().zip(self.activities(x)) {
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

fn check_bounds(lower: f64, upper: f64) -> Result<(), LpError> {
    if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
        return Err(LpError::NonFinite("column bound"));
    }
    if lower > upper {
        return Err(LpError::InvalidBounds { lower, upper });
    }
    Ok(())
}

/// A linear program whose columns may carry integrality requirements.
#[derive(Debug, Clone, Default)]
pub struct MipModel {
    pub lp: LinearProgram,
    integer: Vec<bool>,
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_lp(lp: LinearProgram) -> Self {
        let integer = vec![false; lp.num_cols()];
        Self { lp, integer }
    }

    pub fn add_column(
        &mut self,
        cost: f64,
        lower: f64,
        upper: f64,
        integer: bool,
        entries: &[(RowId, f64)],
    ) -> Result<ColId, LpError> {
        let id = self.lp.add_column(cost, lower, upper, entries)?;
        self.integer.push(integer);
        Ok(id)
    }

    pub fn add_binary(&mut self, cost: f64, entries: &[(RowId, f64)]) -> Result<ColId, LpError> {
        self.add_column(cost, 0.0, 1.0, true, entries)
    }

    pub fn add_row(
        &mut self,
        sense: Sense,
        rhs: f64,
        entries: &[(ColId, f64)],
    ) -> Result<RowId, LpError> {
        self.lp.add_row(sense, rhs, entries)
    }

    pub fn is_integer(&self, col: ColId) -> bool {
        self.integer[col.0]
    }

    pub fn set_integer(&mut self, col: ColId, integer: bool) {
        self.integer[col.0] = integer;
    }

    pub(crate) fn integer_flags(&self) -> &[bool] {
        &self.integer
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }
}
