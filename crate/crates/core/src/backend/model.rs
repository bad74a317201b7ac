use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Column handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Col(pub usize);

/// Row handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub coeffs: Vec<(Col, f64)>,
}

/// A minimisation problem `min c'x + 0.5 sum_j q_j x_j^2 + offset` over
/// bounded columns and ranged rows. The quadratic part is diagonal and only
/// used for the small convex masters of the dual solvers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    pub cols: Vec<Column>,
    pub rows: Vec<Row>,
    pub offset: f64,
    pub diag_quadratic: Vec<(Col, f64)>,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_col(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Col {
        self.cols.push(Column { name: name.into(), lower, upper, cost, integer: false });
        Col(self.cols.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> Col {
        self.cols.push(Column { name: name.into(), lower: 0.0, upper: 1.0, cost, integer: true });
        Col(self.cols.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        mut coeffs: Vec<(Col, f64)>,
    ) -> RowId {
        coeffs.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row { name: name.into(), lower, upper, coeffs });
        RowId(self.rows.len() - 1)
    }

    pub fn add_le(&mut self, name: impl Into<String>, coeffs: Vec<(Col, f64)>, rhs: f64) -> RowId {
        self.add_row(name, f64::NEG_INFINITY, rhs, coeffs)
    }

    pub fn add_ge(&mut self, name: impl Into<String>, coeffs: Vec<(Col, f64)>, rhs: f64) -> RowId {
        self.add_row(name, rhs, f64::INFINITY, coeffs)
    }

    pub fn add_eq(&mut self, name: impl Into<String>, coeffs: Vec<(Col, f64)>, rhs: f64) -> RowId {
        self.add_row(name, rhs, rhs, coeffs)
    }

    pub fn col(&self, c: Col) -> &Column {
        &self.cols[c.0]
    }

    pub fn col_mut(&mut self, c: Col) -> &mut Column {
        &mut self.cols[c.0]
    }

    pub fn row(&self, r: RowId) -> &Row {
        &self.rows[r.0]
    }

    pub fn row_mut(&mut self, r: RowId) -> &mut Row {
        &mut self.rows[r.0]
    }

    pub fn set_row_bounds(&mut self, r: RowId, lower: f64, upper: f64) {
        let row = &mut self.rows[r.0];
        row.lower = lower;
        row.upper = upper;
    }

    pub fn is_mip(&self) -> bool {
        self.cols.iter().any(|c| c.integer)
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Drops every integrality restriction.
    pub fn relax_integrality(&mut self) {
        for c in &mut self.cols {
            c.integer = false;
        }
    }

    /// Objective value of a point, offset included.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.cols.iter().zip(x).map(|(c, v)| c.cost * v).sum();
        let quad: f64 = self.diag_quadratic.iter().map(|(c, q)| 0.5 * q * x[c.0] * x[c.0]).sum();
        lin + quad + self.offset
    }

    pub fn row_activity(&self, r: RowId, x: &[f64]) -> f64 {
        self.rows[r.0].coeffs.iter().map(|(c, a)| a * x[c.0]).sum()
    }

    /// Largest bound or row violation of a point (integrality ignored).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, v) in self.cols.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
        }
        for (k, row) in self.rows.iter().enumerate() {
            let a = self.row_activity(RowId(k), x);
            worst = worst.max(row.lower - a).max(a - row.upper);
        }
        worst
    }

    /// CPLEX LP-format text of the model, for debugging dumps.
    pub fn to_lp_string(&self) -> String {
        let name = |c: Col| sanitize(&self.cols[c.0].name, c.0);
        let mut out = String::from("\\ generated by psps-core\nMinimize\n obj:");
        let mut any = false;
        for (k, col) in self.cols.iter().enumerate() {
            if col.cost != 0.0 {
                let _ = write!(out, " {:+} {}", col.cost, name(Col(k)));
                any = true;
            }
        }
        if !self.diag_quadratic.is_empty() {
            out.push_str(" + [");
            for (c, q) in &self.diag_quadratic {
                let _ = write!(out, " {:+} {} ^ 2", q, name(*c));
            }
            out.push_str(" ] / 2");
            any = true;
        }
        if !any {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (k, row) in self.rows.iter().enumerate() {
            let mut lhs = String::new();
            for (c, a) in &row.coeffs {
                let _ = write!(lhs, " {:+} {}", a, name(*c));
            }
            if lhs.is_empty() {
                lhs.push_str(" 0");
            }
            let rname = sanitize(&row.name, k);
            if row.lower == row.upper {
                let _ = writeln!(out, " r{k}_{rname}:{lhs} = {}", row.lower);
            } else {
                if row.lower.is_finite() {
                    let _ = writeln!(out, " r{k}_{rname}_lo:{lhs} >= {}", row.lower);
                }
                if row.upper.is_finite() {
                    let _ = writeln!(out, " r{k}_{rname}_up:{lhs} <= {}", row.upper);
                }
            }
        }
        out.push_str("Bounds\n");
        for (k, col) in self.cols.iter().enumerate() {
            let lo = if col.lower.is_finite() { col.lower.to_string() } else { "-inf".into() };
            let hi = if col.upper.is_finite() { col.upper.to_string() } else { "+inf".into() };
            let _ = writeln!(out, " {lo} <= {} <= {hi}", name(Col(k)));
        }
        let ints: Vec<String> = self
            .cols
            .iter()
            .enumerate()
            .filter(|(_, c)| c.integer)
            .map(|(k, _)| name(Col(k)))
            .collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for n in ints {
                let _ = writeln!(out, " {n}");
            }
        }
        out.push_str("End\n");
        out
    }
}

fn sanitize(name: &str, k: usize) -> String {
    let clean: String = name
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || ch == '_' { ch } else { '_' })
        .collect();
    format!("x{k}_{clean}")
}
