use crate::discretization::{space_time_error_sq, SpaceTimeField, SpatialQuadrature};
use crate::error::{ensure, Result};

/// ‖field − exact‖ in L²(I; L²(Ω)) by Gauss quadrature per slab and element.
pub fn error_l2l2<F: Fn(f64, f64) -> f64 + Sync>(
    field: &SpaceTimeField,
    exact: &F,
    q_time: usize,
    q_space: usize,
) -> f64 {
    let quad = SpatialQuadrature::new(&field.mesh().space, q_space);
    space_time_error_sq(field, exact, &quad, q_time).sqrt()
}

/// rate_k = log(e_{k-1}/e_k) / log(p_{k-1}/p_k) for k >= 1.
pub fn eoc(errors: &[f64], params: &[f64]) -> Result<Vec<f64>> {
    ensure(errors.len() == params.len(), || "errors and parameters differ in length".into())?;
    ensure(errors.len() >= 2, || "need at least two levels".into())?;
    ensure(errors.iter().all(|&e| e > 0.0 && e.is_finite()), || {
        "errors must be positive and finite".into()
    })?;
    ensure(params.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), || {
        "refinement parameters must be positive and strictly decreasing".into()
    })?;
    Ok(errors
        .windows(2)
        .zip(params.windows(2))
        .map(|(e, p)| (e[0] / e[1]).ln() / (p[0] / p[1]).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Columns φ and d.
    State,
    /// Column l.
    Control,
}

impl TableKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            TableKind::State => &["phi", "d"],
            TableKind::Control => &["l"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub tau: f64,
    pub h: f64,
    /// One error per column; `None` when the solver did not converge.
    pub errors: Option<Vec<f64>>,
    /// Rate against the previous row, per column.
    pub eocs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub kind: TableKind,
    pub label: String,
    /// Whether the rows refine τ (true) or h (false).
    pub refine_time: bool,
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    /// Builds the table and fills in EOCs between consecutive converged rows.
    pub fn new(
        kind: TableKind,
        label: impl Into<String>,
        refine_time: bool,
        levels: Vec<(f64, f64, Option<Vec<f64>>)>,
    ) -> Self {
        let ncol = kind.columns().len();
        let mut rows: Vec<TableRow> = Vec::with_capacity(levels.len());
        for (tau, h, errors) in levels {
            let mut eocs = vec![None; ncol];
            if let (Some(prev), Some(cur)) = (rows.last(), errors.as_ref()) {
                if let Some(pe) = &prev.errors {
                    let (p0, p1) = if refine_time { (prev.tau, tau) } else { (prev.h, h) };
                    for c in 0..ncol {
                        eocs[c] = eoc(&[pe[c], cur[c]], &[p0, p1]).ok().map(|r| r[0]);
                    }
                }
            }
            rows.push(TableRow { tau, h, errors, eocs });
        }
        Self {
            kind,
            label: label.into(),
            refine_time,
            rows,
        }
    }

    /// Errors of column `col` (None for non-converged rows).
    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|r| r.errors.as_ref().map(|e| e[col]))
            .collect()
    }

    pub fn eoc_column(&self, col: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.eocs[col]).collect()
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("tau,h");
        for c in self.kind.columns() {
            h.push_str(&format!(",err_{c},eoc_{c}"));
        }
        h
    }

    /// CSV text: header plus one line per row, scientific notation with six
    /// digits after the point, blank EOC cells where undefined and `not_conv`
    /// for failed rows.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{}", sci(r.tau), sci(r.h)));
            for c in 0..self.kind.columns().len() {
                match &r.errors {
                    Some(e) => out.push_str(&format!(",{},", sci(e[c]))),
                    None => out.push_str(",not_conv,"),
                }
                if let Some(rate) = r.eocs[c] {
                    out.push_str(&sci(rate));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.label);
        out.push_str(&format!("{:>12} {:>12}", "tau", "h"));
        for c in self.kind.columns() {
            out.push_str(&format!(" {:>12} {:>6}", format!("err_{c}"), "eoc"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:>12.4e} {:>12.4e}", r.tau, r.h));
            for c in 0..self.kind.columns().len() {
                let e = r.errors.as_ref().map_or("not conv.".to_string(), |e| format!("{:.3e}", e[c]));
                let k = r.eocs[c].map_or("-".to_string(), |v| format!("{v:.2}"));
                out.push_str(&format!(" {e:>12} {k:>6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `7.610000e-4` style: six digits after the point, bare exponent.
fn sci(v: f64) -> String {
    format!("{v:.6e}")
}
