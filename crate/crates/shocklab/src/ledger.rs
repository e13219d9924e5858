//! Audit ledgers: named inequality checks with measured values and margins.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::grid::{node_derivative_strided, stencil_fits, CsvSeries, Grid};

/// Outcome of one audited inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Pass,
    Fail,
    /// Not audited because the data are too coarse for the derivative order.
    ResolutionLimited,
    /// Not applicable to the current state (for example inactive axes).
    Skipped,
}

impl RowStatus {
    /// Lower-case label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            RowStatus::Pass => "pass",
            RowStatus::Fail => "fail",
            RowStatus::ResolutionLimited => "resolution-limited",
            RowStatus::Skipped => "skipped",
        }
    }
}

/// One inequality `measured ≤ constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub id: String,
    /// Family the bound belongs to.
    pub anchor: String,
    pub constant: f64,
    pub measured: f64,
    /// `constant - measured`.
    pub margin: f64,
    pub status: RowStatus,
    /// When the constant is `coef · M^power` with `power > 0`, the smallest
    /// `M` making this row pass is `(measured / coef)^(1/power)`.
    pub m_coef: f64,
    pub m_power: f64,
}

impl LedgerRow {
    /// `measured / constant` (0 when both vanish).
    pub fn ratio(&self) -> f64 {
        if self.measured == 0.0 {
            0.0
        } else {
            self.measured / self.constant
        }
    }

    /// Smallest `M` for which this row passes (`None` if independent of `M`).
    pub fn required_m(&self) -> Option<f64> {
        (self.m_power > 0.0 && self.m_coef > 0.0)
            .then(|| (self.measured / self.m_coef).powf(1.0 / self.m_power))
    }
}

/// Ordered collection of audited rows with run metadata.
#[derive(Clone, Debug, Default)]
pub struct LedgerReport {
    pub rows: Vec<LedgerRow>,
    pub meta: Vec<(String, String)>,
}

impl LedgerReport {
    /// Empty report.
    pub fn new() -> LedgerReport {
        LedgerReport::default()
    }

    /// Record a metadata entry.
    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    /// Record `measured ≤ constant` with a constant independent of `M`.
    pub fn check(&mut self, id: &str, anchor: &str, constant: f64, measured: f64) {
        self.check_m(id, anchor, constant, measured, 0.0, 0.0);
    }

    /// Record `measured ≤ constant` where `constant = coef · M^power`.
    pub fn check_m(
        &mut self,
        id: &str,
        anchor: &str,
        constant: f64,
        measured: f64,
        coef: f64,
        power: f64,
    ) {
        let status = if measured.is_finite() && measured <= constant {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        };
        self.rows.push(LedgerRow {
            id: id.to_string(),
            anchor: anchor.to_string(),
            constant,
            measured,
            margin: constant - measured,
            status,
            m_coef: coef,
            m_power: power,
        });
    }

    /// Record a row with an explicit status (resolution-limited or skipped).
    pub fn mark(&mut self, id: &str, anchor: &str, constant: f64, measured: f64, status: RowStatus) {
        self.rows.push(LedgerRow {
            id: id.to_string(),
            anchor: anchor.to_string(),
            constant,
            measured,
            margin: constant - measured,
            status,
            m_coef: 0.0,
            m_power: 0.0,
        });
    }

    /// Append all rows of another report.
    pub fn extend(&mut self, other: LedgerReport) {
        self.rows.extend(other.rows);
    }

    /// Rows that failed.
    pub fn failures(&self) -> Vec<&LedgerRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Fail).collect()
    }

    /// True when no row failed.
    pub fn all_pass(&self) -> bool {
        self.failures().is_empty()
    }

    /// Row by id.
    pub fn row(&self, id: &str) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    /// Smallest `M` making every `M`-dependent row pass; `None` if no row depends on `M`.
    pub fn smallest_passing_m(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.status != RowStatus::ResolutionLimited && r.status != RowStatus::Skipped)
            .filter_map(|r| r.required_m())
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
    }

    /// CSV view (one row per bound).
    pub fn to_csv(&self, prefix: &[(&str, String)]) -> CsvSeries {
        let mut header: Vec<&str> = prefix.iter().map(|p| p.0).collect();
        header.extend(["id", "family", "constant", "measured", "margin", "ratio", "status"]);
        let mut csv = CsvSeries::new(&header);
        for r in &self.rows {
            let mut cells: Vec<String> = prefix.iter().map(|p| p.1.clone()).collect();
            cells.extend([
                r.id.clone(),
                r.anchor.clone(),
                format!("{:e}", r.constant),
                format!("{:e}", r.measured),
                format!("{:e}", r.margin),
                format!("{:e}", r.ratio()),
                r.status.label().to_string(),
            ]);
            csv.push_cells(cells);
        }
        csv
    }

    /// Write as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv(&[]).write(path)
    }

    /// Human-readable fixed-width table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(
            s,
            "{:<28} {:<22} {:>13} {:>13} {:>13} {}",
            "id", "family", "constant", "measured", "margin", "status"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<28} {:<22} {:>13.5e} {:>13.5e} {:>13.5e} {}",
                r.id,
                r.anchor,
                r.constant,
                r.measured,
                r.margin,
                r.status.label()
            );
        }
        if let Some(m) = self.smallest_passing_m() {
            let _ = writeln!(s, "# smallest passing M: {m:.6e}");
        }
        s
    }
}

/// How the derivatives of one row are combined at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    /// Largest single derivative (per-multi-index bounds).
    Max,
    /// Euclidean norm of the listed derivatives with the given multiplicities
    /// (vector and symmetric-matrix norms).
    Euclid,
}

/// A weighted sup-norm bound on derivatives of a sampled field.
pub struct DerivativeRow<'a> {
    pub id: &'a str,
    pub family: &'a str,
    pub constant: f64,
    /// Multi-indices and their multiplicities in the combined norm.
    pub gammas: Vec<([usize; 3], f64)>,
    pub combine: Combine,
    /// Factor converting grid derivatives into the audited variables:
    /// `∂^γ_audited = value_scale · Π_a axis_scale[a]^{γ_a} · ∂^γ_grid`.
    pub value_scale: f64,
    pub axis_scale: [f64; 3],
    /// Weight at a node, `None` outside the audited region.
    pub region: &'a dyn Fn([f64; 3]) -> Option<f64>,
    /// Audit only if the h versus 2h comparison shows the derivative resolved.
    pub resolution_test: bool,
    /// When positive, the constant is `m_coef · M^m_power`.
    pub m_coef: f64,
    pub m_power: f64,
}

impl DerivativeRow<'_> {
    fn factor(&self, gamma: [usize; 3]) -> f64 {
        let mut f = self.value_scale;
        for a in 0..3 {
            f *= self.axis_scale[a].powi(gamma[a] as i32);
        }
        f
    }
}

/// Weighted sup of a row over the nodes where every stencil (at spacing
/// `2h` as well, so both estimates use the same nodes) fits, and its argmax.
pub fn row_sup(g: &Grid, values: &[f64], row: &DerivativeRow, stride: usize) -> Result<(f64, [f64; 3])> {
    let mut best = 0.0f64;
    let mut at = [0.0; 3];
    for idx in 0..g.len() {
        let p = g.point(idx);
        let Some(weight) = (row.region)(p) else {
            continue;
        };
        let m = g.unravel(idx);
        if !row.gammas.iter().all(|(gm, _)| stencil_fits(g, m, *gm, 2)) {
            continue;
        }
        let mut acc = 0.0f64;
        for (gm, mult) in &row.gammas {
            let d = row.factor(*gm) * node_derivative_strided(g, values, m, *gm, stride)?;
            match row.combine {
                Combine::Max => acc = acc.max(d.abs()),
                Combine::Euclid => acc += mult * d * d,
            }
        }
        if row.combine == Combine::Euclid {
            acc = acc.sqrt();
        }
        let v = weight * acc;
        if !v.is_finite() {
            return Ok((f64::NAN, p));
        }
        if v > best {
            best = v;
            at = p;
        }
    }
    Ok((best, at))
}

/// Whether a row involves only active axes of `g`.
pub fn row_applies(g: &Grid, row: &DerivativeRow) -> bool {
    row.gammas.iter().all(|(gm, _)| (0..3).all(|a| gm[a] == 0 || g.active(a)))
}

impl LedgerReport {
    /// Audit a derivative row on sampled data.  Rows of derivatives along
    /// inactive axes are recorded as skipped; rows with a resolution test
    /// whose `h` and `2h` estimates differ by more than 5% of the measured
    /// value (after the 4th-order Richardson factor 15) are recorded as
    /// resolution-limited.
    pub fn audit(&mut self, g: &Grid, values: &[f64], row: &DerivativeRow) -> Result<()> {
        if !row_applies(g, row) {
            self.mark(row.id, row.family, row.constant, 0.0, RowStatus::Skipped);
            return Ok(());
        }
        let (m, _) = row_sup(g, values, row, 1)?;
        if row.resolution_test {
            let (m2, _) = row_sup(g, values, row, 2)?;
            let err = (m2 - m).abs() / 15.0;
            let scale = m.max(1e-2 * row.constant);
            if !(err <= 0.05 * scale) {
                self.mark(row.id, row.family, row.constant, m, RowStatus::ResolutionLimited);
                return Ok(());
            }
        }
        self.check_m(row.id, row.family, row.constant, m, row.m_coef, row.m_power);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_matches_inequality() {
        let mut r = LedgerReport::new();
        r.check("a", "x", 1.0, 0.5);
        r.check("b", "x", 1.0, 1.5);
        r.check("c", "x", 1.0, f64::NAN);
        assert_eq!(r.rows[0].status, RowStatus::Pass);
        assert_eq!(r.rows[1].status, RowStatus::Fail);
        assert_eq!(r.rows[2].status, RowStatus::Fail);
        assert_eq!(r.failures().len(), 2);
        assert!((r.rows[0].ratio() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn required_m() {
        let mut r = LedgerReport::new();
        r.check_m("a", "x", 2.0 * 20.0, 10.0, 2.0, 1.0);
        r.check_m("b", "x", 20f64.sqrt(), 3.0, 1.0, 0.5);
        assert!((r.smallest_passing_m().unwrap() - 9.0).abs() < 1e-12);
    }
}
