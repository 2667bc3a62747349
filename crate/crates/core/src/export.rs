//! Plain-text tables: CSV (comma, no quoting, LF) and gnuplot data files.

use std::io::{self, Write};

use num_complex::Complex;

use crate::kernel::KernelOperator;
use crate::scalar::Real;
use crate::semigroup::TraceAsymptoticsRow;
use crate::trace::TraceReport;

/// Decimal scientific notation with 17 significant digits.
pub fn format_number<T: Real>(x: T) -> String {
    format!("{x:.16e}")
}

/// A rectangular table of preformatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Column descriptions written as comments in gnuplot files.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            ..Table::default()
        }
    }

    pub fn with_notes<S: Into<String>>(mut self, notes: impl IntoIterator<Item = S>) -> Self {
        self.notes = notes.into_iter().map(Into::into).collect();
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Never)
            .terminator(csv::Terminator::Any(b'\n'))
            .flexible(true)
            .from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()
    }

    pub fn write_gnuplot<W: Write>(&self, mut w: W) -> io::Result<()> {
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        writeln!(w, "# {}", self.header.join(" "))?;
        for r in &self.rows {
            writeln!(w, "{}", r.join(" "))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("cells are UTF-8")
    }
}

fn nums<T: Real>(xs: impl IntoIterator<Item = T>) -> Vec<String> {
    xs.into_iter().map(format_number).collect()
}

/// First line: the node abscissae; line `i + 1`: `K(y_i, y_j)` for all `j`.
pub fn kernel_table<T: Real>(op: &KernelOperator<T>) -> Table {
    let n = op.len();
    let mut t = Table::new(nums(op.grid.nodes.iter().copied())).with_notes([
        "first row: quadrature nodes y_j".to_string(),
        "row i + 1: kernel values K(y_i, y_j) on the node grid".to_string(),
    ]);
    for i in 0..n {
        t.push(nums(op.kernel_matrix.row(i).iter().copied()));
    }
    t
}

pub fn trace_asymptotics_table<T: Real>(rows: &[TraceAsymptoticsRow<T>]) -> Table {
    let mut t = Table::new(["t", "lhs", "first_order", "remainder", "bound_scale"]).with_notes([
        "t: time",
        "lhs: ||exp(-tH) - exp(-t l'' G)||_1",
        "first_order: t ||exp(-t l'' G) (H - l'' G)||_1",
        "remainder: lhs - first_order",
        "bound_scale: t^2 sum_n (l'' lambda_n)^delta exp(-t l'' lambda_n / 3)",
    ]);
    for r in rows {
        t.push(nums([r.t, r.lhs, r.first_order, r.remainder, r.bound_scale]));
    }
    t
}

pub fn trace_report_table<T: Real>(report: &TraceReport<T>) -> Table {
    let mut header = vec!["m".to_string(), "radius".into(), "raw_sum".into()];
    for k in 1..=4 {
        header.push(format!("correction{k}_re"));
        header.push(format!("correction{k}_im"));
    }
    header.push("regularized_re".into());
    header.push("regularized_im".into());
    let mut t = Table::new(header).with_notes([
        "raw_sum: sum_{n<=m} (sigma_n - l'' lambda_n)",
        "correction k: (1/2 pi i) contour integral of (-1)^{k-1}/k Tr[(H1 (l'' G - s)^{-1})^k] ds",
        "regularized: raw_sum + sum of the four corrections",
    ]);
    for r in &report.rows {
        let mut row = vec![r.m.to_string(), format_number(r.radius), format_number(r.raw_sum)];
        for c in &r.corrections {
            row.extend(nums(c.iter().copied()));
        }
        row.extend(nums([r.regularized_re, r.regularized_im]));
        t.push(row);
    }
    t
}

/// `index, re, im` per value.
pub fn complex_table<T: Real>(values: &[Complex<T>]) -> Table {
    let mut t = Table::new(["index", "re", "im"]).with_notes(["eigenvalues of the truncated operator, sorted by real part"]);
    for (i, z) in values.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(nums([z.re, z.im]));
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{discretize, GridSpec, KernelKind};
    use crate::operator::OperatorParams;

    #[test]
    fn numbers_round_trip_with_17_digits() {
        for x in [0.1f64, 1.0 / 3.0, -2.4324895093e-7, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
    }

    #[test]
    fn csv_dialect() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_csv_string(), "a,b\n1,2\n");
        let mut g = Vec::new();
        t.with_notes(["x"]).write_gnuplot(&mut g).unwrap();
        assert_eq!(String::from_utf8(g).unwrap(), "# x\n# a b\n1 2\n");
    }

    #[test]
    fn kernel_table_shape() {
        let p = OperatorParams::mu_lambda(1.0, 1.0).unwrap();
        let op = discretize(KernelKind::MuLambda, &p, &GridSpec::new(32)).unwrap();
        let t = kernel_table(&op);
        assert_eq!(t.header.len(), op.len());
        assert_eq!(t.rows.len(), op.len());
        assert_eq!(t.header[3].parse::<f64>().unwrap(), op.grid.nodes[3]);
        assert_eq!(t.rows[2][5].parse::<f64>().unwrap(), op.kernel_matrix.get(2, 5));
    }
}
