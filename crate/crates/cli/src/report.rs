//! Text tables and CSV rows of cavity figures of merit.

use std::fmt::Write as _;

use woodpile_core::cqed::CavityMetrics;

/// One column of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableColumn {
    /// Defect or buffer preset name, e.g. `D1`.
    pub defect: String,
    /// Cuboid size, e.g. `0.50c x 0.50c x 0.25c`.
    pub size: String,
    pub n_def: f64,
    /// Source orientation, e.g. `Ex`.
    pub orientation: String,
    /// `None` when no resonance was resolved.
    pub metrics: Option<CavityMetrics>,
}

type Cell = fn(&CavityMetrics) -> String;

const ROWS: [(&str, Cell); 15] = [
    ("c/lambda0", |m| {
        m.c_over_lambda.map_or("n/a".into(), |v| format!("{v:.4}"))
    }),
    ("lambda0 (nm)", |m| format!("{:.2}", m.lambda_nm)),
    ("Q_uc", |m| format!("{:.2e}", m.q)),
    ("V_eff (um^3)", |m| format!("{:.2e}", m.v_eff_um3)),
    ("V_n", |m| format!("{:.3}", m.v_n)),
    ("F_p", |m| format!("{:.2e}", m.f_p)),
    ("kappa_uc/2pi (GHz)", |m| format!("{:.2}", m.kappa_ghz)),
    ("tau_uc (ns)", |m| format!("{:.2}", m.tau_uc_ns)),
    ("V'_eff (um^3)", |m| format!("{:.2e}", m.v_eff_os_um3)),
    ("kappa'_uc/2pi (GHz)", |m| format!("{:.2}", m.kappa_os_ghz)),
    ("tau'_uc (ns)", |m| format!("{:.2}", m.tau_os_ns)),
    ("E_sp (V/m)", |m| format!("{:.2e}", m.e_sp)),
    ("g_R/2pi (GHz)", |m| format!("{:.2}", m.g_ghz)),
    ("tau_R (ns)", |m| format!("{:.2}", m.tau_r_ns)),
    ("4g_R/(kappa'+gamma)", |m| format!("{:.2}", m.ratio)),
];

/// Row labels of [`emit_table`], after the four header rows.
pub fn row_labels() -> Vec<&'static str> {
    ROWS.iter().map(|r| r.0).collect()
}

/// Render columns side by side: header rows for the defect, its size, the
/// defect index and the source orientation, then one row per quantity.
/// Columns without metrics show `n/a`.
pub fn emit_table(columns: &[TableColumn]) -> String {
    let mut grid: Vec<Vec<String>> = Vec::new();
    grid.push(header("defect", columns, |c| c.defect.clone()));
    grid.push(header("size", columns, |c| c.size.clone()));
    grid.push(header("n_def", columns, |c| format!("{}", c.n_def)));
    grid.push(header("source", columns, |c| c.orientation.clone()));
    for (label, cell) in ROWS {
        let mut row = vec![label.to_string()];
        row.extend(
            columns
                .iter()
                .map(|c| c.metrics.as_ref().map_or("n/a".to_string(), cell)),
        );
        grid.push(row);
    }
    let widths: Vec<usize> = (0..=columns.len())
        .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in grid.iter().enumerate() {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (j, v) in row.iter().enumerate().skip(1) {
            let _ = write!(line, "  {:>w$}", v, w = widths[j]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if i == 3 {
            let total = widths.iter().sum::<usize>() + 2 * columns.len();
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

fn header(label: &str, columns: &[TableColumn], f: impl Fn(&TableColumn) -> String) -> Vec<String> {
    let mut row = vec![label.to_string()];
    row.extend(columns.iter().map(f));
    row
}

pub const CSV_HEADER: &str = "name,c_over_lambda,lambda_nm,q,v_eff_um3,v_n,f_p,kappa_ghz,tau_uc_ns,\
v_eff_os_um3,kappa_os_ghz,tau_os_ns,d_eg_cm,f_eg,e_sp_v_per_m,g_ghz,tau_r_ns,ratio,strong";

/// CSV with one line per named row; rows without metrics are written as `n/a`.
pub fn metrics_csv(rows: &[(String, Option<CavityMetrics>)]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for (name, m) in rows {
        match m {
            None => {
                s.push_str(name);
                s.push_str(&",n/a".repeat(18));
            }
            Some(m) => {
                let _ = write!(
                    s,
                    "{name},{},{:.6},{:.6e},{:.6e},{:.6},{:.6e},{:.6},{:.6},{:.6e},{:.6},{:.6},{:.6e},{:.6},{:.6e},{:.6},{:.6},{:.6},{}",
                    m.c_over_lambda.map_or("n/a".into(), |v| format!("{v:.6}")),
                    m.lambda_nm,
                    m.q,
                    m.v_eff_um3,
                    m.v_n,
                    m.f_p,
                    m.kappa_ghz,
                    m.tau_uc_ns,
                    m.v_eff_os_um3,
                    m.kappa_os_ghz,
                    m.tau_os_ns,
                    m.d_eg,
                    m.f_eg,
                    m.e_sp,
                    m.g_ghz,
                    m.tau_r_ns,
                    m.ratio,
                    m.strong
                );
            }
        }
        s.push('\n');
    }
    s
}

/// Columns of the bundled reference tables (`1` or `2`) built from their
/// printed inputs.
pub fn fixture_columns(table: u8) -> woodpile_core::Result<Vec<TableColumn>> {
    use woodpile_core::cqed::{metrics, tables, EmitterSpec};
    use woodpile_core::geometry::DefectPreset;
    let nv = EmitterSpec::nv_centre();
    tables::COLUMNS
        .iter()
        .filter(|c| c.table == table)
        .map(|c| {
            let size = match (c.defect.parse::<DefectPreset>(), c.defect) {
                (Ok(p), _) => {
                    let s = p.size_over_c();
                    format!("{:.2}c x {:.2}c x {:.2}c", s[0], s[1], s[2])
                }
                (Err(_), "A0") => "D1, b=a-w/2".to_string(),
                (Err(_), "A1") => "D1, b=a".to_string(),
                (Err(_), _) => "D1, b=a+w/2".to_string(),
            };
            let m = match c.cavity() {
                Some(cav) => Some(metrics(&cav, &nv, Some(tables::PERIOD))?),
                None => None,
            };
            Ok(TableColumn {
                defect: c.defect.to_string(),
                size,
                n_def: tables::N_DEF,
                orientation: format!("E{}", c.orientation),
                metrics: m,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_and_na() {
        let cols = fixture_columns(1).unwrap();
        let one = emit_table(&cols[3..4]);
        assert!(
            one.contains("D1") && one.contains("3.56e5") && one.contains("1.18e6"),
            "{one}"
        );
        let first = emit_table(&cols[0..1]);
        let na = first.lines().filter(|l| l.trim_end().ends_with("n/a")).count();
        assert_eq!(na, ROWS.len());
    }

    #[test]
    fn csv_row_count() {
        let cols = fixture_columns(2).unwrap();
        let rows: Vec<_> = cols
            .iter()
            .map(|c| (format!("{}/{}", c.defect, c.orientation), c.metrics.clone()))
            .collect();
        let csv = metrics_csv(&rows);
        assert_eq!(csv.lines().count(), 10);
        for line in csv.lines() {
            assert_eq!(line.split(',').count(), 19);
        }
    }
}
