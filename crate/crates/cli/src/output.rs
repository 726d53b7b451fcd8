//! CSV, gnuplot and summary writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use markovianity::criteria::DivisibilityReport;
use markovianity::dynamics::NodeValidity;
use markovianity::WitnessSeries;

use crate::scenario::CliError;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn witness_csv(s: &WitnessSeries) -> String {
    let mut out = String::from("t,value,flag\n");
    for ((t, v), f) in s.times().iter().zip(s.values()).zip(s.flags()) {
        let _ = writeln!(out, "{},{},{}", num(*t), num(*v), bit(*f));
    }
    out
}

pub fn boolean_csv(times: &[f64], values: &[bool]) -> String {
    let mut out = String::from("t,value,flag\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", num(*t), bit(*v), bit(!*v));
    }
    out
}

pub fn divisibility_csv(r: &DivisibilityReport) -> String {
    let mut out = String::from("t,min_choi_eigenvalue,cp,g,flag\n");
    let cp = r.cp();
    for i in 0..r.times.len() {
        let g_bad = r.g[i].is_some_and(|g| g > r.tol);
        let cp_bad = cp[i] == Some(false);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.times[i]),
            opt(r.min_choi[i]),
            cp[i].map(bit).unwrap_or(""),
            opt(r.g[i]),
            bit(g_bad || cp_bad)
        );
    }
    out
}

pub fn validity_csv(rows: &[NodeValidity], cp_tol: f64, tp_tol: f64) -> String {
    let mut out = String::from("t,min_choi_eigenvalue,cp,trace_defect,tp\n");
    for v in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(v.t),
            num(v.cp.min_choi_eigenvalue),
            bit(v.cp.min_choi_eigenvalue >= -cp_tol),
            num(v.trace_defect),
            bit(v.trace_defect <= tp_tol)
        );
    }
    out
}

/// A gnuplot script plotting `<name>.csv` and marking flagged nodes.
pub fn gnuplot_script(name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key top right\n\
         set xlabel 't'\n\
         set ylabel '{name}'\n\
         set terminal pngcairo size 900,600\n\
         set output '{name}.png'\n\
         plot '{name}.csv' using 1:2 every ::1 with lines title '{name}', \\\n\
         \x20    '' using 1:($3 > 0 ? $2 : 1/0) every ::1 with points pt 7 ps 0.4 title 'violation'\n"
    )
}
