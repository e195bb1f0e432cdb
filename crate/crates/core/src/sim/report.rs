use std::fmt::Write as _;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub const CSV_HEADER: [&str; 7] = ["model", "k", "trials", "successes", "rate", "ci_low", "ci_high"];

/// Wilson score interval at 95% confidence. Never collapses to a point at 0
/// or 1 for finite `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub k: Option<u32>,
    pub trials: u64,
    pub successes: u64,
}

impl SummaryRow {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        wilson_interval(self.successes, self.trials)
    }

    fn fields(&self) -> [String; 7] {
        let (lo, hi) = self.interval();
        [
            self.model.clone(),
            self.k.map(|k| k.to_string()).unwrap_or_default(),
            self.trials.to_string(),
            self.successes.to_string(),
            format!("{:.8}", self.rate()),
            format!("{lo:.8}"),
            format!("{hi:.8}"),
        ]
    }
}

pub fn to_csv(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for row in rows {
        w.write_record(row.fields()).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is UTF-8")
}

pub fn to_text(rows: &[SummaryRow]) -> String {
    let table: Vec<[String; 7]> = rows.iter().map(SummaryRow::fields).collect();
    let mut widths = CSV_HEADER.map(str::len);
    for r in &table {
        for (w, f) in widths.iter_mut().zip(r) {
            *w = (*w).max(f.len());
        }
    }
    let mut out = String::new();
    let header = CSV_HEADER.map(String::from);
    for r in std::iter::once(&header).chain(&table) {
        let line: Vec<String> = r.iter().zip(widths).map(|(f, w)| format!("{f:>w$}")).collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    out
}
