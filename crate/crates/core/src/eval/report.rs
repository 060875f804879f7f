use serde::Serialize;

/// One scored (repetition, fold, variable) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub repetition: usize,
    pub fold: usize,
    pub variable: usize,
    pub r: f64,
    pub degenerate: bool,
}

/// Correlations of one model over a set of evaluation cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub variables: Vec<String>,
    /// Sorted by (repetition, fold, variable), whatever order they were
    /// produced in.
    cells: Vec<Cell>,
}

impl EvalReport {
    pub fn new(model: impl Into<String>, variables: Vec<String>, mut cells: Vec<Cell>) -> Self {
        cells.sort_by_key(|c| (c.repetition, c.fold, c.variable));
        Self {
            model: model.into(),
            variables,
            cells,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Mean r of each variable over all its cells.
    pub fn per_variable_means(&self) -> Vec<f64> {
        let k = self.variables.len();
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for c in &self.cells {
            sum[c.variable] += c.r;
            count[c.variable] += 1;
        }
        sum.iter()
            .zip(&count)
            .map(|(s, &n)| if n == 0 { f64::NAN } else { s / n as f64 })
            .collect()
    }

    /// Mean over variables of the per-variable means.
    pub fn grand_mean(&self) -> f64 {
        let m = self.per_variable_means();
        m.iter().sum::<f64>() / m.len() as f64
    }

    pub fn degenerate_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.variables.len()];
        for c in self.cells.iter().filter(|c| c.degenerate) {
            out[c.variable] += 1;
        }
        out
    }

    pub fn repetitions(&self) -> Vec<usize> {
        let mut reps: Vec<usize> = self.cells.iter().map(|c| c.repetition).collect();
        reps.dedup();
        reps
    }

    /// Grand mean of each repetition taken alone: folds averaged per
    /// variable, then variables averaged.
    pub fn repetition_means(&self) -> Vec<(usize, f64)> {
        self.repetitions()
            .into_iter()
            .map(|rep| {
                let sub = EvalReport {
                    model: String::new(),
                    variables: self.variables.clone(),
                    cells: self.cells.iter().filter(|c| c.repetition == rep).cloned().collect(),
                };
                (rep, sub.grand_mean())
            })
            .collect()
    }

    /// `model,repetition,fold,variable,r,degenerate_flag` rows.
    pub fn cells_csv_rows(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.model,
                c.repetition,
                c.fold,
                self.variables[c.variable],
                fmt_sig(c.r),
                u8::from(c.degenerate)
            ));
        }
        out
    }
}

pub const CELLS_HEADER: &str = "model,repetition,fold,variable,r,degenerate_flag";

/// Six significant digits, `%g` style: plain notation for exponents in
/// `-4..6`, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
