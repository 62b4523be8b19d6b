//! SVG rendering of aggregate curves: one file per function, one series per
//! strategy, with standard-error bands. Output is deterministic.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub strategy: String,
    pub function: String,
    pub trial: usize,
    pub mean_best: f64,
    pub stderr_best: f64,
    pub mean_regret: f64,
    pub stderr_regret: f64,
}

pub const AGGREGATE_HEADER: &str =
    "strategy,function,trial,mean_best,stderr_best,mean_regret,stderr_regret";

/// Parse an aggregate CSV, reporting the 1-based line number on any
/// malformed row.
pub fn parse_aggregate(text: &str) -> Result<Vec<AggRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == AGGREGATE_HEADER => {}
        Some((_, header)) => {
            return Err(format!(
                "line 1: expected header `{AGGREGATE_HEADER}`, got `{header}`"
            ))
        }
        None => return Err("line 1: empty file".into()),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(format!("line {lineno}: expected 7 fields, got {}", parts.len()));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .map_err(|_| format!("line {lineno}: bad {what} `{s}`"))
        };
        rows.push(AggRow {
            strategy: parts[0].to_string(),
            function: parts[1].to_string(),
            trial: parts[2]
                .parse::<usize>()
                .map_err(|_| format!("line {lineno}: bad trial `{}`", parts[2]))?,
            mean_best: parse_f(parts[3], "mean_best")?,
            stderr_best: parse_f(parts[4], "stderr_best")?,
            mean_regret: parse_f(parts[5], "mean_regret")?,
            stderr_regret: parse_f(parts[6], "stderr_regret")?,
        });
    }
    if rows.is_empty() {
        return Err("line 1: no data rows".into());
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Best,
    Regret,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Metric, String> {
        match s {
            "best" => Ok(Metric::Best),
            "regret" => Ok(Metric::Regret),
            other => Err(format!("unknown metric `{other}` (use best|regret)")),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Metric::Best => "mean best-so-far",
            Metric::Regret => "mean normalized regret",
        }
    }

    fn of(&self, row: &AggRow) -> (f64, f64) {
        match self {
            Metric::Best => (row.mean_best, row.stderr_best),
            Metric::Regret => (row.mean_regret, row.stderr_regret),
        }
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 230.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Render one function's curves. Series are ordered by first appearance in
/// the rows, which follows the strategy order of the aggregate CSV.
pub fn render_function(function: &str, rows: &[AggRow], metric: Metric) -> String {
    let mut strategies: Vec<&str> = Vec::new();
    for r in rows {
        if !strategies.contains(&r.strategy.as_str()) {
            strategies.push(&r.strategy);
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut t_max = 1usize;
    for r in rows {
        let (m, se) = metric.of(r);
        lo = lo.min(m - se);
        hi = hi.max(m + se);
        t_max = t_max.max(r.trial);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_of = |trial: usize| -> f64 {
        if t_max <= 1 {
            MARGIN_L + plot_w / 2.0
        } else {
            MARGIN_L + (trial as f64 - 1.0) / (t_max as f64 - 1.0) * plot_w
        }
    };
    let y_of = |v: f64| -> f64 { MARGIN_T + (hi - v) / (hi - lo) * plot_h };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">{} - {}</text>",
        MARGIN_L + plot_w / 2.0,
        function,
        metric.label()
    );

    // Axes and ticks.
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_B
    );
    let n_ticks = 5usize;
    for i in 0..=n_ticks {
        let frac = i as f64 / n_ticks as f64;
        let trial = 1.0 + frac * (t_max as f64 - 1.0);
        let x = MARGIN_L + frac * plot_w;
        let _ = writeln!(
            svg,
            "  <line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            HEIGHT - MARGIN_B + 20.0,
            trial.round() as usize
        );
        let v = lo + frac * (hi - lo);
        let y = y_of(v);
        let _ = writeln!(
            svg,
            "  <line x1=\"{}\" y1=\"{y}\" x2=\"{MARGIN_L}\" y2=\"{y}\" stroke=\"black\"/>",
            MARGIN_L - 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 8.0,
            y + 4.0,
            fmt(v)
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">trial</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 15.0
    );

    for (si, strategy) in strategies.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut series: Vec<&AggRow> = rows
            .iter()
            .filter(|r| r.strategy.as_str() == *strategy)
            .collect();
        series.sort_by_key(|r| r.trial);

        // Standard-error band: upper path forward, lower path reversed.
        let mut band = String::new();
        for r in &series {
            let (m, se) = metric.of(r);
            let _ = write!(band, "{},{} ", fmt(x_of(r.trial)), fmt(y_of(m + se)));
        }
        for r in series.iter().rev() {
            let (m, se) = metric.of(r);
            let _ = write!(band, "{},{} ", fmt(x_of(r.trial)), fmt(y_of(m - se)));
        }
        let _ = writeln!(
            svg,
            "  <polygon class=\"band\" points=\"{}\" fill=\"{color}\" opacity=\"0.15\"/>",
            band.trim_end()
        );

        let mut line = String::new();
        for r in &series {
            let (m, _) = metric.of(r);
            let _ = write!(line, "{},{} ", fmt(x_of(r.trial)), fmt(y_of(m)));
        }
        let _ = writeln!(
            svg,
            "  <polyline class=\"series\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            line.trim_end()
        );

        // Legend entry.
        let ly = MARGIN_T + 20.0 * si as f64;
        let lx = WIDTH - MARGIN_R + 15.0;
        let _ = writeln!(
            svg,
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            lx + 28.0,
            ly + 4.0,
            strategy
        );
    }

    svg.push_str("</svg>\n");
    svg
}
