//! Static SVG charts and the markdown report, rendered only from numeric
//! files already in the run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;

use crate::output::PLOT_DIR;

const W: f64 = 900.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> anyhow::Result<Option<Self>> {
        if !path.is_file() {
            return Ok(None);
        }
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = rdr.headers()?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Some(Self { header, rows }))
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn numbers(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[j].parse().ok()).collect()
    }

    fn strings(&self, j: usize) -> Vec<String> {
        self.rows.iter().map(|r| r[j].clone()).collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg(title: &str, w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    )
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    Some(if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) })
}

fn line_chart(title: &str, x_labels: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let mut svg = open_svg(title, W, H);
    let n = x_labels.len();
    let Some((lo, hi)) = range(series.iter().flat_map(|(_, v)| v.iter().flatten().copied())) else {
        svg.push_str("</svg>\n");
        return svg;
    };
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n.max(2) - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let _ = writeln!(
        svg,
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/><line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>",
        b = H - PAD,
        r = W - PAD
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>", PAD - 4.0, y(v) + 4.0, v);
    }
    let step = (n / 6).max(1);
    for i in (0..n).step_by(step) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            x(i),
            H - PAD + 16.0,
            escape(&x_labels[i])
        );
    }
    for (k, (name, vals)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (i, v) in vals.iter().enumerate() {
            match v {
                Some(v) => {
                    let _ = write!(d, "{}{:.1},{:.1} ", if pen_up { "M" } else { "L" }, x(i), y(*v));
                    pen_up = false;
                }
                None => pen_up = true,
            }
        }
        let _ = writeln!(svg, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\"/>", d.trim_end());
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            W - PAD - 140.0,
            PAD + 14.0 * k as f64,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bar_chart(title: &str, labels: &[String], values: &[f64], notes: &[String]) -> String {
    let row_h = 18.0;
    let h = PAD + row_h * labels.len() as f64 + 20.0;
    let mut svg = open_svg(title, W, h);
    let max = values.iter().copied().fold(0.0, f64::max).max(1e-12);
    let left = 160.0;
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let top = PAD + row_h * i as f64;
        let len = (W - left - 160.0) * v / max;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text><rect x=\"{left}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{}\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            left - 6.0,
            top + 12.0,
            escape(l),
            top + 2.0,
            len,
            row_h - 4.0,
            PALETTE[0],
            left + len + 6.0,
            top + 12.0,
            escape(&notes[i])
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Diverging blue-white-red cell colour for a value scaled to `[-1, 1]`.
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 - (255.0 - c) * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 { (214.0, 39.0, 40.0) } else { (31.0, 119.0, 180.0) };
    format!("#{:02x}{:02x}{:02x}", fade(r), fade(g), fade(b))
}

fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<Option<f64>>]) -> String {
    let left = 150.0;
    let cell_h = 16.0;
    let h = PAD + cell_h * rows.len() as f64 + 40.0;
    let cell_w = (W - left - 20.0) / cols.len().max(1) as f64;
    let mut svg = open_svg(title, W, h);
    let scale = values
        .iter()
        .flatten()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    for (i, row) in rows.iter().enumerate() {
        let top = PAD + cell_h * i as f64;
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", left - 6.0, top + 12.0, escape(row));
        for (j, v) in values[i].iter().enumerate() {
            let fill = v.map_or_else(|| "#eeeeee".to_string(), |v| diverging(v / scale));
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{top:.1}\" width=\"{:.2}\" height=\"{}\" fill=\"{fill}\"/>",
                left + cell_w * j as f64,
                cell_w,
                cell_h - 1.0
            );
        }
    }
    let step = (cols.len() / 8).max(1);
    for j in (0..cols.len()).step_by(step) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            left + cell_w * j as f64,
            h - 20.0,
            escape(&cols[j])
        );
    }
    let _ = writeln!(svg, "<text x=\"{left}\" y=\"{:.1}\">scale ±{:.3}</text>", h - 6.0, scale);
    svg.push_str("</svg>\n");
    svg
}

/// Transposes a wide table (date column first) into variable rows.
fn wide_heatmap(title: &str, t: &Table, skip: &[&str]) -> String {
    let dates = t.strings(0);
    let vars: Vec<usize> = (1..t.header.len()).filter(|j| !skip.contains(&t.header[*j].as_str())).collect();
    let rows: Vec<String> = vars.iter().map(|j| t.header[*j].clone()).collect();
    let values: Vec<Vec<Option<f64>>> = vars.iter().map(|j| t.numbers(*j)).collect();
    heatmap(title, &rows, &dates, &values)
}

/// Renders every chart whose source file exists. Returns the files written.
pub fn render_all(dir: &Path) -> anyhow::Result<Vec<String>> {
    let plots = dir.join(PLOT_DIR);
    fs::create_dir_all(&plots)?;
    let mut charts: Vec<(&str, String)> = Vec::new();

    if let Some(t) = Table::read(&dir.join("swb_daily.csv"))? {
        let name = t.header[1].clone();
        charts.push(("swb_daily.svg", line_chart("Daily SWB index", &t.strings(0), &[(name, t.numbers(1))])));
    }
    for (file, out, title) in [
        ("sde_limit.csv", "sde_limit.svg", "Observed series and fitted mean-reversion path"),
        ("sde_simulated.csv", "sde_simulated.svg", "Simulated diffusion and its deterministic limit"),
    ] {
        if let Some(t) = Table::read(&dir.join(file))? {
            let series = (1..t.header.len()).map(|j| (t.header[j].clone(), t.numbers(j))).collect::<Vec<_>>();
            charts.push((out, line_chart(title, &t.strings(0), &series)));
        }
    }
    if let Some(t) = Table::read(&dir.join("dyn_forecasts.csv"))? {
        let series: Vec<(String, Vec<Option<f64>>)> = ["actual", "enet", "arima"]
            .iter()
            .filter_map(|c| t.col(c).map(|j| (c.to_string(), t.numbers(j))))
            .collect();
        let x = t.strings(t.col("forecast_date").unwrap_or(0));
        charts.push(("dyn_forecasts.svg", line_chart("One-step-ahead forecasts", &x, &series)));
    }
    if let Some(t) = Table::read(&dir.join("arima_forecasts.csv"))? {
        let series: Vec<(String, Vec<Option<f64>>)> = ["actual", "arima"]
            .iter()
            .filter_map(|c| t.col(c).map(|j| (c.to_string(), t.numbers(j))))
            .collect();
        charts.push(("arima_forecasts.svg", line_chart("Rolling ARMA(1,1) forecasts", &t.strings(1), &series)));
    }
    if let Some(t) = Table::read(&dir.join("dyn_summary.csv"))? {
        let counts: Vec<f64> = t.numbers(1).into_iter().map(|v| v.unwrap_or(0.0)).collect();
        let notes: Vec<String> = t
            .numbers(2)
            .into_iter()
            .zip(&counts)
            .map(|(r, c)| format!("{c} days, avg rank {:.2}", r.unwrap_or(0.0)))
            .collect();
        charts.push(("dyn_selection.svg", bar_chart("Days selected per variable", &t.strings(0), &counts, &notes)));
    }
    if let Some(t) = Table::read(&dir.join("dyn_coefficients.csv"))? {
        charts.push(("dyn_coefficients.svg", wide_heatmap("Standardized window coefficients", &t, &["lambda_t"])));
    }
    if let Some(t) = Table::read(&dir.join("dyn_ranks.csv"))? {
        charts.push(("dyn_ranks.svg", wide_heatmap("Relative importance rank", &t, &[])));
    }
    if let Some(t) = Table::read(&dir.join("correlations.csv"))? {
        let (pc, vc, sc) = (t.col("period").unwrap_or(0), t.col("variable").unwrap_or(1), t.col("shown").unwrap_or(5));
        let mut periods: Vec<String> = Vec::new();
        let mut vars: Vec<String> = Vec::new();
        for r in &t.rows {
            if !periods.contains(&r[pc]) {
                periods.push(r[pc].clone());
            }
            if !vars.contains(&r[vc]) {
                vars.push(r[vc].clone());
            }
        }
        let mut values = vec![vec![None; periods.len()]; vars.len()];
        for r in &t.rows {
            let i = vars.iter().position(|v| *v == r[vc]).expect("collected");
            let j = periods.iter().position(|p| *p == r[pc]).expect("collected");
            values[i][j] = r[sc].parse().ok();
        }
        charts.push(("correlations.svg", heatmap("Significant Spearman correlations", &vars, &periods, &values)));
    }

    let mut written = Vec::new();
    for (name, svg) in charts {
        fs::write(plots.join(name), svg)?;
        written.push(format!("{PLOT_DIR}/{name}"));
    }
    Ok(written)
}

fn markdown_table(t: &Table, cols: &[&str]) -> String {
    let idx: Vec<usize> = cols.iter().filter_map(|c| t.col(c)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", idx.iter().map(|&j| t.header[j].as_str()).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(idx.len()));
    for r in &t.rows {
        let cells: Vec<String> = idx
            .iter()
            .map(|&j| match r[j].parse::<f64>() {
                Ok(v) if r[j].contains('.') || r[j].contains('e') => format!("{v:.4}"),
                _ => r[j].clone(),
            })
            .collect();
        let _ = writeln!(s, "| {} |", cells.join(" | "));
    }
    s
}

/// Writes `report.md` summarizing whichever outputs exist.
pub fn write_report(dir: &Path) -> anyhow::Result<()> {
    let mut md = String::from("# Run report\n\n");
    if let Some(t) = Table::read(&dir.join("swb_yearly_means.csv"))? {
        md.push_str("## SWB yearly means\n\n");
        md.push_str(&markdown_table(&t, &["year", "mean"]));
        md.push('\n');
    }
    if let Some(t) = Table::read(&dir.join("sde_table.csv"))? {
        md.push_str("## Diffusion models\n\n");
        md.push_str(&markdown_table(
            &t,
            &["model", "alpha", "alpha_se", "beta", "beta_se", "sigma", "sigma_se", "gamma", "gamma_se", "aic", "selected"],
        ));
        md.push('\n');
    }
    let metrics = dir.join("dyn_metrics.json");
    if metrics.is_file() {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&metrics)?)?;
        let _ = writeln!(
            md,
            "## Dynamic elastic net\n\n{} windows ({} skipped); forecast MSE elastic net {} vs ARMA(1,1) {} over {} dates.\n",
            v["windows"], v["skipped"], v["enet_mse"], v["arima_mse"], v["n_compared"]
        );
    }
    if let Some(t) = Table::read(&dir.join("dyn_summary.csv"))? {
        md.push_str(&markdown_table(&t, &["variable", "selection_count", "avg_relative_rank"]));
        md.push('\n');
    }
    if let Some(t) = Table::read(&dir.join("dyn_alpha_sweep.csv"))? {
        md.push_str("### Mixing-weight sweep\n\n");
        md.push_str(&markdown_table(&t, &["mix_alpha", "windows", "enet_mse", "arima_mse"]));
        md.push('\n');
    }
    if let Some(t) = Table::read(&dir.join("sem_estimates.csv"))? {
        md.push_str("## Structural equation model\n\n| relationship | coefficient | std. err. | |\n|---|---|---|---|\n");
        for r in &t.rows {
            let v: f64 = r[3].parse().unwrap_or(f64::NAN);
            let se = r[4].parse::<f64>().map(|s| format!("{s:.3}")).unwrap_or_default();
            let _ = writeln!(md, "| {} {} {} | {v:.3} | {se} | {} |", r[0], r[1], r[2], r[7]);
        }
        md.push('\n');
    }
    fs::write(dir.join("report.md"), md)?;
    Ok(())
}
