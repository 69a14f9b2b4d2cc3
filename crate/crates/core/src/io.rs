//! Run configuration, result tables, CSV emission and static SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{SolverOptions, CERTIFY_REL_TOL};
use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::oracle::AgreementCase;
use crate::robust::WassersteinOrder;
use crate::scenarios::{
    build_ev_charging, build_poa_game, EquilibriumRun, EvChargingConfig, PerturbationConfig, PerturbationStudy,
    PoaConfig, PoaPoint, ValleyFilling,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    EvCharging,
    Poa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessConfig {
    pub epsilons: Vec<f64>,
    pub order: WassersteinOrder,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.0, 2.0, 4.0],
            order: WassersteinOrder::Two,
        }
    }
}

/// Everything one CLI invocation needs. Only `scenario` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub ev: EvChargingConfig,
    #[serde(default)]
    pub poa: PoaConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            ev: EvChargingConfig::default(),
            poa: PoaConfig::default(),
            perturbation: PerturbationConfig::default(),
            robustness: RobustnessConfig::default(),
            solver: SolverOptions::default(),
            output_dir: default_output_dir(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ev.validate()?;
        self.poa.validate()?;
        self.perturbation.validate()?;
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.robustness.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Config(
                "robustness.epsilons must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// The game named by `scenario`.
    pub fn game(&self) -> Result<GameInstance> {
        match self.scenario {
            Scenario::EvCharging => build_ev_charging(&self.ev),
            Scenario::Poa => build_poa_game(&self.poa),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

const REQUIRED_KEYS: &[&str] = &["scenario"];

/// Strict parse: unknown keys are rejected, missing optional blocks take
/// their defaults.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    if text.trim().is_empty() {
        return Err(Error::Config(format!(
            "empty configuration; required keys: {}",
            REQUIRED_KEYS.join(", ")
        )));
    }
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Formats a number with 12 significant digits, trailing zeros removed.
/// Independent of locale; exponent notation outside `[1e-5, 1e15)`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Column layouts of the emitted files.
#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    /// `hour,<eps...>,non_pev`: total demand per radius plus base demand.
    Valley(Vec<f64>),
    /// `hour,<eps...>`: EV aggregate per radius.
    Aggregates(Vec<f64>),
    /// `epsilon` then worst, average and min cost for each bump size.
    Robustness(Vec<f64>),
    /// `bin_center,count_<eps...>`.
    Histogram(Vec<f64>),
    Poa,
    Profile,
    Report,
    OracleCheck,
}

impl Schema {
    pub fn header(&self) -> Vec<String> {
        let eps_cols = |eps: &[f64]| eps.iter().map(|e| format_number(*e)).collect::<Vec<_>>();
        let fixed = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();
        match self {
            Schema::Valley(eps) => {
                let mut h = vec!["hour".to_string()];
                h.extend(eps_cols(eps));
                h.push("non_pev".into());
                h
            }
            Schema::Aggregates(eps) => {
                let mut h = vec!["hour".to_string()];
                h.extend(eps_cols(eps));
                h
            }
            Schema::Robustness(mags) => {
                let mut h = vec!["epsilon".to_string()];
                for m in mags {
                    let m = format_number(*m);
                    h.push(format!("worst_individual_cost_{m}kW"));
                    h.push(format!("average_individual_cost_{m}kW"));
                    h.push(format!("min_individual_cost_{m}kW"));
                }
                h
            }
            Schema::Histogram(eps) => {
                let mut h = vec!["bin_center".to_string()];
                h.extend(eps.iter().map(|e| format!("count_{}", format_number(*e))));
                h
            }
            Schema::Poa => fixed(&["epsilon", "price_of_anarchy"]),
            Schema::Profile => fixed(&["epsilon", "class", "hour", "action_kw"]),
            Schema::Report => fixed(&[
                "epsilon",
                "class",
                "count",
                "lambda",
                "robust_cost",
                "gap",
                "certified",
                "iterations",
                "residual",
                "converged",
            ]),
            Schema::OracleCheck => fixed(&["instance", "dim", "epsilon", "dual", "grid", "bound", "passed"]),
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            Schema::Valley(_) => "valley_filling.csv",
            Schema::Aggregates(_) => "aggregates.csv",
            Schema::Robustness(_) => "robustness.csv",
            Schema::Histogram(_) => "histogram.csv",
            Schema::Poa => "poa.csv",
            Schema::Profile => "profile.csv",
            Schema::Report => "report.csv",
            Schema::OracleCheck => "oracle_check.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let header = self.schema.header();
        let mut out = header.join(",");
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(Error::Schema(format!(
                    "row {i} of {} has {} cells, header has {}",
                    self.schema.file_name(),
                    row.len(),
                    header.len()
                )));
            }
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Writes `table` to `path` after checking it against `schema`.
pub fn emit_csv(table: &Table, schema: &Schema, path: &Path) -> Result<()> {
    if &table.schema != schema {
        return Err(Error::Schema(format!(
            "table has columns [{}], expected [{}]",
            table.schema.header().join(","),
            schema.header().join(",")
        )));
    }
    let text = table.to_csv_string()?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn valley_table(v: &ValleyFilling) -> Table {
    let eps: Vec<f64> = v.runs.iter().map(|r| r.epsilon).collect();
    let totals: Vec<Vec<f64>> = v.runs.iter().map(|r| v.total_demand(r)).collect();
    let mut t = Table::new(Schema::Valley(eps));
    for (h, d) in v.base_demand.iter().enumerate() {
        let mut row = vec![Cell::from(h)];
        row.extend(totals.iter().map(|tot| Cell::Num(tot[h])));
        row.push(Cell::Num(*d));
        t.push(row);
    }
    t
}

pub fn aggregates_table(runs: &[EquilibriumRun]) -> Table {
    let mut t = Table::new(Schema::Aggregates(runs.iter().map(|r| r.epsilon).collect()));
    let n = runs.first().map_or(0, |r| r.sigma.len());
    for h in 0..n {
        let mut row = vec![Cell::from(h)];
        row.extend(runs.iter().map(|r| Cell::Num(r.sigma[h])));
        t.push(row);
    }
    t
}

pub fn robustness_table(study: &PerturbationStudy) -> Table {
    let mut t = Table::new(Schema::Robustness(study.magnitudes.clone()));
    for r in &study.rows {
        let mut row = vec![Cell::Num(r.epsilon)];
        for s in &r.stats {
            row.extend([Cell::Num(s.max), Cell::Num(s.avg), Cell::Num(s.min)]);
        }
        t.push(row);
    }
    t
}

pub fn histogram_table(study: &PerturbationStudy) -> Table {
    let eps = study.rows.iter().map(|r| r.epsilon).collect();
    let mut t = Table::new(Schema::Histogram(eps));
    for (b, center) in study.histogram.bin_centers.iter().enumerate() {
        let mut row = vec![Cell::Num(*center)];
        row.extend(study.histogram.counts.iter().map(|c| Cell::Int(c[b])));
        t.push(row);
    }
    t
}

pub fn poa_table(points: &[PoaPoint]) -> Table {
    let mut t = Table::new(Schema::Poa);
    for p in points {
        t.push(vec![Cell::Num(p.epsilon), Cell::Num(p.outcome.poa)]);
    }
    t
}

pub fn profile_table(runs: &[EquilibriumRun]) -> Table {
    let mut t = Table::new(Schema::Profile);
    for r in runs {
        for (c, x) in r.actions.iter().enumerate() {
            for (h, v) in x.iter().enumerate() {
                t.push(vec![Cell::Num(r.epsilon), Cell::from(c), Cell::from(h), Cell::Num(*v)]);
            }
        }
    }
    t
}

pub fn report_table(runs: &[EquilibriumRun], game: &GameInstance) -> Table {
    let mut t = Table::new(Schema::Report);
    for r in runs {
        for (c, class) in game.classes.iter().enumerate() {
            let gap = r.report.gaps.get(c).copied().unwrap_or(f64::NAN);
            let cost = r.report.costs.get(c).copied().unwrap_or(f64::NAN);
            let certified = gap <= CERTIFY_REL_TOL * (1.0 + cost.abs());
            t.push(vec![
                Cell::Num(r.epsilon),
                Cell::from(c),
                Cell::from(class.count),
                Cell::Num(r.lambdas[c]),
                Cell::Num(cost),
                Cell::Num(gap),
                Cell::from(certified),
                Cell::from(r.report.iterations),
                Cell::Num(r.report.residual),
                Cell::from(r.report.converged),
            ]);
        }
    }
    t
}

pub fn oracle_check_table(cases: &[AgreementCase]) -> Table {
    let mut t = Table::new(Schema::OracleCheck);
    for (i, c) in cases.iter().enumerate() {
        t.push(vec![
            Cell::from(i),
            Cell::from(c.dim),
            Cell::Num(c.epsilon),
            Cell::Num(c.dual),
            Cell::Num(c.grid),
            Cell::Num(c.bound),
            Cell::from(c.passed()),
        ]);
    }
    t
}

/// Actions per radius, as read back from a profile file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub epsilon: f64,
    pub actions: Vec<Vec<f64>>,
}

/// Reads a file written with [`Schema::Profile`]. Entries come back in the
/// order their radii first appear.
pub fn read_profile(path: &Path) -> Result<Vec<ProfileEntry>> {
    #[derive(Deserialize)]
    struct Row {
        epsilon: f64,
        class: usize,
        hour: usize,
        action_kw: f64,
    }
    let mut out: Vec<ProfileEntry> = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        let row: Row = row?;
        let idx = match out.iter().position(|e| e.epsilon == row.epsilon) {
            Some(i) => i,
            None => {
                out.push(ProfileEntry {
                    epsilon: row.epsilon,
                    actions: Vec::new(),
                });
                out.len() - 1
            }
        };
        let actions = &mut out[idx].actions;
        if actions.len() <= row.class {
            actions.resize(row.class + 1, Vec::new());
        }
        let x = &mut actions[row.class];
        if x.len() <= row.hour {
            x.resize(row.hour + 1, f64::NAN);
        }
        x[row.hour] = row.action_kw;
    }
    for e in &out {
        if e.actions.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Schema(format!(
                "{}: missing hours for epsilon {}",
                path.display(),
                e.epsilon
            )));
        }
    }
    Ok(out)
}

/// A numeric CSV read back for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a CSV whose cells all parse as numbers.
pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("{}: non-numeric cell `{c}`", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Line,
    Bar,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the first column as x and every other column as a series.
pub fn render_svg(table: &NumericTable, kind: ChartKind, title: &str) -> String {
    let series = table.header.len().saturating_sub(1);
    let xs: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let ys = table.rows.iter().flat_map(|r| r[1..].iter().copied());
    let (x0, x1) = nice_range(
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (mut y0, y1) = nice_range(
        ys.clone().fold(f64::INFINITY, f64::min),
        ys.fold(f64::NEG_INFINITY, f64::max),
    );
    if kind == ChartKind::Bar {
        y0 = y0.min(0.0);
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (bx0, by0, bx1, by1) = (MARGIN, MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r##"<rect x="{bx0}" y="{by0}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        bx1 - bx0,
        by1 - by0
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            by1 + 16.0,
            format_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            bx0 - 6.0,
            py(yv) + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(table.header.first().map_or("", String::as_str))
    );

    match kind {
        ChartKind::Line => {
            for j in 0..series {
                let pts: Vec<String> = table
                    .rows
                    .iter()
                    .map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[j + 1])))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.8" points="{}"/>"#,
                    PALETTE[j % PALETTE.len()],
                    pts.join(" ")
                );
            }
        }
        ChartKind::Bar => {
            let step = if xs.len() > 1 {
                (px(xs[1]) - px(xs[0])).abs()
            } else {
                (bx1 - bx0) / 4.0
            };
            let w = 0.8 * step / series.max(1) as f64;
            for r in &table.rows {
                for j in 0..series {
                    let left = px(r[0]) - 0.4 * step + j as f64 * w;
                    let (top, base) = (py(r[j + 1]), py(0.0_f64.max(y0)));
                    let _ = writeln!(
                        s,
                        r#"<rect x="{left:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{}"/>"#,
                        top.min(base),
                        (base - top).abs(),
                        PALETTE[j % PALETTE.len()]
                    );
                }
            }
        }
    }
    for j in 0..series {
        let y = by0 + 14.0 + 14.0 * j as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            bx1 - 150.0,
            y - 9.0,
            PALETTE[j % PALETTE.len()],
            bx1 - 135.0,
            y,
            escape(&table.header[j + 1])
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    format_number((v * 1000.0).round() / 1000.0)
}

/// Chart style for a known result file, `None` for files that are not plotted.
pub fn chart_kind_for(file_name: &str) -> Option<ChartKind> {
    match file_name {
        "histogram.csv" => Some(ChartKind::Bar),
        "valley_filling.csv" | "aggregates.csv" | "robustness.csv" | "poa.csv" => Some(ChartKind::Line),
        _ => None,
    }
}

/// Renders every plottable CSV in `dir` next to it; returns the SVGs written.
pub fn plot_directory(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| chart_kind_for(n).is_some())
        .collect();
    names.sort();
    let mut written = Vec::new();
    for name in names {
        let kind = chart_kind_for(&name).expect("filtered above");
        let table = read_numeric_csv(&dir.join(&name))?;
        let stem = name.trim_end_matches(".csv");
        let out = dir.join(format!("{stem}.svg"));
        fs::write(&out, render_svg(&table, kind, stem))?;
        written.push(out);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::PoaOutcome;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(67.83749999999996), "67.8375");
        assert_eq!(format_number(-1234.5), "-1234.5");
        assert_eq!(format_number(1e-4), "0.0001");
        assert_eq!(format_number(1.5e-9), "1.5e-9");
        assert_eq!(format_number(9.9999999999999e20), "1e21");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn poa_table_has_header_plus_rows() {
        let pts: Vec<PoaPoint> = (0..3)
            .map(|i| PoaPoint {
                epsilon: i as f64,
                outcome: PoaOutcome {
                    poa: 1.0 + i as f64,
                    equilibrium_cost: 1.0,
                    optimal_cost: 1.0,
                },
            })
            .collect();
        let text = poa_table(&pts).to_csv_string().unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("epsilon,price_of_anarchy\n0,1\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn schema_headers() {
        assert_eq!(Schema::Valley(vec![0.0, 2.0]).header().join(","), "hour,0,2,non_pev");
        assert_eq!(
            Schema::Robustness(vec![2.0]).header().join(","),
            "epsilon,worst_individual_cost_2kW,average_individual_cost_2kW,min_individual_cost_2kW"
        );
        assert_eq!(Schema::Histogram(vec![0.5]).header().join(","), "bin_center,count_0.5");
    }

    #[test]
    fn emit_rejects_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(Schema::Poa);
        assert!(matches!(
            emit_csv(&t, &Schema::Profile, &dir.path().join("x.csv")),
            Err(Error::Schema(_))
        ));
        let mut bad = Table::new(Schema::Poa);
        bad.push(vec![Cell::Num(1.0)]);
        assert!(matches!(
            emit_csv(&bad, &Schema::Poa, &dir.path().join("x.csv")),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn config_errors() {
        let empty = parse_config_str("  \n").unwrap_err().to_string();
        assert!(empty.contains("scenario"), "{empty}");
        let missing = parse_config_str("{}").unwrap_err().to_string();
        assert!(missing.contains("scenario"), "{missing}");
        let unknown = parse_config_str(r#"{"scenario": "poa", "solver": {"rho_": 1.0}}"#)
            .unwrap_err()
            .to_string();
        assert!(unknown.contains("rho_"), "{unknown}");
        let bad_order = parse_config_str(r#"{"scenario": "poa", "robustness": {"order": 3}}"#);
        assert!(bad_order.is_err());
        let big_seed = parse_config_str(r#"{"scenario": "poa", "seed": 18446744073709551615}"#).unwrap();
        assert_eq!(big_seed.seed, u64::MAX);
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = RunConfig::new(Scenario::EvCharging);
        cfg.seed = 99;
        cfg.robustness.epsilons = vec![0.0, 1.5];
        cfg.solver.rho = 0.5;
        let back = parse_config_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn profile_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        let mut t = Table::new(Schema::Profile);
        for (e, x) in [(0.0, [1.0, 2.0]), (2.0, [0.25, 1.0 / 3.0])] {
            for (h, v) in x.iter().enumerate() {
                t.push(vec![Cell::Num(e), Cell::from(0), Cell::from(h), Cell::Num(*v)]);
            }
        }
        emit_csv(&t, &Schema::Profile, &path).unwrap();
        let back = read_profile(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].actions, vec![vec![1.0, 2.0]]);
        assert!((back[1].actions[0][1] - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn svg_renders_every_series() {
        let table = NumericTable {
            header: vec!["hour".into(), "0".into(), "2".into()],
            rows: vec![vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 1.0]],
        };
        let line = render_svg(&table, ChartKind::Line, "aggregates");
        assert_eq!(line.matches("<polyline").count(), 2);
        let bar = render_svg(&table, ChartKind::Bar, "histogram");
        assert!(bar.starts_with("<svg") && bar.trim_end().ends_with("</svg>"));
    }
}
