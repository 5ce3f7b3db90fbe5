//! CSV ingestion and parsing of flag values.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mislogit::grid::{AlphaGrid, GridAxis};
use mislogit::inference::MAX_FINITE_SUPPORT;
use mislogit::model::DEFAULT_DELTA;
use mislogit::{Covariates, Dataset, Support, SupportSpec, Theta};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Covariate columns in header order, plus the outcome when present.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    pub covariates: Covariates,
    pub outcome: Option<Vec<bool>>,
}

impl Table {
    pub fn dataset(&self, outcome_name: &str) -> CliResult<Dataset> {
        let s = self
            .outcome
            .clone()
            .ok_or_else(|| CliError::invalid(format!("input has no outcome column '{outcome_name}'")))?;
        Ok(Dataset::new(self.covariates.clone(), s)?)
    }

    pub fn n(&self) -> usize {
        self.covariates.n()
    }
}

/// Reads a comma-separated file with a header row. Every non-outcome column
/// is a numeric covariate; the outcome column must hold 0 or 1.
pub fn load_csv(path: &Path, outcome: &str, require_outcome: bool) -> CliResult<Table> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    parse_csv(&text, outcome, require_outcome)
}

pub fn parse_csv(text: &str, outcome: &str, require_outcome: bool) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::invalid(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::invalid("missing header row"));
    }
    let mut seen = BTreeSet::new();
    for h in &header {
        if h.is_empty() {
            return Err(CliError::invalid("empty column name in header"));
        }
        if !seen.insert(h.as_str()) {
            return Err(CliError::invalid(format!("duplicate column '{h}'")));
        }
    }
    let s_col = header.iter().position(|h| h == outcome);
    if require_outcome && s_col.is_none() {
        return Err(CliError::invalid(format!("no outcome column '{outcome}' in header")));
    }
    let names: Vec<String> = header.iter().filter(|h| Some(h.as_str()) != s_col.map(|c| header[c].as_str())).cloned().collect();

    let mut values = Vec::new();
    let mut s = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| CliError::invalid(format!("row {row}: {e}")))?;
        if rec.len() != header.len() {
            return Err(CliError::invalid(format!("row {row}: expected {} fields, found {}", header.len(), rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(CliError::invalid(format!("row {row}, column '{}': missing value", header[c])));
            }
            let v: f64 = field.parse().map_err(|_| {
                CliError::invalid(format!("row {row}, column '{}': '{field}' is not a number", header[c]))
            })?;
            if !v.is_finite() {
                return Err(CliError::invalid(format!("row {row}, column '{}': '{field}' is not finite", header[c])));
            }
            if Some(c) == s_col {
                if v != 0.0 && v != 1.0 {
                    return Err(CliError::invalid(format!(
                        "row {row}, column '{outcome}': outcome must be 0 or 1, got '{field}'"
                    )));
                }
                s.push(v == 1.0);
            } else {
                values.push(v);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::invalid("input has no data rows"));
    }
    let covariates = Covariates::from_flat(n, names.len(), values)?;
    Ok(Table { names, covariates, outcome: s_col.map(|_| s) })
}

/// Writes covariates and outcome as CSV, outcome last.
pub fn write_csv<W: Write>(out: W, names: &[String], outcome: &str, data: &Dataset) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = names.iter().map(String::as_str).chain([outcome]).collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.x(i).iter().map(|v| v.to_string()).collect();
        rec.push(if data.outcomes()[i] { "1".into() } else { "0".into() });
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::invalid(e.to_string())
}

/// Parameter vector in the shape accepted by `--theta` and printed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta: Vec<f64>,
}

impl ThetaSpec {
    pub fn of(t: &Theta) -> Self {
        Self {
            alpha1: t.misclass.alpha1(),
            alpha2: t.misclass.alpha2(),
            beta0: t.reg.intercept,
            beta: t.reg.coefs.clone(),
        }
    }
}

pub fn parse_theta(json: &str, p: Option<usize>) -> CliResult<Theta> {
    let spec: ThetaSpec = serde_json::from_str(json).map_err(|e| CliError::invalid(format!("--theta: {e}")))?;
    if let Some(p) = p {
        if spec.beta.len() != p {
            return Err(CliError::invalid(format!("--theta has {} coefficients but the design has {p} covariates", spec.beta.len())));
        }
    }
    Ok(Theta::new(spec.alpha1, spec.alpha2, spec.beta0, spec.beta)?)
}

fn parse_axis(s: &str) -> CliResult<GridAxis> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::invalid(format!("--alpha-grid: expected lo:hi:step, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<CliResult<_>>()?;
    if v[0] < 0.5 {
        return Err(CliError::invalid(format!("--alpha-grid: lower end {} is below 0.5", v[0])));
    }
    Ok(GridAxis::new(v[0], v[1], v[2])?)
}

/// `lo:hi:step` for both rates, or `lo:hi:step,lo:hi:step` for `α₁` then `α₂`.
pub fn parse_grid(s: &str) -> CliResult<AlphaGrid> {
    let axes: Vec<&str> = s.split(',').collect();
    let (a1, a2) = match axes.as_slice() {
        [one] => {
            let ax = parse_axis(one)?;
            (ax, ax)
        }
        [x, y] => (parse_axis(x)?, parse_axis(y)?),
        _ => return Err(CliError::invalid(format!("--alpha-grid: expected one or two axes, got '{s}'"))),
    };
    Ok(AlphaGrid::rect(a1, a2, DEFAULT_DELTA)?)
}

/// Column indices for a comma-separated list of names.
pub fn resolve_columns(list: &str, names: &[String]) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let j = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CliError::invalid(format!("unknown column '{name}'")))?;
        if out.contains(&j) {
            return Err(CliError::invalid(format!("column '{name}' listed twice")));
        }
        out.push(j);
    }
    Ok(out)
}

/// One `--support` flag: `col=v1,v2,...` or `col=continuous`.
pub fn parse_support_flag(s: &str) -> CliResult<(String, Support)> {
    let (name, rest) = s
        .split_once('=')
        .ok_or_else(|| CliError::invalid(format!("--support: expected col=v1,v2,... got '{s}'")))?;
    let name = name.trim().to_string();
    if rest.trim().eq_ignore_ascii_case("continuous") {
        return Ok((name, Support::Continuous));
    }
    let vals = rest
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::invalid(format!("--support {name}: '{v}' is not a number"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((name, Support::finite(vals)?))
}

/// Supports for every covariate: declared ones take precedence, the rest are
/// inferred from `x` when available. Observed values must lie in a declared
/// finite support.
pub fn resolve_support(names: &[String], x: Option<&Covariates>, flags: &[String]) -> CliResult<SupportSpec> {
    let mut declared: Vec<Option<Support>> = vec![None; names.len()];
    for f in flags {
        let (name, sup) = parse_support_flag(f)?;
        let j = names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| CliError::invalid(format!("--support: unknown column '{name}'")))?;
        if declared[j].is_some() {
            return Err(CliError::invalid(format!("--support: column '{name}' declared twice")));
        }
        declared[j] = Some(sup);
    }
    let inferred = match x {
        Some(x) => Some(SupportSpec::infer(x, MAX_FINITE_SUPPORT).map_err(|e| match e {
            mislogit::Error::DegenerateDesign(m) => CliError::invalid(rename_covariate(&m, names)),
            other => other.into(),
        })?),
        None => None,
    };
    let mut out = Vec::with_capacity(names.len());
    for (j, d) in declared.into_iter().enumerate() {
        match (d, &inferred) {
            (Some(sup), Some(_)) => {
                if let Support::Finite(vals) = &sup {
                    let x = x.expect("inferred implies data");
                    if let Some(v) = x.column(j).find(|v| !vals.contains(v)) {
                        return Err(CliError::invalid(format!(
                            "--support {}: observed value {v} is not in the declared support",
                            names[j]
                        )));
                    }
                }
                out.push(sup);
            }
            (Some(sup), None) => out.push(sup),
            (None, Some(inf)) => out.push(inf.get(j).clone()),
            (None, None) => {
                return Err(CliError::invalid(format!("no support for column '{}': pass --input or --support", names[j])));
            }
        }
    }
    Ok(SupportSpec::new(out)?)
}

fn rename_covariate(msg: &str, names: &[String]) -> String {
    for (j, n) in names.iter().enumerate() {
        let key = format!("covariate {j} is constant");
        if msg == key {
            return format!("column '{n}' is constant");
        }
    }
    msg.to_string()
}

/// Comma-separated numbers, as used by `--effects` and `--sizes`.
pub fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> CliResult<Vec<T>> {
    let out = s
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|_| CliError::invalid(format!("{flag}: cannot parse '{v}'"))))
        .collect::<CliResult<Vec<T>>>()?;
    if out.is_empty() {
        return Err(CliError::invalid(format!("{flag}: empty list")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_one_covariate() {
        let t = parse_csv("x,S\n0.5,1\n1.5,0\n2,1\n", "S", true).unwrap();
        assert_eq!(t.n(), 3);
        assert_eq!(t.names, vec!["x"]);
        assert_eq!(t.outcome.unwrap(), vec![true, false, true]);
    }

    #[test]
    fn three_distinct_values_are_finite() {
        let t = parse_csv("S,x\n0,0\n1,1\n0,2\n1,1\n", "S", true).unwrap();
        let s = resolve_support(&t.names, Some(&t.covariates), &[]).unwrap();
        assert_eq!(s.get(0), &Support::Finite(vec![0.0, 1.0, 2.0]));
    }

    #[test]
    fn invalid_outcome_reports_the_row() {
        let e = parse_csv("x,S\n0,1\n1,2\n", "S", true).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.message().contains("row 2"), "{}", e.message());
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let e = parse_csv("x,z,S\n0,1,1\n1,abc,0\n", "S", true).unwrap_err();
        assert!(e.message().contains("row 2") && e.message().contains("'z'"), "{}", e.message());
        let e = parse_csv("x,S\n0,1\n,0\n", "S", true).unwrap_err();
        assert!(e.message().contains("missing"));
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0.8:1:0.1").unwrap().len(), 9);
        assert_eq!(parse_grid("0.9:1:0.1,0.8:1:0.1").unwrap().len(), 6);
        assert!(parse_grid("0.4:1:0.1").is_err());
        assert!(parse_grid("0.8:1").is_err());
    }

    #[test]
    fn support_override_and_check() {
        let names = vec!["x".to_string(), "z".to_string()];
        let x = Covariates::from_rows(&[vec![0.0, 1.0], vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let s = resolve_support(&names, Some(&x), &["z=continuous".into()]).unwrap();
        assert_eq!(s.get(1), &Support::Continuous);
        let s = resolve_support(&names, Some(&x), &["x=0,1,2,3".into()]).unwrap();
        assert_eq!(s.get(0).n_values(), Some(4));
        assert!(resolve_support(&names, Some(&x), &["x=0,2".into()]).is_err());
        assert!(resolve_support(&names, Some(&x), &["w=0,1".into()]).is_err());
        assert!(resolve_support(&names, None, &["x=0,1".into()]).is_err());
    }

    #[test]
    fn theta_round_trip() {
        let t = parse_theta(r#"{"alpha1":0.9,"alpha2":0.85,"beta0":0.1,"beta":[1.0,-2.0]}"#, Some(2)).unwrap();
        let json = serde_json::to_string(&ThetaSpec::of(&t)).unwrap();
        assert_eq!(parse_theta(&json, Some(2)).unwrap(), t);
        assert!(parse_theta(r#"{"alpha1":0.3,"alpha2":0.3,"beta0":0,"beta":[]}"#, None).is_err());
        assert!(parse_theta(&json, Some(3)).is_err());
    }
}
