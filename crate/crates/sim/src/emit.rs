//! CSV and JSON emission of sweep results.
//!
//! CSV: `#` comment lines describe the columns and the scalar summaries,
//! then one header row and one row per axis point. Numbers are written with
//! 17 significant digits so every double survives a round trip.
//!
//! JSON: a schema-versioned document echoing the configuration, the code
//! version and the seed next to every sweep. Non-finite numbers are written
//! as `null`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::sweep::SweepResult;
use crate::SimError;

pub const SCHEMA: &str = "fdsim.sweep/1";

/// Code version recorded in JSON output.
pub const CODE_VERSION: &str = env!("FDSIM_GIT_DESCRIBE");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub schema: String,
    pub code_version: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub results: Vec<SweepResult>,
}

impl Document {
    pub fn new(config: &ScenarioConfig, results: Vec<SweepResult>) -> Self {
        Self {
            schema: SCHEMA.into(),
            code_version: CODE_VERSION.into(),
            seed: config.seed,
            config: config.clone(),
            results,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let doc: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        if doc.schema != SCHEMA {
            return Err(SimError::Config(format!("unsupported schema {}", doc.schema)));
        }
        Ok(doc)
    }
}

/// A double with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// CSV rendering of one sweep.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} sweep, {} phase, {} realizations", kind_name(result), result.phase, result.realizations);
    let _ = writeln!(out, "# resampled draws: {} (flagged: {})", result.resamples, result.resample_flag);
    let _ = writeln!(out, "# column {}: sweep axis", result.axis_name);
    for s in &result.series {
        let _ = writeln!(out, "# column {}: {}", s.name, s.description);
        let _ = writeln!(out, "# column {}_se: standard error of {}", s.name, s.name);
    }
    for s in &result.scalars {
        let _ = writeln!(out, "# {} = {}", s.name, format_number(s.value));
    }
    let mut header = vec![result.axis_name.clone()];
    for s in &result.series {
        header.push(s.name.clone());
        header.push(format!("{}_se", s.name));
    }
    let _ = writeln!(out, "{}", header.join(","));
    for (k, x) in result.axis.iter().enumerate() {
        let mut row = vec![format_number(*x)];
        for s in &result.series {
            row.push(format_number(s.mean[k]));
            row.push(format_number(s.stderr[k]));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn kind_name(result: &SweepResult) -> &'static str {
    match result.kind {
        crate::sweep::SweepKind::Rho => "rho",
        crate::sweep::SweepKind::Power => "power",
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), SimError> {
    std::fs::write(path, contents).map_err(|e| SimError::io(path, e))
}

/// Serde adapter writing non-finite doubles as `null`.
pub mod nan_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// [`nan_f64`] for vectors.
pub mod nan_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.is_finite().then_some(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<Option<f64>>::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{Scalar, Series, SweepKind};

    fn sample() -> SweepResult {
        SweepResult {
            kind: SweepKind::Rho,
            phase: "forward".into(),
            axis_name: "rho".into(),
            axis: vec![0.0, 0.5, 1.0],
            series: vec![Series {
                name: "eta_r_fwd_signaling".into(),
                description: "mean R(rho)/R(1)".into(),
                mean: vec![0.0, 1.0 / 3.0, 1.0],
                stderr: vec![f64::NAN, 1e-3, 0.0],
            }],
            scalars: vec![Scalar { name: "power_dbm".into(), value: 24.0 }],
            realizations: 3,
            resamples: 0,
            resample_flag: false,
        }
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&sample());
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "rho,eta_r_fwd_signaling,eta_r_fwd_signaling_se");
        assert_eq!(rows.len(), 4);
        let third: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
        assert_eq!(rows[2].split(',').nth(1).unwrap(), "3.3333333333333331e-1");
        assert_eq!(rows[1].split(',').skip(1).collect::<Vec<_>>(), ["0.0000000000000000e0", "NaN"]);
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let mut r = sample();
        r.axis.clear();
        for s in &mut r.series {
            s.mean.clear();
            s.stderr.clear();
        }
        let csv = to_csv(&r);
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows, vec!["rho,eta_r_fwd_signaling,eta_r_fwd_signaling_se"]);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let doc = Document::new(&ScenarioConfig::default(), vec![sample()]);
        let first = doc.to_json();
        let parsed = Document::from_json(&first).unwrap();
        assert_eq!(parsed.to_json(), first);
        assert!(first.contains("null"));
        assert!(parsed.results[0].series[0].stderr[0].is_nan());
    }

    #[test]
    fn rejects_other_schema() {
        let text = Document::new(&ScenarioConfig::default(), vec![]).to_json().replace(SCHEMA, "other/9");
        assert!(Document::from_json(&text).is_err());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.csv");
        let err = write_file(&path, "x").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("out.csv"));
    }
}
